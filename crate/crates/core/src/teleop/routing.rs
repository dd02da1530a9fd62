use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ArmId, ConsoleId, TeleopError};

/// A change to the routing table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RoutingCommand {
    /// Teleoperate `psm` in the camera frame of `ecm`.
    AssignPsm { psm: ArmId, ecm: ArmId },
    /// Show `ecm` on `console`.
    SelectView { console: ConsoleId, ecm: ArmId },
    AcquirePsm { console: ConsoleId, psm: ArmId },
    ReleasePsm { console: ConsoleId, psm: ArmId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTable {
    psm_to_ecm: BTreeMap<ArmId, ArmId>,
    ecms: BTreeSet<ArmId>,
    consoles: BTreeSet<ConsoleId>,
    console_view: BTreeMap<ConsoleId, ArmId>,
    ownership: BTreeMap<ArmId, ConsoleId>,
    max_arms_per_console: usize,
}

/// Result of applying a command: the new table plus the PSM whose
/// engagement (if any) must be dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingUpdate {
    pub table: RoutingTable,
    pub invalidated: Option<ArmId>,
}

pub const DEFAULT_MAX_ARMS_PER_CONSOLE: usize = 2;

impl RoutingTable {
    pub fn new(
        psm_to_ecm: BTreeMap<ArmId, ArmId>,
        ecms: BTreeSet<ArmId>,
        consoles: BTreeSet<ConsoleId>,
        max_arms_per_console: usize,
    ) -> Result<Self, TeleopError> {
        if let Some(ecm) = psm_to_ecm.values().find(|e| !ecms.contains(*e)) {
            return Err(TeleopError::UnknownArm(ecm.clone()));
        }
        if let Some(dup) = psm_to_ecm.keys().find(|p| ecms.contains(*p)) {
            return Err(TeleopError::UnknownArm(dup.clone()));
        }
        Ok(RoutingTable {
            psm_to_ecm,
            ecms,
            consoles,
            console_view: BTreeMap::new(),
            ownership: BTreeMap::new(),
            max_arms_per_console,
        })
    }

    pub fn psms(&self) -> impl Iterator<Item = &ArmId> {
        self.psm_to_ecm.keys()
    }

    pub fn ecms(&self) -> impl Iterator<Item = &ArmId> {
        self.ecms.iter()
    }

    pub fn consoles(&self) -> impl Iterator<Item = &ConsoleId> {
        self.consoles.iter()
    }

    pub fn is_psm(&self, id: &ArmId) -> bool {
        self.psm_to_ecm.contains_key(id)
    }

    pub fn is_ecm(&self, id: &ArmId) -> bool {
        self.ecms.contains(id)
    }

    pub fn has_console(&self, id: &ConsoleId) -> bool {
        self.consoles.contains(id)
    }

    pub fn ecm_of(&self, psm: &ArmId) -> Option<&ArmId> {
        self.psm_to_ecm.get(psm)
    }

    pub fn view_of(&self, console: &ConsoleId) -> Option<&ArmId> {
        self.console_view.get(console)
    }

    pub fn owner_of(&self, psm: &ArmId) -> Option<&ConsoleId> {
        self.ownership.get(psm)
    }

    pub fn owned_by<'a>(&'a self, console: &'a ConsoleId) -> impl Iterator<Item = &'a ArmId> + 'a {
        self.ownership
            .iter()
            .filter(move |(_, c)| *c == console)
            .map(|(p, _)| p)
    }

    pub fn owned_count(&self, console: &ConsoleId) -> usize {
        self.owned_by(console).count()
    }

    pub fn max_arms_per_console(&self) -> usize {
        self.max_arms_per_console
    }

    pub fn psm_to_ecm(&self) -> &BTreeMap<ArmId, ArmId> {
        &self.psm_to_ecm
    }

    pub fn console_views(&self) -> &BTreeMap<ConsoleId, ArmId> {
        &self.console_view
    }

    pub fn ownership(&self) -> &BTreeMap<ArmId, ConsoleId> {
        &self.ownership
    }

    fn require_psm(&self, psm: &ArmId) -> Result<(), TeleopError> {
        if self.is_psm(psm) {
            Ok(())
        } else {
            Err(TeleopError::UnknownArm(psm.clone()))
        }
    }

    fn require_ecm(&self, ecm: &ArmId) -> Result<(), TeleopError> {
        if self.is_ecm(ecm) {
            Ok(())
        } else {
            Err(TeleopError::UnknownArm(ecm.clone()))
        }
    }

    fn require_console(&self, c: &ConsoleId) -> Result<(), TeleopError> {
        if self.has_console(c) {
            Ok(())
        } else {
            Err(TeleopError::UnknownConsole(c.clone()))
        }
    }

    /// Applies one command, leaving `self` untouched on error.
    pub fn apply(&self, cmd: &RoutingCommand) -> Result<RoutingUpdate, TeleopError> {
        let mut table = self.clone();
        let mut invalidated = None;
        match cmd {
            RoutingCommand::AssignPsm { psm, ecm } => {
                self.require_psm(psm)?;
                self.require_ecm(ecm)?;
                if table.psm_to_ecm.insert(psm.clone(), ecm.clone()).as_ref() != Some(ecm) {
                    invalidated = Some(psm.clone());
                }
            }
            RoutingCommand::SelectView { console, ecm } => {
                self.require_console(console)?;
                self.require_ecm(ecm)?;
                table.console_view.insert(console.clone(), ecm.clone());
            }
            RoutingCommand::AcquirePsm { console, psm } => {
                self.require_console(console)?;
                self.require_psm(psm)?;
                match self.ownership.get(psm) {
                    Some(owner) if owner == console => {}
                    Some(owner) => {
                        return Err(TeleopError::Owned {
                            psm: psm.clone(),
                            owner: owner.clone(),
                        })
                    }
                    None => {
                        if self.owned_count(console) >= self.max_arms_per_console {
                            return Err(TeleopError::Capacity {
                                console: console.clone(),
                                limit: self.max_arms_per_console,
                            });
                        }
                        table.ownership.insert(psm.clone(), console.clone());
                    }
                }
            }
            RoutingCommand::ReleasePsm { console, psm } => {
                self.require_console(console)?;
                self.require_psm(psm)?;
                if self.ownership.get(psm) != Some(console) {
                    return Err(TeleopError::NotOwner {
                        console: console.clone(),
                        psm: psm.clone(),
                    });
                }
                table.ownership.remove(psm);
                invalidated = Some(psm.clone());
            }
        }
        Ok(RoutingUpdate { table, invalidated })
    }

    /// Drops every PSM owned by `console`, returning them.
    pub fn release_console(&mut self, console: &ConsoleId) -> Vec<ArmId> {
        let released: Vec<ArmId> = self.owned_by(console).cloned().collect();
        for p in &released {
            self.ownership.remove(p);
        }
        released
    }

    /// Checks the structural invariants; used by tests and after config load.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (psm, ecm) in &self.psm_to_ecm {
            if !self.ecms.contains(ecm) {
                return Err(format!("{psm} maps to unknown {ecm}"));
            }
        }
        for (psm, console) in &self.ownership {
            if !self.psm_to_ecm.contains_key(psm) || !self.consoles.contains(console) {
                return Err(format!("dangling ownership {psm} -> {console}"));
            }
        }
        for c in &self.consoles {
            let n = self.owned_count(c);
            if n > self.max_arms_per_console {
                return Err(format!("{c} owns {n} arms"));
            }
        }
        for (c, e) in &self.console_view {
            if !self.consoles.contains(c) || !self.ecms.contains(e) {
                return Err(format!("dangling view {c} -> {e}"));
            }
        }
        Ok(())
    }
}
