use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Reference photon-to-glass budget, ns.
pub const DEFAULT_BUDGET_NS: u64 = 8_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub duration_ns: u64,
}

/// Ordered pipeline stages from acquisition to display.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StageLatency {
    pub stages: Vec<Stage>,
}

impl StageLatency {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, u64)>) -> Self {
        StageLatency {
            stages: pairs
                .into_iter()
                .map(|(n, d)| Stage {
                    name: n.to_owned(),
                    duration_ns: d,
                })
                .collect(),
        }
    }

    /// Illustrative desk-scale figures, not measurements.
    pub fn illustrative() -> Self {
        StageLatency::from_pairs([
            ("acquire", 2_000_000),
            ("transfer", 1_000_000),
            ("demosaic", 1_500_000),
            ("rectify", 1_000_000),
            ("render", 1_000_000),
            ("display", 1_000_000),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageShare {
    pub name: String,
    pub duration_ns: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub photon_to_glass_ns: u64,
    pub budget_ns: u64,
    pub within_budget: bool,
    pub stages: Vec<StageShare>,
}

impl LatencyReport {
    /// `stage,duration_ns,percent` rows followed by a `total` row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "stage,duration_ns,percent")?;
        for s in &self.stages {
            writeln!(w, "{},{},{:.3}", s.name, s.duration_ns, s.percent)?;
        }
        writeln!(w, "total,{},100.000", self.photon_to_glass_ns)
    }
}

pub fn latency_report(stages: &StageLatency, budget_ns: u64) -> Result<LatencyReport, PipelineError> {
    let total = stages
        .stages
        .iter()
        .try_fold(0u64, |acc, s| acc.checked_add(s.duration_ns))
        .ok_or(PipelineError::LatencyOverflow)?;
    let shares = stages
        .stages
        .iter()
        .map(|s| StageShare {
            name: s.name.clone(),
            duration_ns: s.duration_ns,
            percent: if total == 0 {
                0.0
            } else {
                s.duration_ns as f64 * 100.0 / total as f64
            },
        })
        .collect();
    Ok(LatencyReport {
        photon_to_glass_ns: total,
        budget_ns,
        within_budget: total <= budget_ns,
        stages: shares,
    })
}
