//! Live service. One task owns the [`Simulation`] and advances it on a
//! fixed-rate timer; connection tasks only enqueue inbound frames and
//! forward what the owner sends them.
//!
//! TCP clients frame every JSON message with a big-endian `u32` length.
//! Connections that open with `GET ` are upgraded to WebSocket and carry one
//! JSON message per text frame. Both share one listening port.

use std::collections::BTreeMap;
use std::future::Future;
use std::time::Duration;

use bytes::Bytes;
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::{self, UnboundedReceiver, UnboundedSender};
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;
use tokio_util::codec::{Framed, LengthDelimitedCodec};

use crate::config::SimConfig;
use crate::protocol::{ErrorCode, ServerMessage};
use crate::sim::{ClientId, Inbound, Simulation};
use crate::ConductorError;

/// Largest accepted client frame.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug)]
enum Outbound {
    Text(String),
    Close,
}

#[derive(Debug)]
enum Event {
    Connect(ClientId, UnboundedSender<Outbound>),
    Inbound(Inbound),
}

/// Serves `config` on `listener` until `shutdown` resolves.
pub async fn serve(
    config: SimConfig,
    listener: TcpListener,
    shutdown: impl Future<Output = ()>,
) -> Result<(), ConductorError> {
    let sim = Simulation::new(config)?;
    let (tx, rx) = mpsc::unbounded_channel();
    let owner = tokio::spawn(run_owner(sim, rx));
    let mut next_id: ClientId = 1;
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => {
                let Ok((stream, _)) = accepted else { continue };
                let id = next_id;
                next_id += 1;
                tokio::spawn(connection(id, stream, tx.clone()));
            }
        }
    }
    drop(tx);
    owner.abort();
    Ok(())
}

async fn run_owner(mut sim: Simulation, mut rx: UnboundedReceiver<Event>) {
    let period = Duration::from_nanos(sim.config().tick_ns() as u64);
    let mut timer = tokio::time::interval(period);
    timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut clients: BTreeMap<ClientId, UnboundedSender<Outbound>> = BTreeMap::new();
    loop {
        timer.tick().await;
        let mut inputs = Vec::new();
        let mut gone = Vec::new();
        loop {
            match rx.try_recv() {
                Ok(Event::Connect(id, out)) => {
                    clients.insert(id, out);
                }
                Ok(Event::Inbound(ev)) => {
                    if let Inbound::Disconnect(id) = ev {
                        gone.push(id);
                    }
                    inputs.push(ev);
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        let out = sim.step(inputs);
        for (id, reply) in out.replies {
            if let Some(c) = clients.get(&id) {
                let _ = c.send(Outbound::Text(reply.to_json()));
            }
        }
        for id in gone {
            clients.remove(&id);
        }
        if let Some((snapshot, telemetry)) = out.publish {
            let snapshot = ServerMessage::Snapshot(snapshot).to_json();
            let telemetry = ServerMessage::Telemetry(telemetry).to_json();
            for c in clients.values() {
                let _ = c.send(Outbound::Text(telemetry.clone()));
                let _ = c.send(Outbound::Text(snapshot.clone()));
            }
        }
    }
}

async fn connection(id: ClientId, stream: TcpStream, events: UnboundedSender<Event>) {
    let _ = stream.set_nodelay(true);
    let mut head = [0u8; 4];
    let websocket = loop {
        match stream.peek(&mut head).await {
            Ok(0) | Err(_) => return,
            Ok(n) if n < 4 && head[..n] == b"GET "[..n] => {
                tokio::time::sleep(Duration::from_millis(1)).await
            }
            Ok(n) => break n == 4 && &head == b"GET ",
        }
    };
    let (out_tx, out_rx) = mpsc::unbounded_channel();
    if events.send(Event::Connect(id, out_tx.clone())).is_err() {
        return;
    }
    if websocket {
        match tokio_tungstenite::accept_async(stream).await {
            Ok(ws) => websocket_session(id, ws, &events, out_tx, out_rx).await,
            Err(_) => {
                let _ = events.send(Event::Inbound(Inbound::Disconnect(id)));
            }
        }
    } else {
        tcp_session(id, stream, &events, out_tx, out_rx).await;
    }
}

fn violation(out: &UnboundedSender<Outbound>, detail: &str) {
    let msg = ServerMessage::error(ErrorCode::Protocol, detail);
    let _ = out.send(Outbound::Text(msg.to_json()));
    let _ = out.send(Outbound::Close);
}

async fn tcp_session<S>(
    id: ClientId,
    stream: S,
    events: &UnboundedSender<Event>,
    out_tx: UnboundedSender<Outbound>,
    mut out_rx: UnboundedReceiver<Outbound>,
) where
    S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let codec = LengthDelimitedCodec::builder()
        .length_field_length(4)
        .big_endian()
        .max_frame_length(MAX_FRAME)
        .new_codec();
    let (mut sink, mut source) = Framed::new(stream, codec).split();
    let writer = tokio::spawn(async move {
        while let Some(out) = out_rx.recv().await {
            match out {
                Outbound::Text(t) => {
                    if sink.send(Bytes::from(t)).await.is_err() {
                        break;
                    }
                }
                Outbound::Close => break,
            }
        }
        let _ = sink.close().await;
    });
    while let Some(frame) = source.next().await {
        let text = match frame {
            Ok(bytes) => match String::from_utf8(bytes.to_vec()) {
                Ok(t) => t,
                Err(_) => {
                    violation(&out_tx, "frame is not UTF-8");
                    break;
                }
            },
            Err(_) => {
                violation(&out_tx, "bad frame length");
                break;
            }
        };
        if events.send(Event::Inbound(Inbound::message(id, text))).is_err() {
            break;
        }
    }
    let _ = events.send(Event::Inbound(Inbound::Disconnect(id)));
    drop(out_tx);
    let _ = writer.await;
}

async fn websocket_session<S>(
    id: ClientId,
    ws: tokio_tungstenite::WebSocketStream<S>,
    events: &UnboundedSender<Event>,
    out_tx: UnboundedSender<Outbound>,
    mut out_rx: UnboundedReceiver<Outbound>,
) where
    S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let (mut sink, mut source) = ws.split();
    let writer = tokio::spawn(async move {
        while let Some(out) = out_rx.recv().await {
            match out {
                Outbound::Text(t) => {
                    if sink.send(Message::text(t)).await.is_err() {
                        break;
                    }
                }
                Outbound::Close => break,
            }
        }
        let _ = sink.close().await;
    });
    while let Some(msg) = source.next().await {
        match msg {
            Ok(Message::Text(t)) => {
                if t.len() > MAX_FRAME {
                    violation(&out_tx, "frame too large");
                    break;
                }
                if events
                    .send(Event::Inbound(Inbound::message(id, t.as_str())))
                    .is_err()
                {
                    break;
                }
            }
            Ok(Message::Binary(_)) => {
                violation(&out_tx, "binary frames are not part of the protocol");
                break;
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    let _ = events.send(Event::Inbound(Inbound::Disconnect(id)));
    drop(out_tx);
    let _ = writer.await;
}
