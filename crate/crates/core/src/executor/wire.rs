//! Newline-delimited JSON tick protocol between the executor (server side)
//! and an external planner (client side).
//!
//! ```text
//! server -> {"type":"hello","version":1,"dt":..,"H_c":..,"H_p":..,"map":{..},...}
//! client -> {"type":"ready","version":1}
//! server -> {"type":"tick","step":0,"time":0.0,"agents":[..],"map_hash":".."}
//! client -> {"type":"plan","step":0,"trajectories":[{"id":0,"t0":..,"dt":..,"points":[..]}, ..]}
//!   ... one tick/plan pair per step ...
//! server -> {"type":"bye"}
//! ```

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{InProcessPlanner, PlannerBinding, Session, TickRequest};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::model::{CpmState, MapDocument, MapModel, PeerPrediction, RunConfig, VehicleParams};
use crate::planner::{ReferenceTrajectory, TrajectoryPoint};
use crate::policy::Policy;

pub const PROTOCOL_VERSION: u32 = 1;

/// Hard limit on how long the server waits for a single reply.
pub const DEFAULT_HARD_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: usize,
    pub reference_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub version: u32,
    pub dt: f64,
    #[serde(rename = "H_c")]
    pub h_c: usize,
    #[serde(rename = "H_p")]
    pub h_p: usize,
    pub map: MapDocument,
    pub agents: Vec<AgentInfo>,
    /// Seed of the per-agent policy streams.
    pub seed: u64,
    pub vehicle: VehicleParams,
    pub peer_prediction: PeerPrediction,
    pub integrator_substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentObservation {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub steer_norm: f64,
}

impl AgentObservation {
    fn from_state(id: usize, s: &CpmState) -> Self {
        AgentObservation {
            id,
            x: s.position.x,
            y: s.position.y,
            yaw: s.yaw,
            speed: s.speed,
            steer_norm: s.steering_normalized,
        }
    }

    // Built field by field: re-wrapping an already wrapped yaw can move it by an ulp.
    fn to_state(self) -> CpmState {
        CpmState {
            position: Vec2::new(self.x, self.y),
            yaw: self.yaw,
            speed: self.speed,
            steering_normalized: self.steer_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub step: usize,
    pub time: f64,
    pub agents: Vec<AgentObservation>,
    pub map_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTrajectory {
    pub id: usize,
    pub t0: f64,
    pub dt: f64,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub step: usize,
    pub trajectories: Vec<AgentTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello(Hello),
    Ready { version: u32 },
    Tick(Tick),
    Plan(Plan),
    Bye,
}

impl Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::Hello(_) => "hello",
            Message::Ready { .. } => "ready",
            Message::Tick(_) => "tick",
            Message::Plan(_) => "plan",
            Message::Bye => "bye",
        }
    }
}

/// One JSON document per line in each direction.
pub struct LineTransport<R, W> {
    reader: R,
    writer: W,
    line: String,
}

impl<R: BufRead, W: Write> LineTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        LineTransport {
            reader,
            writer,
            line: String::new(),
        }
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        let mut text = serde_json::to_string(msg)?;
        text.push('\n');
        self.writer.write_all(text.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Message> {
        self.line.clear();
        let read = self
            .reader
            .read_line(&mut self.line)
            .map_err(|e| match e.kind() {
                ErrorKind::WouldBlock | ErrorKind::TimedOut => Error::Timeout(DEFAULT_HARD_TIMEOUT),
                _ => Error::Io(e),
            })?;
        if read == 0 {
            return Err(Error::Protocol("connection closed by peer".into()));
        }
        serde_json::from_str(self.line.trim_end())
            .map_err(|e| Error::Protocol(format!("malformed message: {e}")))
    }
}

fn unexpected(expected: &str, got: &Message) -> Error {
    Error::Protocol(format!("expected {expected}, got {}", got.kind()))
}

/// Orders a plan's trajectories by agent id; every id must appear exactly once.
pub fn trajectories_by_id(plan: Plan, n_agents: usize) -> Result<Vec<ReferenceTrajectory>> {
    let mut slots: Vec<Option<ReferenceTrajectory>> = vec![None; n_agents];
    for t in plan.trajectories {
        let slot = slots
            .get_mut(t.id)
            .ok_or_else(|| Error::Protocol(format!("plan names unknown agent {}", t.id)))?;
        if slot.is_some() {
            return Err(Error::Protocol(format!("plan names agent {} twice", t.id)));
        }
        *slot = Some(ReferenceTrajectory {
            t0: t.t0,
            dt: t.dt,
            points: t.points,
        });
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, s)| s.ok_or_else(|| Error::Protocol(format!("plan is missing agent {id}"))))
        .collect()
}

/// Server-side binding: ships each tick to a remote planner and waits for its plan.
pub struct WirePlanner<R, W> {
    transport: LineTransport<R, W>,
    map_hash: String,
    n_agents: usize,
}

impl<R: BufRead, W: Write> WirePlanner<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        WirePlanner {
            transport: LineTransport::new(reader, writer),
            map_hash: String::new(),
            n_agents: 0,
        }
    }
}

impl WirePlanner<BufReader<TcpStream>, TcpStream> {
    /// Waits for one planner to connect.
    pub fn accept(listener: &TcpListener, hard_timeout: Duration) -> Result<Self> {
        let (stream, peer) = listener.accept()?;
        log::info!("planner connected from {peer}");
        stream.set_read_timeout(Some(hard_timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self::new(BufReader::new(stream.try_clone()?), stream))
    }
}

impl<R: BufRead, W: Write> PlannerBinding for WirePlanner<R, W> {
    fn begin(&mut self, session: &Session<'_>) -> Result<()> {
        let cfg = session.cfg;
        self.map_hash = session.map.content_hash();
        self.n_agents = session.reference_paths.len();
        self.transport.send(&Message::Hello(Hello {
            version: PROTOCOL_VERSION,
            dt: cfg.dt,
            h_c: cfg.h_c,
            h_p: cfg.h_p,
            map: session.map.to_document(),
            agents: session
                .reference_paths
                .iter()
                .enumerate()
                .map(|(id, name)| AgentInfo {
                    id,
                    reference_path: name.clone(),
                })
                .collect(),
            seed: cfg.seed,
            vehicle: cfg.vehicle,
            peer_prediction: cfg.peer_prediction,
            integrator_substeps: cfg.integrator_substeps,
        }))?;
        match self.transport.recv()? {
            Message::Ready { version } if version == PROTOCOL_VERSION => Ok(()),
            Message::Ready { version } => Err(Error::VersionMismatch {
                expected: PROTOCOL_VERSION,
                got: version,
            }),
            other => Err(unexpected("ready", &other)),
        }
    }

    fn plan(&mut self, tick: &TickRequest) -> Result<Vec<ReferenceTrajectory>> {
        self.transport.send(&Message::Tick(Tick {
            step: tick.step,
            time: tick.time,
            agents: tick
                .agents
                .iter()
                .enumerate()
                .map(|(id, s)| AgentObservation::from_state(id, s))
                .collect(),
            map_hash: self.map_hash.clone(),
        }))?;
        match self.transport.recv()? {
            Message::Plan(plan) if plan.step == tick.step => {
                trajectories_by_id(plan, self.n_agents)
            }
            Message::Plan(plan) => Err(Error::Protocol(format!(
                "plan for step {} answers tick {}",
                plan.step, tick.step
            ))),
            other => Err(unexpected("plan", &other)),
        }
    }

    fn end(&mut self) -> Result<()> {
        self.transport.send(&Message::Bye)
    }
}

/// Client side: answers ticks with `policy` until the server says bye.
/// Returns the number of ticks served.
pub fn serve_policy<R: BufRead, W: Write>(
    transport: &mut LineTransport<R, W>,
    policy: &dyn Policy,
) -> Result<usize> {
    let hello = match transport.recv()? {
        Message::Hello(h) => h,
        other => return Err(unexpected("hello", &other)),
    };
    if hello.version != PROTOCOL_VERSION {
        return Err(Error::VersionMismatch {
            expected: PROTOCOL_VERSION,
            got: hello.version,
        });
    }
    let map = MapModel::from_document(hello.map)?;
    let map_hash = map.content_hash();
    let cfg = RunConfig {
        dt: hello.dt,
        h_c: hello.h_c,
        h_p: hello.h_p,
        n_agent: hello.agents.len().max(1),
        seed: hello.seed,
        vehicle: hello.vehicle,
        peer_prediction: hello.peer_prediction,
        integrator_substeps: hello.integrator_substeps,
        ..RunConfig::default()
    };
    cfg.validate()?;
    let names: Vec<String> = hello
        .agents
        .iter()
        .map(|a| a.reference_path.clone())
        .collect();
    let mut planner = InProcessPlanner::new(policy);
    planner.begin(&Session {
        cfg: &cfg,
        map: &map,
        reference_paths: &names,
    })?;
    transport.send(&Message::Ready {
        version: PROTOCOL_VERSION,
    })?;

    let mut served = 0;
    loop {
        match transport.recv()? {
            Message::Tick(tick) => {
                if tick.map_hash != map_hash {
                    return Err(Error::Protocol("tick refers to a different map".into()));
                }
                let mut agents = tick.agents;
                agents.sort_by_key(|a| a.id);
                let request = TickRequest {
                    step: tick.step,
                    time: tick.time,
                    agents: agents.iter().map(|a| a.to_state()).collect(),
                };
                let plans = planner.plan(&request)?;
                transport.send(&Message::Plan(Plan {
                    step: tick.step,
                    trajectories: plans
                        .into_iter()
                        .zip(&agents)
                        .map(|(p, a)| AgentTrajectory {
                            id: a.id,
                            t0: p.t0,
                            dt: p.dt,
                            points: p.points,
                        })
                        .collect(),
                }))?;
                served += 1;
            }
            Message::Bye => return Ok(served),
            other => return Err(unexpected("tick or bye", &other)),
        }
    }
}

/// Connects to a tick server and serves `policy` for one episode.
pub fn connect_and_serve(addr: impl ToSocketAddrs, policy: &dyn Policy) -> Result<usize> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut transport = LineTransport::new(BufReader::new(stream.try_clone()?), stream);
    serve_policy(&mut transport, policy)
}
