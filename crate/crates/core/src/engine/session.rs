//! Live retouch session over a local WebSocket.
//!
//! The calling thread owns the simulation and runs the control loop. A
//! network thread owns the socket and talks to the loop through two bounded
//! queues; client messages take effect only between control ticks.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};
use tungstenite::{Message, WebSocket};

use super::log::Role;
use super::protocol::{
    Ack, ClientMessage, Control, ControlAction, ErrorReply, Intervene, RobotSnapshot, ServerMessage, SessionConfigView,
    SessionStats, Snapshot,
};
use super::run::{Pacer, RetouchRun, RetouchSim};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::joint::JointVec;
use crate::model::planar_force_to_torque;
use crate::tape::Tape;

const INBOUND_CAPACITY: usize = 256;
const OUTBOUND_CAPACITY: usize = 64;
const IDLE_POLL: Duration = Duration::from_millis(2);

#[derive(Clone, Debug)]
pub struct LiveConfig {
    /// Where `save` writes the retouched tape. The timeline goes next to it.
    pub out: PathBuf,
    /// Snapshot every `decimation` control steps.
    pub decimation: usize,
    /// Per-joint limit on intervention torque (N·m).
    pub clamp: f64,
    /// Interventions older than this when they reach a tick are dropped.
    pub stale_after: Duration,
    /// Wait for a `start` (or `resume`) before the first step.
    pub start_paused: bool,
    /// Pace the loop at wall-clock rate.
    pub realtime: bool,
}

impl LiveConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        LiveConfig {
            out: out.into(),
            decimation: 10,
            clamp: 5.0,
            stale_after: Duration::from_millis(200),
            start_paused: false,
            realtime: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.decimation == 0 {
            return Err(Error::Config("decimation must be >= 1".into()));
        }
        if !(self.clamp.is_finite() && self.clamp >= 0.0) {
            return Err(Error::Config("intervention clamp must be >= 0".into()));
        }
        Ok(())
    }
}

/// Path of the timeline written alongside a saved tape.
pub fn timeline_path(tape_path: &Path) -> PathBuf {
    tape_path.with_extension("timeline.json")
}

#[derive(Debug)]
pub struct LiveOutcome {
    /// The run as far as it got; complete unless the client quit early.
    pub run: RetouchRun,
    pub saved: Option<PathBuf>,
    pub stats: SessionStats,
}

struct Inbound {
    msg: ClientMessage,
    received: Instant,
}

/// A bound, not yet running session.
pub struct LiveSession {
    listener: TcpListener,
    cfg: LiveConfig,
}

impl LiveSession {
    pub fn bind(addr: impl Into<SocketAddr>, cfg: LiveConfig) -> Result<Self> {
        cfg.validate()?;
        let listener = TcpListener::bind(addr.into())?;
        listener.set_nonblocking(true)?;
        Ok(LiveSession { listener, cfg })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Runs the retouch of `tape` until the client quits, or saves after the
    /// run has finished.
    pub fn run(self, tape: &Tape, sc: &Scenario) -> Result<LiveOutcome> {
        let LiveSession { listener, cfg } = self;
        // The loop below does its own pacing, which survives pauses.
        let mut unpaced = sc.clone();
        unpaced.realtime = false;
        let mut sim = RetouchSim::new(tape, &unpaced)?;
        let (in_tx, in_rx) = mpsc::sync_channel::<Inbound>(INBOUND_CAPACITY);
        let (out_tx, out_rx) = mpsc::sync_channel::<String>(OUTBOUND_CAPACITY);
        let shutdown = Arc::new(AtomicBool::new(false));
        let rejected = Arc::new(AtomicU64::new(0));
        let net = {
            let shutdown = shutdown.clone();
            let rejected = rejected.clone();
            thread::Builder::new()
                .name("retouch-session".into())
                .spawn(move || network_loop(listener, in_tx, out_rx, shutdown, rejected))?
        };
        let mut lp = Loop {
            cfg: &cfg,
            out: out_tx,
            stats: SessionStats::default(),
            rejected,
            paused: cfg.start_paused,
            pacer: Pacer::new(cfg.realtime && !cfg.start_paused, sc.dt),
            saved: None,
            quit: false,
        };
        let result = lp.drive(&mut sim, &in_rx);
        shutdown.store(true, Ordering::SeqCst);
        if net.join().is_err() {
            warn!("session network thread panicked");
        }
        result?;
        let stats = lp.stats();
        Ok(LiveOutcome { run: sim.finish(), saved: lp.saved, stats })
    }
}

struct Loop<'c> {
    cfg: &'c LiveConfig,
    out: SyncSender<String>,
    stats: SessionStats,
    rejected: Arc<AtomicU64>,
    paused: bool,
    pacer: Pacer,
    saved: Option<PathBuf>,
    quit: bool,
}

impl Loop<'_> {
    fn stats(&self) -> SessionStats {
        SessionStats { rejected: self.rejected.load(Ordering::Relaxed), ..self.stats }
    }

    fn drive(&mut self, sim: &mut RetouchSim<'_>, inbound: &Receiver<Inbound>) -> Result<()> {
        self.snapshot(sim);
        let mut announced_end = false;
        while !self.quit {
            while let Ok(item) = inbound.try_recv() {
                self.handle(sim, item)?;
            }
            if self.quit {
                break;
            }
            if self.paused || sim.finished() {
                if sim.finished() && !announced_end {
                    self.snapshot(sim);
                    announced_end = true;
                    info!("retouch run finished at step {}", sim.step_index());
                }
                match inbound.recv_timeout(IDLE_POLL) {
                    Ok(item) => self.handle(sim, item)?,
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
                continue;
            }
            let k = sim.step_index();
            self.pacer.wait(k);
            sim.step(None)?;
            if sim.step_index().is_multiple_of(self.cfg.decimation) {
                self.snapshot(sim);
            }
        }
        Ok(())
    }

    fn handle(&mut self, sim: &mut RetouchSim<'_>, item: Inbound) -> Result<()> {
        let seq = item.msg.seq();
        match item.msg {
            ClientMessage::Intervene(m) => {
                if let Some(age) = message_age(&m, item.received) {
                    if age > self.cfg.stale_after {
                        self.stats.stale_dropped += 1;
                        debug!("dropped intervention {seq:?}: {} ms old", age.as_millis());
                        self.send(ServerMessage::Error(ErrorReply {
                            seq,
                            reason: format!("stale intervention ({} ms old)", age.as_millis()),
                        }));
                        return Ok(());
                    }
                }
                let raw = match (m.torque, m.drag) {
                    (Some(t), _) => t,
                    (None, Some([fx, fy])) => {
                        planar_force_to_torque(&sim.editor_state().q, &sim.scenario().params, fx, fy)
                    }
                    (None, None) => JointVec::ZERO,
                };
                let applied = raw.clamp_abs(self.cfg.clamp);
                if !applied.bit_eq(&raw) {
                    self.stats.clamped += 1;
                }
                sim.set_intervention(applied)?;
                self.send(ServerMessage::Ack(Ack {
                    seq,
                    action: "intervene".into(),
                    step: sim.step_index(),
                    applied: Some(applied),
                    path: None,
                    timeline: None,
                }));
            }
            ClientMessage::Control(c) => self.control(sim, c)?,
        }
        Ok(())
    }

    fn control(&mut self, sim: &mut RetouchSim<'_>, c: Control) -> Result<()> {
        let mut ack = Ack {
            seq: c.seq,
            action: action_name(c.action).into(),
            step: sim.step_index(),
            applied: None,
            path: None,
            timeline: None,
        };
        match c.action {
            ControlAction::Start | ControlAction::Resume => {
                if self.paused {
                    self.paused = false;
                    self.pacer = Pacer::resume_at(self.cfg.realtime, sim.scenario().dt, sim.step_index());
                }
            }
            ControlAction::Pause => self.paused = true,
            ControlAction::SetAlpha => {
                let alpha = c.alpha.expect("validated on parse");
                if let Err(e) = sim.set_alpha(alpha) {
                    self.send(ServerMessage::Error(ErrorReply { seq: c.seq, reason: e.to_string() }));
                    return Ok(());
                }
            }
            ControlAction::Save => {
                let path = self.cfg.out.clone();
                let tl_path = timeline_path(&path);
                let written = sim.retouched_tape().save(&path).and_then(|_| sim.timeline().save(&tl_path));
                if let Err(e) = written {
                    self.send(ServerMessage::Error(ErrorReply { seq: c.seq, reason: e.to_string() }));
                    return Ok(());
                }
                info!("saved {} samples to {}", sim.retouched_tape().len(), path.display());
                ack.path = Some(path.display().to_string());
                ack.timeline = Some(tl_path.display().to_string());
                self.saved = Some(path);
                self.quit = sim.finished();
            }
            ControlAction::Quit => self.quit = true,
        }
        self.send(ServerMessage::Ack(ack));
        if !self.quit {
            self.snapshot(sim);
        }
        Ok(())
    }

    fn snapshot(&mut self, sim: &RetouchSim<'_>) {
        let Some(rec) = sim.log().records.last() else {
            return;
        };
        let roles = [Role::Leader, Role::Follower, Role::Editor];
        let snap = Snapshot {
            step: sim.step_index(),
            t: sim.step_index() as f64 * sim.scenario().dt,
            paused: self.paused,
            finished: sim.finished(),
            config: SessionConfigView {
                alpha: sim.alpha(),
                dt: sim.scenario().dt,
                decimation: self.cfg.decimation,
                speed_factor: sim.retouched_tape().meta.speed_factor,
                total_steps: sim.total_steps(),
            },
            robots: roles
                .iter()
                .zip(&rec.robots)
                .map(|(role, r)| RobotSnapshot::new(*role, r.q, r.dq, r.tau_res))
                .collect(),
            contact: rec.contact,
            intervention: rec.intervention,
            stats: self.stats(),
        };
        if let Err(TrySendError::Full(_)) = self.out.try_send(ServerMessage::State(snap).to_json()) {
            self.stats.snapshots_dropped += 1;
        }
    }

    fn send(&self, msg: ServerMessage) {
        if self.out.try_send(msg.to_json()).is_err() {
            warn!("outbound queue full, reply dropped");
        }
    }
}

fn action_name(a: ControlAction) -> &'static str {
    match a {
        ControlAction::Start => "start",
        ControlAction::Pause => "pause",
        ControlAction::Resume => "resume",
        ControlAction::Save => "save",
        ControlAction::Quit => "quit",
        ControlAction::SetAlpha => "set_alpha",
    }
}

/// Age of an intervention: from the client's send stamp when present,
/// otherwise from arrival.
fn message_age(m: &Intervene, received: Instant) -> Option<Duration> {
    match m.sent_ms {
        Some(sent) => {
            let now = SystemTime::now().duration_since(UNIX_EPOCH).ok()?.as_millis() as u64;
            Some(Duration::from_millis(now.saturating_sub(sent)))
        }
        None => Some(received.elapsed()),
    }
}

pub fn unix_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn network_loop(
    listener: TcpListener,
    inbound: SyncSender<Inbound>,
    outbound: Receiver<String>,
    shutdown: Arc<AtomicBool>,
    rejected: Arc<AtomicU64>,
) {
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                info!("session client connected from {peer}");
                match serve_client(stream, &inbound, &outbound, &shutdown, &rejected) {
                    Ok(()) => info!("session client {peer} left"),
                    Err(e) => warn!("session client {peer}: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                // Nobody to deliver to.
                while outbound.try_recv().is_ok() {}
                thread::sleep(IDLE_POLL);
            }
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(IDLE_POLL);
            }
        }
    }
}

fn serve_client(
    stream: TcpStream,
    inbound: &SyncSender<Inbound>,
    outbound: &Receiver<String>,
    shutdown: &AtomicBool,
    rejected: &AtomicU64,
) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws: WebSocket<TcpStream> =
        tungstenite::accept(stream).map_err(|e| Error::Protocol(format!("handshake: {e}")))?;
    ws.get_mut().set_read_timeout(Some(IDLE_POLL))?;
    let ws_err = |e: tungstenite::Error| Error::Protocol(e.to_string());
    loop {
        while let Ok(text) = outbound.try_recv() {
            ws.send(Message::text(text)).map_err(ws_err)?;
        }
        if shutdown.load(Ordering::SeqCst) {
            while let Ok(text) = outbound.try_recv() {
                ws.send(Message::text(text)).map_err(ws_err)?;
            }
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                let received = Instant::now();
                match ClientMessage::parse(text.as_str()) {
                    Ok(msg) => match inbound.try_send(Inbound { msg, received }) {
                        Ok(()) => {}
                        Err(TrySendError::Full(item)) => {
                            rejected.fetch_add(1, Ordering::Relaxed);
                            let reply = ErrorReply { seq: item.msg.seq(), reason: "server busy".into() };
                            ws.send(Message::text(ServerMessage::Error(reply).to_json())).map_err(ws_err)?;
                        }
                        Err(TrySendError::Disconnected(_)) => return Ok(()),
                    },
                    Err(e) => {
                        rejected.fetch_add(1, Ordering::Relaxed);
                        let reply = ErrorReply { seq: None, reason: e.to_string() };
                        ws.send(Message::text(ServerMessage::Error(reply).to_json())).map_err(ws_err)?;
                    }
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(ws_err(e)),
        }
    }
}
