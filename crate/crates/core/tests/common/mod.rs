//! WebSocket test client and session helpers shared by the integration tests.
#![allow(dead_code)]

use std::net::{SocketAddr, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use motion_retouch::engine::protocol::{ClientMessage, Control, ControlAction, Intervene, ServerMessage};
use motion_retouch::engine::{unix_millis, LiveConfig, LiveOutcome, LiveSession, Scenario};
use motion_retouch::tape::Tape;
use motion_retouch::JointVec;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

pub struct Client {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Client {
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match tungstenite::connect(format!("ws://{addr}")) {
                Ok((ws, _)) => {
                    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
                        s.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
                    }
                    return Client { ws };
                }
                Err(e) if Instant::now() > deadline => panic!("connect: {e}"),
                Err(_) => thread::sleep(Duration::from_millis(10)),
            }
        }
    }

    pub fn send(&mut self, msg: &ClientMessage) {
        self.send_raw(&msg.to_json());
    }

    pub fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::text(text)).unwrap();
    }

    pub fn control(&mut self, seq: u64, action: ControlAction) {
        self.send(&ClientMessage::Control(Control { seq: Some(seq), action, alpha: None }));
    }

    /// Next server message, or None on timeout or close.
    pub fn recv(&mut self, timeout: Duration) -> Option<ServerMessage> {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            match self.ws.read() {
                Ok(Message::Text(t)) => return Some(ServerMessage::parse(t.as_str()).unwrap()),
                Ok(Message::Close(_)) => return None,
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                Err(_) => return None,
            }
        }
        None
    }

    /// Skips snapshots until a reply with `seq` arrives.
    pub fn reply(&mut self, seq: u64) -> ServerMessage {
        let deadline = Instant::now() + Duration::from_secs(5);
        while Instant::now() < deadline {
            match self.recv(Duration::from_millis(100)) {
                Some(ServerMessage::Ack(a)) if a.seq == Some(seq) => return ServerMessage::Ack(a),
                Some(ServerMessage::Error(e)) if e.seq == Some(seq) => return ServerMessage::Error(e),
                _ => {}
            }
        }
        panic!("no reply to {seq}");
    }
}

pub fn spawn_session(tape: &Tape, sc: &Scenario, cfg: LiveConfig) -> (SocketAddr, thread::JoinHandle<LiveOutcome>) {
    let session = LiveSession::bind(SocketAddr::from(([127, 0, 0, 1], 0)), cfg).unwrap();
    let addr = session.local_addr().unwrap();
    let (tape, sc) = (tape.clone(), sc.clone());
    (addr, thread::spawn(move || session.run(&tape, &sc).unwrap()))
}

pub fn intervene_torque(seq: u64, torque: JointVec) -> ClientMessage {
    ClientMessage::Intervene(Intervene {
        seq: Some(seq),
        sent_ms: Some(unix_millis()),
        torque: Some(torque),
        drag: None,
    })
}
