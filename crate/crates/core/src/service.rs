//! Networked service: session handlers, an ingest stage with optional link
//! latency, the recognition/control pipeline and the simulator, connected by
//! bounded queues.
//!
//! Peers speak the framed protocol of [`crate::wire`] either over raw TCP or
//! through the websocket bridge. The bridge port also serves static files
//! for the browser console. Each websocket message carries exactly one frame,
//! as binary or as lowercase hex text; replies use the type the peer last
//! sent.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use tungstenite::handshake::derive_accept_key;
use tungstenite::protocol::{Role as WsRole, WebSocket};

use crate::command::{ControlConfig, ControllerEvent, OperationalMode, VelocityCommand};
use crate::gesture::GestureTemplate;
use crate::imu::ImuSample;
use crate::pipeline::Pipeline;
use crate::sim::{Scenario, World};
use crate::wire::{encode, route, Endpoint, FrameReader, Message, Role, Route};

pub const DEFAULT_PORT: u16 = 7878;
pub const PORT_ENV: &str = "WRISTDRIVE_PORT";

const QUEUE_DEPTH: usize = 1024;
const SESSION_QUEUE_DEPTH: usize = 256;
const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    /// 0 picks a free port.
    pub port: u16,
    /// `None` uses `port + 1` (or a free port when `port` is 0).
    pub bridge_port: Option<u16>,
    pub assets: Option<PathBuf>,
    pub scenario: Scenario,
    pub control: ControlConfig,
    pub templates: Vec<GestureTemplate>,
    pub tick_hz: f64,
    /// Delay applied to every operator sample before processing.
    pub latency: Duration,
}

impl ServiceConfig {
    pub fn new(scenario: Scenario, templates: Vec<GestureTemplate>) -> Self {
        Self {
            bind: IpAddr::from([127, 0, 0, 1]),
            port: DEFAULT_PORT,
            bridge_port: None,
            assets: None,
            scenario,
            control: ControlConfig::default(),
            templates,
            tick_hz: crate::harness::DEFAULT_TICK_HZ,
            latency: Duration::ZERO,
        }
    }
}

enum Outbound {
    Frame(Vec<u8>),
    Close,
}

enum HubMsg {
    Register {
        id: u64,
        role: Role,
        tx: SyncSender<Outbound>,
        reply: Sender<bool>,
    },
    Unregister {
        id: u64,
    },
    Deliver {
        from: Endpoint,
        route: Route,
        msg: Message,
    },
}

enum PipelineIn {
    Sample(ImuSample, Instant),
    Reset,
}

/// Running service. Dropping the handle does not stop it; call
/// [`ServiceHandle::shutdown`].
pub struct ServiceHandle {
    local_addr: SocketAddr,
    bridge_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn bridge_addr(&self) -> SocketAddr {
        self.bridge_addr
    }

    pub fn shutdown(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    /// Blocks until every stage has stopped.
    pub fn join(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

pub fn start(cfg: ServiceConfig) -> io::Result<ServiceHandle> {
    if !(cfg.tick_hz > 0.0 && cfg.tick_hz.is_finite()) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "tick rate must be positive"));
    }
    cfg.scenario
        .validate()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    let pipeline = Pipeline::new(cfg.control.clone(), cfg.templates.clone())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;

    let listener = TcpListener::bind((cfg.bind, cfg.port))?;
    let local_addr = listener.local_addr()?;
    let bridge_port = match cfg.bridge_port {
        Some(p) => p,
        None if cfg.port == 0 => 0,
        None => cfg.port.checked_add(1).unwrap_or(0),
    };
    let bridge = TcpListener::bind((cfg.bind, bridge_port))?;
    let bridge_addr = bridge.local_addr()?;
    listener.set_nonblocking(true)?;
    bridge.set_nonblocking(true)?;

    let stop = Arc::new(AtomicBool::new(false));
    let (hub_tx, hub_rx) = mpsc::sync_channel::<HubMsg>(QUEUE_DEPTH);
    let (ingest_tx, ingest_rx) = mpsc::sync_channel::<PipelineIn>(QUEUE_DEPTH);
    let (pipe_tx, pipe_rx) = mpsc::sync_channel::<PipelineIn>(QUEUE_DEPTH);
    let (cmd_tx, cmd_rx) = mpsc::sync_channel::<SimIn>(QUEUE_DEPTH);
    let ids = Arc::new(AtomicU64::new(1));

    let mut threads = Vec::new();
    {
        let stop = stop.clone();
        threads.push(spawn("hub", move || hub(hub_rx, ingest_tx, cmd_tx, stop)));
    }
    {
        let stop = stop.clone();
        let latency = cfg.latency;
        threads.push(spawn("ingest", move || ingest(ingest_rx, pipe_tx, latency, stop)));
    }
    {
        let stop = stop.clone();
        let hub_tx = hub_tx.clone();
        threads.push(spawn("pipeline", move || run_pipeline(pipeline, pipe_rx, hub_tx, stop)));
    }
    {
        let stop = stop.clone();
        let hub_tx = hub_tx.clone();
        let world = World::from_scenario(&cfg.scenario);
        let tick_hz = cfg.tick_hz;
        threads.push(spawn("sim", move || simulate(world, tick_hz, cmd_rx, hub_tx, stop)));
    }
    {
        let stop = stop.clone();
        let hub_tx = hub_tx.clone();
        let ids = ids.clone();
        threads.push(spawn("accept", move || {
            accept_loop(listener, &stop, |stream| {
                let (hub_tx, stop, id) = (hub_tx.clone(), stop.clone(), ids.fetch_add(1, Ordering::Relaxed));
                spawn("session", move || {
                    if let Ok(t) = TcpTransport::new(stream) {
                        session(t, id, hub_tx, stop);
                    }
                });
            })
        }));
    }
    {
        let stop = stop.clone();
        let assets = cfg.assets.clone();
        threads.push(spawn("bridge", move || {
            accept_loop(bridge, &stop, |stream| {
                let (hub_tx, stop, assets) = (hub_tx.clone(), stop.clone(), assets.clone());
                let id = ids.fetch_add(1, Ordering::Relaxed);
                spawn("bridge-session", move || {
                    if let Err(e) = bridge_connection(stream, assets.as_deref(), id, hub_tx, stop) {
                        debug!("bridge connection: {e}");
                    }
                });
            })
        }));
    }
    info!("listening on {local_addr} (frames) and {bridge_addr} (bridge)");
    Ok(ServiceHandle {
        local_addr,
        bridge_addr,
        stop,
        threads,
    })
}

fn spawn<F: FnOnce() + Send + 'static>(name: &str, f: F) -> JoinHandle<()> {
    thread::Builder::new()
        .name(name.into())
        .spawn(f)
        .expect("spawn service thread")
}

fn accept_loop(listener: TcpListener, stop: &AtomicBool, mut on_conn: impl FnMut(TcpStream)) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("connection from {peer}");
                if stream.set_nonblocking(false).is_ok() {
                    on_conn(stream);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn hub(rx: Receiver<HubMsg>, ingest_tx: SyncSender<PipelineIn>, sim_tx: SyncSender<SimIn>, stop: Arc<AtomicBool>) {
    let mut sessions: HashMap<u64, (Role, SyncSender<Outbound>)> = HashMap::new();
    let send_to = |sessions: &mut HashMap<u64, (Role, SyncSender<Outbound>)>, want: &dyn Fn(Role) -> bool, frame: &[u8]| {
        sessions.retain(|_, (role, tx)| {
            if !want(*role) {
                return true;
            }
            !matches!(tx.try_send(Outbound::Frame(frame.to_vec())), Err(TrySendError::Disconnected(_)))
        });
    };
    while !stop.load(Ordering::SeqCst) {
        let msg = match rx.recv_timeout(POLL) {
            Ok(m) => m,
            Err(mpsc::RecvTimeoutError::Timeout) => continue,
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        };
        match msg {
            HubMsg::Register { id, role, tx, reply } => {
                let taken = role == Role::Operator && sessions.values().any(|(r, _)| *r == Role::Operator);
                if taken {
                    let _ = reply.send(false);
                    continue;
                }
                sessions.insert(id, (role, tx));
                if role == Role::Operator {
                    let _ = ingest_tx.try_send(PipelineIn::Reset);
                }
                let _ = reply.send(true);
            }
            HubMsg::Unregister { id } => {
                sessions.remove(&id);
            }
            HubMsg::Deliver { from, route, msg } => {
                let frame = match encode(&msg) {
                    Ok(f) => f,
                    Err(e) => {
                        warn!("dropping unencodable message from {from:?}: {e}");
                        continue;
                    }
                };
                match route {
                    Route::Pipeline => {
                        if let Some(s) = msg.to_sample() {
                            if ingest_tx.try_send(PipelineIn::Sample(s, Instant::now())).is_err() {
                                debug!("ingest queue full; sample dropped");
                            }
                        }
                    }
                    Route::Robots => {
                        if let Message::VelocityCmd { timestamp_us, v, omega } = msg {
                            let cmd = VelocityCommand {
                                v: v as f64,
                                omega: omega as f64,
                                timestamp_us,
                            };
                            let _ = sim_tx.try_send(SimIn::Command(cmd));
                        }
                        send_to(&mut sessions, &|r| r == Role::Robot, &frame);
                    }
                    Route::Operator => send_to(&mut sessions, &|r| r == Role::Operator, &frame),
                    Route::Observers => {
                        if let Message::Mode(m) = msg {
                            let _ = sim_tx.try_send(SimIn::Mode(m));
                        }
                        send_to(&mut sessions, &|r| r != Role::Robot, &frame);
                    }
                    Route::Handshake => {}
                }
            }
        }
    }
    for (_, (_, tx)) in sessions {
        let _ = tx.try_send(Outbound::Close);
    }
}

fn ingest(rx: Receiver<PipelineIn>, tx: SyncSender<PipelineIn>, latency: Duration, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        let item = match rx.recv_timeout(POLL) {
            Ok(i) => i,
            Err(mpsc::RecvTimeoutError::Timeout) => continue,
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        };
        if let PipelineIn::Sample(_, arrived) = &item {
            let due = *arrived + latency;
            while !stop.load(Ordering::SeqCst) {
                let now = Instant::now();
                if now >= due {
                    break;
                }
                thread::sleep((due - now).min(POLL));
            }
        }
        if tx.send(item).is_err() {
            break;
        }
    }
}

fn run_pipeline(mut p: Pipeline, rx: Receiver<PipelineIn>, hub: SyncSender<HubMsg>, stop: Arc<AtomicBool>) {
    let deliver = |msg: Message| -> bool {
        match route(Endpoint::Pipeline, &msg) {
            Ok(route) => hub
                .send(HubMsg::Deliver {
                    from: Endpoint::Pipeline,
                    route,
                    msg,
                })
                .is_ok(),
            Err(e) => {
                warn!("{e}");
                true
            }
        }
    };
    while !stop.load(Ordering::SeqCst) {
        let sample = match rx.recv_timeout(POLL) {
            Ok(PipelineIn::Sample(s, _)) => s,
            Ok(PipelineIn::Reset) => {
                p.reset_stream();
                continue;
            }
            Err(mpsc::RecvTimeoutError::Timeout) => continue,
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        };
        let out = match p.ingest(&sample) {
            Ok(o) => o,
            Err(e) => {
                debug!("sample rejected: {e}");
                continue;
            }
        };
        let mut msgs = Vec::new();
        for e in out.events {
            msgs.push(match e {
                ControllerEvent::VibrationAck { gesture } => Message::gesture_ack(gesture),
                ControllerEvent::ModeChanged { mode } => Message::Mode(mode),
            });
        }
        if let Some(c) = out.command {
            msgs.push(Message::VelocityCmd {
                timestamp_us: c.timestamp_us,
                v: c.v as f32,
                omega: c.omega as f32,
            });
        }
        if !msgs.into_iter().all(deliver) {
            break;
        }
    }
}

enum SimIn {
    Command(VelocityCommand),
    Mode(OperationalMode),
}

fn simulate(mut world: World, tick_hz: f64, rx: Receiver<SimIn>, hub: SyncSender<HubMsg>, stop: Arc<AtomicBool>) {
    let dt = 1.0 / tick_hz;
    let period = Duration::from_secs_f64(dt);
    let mut cmd = VelocityCommand::default();
    let mut mode = OperationalMode::Autonomous;
    let mut next = Instant::now() + period;
    while !stop.load(Ordering::SeqCst) {
        let now = Instant::now();
        if now < next {
            thread::sleep((next - now).min(POLL));
            continue;
        }
        next += period;
        // Latest command wins; nothing queues at the robot.
        while let Ok(m) = rx.try_recv() {
            match m {
                SimIn::Command(c) => cmd = c,
                SimIn::Mode(m) => mode = m,
            }
        }
        if let Err(e) = world.step(&cmd, dt) {
            warn!("simulator step failed: {e}");
            continue;
        }
        let msg = Message::Telemetry(world.snapshot(mode).to_json());
        let sent = hub.try_send(HubMsg::Deliver {
            from: Endpoint::Simulator,
            route: Route::Observers,
            msg,
        });
        if let Err(TrySendError::Disconnected(_)) = sent {
            break;
        }
    }
}

/// One peer connection carrying frames.
trait Transport {
    /// Bytes received, or `None` when the poll interval elapsed.
    fn recv(&mut self) -> io::Result<Option<Vec<u8>>>;
    fn send(&mut self, frame: &[u8]) -> io::Result<()>;
    fn close(&mut self) {}
}

struct TcpTransport {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl TcpTransport {
    fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_read_timeout(Some(POLL))?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            buf: vec![0; 4096],
        })
    }
}

fn timed_out(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

impl Transport for TcpTransport {
    fn recv(&mut self) -> io::Result<Option<Vec<u8>>> {
        match self.stream.read(&mut self.buf) {
            Ok(0) => Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => Ok(Some(self.buf[..n].to_vec())),
            Err(e) if timed_out(&e) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn send(&mut self, frame: &[u8]) -> io::Result<()> {
        self.stream.write_all(frame)
    }

    fn close(&mut self) {
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
    }
}

struct WsTransport {
    ws: WebSocket<TcpStream>,
    text: bool,
}

impl Transport for WsTransport {
    fn recv(&mut self) -> io::Result<Option<Vec<u8>>> {
        use tungstenite::{Error, Message as Ws};
        match self.ws.read() {
            Ok(Ws::Binary(b)) => {
                self.text = false;
                Ok(Some(b.to_vec()))
            }
            Ok(Ws::Text(t)) => {
                self.text = true;
                hex::decode(t.as_str().trim())
                    .map(Some)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
            }
            Ok(Ws::Close(_)) => Err(io::ErrorKind::ConnectionAborted.into()),
            Ok(_) => Ok(None),
            Err(Error::Io(e)) if timed_out(&e) => Ok(None),
            Err(Error::Io(e)) => Err(e),
            Err(e) => Err(io::Error::other(e)),
        }
    }

    fn send(&mut self, frame: &[u8]) -> io::Result<()> {
        let msg = if self.text {
            tungstenite::Message::text(hex::encode(frame))
        } else {
            tungstenite::Message::binary(frame.to_vec())
        };
        let r = self.ws.send(msg);
        match r {
            Ok(()) => Ok(()),
            Err(tungstenite::Error::Io(e)) if timed_out(&e) => Ok(()),
            Err(tungstenite::Error::Io(e)) => Err(e),
            Err(e) => Err(io::Error::other(e)),
        }
    }

    fn close(&mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

/// Runs one session until the peer leaves, breaks protocol or the service
/// stops.
fn session<T: Transport>(mut t: T, id: u64, hub: SyncSender<HubMsg>, stop: Arc<AtomicBool>) {
    let (out_tx, out_rx) = mpsc::sync_channel::<Outbound>(SESSION_QUEUE_DEPTH);
    let mut out_tx = Some(out_tx);
    let mut reader = FrameReader::new();
    let mut role: Option<Role> = None;
    'outer: while !stop.load(Ordering::SeqCst) {
        loop {
            match out_rx.try_recv() {
                Ok(Outbound::Frame(f)) => {
                    if t.send(&f).is_err() {
                        break 'outer;
                    }
                }
                Ok(Outbound::Close) => break 'outer,
                Err(_) => break,
            }
        }
        match t.recv() {
            Ok(Some(bytes)) => reader.extend(&bytes),
            Ok(None) => continue,
            Err(_) => break,
        }
        loop {
            let msg = match reader.next_message() {
                Ok(Some(m)) => m,
                Ok(None) => break,
                Err(e) => {
                    debug!("session {id}: {e}");
                    continue;
                }
            };
            let from = role.map_or(Endpoint::Unidentified, Endpoint::Session);
            let r = match route(from, &msg) {
                Ok(r) => r,
                Err(v) => {
                    warn!("session {id}: {v}; dropping connection");
                    break 'outer;
                }
            };
            if r == Route::Handshake {
                let Message::Hello(want) = msg else { break 'outer };
                let (reply_tx, reply_rx) = mpsc::channel();
                let Some(tx) = out_tx.take() else { break 'outer };
                if hub
                    .send(HubMsg::Register {
                        id,
                        role: want,
                        tx,
                        reply: reply_tx,
                    })
                    .is_err()
                {
                    break 'outer;
                }
                if reply_rx.recv() != Ok(true) {
                    warn!("session {id}: {want} role already taken; dropping connection");
                    break 'outer;
                }
                role = Some(want);
                continue;
            }
            if hub.send(HubMsg::Deliver { from, route: r, msg }).is_err() {
                break 'outer;
            }
        }
    }
    if role.is_some() {
        let _ = hub.send(HubMsg::Unregister { id });
    }
    t.close();
}

const MAX_REQUEST_HEAD: usize = 16 * 1024;

fn bridge_connection(
    mut stream: TcpStream,
    assets: Option<&Path>,
    id: u64,
    hub: SyncSender<HubMsg>,
    stop: Arc<AtomicBool>,
) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut head = Vec::new();
    let mut chunk = [0u8; 1024];
    let end = loop {
        if let Some(p) = head.windows(4).position(|w| w == b"\r\n\r\n") {
            break p + 4;
        }
        if head.len() > MAX_REQUEST_HEAD {
            return respond(&mut stream, "431 Request Header Fields Too Large", "text/plain", b"");
        }
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        head.extend_from_slice(&chunk[..n]);
    };
    let leftover = head.split_off(end);
    let text = String::from_utf8_lossy(&head).into_owned();
    let mut lines = text.split("\r\n");
    let request_line = lines.next().unwrap_or_default();
    let mut parts = request_line.split_whitespace();
    let (method, target) = (parts.next().unwrap_or_default(), parts.next().unwrap_or("/"));
    let headers: HashMap<String, String> = lines
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
        .collect();

    let upgrade = headers
        .get("upgrade")
        .is_some_and(|v| v.eq_ignore_ascii_case("websocket"));
    if upgrade {
        let Some(key) = headers.get("sec-websocket-key") else {
            return respond(&mut stream, "400 Bad Request", "text/plain", b"missing websocket key");
        };
        let reply = format!(
            "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: {}\r\n\r\n",
            derive_accept_key(key.as_bytes())
        );
        stream.write_all(reply.as_bytes())?;
        stream.set_read_timeout(Some(POLL))?;
        stream.set_nodelay(true)?;
        let ws = WebSocket::from_partially_read(stream, leftover, WsRole::Server, None);
        session(WsTransport { ws, text: false }, id, hub, stop);
        return Ok(());
    }
    if method != "GET" && method != "HEAD" {
        return respond(&mut stream, "405 Method Not Allowed", "text/plain", b"");
    }
    match assets.and_then(|root| asset_path(root, target)) {
        Some(path) => match std::fs::read(&path) {
            Ok(body) => {
                let body = if method == "HEAD" { Vec::new() } else { body };
                respond(&mut stream, "200 OK", content_type(&path), &body)
            }
            Err(_) => respond(&mut stream, "404 Not Found", "text/plain", b"not found"),
        },
        None => respond(&mut stream, "404 Not Found", "text/plain", b"not found"),
    }
}

/// Maps a request target onto a file under `root`. Targets that climb out
/// of the root are refused.
pub fn asset_path(root: &Path, target: &str) -> Option<PathBuf> {
    let path = target.split(['?', '#']).next().unwrap_or("/");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut full = root.join(rel);
    if path.ends_with('/') || rel.as_os_str().is_empty() {
        full.push("index.html");
    }
    Some(full)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

fn respond(stream: &mut TcpStream, status: &str, ctype: &str, body: &[u8]) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asset_paths_stay_under_root() {
        let root = Path::new("/srv/console");
        assert_eq!(asset_path(root, "/"), Some(root.join("index.html")));
        assert_eq!(asset_path(root, "/app.js?v=2"), Some(root.join("app.js")));
        assert_eq!(asset_path(root, "/ui/"), Some(root.join("ui/index.html")));
        assert_eq!(asset_path(root, "/../etc/passwd"), None);
        assert_eq!(asset_path(root, "/a/../../b"), None);
    }
}
