//! Live session server.
//!
//! Three endpoints:
//!
//! - **feed** (TCP): one producer at a time. Every message is a 4-byte
//!   big-endian length followed by UTF-8 text. The first message is
//!   `HELLO SKSTREAM 1 sk14 mm ms`; the server answers `OK` or `ERR <reason>`,
//!   then reads one `F` frame line per message until the producer closes.
//! - **telemetry** (TCP): same framing. The server pushes one `E` record per
//!   event. Clients may send `C <command> <args>` and receive an `R` reply
//!   in line with the events.
//! - **websocket** (optional): one text message per record, same grammar
//!   both ways, for browser consoles.
//!
//! A subscriber first receives the backlog of the current session, then live
//! events. Each subscriber has a bounded queue; when it overflows the
//! subscriber is disconnected and the engine carries on.
//!
//! Control commands:
//!
//! | command            | effect                                                   |
//! |--------------------|----------------------------------------------------------|
//! | `C start`          | new session (only once the current one has ended)        |
//! | `C stop`           | abort the current session                                |
//! | `C set <key> <v>`  | change an engine setting; only between blocks            |
//! | `C status`         | `R ok status <session> <phase>`                          |
//!
//! "Between blocks" means the current session has ended or has not seen a
//! frame yet.

use std::collections::VecDeque;
use std::io::{self, BufRead, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use socket2::SockRef;
use tungstenite::Message;

use crate::error::{ReplayError, StreamError};
use crate::model::SkeletonFrame;
use crate::session::{write_log, LogEntry, Session, SessionLog, SessionSetup};
use crate::stream::replay::{parse_frame_line, parse_header, raw_to_skeleton, SKELETON_JOINT_SET};

/// Largest accepted message body.
pub const MAX_MESSAGE_BYTES: usize = 1 << 20;
/// Kernel send buffer for telemetry sockets. Kept small so a stalled client
/// shows up in its queue instead of in kernel memory.
const SEND_BUFFER_BYTES: usize = 64 * 1024;
const POLL: Duration = Duration::from_millis(10);

/// Write one length-prefixed message.
pub fn write_message<W: Write>(w: &mut W, text: &str) -> io::Result<()> {
    let len = u32::try_from(text.len()).map_err(|_| io::Error::new(ErrorKind::InvalidInput, "message too long"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(text.as_bytes())?;
    w.flush()
}

/// Read one length-prefixed message. `Ok(None)` on a clean close between
/// messages.
pub fn read_message<R: Read>(r: &mut R) -> io::Result<Option<String>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE_BYTES {
        return Err(io::Error::new(ErrorKind::InvalidData, "message too long"));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    String::from_utf8(body)
        .map(Some)
        .map_err(|_| io::Error::new(ErrorKind::InvalidData, "message is not UTF-8"))
}

/// Parse a feed handshake; returns the joint set.
pub fn parse_hello(text: &str) -> Result<String, StreamError> {
    let header = text
        .strip_prefix("HELLO ")
        .ok_or_else(|| StreamError::HandshakeFailure("expected `HELLO`".into()))?;
    let joint_set = parse_header(header).map_err(|e| StreamError::HandshakeFailure(e.to_string()))?;
    if joint_set != SKELETON_JOINT_SET {
        return Err(StreamError::HandshakeFailure(format!("unsupported joint set `{joint_set}`")));
    }
    Ok(joint_set)
}

pub type FrameIter = Box<dyn Iterator<Item = Result<SkeletonFrame, ReplayError>> + Send>;

/// Where frames come from.
pub enum FrameSource {
    /// A finite stream; the server stops when it ends.
    Replay(FrameIter),
    /// Accept live producers on this address until shut down.
    Listen(String),
}

pub struct ServeConfig {
    pub source: FrameSource,
    pub telemetry_addr: String,
    pub ws_addr: Option<String>,
    /// Events queued per subscriber before it is dropped.
    pub subscriber_buffer: usize,
    /// Hold frames until this many subscribers have connected.
    pub min_subscribers: usize,
    /// Write `session-<id>.log` here as each session ends.
    pub log_dir: Option<PathBuf>,
    /// Pace replay frames by their timestamps.
    pub realtime: bool,
}

impl ServeConfig {
    pub fn new(source: FrameSource, telemetry_addr: impl Into<String>) -> Self {
        Self {
            source,
            telemetry_addr: telemetry_addr.into(),
            ws_addr: None,
            subscriber_buffer: 1024,
            min_subscribers: 0,
            log_dir: None,
            realtime: false,
        }
    }
}

/// Everything a finished server produced.
#[derive(Debug, Default)]
pub struct ServeReport {
    /// Logs of every session, in order.
    pub logs: Vec<SessionLog>,
    /// Feed problems (bad handshakes, malformed frames, log write failures).
    pub warnings: Vec<String>,
    /// Subscribers dropped for falling behind.
    pub dropped_subscribers: usize,
}

enum EngineMsg {
    Frame(SkeletonFrame),
    FeedStarted,
    FeedEnded(Option<String>),
    Control { subscriber: u64, text: String },
    Shutdown,
}

struct Subscriber {
    id: u64,
    tx: SyncSender<Arc<str>>,
    closer: Option<TcpStream>,
}

#[derive(Default)]
struct HubState {
    backlog: Vec<Arc<str>>,
    subscribers: Vec<Subscriber>,
    next_id: u64,
    connected_total: usize,
    dropped: usize,
    closed: bool,
}

/// Subscriber id, backlog and live queue.
type Subscription = (u64, Vec<Arc<str>>, Receiver<Arc<str>>);

/// Telemetry fan-out.
struct Hub {
    state: Mutex<HubState>,
    buffer: usize,
}

impl Hub {
    fn new(buffer: usize) -> Self {
        Self { state: Mutex::new(HubState::default()), buffer: buffer.max(1) }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HubState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Register a subscriber. Returns its id, the backlog to send first and
    /// the live queue.
    fn subscribe(&self, closer: Option<TcpStream>) -> Option<Subscription> {
        let mut s = self.lock();
        if s.closed {
            return None;
        }
        let (tx, rx) = mpsc::sync_channel(self.buffer);
        let id = s.next_id;
        s.next_id += 1;
        s.connected_total += 1;
        s.subscribers.push(Subscriber { id, tx, closer });
        Some((id, s.backlog.clone(), rx))
    }

    fn unsubscribe(&self, id: u64) {
        self.lock().subscribers.retain(|sub| sub.id != id);
    }

    fn connected_total(&self) -> usize {
        self.lock().connected_total
    }

    fn publish(&self, line: Arc<str>) {
        let mut s = self.lock();
        s.backlog.push(Arc::clone(&line));
        let mut dropped = 0;
        s.subscribers.retain(|sub| match sub.tx.try_send(Arc::clone(&line)) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                if let Some(c) = &sub.closer {
                    let _ = c.shutdown(std::net::Shutdown::Both);
                }
                dropped += 1;
                false
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
        s.dropped += dropped;
    }

    /// Send to one subscriber only (control replies).
    fn reply(&self, id: u64, line: &str) {
        let s = self.lock();
        if let Some(sub) = s.subscribers.iter().find(|sub| sub.id == id) {
            let _ = sub.tx.try_send(Arc::from(line));
        }
    }

    fn new_session(&self) {
        self.lock().backlog.clear();
    }

    /// Stop accepting; queues drain and then close.
    fn close(&self) {
        let mut s = self.lock();
        s.closed = true;
        s.subscribers.clear();
    }

    /// Force every socket shut (used when writers may be blocked).
    fn close_sockets(&self, sockets: &[TcpStream]) {
        for c in sockets {
            let _ = c.shutdown(std::net::Shutdown::Both);
        }
    }
}

/// Stops a running server from any thread.
#[derive(Clone)]
pub struct ShutdownSignal {
    flag: Arc<AtomicBool>,
    engine: SyncSender<EngineMsg>,
}

impl ShutdownSignal {
    pub fn shutdown(&self) {
        if !self.flag.swap(true, Ordering::SeqCst) {
            let _ = self.engine.send(EngineMsg::Shutdown);
        }
    }
}

pub struct ServeHandle {
    feed_addr: Option<SocketAddr>,
    telemetry_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    signal: ShutdownSignal,
    engine: JoinHandle<(Vec<SessionLog>, Vec<String>)>,
    threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
    sockets: Arc<Mutex<Vec<TcpStream>>>,
    hub: Arc<Hub>,
}

impl ServeHandle {
    pub fn feed_addr(&self) -> Option<SocketAddr> {
        self.feed_addr
    }

    pub fn telemetry_addr(&self) -> SocketAddr {
        self.telemetry_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    pub fn shutdown_signal(&self) -> ShutdownSignal {
        self.signal.clone()
    }

    pub fn shutdown(&self) {
        self.signal.shutdown();
    }

    /// Wait for the engine to finish (end of a replay source, or shutdown),
    /// let subscriber queues drain, then stop every thread.
    pub fn join(self) -> ServeReport {
        let (logs, warnings) = self.engine.join().unwrap_or_default();
        self.signal.flag.store(true, Ordering::SeqCst);
        self.hub.close();
        let drain_deadline = Instant::now() + Duration::from_secs(2);
        loop {
            let all_done = self.threads.lock().map(|t| t.iter().all(|h| h.is_finished())).unwrap_or(true);
            if all_done || Instant::now() > drain_deadline {
                break;
            }
            thread::sleep(POLL);
        }
        if let Ok(sockets) = self.sockets.lock() {
            self.hub.close_sockets(&sockets);
        }
        let threads = std::mem::take(&mut *self.threads.lock().unwrap_or_else(|e| e.into_inner()));
        for t in threads {
            let _ = t.join();
        }
        let dropped_subscribers = self.hub.lock().dropped;
        ServeReport { logs, warnings, dropped_subscribers }
    }
}

fn bind(addr: &str) -> Result<TcpListener, StreamError> {
    let listener = TcpListener::bind(addr).map_err(|source| StreamError::BindFailure { addr: addr.to_string(), source })?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

struct Shared {
    flag: Arc<AtomicBool>,
    hub: Arc<Hub>,
    engine: SyncSender<EngineMsg>,
    threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
    sockets: Arc<Mutex<Vec<TcpStream>>>,
}

impl Shared {
    fn clone_refs(&self) -> Shared {
        Shared {
            flag: Arc::clone(&self.flag),
            hub: Arc::clone(&self.hub),
            engine: self.engine.clone(),
            threads: Arc::clone(&self.threads),
            sockets: Arc::clone(&self.sockets),
        }
    }

    fn spawn(&self, f: impl FnOnce() + Send + 'static) {
        let h = thread::spawn(f);
        self.threads.lock().unwrap_or_else(|e| e.into_inner()).push(h);
    }

    fn track(&self, stream: &TcpStream) {
        if let Ok(c) = stream.try_clone() {
            self.sockets.lock().unwrap_or_else(|e| e.into_inner()).push(c);
        }
    }

    fn stopping(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }
}

/// Accept connections until shutdown, handing each to `handle`.
fn accept_loop(shared: Shared, listener: TcpListener, handle: impl Fn(&Shared, TcpStream) + Send + 'static) {
    let inner = shared.clone_refs();
    shared.spawn(move || {
        while !inner.stopping() {
            match listener.accept() {
                Ok((stream, _)) => {
                    if stream.set_nonblocking(false).is_ok() {
                        handle(&inner, stream);
                    }
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(_) => thread::sleep(POLL),
            }
        }
    });
}

fn telemetry_client(shared: &Shared, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let _ = SockRef::from(&stream).set_send_buffer_size(SEND_BUFFER_BYTES);
    shared.track(&stream);
    let Some((id, backlog, rx)) = shared.hub.subscribe(stream.try_clone().ok()) else {
        return;
    };
    let (Ok(mut writer), Ok(mut reader)) = (stream.try_clone(), stream.try_clone()) else {
        shared.hub.unsubscribe(id);
        return;
    };
    let hub = Arc::clone(&shared.hub);
    shared.spawn(move || {
        let ok = backlog.iter().all(|line| write_message(&mut writer, line).is_ok());
        if ok {
            for line in rx {
                if write_message(&mut writer, &line).is_err() {
                    break;
                }
            }
        }
        hub.unsubscribe(id);
        let _ = writer.shutdown(std::net::Shutdown::Write);
    });
    let engine = shared.engine.clone();
    let hub = Arc::clone(&shared.hub);
    shared.spawn(move || {
        while let Ok(Some(text)) = read_message(&mut reader) {
            route_control(&engine, &hub, id, text);
        }
    });
}

fn route_control(engine: &SyncSender<EngineMsg>, hub: &Hub, id: u64, text: String) {
    if text.starts_with("C ") {
        let _ = engine.send(EngineMsg::Control { subscriber: id, text });
    } else {
        hub.reply(id, "R err expected `C <command>`");
    }
}

fn ws_client(shared: &Shared, stream: TcpStream) {
    shared.track(&stream);
    let inner = shared.clone_refs();
    shared.spawn(move || {
        let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
        let closer = stream.try_clone().ok();
        let Ok(mut ws) = tungstenite::accept(stream) else {
            return;
        };
        let _ = ws.get_ref().set_read_timeout(Some(POLL));
        let Some((id, backlog, rx)) = inner.hub.subscribe(closer) else {
            return;
        };
        let mut pending: VecDeque<Arc<str>> = backlog.into();
        'outer: loop {
            loop {
                match rx.try_recv() {
                    Ok(line) => pending.push_back(line),
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => {
                        for line in pending.drain(..) {
                            if ws.send(Message::text(line.to_string())).is_err() {
                                break;
                            }
                        }
                        let _ = ws.close(None);
                        let _ = ws.flush();
                        break 'outer;
                    }
                }
            }
            for line in pending.drain(..) {
                if ws.send(Message::text(line.to_string())).is_err() {
                    break 'outer;
                }
            }
            match ws.read() {
                Ok(Message::Text(t)) => route_control(&inner.engine, &inner.hub, id, t.to_string()),
                Ok(Message::Close(_)) => break,
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(_) => break,
            }
        }
        inner.hub.unsubscribe(id);
    });
}

fn feed_client(shared: &Shared, mut stream: TcpStream) {
    shared.track(&stream);
    let hello = match read_message(&mut stream) {
        Ok(Some(text)) => text,
        _ => return,
    };
    if let Err(e) = parse_hello(&hello) {
        let _ = write_message(&mut stream, &format!("ERR {e}"));
        let _ = shared.engine.send(EngineMsg::FeedEnded(Some(e.to_string())));
        return;
    }
    if write_message(&mut stream, "OK").is_err() {
        return;
    }
    let _ = shared.engine.send(EngineMsg::FeedStarted);
    let mut line = 1;
    let problem = loop {
        line += 1;
        match read_message(&mut stream) {
            Ok(Some(text)) => {
                let frame = parse_frame_line(&text, line).and_then(|raw| raw_to_skeleton(&raw, line));
                match frame {
                    Ok(f) => {
                        if shared.engine.send(EngineMsg::Frame(f)).is_err() {
                            break None;
                        }
                    }
                    Err(e) => break Some(e.to_string()),
                }
            }
            Ok(None) => break None,
            Err(e) => break Some(format!("feed read failed: {e}")),
        }
    };
    let _ = shared.engine.send(EngineMsg::FeedEnded(problem));
}

fn replay_feeder(shared: &Shared, frames: FrameIter, realtime: bool) {
    let engine = shared.engine.clone();
    let flag = Arc::clone(&shared.flag);
    shared.spawn(move || {
        let _ = engine.send(EngineMsg::FeedStarted);
        let start = Instant::now();
        let mut problem = None;
        for frame in frames {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            match frame {
                Ok(f) => {
                    if realtime {
                        let due = start + Duration::from_millis(f.t_ms());
                        if let Some(wait) = due.checked_duration_since(Instant::now()) {
                            thread::sleep(wait);
                        }
                    }
                    if engine.send(EngineMsg::Frame(f)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    problem = Some(e.to_string());
                    break;
                }
            }
        }
        let _ = engine.send(EngineMsg::FeedEnded(problem));
    });
}

struct Engine {
    setup: Arc<SessionSetup>,
    session: Session,
    started: bool,
    finalized: bool,
    hub: Arc<Hub>,
    log_dir: Option<PathBuf>,
    logs: Vec<SessionLog>,
    warnings: Vec<String>,
}

impl Engine {
    fn publish(&self, entries: &[LogEntry]) {
        for entry in entries {
            if let LogEntry::Event(e) = entry {
                self.hub.publish(Arc::from(e.to_string()));
            }
        }
    }

    fn finalize_if_done(&mut self) {
        if self.finalized || !self.session.phase().is_terminal() {
            return;
        }
        self.finalized = true;
        let log = self.session.log().clone();
        if let Some(dir) = &self.log_dir {
            let path = dir.join(format!("session-{}.log", self.session.id()));
            let result = std::fs::File::create(&path).and_then(|f| {
                let mut sink = io::BufWriter::new(f);
                write_log(&log, &mut sink)?;
                sink.flush()
            });
            if let Err(e) = result {
                self.warnings.push(format!("could not write {}: {e}", path.display()));
            }
        }
        self.logs.push(log);
    }

    fn new_session(&mut self) -> u32 {
        let id = self.session.id() + 1;
        self.session = Session::new(id, Arc::clone(&self.setup));
        self.started = false;
        self.finalized = false;
        self.hub.new_session();
        id
    }

    fn frame(&mut self, frame: &SkeletonFrame) {
        if self.session.phase().is_terminal() {
            return;
        }
        self.started = true;
        let entries = match self.session.step(frame) {
            Ok(entries) => entries,
            Err(e) => {
                self.warnings.push(e.to_string());
                let n = self.session.log().entries().len();
                // The abort entry was appended before the error returned.
                self.session.log().entries()[n.saturating_sub(1)..].to_vec()
            }
        };
        self.publish(&entries);
        self.finalize_if_done();
    }

    fn end_session(&mut self, stopped: bool) {
        let entries = if stopped { self.session.stop() } else { self.session.end_of_stream() };
        self.publish(&entries);
        self.finalize_if_done();
    }

    fn control(&mut self, text: &str) -> String {
        let args: Vec<&str> = text.split_whitespace().skip(1).collect();
        let between_blocks = self.session.phase().is_terminal() || !self.started;
        match args.as_slice() {
            ["start"] => {
                if !self.session.phase().is_terminal() {
                    return "R err session running".into();
                }
                format!("R ok start {}", self.new_session())
            }
            ["stop"] => {
                if self.session.phase().is_terminal() {
                    return "R err no session running".into();
                }
                self.end_session(true);
                "R ok stop".into()
            }
            ["status"] => format!("R ok status {} {}", self.session.id(), self.session.phase()),
            ["set", key, value] => {
                if !between_blocks {
                    return "R err between blocks only".into();
                }
                let mut config = self.setup.config().clone();
                match config.set(key, value) {
                    Ok(true) => {}
                    Ok(false) => return format!("R err `{key}` is not a session setting"),
                    Err(e) => return format!("R err {e}"),
                }
                let setup = SessionSetup::new(config, self.setup.posture().clone(), self.setup.path().clone());
                match setup {
                    Ok(setup) => {
                        self.setup = Arc::new(setup);
                        if !self.session.phase().is_terminal() {
                            self.session = Session::new(self.session.id(), Arc::clone(&self.setup));
                        }
                        format!("R ok set {key} {value}")
                    }
                    Err(e) => format!("R err {e}"),
                }
            }
            _ => "R err unknown command".into(),
        }
    }
}

/// Start serving. Returns once every endpoint is bound.
pub fn serve_session(setup: Arc<SessionSetup>, config: ServeConfig) -> Result<ServeHandle, StreamError> {
    if let Some(dir) = &config.log_dir {
        std::fs::create_dir_all(dir)?;
    }
    let telemetry = bind(&config.telemetry_addr)?;
    let telemetry_addr = telemetry.local_addr()?;
    let ws = config.ws_addr.as_deref().map(bind).transpose()?;
    let ws_addr = ws.as_ref().map(TcpListener::local_addr).transpose()?;
    let (feed, replay) = match config.source {
        FrameSource::Listen(addr) => (Some(bind(&addr)?), None),
        FrameSource::Replay(frames) => (None, Some(frames)),
    };
    let feed_addr = feed.as_ref().map(TcpListener::local_addr).transpose()?;
    let is_replay = replay.is_some();

    let (engine_tx, engine_rx) = mpsc::sync_channel::<EngineMsg>(1024);
    let shared = Shared {
        flag: Arc::new(AtomicBool::new(false)),
        hub: Arc::new(Hub::new(config.subscriber_buffer)),
        engine: engine_tx.clone(),
        threads: Arc::new(Mutex::new(Vec::new())),
        sockets: Arc::new(Mutex::new(Vec::new())),
    };

    accept_loop(shared.clone_refs(), telemetry, telemetry_client);
    if let Some(ws) = ws {
        accept_loop(shared.clone_refs(), ws, ws_client);
    }
    if let Some(feed) = feed {
        accept_loop(shared.clone_refs(), feed, feed_client);
    }

    let mut engine = Engine {
        session: Session::new(1, Arc::clone(&setup)),
        setup,
        started: false,
        finalized: false,
        hub: Arc::clone(&shared.hub),
        log_dir: config.log_dir,
        logs: Vec::new(),
        warnings: Vec::new(),
    };
    let min_subscribers = config.min_subscribers;
    let flag = Arc::clone(&shared.flag);
    let hub = Arc::clone(&shared.hub);
    let feeder = shared.clone_refs();
    let realtime = config.realtime;
    let engine_thread = thread::spawn(move || {
        while hub.connected_total() < min_subscribers && !flag.load(Ordering::SeqCst) {
            thread::sleep(Duration::from_millis(2));
        }
        if let Some(frames) = replay {
            replay_feeder(&feeder, frames, realtime);
        }
        drop(feeder);
        loop {
            let msg = match engine_rx.recv_timeout(Duration::from_millis(100)) {
                Ok(msg) => msg,
                Err(RecvTimeoutError::Timeout) if flag.load(Ordering::SeqCst) => EngineMsg::Shutdown,
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => EngineMsg::Shutdown,
            };
            match msg {
                EngineMsg::Frame(f) => engine.frame(&f),
                EngineMsg::FeedStarted => {
                    if engine.started && engine.session.phase().is_terminal() {
                        engine.new_session();
                    }
                }
                EngineMsg::FeedEnded(problem) => {
                    if let Some(p) = problem {
                        engine.warnings.push(p);
                    }
                    if engine.started {
                        engine.end_session(false);
                    }
                    if is_replay {
                        break;
                    }
                }
                EngineMsg::Control { subscriber, text } => {
                    let reply = engine.control(&text);
                    engine.hub.reply(subscriber, &reply);
                }
                EngineMsg::Shutdown => {
                    if engine.started {
                        engine.end_session(true);
                    }
                    break;
                }
            }
        }
        (engine.logs, engine.warnings)
    });

    Ok(ServeHandle {
        feed_addr,
        telemetry_addr,
        ws_addr,
        signal: ShutdownSignal { flag: Arc::clone(&shared.flag), engine: engine_tx },
        engine: engine_thread,
        threads: shared.threads,
        sockets: shared.sockets,
        hub: shared.hub,
    })
}

/// Stream a replay file to a live feed endpoint. Returns the frame count.
pub fn send_feed<R: BufRead>(addr: SocketAddr, source: R, realtime: bool) -> Result<usize, StreamError> {
    let frames = crate::stream::replay::read_replay(source)?;
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    write_message(&mut stream, &format!("HELLO {}", crate::stream::replay::header_line(SKELETON_JOINT_SET)))?;
    match read_message(&mut stream)? {
        Some(reply) if reply == "OK" => {}
        other => return Err(StreamError::HandshakeFailure(other.unwrap_or_else(|| "connection closed".into()))),
    }
    let start = Instant::now();
    let mut count = 0;
    for frame in frames {
        let frame = frame?;
        if realtime {
            let due = start + Duration::from_millis(frame.t_ms());
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        write_message(&mut stream, &crate::stream::replay::format_frame(&frame))?;
        count += 1;
    }
    stream.shutdown(std::net::Shutdown::Write)?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_framing_round_trips() {
        let mut buf = Vec::new();
        write_message(&mut buf, "HELLO SKSTREAM 1 sk14 mm ms").unwrap();
        write_message(&mut buf, "").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 27]);
        let mut r = buf.as_slice();
        assert_eq!(read_message(&mut r).unwrap().as_deref(), Some("HELLO SKSTREAM 1 sk14 mm ms"));
        assert_eq!(read_message(&mut r).unwrap().as_deref(), Some(""));
        assert_eq!(read_message(&mut r).unwrap(), None);
    }

    #[test]
    fn truncated_message_is_an_error() {
        let mut r: &[u8] = &[0, 0, 0, 9, b'a'];
        assert!(read_message(&mut r).is_err());
        let mut r: &[u8] = &[0, 0];
        assert!(read_message(&mut r).is_err());
    }

    #[test]
    fn hello_validation() {
        assert!(parse_hello("HELLO SKSTREAM 1 sk14 mm ms").is_ok());
        for bad in ["SKSTREAM 1 sk14 mm ms", "HELLO SKSTREAM 2 sk14 mm ms", "HELLO SKSTREAM 1 racket mm ms", "HELLO"] {
            assert!(matches!(parse_hello(bad), Err(StreamError::HandshakeFailure(_))), "{bad}");
        }
    }
}
