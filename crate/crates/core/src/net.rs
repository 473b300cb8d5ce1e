//! Servers as TCP processes speaking a small length-prefixed binary protocol.
//!
//! Every frame is a `u32` little-endian length (of the bytes that follow),
//! one kind byte, and a payload. All integers are little-endian.
//!
//! | kind | payload |
//! |------|---------|
//! | `1` QUERY  | `q: u64`, `m: u32`, then `m` pairs `(file: u32, coefficient: u64)` |
//! | `2` ANSWER | `f: u32`, then `f` values `u64` |
//! | `3` ERROR  | `code: u32`, `len: u32`, then `len` bytes of UTF-8 text |
//!
//! File indices on the wire are 1-based. Coefficients and answer values are
//! below `q`.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::Rng;
use thiserror::Error;

use crate::coded::{check_batch, coded_queries, coded_reconstruct, CodedLayout, CodedSecret, MdsCode, RoundPlan};
use crate::coded::{plan_rounds, CodedError, SecretMode};
use crate::field::{Field, Fp};
use crate::graphs::StorageGraph;
use crate::pir2::{answer, gen_queries, reconstruct, PirError, ServerQuery, Transcript};
use crate::storage::ServerContents;

pub const KIND_QUERY: u8 = 1;
pub const KIND_ANSWER: u8 = 2;
pub const KIND_ERROR: u8 = 3;

pub const ERR_MALFORMED: u32 = 1;
pub const ERR_FIELD_MISMATCH: u32 = 2;
pub const ERR_UNHELD_FILE: u32 = 3;
pub const ERR_UNEXPECTED_KIND: u32 = 4;

/// Frames longer than this are rejected as malformed.
pub const MAX_FRAME: u32 = 1 << 26;

const CLIENT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Query { q: u64, coefficients: Vec<(u32, u64)> },
    Answer { values: Vec<u64> },
    Error { code: u32, message: String },
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("server {} at {endpoint} is unreachable: {source}", .server + 1)]
    Unreachable { server: usize, endpoint: String, source: io::Error },
    #[error("server {} failed: {source}", .server + 1)]
    Transport { server: usize, source: WireError },
    #[error("server {} replied with error {code}: {message}", .server + 1)]
    Remote { server: usize, code: u32, message: String },
    #[error("server {} sent an unexpected reply: {detail}", .server + 1)]
    Protocol { server: usize, detail: String },
    #[error("{endpoints} endpoints for {servers} servers")]
    EndpointCount { endpoints: usize, servers: usize },
    #[error(transparent)]
    Pir(#[from] PirError),
    #[error(transparent)]
    Coded(#[from] CodedError),
}

impl WireMessage {
    /// The full frame, length prefix included.
    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        match self {
            WireMessage::Query { q, coefficients } => {
                body.push(KIND_QUERY);
                body.extend_from_slice(&q.to_le_bytes());
                body.extend_from_slice(&(coefficients.len() as u32).to_le_bytes());
                for &(file, c) in coefficients {
                    body.extend_from_slice(&file.to_le_bytes());
                    body.extend_from_slice(&c.to_le_bytes());
                }
            }
            WireMessage::Answer { values } => {
                body.push(KIND_ANSWER);
                body.extend_from_slice(&(values.len() as u32).to_le_bytes());
                for v in values {
                    body.extend_from_slice(&v.to_le_bytes());
                }
            }
            WireMessage::Error { code, message } => {
                body.push(KIND_ERROR);
                body.extend_from_slice(&code.to_le_bytes());
                body.extend_from_slice(&(message.len() as u32).to_le_bytes());
                body.extend_from_slice(message.as_bytes());
            }
        }
        let mut frame = (body.len() as u32).to_le_bytes().to_vec();
        frame.extend(body);
        frame
    }

    /// Parses a frame body (the bytes after the length prefix).
    pub fn decode(body: &[u8]) -> Result<Self, WireError> {
        let mut r = Cursor { buf: body, pos: 0 };
        let msg = match r.u8()? {
            KIND_QUERY => {
                let q = r.u64()?;
                let m = r.u32()? as usize;
                if m > body.len() / 12 {
                    return Err(WireError::Malformed("coefficient count exceeds frame".into()));
                }
                let mut coefficients = Vec::with_capacity(m);
                for _ in 0..m {
                    let file = r.u32()?;
                    let c = r.u64()?;
                    if c >= q {
                        return Err(WireError::Malformed(format!("coefficient {c} is not below q = {q}")));
                    }
                    coefficients.push((file, c));
                }
                WireMessage::Query { q, coefficients }
            }
            KIND_ANSWER => {
                let f = r.u32()? as usize;
                if f > body.len() / 8 {
                    return Err(WireError::Malformed("value count exceeds frame".into()));
                }
                let values = (0..f).map(|_| r.u64()).collect::<Result<_, _>>()?;
                WireMessage::Answer { values }
            }
            KIND_ERROR => {
                let code = r.u32()?;
                let len = r.u32()? as usize;
                let bytes = r.take(len)?;
                let message = String::from_utf8(bytes.to_vec())
                    .map_err(|_| WireError::Malformed("error text is not UTF-8".into()))?;
                WireMessage::Error { code, message }
            }
            k => return Err(WireError::Malformed(format!("unknown message kind {k}"))),
        };
        if r.pos != body.len() {
            return Err(WireError::Malformed(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(msg)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Malformed("frame ends early".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads one frame body. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Vec<u8>>, WireError> {
    let mut len = [0u8; 4];
    match reader.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len);
    if len == 0 || len > MAX_FRAME {
        return Err(WireError::Malformed(format!("frame length {len}")));
    }
    let mut body = vec![0u8; len as usize];
    reader.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_message<W: Write>(writer: &mut W, msg: &WireMessage) -> io::Result<()> {
    writer.write_all(&msg.encode())?;
    writer.flush()
}

/// The server's reply to one decoded request.
pub fn handle_request(contents: &ServerContents, msg: WireMessage) -> WireMessage {
    let error = |code, message: String| WireMessage::Error { code, message };
    let WireMessage::Query { q, coefficients } = msg else {
        return error(ERR_UNEXPECTED_KIND, "servers only accept QUERY messages".into());
    };
    if q != contents.field.modulus() {
        return error(
            ERR_FIELD_MISMATCH,
            format!("query over q = {q}, server stores data over q = {}", contents.field.modulus()),
        );
    }
    let mut coefs = Vec::with_capacity(coefficients.len());
    for (file, c) in coefficients {
        if file == 0 {
            return error(ERR_UNHELD_FILE, "file indices are 1-based".into());
        }
        coefs.push((file as usize - 1, contents.field.elem(c)));
    }
    match answer(contents, &coefs) {
        Ok(a) => WireMessage::Answer { values: a.into_iter().map(Fp::value).collect() },
        Err(PirError::Unheld { file, .. }) => {
            error(ERR_UNHELD_FILE, format!("server {} does not store file {}", contents.server + 1, file + 1))
        }
        Err(e) => error(ERR_MALFORMED, e.to_string()),
    }
}

/// Serves requests on one connection until the peer closes it or sends a
/// malformed frame.
fn serve_connection(contents: &ServerContents, stream: TcpStream) -> io::Result<()> {
    let mut reader = io::BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    loop {
        let reply = match read_frame(&mut reader) {
            Ok(None) => return Ok(()),
            Ok(Some(body)) => match WireMessage::decode(&body) {
                Ok(msg) => handle_request(contents, msg),
                Err(e) => {
                    let msg = WireMessage::Error { code: ERR_MALFORMED, message: e.to_string() };
                    write_message(&mut writer, &msg)?;
                    return Ok(());
                }
            },
            Err(WireError::Io(e)) => return Err(e),
            Err(e) => {
                let msg = WireMessage::Error { code: ERR_MALFORMED, message: e.to_string() };
                write_message(&mut writer, &msg)?;
                return Ok(());
            }
        };
        write_message(&mut writer, &reply)?;
    }
}

/// Accepts connections one at a time until `stop` is set.
pub fn serve(contents: &ServerContents, listener: &TcpListener, stop: &AtomicBool) -> io::Result<()> {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            // A broken connection only affects that client.
            Ok(s) => {
                let _ = serve_connection(contents, s);
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn spawn<A: ToSocketAddrs>(contents: ServerContents, addr: A) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || serve(&contents, &listener, &flag));
        Ok(ServerHandle { addr, stop, thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_thread()
    }

    fn stop_thread(&mut self) -> io::Result<()> {
        let Some(thread) = self.thread.take() else {
            return Ok(());
        };
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        thread.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked")))
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_thread();
    }
}

/// One `host:port` per line, line `j` being server `j`. Blank lines and `#`
/// comments are skipped.
pub fn parse_endpoints(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sends one query and waits for the answer.
pub fn query_server(server: usize, endpoint: &str, field: Field, coefficients: &[(usize, Fp)]) -> Result<Vec<Fp>, NetError> {
    let unreachable = |source| NetError::Unreachable { server, endpoint: endpoint.to_string(), source };
    let addrs: Vec<SocketAddr> = endpoint.to_socket_addrs().map_err(unreachable)?.collect();
    let mut stream = TcpStream::connect(&addrs[..]).map_err(unreachable)?;
    let transport = |source: WireError| NetError::Transport { server, source };
    stream.set_read_timeout(Some(CLIENT_TIMEOUT)).map_err(|e| transport(e.into()))?;
    stream.set_write_timeout(Some(CLIENT_TIMEOUT)).map_err(|e| transport(e.into()))?;
    let msg = WireMessage::Query {
        q: field.modulus(),
        coefficients: coefficients.iter().map(|&(i, c)| (i as u32 + 1, c.value())).collect(),
    };
    write_message(&mut stream, &msg).map_err(|e| transport(e.into()))?;
    let body = read_frame(&mut stream)
        .map_err(transport)?
        .ok_or_else(|| NetError::Protocol { server, detail: "connection closed before the answer".into() })?;
    match WireMessage::decode(&body).map_err(transport)? {
        WireMessage::Answer { values } => {
            if let Some(v) = values.iter().find(|&&v| v >= field.modulus()) {
                return Err(NetError::Protocol { server, detail: format!("answer value {v} is not below q") });
            }
            Ok(values.into_iter().map(|v| field.elem(v)).collect())
        }
        WireMessage::Error { code, message } => Err(NetError::Remote { server, code, message }),
        WireMessage::Query { .. } => Err(NetError::Protocol { server, detail: "server sent a QUERY".into() }),
    }
}

/// Sends every query concurrently and collects all answers.
pub fn fetch_answers(endpoints: &[String], queries: &[ServerQuery], field: Field) -> Result<Vec<Vec<Fp>>, NetError> {
    if endpoints.len() != queries.len() {
        return Err(NetError::EndpointCount { endpoints: endpoints.len(), servers: queries.len() });
    }
    thread::scope(|scope| {
        let handles: Vec<_> = queries
            .iter()
            .map(|sq| {
                let endpoint = &endpoints[sq.server];
                scope.spawn(move || query_server(sq.server, endpoint, field, &sq.coefficients))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("query thread panicked")).collect()
    })
}

/// Result of a networked 2-replication retrieval.
#[derive(Debug, Clone)]
pub struct NetRetrieval {
    pub value: Vec<Fp>,
    pub transcript: Transcript,
}

/// The 2-replication protocol against remote servers. Consumes randomness
/// exactly like the in-process run.
pub fn client_retrieve<R: Rng + ?Sized>(
    endpoints: &[String],
    g: &StorageGraph,
    phi: usize,
    field: Field,
    rng: &mut R,
) -> Result<NetRetrieval, NetError> {
    if endpoints.len() != g.servers() {
        return Err(NetError::EndpointCount { endpoints: endpoints.len(), servers: g.servers() });
    }
    let (query, secret) = gen_queries(g, phi, field, rng)?;
    let queries = query.server_queries(g);
    let answers = fetch_answers(endpoints, &queries, field)?;
    let value = reconstruct(&answers, &secret)?;
    let upload = queries.iter().map(|q| q.coefficients.len()).sum();
    let download = answers.iter().map(Vec::len).sum();
    Ok(NetRetrieval { value, transcript: Transcript { queries, answers, upload, download } })
}

/// The coded protocol against remote servers holding codeword symbols.
pub fn client_coded_retrieve<R: Rng + ?Sized>(
    endpoints: &[String],
    code: &MdsCode,
    layout: &CodedLayout,
    phis: &[usize],
    mode: SecretMode,
    rng: &mut R,
) -> Result<Vec<Vec<Fp>>, NetError> {
    let s = layout.partition.servers();
    if endpoints.len() != s {
        return Err(NetError::EndpointCount { endpoints: endpoints.len(), servers: s });
    }
    let plan: RoundPlan = plan_rounds(code.length(), code.dimension());
    check_batch(layout.files(), &plan, phis)?;
    let field = code.field();
    let mut secrets: Vec<CodedSecret> = Vec::with_capacity(plan.rounds());
    let mut answers = Vec::with_capacity(plan.rounds());
    for round in 0..plan.rounds() {
        let secret = match (mode, secrets.last()) {
            (SecretMode::Reuse, Some(prev)) => prev.clone(),
            _ => CodedSecret::sample(layout.files(), s, phis, field, rng),
        };
        let queries = coded_queries(layout, &plan, round, &secret);
        answers.push(fetch_answers(endpoints, &queries, field)?);
        secrets.push(secret);
    }
    Ok(coded_reconstruct(code, &layout.partition, &plan, &answers, &secrets)?)
}
