// SPDX-License-Identifier: Apache-2.0

//! Point-to-point links between parties, sequence-checked endpoints and a
//! transcript recorder.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use vfl_he::{Base, PublicKey};

use crate::error::{ProtocolError, Result};
use crate::message::{Frame, Kind, Message, MAX_FRAME};
use crate::party::PartyRole;

/// A bidirectional byte-frame link to one peer.
pub trait Link: Send {
    fn send(&mut self, frame: &[u8]) -> Result<()>;
    fn recv(&mut self) -> Result<Vec<u8>>;
}

/// In-process link over channels.
pub struct ChannelLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    timeout: Duration,
}

/// Two connected in-process link ends.
pub fn channel_pair(timeout: Duration) -> (ChannelLink, ChannelLink) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (ChannelLink { tx: tx_a, rx: rx_a, timeout }, ChannelLink { tx: tx_b, rx: rx_b, timeout })
}

impl Link for ChannelLink {
    fn send(&mut self, frame: &[u8]) -> Result<()> {
        self.tx.send(frame.to_vec()).map_err(|_| ProtocolError::Transport("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        self.rx.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => ProtocolError::Transport("receive timed out".into()),
            RecvTimeoutError::Disconnected => ProtocolError::Transport("peer hung up".into()),
        })
    }
}

/// Length-framed TCP link.
pub struct TcpLink {
    stream: TcpStream,
}

impl TcpLink {
    pub fn new(stream: TcpStream, timeout: Duration) -> Result<Self> {
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(TcpLink { stream })
    }
}

impl Link for TcpLink {
    fn send(&mut self, frame: &[u8]) -> Result<()> {
        self.stream.write_all(frame)?;
        Ok(self.stream.flush()?)
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        let mut len = [0u8; 4];
        self.stream.read_exact(&mut len)?;
        let body = u32::from_be_bytes(len) as usize;
        if body > MAX_FRAME {
            return Err(ProtocolError::Malformed(format!("frame of {body} bytes exceeds limit")));
        }
        let mut frame = vec![0u8; 4 + body];
        frame[..4].copy_from_slice(&len);
        self.stream.read_exact(&mut frame[4..])?;
        Ok(frame)
    }
}

/// One sent frame as seen on the wire.
#[derive(Clone, Debug)]
pub struct Record {
    pub from: PartyRole,
    pub to: PartyRole,
    pub kind: Kind,
    pub ciphertexts: usize,
    pub frame: Vec<u8>,
}

impl Record {
    pub fn payload(&self) -> &[u8] {
        &self.frame[crate::message::HEADER_LEN..]
    }
}

/// Shared log of every frame sent by the endpoints it is attached to.
#[derive(Clone, Default)]
pub struct Recorder(Arc<Mutex<Vec<Record>>>);

impl Recorder {
    pub fn new() -> Self {
        Recorder::default()
    }

    fn push(&self, r: Record) {
        self.0.lock().expect("recorder lock").push(r);
    }

    pub fn transcript(&self) -> Transcript {
        Transcript { records: self.0.lock().expect("recorder lock").clone() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Transcript {
    pub records: Vec<Record>,
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

impl Transcript {
    /// Records whose payload contains `pattern`.
    pub fn find_bytes(&self, pattern: &[u8]) -> Vec<&Record> {
        self.records.iter().filter(|r| contains(r.payload(), pattern)).collect()
    }

    /// Values whose binary64 encoding (either byte order) occurs in a payload.
    pub fn find_f64(&self, values: &[f64]) -> Vec<f64> {
        let mut needles: Vec<(f64, [u8; 8], [u8; 8])> =
            values.iter().map(|&v| (v, v.to_be_bytes(), v.to_le_bytes())).collect();
        needles.sort_by_key(|n| n.1);
        needles.dedup_by(|a, b| a.1 == b.1);
        let mut hits = Vec::new();
        for (v, be, le) in needles {
            if self.records.iter().any(|r| contains(r.payload(), &be) || contains(r.payload(), &le)) {
                hits.push(v);
            }
        }
        hits
    }

    pub fn sent_by(&self, role: PartyRole) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.from == role)
    }

    pub fn received_by(&self, role: PartyRole) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.to == role)
    }

    /// Total ciphertexts carried by messages of `kind`.
    pub fn ciphertexts(&self, kind: Kind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).map(|r| r.ciphertexts).sum()
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }
}

/// A party's view of the network: one link per peer, per-direction sequence
/// numbers and the session key once known.
pub struct Endpoint {
    role: PartyRole,
    session: u64,
    links: HashMap<PartyRole, Box<dyn Link>>,
    next_seq: HashMap<PartyRole, u64>,
    last_seen: HashMap<PartyRole, u64>,
    recorder: Option<Recorder>,
    key: Option<(PublicKey, Base)>,
}

impl Endpoint {
    pub fn new(role: PartyRole, session: u64) -> Self {
        Endpoint {
            role,
            session,
            links: HashMap::new(),
            next_seq: HashMap::new(),
            last_seen: HashMap::new(),
            recorder: None,
            key: None,
        }
    }

    pub fn role(&self) -> PartyRole {
        self.role
    }

    pub fn add_link(&mut self, peer: PartyRole, link: Box<dyn Link>) {
        self.links.insert(peer, link);
    }

    pub fn set_recorder(&mut self, recorder: Recorder) {
        self.recorder = Some(recorder);
    }

    pub fn set_key(&mut self, key: PublicKey, base: Base) {
        self.key = Some((key, base));
    }

    fn link(&mut self, peer: PartyRole) -> Result<&mut Box<dyn Link>> {
        let role = self.role;
        self.links.get_mut(&peer).ok_or_else(|| ProtocolError::Transport(format!("{role:?} has no link to {peer:?}")))
    }

    pub fn send(&mut self, to: PartyRole, msg: &Message) -> Result<()> {
        let seq = self.next_seq.entry(to).or_insert(0);
        let frame = Frame { kind: msg.kind(), session: self.session, seq: *seq, payload: msg.payload() };
        *seq += 1;
        let bytes = frame.to_bytes();
        if let Some(rec) = &self.recorder {
            rec.push(Record {
                from: self.role,
                to,
                kind: frame.kind,
                ciphertexts: msg.ciphertexts(),
                frame: bytes.clone(),
            });
        }
        self.link(to)?.send(&bytes)
    }

    /// Receives the next message from `from`; an `Abort` becomes an error.
    pub fn recv(&mut self, from: PartyRole) -> Result<Message> {
        let bytes = self.link(from)?.recv()?;
        let frame = Frame::from_bytes(&bytes)?;
        if frame.session != self.session {
            return Err(ProtocolError::Session { expected: self.session, got: frame.session });
        }
        let last = self.last_seen.get(&from).copied();
        if last.is_some_and(|l| frame.seq <= l) {
            return Err(ProtocolError::Sequence { from, got: frame.seq, last });
        }
        self.last_seen.insert(from, frame.seq);
        let key = self.key.as_ref().map(|(k, b)| (k, *b));
        match Message::decode(frame.kind, &frame.payload, key)? {
            Message::Abort(reason) => Err(ProtocolError::Aborted { by: from, reason }),
            msg => Ok(msg),
        }
    }

    /// Best-effort abort notice to every peer.
    pub fn abort(&mut self, reason: &str) {
        let peers: Vec<PartyRole> = self.links.keys().copied().collect();
        for p in peers {
            let _ = self.send(p, &Message::Abort(reason.to_string()));
        }
    }
}

/// Fully connected in-process endpoints, returned as `[C, A, B]`.
pub fn in_process_mesh(session: u64, timeout: Duration, recorder: Option<&Recorder>) -> [Endpoint; 3] {
    let mut eps = PartyRole::ALL.map(|r| Endpoint::new(r, session));
    for i in 0..3 {
        for j in i + 1..3 {
            let (x, y) = channel_pair(timeout);
            eps[i].add_link(PartyRole::ALL[j], Box::new(x));
            eps[j].add_link(PartyRole::ALL[i], Box::new(y));
        }
    }
    if let Some(rec) = recorder {
        for ep in &mut eps {
            ep.set_recorder(rec.clone());
        }
    }
    eps
}

/// Addresses for socket mode: C and A listen, A and B dial.
#[derive(Clone, Copy, Debug)]
pub struct TcpAddrs {
    pub coordinator: SocketAddr,
    pub provider_a: SocketAddr,
}

fn dial(addr: SocketAddr, me: PartyRole, timeout: Duration) -> Result<TcpStream> {
    let start = Instant::now();
    loop {
        match TcpStream::connect(addr) {
            Ok(mut s) => {
                s.write_all(&[me as u8])?;
                return Ok(s);
            }
            Err(e) if start.elapsed() >= timeout => return Err(e.into()),
            Err(_) => std::thread::sleep(Duration::from_millis(20)),
        }
    }
}

fn accept(listener: &TcpListener) -> Result<(PartyRole, TcpStream)> {
    let (mut s, _) = listener.accept()?;
    let mut who = [0u8; 1];
    s.read_exact(&mut who)?;
    Ok((PartyRole::from_u8(who[0])?, s))
}

/// Connects one party over TCP. `listener` is required for C and A.
pub fn tcp_endpoint(
    role: PartyRole,
    session: u64,
    listener: Option<&TcpListener>,
    addrs: TcpAddrs,
    timeout: Duration,
) -> Result<Endpoint> {
    let mut ep = Endpoint::new(role, session);
    let need_listener = || listener.ok_or_else(|| ProtocolError::Config(format!("{role:?} needs a listening socket")));
    let incoming = |expected: &[PartyRole], ep: &mut Endpoint| -> Result<()> {
        let l = need_listener()?;
        for _ in expected {
            let (peer, s) = accept(l)?;
            if !expected.contains(&peer) || ep.links.contains_key(&peer) {
                return Err(ProtocolError::Transport(format!("unexpected connection from {peer:?}")));
            }
            ep.add_link(peer, Box::new(TcpLink::new(s, timeout)?));
        }
        Ok(())
    };
    match role {
        PartyRole::Coordinator => incoming(&[PartyRole::ProviderA, PartyRole::ProviderB], &mut ep)?,
        PartyRole::ProviderA => {
            let c = dial(addrs.coordinator, role, timeout)?;
            ep.add_link(PartyRole::Coordinator, Box::new(TcpLink::new(c, timeout)?));
            incoming(&[PartyRole::ProviderB], &mut ep)?;
        }
        PartyRole::ProviderB => {
            let c = dial(addrs.coordinator, role, timeout)?;
            ep.add_link(PartyRole::Coordinator, Box::new(TcpLink::new(c, timeout)?));
            let a = dial(addrs.provider_a, role, timeout)?;
            ep.add_link(PartyRole::ProviderA, Box::new(TcpLink::new(a, timeout)?));
        }
    }
    Ok(ep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::Purpose;

    fn broadcast(b: u64) -> Message {
        Message::ModelBroadcast { purpose: Purpose::Gradient, batch: b, theta: vec![0.5] }
    }

    #[test]
    fn mesh_delivers_in_order_and_records() {
        let rec = Recorder::new();
        let [mut c, mut a, _b] = in_process_mesh(9, Duration::from_secs(5), Some(&rec));
        c.send(PartyRole::ProviderA, &broadcast(1)).unwrap();
        c.send(PartyRole::ProviderA, &broadcast(2)).unwrap();
        assert_eq!(a.recv(PartyRole::Coordinator).unwrap(), broadcast(1));
        assert_eq!(a.recv(PartyRole::Coordinator).unwrap(), broadcast(2));
        let t = rec.transcript();
        assert_eq!(t.count(Kind::ModelBroadcast), 2);
        assert_eq!(t.find_f64(&[0.5, 0.25]), vec![0.5]);
        assert_eq!(t.sent_by(PartyRole::Coordinator).count(), 2);
    }

    #[test]
    fn replayed_or_foreign_frames_are_rejected() {
        let (mut x, y) = channel_pair(Duration::from_secs(5));
        let mut a = Endpoint::new(PartyRole::ProviderA, 1);
        a.add_link(PartyRole::Coordinator, Box::new(y));
        let f = Frame { kind: Kind::ModelBroadcast, session: 1, seq: 3, payload: broadcast(0).payload() };
        x.send(&f.to_bytes()).unwrap();
        x.send(&f.to_bytes()).unwrap();
        a.recv(PartyRole::Coordinator).unwrap();
        assert!(matches!(a.recv(PartyRole::Coordinator), Err(ProtocolError::Sequence { .. })));
        let g = Frame { session: 2, seq: 4, ..f };
        x.send(&g.to_bytes()).unwrap();
        assert!(matches!(a.recv(PartyRole::Coordinator), Err(ProtocolError::Session { .. })));
    }

    #[test]
    fn abort_surfaces_as_error() {
        let [mut c, mut a, mut b] = in_process_mesh(3, Duration::from_secs(5), None);
        c.abort("bye");
        for ep in [&mut a, &mut b] {
            match ep.recv(PartyRole::Coordinator) {
                Err(ProtocolError::Aborted { by: PartyRole::Coordinator, reason }) => assert_eq!(reason, "bye"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn hung_up_peer_is_a_transport_error() {
        let [c, mut a, _b] = in_process_mesh(3, Duration::from_secs(5), None);
        drop(c);
        assert!(matches!(a.recv(PartyRole::Coordinator), Err(ProtocolError::Transport(_))));
    }

    #[test]
    fn tcp_mesh_exchanges_frames() {
        let lc = TcpListener::bind("127.0.0.1:0").unwrap();
        let la = TcpListener::bind("127.0.0.1:0").unwrap();
        let addrs = TcpAddrs { coordinator: lc.local_addr().unwrap(), provider_a: la.local_addr().unwrap() };
        let t = Duration::from_secs(10);
        std::thread::scope(|s| {
            let hc = s.spawn(|| {
                let mut c = tcp_endpoint(PartyRole::Coordinator, 5, Some(&lc), addrs, t).unwrap();
                c.send(PartyRole::ProviderB, &broadcast(7)).unwrap();
                c.recv(PartyRole::ProviderA).unwrap()
            });
            let ha = s.spawn(|| {
                let mut a = tcp_endpoint(PartyRole::ProviderA, 5, Some(&la), addrs, t).unwrap();
                a.send(PartyRole::Coordinator, &broadcast(8)).unwrap();
                a.recv(PartyRole::ProviderB).unwrap()
            });
            let mut b = tcp_endpoint(PartyRole::ProviderB, 5, None, addrs, t).unwrap();
            assert_eq!(b.recv(PartyRole::Coordinator).unwrap(), broadcast(7));
            b.send(PartyRole::ProviderA, &broadcast(9)).unwrap();
            assert_eq!(hc.join().unwrap(), broadcast(8));
            assert_eq!(ha.join().unwrap(), broadcast(9));
        });
    }
}
