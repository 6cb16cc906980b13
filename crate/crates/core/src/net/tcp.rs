//! TCP transport. Each frame travels as `u32 depth ‖ frame`; a reader thread
//! per connection feeds a queue so receives can time out.
//!
//! Party `i` dials every `j < i` and accepts from every `j > i`. The dialer
//! announces its id with a raw `u16` before any frame.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError};

use super::frame::parse_len;
use super::{Link, LinkError, HEADER_LEN};
use crate::error::{Error, Result};

type Incoming = std::result::Result<(u32, Vec<u8>), LinkError>;

pub struct TcpLink {
    stream: TcpStream,
    rx: Receiver<Incoming>,
    closed: bool,
}

impl TcpLink {
    fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let (tx, rx) = bounded(1024);
        std::thread::Builder::new()
            .name("mpsu-tcp-reader".into())
            .spawn(move || {
                let mut reader = io::BufReader::new(reader);
                loop {
                    match read_one(&mut reader) {
                        Ok(Some(msg)) => {
                            if tx.send(Ok(msg)).is_err() {
                                return;
                            }
                        }
                        Ok(None) => return,
                        Err(e) => {
                            let _ = tx.send(Err(e));
                            return;
                        }
                    }
                }
            })?;
        Ok(Self { stream, rx, closed: false })
    }
}

/// `Ok(None)` on clean EOF between frames.
fn read_one<R: Read>(r: &mut R) -> std::result::Result<Option<(u32, Vec<u8>)>, LinkError> {
    let mut depth = [0u8; 4];
    match r.read_exact(&mut depth) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(_) => return Err(LinkError::Closed),
    }
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|_| LinkError::Closed)?;
    let len = parse_len(&header[1..]).map_err(|e| LinkError::Malformed(e.to_string()))?;
    let mut frame = Vec::with_capacity(HEADER_LEN + len);
    frame.extend_from_slice(&header);
    frame.resize(HEADER_LEN + len, 0);
    r.read_exact(&mut frame[HEADER_LEN..]).map_err(|_| LinkError::Closed)?;
    Ok(Some((u32::from_le_bytes(depth), frame)))
}

impl Link for TcpLink {
    fn send(&mut self, depth: u32, frame: Vec<u8>) -> std::result::Result<(), LinkError> {
        if self.closed {
            return Err(LinkError::Closed);
        }
        let mut buf = Vec::with_capacity(4 + frame.len());
        buf.extend_from_slice(&depth.to_le_bytes());
        buf.extend_from_slice(&frame);
        self.stream.write_all(&buf).map_err(|_| LinkError::Closed)
    }

    fn recv(&mut self, timeout: Duration) -> std::result::Result<(u32, Vec<u8>), LinkError> {
        match self.rx.recv_timeout(timeout) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => Err(LinkError::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(LinkError::Closed),
        }
    }

    fn close(&mut self) {
        self.closed = true;
        let _ = self.stream.shutdown(Shutdown::Write);
    }
}

impl Drop for TcpLink {
    fn drop(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Write);
    }
}

/// Connects party `me` to every other party. `listener` must already be
/// bound to `addrs[me]`.
pub fn mesh(me: usize, listener: TcpListener, addrs: &[SocketAddr], timeout: Duration) -> Result<Vec<Option<Box<dyn Link>>>> {
    let m = addrs.len();
    let mut links: Vec<Option<Box<dyn Link>>> = (0..m).map(|_| None).collect();
    let deadline = Instant::now() + timeout;
    for (peer, addr) in addrs.iter().enumerate().take(me) {
        let mut stream = dial(*addr, deadline)?;
        stream.write_all(&(me as u16).to_le_bytes())?;
        links[peer] = Some(Box::new(TcpLink::new(stream)?));
    }
    listener.set_nonblocking(true)?;
    let mut pending = m - 1 - me;
    while pending > 0 {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream.set_nonblocking(false)?;
                stream.set_read_timeout(Some(timeout))?;
                let mut id = [0u8; 2];
                stream.read_exact(&mut id)?;
                stream.set_read_timeout(None)?;
                let peer = u16::from_le_bytes(id) as usize;
                if peer <= me || peer >= m || links[peer].is_some() {
                    return Err(Error::malformed(format!("unexpected connection claiming party {peer}")));
                }
                links[peer] = Some(Box::new(TcpLink::new(stream)?));
                pending -= 1;
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() > deadline {
                    return Err(Error::Timeout { peer: (0..m).find(|&p| p > me && links[p].is_none()).unwrap_or(me) });
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(links)
}

fn dial(addr: SocketAddr, deadline: Instant) -> Result<TcpStream> {
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) => {
                if Instant::now() > deadline {
                    return Err(e.into());
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

/// Binds `m` listeners on ephemeral localhost ports.
pub fn bind_local(m: usize) -> Result<(Vec<TcpListener>, Vec<SocketAddr>)> {
    let listeners: Vec<TcpListener> = (0..m).map(|_| TcpListener::bind("127.0.0.1:0")).collect::<io::Result<_>>()?;
    let addrs = listeners.iter().map(|l| l.local_addr()).collect::<io::Result<_>>()?;
    Ok((listeners, addrs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Network, Tag};

    #[test]
    fn fifo_over_localhost() {
        let (listeners, addrs) = bind_local(3).unwrap();
        let got: Vec<Vec<u8>> = std::thread::scope(|s| {
            let hs: Vec<_> = listeners
                .into_iter()
                .enumerate()
                .map(|(i, l)| {
                    let addrs = addrs.clone();
                    s.spawn(move || {
                        let links = mesh(i, l, &addrs, Duration::from_secs(10)).unwrap();
                        let mut net = Network::new(i, links, Duration::from_secs(10));
                        net.handshake(&[7; 32]).unwrap();
                        if i == 0 {
                            for k in 0..50u8 {
                                net.send(1, Tag::ShufMask, vec![k; k as usize]).unwrap();
                            }
                            Vec::new()
                        } else if i == 1 {
                            (0..50u8).map(|_| net.recv(0, Tag::ShufMask).unwrap().len() as u8).collect()
                        } else {
                            Vec::new()
                        }
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(got[1], (0..50u8).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_length_is_malformed() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(0x01);
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(read_one(&mut &bytes[..]), Err(LinkError::Malformed(_))));
    }
}
