//! In-process transport over unbounded crossbeam queues.

use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::{Link, LinkError};

type Envelope = (u32, Vec<u8>);

pub struct MemLink {
    tx: Option<Sender<Envelope>>,
    rx: Receiver<Envelope>,
}

impl Link for MemLink {
    fn send(&mut self, depth: u32, frame: Vec<u8>) -> Result<(), LinkError> {
        match &self.tx {
            Some(tx) => tx.send((depth, frame)).map_err(|_| LinkError::Closed),
            None => Err(LinkError::Closed),
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<Envelope, LinkError> {
        self.rx.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => LinkError::Timeout,
            RecvTimeoutError::Disconnected => LinkError::Closed,
        })
    }

    fn close(&mut self) {
        self.tx = None;
    }
}

/// Full mesh for `m` parties; `result[i][j]` is party `i`'s link to `j`.
pub fn mesh(m: usize) -> Vec<Vec<Option<Box<dyn Link>>>> {
    let mut out: Vec<Vec<Option<Box<dyn Link>>>> = (0..m).map(|_| (0..m).map(|_| None).collect()).collect();
    for i in 0..m {
        for j in i + 1..m {
            let (tx_ij, rx_ij) = unbounded();
            let (tx_ji, rx_ji) = unbounded();
            out[i][j] = Some(Box::new(MemLink { tx: Some(tx_ij), rx: rx_ji }));
            out[j][i] = Some(Box::new(MemLink { tx: Some(tx_ji), rx: rx_ij }));
        }
    }
    out
}
