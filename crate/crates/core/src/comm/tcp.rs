// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! TCP transport: a full mesh of pairwise connections.
//!
//! For ranks `i < j`, rank `j` dials rank `i`'s endpoint; each accepted
//! connection starts with an 8-byte hello (magic + dialer's world rank).
//! Every live connection gets a dedicated reader thread (frames into the
//! local mailbox) and writer thread (frames from an unbounded queue onto
//! the socket), so sends never block a rank's compute thread and
//! bidirectional bulk exchanges cannot deadlock on socket buffers.

use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::frame::Frame;
use super::mailbox::Mailbox;
use super::CommError;

const HELLO_MAGIC: u32 = 0x4450_4C54; // "DPLT"

pub(crate) struct TcpWorld {
    my_rank: usize,
    mailbox: Arc<Mailbox>,
    peers: Vec<Option<Peer>>,
    readers: Mutex<Vec<JoinHandle<()>>>,
    writers: Mutex<Vec<JoinHandle<()>>>,
}

struct Peer {
    tx: Option<Sender<Frame>>,
    stream: TcpStream,
}

impl TcpWorld {
    pub fn mailbox(&self) -> &Arc<Mailbox> {
        &self.mailbox
    }

    pub fn send(&self, world_dst: usize, frame: Frame) -> Result<(), CommError> {
        if world_dst == self.my_rank {
            self.mailbox
                .push((frame.group, frame.tag, frame.src, frame.dst), frame.payload);
            return Ok(());
        }
        match &self.peers[world_dst] {
            Some(Peer { tx: Some(tx), .. }) => tx
                .send(frame)
                .map_err(|_| CommError::PeerFailure { world: world_dst }),
            _ => Err(CommError::PeerFailure { world: world_dst }),
        }
    }
}

impl Drop for TcpWorld {
    fn drop(&mut self) {
        // Teardown order matters: queued frames must reach the wire before
        // any socket closes, or a fast-exiting rank cuts off peers that are
        // still receiving from it.
        for peer in self.peers.iter_mut().flatten() {
            peer.tx.take(); // writers drain their queues and exit
        }
        for handle in self.writers.lock().unwrap().drain(..) {
            let _ = handle.join();
        }
        for peer in self.peers.iter().flatten() {
            let _ = peer.stream.shutdown(Shutdown::Both);
        }
        for handle in self.readers.lock().unwrap().drain(..) {
            let _ = handle.join();
        }
    }
}

pub(crate) fn resolve(endpoint: &str) -> Result<SocketAddr, CommError> {
    endpoint
        .to_socket_addrs()
        .map_err(|e| CommError::InvalidConfig(format!("cannot resolve `{endpoint}`: {e}")))?
        .next()
        .ok_or_else(|| CommError::InvalidConfig(format!("`{endpoint}` resolves to no address")))
}

pub(crate) fn bind(endpoint: &str) -> Result<TcpListener, CommError> {
    let addr = resolve(endpoint)?;
    TcpListener::bind(addr).map_err(|source| CommError::Bind {
        endpoint: endpoint.to_string(),
        source,
    })
}

/// Establish this rank's full mesh. `listener` must already be bound to the
/// rank's own endpoint; `addrs` holds every rank's resolved address.
pub(crate) fn connect_mesh(
    my_rank: usize,
    listener: TcpListener,
    addrs: &[SocketAddr],
    timeout: Duration,
) -> Result<Arc<TcpWorld>, CommError> {
    let world_size = addrs.len();
    let deadline = Instant::now() + timeout;
    let mut streams: Vec<Option<TcpStream>> = (0..world_size).map(|_| None).collect();

    // Dial every lower rank, retrying while its listener may not be up yet.
    for (peer, &addr) in addrs.iter().enumerate().take(my_rank) {
        let stream = loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(CommError::ConnectTimeout {
                    rank: peer,
                    endpoint: addr.to_string(),
                    detail: format!("no listener reachable within {timeout:?}"),
                });
            }
            let slice = (deadline - now).min(Duration::from_millis(250));
            match TcpStream::connect_timeout(&addr, slice) {
                Ok(s) => break s,
                Err(_) => std::thread::sleep(Duration::from_millis(5)),
            }
        };
        stream.set_nodelay(true).ok();
        let mut hello = [0u8; 8];
        hello[0..4].copy_from_slice(&HELLO_MAGIC.to_be_bytes());
        hello[4..8].copy_from_slice(&(my_rank as u32).to_be_bytes());
        (&stream).write_all(&hello).map_err(|e| CommError::Handshake {
            rank: peer,
            message: e.to_string(),
        })?;
        streams[peer] = Some(stream);
    }

    // Accept from every higher rank; the hello identifies the dialer.
    listener
        .set_nonblocking(true)
        .map_err(CommError::Io)?;
    let mut expected: usize = world_size - 1 - my_rank;
    while expected > 0 {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false).map_err(CommError::Io)?;
                stream.set_nodelay(true).ok();
                stream
                    .set_read_timeout(Some(Duration::from_secs(5)))
                    .ok();
                let mut hello = [0u8; 8];
                (&stream).read_exact(&mut hello).map_err(|e| CommError::Handshake {
                    rank: usize::MAX,
                    message: format!("hello read failed: {e}"),
                })?;
                stream.set_read_timeout(None).ok();
                let magic = u32::from_be_bytes(hello[0..4].try_into().unwrap());
                let peer = u32::from_be_bytes(hello[4..8].try_into().unwrap()) as usize;
                if magic != HELLO_MAGIC || peer <= my_rank || peer >= world_size {
                    return Err(CommError::Handshake {
                        rank: peer,
                        message: "bad hello".into(),
                    });
                }
                streams[peer] = Some(stream);
                expected -= 1;
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    let missing = (my_rank + 1..world_size)
                        .find(|&p| streams[p].is_none())
                        .unwrap_or(world_size);
                    return Err(CommError::ConnectTimeout {
                        rank: missing,
                        endpoint: addrs.get(missing).map(|a| a.to_string()).unwrap_or_default(),
                        detail: format!("no connection from rank {missing} within {timeout:?}"),
                    });
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(CommError::Io(e)),
        }
    }

    // Spin up reader/writer threads per live connection.
    let mailbox = Arc::new(Mailbox::new(world_size));
    let mut peers: Vec<Option<Peer>> = (0..world_size).map(|_| None).collect();
    let mut readers = Vec::new();
    let mut writers = Vec::new();
    for (peer_rank, slot) in streams.into_iter().enumerate() {
        let Some(stream) = slot else { continue };

        let reader_stream = stream.try_clone().map_err(CommError::Io)?;
        let reader_mailbox = mailbox.clone();
        readers.push(std::thread::spawn(move || {
            let mut r = std::io::BufReader::new(reader_stream);
            loop {
                match Frame::read_from(&mut r) {
                    Ok(f) => reader_mailbox.push((f.group, f.tag, f.src, f.dst), f.payload),
                    Err(_) => {
                        reader_mailbox.mark_peer_down(peer_rank);
                        return;
                    }
                }
            }
        }));

        let (tx, rx) = channel::<Frame>();
        let writer_stream = stream.try_clone().map_err(CommError::Io)?;
        writers.push(std::thread::spawn(move || {
            let mut w = std::io::BufWriter::new(writer_stream);
            while let Ok(frame) = rx.recv() {
                if frame.write_to(&mut w).is_err() || w.flush().is_err() {
                    return;
                }
            }
        }));

        peers[peer_rank] = Some(Peer { tx: Some(tx), stream });
    }

    Ok(Arc::new(TcpWorld {
        my_rank,
        mailbox,
        peers,
        readers: Mutex::new(readers),
        writers: Mutex::new(writers),
    }))
}

