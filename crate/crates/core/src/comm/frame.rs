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

//! Wire framing, byte-exact.
//!
//! ```text
//! frame := payload_len  u32 big-endian   (payload bytes only)
//!          group_id     16 bytes
//!          msg_tag      u32 big-endian
//!          src_rank     u32 big-endian   (group-local)
//!          dst_rank     u32 big-endian   (group-local)
//!          payload      payload_len bytes
//! ```
//!
//! The header is a fixed 28 bytes after the length word. Zero-length
//! payloads are legal frames (barriers and release messages use them).

use std::io::{self, Read, Write};

use super::GroupId;

/// Fixed header size following the 4-byte length word.
pub const HEADER_LEN: usize = 28;

/// One routed message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub group: GroupId,
    pub tag: u32,
    pub src: u32,
    pub dst: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(group: GroupId, tag: u32, src: u32, dst: u32, payload: Vec<u8>) -> Self {
        Self { group, tag, src, dst, payload }
    }

    /// Encode to the exact wire byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + HEADER_LEN + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.group.0);
        out.extend_from_slice(&self.tag.to_be_bytes());
        out.extend_from_slice(&self.src.to_be_bytes());
        out.extend_from_slice(&self.dst.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decode one frame from a byte slice, returning the frame and the
    /// number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Frame, usize), FrameError> {
        if bytes.len() < 4 + HEADER_LEN {
            return Err(FrameError::Truncated);
        }
        let len = u32::from_be_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let total = 4 + HEADER_LEN + len;
        if bytes.len() < total {
            return Err(FrameError::Truncated);
        }
        let mut group = [0u8; 16];
        group.copy_from_slice(&bytes[4..20]);
        let tag = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
        let src = u32::from_be_bytes(bytes[24..28].try_into().unwrap());
        let dst = u32::from_be_bytes(bytes[28..32].try_into().unwrap());
        let payload = bytes[32..total].to_vec();
        Ok((
            Frame { group: GroupId(group), tag, src, dst, payload },
            total,
        ))
    }

    /// Write the frame to a stream.
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    /// Read one frame from a stream. Blocks until a complete frame arrives
    /// or the stream fails.
    pub fn read_from(r: &mut impl Read) -> io::Result<Frame> {
        let mut head = [0u8; 4 + HEADER_LEN];
        r.read_exact(&mut head)?;
        let len = u32::from_be_bytes(head[0..4].try_into().unwrap()) as usize;
        let mut group = [0u8; 16];
        group.copy_from_slice(&head[4..20]);
        let tag = u32::from_be_bytes(head[20..24].try_into().unwrap());
        let src = u32::from_be_bytes(head[24..28].try_into().unwrap());
        let dst = u32::from_be_bytes(head[28..32].try_into().unwrap());
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Frame { group: GroupId(group), tag, src, dst, payload })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("truncated frame")]
    Truncated,
}
