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

//! Shared bit-mixing primitives.
//!
//! Everything that must be reproducible across runs, platforms, and
//! language reimplementations funnels through [`splitmix64`]. The constants
//! are fixed and documented here so that any implementation can match the
//! output stream bit for bit.

/// Golden-ratio increment used by the SplitMix64 sequence.
pub const SPLITMIX64_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 as a pure function: the output of one SplitMix64 step with
/// state `x`.
///
/// Mixing constants (Steele, Lea, Flood's finalizer):
/// `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`,
/// with shifts 30, 27, 31.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(SPLITMIX64_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a byte slice into a 64-bit digest by feeding 8-byte little-endian
/// chunks (zero-padded tail) through [`splitmix64`].
///
/// This is a content fingerprint for repeatability checks, not a
/// cryptographic hash.
pub fn fold_digest(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = splitmix64(seed ^ bytes.len() as u64);
    for chunk in bytes.chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(buf));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_known_values() {
        // Frozen reference outputs; any change here breaks cross-run and
        // cross-platform reproducibility of generated data.
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(1), 0x910a_2dec_8902_5cc1);
        assert_eq!(splitmix64(7), 0x63cb_e1e4_5932_0dd7);
    }

    #[test]
    fn fold_digest_distinguishes_length() {
        assert_ne!(fold_digest(0, b""), fold_digest(0, b"\0"));
        assert_ne!(fold_digest(0, b"abc"), fold_digest(0, b"abd"));
        assert_eq!(fold_digest(3, b"abc"), fold_digest(3, b"abc"));
    }
}
