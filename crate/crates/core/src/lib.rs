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

//! Desk-scale pilot runtime for distributed dataframe operations.
//!
//! The crate is organized around five subsystems:
//!
//! - [`table`]: a columnar, schema-typed table model plus deterministic
//!   synthetic data generation and CSV I/O.
//! - [`comm`]: communicator groups with collective operations (shuffle,
//!   gather, allgather, broadcast, barrier) over two interchangeable
//!   backends: in-process channels and TCP.
//! - [`ops`]: local and distributed relational operators — hash join and
//!   sample sort — built from hash/range partitioning plus shuffle.
//! - [`runtime`]: a pilot holding a pool of worker ranks, a master that
//!   schedules tasks by splitting private communicator groups at runtime,
//!   and a batch-mode executor for comparison runs.
//! - [`oracle`]: independent single-process reference implementations used
//!   exclusively by tests.
//!
//! Ranks are driven by ordinary OS threads; one thread owns one
//! communicator handle. All cross-rank interaction goes through the
//! communicator contract, so distinct groups run fully concurrently.

pub mod comm;
pub mod oracle;
pub mod ops;
pub mod runtime;
pub mod table;

mod util;
