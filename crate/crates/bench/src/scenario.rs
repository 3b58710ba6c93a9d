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

//! Scenario model: named built-ins and a plain-text key-value file format.
//!
//! A scenario file is line-oriented `key = value` text; `#` starts a
//! comment. Recognized keys: `name`, `ops` (comma list of `join`/`sort`),
//! `mode` (`weak`, `strong`, `heterogeneous`, `batch`), `ranks` (comma list
//! of rank counts), `rows_per_rank`, `total_rows`, `iterations`, `seed`,
//! `backend` (`in_process`/`tcp`).

use anyhow::{anyhow, bail, Context, Result};
use deskpilot::comm::Backend;
use deskpilot::runtime::OpKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Weak,
    Strong,
    Heterogeneous,
    Batch,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Weak => write!(f, "weak"),
            Mode::Strong => write!(f, "strong"),
            Mode::Heterogeneous => write!(f, "heterogeneous"),
            Mode::Batch => write!(f, "batch"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub ops: Vec<OpKind>,
    pub mode: Mode,
    pub ranks: Vec<usize>,
    pub rows_per_rank: Option<usize>,
    pub total_rows: Option<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub backend: Backend,
    /// Explicit TCP endpoints, one per worker rank plus one for the master.
    /// Empty means loopback with OS-assigned ports. Only meaningful with
    /// a single rank count, since the pool size is fixed by the list.
    pub endpoints: Vec<String>,
}

impl Scenario {
    /// Weak mode fixes work per rank; strong mode fixes total work and
    /// divides it by the rank count.
    pub fn validate(&self) -> Result<()> {
        if self.ops.is_empty() {
            bail!("scenario `{}` lists no operations", self.name);
        }
        if self.ops.contains(&OpKind::SyntheticSleep) {
            bail!("scenario op set may only contain join and sort");
        }
        if self.ranks.is_empty() {
            bail!("scenario `{}` lists no rank counts", self.name);
        }
        if self.iterations == 0 {
            bail!("iterations must be >= 1");
        }
        match self.mode {
            Mode::Weak | Mode::Heterogeneous | Mode::Batch => {
                if self.rows_per_rank.is_none() {
                    bail!("{} mode needs rows_per_rank", self.mode);
                }
            }
            Mode::Strong => {
                if self.total_rows.is_none() {
                    bail!("strong mode needs total_rows");
                }
            }
        }
        if !self.endpoints.is_empty() {
            if self.backend != Backend::Tcp {
                bail!("endpoints are only meaningful with the tcp backend");
            }
            if self.ranks.len() != 1 {
                bail!("an explicit endpoint list fixes the pool size, so the scenario must use a single rank count");
            }
        }
        Ok(())
    }

    /// Rows each rank generates at parallelism `p`.
    pub fn rows_at(&self, p: usize) -> usize {
        match self.mode {
            Mode::Strong => self.total_rows.unwrap_or(0) / p,
            _ => self.rows_per_rank.unwrap_or(0),
        }
    }
}

// Desk-scale defaults: 10^5 rows per rank weak, 2*10^6 rows total strong,
// rank counts 1..8, ten iterations.
pub const DEFAULT_ROWS_PER_RANK: usize = 100_000;
pub const DEFAULT_TOTAL_ROWS: usize = 2_000_000;
pub const DEFAULT_RANKS: &[usize] = &[1, 2, 4, 8];
pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_SEED: u64 = 7;

fn base(name: &str, ops: Vec<OpKind>, mode: Mode) -> Scenario {
    Scenario {
        name: name.to_string(),
        ops,
        mode,
        ranks: DEFAULT_RANKS.to_vec(),
        rows_per_rank: Some(DEFAULT_ROWS_PER_RANK),
        total_rows: Some(DEFAULT_TOTAL_ROWS),
        iterations: DEFAULT_ITERATIONS,
        seed: DEFAULT_SEED,
        backend: Backend::InProcess,
        endpoints: Vec::new(),
    }
}

/// Built-in scenario names accepted by `bench run --scenario <name>`.
pub fn builtin(name: &str) -> Option<Scenario> {
    let s = match name {
        "weak_join" => base(name, vec![OpKind::Join], Mode::Weak),
        "weak_sort" => base(name, vec![OpKind::Sort], Mode::Weak),
        "strong_join" => base(name, vec![OpKind::Join], Mode::Strong),
        "strong_sort" => base(name, vec![OpKind::Sort], Mode::Strong),
        "hetero" => {
            let mut s = base(name, vec![OpKind::Join, OpKind::Sort], Mode::Heterogeneous);
            s.ranks = vec![4];
            s
        }
        "batch" => {
            let mut s = base(name, vec![OpKind::Join, OpKind::Sort], Mode::Batch);
            s.ranks = vec![4];
            s
        }
        _ => return None,
    };
    Some(s)
}

pub fn builtin_names() -> &'static [&'static str] {
    &["weak_join", "weak_sort", "strong_join", "strong_sort", "hetero", "batch"]
}

/// Parse the scenario file format.
pub fn parse_file(text: &str) -> Result<Scenario> {
    let mut s = base("unnamed", vec![OpKind::Join], Mode::Weak);
    s.total_rows = None;
    s.rows_per_rank = None;
    let mut saw_mode = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let ctx = || format!("line {}: key `{key}`", lineno + 1);
        match key {
            "name" => s.name = value.to_string(),
            "ops" => {
                s.ops = value
                    .split(',')
                    .map(|op| match op.trim() {
                        "join" => Ok(OpKind::Join),
                        "sort" => Ok(OpKind::Sort),
                        other => Err(anyhow!("unknown op `{other}`")),
                    })
                    .collect::<Result<_>>()
                    .with_context(ctx)?;
            }
            "mode" => {
                s.mode = parse_mode(value).with_context(ctx)?;
                saw_mode = true;
            }
            "ranks" => {
                s.ranks = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(anyhow::Error::from))
                    .collect::<Result<_>>()
                    .with_context(ctx)?;
            }
            "rows_per_rank" => s.rows_per_rank = Some(value.parse().with_context(ctx)?),
            "total_rows" => s.total_rows = Some(value.parse().with_context(ctx)?),
            "iterations" => s.iterations = value.parse().with_context(ctx)?,
            "seed" => s.seed = value.parse().with_context(ctx)?,
            "backend" => {
                s.backend = value.parse::<Backend>().map_err(|e| anyhow!(e)).with_context(ctx)?;
            }
            "endpoints" => {
                s.endpoints = value.split(',').map(|e| e.trim().to_string()).collect();
            }
            other => bail!("line {}: unknown key `{other}`", lineno + 1),
        }
    }
    if !saw_mode {
        bail!("scenario file must set `mode`");
    }
    s.validate()?;
    Ok(s)
}

pub fn parse_mode(value: &str) -> Result<Mode> {
    match value {
        "weak" => Ok(Mode::Weak),
        "strong" => Ok(Mode::Strong),
        "heterogeneous" | "hetero" => Ok(Mode::Heterogeneous),
        "batch" => Ok(Mode::Batch),
        other => bail!("unknown mode `{other}`"),
    }
}
