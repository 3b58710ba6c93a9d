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

//! Human-readable summary rendering: measured desk-scale numbers first,
//! then the published large-scale reference values, clearly separated.

use deskpilot::runtime::TimingRecord;

use crate::fixtures::{Fixture, HeteroFixture, REFERENCE_HETERO, REFERENCE_SCALING};
use crate::runner::{group_stats, GroupStat, Summary};
use crate::scenario::Mode;

pub fn render(summary: &Summary) -> String {
    render_with(summary, REFERENCE_SCALING, Some(&REFERENCE_HETERO))
}

/// Render with an explicit fixture set; an empty set yields a report with
/// the measured section only.
pub fn render_with(
    summary: &Summary,
    fixtures: &[Fixture],
    hetero_fixture: Option<&HeteroFixture>,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("== scenario: {} ==\n", summary.scenario_name));
    out.push_str(&format!(
        "mode: {} | backend: {} | iterations: {} | seed: {}\n",
        summary.mode, summary.backend, summary.iterations, summary.seed
    ));
    out.push_str(&format!(
        "host: {} logical / {} physical cores | rank cap: {}\n",
        summary.host.logical_cores, summary.host.physical_cores, summary.cap
    ));
    for w in &summary.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out.push('\n');

    out.push_str("measured (desk scale)\n");
    render_groups(&mut out, &summary.groups, summary.mode == Mode::Strong);

    if !summary.pipelines.is_empty() {
        out.push_str("\nheterogeneous vs batch\n");
        out.push_str(
            "P     pool   hetero makespan (s)   batch makespan (s)   improvement (batch-hetero)/batch\n",
        );
        for p in &summary.pipelines {
            out.push_str(&format!(
                "{:<5} {:<6} {:<21} {:<20} {}\n",
                p.parallelism,
                p.pool_ranks,
                p.heterogeneous_makespan
                    .map(|m| format!("{m:.4}"))
                    .unwrap_or_else(|| "-".into()),
                p.batch_makespan
                    .map(|m| format!("{m:.4}"))
                    .unwrap_or_else(|| "-".into()),
                p.improvement_percent
                    .map(|i| format!("{i:.1}%"))
                    .unwrap_or_else(|| "-".into()),
            ));
        }
    }

    out.push('\n');
    render_reference(&mut out, fixtures, hetero_fixture);
    out
}

/// Report over a bare results CSV (no scenario context): per-group stats
/// plus the reference section.
pub fn render_records(records: &[TimingRecord]) -> String {
    let mut out = String::new();
    out.push_str("== results summary ==\n\n");
    out.push_str("measured (desk scale)\n");
    render_groups(&mut out, &group_stats(records), true);
    out.push('\n');
    render_reference(&mut out, REFERENCE_SCALING, Some(&REFERENCE_HETERO));
    out
}

fn render_groups(out: &mut String, groups: &[GroupStat], show_speedup: bool) {
    if groups.is_empty() {
        out.push_str("(no timing records)\n");
        return;
    }
    out.push_str(
        "op     P     iters  t_execute (s)          t_comm_construct (s)    t_deserialize (s)",
    );
    if show_speedup {
        out.push_str("      speedup");
    }
    out.push('\n');
    for g in groups {
        let exec = format!("{:.6} ± {:.6}", g.exec_mean, g.exec_std);
        let comm = format!("{:.6} ± {:.6}", g.comm_mean, g.comm_std);
        let deser = format!("{:.6} ± {:.6}", g.deser_mean, g.deser_std);
        out.push_str(&format!(
            "{:<6} {:<5} {:<6} {exec:<22} {comm:<23} {deser:<20}",
            g.op.to_string(),
            g.parallelism,
            g.samples,
        ));
        if show_speedup {
            match g.speedup {
                Some(s) => out.push_str(&format!("   {s:.2}x")),
                None => out.push_str("   1.00x (base)"),
            }
        }
        out.push('\n');
    }
}

fn render_reference(out: &mut String, fixtures: &[Fixture], hetero: Option<&HeteroFixture>) {
    if fixtures.is_empty() && hetero.is_none() {
        return;
    }
    out.push_str(
        "reference: published large-scale measurements (hundreds of cores, ~350x the data;\n\
         different hardware — shown for shape comparison only, never comparable in absolute terms)\n",
    );
    if !fixtures.is_empty() {
        out.push_str("op     scaling  parallelism  time (s)          overhead (s)\n");
    }
    for f in fixtures {
        out.push_str(&format!(
            "{:<6} {:<8} {:<12} {:<17} {}\n",
            f.op,
            f.scaling,
            f.parallelism,
            format!("{:.2} ± {:.2}", f.time_mean, f.time_std),
            format!("{:.2} ± {:.2}", f.overhead_mean, f.overhead_std),
        ));
    }
    if let Some(h) = hetero {
        out.push_str(&format!(
            "reference pipeline at {} CPUs: heterogeneous {:.2} s vs batch {:.2} s \
             (reported improvement range {:.0}-{:.0}%)\n",
            h.cpus,
            h.heterogeneous_seconds,
            h.batch_seconds,
            h.improvement_percent_range.0,
            h.improvement_percent_range.1,
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use deskpilot::runtime::OpKind;

    #[test]
    fn reference_rows_are_rendered() {
        let text = render_records(&[]);
        assert!(text.contains("39.52 ± 3.98"), "sort strong 518 fixture row");
        assert!(text.contains("215.64 ± 4.35"), "join weak 148 fixture row");
        assert!(text.contains("417.33"));
        assert!(text.contains("488.33"));
        assert!(text.contains("4-15%"));
    }

    #[test]
    fn empty_fixture_set_renders_measured_only() {
        use crate::runner::Summary;
        use crate::scenario::Mode;
        let summary = Summary {
            scenario_name: "empty".into(),
            mode: Mode::Weak,
            backend: deskpilot::comm::Backend::InProcess,
            iterations: 1,
            seed: 0,
            host: crate::host::detect(),
            cap: 4,
            groups: Vec::new(),
            pipelines: Vec::new(),
            warnings: Vec::new(),
        };
        let text = render_with(&summary, &[], None);
        assert!(text.contains("measured"));
        assert!(!text.contains("reference"));
    }

    #[test]
    fn group_rows_render_with_stats() {
        let records: Vec<TimingRecord> = (0..3)
            .map(|i| TimingRecord {
                uid: "t".into(),
                op_kind: OpKind::Sort,
                ranks: 2,
                iteration: i,
                t_deserialize: 0.001,
                t_comm_construct: 0.002,
                t_execute: 0.1 + i as f64 * 0.01,
                t_total: 0.103,
            })
            .collect();
        let text = render_records(&records);
        assert!(text.contains("sort"));
        assert!(text.contains("0.110000"), "mean of 0.10/0.11/0.12");
    }
}
