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

//! Host inspection: core counts and the oversubscription cap.

#[derive(Debug, Clone, Copy)]
pub struct HostInfo {
    pub logical_cores: usize,
    pub physical_cores: usize,
}

/// Detect core counts. Physical cores come from `/proc/cpuinfo`
/// (`physical id`, `core id`) where available, falling back to the logical
/// count.
pub fn detect() -> HostInfo {
    let logical = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let physical = physical_from_cpuinfo().unwrap_or(logical);
    HostInfo {
        logical_cores: logical,
        physical_cores: physical,
    }
}

fn physical_from_cpuinfo() -> Option<usize> {
    let text = std::fs::read_to_string("/proc/cpuinfo").ok()?;
    let mut pairs = std::collections::HashSet::new();
    let mut physical_id = None;
    let mut core_id = None;
    for line in text.lines().chain(std::iter::once("")) {
        if line.trim().is_empty() {
            if let (Some(p), Some(c)) = (physical_id.take(), core_id.take()) {
                pairs.insert((p, c));
            }
            continue;
        }
        let mut parts = line.splitn(2, ':');
        let key = parts.next().unwrap_or("").trim();
        let value = parts.next().unwrap_or("").trim().to_string();
        match key {
            "physical id" => physical_id = Some(value),
            "core id" => core_id = Some(value),
            _ => {}
        }
    }
    (!pairs.is_empty()).then_some(pairs.len())
}

/// Default rank cap: twice the logical core count. Ranks beyond the
/// physical core count make strong-scaling curves advisory only.
pub fn default_oversubscription_cap(host: &HostInfo) -> usize {
    host.logical_cores * 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detect_reports_positive_counts() {
        let h = detect();
        assert!(h.logical_cores >= 1);
        assert!(h.physical_cores >= 1);
        assert!(default_oversubscription_cap(&h) >= 2);
    }
}
