//! Renderers for simulation artifacts: the per-round trace CSV, the JSON run
//! summary, and a readable dump of each estimation DAG.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rdse::medag::Medag;
use rdse::simulator::{summarize, SimulationTrace};
use serde::Serialize;

/// 64-bit FNV-1a, used to fingerprint the scenario text in the summary so a
/// results directory can be matched back to its input.
pub fn fingerprint(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Decimal form with 17 significant digits, enough to reproduce any f64
/// exactly.
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the trace as CSV: one row per (round, regular node), columns
/// `round,node,error_norm,xhat_0..xhat_{n-1}`. Node labels are 1-based.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = String::from("round,node,error_norm");
    for i in 0..trace.state_dim {
        let _ = write!(out, ",xhat_{i}");
    }
    out.push('\n');
    for record in &trace.records {
        let _ = write!(
            out,
            "{},{},{}",
            record.round,
            record.node + 1,
            full_precision(record.error_norm)
        );
        for v in record.estimate.iter() {
            let _ = write!(out, ",{}", full_precision(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct NodeSummaryJson {
    node: usize,
    final_error: f64,
    max_error: f64,
    first_below_1e3: Option<usize>,
    first_below_1e6: Option<usize>,
    diverging: bool,
}

#[derive(Serialize)]
struct SummaryJson {
    scenario_fingerprint: String,
    rounds: usize,
    state_dim: usize,
    regular_nodes: Vec<usize>,
    adversarial_nodes: Vec<usize>,
    /// flagged[i] = senders that node i zeroed out for sending junk
    flagged: BTreeMap<usize, Vec<usize>>,
    warnings: Vec<String>,
    nodes: Vec<NodeSummaryJson>,
}

/// Renders the run summary (per-node error statistics plus run metadata) as
/// pretty-printed JSON. Node labels are 1-based.
pub fn summary_json(trace: &SimulationTrace, scenario_text: &str) -> String {
    let nodes = summarize(trace)
        .into_iter()
        .map(|s| NodeSummaryJson {
            node: s.node + 1,
            final_error: s.final_error,
            max_error: s.max_error,
            first_below_1e3: s.first_below_1e3,
            first_below_1e6: s.first_below_1e6,
            diverging: s.diverging,
        })
        .collect();
    let summary = SummaryJson {
        scenario_fingerprint: format!("{:016x}", fingerprint(scenario_text)),
        rounds: trace.rounds,
        state_dim: trace.state_dim,
        regular_nodes: trace.regular.iter().map(|&v| v + 1).collect(),
        adversarial_nodes: trace.adversarial.iter().map(|&v| v + 1).collect(),
        flagged: trace
            .flagged
            .iter()
            .filter(|(_, senders)| !senders.is_empty())
            .map(|(&node, senders)| (node + 1, senders.iter().map(|&s| s + 1).collect()))
            .collect(),
        warnings: trace.warnings.clone(),
        nodes,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("plain data serializes");
    text.push('\n');
    text
}

/// Readable dump of one estimation DAG: termination round, level partition,
/// and the accepted in-neighbor list of every non-source participant.
pub fn medag_text(medag: &Medag) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "eigen block {}", medag.eigen_block);
    let _ = writeln!(out, "termination round = {}", medag.termination_round);
    for (q, level) in medag.levels.iter().enumerate() {
        let labels: Vec<String> = level.iter().map(|&v| (v + 1).to_string()).collect();
        let _ = writeln!(out, "level {q} = {}", labels.join(" "));
    }
    for (&node, accepted) in &medag.accepted_neighbors {
        if accepted.is_empty() {
            continue;
        }
        let labels: Vec<String> = accepted.iter().map(|&v| (v + 1).to_string()).collect();
        let _ = writeln!(out, "node {} accepts {}", node + 1, labels.join(" "));
    }
    out
}
