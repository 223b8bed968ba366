//! Plain-text network files: a provenance header in `#` comments, a node
//! count, an optional source list, and one directed edge per line. Labels
//! are 1-based, matching scenario files.
//!
//! ```text
//! # network generated from model er:0.25 n=300 r=3 seed=7
//! nodes = 300
//! sources = 1,4,9
//! 1 -> 2
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rdse::graph::SensorNetwork;
use rdse::NodeId;

use crate::scenario::FileError;

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, FileError> {
    Err(FileError {
        line,
        message: message.into(),
    })
}

/// Renders a network (and optional 0-based source set) with a provenance
/// comment describing how it was produced.
pub fn serialize(
    net: &SensorNetwork,
    sources: Option<&BTreeSet<NodeId>>,
    provenance: &str,
) -> String {
    let mut out = String::new();
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "nodes = {}", net.node_count());
    if let Some(sources) = sources {
        let labels: Vec<String> = sources.iter().map(|&s| (s + 1).to_string()).collect();
        let _ = writeln!(out, "sources = {}", labels.join(","));
    }
    for &(a, b) in net.edges() {
        let _ = writeln!(out, "{} -> {}", a + 1, b + 1);
    }
    out
}

/// Parses a network file; returns the network and the declared source set
/// (0-based), if any.
pub fn parse(text: &str) -> Result<(SensorNetwork, Option<BTreeSet<NodeId>>), FileError> {
    let mut node_count: Option<usize> = None;
    let mut sources: Option<BTreeSet<NodeId>> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(value) = line.strip_prefix("nodes") {
            let Some(value) = value.trim().strip_prefix('=') else {
                return err(Some(lineno), "expected `nodes = N`");
            };
            node_count = Some(value.trim().parse().map_err(|e| FileError {
                line: Some(lineno),
                message: format!("bad node count: {e}"),
            })?);
            continue;
        }
        if let Some(value) = line.strip_prefix("sources") {
            let Some(value) = value.trim().strip_prefix('=') else {
                return err(Some(lineno), "expected `sources = a,b,...`");
            };
            let mut set = BTreeSet::new();
            for token in value.split([',', ' ']).filter(|t| !t.is_empty()) {
                let label: usize = token.parse().map_err(|e| FileError {
                    line: Some(lineno),
                    message: format!("bad source label: {e}"),
                })?;
                if label == 0 {
                    return err(Some(lineno), "labels are 1-based");
                }
                set.insert(label - 1);
            }
            sources = Some(set);
            continue;
        }
        let Some((a, b)) = line.split_once("->") else {
            return err(Some(lineno), "expected an edge `a -> b`");
        };
        let parse_label = |t: &str| -> Result<usize, FileError> {
            let label: usize = t.trim().parse().map_err(|e| FileError {
                line: Some(lineno),
                message: format!("bad edge endpoint: {e}"),
            })?;
            if label == 0 {
                return err(Some(lineno), "labels are 1-based");
            }
            Ok(label - 1)
        };
        edges.push((parse_label(a)?, parse_label(b)?));
    }
    let Some(node_count) = node_count else {
        return err(None, "missing `nodes = N` declaration");
    };
    let net = SensorNetwork::new(node_count, edges).map_err(|e| FileError {
        line: None,
        message: e.to_string(),
    })?;
    if let Some(sources) = &sources {
        if sources.iter().any(|&s| s >= node_count) {
            return err(None, "a source label exceeds the node count");
        }
    }
    Ok((net, sources))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rdse::presets::scalar_demo_network;

    #[test]
    fn round_trip() {
        let net = scalar_demo_network();
        let sources: BTreeSet<NodeId> = [0, 1, 2].into_iter().collect();
        let text = serialize(&net, Some(&sources), "model er:0.5 seed=3");
        let (parsed, parsed_sources) = parse(&text).unwrap();
        assert_eq!(parsed.node_count(), net.node_count());
        assert_eq!(parsed.edges(), net.edges());
        assert_eq!(parsed_sources, Some(sources));
    }

    #[test]
    fn rejects_zero_label() {
        assert!(parse("nodes = 3\n0 -> 1\n").is_err());
    }

    #[test]
    fn error_reports_line() {
        let e = parse("nodes = 3\n1 -> 2\nnot an edge\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }
}
