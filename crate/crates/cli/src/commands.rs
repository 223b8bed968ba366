//! Implementations of the four subcommands. Everything here prints to the
//! given writer so tests can capture output; label translation to 1-based
//! display form happens at the edges.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rdse::graph::{self, CutKind, SensorNetwork, DEFAULT_MAX_NODES};
use rdse::NodeId;
use rdse::netgen;
use rdse::simulator;
use rdse::spectral;
use rdse::Error as CoreError;

use crate::netfile;
use crate::output;
use crate::scenario::{self, FileError, ModelSpec, ScenarioFile};

/// Anything that should abort the command with a message and a non-zero
/// exit.
#[derive(Debug)]
pub struct CommandError(pub String);

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CommandError {}

impl From<FileError> for CommandError {
    fn from(e: FileError) -> Self {
        CommandError(e.to_string())
    }
}

impl From<CoreError> for CommandError {
    fn from(e: CoreError) -> Self {
        CommandError(e.to_string())
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CommandError>;

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CommandError(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<(ScenarioFile, String)> {
    let text = read_file(path)?;
    let file = scenario::parse(&text)
        .map_err(|e| CommandError(format!("{}: {e}", path.display())))?;
    Ok((file, text))
}

fn fmt_labels(set: &BTreeSet<NodeId>) -> String {
    let labels: Vec<String> = set.iter().map(|&v| (v + 1).to_string()).collect();
    format!("{{{}}}", labels.join(", "))
}

fn fmt_eigenvalue(v: Complex<f64>) -> String {
    if v.im == 0.0 {
        format!("{}", v.re)
    } else {
        format!("{}{:+}i", v.re, v.im)
    }
}

/// `check`: static feasibility analysis of a scenario.
pub fn check(path: &Path, exhaustive: bool, out: &mut dyn Write) -> Result<()> {
    let (file, _) = load_scenario(path)?;
    let plant = scenario::build_plant(&file)?;
    let net = scenario::build_network(&file)?;
    let f = file.f;
    let basis = match (&file.plant.t, &file.plant.m) {
        (Some(_), Some(_)) => {
            let built = scenario::build_scenario(&file, None, None)?;
            let (t, m) = built.basis_override.expect("set just above");
            spectral::build_basis_with(&plant, t, m)?
        }
        _ => spectral::build_basis(&plant)?,
    };

    writeln!(
        out,
        "plant: {} states, {} nodes, f = {f}",
        plant.state_dim(),
        plant.node_count()
    )?;
    let omega = basis.omega_u().clone();
    writeln!(out, "unstable eigen blocks requiring consensus: {}", omega.len())?;
    for &j in &omega {
        let block = &basis.blocks()[j];
        writeln!(
            out,
            "  block {j}: eigenvalue {}, dimension {}, sources = {}",
            fmt_eigenvalue(block.eigenvalue),
            block.block_dimension,
            fmt_labels(basis.source_set(j)),
        )?;
    }

    let cardinality = spectral::check_source_cardinality(&basis, f);
    writeln!(
        out,
        "source cardinality (need {} per block): {}",
        cardinality.required,
        if cardinality.all_pass { "pass" } else { "FAIL" }
    )?;
    for &(j, size, ok) in &cardinality.entries {
        if !ok {
            writeln!(out, "  block {j}: only {size} sources")?;
        }
    }

    let mut feasible_design = true;
    for r in [2 * f + 1, 3 * f + 1] {
        let report = graph::check_r_feasible(&net, &basis, r);
        writeln!(
            out,
            "strong {r}-robustness of every source set: {}",
            if report.feasible { "yes" } else { "no" }
        )?;
        for &(j, eigenvalue, ok) in &report.per_block {
            if !ok {
                writeln!(
                    out,
                    "  block {j} (eigenvalue {}): not strongly {r}-robust",
                    fmt_eigenvalue(eigenvalue)
                )?;
            }
        }
        if r == 2 * f + 1 {
            feasible_design = report.feasible;
        }
    }
    let verdict = if feasible_design && cardinality.all_pass {
        "feasible: the design phase terminates and f-local attacks are tolerated"
    } else {
        "infeasible for the requested f"
    };
    writeln!(out, "verdict: {verdict}")?;

    if exhaustive {
        writeln!(out, "-- exhaustive analysis --")?;
        exhaustive_analysis(&plant, &net, f, out)?;
    }
    Ok(())
}

fn exhaustive_analysis(
    plant: &rdse::plant::LtiPlant,
    net: &SensorNetwork,
    f: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let wrap = |e: CoreError| -> CommandError {
        match e {
            CoreError::ScaleLimit { actual, max } => CommandError(format!(
                "exhaustive analysis is limited to {max} nodes, this network has {actual}"
            )),
            other => other.into(),
        }
    };
    let critical = graph::minimal_critical_sets(plant, DEFAULT_MAX_NODES).map_err(wrap)?;
    if critical.is_empty() {
        writeln!(
            out,
            "no critical sets: every single node keeps the system detectable on its own"
        )?;
        return Ok(());
    }
    writeln!(out, "minimal critical measurement sets:")?;
    for set in &critical {
        writeln!(out, "  {}", fmt_labels(set))?;
    }
    for set in &critical {
        for (kind, name) in [(CutKind::FLocal, "local"), (CutKind::FTotal, "total")] {
            let witness = graph::find_pair_cut(net, set, f, kind).map_err(wrap)?;
            match witness {
                Some(cut) => writeln!(
                    out,
                    "  {f}-{name} pair cut w.r.t. {}: cut = {}, parts {} / {}, unreachable = {}",
                    fmt_labels(set),
                    fmt_labels(&cut.cut),
                    fmt_labels(&cut.part_one),
                    fmt_labels(&cut.part_two),
                    fmt_labels(&cut.sink_side),
                )?,
                None => writeln!(
                    out,
                    "  no {f}-{name} pair cut w.r.t. {}",
                    fmt_labels(set)
                )?,
            }
        }
    }
    let bound = graph::max_tolerable_f_bound(plant, net, DEFAULT_MAX_NODES).map_err(wrap)?;
    writeln!(
        out,
        "upper bound on tolerable f from total pair cuts: {bound}"
    )?;
    Ok(())
}

/// `simulate`: run a scenario and write trace/summary/DAG artifacts.
pub fn simulate(
    path: &Path,
    out_dir: &Path,
    force: bool,
    seed_override: Option<u64>,
    rounds_override: Option<usize>,
    out: &mut dyn Write,
) -> Result<()> {
    let (file, text) = load_scenario(path)?;
    let built = scenario::build_scenario(&file, seed_override, rounds_override)?;

    // static feasibility gate, unless forced
    let basis = match &built.basis_override {
        Some((t, m)) => spectral::build_basis_with(&built.plant, t.clone(), m.clone())?,
        None => spectral::build_basis(&built.plant)?,
    };
    let cardinality = spectral::check_source_cardinality(&basis, built.f);
    let robust = graph::check_r_feasible(&built.net, &basis, 2 * built.f + 1);
    if !(cardinality.all_pass && robust.feasible) {
        if !force {
            return Err(CommandError(format!(
                "scenario is not feasible for f = {} (source cardinality: {}, strong {}-robustness: {}); pass --force to run anyway",
                built.f,
                if cardinality.all_pass { "ok" } else { "violated" },
                2 * built.f + 1,
                if robust.feasible { "ok" } else { "violated" },
            )));
        }
        writeln!(out, "warning: running an infeasible scenario under --force")?;
    }

    let trace = simulator::run(&built)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("trace.csv"), output::trace_csv(&trace))?;
    fs::write(
        out_dir.join("summary.json"),
        output::summary_json(&trace, &text),
    )?;
    for (&block, medag) in &trace.medags {
        fs::write(
            out_dir.join(format!("medag_block_{block}.txt")),
            output::medag_text(medag),
        )?;
    }

    for warning in &trace.warnings {
        writeln!(out, "warning: {warning}")?;
    }
    writeln!(
        out,
        "simulated {} rounds, {} regular nodes; artifacts in {}",
        trace.rounds,
        trace.regular.len(),
        out_dir.display()
    )?;
    for summary in simulator::summarize(&trace) {
        writeln!(
            out,
            "node {}: final error {:.3e}, max {:.3e}{}",
            summary.node + 1,
            summary.final_error,
            summary.max_error,
            if summary.diverging { " (diverging)" } else { "" }
        )?;
    }
    Ok(())
}

/// `generate`: sample a random network and write it as an edge-list file.
pub fn generate(
    spec_path: &Path,
    out_path: &Path,
    seed_override: Option<u64>,
    out: &mut dyn Write,
) -> Result<()> {
    let text = read_file(spec_path)?;
    let mut section = scenario::parse_generate_only(&text)
        .map_err(|e| CommandError(format!("{}: {e}", spec_path.display())))?;
    if let Some(seed) = seed_override {
        section.seed = seed;
    }
    let spec = scenario::build_gen_spec(&section)?;
    let net = netgen::generate(&spec)?;
    let sources = netgen::sample_sources(&spec, &net)?;
    let model = match &section.model {
        ModelSpec::Er { p } => format!("er p={p}"),
        ModelSpec::Ba { attach } => format!("ba attach={attach}"),
        ModelSpec::Rgg { d } => format!("rgg d={d}"),
    };
    let provenance = format!(
        "random sensor network\nmodel = {model}\nn = {}\nr = {}\nseed = {}",
        section.n, section.r, section.seed
    );
    fs::write(out_path, netfile::serialize(&net, Some(&sources), &provenance))?;
    writeln!(
        out,
        "wrote {} nodes, {} directed edges, {} sources to {}",
        net.node_count(),
        net.edges().len(),
        sources.len(),
        out_path.display()
    )?;
    Ok(())
}

/// `percolate`: run bootstrap percolation on a network file.
pub fn percolate(
    network_path: &Path,
    sources_arg: Option<&str>,
    r: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let text = read_file(network_path)?;
    let (net, file_sources) = netfile::parse(&text)
        .map_err(|e| CommandError(format!("{}: {e}", network_path.display())))?;
    let sources: BTreeSet<NodeId> = match sources_arg {
        Some(list) => {
            let mut set = BTreeSet::new();
            for token in list.split(',').filter(|t| !t.is_empty()) {
                let label: usize = token
                    .trim()
                    .parse()
                    .map_err(|e| CommandError(format!("bad source label `{token}`: {e}")))?;
                if label == 0 || label > net.node_count() {
                    return Err(CommandError(format!(
                        "source label {label} outside 1..={}",
                        net.node_count()
                    )));
                }
                set.insert(label - 1);
            }
            set
        }
        None => file_sources.ok_or_else(|| {
            CommandError(
                "no --sources given and the network file declares none".into(),
            )
        })?,
    };
    if sources.is_empty() {
        return Err(CommandError("the source set is empty".into()));
    }
    let result = graph::percolate(&net, &sources, r);
    writeln!(out, "threshold r = {r}, seed set = {}", fmt_labels(&sources))?;
    for (round, newly) in result.rounds.iter().enumerate().skip(1) {
        if newly.is_empty() {
            continue;
        }
        writeln!(out, "round {round}: activated {}", fmt_labels(newly))?;
    }
    let covered = result.final_active.len() == net.node_count();
    writeln!(
        out,
        "final: {} of {} nodes active ({})",
        result.final_active.len(),
        net.node_count(),
        if covered { "covers the network" } else { "stalls" }
    )?;
    Ok(())
}
