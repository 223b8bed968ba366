//! Sectioned-text scenario files: parsing, canonical serialization, and
//! translation into an executable scenario.
//!
//! Node labels in files are 1-based (as networks are usually drawn); all
//! internal ids are 0-based. The translation lives entirely in this module.
//!
//! Format sketch:
//!
//! ```text
//! [plant]
//! nodes = 7
//! a = 2
//! c 1 = 1
//! x0 = 0.5
//! [network]
//! edge 1 -> 2
//! [resilience]
//! f = 1
//! [attack]
//! compromised = 1
//! runtime 1 = constant:0.001
//! [run]
//! rounds = 100
//! seed = 7
//! mode = lfre
//! init = uniform:0,1
//! gain 1 = 1.5
//! ```
//!
//! Matrices are row-major with rows separated by `;`. Exactly one of
//! `[network]` / `[generate]` must be present.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rdse::adversary::{AttackScript, DesignPolicy, RuntimePolicy};
use rdse::graph::SensorNetwork;
use rdse::netgen::{GenSpec, GraphModel, SourceRule};
use rdse::plant::LtiPlant;
use rdse::simulator::{EstimatorMode, InitialEstimates, Scenario};

/// Parse or validation failure with the offending 1-based line number when
/// known.
#[derive(Debug)]
pub struct FileError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for FileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for FileError {}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, FileError> {
    Err(FileError {
        line,
        message: message.into(),
    })
}

/// Design-phase policy with 1-based labels, mirroring the library's policy
/// type.
pub type DesignSpec = DesignPolicy;

/// Runtime policy with 1-based recipient labels.
#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeSpec {
    Honest,
    Silent,
    Constant(f64),
    Random { seed: u64, low: f64, high: f64 },
    ScaledTruth(f64),
    PerRecipient(BTreeMap<usize, RuntimeSpec>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlantSection {
    pub node_count: usize,
    pub a: Vec<Vec<f64>>,
    /// per 1-based node label; absent nodes have no sensors
    pub c: BTreeMap<usize, Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    pub t: Option<Vec<Vec<f64>>>,
    pub m: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkSection {
    /// 1-based directed edges
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Er { p: f64 },
    Ba { attach: usize },
    Rgg { d: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourcesSpec {
    Random(usize),
    Bernoulli(f64),
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSection {
    pub model: ModelSpec,
    pub n: usize,
    pub seed: u64,
    pub r: usize,
    pub sources: SourcesSpec,
    /// attachment seed graph for the preferential-attachment model
    pub seed_nodes: usize,
    pub seed_edges: Vec<(usize, usize)>,
}

fn default_generate() -> GenerateSection {
    GenerateSection {
        model: ModelSpec::Er { p: 0.5 },
        n: 0,
        seed: 0,
        r: 1,
        sources: SourcesSpec::Random(1),
        seed_nodes: 0,
        seed_edges: Vec::new(),
    }
}

fn apply_generate_key(
    g: &mut GenerateSection,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), FileError> {
    match key {
        "model" => {
            g.model = match value {
                v if v.starts_with("er:") => ModelSpec::Er {
                    p: parse_f64(&v[3..], lineno)?,
                },
                v if v.starts_with("ba:") => ModelSpec::Ba {
                    attach: parse_usize(&v[3..], lineno)?,
                },
                v if v.starts_with("rgg:") => ModelSpec::Rgg {
                    d: parse_f64(&v[4..], lineno)?,
                },
                other => {
                    return err(
                        Some(lineno),
                        format!("unknown model `{other}` (er:p, ba:r, rgg:d)"),
                    )
                }
            }
        }
        "n" => g.n = parse_usize(value, lineno)?,
        "seed" => g.seed = parse_u64(value, lineno)?,
        "r" => g.r = parse_usize(value, lineno)?,
        "sources" => {
            g.sources = if let Some(rest) = value.strip_prefix("random:") {
                SourcesSpec::Random(parse_usize(rest, lineno)?)
            } else if let Some(rest) = value.strip_prefix("bernoulli:") {
                SourcesSpec::Bernoulli(parse_f64(rest, lineno)?)
            } else if let Some(rest) = value.strip_prefix("explicit:") {
                SourcesSpec::Explicit(parse_label_list(rest, lineno)?)
            } else {
                return err(Some(lineno), format!("unknown sources rule `{value}`"));
            }
        }
        "seed-nodes" => g.seed_nodes = parse_usize(value, lineno)?,
        "seed-edge" => g.seed_edges.push(parse_edge(value, lineno)?),
        other => return err(Some(lineno), format!("unknown generate key `{other}`")),
    }
    Ok(())
}

/// Parses a file holding only a `[generate]` section, as consumed by the
/// standalone `generate` subcommand.
pub fn parse_generate_only(text: &str) -> Result<GenerateSection, FileError> {
    let mut g: Option<GenerateSection> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if name != "generate" {
                return err(Some(lineno), "only a [generate] section is allowed here");
            }
            g = Some(default_generate());
            continue;
        }
        let Some(section) = g.as_mut() else {
            return err(Some(lineno), "entry before the [generate] section");
        };
        let Some((key, value)) = line.split_once('=') else {
            return err(Some(lineno), "expected `key = value`");
        };
        apply_generate_key(section, key.trim(), value.trim(), lineno)?;
    }
    match g {
        Some(g) if g.n > 0 => Ok(g),
        Some(_) => err(None, "[generate] must declare `n`"),
        None => err(None, "missing [generate] section"),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackSection {
    pub compromised: Vec<usize>,
    pub design: BTreeMap<usize, DesignSpec>,
    pub runtime: BTreeMap<usize, RuntimeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    Uniform { low: f64, high: f64 },
    /// per 1-based node label
    Explicit(BTreeMap<usize, Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub rounds: usize,
    pub seed: u64,
    pub mode: EstimatorMode,
    pub init: InitSpec,
    pub gains: BTreeMap<usize, Vec<Vec<f64>>>,
    pub max_design_rounds: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            rounds: 1,
            seed: 0,
            mode: EstimatorMode::ResilientLfre,
            init: InitSpec::Zero,
            gains: BTreeMap::new(),
            max_design_rounds: None,
        }
    }
}

/// In-memory form of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub plant: PlantSection,
    pub network: Option<NetworkSection>,
    pub generate: Option<GenerateSection>,
    pub f: usize,
    pub attack: AttackSection,
    pub run: RunSection,
}

fn parse_matrix(value: &str, line: usize) -> Result<Vec<Vec<f64>>, FileError> {
    let mut rows = Vec::new();
    for row in value.split(';') {
        let entries: Result<Vec<f64>, _> = row
            .split([',', ' ', '\t'])
            .filter(|t| !t.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match entries {
            Ok(r) if !r.is_empty() => rows.push(r),
            Ok(_) => {}
            Err(e) => return err(Some(line), format!("bad number in matrix: {e}")),
        }
    }
    if rows.is_empty() {
        return err(Some(line), "empty matrix");
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return err(Some(line), "matrix rows have differing lengths");
    }
    Ok(rows)
}

fn parse_vector(value: &str, line: usize) -> Result<Vec<f64>, FileError> {
    value
        .split([',', ' ', '\t'])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| FileError {
                    line: Some(line),
                    message: format!("bad number: {e}"),
                })
        })
        .collect()
}

fn parse_usize(value: &str, line: usize) -> Result<usize, FileError> {
    value
        .trim()
        .parse()
        .map_err(|e| FileError { line: Some(line), message: format!("bad integer: {e}") })
}

fn parse_u64(value: &str, line: usize) -> Result<u64, FileError> {
    value
        .trim()
        .parse()
        .map_err(|e| FileError { line: Some(line), message: format!("bad integer: {e}") })
}

fn parse_f64(value: &str, line: usize) -> Result<f64, FileError> {
    value
        .trim()
        .parse()
        .map_err(|e| FileError { line: Some(line), message: format!("bad number: {e}") })
}

fn parse_label_list(value: &str, line: usize) -> Result<Vec<usize>, FileError> {
    value
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| parse_usize(t, line))
        .collect()
}

fn parse_edge(value: &str, line: usize) -> Result<(usize, usize), FileError> {
    let Some((a, b)) = value.split_once("->") else {
        return err(Some(line), "edge must be written as `a -> b`");
    };
    Ok((parse_usize(a, line)?, parse_usize(b, line)?))
}

fn parse_design(value: &str, line: usize) -> Result<DesignSpec, FileError> {
    let value = value.trim();
    match value {
        "honest" => Ok(DesignPolicy::Honest),
        "silent" => Ok(DesignPolicy::Silent),
        "broadcast-early" => Ok(DesignPolicy::BroadcastEarly),
        _ => {
            if let Some(rest) = value.strip_prefix("rounds:") {
                let rounds: BTreeSet<usize> =
                    parse_label_list(rest, line)?.into_iter().collect();
                Ok(DesignPolicy::ScriptedRounds(rounds))
            } else {
                err(Some(line), format!("unknown design policy `{value}`"))
            }
        }
    }
}

fn parse_runtime(value: &str, line: usize) -> Result<RuntimeSpec, FileError> {
    let value = value.trim();
    match value {
        "honest" => return Ok(RuntimeSpec::Honest),
        "silent" => return Ok(RuntimeSpec::Silent),
        _ => {}
    }
    if let Some(rest) = value.strip_prefix("constant:") {
        return Ok(RuntimeSpec::Constant(parse_f64(rest, line)?));
    }
    if let Some(rest) = value.strip_prefix("scaled-truth:") {
        return Ok(RuntimeSpec::ScaledTruth(parse_f64(rest, line)?));
    }
    if let Some(rest) = value.strip_prefix("random:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return err(Some(line), "random policy needs `random:seed,low,high`");
        }
        return Ok(RuntimeSpec::Random {
            seed: parse_u64(parts[0], line)?,
            low: parse_f64(parts[1], line)?,
            high: parse_f64(parts[2], line)?,
        });
    }
    if let Some(rest) = value.strip_prefix("per-recipient:") {
        let mut map = BTreeMap::new();
        for entry in rest.split(';').filter(|t| !t.trim().is_empty()) {
            let Some((label, policy)) = entry.split_once('=') else {
                return err(Some(line), "per-recipient entries are `recipient=policy`");
            };
            map.insert(parse_usize(label, line)?, parse_runtime(policy, line)?);
        }
        return Ok(RuntimeSpec::PerRecipient(map));
    }
    err(Some(line), format!("unknown runtime policy `{value}`"))
}

fn serialize_runtime(spec: &RuntimeSpec) -> String {
    match spec {
        RuntimeSpec::Honest => "honest".into(),
        RuntimeSpec::Silent => "silent".into(),
        RuntimeSpec::Constant(v) => format!("constant:{v}"),
        RuntimeSpec::ScaledTruth(v) => format!("scaled-truth:{v}"),
        RuntimeSpec::Random { seed, low, high } => format!("random:{seed},{low},{high}"),
        RuntimeSpec::PerRecipient(map) => {
            let entries: Vec<String> = map
                .iter()
                .map(|(r, p)| format!("{r}={}", serialize_runtime(p)))
                .collect();
            format!("per-recipient:{}", entries.join(";"))
        }
    }
}

fn serialize_design(spec: &DesignSpec) -> String {
    match spec {
        DesignPolicy::Honest => "honest".into(),
        DesignPolicy::Silent => "silent".into(),
        DesignPolicy::BroadcastEarly => "broadcast-early".into(),
        DesignPolicy::ScriptedRounds(rounds) => {
            let list: Vec<String> = rounds.iter().map(|r| r.to_string()).collect();
            format!("rounds:{}", list.join(","))
        }
    }
}

fn serialize_matrix(m: &[Vec<f64>]) -> String {
    m.iter()
        .map(|row| {
            row.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses a scenario file from text.
pub fn parse(text: &str) -> Result<ScenarioFile, FileError> {
    let mut plant: Option<PlantSection> = None;
    let mut network: Option<NetworkSection> = None;
    let mut generate: Option<GenerateSection> = None;
    let mut f: Option<usize> = None;
    let mut attack = AttackSection::default();
    let mut run = RunSection::default();
    let mut run_seen = false;

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Plant,
        Network,
        Generate,
        Resilience,
        Attack,
        Run,
    }
    let mut section = Section::None;
    let mut explicit_init: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut init_mode: Option<InitSpec> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name {
                "plant" => {
                    plant = Some(PlantSection::default());
                    Section::Plant
                }
                "network" => {
                    network = Some(NetworkSection::default());
                    Section::Network
                }
                "generate" => {
                    generate = Some(default_generate());
                    Section::Generate
                }
                "resilience" => Section::Resilience,
                "attack" => Section::Attack,
                "run" => {
                    run_seen = true;
                    Section::Run
                }
                other => return err(Some(lineno), format!("unknown section [{other}]")),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(Some(lineno), "expected `key = value`");
        };
        let key = key.trim();
        let value = value.trim();
        match section {
            Section::None => return err(Some(lineno), "entry before the first section"),
            Section::Plant => {
                let p = plant.as_mut().expect("section implies struct");
                if key == "nodes" {
                    p.node_count = parse_usize(value, lineno)?;
                } else if key == "a" {
                    p.a = parse_matrix(value, lineno)?;
                } else if key == "x0" {
                    p.x0 = parse_vector(value, lineno)?;
                } else if key == "t" {
                    p.t = Some(parse_matrix(value, lineno)?);
                } else if key == "m" {
                    p.m = Some(parse_matrix(value, lineno)?);
                } else if let Some(label) = key.strip_prefix("c ") {
                    p.c
                        .insert(parse_usize(label, lineno)?, parse_matrix(value, lineno)?);
                } else {
                    return err(Some(lineno), format!("unknown plant key `{key}`"));
                }
            }
            Section::Network => {
                let n = network.as_mut().expect("section implies struct");
                if key == "edge" {
                    n.edges.push(parse_edge(value, lineno)?);
                } else {
                    return err(Some(lineno), format!("unknown network key `{key}`"));
                }
            }
            Section::Generate => {
                let g = generate.as_mut().expect("section implies struct");
                apply_generate_key(g, key, value, lineno)?;
            }
            Section::Resilience => {
                if key == "f" {
                    f = Some(parse_usize(value, lineno)?);
                } else {
                    return err(Some(lineno), format!("unknown resilience key `{key}`"));
                }
            }
            Section::Attack => {
                if key == "compromised" {
                    attack.compromised = parse_label_list(value, lineno)?;
                } else if let Some(label) = key.strip_prefix("design ") {
                    attack
                        .design
                        .insert(parse_usize(label, lineno)?, parse_design(value, lineno)?);
                } else if let Some(label) = key.strip_prefix("runtime ") {
                    attack
                        .runtime
                        .insert(parse_usize(label, lineno)?, parse_runtime(value, lineno)?);
                } else {
                    return err(Some(lineno), format!("unknown attack key `{key}`"));
                }
            }
            Section::Run => match key {
                "rounds" => run.rounds = parse_usize(value, lineno)?,
                "seed" => run.seed = parse_u64(value, lineno)?,
                "max-design-rounds" => {
                    run.max_design_rounds = Some(parse_usize(value, lineno)?)
                }
                "mode" => {
                    run.mode = match value {
                        "lfre" => EstimatorMode::ResilientLfre,
                        "plain-consensus" => EstimatorMode::PlainConsensus,
                        other => {
                            return err(
                                Some(lineno),
                                format!("unknown mode `{other}` (lfre, plain-consensus)"),
                            )
                        }
                    }
                }
                "init" => {
                    init_mode = Some(if value == "zero" {
                        InitSpec::Zero
                    } else if value == "explicit" {
                        InitSpec::Explicit(BTreeMap::new())
                    } else if let Some(rest) = value.strip_prefix("uniform:") {
                        let parts: Vec<&str> = rest.split(',').collect();
                        if parts.len() != 2 {
                            return err(Some(lineno), "uniform init needs `uniform:low,high`");
                        }
                        InitSpec::Uniform {
                            low: parse_f64(parts[0], lineno)?,
                            high: parse_f64(parts[1], lineno)?,
                        }
                    } else {
                        return err(Some(lineno), format!("unknown init `{value}`"));
                    });
                }
                _ => {
                    if let Some(label) = key.strip_prefix("init ") {
                        explicit_init
                            .insert(parse_usize(label, lineno)?, parse_vector(value, lineno)?);
                    } else if let Some(label) = key.strip_prefix("gain ") {
                        run.gains
                            .insert(parse_usize(label, lineno)?, parse_matrix(value, lineno)?);
                    } else {
                        return err(Some(lineno), format!("unknown run key `{key}`"));
                    }
                }
            },
        }
    }

    let Some(plant) = plant else {
        return err(None, "missing required section [plant]");
    };
    let Some(f) = f else {
        return err(None, "missing required section [resilience] with `f`");
    };
    if !run_seen {
        return err(None, "missing required section [run]");
    }
    match (&network, &generate) {
        (None, None) => return err(None, "one of [network] or [generate] is required"),
        (Some(_), Some(_)) => {
            return err(None, "[network] and [generate] are mutually exclusive")
        }
        _ => {}
    }
    run.init = match init_mode {
        Some(InitSpec::Explicit(_)) => InitSpec::Explicit(explicit_init),
        Some(other) => other,
        None => InitSpec::Zero,
    };
    let file = ScenarioFile {
        plant,
        network,
        generate,
        f,
        attack,
        run,
    };
    validate_labels(&file)?;
    Ok(file)
}

fn validate_labels(file: &ScenarioFile) -> Result<(), FileError> {
    let n = file.plant.node_count;
    if n == 0 {
        return err(None, "[plant] must declare `nodes`");
    }
    let check = |label: usize, what: &str| -> Result<(), FileError> {
        if label == 0 || label > n {
            return err(
                None,
                format!("{what} references node {label}, outside 1..={n}"),
            );
        }
        Ok(())
    };
    for &l in file.plant.c.keys() {
        check(l, "[plant] observation")?;
    }
    if let Some(net) = &file.network {
        for &(a, b) in &net.edges {
            check(a, "[network] edge")?;
            check(b, "[network] edge")?;
        }
    }
    for &l in &file.attack.compromised {
        check(l, "[attack] compromised")?;
    }
    for &l in file.attack.design.keys() {
        check(l, "[attack] design policy")?;
    }
    for (&l, spec) in &file.attack.runtime {
        check(l, "[attack] runtime policy")?;
        if let RuntimeSpec::PerRecipient(map) = spec {
            for &r in map.keys() {
                check(r, "[attack] per-recipient policy")?;
            }
        }
    }
    for &l in file.run.gains.keys() {
        check(l, "[run] gain")?;
    }
    if let InitSpec::Explicit(map) = &file.run.init {
        for &l in map.keys() {
            check(l, "[run] init")?;
        }
    }
    Ok(())
}

/// Canonical text form; `parse(serialize(f)) == f`.
pub fn serialize(file: &ScenarioFile) -> String {
    let mut out = String::new();
    let p = &file.plant;
    out.push_str("[plant]\n");
    let _ = writeln!(out, "nodes = {}", p.node_count);
    let _ = writeln!(out, "a = {}", serialize_matrix(&p.a));
    for (label, c) in &p.c {
        let _ = writeln!(out, "c {label} = {}", serialize_matrix(c));
    }
    let _ = writeln!(
        out,
        "x0 = {}",
        p.x0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    );
    if let Some(t) = &p.t {
        let _ = writeln!(out, "t = {}", serialize_matrix(t));
    }
    if let Some(m) = &p.m {
        let _ = writeln!(out, "m = {}", serialize_matrix(m));
    }
    if let Some(net) = &file.network {
        out.push_str("[network]\n");
        for &(a, b) in &net.edges {
            let _ = writeln!(out, "edge = {a} -> {b}");
        }
    }
    if let Some(g) = &file.generate {
        out.push_str("[generate]\n");
        let model = match &g.model {
            ModelSpec::Er { p } => format!("er:{p}"),
            ModelSpec::Ba { attach } => format!("ba:{attach}"),
            ModelSpec::Rgg { d } => format!("rgg:{d}"),
        };
        let _ = writeln!(out, "model = {model}");
        let _ = writeln!(out, "n = {}", g.n);
        let _ = writeln!(out, "seed = {}", g.seed);
        let _ = writeln!(out, "r = {}", g.r);
        let sources = match &g.sources {
            SourcesSpec::Random(k) => format!("random:{k}"),
            SourcesSpec::Bernoulli(p) => format!("bernoulli:{p}"),
            SourcesSpec::Explicit(list) => format!(
                "explicit:{}",
                list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
        };
        let _ = writeln!(out, "sources = {sources}");
        if g.seed_nodes > 0 {
            let _ = writeln!(out, "seed-nodes = {}", g.seed_nodes);
        }
        for &(a, b) in &g.seed_edges {
            let _ = writeln!(out, "seed-edge = {a} -> {b}");
        }
    }
    out.push_str("[resilience]\n");
    let _ = writeln!(out, "f = {}", file.f);
    out.push_str("[attack]\n");
    if !file.attack.compromised.is_empty() {
        let _ = writeln!(
            out,
            "compromised = {}",
            file.attack
                .compromised
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    for (label, spec) in &file.attack.design {
        let _ = writeln!(out, "design {label} = {}", serialize_design(spec));
    }
    for (label, spec) in &file.attack.runtime {
        let _ = writeln!(out, "runtime {label} = {}", serialize_runtime(spec));
    }
    out.push_str("[run]\n");
    let _ = writeln!(out, "rounds = {}", file.run.rounds);
    let _ = writeln!(out, "seed = {}", file.run.seed);
    let mode = match file.run.mode {
        EstimatorMode::ResilientLfre => "lfre",
        EstimatorMode::PlainConsensus => "plain-consensus",
    };
    let _ = writeln!(out, "mode = {mode}");
    match &file.run.init {
        InitSpec::Zero => {
            let _ = writeln!(out, "init = zero");
        }
        InitSpec::Uniform { low, high } => {
            let _ = writeln!(out, "init = uniform:{low},{high}");
        }
        InitSpec::Explicit(map) => {
            let _ = writeln!(out, "init = explicit");
            for (label, v) in map {
                let _ = writeln!(
                    out,
                    "init {label} = {}",
                    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
                );
            }
        }
    }
    for (label, gain) in &file.run.gains {
        let _ = writeln!(out, "gain {label} = {}", serialize_matrix(gain));
    }
    if let Some(m) = file.run.max_design_rounds {
        let _ = writeln!(out, "max-design-rounds = {m}");
    }
    out
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn runtime_to_policy(spec: &RuntimeSpec) -> RuntimePolicy {
    match spec {
        RuntimeSpec::Honest => RuntimePolicy::Honest,
        RuntimeSpec::Silent => RuntimePolicy::Silent,
        RuntimeSpec::Constant(v) => RuntimePolicy::Constant(*v),
        RuntimeSpec::Random { seed, low, high } => RuntimePolicy::Random {
            seed: *seed,
            low: *low,
            high: *high,
        },
        RuntimeSpec::ScaledTruth(v) => RuntimePolicy::ScaledTruth(*v),
        RuntimeSpec::PerRecipient(map) => RuntimePolicy::PerRecipient(
            map.iter()
                .map(|(label, p)| (label - 1, runtime_to_policy(p)))
                .collect(),
        ),
    }
}

/// Builds the plant described by the `[plant]` section.
pub fn build_plant(file: &ScenarioFile) -> Result<LtiPlant, FileError> {
    let p = &file.plant;
    if p.a.is_empty() {
        return err(None, "[plant] must declare `a`");
    }
    let a = to_dmatrix(&p.a);
    let dim = a.nrows();
    let observations: Vec<DMatrix<f64>> = (1..=p.node_count)
        .map(|label| match p.c.get(&label) {
            Some(rows) => to_dmatrix(rows),
            None => DMatrix::zeros(0, dim),
        })
        .collect();
    if p.x0.len() != dim {
        return err(
            None,
            format!("[plant] x0 has length {}, expected {dim}", p.x0.len()),
        );
    }
    LtiPlant::new(a, observations, DVector::from_vec(p.x0.clone()))
        .map_err(|e| FileError { line: None, message: e.to_string() })
}

/// Builds the communication network, either from the explicit edge list or by
/// running the generator.
pub fn build_network(file: &ScenarioFile) -> Result<SensorNetwork, FileError> {
    if let Some(net) = &file.network {
        return SensorNetwork::new(
            file.plant.node_count,
            net.edges.iter().map(|&(a, b)| (a - 1, b - 1)),
        )
        .map_err(|e| FileError { line: None, message: e.to_string() });
    }
    let g = file.generate.as_ref().expect("validated: one of the two");
    let spec = build_gen_spec(g)?;
    if g.n != file.plant.node_count {
        return err(
            None,
            format!(
                "[generate] n = {} does not match the plant's {} nodes",
                g.n, file.plant.node_count
            ),
        );
    }
    rdse::netgen::generate(&spec).map_err(|e| FileError { line: None, message: e.to_string() })
}

/// Translates a `[generate]` section into a generator spec (0-based ids).
pub fn build_gen_spec(g: &GenerateSection) -> Result<GenSpec, FileError> {
    let model = match &g.model {
        ModelSpec::Er { p } => GraphModel::Er { n: g.n, p: *p },
        ModelSpec::Rgg { d } => GraphModel::Rgg { n: g.n, d: *d },
        ModelSpec::Ba { attach } => {
            if g.seed_nodes == 0 {
                return err(None, "ba model needs `seed-nodes` and `seed-edge` entries");
            }
            let seed_graph = SensorNetwork::new(
                g.seed_nodes,
                g.seed_edges.iter().map(|&(a, b)| (a - 1, b - 1)),
            )
            .map_err(|e| FileError { line: None, message: e.to_string() })?;
            GraphModel::Ba {
                n: g.n,
                r: *attach,
                seed_graph,
            }
        }
    };
    let source_rule = match &g.sources {
        SourcesSpec::Random(k) => SourceRule::RandomSubset(*k),
        SourcesSpec::Bernoulli(p) => SourceRule::Bernoulli(*p),
        SourcesSpec::Explicit(list) => {
            SourceRule::Explicit(list.iter().map(|&l| l - 1).collect())
        }
    };
    Ok(GenSpec {
        model,
        source_rule,
        r: g.r,
        seed: g.seed,
    })
}

/// Builds the executable scenario; `seed_override` / `rounds_override`
/// implement the corresponding command-line flags.
pub fn build_scenario(
    file: &ScenarioFile,
    seed_override: Option<u64>,
    rounds_override: Option<usize>,
) -> Result<Scenario, FileError> {
    let plant = build_plant(file)?;
    let net = build_network(file)?;
    let rounds = rounds_override.unwrap_or(file.run.rounds);
    let mut scenario = Scenario::new(plant, net, file.f, rounds)
        .map_err(|e| FileError { line: None, message: e.to_string() })?;
    scenario.seed = seed_override.unwrap_or(file.run.seed);
    scenario.estimator_mode = file.run.mode;
    scenario.max_design_rounds = file.run.max_design_rounds;
    scenario.attack = AttackScript {
        compromised: file.attack.compromised.iter().map(|&l| l - 1).collect(),
        design_policies: file
            .attack
            .design
            .iter()
            .map(|(&l, p)| (l - 1, p.clone()))
            .collect(),
        runtime_policies: file
            .attack
            .runtime
            .iter()
            .map(|(&l, p)| (l - 1, runtime_to_policy(p)))
            .collect(),
    };
    scenario.initial_estimates = match &file.run.init {
        InitSpec::Zero => InitialEstimates::Zero,
        InitSpec::Uniform { low, high } => InitialEstimates::RandomUniform {
            low: *low,
            high: *high,
        },
        InitSpec::Explicit(map) => {
            let dim = scenario.plant.state_dim();
            let mut all = Vec::with_capacity(file.plant.node_count);
            for label in 1..=file.plant.node_count {
                let v = map.get(&label).cloned().unwrap_or_else(|| vec![0.0; dim]);
                all.push(DVector::from_vec(v));
            }
            InitialEstimates::Explicit(all)
        }
    };
    scenario.observer_gains = file
        .run
        .gains
        .iter()
        .map(|(&l, rows)| (l - 1, to_dmatrix(rows)))
        .collect();
    if let (Some(t), Some(m)) = (&file.plant.t, &file.plant.m) {
        scenario.basis_override = Some((to_dmatrix(t), to_dmatrix(m)));
    } else if file.plant.t.is_some() || file.plant.m.is_some() {
        return err(None, "[plant] t and m must be supplied together");
    }
    Ok(scenario)
}

/// The bundled 7-node demonstration scenario (resilient mode).
pub fn demo_file() -> ScenarioFile {
    let edges_1 = [
        (1, 2), (1, 4), (1, 5), (1, 6),
        (2, 1), (2, 3), (2, 4), (2, 5), (2, 6),
        (3, 2), (3, 4), (3, 5), (3, 6),
        (4, 5), (4, 7),
        (5, 4), (5, 6), (5, 7),
        (6, 5), (6, 7),
        (7, 4), (7, 5), (7, 6),
    ];
    let mut c = BTreeMap::new();
    for label in 1..=3 {
        c.insert(label, vec![vec![1.0]]);
    }
    let mut gains = BTreeMap::new();
    for label in 1..=3 {
        gains.insert(label, vec![vec![1.5]]);
    }
    let mut runtime = BTreeMap::new();
    runtime.insert(1, RuntimeSpec::Constant(0.001));
    ScenarioFile {
        plant: PlantSection {
            node_count: 7,
            a: vec![vec![2.0]],
            c,
            x0: vec![0.5],
            t: None,
            m: None,
        },
        network: Some(NetworkSection {
            edges: edges_1.to_vec(),
        }),
        generate: None,
        f: 1,
        attack: AttackSection {
            compromised: vec![1],
            design: BTreeMap::new(),
            runtime,
        },
        run: RunSection {
            rounds: 100,
            seed: 7,
            mode: EstimatorMode::ResilientLfre,
            init: InitSpec::Uniform { low: 0.0, high: 1.0 },
            gains,
            max_design_rounds: None,
        },
    }
}
