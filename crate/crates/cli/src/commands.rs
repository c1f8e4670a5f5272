use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;
use xtalk_pqc::ansatz::{build, Family, Level, PqcConfig};
use xtalk_pqc::metrics::{
    circuit_stats, default_partition, entanglement_entropy, expressibility, grad_variance, speedup, CircuitStats, CostKind,
    DEFAULT_BINS,
};
use xtalk_pqc::rb::{characterize_crosstalk, RbConfig};
use xtalk_pqc::scheduler::{ala_groups, extract_sublayers, greedy_schedule, xtalk_schedule, ScheduleOptions, MAX_EXACT_GATES};
use xtalk_pqc::vqa::{run_vqe, PauliHamiltonian, SpsaConfig};
use xtalk_pqc::{Circuit, DeviceModel, Edge, Error, GateKind, NoiseMode, NoiseSpec};

use crate::{write_manifest, Command, Common};

/// Marks a run that completed but whose numerical outcome is a failure.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ideal,
    Standard,
    Xtalk,
}

impl From<Mode> for NoiseMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ideal => NoiseMode::Ideal,
            Mode::Standard => NoiseMode::Standard,
            Mode::Xtalk => NoiseMode::XtalkEnabled,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Expressibility,
    Entropy,
    Gradvar,
    Stats,
}

fn parse_edge(s: &str) -> std::result::Result<Edge, String> {
    let parts: Vec<&str> = s.split(|c| c == ',' || c == '-').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let a: usize = a.parse().map_err(|_| format!("bad qubit '{a}'"))?;
            let b: usize = b.parse().map_err(|_| format!("bad qubit '{b}'"))?;
            if a == b {
                return Err(format!("edge {s} repeats a qubit"));
            }
            Ok(Edge::new(a, b))
        }
        _ => Err(format!("expected an edge as 'a,b', got '{s}'")),
    }
}

fn parse_family(s: &str) -> std::result::Result<String, String> {
    let s = s.to_ascii_lowercase();
    if s == "xtalk" || s == "all" || s.parse::<Family>().is_ok() {
        Ok(s)
    } else {
        Err(format!("unknown family '{s}'"))
    }
}

fn parse_level(s: &str) -> std::result::Result<Level, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `base1`, `base2`, `<level>_xtalk`, or `xtalk` with `level`.
fn resolve_family(name: &str, level: Option<Level>) -> Result<Family> {
    if name == "xtalk" {
        let level = level.ok_or_else(|| Error::InvalidArgument("family xtalk needs --level".into()))?;
        return Ok(Family::Xtalk(level));
    }
    let f: Family = name.parse()?;
    match (f, level) {
        (Family::Xtalk(l), Some(given)) if l != given => {
            Err(Error::InvalidArgument(format!("family {name} conflicts with --level {given}")).into())
        }
        _ => Ok(f),
    }
}

fn load_device(common: &Common) -> Result<DeviceModel> {
    match &common.device {
        Some(p) => Ok(DeviceModel::load(p).with_context(|| format!("loading device {}", p.display()))?),
        None => Ok(DeviceModel::default_device()),
    }
}

fn out_dir(common: &Common, default: &str) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sidecar(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}

// characterize

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct CharacterizeArgs {
    /// RB sequence lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10, 20, 40])]
    pub lengths: Vec<usize>,
    /// Sequences per length.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10_000)]
    pub shots: usize,
    /// Restrict to one-hop pairs involving these edges, e.g. `--edges 0,1`.
    #[arg(long, value_parser = parse_edge)]
    pub edges: Vec<Edge>,
    /// Record failing fits and continue.
    #[arg(long)]
    pub allow_partial: bool,
    #[arg(long, value_enum, default_value_t = Mode::Xtalk)]
    pub mode: Mode,
}

pub fn characterize(common: &Common, a: &CharacterizeArgs) -> Result<()> {
    let device = load_device(common)?;
    let pairs: Vec<(Edge, Edge)> = device
        .coupling
        .one_hop_pairs()
        .into_iter()
        .filter(|(g1, g2)| g1 < g2 && (a.edges.is_empty() || a.edges.contains(g1) || a.edges.contains(g2)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no one-hop pairs match the requested edges".into()).into());
    }
    let cfg = RbConfig { lengths: a.lengths.clone(), k: a.k, shots: a.shots, seed: common.seed, allow_partial: a.allow_partial };
    info!("characterizing {} pairs", pairs.len());
    let report = characterize_crosstalk(&device, a.mode.into(), &cfg, Some(&pairs))?;

    let mut measured = device.clone();
    for e in device.coupling.edges() {
        if let Some(epc) = report.table.independent(e) {
            measured.set_cx_epc(e, epc);
        }
    }
    measured.xtalk = report.table.clone();

    let dir = out_dir(common, "characterize-out")?;
    write(&dir.join("crosstalk.json"), &(measured.to_json()? + "\n"))?;
    write(&dir.join("decays.csv"), &report.to_csv())?;
    let ratios: Vec<_> = report
        .table
        .entries()
        .map(|((g1, g2), c)| json!({ "g1": g1, "g2": g2, "conditional_epc": c, "ratio": report.ratio(g1, g2) }))
        .collect();
    let failures: Vec<_> =
        report.failures.iter().map(|f| json!({ "edge": f.edge, "paired": f.paired, "message": f.message })).collect();
    let summary = json!({ "pairs": pairs.len(), "ratios": ratios, "failures": failures });
    write(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    write_manifest(&dir.join("manifest.json"), common, &Command::Characterize(a.clone()))?;
    if let Some(((g1, g2), r)) = report.worst_pair() {
        println!("largest ratio {r:.3} for {g1} beside {g2}");
    }
    if !report.failures.is_empty() {
        println!("{} fits failed; see summary.json", report.failures.len());
    }
    Ok(())
}

// schedule

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleArgs {
    /// Circuit text file; its first entangling block is scheduled.
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    /// Admit a pair into the overlap model above this multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    /// Subtract the decoherence term as printed rather than adding it.
    #[arg(long)]
    pub paper_literal_sign: bool,
    /// Fall back to the greedy scheduler for large layers.
    #[arg(long)]
    pub greedy: bool,
}

/// Physical cx gates of the first maximal run of cx gates and barriers.
fn first_block(c: &Circuit) -> Vec<(usize, usize)> {
    let ops = c.ops();
    let Some(start) = ops.iter().position(|g| g.kind == GateKind::Cx) else {
        return Vec::new();
    };
    ops[start..]
        .iter()
        .take_while(|g| matches!(g.kind, GateKind::Cx | GateKind::Barrier))
        .filter(|g| g.kind == GateKind::Cx)
        .map(|g| (c.physical(g.qubits[0]), c.physical(g.qubits[1])))
        .collect()
}

pub fn schedule(common: &Common, a: &ScheduleArgs) -> Result<()> {
    let device = load_device(common)?;
    let text = std::fs::read_to_string(&a.circuit).with_context(|| format!("reading {}", a.circuit.display()))?;
    let circuit = Circuit::from_text(&text)?;
    let block = first_block(&circuit);
    if block.is_empty() {
        return Err(Error::InvalidArgument("circuit has no cx gates to schedule".into()).into());
    }
    let gates: Vec<(usize, usize)> = ala_groups(&block).concat();
    let opts = ScheduleOptions { omega: a.omega, threshold: a.threshold, paper_literal_sign: a.paper_literal_sign };
    let s = if a.greedy && gates.len() > MAX_EXACT_GATES {
        greedy_schedule(&gates, &device, &opts)?
    } else {
        xtalk_schedule(&gates, &device, &opts)?
    };
    let layers = extract_sublayers(&s);
    let out = json!({
        "r": layers.r,
        "sublayers": layers.layers,
        "objective": s.objective,
        "omega": s.omega,
        "threshold": s.threshold,
        "gates": s.gates,
        "assignment": s.assignment,
        "start_ns": s.start_ns,
    });
    let path = common.out.clone().unwrap_or_else(|| PathBuf::from("schedule.json"));
    write(&path, &(serde_json::to_string_pretty(&out)? + "\n"))?;
    write_manifest(&sidecar(&path), common, &Command::Schedule(a.clone()))?;
    println!("R = {}, objective = {:.6}", layers.r, s.objective);
    Ok(())
}

// build-ansatz

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct BuildArgs {
    /// base1, base2, xtalk (with --level) or <level>_xtalk.
    #[arg(long, value_parser = parse_family)]
    pub family: String,
    #[arg(long, value_parser = parse_level)]
    pub level: Option<Level>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub layers: usize,
    /// Leading base1 layers of xtalk families; default min(2, L).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long)]
    pub greedy: bool,
}

fn pqc_config(family: Family, n: usize, layers: usize, m: Option<usize>, threshold: f64, greedy: bool) -> PqcConfig {
    let mut cfg = PqcConfig::new(family, n, layers);
    if let Some(m) = m {
        cfg = cfg.with_m(m);
    }
    cfg.threshold = threshold;
    cfg.greedy_fallback = greedy;
    cfg
}

pub fn build_ansatz(common: &Common, a: &BuildArgs) -> Result<()> {
    let device = load_device(common)?;
    let family = resolve_family(&a.family, a.level)?;
    let ansatz = build(&pqc_config(family, a.n, a.layers, a.m, a.threshold, a.greedy), &device)?;
    let path = common.out.clone().unwrap_or_else(|| PathBuf::from("ansatz.txt"));
    write(&path, &ansatz.circuit.to_text())?;
    write_manifest(&sidecar(&path), common, &Command::BuildAnsatz(a.clone()))?;
    match ansatz.r() {
        Some(r) => println!("{family}: {} parameters, R = {r}", ansatz.circuit.num_params()),
        None => println!("{family}: {} parameters", ansatz.circuit.num_params()),
    }
    Ok(())
}

// sweep

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: usize,
    /// Layer counts to evaluate.
    #[arg(long, value_delimiter = ',', required = true)]
    pub layers: Vec<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Families to build, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all", value_parser = parse_family)]
    pub families: Vec<String>,
    #[arg(long, value_delimiter = ',', value_enum, required = true)]
    pub metrics: Vec<Metric>,
    /// Fidelity pairs for expressibility.
    #[arg(long, default_value_t = 5000)]
    pub pairs: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Parameter draws for entropy and gradient variance.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Cost qubits of the local cost; global cost when omitted.
    #[arg(long)]
    pub n_c: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Ideal)]
    pub mode: Mode,
    /// Shots per cost evaluation; exact expectations when omitted.
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long)]
    pub greedy: bool,
}

fn expand_families(names: &[String]) -> Result<Vec<Family>> {
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            out.extend(Family::ALL);
        } else if n == "xtalk" {
            out.extend([Level::High, Level::Medium, Level::Low].map(Family::Xtalk));
        } else {
            out.push(n.parse()?);
        }
    }
    out.dedup();
    Ok(out)
}

const SWEEP_HEADER: &str = "family,n,layers,m,r,expressibility,entropy,grad_variance,duration_ns,total_gates,two_qubit_gates,depth,cx_depth,speedup,error";

struct Row {
    family: Family,
    layers: usize,
    m: Option<usize>,
    r: Option<usize>,
    expr: Option<f64>,
    entropy: Option<f64>,
    gradvar: Option<f64>,
    stats: Option<CircuitStats>,
    speedup: Option<f64>,
    error: Option<String>,
}

fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn real(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

impl Row {
    fn csv(&self, n: usize) -> String {
        let s = self.stats.as_ref();
        let error = self.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "'"))).unwrap_or_default();
        [
            self.family.to_string(),
            n.to_string(),
            self.layers.to_string(),
            cell(self.m),
            cell(self.r),
            real(self.expr),
            real(self.entropy),
            real(self.gradvar),
            real(s.map(|s| s.duration_ns)),
            cell(s.map(|s| s.total_gates)),
            cell(s.map(|s| s.two_qubit_gates)),
            cell(s.map(|s| s.depth)),
            cell(s.map(|s| s.cx_depth)),
            real(self.speedup),
            error,
        ]
        .join(",")
    }
}

fn sweep_row(
    a: &SweepArgs,
    family: Family,
    layers: usize,
    device: &DeviceModel,
    spec: &NoiseSpec,
    seed: u64,
    base1: &Option<std::result::Result<CircuitStats, String>>,
) -> Row {
    let mut row = Row {
        family,
        layers,
        m: None,
        r: None,
        expr: None,
        entropy: None,
        gradvar: None,
        stats: None,
        speedup: None,
        error: None,
    };
    let result = (|| -> xtalk_pqc::Result<()> {
        let cfg = pqc_config(family, a.n, layers, a.m, a.threshold, a.greedy);
        if matches!(family, Family::Xtalk(_)) {
            row.m = Some(cfg.m);
        }
        let ansatz = build(&cfg, device)?;
        row.r = ansatz.r();
        let c = &ansatz.circuit;
        let n_c = a.n_c.unwrap_or(a.n);
        for metric in &a.metrics {
            match metric {
                Metric::Expressibility => row.expr = Some(expressibility(c, a.pairs, a.bins, seed)?.kl),
                Metric::Entropy => {
                    let cost: Vec<usize> = (0..n_c.min(a.n)).collect();
                    let part = default_partition(a.n, &cost);
                    row.entropy = Some(entanglement_entropy(c, &part, a.samples, seed)?.mean_s);
                }
                Metric::Gradvar => {
                    let kind = match a.n_c {
                        Some(k) => CostKind::Local(k),
                        None => CostKind::Global,
                    };
                    row.gradvar = Some(grad_variance(c, kind, 0, a.samples, spec, a.shots, seed)?.variance);
                }
                Metric::Stats => {
                    let s = circuit_stats(c, device)?;
                    if let Some(Ok(b)) = base1 {
                        row.speedup = Some(speedup(b, &s));
                    }
                    row.stats = Some(s);
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

pub fn sweep(common: &Common, a: &SweepArgs) -> Result<()> {
    let device = load_device(common)?;
    let families = expand_families(&a.families)?;
    if a.mode != Mode::Ideal && a.shots.is_none() {
        return Err(Error::InvalidArgument("noisy gradient variance needs --shots".into()).into());
    }
    let spec = NoiseSpec::new(a.mode.into(), &device, xtalk_pqc::rng::derive_seed(common.seed, 1));
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    let mut failed = 0;
    for &layers in &a.layers {
        let base1 = a.metrics.contains(&Metric::Stats).then(|| {
            build(&PqcConfig::new(Family::Base1, a.n, layers), &device)
                .and_then(|b| circuit_stats(&b.circuit, &device))
                .map_err(|e| e.to_string())
        });
        for &family in &families {
            let row = sweep_row(a, family, layers, &device, &spec, common.seed, &base1);
            failed += usize::from(row.error.is_some());
            let _ = writeln!(csv, "{}", row.csv(a.n));
        }
    }
    let dir = out_dir(common, "sweep-out")?;
    write(&dir.join("sweep.csv"), &csv)?;
    write_manifest(&dir.join("manifest.json"), common, &Command::Sweep(a.clone()))?;
    println!("{} rows written, {failed} with errors", families.len() * a.layers.len());
    Ok(())
}

// vqe

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct VqeArgs {
    /// Hamiltonian JSON, or `h2` / `lih` for the shipped files.
    #[arg(long, default_value = "h2")]
    pub hamiltonian: String,
    #[arg(long, value_parser = parse_family, default_value = "base1")]
    pub family: String,
    #[arg(long, value_parser = parse_level)]
    pub level: Option<Level>,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Ideal)]
    pub mode: Mode,
    /// Shots per measurement setting; exact expectations when omitted.
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// SPSA step gain.
    #[arg(long, default_value_t = 0.2)]
    pub a: f64,
    /// SPSA perturbation gain.
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    /// Half-width of the uniform initial-parameter box.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub init_range: f64,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
}

fn load_hamiltonian(s: &str) -> Result<PauliHamiltonian> {
    Ok(match s {
        "h2" => PauliHamiltonian::h2(),
        "lih" => PauliHamiltonian::lih(),
        path => PauliHamiltonian::load(path).with_context(|| format!("loading Hamiltonian {path}"))?,
    })
}

pub fn vqe(common: &Common, a: &VqeArgs) -> Result<()> {
    let device = load_device(common)?;
    let h = load_hamiltonian(&a.hamiltonian)?;
    let family = resolve_family(&a.family, a.level)?;
    let cfg = pqc_config(family, h.n, a.layers, a.m, a.threshold, false);
    let spsa = SpsaConfig { max_iter: a.max_iter, a: a.a, c: a.c, seed: common.seed, init_range: a.init_range, ..Default::default() };
    let trace = run_vqe(&h, &cfg, &device, a.mode.into(), a.shots, &spsa)?;

    let dir = out_dir(common, "vqe-out")?;
    write(&dir.join("trace.csv"), &trace.to_csv())?;
    let result = json!({
        "family": family.to_string(),
        "best_energy": trace.best_energy,
        "exact_ground": trace.exact_ground,
        "gap": trace.exact_ground.map(|g| trace.best_energy - g),
        "evaluations": trace.evaluations,
        "aborted": trace.aborted,
        "best_theta": trace.best_theta,
    });
    write(&dir.join("result.json"), &(serde_json::to_string_pretty(&result)? + "\n"))?;
    write_manifest(&dir.join("manifest.json"), common, &Command::Vqe(a.clone()))?;
    match trace.exact_ground {
        Some(g) => println!("best energy {:.6} (exact {g:.6})", trace.best_energy),
        None => println!("best energy {:.6}", trace.best_energy),
    }
    if let Some(why) = &trace.aborted {
        return Err(NumericalFailure(format!("VQE stopped early: {why}")).into());
    }
    Ok(())
}

// replay

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}
