//! Randomized benchmarking: IRB/SRB sequence construction, decay fitting and
//! crosstalk characterization against the simulator.

use std::collections::BTreeSet;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::clifford::{CliffordElement, CliffordGate, Tableau};
use crate::device::{CrosstalkTable, DeviceModel, Edge};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::simulator::{run_noisy, NoiseMode, NoiseSpec};

/// Uniformly random element of the n-qubit Clifford group, n ∈ {1, 2}.
pub fn random_clifford(n: usize, rng: &mut impl rand::Rng) -> Result<CliffordElement> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument(format!("Clifford sampling supports 1 or 2 qubits, got {n}")));
    }
    Ok(CliffordElement::random(n, rng))
}

/// `EPC = (1 - α)(1 - 1/2ⁿ)`
pub fn epc_from_alpha(alpha: f64, n: usize) -> f64 {
    (1.0 - alpha) * (1.0 - 1.0 / (1u64 << n) as f64)
}

/// Error of the interleaved gate from reference and interleaved decays.
pub fn irb_gate_epc(alpha_ref: f64, alpha_int: f64, n: usize) -> f64 {
    epc_from_alpha(alpha_int / alpha_ref, n)
}

#[derive(Clone, Debug)]
pub struct RbCircuit {
    pub m: usize,
    pub seq: usize,
    pub circuit: Circuit,
}

/// Sequences for one or two edges run side by side. Edge `i` occupies local
/// qubits `2i, 2i+1`; the circuit layout maps them onto the device.
#[derive(Clone, Debug)]
pub struct RbSequenceSet {
    pub edges: Vec<Edge>,
    pub lengths: Vec<usize>,
    pub k: usize,
    pub interleaved: bool,
    pub circuits: Vec<RbCircuit>,
}

impl RbSequenceSet {
    /// Edge carrying the interleaved cx, for single-edge sets.
    pub fn interleaved_gate(&self) -> Option<Edge> {
        (self.interleaved && self.edges.len() == 1).then(|| self.edges[0])
    }

    fn local_qubits(i: usize) -> [usize; 2] {
        [2 * i, 2 * i + 1]
    }
}

fn sequence_rng(seed: u64, edge: Edge, m: usize, seq: usize) -> rand_chacha::ChaCha8Rng {
    let s = derive_seed(derive_seed(derive_seed(seed, (edge.lo() * 1024 + edge.hi()) as u64), m as u64), seq as u64);
    stream_rng(s, 0)
}

fn check_lengths(lengths: &[usize], k: usize) -> Result<()> {
    if lengths.is_empty() {
        return Err(Error::InvalidArgument("RB needs at least one sequence length".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("RB needs at least one sequence per length".into()));
    }
    Ok(())
}

fn build_set(edges: &[Edge], lengths: &[usize], k: usize, interleave: bool, seed: u64) -> Result<RbSequenceSet> {
    check_lengths(lengths, k)?;
    let cx = Tableau::gate(2, CliffordGate::Cx(0, 1));
    let width = 2 * edges.len();
    let layout: Vec<usize> = edges.iter().flat_map(|e| e.qubits()).collect();
    let simultaneous = edges.len() > 1;
    let mut circuits = Vec::with_capacity(lengths.len() * k);
    for &m in lengths {
        for seq in 0..k {
            let mut rngs: Vec<_> = edges.iter().map(|&e| sequence_rng(seed, e, m, seq)).collect();
            let mut totals = vec![Tableau::identity(2); edges.len()];
            let mut c = Circuit::new(width);
            for _ in 0..m {
                for (i, rng) in rngs.iter_mut().enumerate() {
                    let cl = CliffordElement::random(2, rng);
                    cl.append_to(&mut c, &RbSequenceSet::local_qubits(i))?;
                    totals[i] = totals[i].then(cl.tableau());
                }
                if simultaneous {
                    c.push_full_barrier()?;
                }
                if interleave {
                    for (i, total) in totals.iter_mut().enumerate() {
                        let [a, b] = RbSequenceSet::local_qubits(i);
                        c.push_cx(a, b)?;
                        *total = total.then(&cx);
                    }
                    if simultaneous {
                        c.push_full_barrier()?;
                    }
                }
            }
            for (i, total) in totals.iter().enumerate() {
                CliffordElement::from_tableau(total.inverse()).append_to(&mut c, &RbSequenceSet::local_qubits(i))?;
            }
            circuits.push(RbCircuit { m, seq, circuit: c.with_layout(layout.clone())? });
        }
    }
    Ok(RbSequenceSet { edges: edges.to_vec(), lengths: lengths.to_vec(), k, interleaved: interleave, circuits })
}

/// Two-qubit (interleaved) RB sequences on `edge`: for each length `m`, `k`
/// circuits of `m` random Cliffords, each followed by cx on the edge when
/// `interleave`, closed by the inverting Clifford. Sequences depend only on
/// `(seed, edge, m, sequence index)`.
pub fn build_irb(edge: Edge, lengths: &[usize], k: usize, interleave: bool, seed: u64) -> Result<RbSequenceSet> {
    build_set(&[edge], lengths, k, interleave, seed)
}

/// Simultaneous sequences on two disjoint edges. Each Clifford step and each
/// interleaved cx pair is fenced by a full barrier so the two edges' gates
/// share layers.
pub fn build_srb(e1: Edge, e2: Edge, lengths: &[usize], k: usize, interleave: bool, seed: u64) -> Result<RbSequenceSet> {
    if !e1.is_disjoint(e2) {
        return Err(Error::InvalidArgument(format!("simultaneous RB needs disjoint edges, got {e1} and {e2}")));
    }
    build_set(&[e1, e2], lengths, k, interleave, seed)
}

/// Mean all-zero survival per length, one list per edge of the set.
pub fn run_sequences(set: &RbSequenceSet, spec: &NoiseSpec, shots: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let per_circuit: Vec<Vec<f64>> = set
        .circuits
        .par_iter()
        .enumerate()
        .map(|(idx, rc)| {
            let r = run_noisy(&rc.circuit, &[], &spec.with_seed(derive_seed(spec.seed, idx as u64)), shots)?;
            Ok((0..set.edges.len()).map(|i| r.zero_frequency(&RbSequenceSet::local_qubits(i))).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..set.edges.len())
        .map(|i| {
            set.lengths
                .iter()
                .map(|&m| {
                    let vals: Vec<f64> = set
                        .circuits
                        .iter()
                        .zip(&per_circuit)
                        .filter(|(rc, _)| rc.m == m)
                        .map(|(_, v)| v[i])
                        .collect();
                    (m, vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect()
        })
        .collect())
}

/// Fitted `A₀ αᵐ + B₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub num_qubits: usize,
    pub points: Vec<(usize, f64)>,
    pub a0: f64,
    pub alpha: f64,
    pub b0: f64,
    pub epc: f64,
    pub rms: f64,
    /// B₀ held at 1/2ⁿ because the free fit could not resolve it.
    pub b0_pinned: bool,
}

impl DecayCurve {
    pub fn model(&self, m: usize) -> f64 {
        self.a0 * self.alpha.powi(m as i32) + self.b0
    }
}

/// Above this standard error the asymptote is pinned to 1/2ⁿ.
pub const B0_SE_LIMIT: f64 = 0.02;

const ALPHA_MIN: f64 = 1e-6;

struct Fit {
    params: Vec<f64>,
    ssr: f64,
    jtj: DMatrix<f64>,
}

/// A survival point `(m, y)` of curve `curve`.
type Point = (f64, f64, usize);

/// Value and parameter gradient of a decay model at one point.
type Model<'a> = &'a dyn Fn(&[f64], &Point) -> (f64, Vec<f64>);

fn clamp_params(p: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn lm(points: &[Point], init: Vec<f64>, bounds: &[(f64, f64)], model: Model) -> Result<Fit> {
    let np = init.len();
    let eval = |p: &[f64]| {
        let mut j = DMatrix::zeros(points.len(), np);
        let mut r = DVector::zeros(points.len());
        for (i, pt) in points.iter().enumerate() {
            let (f, g) = model(p, pt);
            r[i] = f - pt.1;
            for (c, v) in g.into_iter().enumerate() {
                j[(i, c)] = v;
            }
        }
        (j, r)
    };
    let mut p = init;
    clamp_params(&mut p, bounds);
    let (mut j, mut r) = eval(&p);
    let mut ssr = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut damped = jtj.clone();
        for d in 0..np {
            damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&(-g)) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        clamp_params(&mut trial, bounds);
        let (tj, tr) = eval(&trial);
        let tssr = tr.norm_squared();
        if tssr <= ssr {
            let moved = p.iter().zip(&trial).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let gain = ssr - tssr;
            p = trial;
            j = tj;
            r = tr;
            ssr = tssr;
            lambda = (lambda / 10.0).max(1e-12);
            if moved < 1e-13 || gain <= 1e-16 * ssr.max(1e-300) || ssr < 1e-28 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // no descent direction left within bounds
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::FitQuality("decay fit did not converge".into()));
    }
    let jtj = j.transpose() * &j;
    Ok(Fit { params: p, ssr, jtj })
}

/// `a αᵐ + b` and its gradient in `(a, α[, b])`.
fn decay_term(a: f64, alpha: f64, m: f64) -> (f64, f64, f64) {
    let am = alpha.powf(m);
    let d_alpha = if m == 0.0 { 0.0 } else { a * m * alpha.powf(m - 1.0) };
    (a * am, am, d_alpha)
}

/// Standard error of parameter `idx` from the Gauss-Newton covariance.
fn param_se(fit: &Fit, n_points: usize, idx: usize) -> f64 {
    let dof = n_points.saturating_sub(fit.params.len());
    if dof == 0 {
        return f64::INFINITY;
    }
    let s2 = fit.ssr / dof as f64;
    fit.jtj.clone().try_inverse().map(|cov| (cov[(idx, idx)] * s2).max(0.0).sqrt()).unwrap_or(f64::INFINITY)
}

fn validate_points(points: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    let distinct: BTreeSet<usize> = points.iter().map(|p| p.0).collect();
    if distinct.len() < 3 {
        return Err(Error::InvalidArgument(format!("decay fit needs at least 3 distinct lengths, got {}", distinct.len())));
    }
    if let Some(bad) = points.iter().find(|p| !(0.0..=1.0).contains(&p.1)) {
        return Err(Error::InvalidArgument(format!("survival {} at m={} is outside [0,1]", bad.1, bad.0)));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(sorted)
}

/// Initial `(A₀, α)` for a curve with asymptote `b`.
fn initial_guess(pts: &[(usize, f64)], b: f64) -> (f64, f64) {
    let m_min = pts[0].0;
    let first: Vec<f64> = pts.iter().filter(|p| p.0 == m_min).map(|p| p.1).collect();
    let a = (first.iter().sum::<f64>() / first.len() as f64 - b).clamp(0.01, 1.0);
    let fp: Vec<(f64, f64)> = pts.iter().map(|&(m, y)| (m as f64, y)).collect();
    (a, log_linear_alpha(&fp, b).clamp(0.01, 0.9999))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 1.0 - 1e-12 || alpha <= ALPHA_MIN {
        return Err(Error::FitQuality(format!("alpha = {alpha} at its bound")));
    }
    Ok(())
}

fn curve(num_qubits: usize, points: Vec<(usize, f64)>, a0: f64, alpha: f64, b0: f64, pinned: bool) -> DecayCurve {
    let ssr: f64 = points.iter().map(|&(m, y)| (a0 * alpha.powi(m as i32) + b0 - y).powi(2)).sum();
    DecayCurve {
        num_qubits,
        rms: (ssr / points.len() as f64).sqrt(),
        points,
        a0,
        alpha,
        b0,
        epc: epc_from_alpha(alpha, num_qubits),
        b0_pinned: pinned,
    }
}

/// Least-squares fit of `A₀ αᵐ + B₀` to survival points for an n-qubit RB
/// experiment. Result is independent of point order.
pub fn fit_decay(points: &[(usize, f64)], num_qubits: usize) -> Result<DecayCurve> {
    let sorted = validate_points(points)?;
    let pts: Vec<Point> = sorted.iter().map(|&(m, y)| (m as f64, y, 0)).collect();
    let b_init = 1.0 / (1u64 << num_qubits) as f64;
    let (a_init, alpha_init) = initial_guess(&sorted, b_init);
    let bounds = [(0.0, 1.0), (ALPHA_MIN, 1.0), (0.0, 1.0)];

    let free_model = |p: &[f64], pt: &Point| {
        let (f, da, dal) = decay_term(p[0], p[1], pt.0);
        (f + p[2], vec![da, dal, 1.0])
    };
    let free = lm(&pts, vec![a_init, alpha_init, b_init], &bounds, &free_model)?;
    let b_se = param_se(&free, pts.len(), 2);
    let (a0, alpha, b0, pinned) = if b_se > B0_SE_LIMIT {
        debug!("B0 standard error {b_se:.3} too large, pinning at {b_init}");
        let pinned_model = |p: &[f64], pt: &Point| {
            let (f, da, dal) = decay_term(p[0], p[1], pt.0);
            (f + b_init, vec![da, dal])
        };
        let f = lm(&pts, vec![a_init, alpha_init], &bounds[..2], &pinned_model)?;
        (f.params[0], f.params[1], b_init, true)
    } else {
        (free.params[0], free.params[1], free.params[2], false)
    };
    check_alpha(alpha)?;
    Ok(curve(num_qubits, sorted, a0, alpha, b0, pinned))
}

/// Joint fit of a reference and an interleaved decay sharing `A₀` and `B₀`,
/// each with its own `α`. The same pinning rule as [`fit_decay`] applies to
/// the shared asymptote.
pub fn fit_irb(reference: &[(usize, f64)], interleaved: &[(usize, f64)], num_qubits: usize) -> Result<(DecayCurve, DecayCurve)> {
    let r_sorted = validate_points(reference)?;
    let i_sorted = validate_points(interleaved)?;
    let pts: Vec<Point> = r_sorted
        .iter()
        .map(|&(m, y)| (m as f64, y, 0))
        .chain(i_sorted.iter().map(|&(m, y)| (m as f64, y, 1)))
        .collect();
    let b_init = 1.0 / (1u64 << num_qubits) as f64;
    let (a_init, ar_init) = initial_guess(&r_sorted, b_init);
    let (_, ai_init) = initial_guess(&i_sorted, b_init);
    let bounds = [(0.0, 1.0), (ALPHA_MIN, 1.0), (ALPHA_MIN, 1.0), (0.0, 1.0)];

    let shared = |p: &[f64], pt: &Point, b: Option<f64>| {
        let which = 1 + pt.2;
        let (f, da, dal) = decay_term(p[0], p[which], pt.0);
        let mut g = vec![da, 0.0, 0.0];
        g[which] = dal;
        match b {
            Some(b) => (f + b, g),
            None => {
                g.push(1.0);
                (f + p[3], g)
            }
        }
    };
    let free_model = |p: &[f64], pt: &Point| shared(p, pt, None);
    let free = lm(&pts, vec![a_init, ar_init, ai_init, b_init], &bounds, &free_model)?;
    let b_se = param_se(&free, pts.len(), 3);
    let (p, b0, pinned) = if b_se > B0_SE_LIMIT {
        debug!("shared B0 standard error {b_se:.3} too large, pinning at {b_init}");
        let pinned_model = |p: &[f64], pt: &Point| shared(p, pt, Some(b_init));
        let f = lm(&pts, vec![a_init, ar_init, ai_init], &bounds[..3], &pinned_model)?;
        (f.params, b_init, true)
    } else {
        let b = free.params[3];
        (free.params, b, false)
    };
    check_alpha(p[1])?;
    check_alpha(p[2])?;
    Ok((
        curve(num_qubits, r_sorted, p[0], p[1], b0, pinned),
        curve(num_qubits, i_sorted, p[0], p[2], b0, pinned),
    ))
}

fn log_linear_alpha(pts: &[(f64, f64)], b: f64) -> f64 {
    let usable: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 - b > 1e-6).map(|&(m, y)| (m, (y - b).ln())).collect();
    let n = usable.len() as f64;
    if usable.len() < 2 {
        return 0.99;
    }
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.99;
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxy / sxx).exp()
}

#[derive(Clone, Debug)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub k: usize,
    pub shots: usize,
    pub seed: u64,
    /// Record failing fits and continue instead of aborting.
    pub allow_partial: bool,
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig { lengths: vec![1, 5, 10, 20, 40], k: 10, shots: 10_000, seed: 0, allow_partial: false }
    }
}

/// Reference and interleaved decays of one edge, alone or beside `paired`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IrbResult {
    pub edge: Edge,
    pub paired: Option<Edge>,
    pub reference: DecayCurve,
    pub interleaved: DecayCurve,
    pub gate_epc: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitFailure {
    pub edge: Edge,
    pub paired: Option<Edge>,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct CrosstalkReport {
    pub table: CrosstalkTable,
    pub results: Vec<IrbResult>,
    pub failures: Vec<FitFailure>,
}

impl CrosstalkReport {
    /// Measured `E(g1|g2)/E(g1)`.
    pub fn ratio(&self, g1: Edge, g2: Edge) -> Option<f64> {
        Some(self.table.conditional(g1, g2)? / self.table.independent(g1)?)
    }

    /// Largest measured ratio and its pair.
    pub fn worst_pair(&self) -> Option<((Edge, Edge), f64)> {
        self.table
            .entries()
            .filter_map(|(k, _)| Some((k, self.ratio(k.0, k.1)?)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Rows `edge,paired,sequence,m,mean_survival`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge,paired_edge,sequence,m,mean_survival\n");
        for r in &self.results {
            let paired = r.paired.map(|p| p.to_string()).unwrap_or_else(|| "none".into());
            for (label, curve) in [("reference", &r.reference), ("interleaved", &r.interleaved)] {
                for &(m, y) in &curve.points {
                    out.push_str(&format!("\"{}\",\"{}\",{label},{m},{y:.6}\n", r.edge, paired));
                }
            }
        }
        out
    }
}

fn irb_from_points(edge: Edge, paired: Option<Edge>, reference: &[(usize, f64)], interleaved: &[(usize, f64)]) -> Result<IrbResult> {
    let wrap = |e: Error| Error::PairFit { edge, paired, source: Box::new(e) };
    let (reference, interleaved) = fit_irb(reference, interleaved, 2).map_err(wrap)?;
    let gate_epc = irb_gate_epc(reference.alpha, interleaved.alpha, 2);
    Ok(IrbResult { edge, paired, reference, interleaved, gate_epc })
}

/// IRB of one edge alone.
pub fn irb_alone(edge: Edge, spec: &NoiseSpec, cfg: &RbConfig) -> Result<IrbResult> {
    let seed = derive_seed(cfg.seed, 1);
    let refs = build_irb(edge, &cfg.lengths, cfg.k, false, seed)?;
    let ints = build_irb(edge, &cfg.lengths, cfg.k, true, seed)?;
    let r = run_sequences(&refs, &spec.with_seed(derive_seed(spec.seed, 1)), cfg.shots)?;
    let i = run_sequences(&ints, &spec.with_seed(derive_seed(spec.seed, 2)), cfg.shots)?;
    irb_from_points(edge, None, &r[0], &i[0])
}

/// Simultaneous IRB on two edges; one result per direction.
pub fn irb_simultaneous(e1: Edge, e2: Edge, spec: &NoiseSpec, cfg: &RbConfig) -> Vec<Result<IrbResult>> {
    let seed = derive_seed(cfg.seed, 1);
    let run = || -> Result<(Vec<Vec<(usize, f64)>>, Vec<Vec<(usize, f64)>>)> {
        let refs = build_srb(e1, e2, &cfg.lengths, cfg.k, false, seed)?;
        let ints = build_srb(e1, e2, &cfg.lengths, cfg.k, true, seed)?;
        let pair_seed = derive_seed(spec.seed, (e1.lo() * 1024 + e1.hi()) as u64 * 4096 + (e2.lo() * 64 + e2.hi()) as u64);
        let r = run_sequences(&refs, &spec.with_seed(derive_seed(pair_seed, 1)), cfg.shots)?;
        let i = run_sequences(&ints, &spec.with_seed(derive_seed(pair_seed, 2)), cfg.shots)?;
        Ok((r, i))
    };
    match run() {
        Ok((r, i)) => vec![irb_from_points(e1, Some(e2), &r[0], &i[0]), irb_from_points(e2, Some(e1), &r[1], &i[1])],
        Err(e) => {
            let msg = e.to_string();
            vec![
                Err(Error::PairFit { edge: e1, paired: Some(e2), source: Box::new(Error::FitQuality(msg.clone())) }),
                Err(Error::PairFit { edge: e2, paired: Some(e1), source: Box::new(Error::FitQuality(msg)) }),
            ]
        }
    }
}

/// SRB crosstalk characterization: independent EPC of every involved edge by
/// IRB alone, conditional EPC of every one-hop pair (both directions) by
/// simultaneous IRB. `pairs` restricts the pairs measured; by default all
/// one-hop pairs of the coupling map are used.
pub fn characterize_crosstalk(
    device: &DeviceModel,
    mode: NoiseMode,
    cfg: &RbConfig,
    pairs: Option<&[(Edge, Edge)]>,
) -> Result<CrosstalkReport> {
    let spec = NoiseSpec::new(mode, device, cfg.seed);
    let unordered: BTreeSet<(Edge, Edge)> = match pairs {
        Some(ps) => ps.iter().map(|&(a, b)| if a < b { (a, b) } else { (b, a) }).collect(),
        None => device.coupling.one_hop_pairs().into_iter().filter(|(a, b)| a < b).collect(),
    };
    for &(a, b) in &unordered {
        if !device.coupling.is_one_hop(a, b) {
            return Err(Error::InvalidArgument(format!("{a} and {b} are not a one-hop pair")));
        }
    }
    let edges: Vec<Edge> = match pairs {
        Some(_) => unordered.iter().flat_map(|&(a, b)| [a, b]).collect::<BTreeSet<_>>().into_iter().collect(),
        None => device.coupling.edges().collect(),
    };
    info!("characterizing {} edges and {} one-hop pairs", edges.len(), unordered.len());

    let alone: Vec<Result<IrbResult>> = edges.par_iter().map(|&e| irb_alone(e, &spec, cfg)).collect();
    let pair_list: Vec<(Edge, Edge)> = unordered.into_iter().collect();
    let together: Vec<Vec<Result<IrbResult>>> =
        pair_list.par_iter().map(|&(a, b)| irb_simultaneous(a, b, &spec, cfg)).collect();

    let mut report = CrosstalkReport::default();
    let record = |res: Result<IrbResult>, report: &mut CrosstalkReport| -> Result<Option<IrbResult>> {
        match res {
            Ok(r) => {
                report.results.push(r.clone());
                Ok(Some(r))
            }
            Err(Error::PairFit { edge, paired, source }) if cfg.allow_partial => {
                report.failures.push(FitFailure { edge, paired, message: source.to_string() });
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    for res in alone {
        if let Some(r) = record(res, &mut report)? {
            report.table.set_independent(r.edge, r.gate_epc);
        }
    }
    for res in together.into_iter().flatten() {
        if let Some(r) = record(res, &mut report)? {
            if report.table.independent(r.edge).is_some() {
                report.table.insert(r.edge, r.paired.expect("simultaneous result"), r.gate_epc);
            }
        }
    }
    Ok(report)
}
