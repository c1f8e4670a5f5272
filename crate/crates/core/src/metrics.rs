//! Expressibility, gradient variance, entanglement entropy and circuit cost.

use std::f64::consts::{FRAC_PI_2, PI};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateKind};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::simulator::{run_ideal, run_noisy, NoiseSpec, StateVector};
use crate::vqa::{ground_cost, ground_cost_exact};

/// Largest register for statevector-based metrics.
pub const MAX_METRIC_QUBITS: usize = 12;

pub const DEFAULT_BINS: usize = 75;
pub const DEFAULT_PAIRS: usize = 5000;

const SMOOTHING: f64 = 1e-9;

fn check_width(c: &Circuit) -> Result<()> {
    if c.num_qubits() > MAX_METRIC_QUBITS {
        return Err(Error::TooManyQubits(c.num_qubits()));
    }
    Ok(())
}

fn uniform_theta(p: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..p).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprEstimate {
    pub kl: f64,
    pub samples: usize,
    pub bins: usize,
}

/// Haar probability of a fidelity in `[a, b]` for an N-qubit register.
pub fn haar_bin_mass(a: f64, b: f64, n_qubits: usize) -> f64 {
    let e = ((1u64 << n_qubits) - 1) as i32;
    (1.0 - a).powi(e) - (1.0 - b).powi(e)
}

/// KL divergence of a fidelity histogram against the Haar distribution.
pub fn kl_from_fidelities(fidelities: &[f64], bins: usize, n_qubits: usize) -> Result<f64> {
    if bins == 0 || fidelities.is_empty() {
        return Err(Error::InvalidArgument("expressibility needs samples and at least one bin".into()));
    }
    let mut counts = vec![0usize; bins];
    for &f in fidelities {
        let k = ((f.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = fidelities.len() as f64;
    let norm = 1.0 + bins as f64 * SMOOTHING;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let p = (c as f64 / total + SMOOTHING) / norm;
            let q = haar_bin_mass(k as f64 / bins as f64, (k + 1) as f64 / bins as f64, n_qubits).max(f64::MIN_POSITIVE);
            p * (p / q).ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// KL divergence between the ansatz's fidelity distribution over uniform
/// parameter pairs and the Haar fidelity distribution.
pub fn expressibility(c: &Circuit, n_pairs: usize, bins: usize, seed: u64) -> Result<ExprEstimate> {
    check_width(c)?;
    if n_pairs < 10 * bins {
        warn!("{n_pairs} fidelity pairs for {bins} bins is statistically thin");
    }
    let p = c.num_params();
    let fids: Vec<f64> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(derive_seed(seed, i as u64), 0);
            let a = run_ideal(c, &uniform_theta(p, &mut rng))?;
            let b = run_ideal(c, &uniform_theta(p, &mut rng))?;
            Ok(a.fidelity(&b))
        })
        .collect::<Result<_>>()?;
    Ok(ExprEstimate { kl: kl_from_fidelities(&fids, bins, c.num_qubits())?, samples: n_pairs, bins })
}

/// Cost function on measured or exact outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Global,
    /// Ground cost restricted to the first `n_c` qubits.
    Local(usize),
}

impl CostKind {
    fn n_c(self, n: usize) -> usize {
        match self {
            CostKind::Global => n,
            CostKind::Local(k) => k,
        }
    }
}

/// Cost of `c(θ)`: exact when `shots` is `None`, else sampled under `spec`.
pub fn cost(c: &Circuit, theta: &[f64], kind: CostKind, spec: &NoiseSpec, shots: Option<usize>) -> Result<f64> {
    let n_c = kind.n_c(c.num_qubits());
    match shots {
        None => ground_cost_exact(&run_ideal(c, theta)?, n_c),
        Some(s) => ground_cost(&run_noisy(c, theta, spec, s)?, n_c),
    }
}

/// Parameter-shift derivative `(C(θ + π/2 e_i) - C(θ - π/2 e_i)) / 2`; both
/// shifted evaluations share the seed of `spec`.
pub fn parameter_shift(c: &Circuit, theta: &[f64], i: usize, kind: CostKind, spec: &NoiseSpec, shots: Option<usize>) -> Result<f64> {
    if i >= theta.len() {
        return Err(Error::InvalidArgument(format!("parameter {i} out of range for {} parameters", theta.len())));
    }
    let mut t = theta.to_vec();
    t[i] = theta[i] + FRAC_PI_2;
    let plus = cost(c, &t, kind, spec, shots)?;
    t[i] = theta[i] - FRAC_PI_2;
    let minus = cost(c, &t, kind, spec, shots)?;
    Ok(0.5 * (plus - minus))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradVarEstimate {
    pub param_index: usize,
    pub variance: f64,
    pub n_samples: usize,
    pub cost_kind: CostKind,
    pub gradients: Vec<f64>,
}

/// Sample variance of `∂_i C` over uniform parameter draws.
pub fn grad_variance(
    c: &Circuit,
    kind: CostKind,
    i: usize,
    n_samples: usize,
    spec: &NoiseSpec,
    shots: Option<usize>,
    seed: u64,
) -> Result<GradVarEstimate> {
    check_width(c)?;
    if i >= c.num_params() {
        return Err(Error::InvalidArgument(format!("parameter {i} out of range for {} parameters", c.num_params())));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("gradient variance needs at least two samples".into()));
    }
    let p = c.num_params();
    let gradients: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let theta = uniform_theta(p, &mut stream_rng(derive_seed(seed, k as u64), 0));
            parameter_shift(c, &theta, i, kind, &spec.with_seed(derive_seed(spec.seed, k as u64)), shots)
        })
        .collect::<Result<_>>()?;
    Ok(GradVarEstimate { param_index: i, variance: sample_variance(&gradients), n_samples, cost_kind: kind, gradients })
}

pub fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Percentile bootstrap interval for the sample variance.
pub fn bootstrap_variance_ci(x: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let draw: Vec<f64> = (0..x.len()).map(|_| x[rng.gen_range(0..x.len())]).collect();
            sample_variance(&draw)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let idx = |q: f64| ((q * (resamples - 1) as f64).round() as usize).min(resamples - 1);
    (stats[idx(tail)], stats[idx(1.0 - tail)])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub mean_s: f64,
    pub std_s: f64,
    pub partition: Vec<usize>,
}

/// Reduced density matrix of `partition` (qubit order as given).
pub fn reduced_density_matrix(psi: &StateVector, partition: &[usize]) -> Result<DMatrix<Complex64>> {
    let n = psi.num_qubits();
    let mut sorted = partition.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() != partition.len() || sorted.len() >= n || *sorted.last().unwrap() >= n {
        return Err(Error::InvalidArgument(format!("partition {partition:?} is not a nonempty proper subset of {n} qubits")));
    }
    let rest: Vec<usize> = (0..n).filter(|q| !partition.contains(q)).collect();
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let (da, db) = (1usize << partition.len(), 1usize << rest.len());
    let mut m = DMatrix::from_element(da, db, Complex64::new(0.0, 0.0));
    for (idx, amp) in psi.amplitudes().iter().enumerate() {
        let a = partition.iter().fold(0, |acc, &q| (acc << 1) | bit(idx, q));
        let b = rest.iter().fold(0, |acc, &q| (acc << 1) | bit(idx, q));
        m[(a, b)] = *amp;
    }
    Ok(&m * m.adjoint())
}

/// Von Neumann entropy in bits of the reduced state on `partition`.
pub fn state_entropy(psi: &StateVector, partition: &[usize]) -> Result<f64> {
    let rho = reduced_density_matrix(psi, partition)?;
    Ok(rho.symmetric_eigenvalues().iter().filter(|&&l| l > 1e-12).map(|&l| -l * l.log2()).sum::<f64>().max(0.0))
}

/// Window of `max(1, ⌊(n-1)/2⌋)` consecutive qubits with the most cost
/// qubits; ties go to the lowest start.
pub fn default_partition(n: usize, cost_qubits: &[usize]) -> Vec<usize> {
    let size = ((n.saturating_sub(1)) / 2).max(1);
    let mut best = (0usize, 0usize);
    for start in 0..=n.saturating_sub(size) {
        let overlap = cost_qubits.iter().filter(|&&q| q >= start && q < start + size).count();
        if overlap > best.1 {
            best = (start, overlap);
        }
    }
    (best.0..best.0 + size).collect()
}

/// Mean and standard deviation of the partition entropy over uniform draws.
pub fn entanglement_entropy(c: &Circuit, partition: &[usize], n_samples: usize, seed: u64) -> Result<EntropyEstimate> {
    check_width(c)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("entropy needs at least one sample".into()));
    }
    let p = c.num_params();
    let s: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let theta = uniform_theta(p, &mut stream_rng(derive_seed(seed, k as u64), 0));
            state_entropy(&run_ideal(c, &theta)?, partition)
        })
        .collect::<Result<_>>()?;
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let std = if s.len() > 1 { sample_variance(&s).sqrt() } else { 0.0 };
    Ok(EntropyEstimate { mean_s: mean, std_s: std, partition: partition.to_vec() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub total_gates: usize,
    pub two_qubit_gates: usize,
    pub duration_ns: f64,
    pub depth: usize,
    /// Longest chain of cx gates, barriers synchronising their qubits.
    pub cx_depth: usize,
}

/// Gate counts (barriers excluded), ASAP critical-path duration under device
/// durations with barrier synchronisation, and depths.
pub fn circuit_stats(c: &Circuit, device: &DeviceModel) -> Result<CircuitStats> {
    let n = c.num_qubits();
    let mut ready = vec![0.0f64; n];
    let mut cx_level = vec![0usize; n];
    for g in c.ops() {
        match g.kind {
            GateKind::Barrier => {
                let t = g.qubits.iter().map(|&q| ready[q]).fold(0.0, f64::max);
                let l = g.qubits.iter().map(|&q| cx_level[q]).max().unwrap_or(0);
                for &q in &g.qubits {
                    ready[q] = t;
                    cx_level[q] = l;
                }
            }
            kind => {
                let phys: Vec<usize> = g.qubits.iter().map(|&q| c.physical(q)).collect();
                let d = device.gate_duration(kind.name(), &phys)?;
                let start = g.qubits.iter().map(|&q| ready[q]).fold(0.0, f64::max);
                let level = g.qubits.iter().map(|&q| cx_level[q]).max().unwrap_or(0) + usize::from(kind == GateKind::Cx);
                for &q in &g.qubits {
                    ready[q] = start + d;
                    cx_level[q] = level;
                }
            }
        }
    }
    let total_gates = c.ops().iter().filter(|g| g.kind != GateKind::Barrier).count();
    Ok(CircuitStats {
        total_gates,
        two_qubit_gates: c.count(GateKind::Cx),
        duration_ns: ready.iter().copied().fold(0.0, f64::max),
        depth: c.dag_layers().depth(),
        cx_depth: cx_level.into_iter().max().unwrap_or(0),
    })
}

/// `duration(a) / duration(b)`.
pub fn speedup(a: &CircuitStats, b: &CircuitStats) -> f64 {
    a.duration_ns / b.duration_ns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_base1, build_base2};
    use crate::device::CouplingMap;

    fn haar_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps: Vec<Complex64> = (0..1 << n).map(|_| Complex64::new(normal(rng), normal(rng))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    // Box-Muller standard normal
    fn normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    #[test]
    fn haar_masses_sum_to_one() {
        for n in 1..5 {
            let total: f64 = (0..75).map(|k| haar_bin_mass(k as f64 / 75.0, (k + 1) as f64 / 75.0, n)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parameterless_circuit_kl() {
        let mut c = Circuit::new(2);
        c.push_cx(0, 1).unwrap();
        let e = expressibility(&c, 200, 75, 1).unwrap();
        let expected = (1.0 / haar_bin_mass(74.0 / 75.0, 1.0, 2)).ln();
        // smoothing mass in the 74 empty bins shifts the value by about 1e-6
        assert!((e.kl - expected).abs() < 1e-5, "{} vs {expected}", e.kl);
    }

    #[test]
    fn haar_against_haar() {
        let mut rng = stream_rng(8, 0);
        let fids: Vec<f64> = (0..5000).map(|_| haar_state(1, &mut rng).fidelity(&haar_state(1, &mut rng))).collect();
        let kl = kl_from_fidelities(&fids, 75, 1).unwrap();
        assert!((0.0..=0.05).contains(&kl), "{kl}");
    }

    #[test]
    fn single_rotation_gradient_variance() {
        // C = 1 - cos²(θ/2), ∂C = sin(θ)/2, Var over uniform θ = 1/8
        let mut c = Circuit::new(1);
        c.push_param_rotation(GateKind::Ry, 0).unwrap();
        let g = grad_variance(&c, CostKind::Global, 0, 20_000, &NoiseSpec::ideal(0), None, 3).unwrap();
        assert!((g.variance - 0.125).abs() < 0.004, "{}", g.variance);
    }

    #[test]
    fn untouched_cost_qubit_has_no_gradient() {
        let mut c = Circuit::new(2);
        c.push_param_rotation(GateKind::Ry, 1).unwrap();
        let g = grad_variance(&c, CostKind::Local(1), 0, 50, &NoiseSpec::ideal(0), None, 3).unwrap();
        assert!(g.variance < 1e-20);
    }

    #[test]
    fn parameter_shift_matches_finite_difference() {
        let d = DeviceModel::default_device();
        for n in 2..=4 {
            let c = build_base1(n, 2, &d).unwrap();
            let mut rng = stream_rng(n as u64, 0);
            let theta = uniform_theta(c.num_params(), &mut rng);
            for i in [0, c.num_params() / 2, c.num_params() - 1] {
                let spec = NoiseSpec::ideal(0);
                let ps = parameter_shift(&c, &theta, i, CostKind::Global, &spec, None).unwrap();
                let h = 1e-4;
                let mut t = theta.clone();
                t[i] += h;
                let up = cost(&c, &t, CostKind::Global, &spec, None).unwrap();
                t[i] -= 2.0 * h;
                let down = cost(&c, &t, CostKind::Global, &spec, None).unwrap();
                assert!((ps - (up - down) / (2.0 * h)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn entropy_identities() {
        let mut prod = Circuit::new(3);
        for q in 0..3 {
            prod.push_param_rotation(GateKind::Ry, q).unwrap();
        }
        let e = entanglement_entropy(&prod, &[0], 20, 1).unwrap();
        assert!(e.mean_s.abs() < 1e-9);

        let mut bell = Circuit::new(2);
        bell.push_rotation(GateKind::Ry, 0, FRAC_PI_2).unwrap();
        bell.push_cx(0, 1).unwrap();
        let psi = run_ideal(&bell, &[]).unwrap();
        assert!((state_entropy(&psi, &[0]).unwrap() - 1.0).abs() < 1e-9);

        let c = build_base1(5, 3, &DeviceModel::default_device()).unwrap();
        let theta = uniform_theta(c.num_params(), &mut stream_rng(2, 0));
        let psi = run_ideal(&c, &theta).unwrap();
        let a = state_entropy(&psi, &[0, 1]).unwrap();
        let b = state_entropy(&psi, &[2, 3, 4]).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(a > 0.0 && a <= 2.0);
    }

    #[test]
    fn partition_rules() {
        assert_eq!(default_partition(9, &[0, 1]), vec![0, 1, 2, 3]);
        assert_eq!(default_partition(9, &[6, 7]), vec![4, 5, 6, 7]);
        assert_eq!(default_partition(2, &[1]), vec![1]);
        assert!(reduced_density_matrix(&StateVector::zero(2).unwrap(), &[0, 1]).is_err());
    }

    #[test]
    fn stats_base1_vs_base2() {
        let d = DeviceModel::default_device();
        let b1 = circuit_stats(&build_base1(4, 3, &d).unwrap(), &d).unwrap();
        let b2 = circuit_stats(&build_base2(4, 3, &d).unwrap(), &d).unwrap();
        assert!(b2.duration_ns < b1.duration_ns);
        assert_eq!(b1.two_qubit_gates, 9);
        assert_eq!(b1.total_gates, 9 + 2 * 4 * 4);
        assert_eq!(b1.cx_depth, 9);
        assert_eq!(b2.cx_depth, 6);
        assert_eq!(speedup(&b1, &b1), 1.0);
        // one layer: rotations, 3 sequential cx, rotations
        let one = circuit_stats(&build_base1(4, 1, &d).unwrap(), &d).unwrap();
        assert!((one.duration_ns - (4.0 * 35.5 + 900.0)).abs() < 1e-9);
    }

    #[test]
    fn uncalibrated_gate_is_an_error() {
        let d = DeviceModel::uniform(CouplingMap::line(2), 100.0, 300.0, 0.01);
        let mut c = Circuit::new(3);
        c.push_rotation(GateKind::Rx, 2, 0.1).unwrap();
        assert!(circuit_stats(&c, &d).is_err());
    }
}
