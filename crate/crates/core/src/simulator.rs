//! Statevector simulation with ideal, standard-noise and crosstalk-enabled execution.
//!
//! Qubit 0 is the most significant bit of the basis index, so measured
//! bitstrings read qubit 0 first (leftmost).
//!
//! Noise is a two-qubit depolarizing channel after every cx, realised as a
//! uniformly random two-qubit Pauli (identity included) injected with
//! probability `p = EPC * 4/3`. In crosstalk-enabled mode a gate's EPC is
//! scaled by its multipliers against every other cx in the same DAG layer.

use std::collections::BTreeMap;

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::device::{DeviceModel, Edge};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const MAX_QUBITS: usize = 16;

/// EPC ceiling: a fully depolarizing two-qubit channel.
pub const MAX_EPC: f64 = 0.75;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        Ok(StateVector { num_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return Err(Error::InvalidArgument("amplitude count must be a power of two".into()));
        }
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        Ok(StateVector { num_qubits: n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.num_qubits - 1 - q)
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let mask = self.mask(q);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub fn rx(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let mis = Complex64::new(0.0, -s);
        self.apply_1q(q, [[c.into(), mis], [mis, c.into()]]);
    }

    pub fn ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        self.apply_1q(q, [[c.into(), (-s).into()], [s.into(), c.into()]]);
    }

    pub fn rz(&mut self, q: usize, theta: f64) {
        let mask = self.mask(q);
        let lo = Complex64::from_polar(1.0, -theta / 2.0);
        let hi = Complex64::from_polar(1.0, theta / 2.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & mask == 0 { lo } else { hi };
        }
    }

    pub fn cx(&mut self, control: usize, target: usize) {
        let cm = self.mask(control);
        let tm = self.mask(target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    /// Applies Pauli `code` (0=I, 1=X, 2=Y, 3=Z) on qubit `q`.
    pub fn pauli(&mut self, q: usize, code: u8) {
        let mask = self.mask(q);
        match code {
            0 => {}
            1 => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            2 => {
                let i_ = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let j = i | mask;
                        let (a, b) = (self.amps[i], self.amps[j]);
                        self.amps[i] = -i_ * b;
                        self.amps[j] = i_ * a;
                    }
                }
            }
            3 => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
            _ => panic!("pauli code {code} out of range"),
        }
    }

    /// Applies a bound gate. Panics on a symbolic parameter.
    pub fn apply(&mut self, g: &Gate) {
        match g.kind {
            GateKind::Rx => self.rx(g.qubits[0], bound_angle(g)),
            GateKind::Ry => self.ry(g.qubits[0], bound_angle(g)),
            GateKind::Rz => self.rz(g.qubits[0], bound_angle(g)),
            GateKind::Cx => self.cx(g.qubits[0], g.qubits[1]),
            GateKind::Barrier => {}
        }
    }

    /// Probability that every listed qubit reads 0.
    pub fn prob_all_zero(&self, qubits: &[usize]) -> f64 {
        let mask: usize = qubits.iter().map(|&q| self.mask(q)).sum();
        self.amps.iter().enumerate().filter(|(i, _)| i & mask == 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// ⟨ψ|P|ψ⟩ for a Pauli string over {I,X,Y,Z}, qubit 0 first.
    pub fn pauli_expectation(&self, pauli: &str) -> f64 {
        let mut phi = self.clone();
        for (q, ch) in pauli.chars().enumerate() {
            phi.pauli(q, pauli_code(ch));
        }
        self.inner(&phi).re
    }
}

fn bound_angle(g: &Gate) -> f64 {
    g.angle().expect("gate must be bound before simulation")
}

pub(crate) fn pauli_code(ch: char) -> u8 {
    match ch {
        'I' => 0,
        'X' => 1,
        'Y' => 2,
        'Z' => 3,
        _ => panic!("invalid pauli letter '{ch}'"),
    }
}

fn check_width(c: &Circuit) -> Result<()> {
    if c.num_qubits() > MAX_QUBITS {
        Err(Error::TooManyQubits(c.num_qubits()))
    } else {
        Ok(())
    }
}

/// Exact final state of `c` bound with `theta`, starting from |0…0⟩.
pub fn run_ideal(c: &Circuit, theta: &[f64]) -> Result<StateVector> {
    check_width(c)?;
    let bound = c.bind(theta)?;
    let mut psi = StateVector::zero(c.num_qubits())?;
    for g in bound.ops() {
        psi.apply(g);
    }
    Ok(psi)
}

/// Columns of the circuit unitary (images of the computational basis states).
pub fn unitary_columns(c: &Circuit) -> Result<Vec<StateVector>> {
    check_width(c)?;
    (0..1usize << c.num_qubits())
        .map(|k| {
            let mut psi = StateVector::basis(c.num_qubits(), k)?;
            for g in c.ops() {
                psi.apply(g);
            }
            Ok(psi)
        })
        .collect()
}

/// Whether two unitaries (given as columns) agree up to a global phase.
pub fn unitaries_equal_up_to_phase(u: &[StateVector], v: &[StateVector], tol: f64) -> bool {
    if u.len() != v.len() {
        return false;
    }
    // fix the phase from the largest entry of the first column
    let (k, _) = u[0]
        .amplitudes()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .unwrap();
    let (a, b) = (u[0].amplitudes()[k], v[0].amplitudes()[k]);
    if b.norm() < 1e-12 {
        return false;
    }
    let phase = a / b;
    u.iter().zip(v).all(|(cu, cv)| {
        cu.amplitudes().iter().zip(cv.amplitudes()).all(|(x, y)| (x - phase * y).norm() <= tol)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Ideal,
    Standard,
    XtalkEnabled,
}

#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec<'a> {
    pub mode: NoiseMode,
    pub device: Option<&'a DeviceModel>,
    pub seed: u64,
}

impl<'a> NoiseSpec<'a> {
    pub fn ideal(seed: u64) -> Self {
        NoiseSpec { mode: NoiseMode::Ideal, device: None, seed }
    }

    pub fn standard(device: &'a DeviceModel, seed: u64) -> Self {
        NoiseSpec { mode: NoiseMode::Standard, device: Some(device), seed }
    }

    pub fn xtalk(device: &'a DeviceModel, seed: u64) -> Self {
        NoiseSpec { mode: NoiseMode::XtalkEnabled, device: Some(device), seed }
    }

    pub fn new(mode: NoiseMode, device: &'a DeviceModel, seed: u64) -> Self {
        NoiseSpec { mode, device: (mode != NoiseMode::Ideal).then_some(device), seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        NoiseSpec { seed, ..self }
    }

    fn device(&self) -> Result<&'a DeviceModel> {
        self.device.ok_or_else(|| Error::InvalidArgument(format!("{:?} simulation needs a device", self.mode)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub counts: BTreeMap<String, usize>,
    pub shots: usize,
}

impl ShotResult {
    /// Relative frequency of outcomes whose bits at `qubits` are all zero.
    pub fn zero_frequency(&self, qubits: &[usize]) -> f64 {
        let hits: usize = self
            .counts
            .iter()
            .filter(|(bits, _)| qubits.iter().all(|&q| bits.as_bytes()[q] == b'0'))
            .map(|(_, n)| n)
            .sum();
        hits as f64 / self.shots as f64
    }
}

/// Per-gate EPC for cx gates running in one layer: each gate's independent
/// EPC times its multipliers against every other gate in the layer, capped at
/// [`MAX_EPC`]. Output is aligned with `layer`.
pub fn effective_layer_epc(layer: &[Edge], device: &DeviceModel) -> Result<Vec<f64>> {
    layer
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let base = device.cx_epc(g)?;
            let factor: f64 = layer
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &other)| device.multiplier(g, other))
                .product();
            let epc = base * factor;
            if epc > MAX_EPC {
                warn!("effective EPC {epc:.4} on {g} exceeds {MAX_EPC}; capping");
                Ok(MAX_EPC)
            } else {
                Ok(epc)
            }
        })
        .collect()
}

/// Device edge of a cx op, through the circuit layout.
pub(crate) fn physical_edge(c: &Circuit, g: &Gate) -> Edge {
    Edge::new(c.physical(g.qubits[0]), c.physical(g.qubits[1]))
}

/// Depolarizing probability attached to every op (zero for non-cx ops).
fn error_probabilities(c: &Circuit, spec: &NoiseSpec) -> Result<Vec<f64>> {
    let mut probs = vec![0.0; c.ops().len()];
    match spec.mode {
        NoiseMode::Ideal => {}
        NoiseMode::Standard => {
            let device = spec.device()?;
            for (i, g) in c.ops().iter().enumerate() {
                if g.kind == GateKind::Cx {
                    probs[i] = device.cx_epc(physical_edge(c, g))?.min(MAX_EPC) * 4.0 / 3.0;
                }
            }
        }
        NoiseMode::XtalkEnabled => {
            let device = spec.device()?;
            for layer in c.dag_layers().layers {
                let cxs: Vec<usize> = layer.into_iter().filter(|&i| c.ops()[i].kind == GateKind::Cx).collect();
                let edges: Vec<Edge> = cxs.iter().map(|&i| physical_edge(c, &c.ops()[i])).collect();
                for (&i, epc) in cxs.iter().zip(effective_layer_epc(&edges, device)?) {
                    probs[i] = epc * 4.0 / 3.0;
                }
            }
        }
    }
    Ok(probs)
}

/// Samples `shots` computational-basis measurements of the circuit under `spec`.
///
/// Error patterns are drawn per shot from the seed's pattern stream; shots
/// sharing a pattern are simulated once and measured from that pattern's own
/// stream, so results depend only on the seed.
pub fn run_noisy(c: &Circuit, theta: &[f64], spec: &NoiseSpec, shots: usize) -> Result<ShotResult> {
    check_width(c)?;
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let bound = c.bind(theta)?;
    let probs = error_probabilities(&bound, spec)?;

    let noisy: Vec<(u32, f64)> =
        probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (i as u32, p)).collect();
    let mut patterns: BTreeMap<Vec<(u32, u8)>, usize> = BTreeMap::new();
    let mut rng = stream_rng(spec.seed, 0);
    for _ in 0..shots {
        let mut pattern = Vec::new();
        for &(op, p) in &noisy {
            if rng.gen::<f64>() < p {
                let pauli = rng.gen_range(0..16u8);
                if pauli != 0 {
                    pattern.push((op, pauli));
                }
            }
        }
        *patterns.entry(pattern).or_insert(0) += 1;
    }

    let n = bound.num_qubits();
    let ops = bound.ops();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    // ideal prefix shared by all patterns; patterns arrive sorted by first error
    let mut cursor = StateVector::zero(n)?;
    let mut cursor_at = 0usize;
    for (k, (pattern, count)) in patterns.iter().enumerate() {
        let psi = match pattern.first() {
            None => {
                let mut psi = cursor.clone();
                for g in &ops[cursor_at..] {
                    psi.apply(g);
                }
                psi
            }
            Some(&(first, _)) => {
                let first = first as usize;
                while cursor_at <= first {
                    cursor.apply(&ops[cursor_at]);
                    cursor_at += 1;
                }
                let mut psi = cursor.clone();
                let mut errs = pattern.iter().peekable();
                for (i, g) in ops.iter().enumerate().skip(first) {
                    if i > first {
                        psi.apply(g);
                    }
                    while let Some(&&(op, pauli)) = errs.peek() {
                        if op as usize != i {
                            break;
                        }
                        psi.pauli(g.qubits[0], pauli >> 2);
                        psi.pauli(g.qubits[1], pauli & 3);
                        errs.next();
                    }
                }
                psi
            }
        };
        let mut mrng = stream_rng(spec.seed, 1 + k as u64);
        sample_into(&psi.probabilities(), *count, &mut mrng, &mut counts);
    }

    Ok(ShotResult {
        counts: counts.into_iter().map(|(idx, c)| (format!("{idx:0n$b}"), c)).collect(),
        shots,
    })
}

fn sample_into(probs: &[f64], draws: usize, rng: &mut impl Rng, counts: &mut BTreeMap<usize, usize>) {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    for _ in 0..draws {
        let u = rng.gen::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::CouplingMap;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn bell() -> Circuit {
        let mut c = Circuit::new(2);
        c.push_rotation(GateKind::Ry, 0, FRAC_PI_2).unwrap();
        c.push_cx(0, 1).unwrap();
        c
    }

    #[test]
    fn empty_circuit_is_ground_state() {
        let psi = run_ideal(&Circuit::new(3), &[]).unwrap();
        assert_eq!(psi.amplitudes()[0], ONE);
        assert!((psi.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rx_pi_flips_with_minus_i() {
        let mut c = Circuit::new(1);
        c.push_rotation(GateKind::Rx, 0, PI).unwrap();
        let psi = run_ideal(&c, &[]).unwrap();
        assert!(psi.amplitudes()[0].norm() < 1e-15);
        assert!((psi.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn bell_state_amplitudes() {
        let psi = run_ideal(&bell(), &[]).unwrap();
        let a = psi.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((a[3].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(a[1].norm() < 1e-12 && a[2].norm() < 1e-12);
    }

    #[test]
    fn qubit_zero_is_leftmost_bit() {
        let mut c = Circuit::new(3);
        c.push_rotation(GateKind::Rx, 0, PI).unwrap();
        let r = run_noisy(&c, &[], &NoiseSpec::ideal(1), 10).unwrap();
        assert_eq!(r.counts.get("100"), Some(&10));
    }

    #[test]
    fn too_many_qubits() {
        assert!(matches!(run_ideal(&Circuit::new(MAX_QUBITS + 1), &[]), Err(Error::TooManyQubits(17))));
    }

    #[test]
    fn norm_drift_bounded() {
        let mut c = Circuit::new(4);
        for k in 0..250 {
            c.push_rotation(GateKind::Rx, k % 4, 0.37 * k as f64).unwrap();
            c.push_rotation(GateKind::Ry, (k + 1) % 4, 1.1).unwrap();
            c.push_rotation(GateKind::Rz, (k + 2) % 4, -0.4).unwrap();
            c.push_cx(k % 4, (k + 3) % 4).unwrap();
        }
        let psi = run_ideal(&c, &[]).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ideal_bell_sampling() {
        let r = run_noisy(&bell(), &[], &NoiseSpec::ideal(7), 10_000).unwrap();
        assert_eq!(r.counts.values().sum::<usize>(), 10_000);
        assert!(r.counts.keys().all(|k| k == "00" || k == "11"));
        let p00 = r.counts["00"] as f64 / 1e4;
        assert!((p00 - 0.5).abs() < 0.02);
    }

    #[test]
    fn zero_epc_matches_ideal_sampling() {
        let d = DeviceModel::uniform(CouplingMap::line(2), 100.0, 300.0, 0.0);
        let ideal = run_noisy(&bell(), &[], &NoiseSpec::ideal(3), 5000).unwrap();
        let noisy = run_noisy(&bell(), &[], &NoiseSpec::standard(&d, 3), 5000).unwrap();
        assert_eq!(ideal, noisy);
    }

    #[test]
    fn single_cx_error_grows_with_epc() {
        let mut c = Circuit::new(2);
        c.push_cx(0, 1).unwrap();
        let mut last = -1.0;
        for e in [0.0, 0.05, 0.2] {
            let d = DeviceModel::uniform(CouplingMap::line(2), 100.0, 300.0, e);
            let r = run_noisy(&c, &[], &NoiseSpec::standard(&d, 11), 100_000).unwrap();
            let err = 1.0 - r.zero_frequency(&[0, 1]);
            // flip probability of the depolarizing channel equals the EPC
            assert!((err - e).abs() < 4.0 * (e * (1.0 - e) / 1e5).sqrt() + 1e-12, "e={e} err={err}");
            assert!(err > last);
            last = err;
        }
    }

    #[test]
    fn layer_epc_empty_product() {
        let d = DeviceModel::default_device();
        let out = effective_layer_epc(&[Edge::new(0, 1)], &d).unwrap();
        assert_eq!(out, vec![0.01]);
    }

    #[test]
    fn layer_epc_multiplies() {
        let d = DeviceModel::default_device();
        let layer = [Edge::new(0, 1), Edge::new(2, 3), Edge::new(4, 7)];
        let out = effective_layer_epc(&layer, &d).unwrap();
        assert!((out[0] - 0.01 * 1.217 * 1.006).abs() < 1e-15);
        assert!((out[0] - 0.01224302).abs() < 1e-8);
    }

    #[test]
    fn layer_epc_mutual_worst_case() {
        let mut d = DeviceModel::uniform(CouplingMap::line(4), 100.0, 300.0, 0.01);
        d.set_multiplier(Edge::new(0, 1), Edge::new(2, 3), 3.14);
        d.set_multiplier(Edge::new(2, 3), Edge::new(0, 1), 3.14);
        let out = effective_layer_epc(&[Edge::new(0, 1), Edge::new(2, 3)], &d).unwrap();
        assert!(out.iter().all(|&e| (e - 0.0314).abs() < 1e-12 && e > 3.0 * 0.01));
    }

    #[test]
    fn layer_epc_is_capped() {
        let mut d = DeviceModel::uniform(CouplingMap::line(4), 100.0, 300.0, 0.5);
        d.set_multiplier(Edge::new(0, 1), Edge::new(2, 3), 1.9);
        let out = effective_layer_epc(&[Edge::new(0, 1), Edge::new(2, 3)], &d).unwrap();
        assert_eq!(out[0], MAX_EPC);
        assert_eq!(out[1], 0.5);
    }

    #[test]
    fn all_ones_xtalk_equals_standard() {
        let d = DeviceModel::default_device().with_uniform_crosstalk(1.0);
        let mut c = Circuit::new(4);
        for q in 0..4 {
            c.push_rotation(GateKind::Ry, q, 0.3 + q as f64).unwrap();
        }
        c.push_cx(0, 1).unwrap();
        c.push_cx(2, 3).unwrap();
        c.push_cx(1, 2).unwrap();
        let a = run_noisy(&c, &[], &NoiseSpec::standard(&d, 5), 100_000).unwrap();
        let b = run_noisy(&c, &[], &NoiseSpec::xtalk(&d, 5), 100_000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crosstalk_raises_error_only_when_layered_together() {
        let d = DeviceModel::default_device().with_uniform_crosstalk(3.0);
        let mut parallel = Circuit::new(4);
        parallel.push_cx(0, 1).unwrap();
        parallel.push_cx(2, 3).unwrap();
        let mut fenced = Circuit::new(4);
        fenced.push_cx(0, 1).unwrap();
        fenced.push_full_barrier().unwrap();
        fenced.push_cx(2, 3).unwrap();
        let shots = 100_000;
        let err = |c: &Circuit| 1.0 - run_noisy(c, &[], &NoiseSpec::xtalk(&d, 9), shots).unwrap().zero_frequency(&[0, 1]);
        let (p, f) = (err(&parallel), err(&fenced));
        assert!((f - 0.01).abs() < 0.002, "{f}");
        assert!((p - 0.03).abs() < 0.003, "{p}");
    }

    #[test]
    fn pauli_expectations() {
        let psi = run_ideal(&bell(), &[]).unwrap();
        assert!((psi.pauli_expectation("ZZ") - 1.0).abs() < 1e-12);
        assert!((psi.pauli_expectation("XX") - 1.0).abs() < 1e-12);
        assert!((psi.pauli_expectation("YY") + 1.0).abs() < 1e-12);
        assert!(psi.pauli_expectation("ZI").abs() < 1e-12);
    }
}
