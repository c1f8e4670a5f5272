//! Pauli Hamiltonians, ground-state cost functions, SPSA and the VQE driver.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build, PqcConfig};
use crate::circuit::{Circuit, GateKind};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::simulator::{run_ideal, run_noisy, NoiseMode, NoiseSpec, ShotResult, StateVector};

/// Largest register for dense diagonalization.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub pauli: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonian")]
pub struct PauliHamiltonian {
    pub n: usize,
    pub terms: Vec<PauliTerm>,
}

#[derive(Deserialize)]
struct RawHamiltonian {
    n: usize,
    terms: Vec<PauliTerm>,
}

impl TryFrom<RawHamiltonian> for PauliHamiltonian {
    type Error = Error;
    fn try_from(raw: RawHamiltonian) -> Result<Self> {
        PauliHamiltonian::new(raw.n, raw.terms)
    }
}

impl PauliHamiltonian {
    pub fn new(n: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        for (k, t) in terms.iter().enumerate() {
            if t.pauli.len() != n || !t.pauli.chars().all(|c| "IXYZ".contains(c)) {
                return Err(Error::InvalidArgument(format!("term {k}: '{}' is not a {n}-qubit Pauli string", t.pauli)));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidArgument(format!("term {k}: coefficient is not finite")));
            }
        }
        Ok(PauliHamiltonian { n, terms })
    }

    pub fn from_terms<'a>(terms: impl IntoIterator<Item = (f64, &'a str)>) -> Result<Self> {
        let terms: Vec<PauliTerm> = terms.into_iter().map(|(coeff, p)| PauliTerm { coeff, pauli: p.to_string() }).collect();
        let n = terms.first().map_or(0, |t| t.pauli.len());
        PauliHamiltonian::new(n, terms)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Shipped 4-qubit H2 Hamiltonian.
    pub fn h2() -> Self {
        Self::from_json(include_str!("../data/h2_bk_4q.json")).expect("shipped Hamiltonian is valid")
    }

    /// Shipped 6-qubit LiH Hamiltonian.
    pub fn lih() -> Self {
        Self::from_json(include_str!("../data/lih_bk_6q.json")).expect("shipped Hamiltonian is valid")
    }

    /// Dense matrix, qubit 0 as the most significant index bit.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits(self.n));
        }
        let d = 1usize << self.n;
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for t in &self.terms {
            for col in 0..d {
                let mut row = col;
                let mut amp = Complex64::new(t.coeff, 0.0);
                for (q, ch) in t.pauli.chars().enumerate() {
                    let bit = 1 << (self.n - 1 - q);
                    let set = col & bit != 0;
                    match ch {
                        'X' => row ^= bit,
                        'Y' => {
                            row ^= bit;
                            amp *= if set { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
                        }
                        'Z' if set => amp = -amp,
                        _ => {}
                    }
                }
                m[(row, col)] += amp;
            }
        }
        Ok(m)
    }

    /// Smallest eigenvalue by dense diagonalization.
    pub fn ground_energy(&self) -> Result<f64> {
        let m = self.to_matrix()?;
        Ok(m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// `⟨ψ|H|ψ⟩` from the statevector.
    pub fn exact_expectation(&self, psi: &StateVector) -> Result<f64> {
        if psi.num_qubits() != self.n {
            return Err(Error::InvalidArgument(format!("Hamiltonian has {} qubits, state has {}", self.n, psi.num_qubits())));
        }
        Ok(self.terms.iter().map(|t| t.coeff * psi.pauli_expectation(&t.pauli)).sum())
    }

    /// Greedy qubit-wise commuting groups of non-identity terms: each group
    /// holds a measurement basis string and its term indices.
    pub fn measurement_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut groups: Vec<(Vec<u8>, Vec<usize>)> = Vec::new();
        for (k, t) in self.terms.iter().enumerate() {
            let p = t.pauli.as_bytes();
            if p.iter().all(|&c| c == b'I') {
                continue;
            }
            let fits = |basis: &[u8]| basis.iter().zip(p).all(|(&b, &c)| b == b'I' || c == b'I' || b == c);
            match groups.iter_mut().find(|(basis, _)| fits(basis)) {
                Some((basis, members)) => {
                    for (b, &c) in basis.iter_mut().zip(p) {
                        if c != b'I' {
                            *b = c;
                        }
                    }
                    members.push(k);
                }
                None => groups.push((p.to_vec(), vec![k])),
            }
        }
        groups.into_iter().map(|(b, m)| (String::from_utf8(b).expect("ascii"), m)).collect()
    }
}

/// `1 - P(first n_c measured bits all zero)`; `n_c = N` is the global cost.
pub fn ground_cost(result: &ShotResult, n_c: usize) -> Result<f64> {
    let n = result.counts.keys().next().map_or(n_c, String::len);
    if n_c == 0 || n_c > n {
        return Err(Error::InvalidArgument(format!("n_c = {n_c} outside 1..={n}")));
    }
    let qubits: Vec<usize> = (0..n_c).collect();
    Ok(1.0 - result.zero_frequency(&qubits))
}

/// Exact ground cost of a statevector.
pub fn ground_cost_exact(psi: &StateVector, n_c: usize) -> Result<f64> {
    let n = psi.num_qubits();
    if n_c == 0 || n_c > n {
        return Err(Error::InvalidArgument(format!("n_c = {n_c} outside 1..={n}")));
    }
    Ok(1.0 - psi.prob_all_zero(&(0..n_c).collect::<Vec<_>>()))
}

/// Appends measurement-basis changes for a basis string.
fn with_basis(c: &Circuit, basis: &str) -> Result<Circuit> {
    let mut out = c.clone();
    for (q, ch) in basis.chars().enumerate() {
        match ch {
            'X' => out.push_rotation(GateKind::Ry, q, -FRAC_PI_2)?,
            'Y' => out.push_rotation(GateKind::Rx, q, FRAC_PI_2)?,
            _ => {}
        }
    }
    Ok(out)
}

/// Estimated `⟨H⟩` of `c(θ)`. Identity terms are added exactly; each
/// qubit-wise commuting group is measured with `shots` shots. `shots = None`
/// gives the exact ideal value.
pub fn expectation(h: &PauliHamiltonian, c: &Circuit, theta: &[f64], spec: &NoiseSpec, shots: Option<usize>) -> Result<f64> {
    if h.n != c.num_qubits() {
        return Err(Error::InvalidArgument(format!("Hamiltonian has {} qubits, circuit has {}", h.n, c.num_qubits())));
    }
    let Some(shots) = shots else {
        if spec.mode != NoiseMode::Ideal {
            return Err(Error::InvalidArgument("exact expectation is only available in ideal mode".into()));
        }
        return h.exact_expectation(&run_ideal(c, theta)?);
    };
    let bound = c.bind(theta)?;
    let mut energy: f64 = h.terms.iter().filter(|t| t.pauli.bytes().all(|b| b == b'I')).map(|t| t.coeff).sum();
    for (g, (basis, members)) in h.measurement_groups().into_iter().enumerate() {
        let circ = with_basis(&bound, &basis)?;
        let r = run_noisy(&circ, &[], &spec.with_seed(derive_seed(spec.seed, g as u64)), shots)?;
        for k in members {
            let p = h.terms[k].pauli.as_bytes();
            let parity: f64 = r
                .counts
                .iter()
                .map(|(bits, &cnt)| {
                    let ones = bits.bytes().zip(p).filter(|&(b, &c)| c != b'I' && b == b'1').count();
                    if ones % 2 == 0 {
                        cnt as f64
                    } else {
                        -(cnt as f64)
                    }
                })
                .sum();
            energy += h.terms[k].coeff * parity / shots as f64;
        }
    }
    Ok(energy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub max_iter: usize,
    pub a: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub alpha_gain: f64,
    pub gamma_gain: f64,
    pub seed: u64,
    /// Half-width of the uniform initial-parameter box used by `run_vqe`.
    #[serde(default = "default_init_range")]
    pub init_range: f64,
}

fn default_init_range() -> f64 {
    std::f64::consts::PI
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig { max_iter: 100, a: 0.2, c: 0.1, big_a: 10.0, alpha_gain: 0.602, gamma_gain: 0.101, seed: 0, init_range: default_init_range() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean of the two perturbed evaluations.
    pub energy: f64,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VqeTrace {
    pub iterations: Vec<IterationRecord>,
    pub best_energy: f64,
    pub best_theta: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub evaluations: usize,
    pub exact_ground: Option<f64>,
    /// Set when the run stopped on a non-finite cost.
    pub aborted: Option<String>,
}

impl VqeTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,energy\n");
        for r in &self.iterations {
            s.push_str(&format!("{},{:.10}\n", r.iteration, r.energy));
        }
        s
    }
}

/// SPSA from `theta0`. `f(θ, k)` is called with a running evaluation index
/// `k` for seeding noisy estimates.
pub fn spsa_minimize(mut f: impl FnMut(&[f64], u64) -> Result<f64>, theta0: &[f64], cfg: &SpsaConfig) -> Result<VqeTrace> {
    if cfg.max_iter == 0 || cfg.c <= 0.0 {
        return Err(Error::InvalidArgument("SPSA needs max_iter >= 1 and c > 0".into()));
    }
    if theta0.is_empty() {
        return Err(Error::InvalidArgument("SPSA needs at least one parameter".into()));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut theta = theta0.to_vec();
    let mut trace = VqeTrace { best_energy: f64::INFINITY, best_theta: theta.clone(), ..Default::default() };
    for k in 0..cfg.max_iter {
        let ak = cfg.a / (cfg.big_a + k as f64 + 1.0).powf(cfg.alpha_gain);
        let ck = cfg.c / (k as f64 + 1.0).powf(cfg.gamma_gain);
        let delta: Vec<f64> = (0..theta.len()).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + ck * d).collect();
        let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - ck * d).collect();
        let fp = f(&plus, 2 * k as u64)?;
        let fm = f(&minus, 2 * k as u64 + 1)?;
        trace.evaluations += 2;
        if !fp.is_finite() || !fm.is_finite() {
            warn!("non-finite cost at SPSA iteration {k}; stopping");
            trace.aborted = Some(Error::NonFinite(k).to_string());
            break;
        }
        let energy = 0.5 * (fp + fm);
        if energy < trace.best_energy {
            trace.best_energy = energy;
            trace.best_theta = theta.clone();
        }
        let scale = (fp - fm) / (2.0 * ck);
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t -= ak * scale / d;
        }
        debug!("spsa {k}: {energy:.6}");
        trace.iterations.push(IterationRecord { iteration: k, energy, theta: theta.clone() });
    }
    trace.final_theta = theta;
    Ok(trace)
}

/// Builds the ansatz, minimizes `⟨H⟩` with SPSA from a seeded uniform start
/// in `[-π, π)`, and attaches the dense ground energy when the register is
/// small enough. `shots = None` uses exact ideal expectations.
pub fn run_vqe(
    h: &PauliHamiltonian,
    cfg: &PqcConfig,
    device: &DeviceModel,
    mode: NoiseMode,
    shots: Option<usize>,
    spsa: &SpsaConfig,
) -> Result<VqeTrace> {
    if cfg.n != h.n {
        return Err(Error::InvalidArgument(format!("ansatz has {} qubits, Hamiltonian has {}", cfg.n, h.n)));
    }
    let ansatz = build(cfg, device)?;
    let p = ansatz.circuit.num_params();
    let mut rng = stream_rng(spsa.seed, 1);
    if !(spsa.init_range.is_finite() && spsa.init_range > 0.0) {
        return Err(Error::InvalidArgument(format!("init_range must be positive, got {}", spsa.init_range)));
    }
    let r = spsa.init_range;
    let theta0: Vec<f64> = (0..p).map(|_| rng.gen_range(-r..r)).collect();
    let spec = NoiseSpec::new(mode, device, derive_seed(spsa.seed, 2));
    let mut trace = spsa_minimize(
        |theta, k| expectation(h, &ansatz.circuit, theta, &spec.with_seed(derive_seed(spec.seed, k)), shots),
        &theta0,
        spsa,
    )?;
    trace.exact_ground = if h.n <= MAX_DENSE_QUBITS { Some(h.ground_energy()?) } else { None };
    Ok(trace)
}
