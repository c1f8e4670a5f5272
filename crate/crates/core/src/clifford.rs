//! One- and two-qubit Clifford group: tableaux, uniform sampling, inversion
//! and realisation in {rx(±π/2), rz(kπ/2), cx}.
//!
//! A tableau stores the images `U X_j U†` and `U Z_j U†` as phased Paulis.
//! Symplectic classes are enumerated once per width by breadth-first search
//! over {H, S, CX}; a Clifford is a class word preceded by a Pauli that fixes
//! the signs, which gives uniform sampling as (class, Pauli) pairs.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use rand::Rng;

use crate::circuit::{Circuit, GateKind};
use crate::error::Result;

/// `i^phase · X^x Z^z`, bit `q` of `x`/`z` acting on qubit `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pauli {
    pub x: u8,
    pub z: u8,
    pub phase: u8,
}

impl Pauli {
    pub fn identity() -> Self {
        Pauli { x: 0, z: 0, phase: 0 }
    }

    pub fn x(q: usize) -> Self {
        Pauli { x: 1 << q, z: 0, phase: 0 }
    }

    pub fn z(q: usize) -> Self {
        Pauli { x: 0, z: 1 << q, phase: 0 }
    }

    pub fn mul(self, rhs: Pauli) -> Pauli {
        let swaps = (self.z & rhs.x).count_ones() as u8;
        Pauli { x: self.x ^ rhs.x, z: self.z ^ rhs.z, phase: (self.phase + rhs.phase + 2 * swaps) % 4 }
    }

    pub fn commutes(self, other: Pauli) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }
}

/// Primitive gates used in Clifford words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    Cx(usize, usize),
    X(usize),
    Z(usize),
}

impl CliffordGate {
    /// Appends the gate to `c`, mapping local qubit `q` to `qubits[q]`.
    /// Realisations agree with the named gate up to global phase.
    fn append(self, c: &mut Circuit, qubits: &[usize]) -> Result<()> {
        match self {
            CliffordGate::H(q) => {
                c.push_rotation(GateKind::Rz, qubits[q], FRAC_PI_2)?;
                c.push_rotation(GateKind::Rx, qubits[q], FRAC_PI_2)?;
                c.push_rotation(GateKind::Rz, qubits[q], FRAC_PI_2)
            }
            CliffordGate::S(q) => c.push_rotation(GateKind::Rz, qubits[q], FRAC_PI_2),
            CliffordGate::Cx(a, b) => c.push_cx(qubits[a], qubits[b]),
            CliffordGate::X(q) => {
                c.push_rotation(GateKind::Rx, qubits[q], FRAC_PI_2)?;
                c.push_rotation(GateKind::Rx, qubits[q], FRAC_PI_2)
            }
            CliffordGate::Z(q) => c.push_rotation(GateKind::Rz, qubits[q], PI),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tableau {
    n: usize,
    images: Vec<Pauli>,
}

impl Tableau {
    pub fn identity(n: usize) -> Self {
        assert!((1..=4).contains(&n), "tableau width {n} unsupported");
        let images = (0..n).map(Pauli::x).chain((0..n).map(Pauli::z)).collect();
        Tableau { n, images }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// `U X_q U†`
    pub fn x_image(&self, q: usize) -> Pauli {
        self.images[q]
    }

    /// `U Z_q U†`
    pub fn z_image(&self, q: usize) -> Pauli {
        self.images[self.n + q]
    }

    pub fn gate(n: usize, g: CliffordGate) -> Self {
        let mut t = Tableau::identity(n);
        match g {
            CliffordGate::H(q) => {
                t.images[q] = Pauli::z(q);
                t.images[n + q] = Pauli::x(q);
            }
            CliffordGate::S(q) => t.images[q] = Pauli { x: 1 << q, z: 1 << q, phase: 1 },
            CliffordGate::Cx(c, tq) => {
                t.images[c] = Pauli::x(c).mul(Pauli::x(tq));
                t.images[n + tq] = Pauli::z(c).mul(Pauli::z(tq));
            }
            CliffordGate::X(q) => t.images[n + q].phase = 2,
            CliffordGate::Z(q) => t.images[q].phase = 2,
        }
        t
    }

    /// `U P U†`
    pub fn conjugate(&self, p: Pauli) -> Pauli {
        let mut out = Pauli { x: 0, z: 0, phase: p.phase };
        for j in 0..self.n {
            if p.x >> j & 1 == 1 {
                out = out.mul(self.images[j]);
            }
        }
        for j in 0..self.n {
            if p.z >> j & 1 == 1 {
                out = out.mul(self.images[self.n + j]);
            }
        }
        out
    }

    /// Tableau of `next ∘ self` (`self` applied first).
    pub fn then(&self, next: &Tableau) -> Tableau {
        assert_eq!(self.n, next.n);
        Tableau { n: self.n, images: self.images.iter().map(|&p| next.conjugate(p)).collect() }
    }

    pub fn inverse(&self) -> Tableau {
        let n = self.n;
        let generators: Vec<Pauli> = (0..n).map(Pauli::x).chain((0..n).map(Pauli::z)).collect();
        let images = generators
            .iter()
            .map(|&g| {
                // preimage bits by search over the 4^n Pauli frames, then fix the phase
                let (x, z) = (0..1u8 << n)
                    .flat_map(|x| (0..1u8 << n).map(move |z| (x, z)))
                    .find(|&(x, z)| {
                        let img = self.conjugate(Pauli { x, z, phase: 0 });
                        img.x == g.x && img.z == g.z
                    })
                    .expect("tableau is invertible");
                let k = self.conjugate(Pauli { x, z, phase: 0 }).phase;
                Pauli { x, z, phase: (4 - k) % 4 }
            })
            .collect();
        Tableau { n, images }
    }

    pub fn is_identity(&self) -> bool {
        *self == Tableau::identity(self.n)
    }

    /// Whether the images are Hermitian and satisfy the canonical commutation relations.
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        let hermitian = self.images.iter().all(|p| (p.phase + (p.x & p.z).count_ones() as u8) % 2 == 0);
        let relations = (0..2 * n).all(|a| {
            (0..2 * n).all(|b| {
                let should_commute = !(a % n == b % n && a != b);
                self.images[a].commutes(self.images[b]) == should_commute
            })
        });
        hermitian && relations
    }

    fn symplectic_key(&self) -> u64 {
        self.images.iter().fold(0u64, |acc, p| (acc << 8) | ((p.x as u64) << 4) | p.z as u64)
    }
}

struct ClassTable {
    words: Vec<Vec<CliffordGate>>,
    tableaux: Vec<Tableau>,
    index: HashMap<u64, usize>,
}

fn build_classes(n: usize) -> ClassTable {
    let mut gens = Vec::new();
    for q in 0..n {
        gens.push(CliffordGate::H(q));
        gens.push(CliffordGate::S(q));
    }
    for a in 0..n {
        for b in 0..n {
            if a != b {
                gens.push(CliffordGate::Cx(a, b));
            }
        }
    }
    let gen_tabs: Vec<Tableau> = gens.iter().map(|&g| Tableau::gate(n, g)).collect();
    let id = Tableau::identity(n);
    let mut table = ClassTable { words: vec![vec![]], tableaux: vec![id.clone()], index: HashMap::new() };
    table.index.insert(id.symplectic_key(), 0);
    let mut head = 0;
    while head < table.tableaux.len() {
        let t = table.tableaux[head].clone();
        for (g, gt) in gens.iter().zip(&gen_tabs) {
            let next = t.then(gt);
            let key = next.symplectic_key();
            if !table.index.contains_key(&key) {
                let mut word = table.words[head].clone();
                word.push(*g);
                table.index.insert(key, table.tableaux.len());
                table.words.push(word);
                table.tableaux.push(next);
            }
        }
        head += 1;
    }
    table
}

fn classes(n: usize) -> &'static ClassTable {
    static ONE: OnceLock<ClassTable> = OnceLock::new();
    static TWO: OnceLock<ClassTable> = OnceLock::new();
    match n {
        1 => ONE.get_or_init(|| build_classes(1)),
        2 => TWO.get_or_init(|| build_classes(2)),
        _ => panic!("Clifford sampling supports 1 or 2 qubits, got {n}"),
    }
}

/// Size of the n-qubit Clifford group modulo global phase.
pub fn group_order(n: usize) -> usize {
    classes(n).words.len() << (2 * n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliffordElement {
    tableau: Tableau,
    word: Vec<CliffordGate>,
}

impl CliffordElement {
    pub fn identity(n: usize) -> Self {
        CliffordElement { tableau: Tableau::identity(n), word: Vec::new() }
    }

    /// Element for a given tableau, realised as a sign-fixing Pauli followed
    /// by the canonical word of its symplectic class.
    pub fn from_tableau(tableau: Tableau) -> Self {
        let n = tableau.num_qubits();
        let table = classes(n);
        let k = table.index[&tableau.symplectic_key()];
        let base = &table.tableaux[k];
        let mut word = Vec::new();
        for q in 0..n {
            // X_q row flips under a leading Pauli with a Z component on q, and vice versa
            if tableau.x_image(q).phase != base.x_image(q).phase {
                word.push(CliffordGate::Z(q));
            }
            if tableau.z_image(q).phase != base.z_image(q).phase {
                word.push(CliffordGate::X(q));
            }
        }
        word.extend_from_slice(&table.words[k]);
        CliffordElement { tableau, word }
    }

    /// Uniform draw from the n-qubit Clifford group (n ∈ {1, 2}).
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let table = classes(n);
        let k = rng.gen_range(0..table.words.len());
        let frame: u8 = rng.gen_range(0..1u8 << (2 * n));
        let mut tab = Tableau::identity(n);
        for q in 0..n {
            if frame >> q & 1 == 1 {
                tab = tab.then(&Tableau::gate(n, CliffordGate::Z(q)));
            }
            if frame >> (n + q) & 1 == 1 {
                tab = tab.then(&Tableau::gate(n, CliffordGate::X(q)));
            }
        }
        CliffordElement::from_tableau(tab.then(&table.tableaux[k]))
    }

    pub fn tableau(&self) -> &Tableau {
        &self.tableau
    }

    pub fn word(&self) -> &[CliffordGate] {
        &self.word
    }

    pub fn inverse(&self) -> Self {
        CliffordElement::from_tableau(self.tableau.inverse())
    }

    /// `next ∘ self`
    pub fn then(&self, next: &CliffordElement) -> Self {
        CliffordElement::from_tableau(self.tableau.then(&next.tableau))
    }

    /// Appends the realisation to `c`, local qubit `q` landing on `qubits[q]`.
    pub fn append_to(&self, c: &mut Circuit, qubits: &[usize]) -> Result<()> {
        for g in &self.word {
            g.append(c, qubits)?;
        }
        Ok(())
    }

    /// Number of cx gates in the realisation.
    pub fn cx_count(&self) -> usize {
        self.word.iter().filter(|g| matches!(g, CliffordGate::Cx(..))).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::simulator::unitary_columns;
    use num_complex::Complex64;

    type Mat = Vec<Vec<Complex64>>;

    fn matmul(a: &Mat, b: &Mat) -> Mat {
        let d = a.len();
        (0..d).map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
    }

    fn dagger(a: &Mat) -> Mat {
        let d = a.len();
        (0..d).map(|i| (0..d).map(|j| a[j][i].conj()).collect()).collect()
    }

    // dense matrix of a Pauli with qubit 0 as the most significant bit
    fn pauli_matrix(n: usize, p: Pauli) -> Mat {
        let d = 1usize << n;
        let bit = |idx: usize, q: usize| idx >> (n - 1 - q) & 1;
        let mut m = vec![vec![Complex64::new(0.0, 0.0); d]; d];
        let ph = Complex64::i().powu(p.phase as u32);
        for col in 0..d {
            // X^x Z^z |col⟩ = (-1)^{z·col} |col ⊕ x⟩
            let mut row = col;
            let mut sign = 1.0;
            for q in 0..n {
                if p.z >> q & 1 == 1 && bit(col, q) == 1 {
                    sign = -sign;
                }
                if p.x >> q & 1 == 1 {
                    row ^= 1 << (n - 1 - q);
                }
            }
            m[row][col] = ph * sign;
        }
        m
    }

    fn unitary(e: &CliffordElement) -> Mat {
        let n = e.tableau().num_qubits();
        let mut c = Circuit::new(n);
        e.append_to(&mut c, &(0..n).collect::<Vec<_>>()).unwrap();
        let cols = unitary_columns(&c).unwrap();
        let d = 1 << n;
        (0..d).map(|i| (0..d).map(|j| cols[j].amplitudes()[i]).collect()).collect()
    }

    fn close(a: &Mat, b: &Mat) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() < 1e-9)
    }

    fn assert_consistent(e: &CliffordElement) {
        let n = e.tableau().num_qubits();
        let u = unitary(e);
        for q in 0..n {
            for (gen, img) in [(Pauli::x(q), e.tableau().x_image(q)), (Pauli::z(q), e.tableau().z_image(q))] {
                let lhs = matmul(&matmul(&u, &pauli_matrix(n, gen)), &dagger(&u));
                assert!(close(&lhs, &pauli_matrix(n, img)), "word {:?}", e.word());
            }
        }
    }

    #[test]
    fn group_orders() {
        assert_eq!(group_order(1), 24);
        assert_eq!(group_order(2), 11520);
    }

    #[test]
    fn generator_tableaux_match_unitaries() {
        for g in [CliffordGate::H(0), CliffordGate::S(1), CliffordGate::Cx(0, 1), CliffordGate::Cx(1, 0)] {
            let e = CliffordElement::from_tableau(Tableau::gate(2, g));
            assert_consistent(&e);
        }
    }

    #[test]
    fn sampled_elements_realise_their_tableau() {
        let mut rng = stream_rng(1, 0);
        for n in [1, 2] {
            for _ in 0..200 {
                let e = CliffordElement::random(n, &mut rng);
                assert!(e.tableau().is_symplectic());
                assert_consistent(&e);
            }
        }
    }

    #[test]
    fn single_qubit_sampling_is_uniform() {
        // chi-square over the 24 elements, enumerated independently by closing {H,S} under products
        let mut all: Vec<Tableau> = vec![Tableau::identity(1)];
        let gens = [Tableau::gate(1, CliffordGate::H(0)), Tableau::gate(1, CliffordGate::S(0))];
        let mut i = 0;
        while i < all.len() {
            for g in &gens {
                let t = all[i].then(g);
                if !all.contains(&t) {
                    all.push(t);
                }
            }
            i += 1;
        }
        // up to global phase every element is hit, so group by tableau
        assert_eq!(all.len(), 24);
        let mut rng = stream_rng(42, 0);
        let draws = 100_000;
        let mut counts = vec![0usize; 24];
        for _ in 0..draws {
            let e = CliffordElement::random(1, &mut rng);
            counts[all.iter().position(|t| t == e.tableau()).unwrap()] += 1;
        }
        let expected = draws as f64 / 24.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 23 degrees of freedom; 0.999 quantile is about 49.7
        assert!(chi2 < 49.7, "chi2 = {chi2}");
    }

    #[test]
    fn composition_stays_in_group() {
        let mut rng = stream_rng(3, 0);
        let mut acc = CliffordElement::identity(2);
        for _ in 0..500 {
            acc = acc.then(&CliffordElement::random(2, &mut rng));
            assert!(acc.tableau().is_symplectic());
        }
        assert_consistent(&acc);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let mut rng = stream_rng(5, 0);
        for n in [1, 2] {
            for _ in 0..300 {
                let c = CliffordElement::random(n, &mut rng);
                assert!(c.then(&c.inverse()).tableau().is_identity());
                assert!(c.inverse().then(&c).tableau().is_identity());
            }
        }
    }

    #[test]
    fn two_qubit_cx_content() {
        let mut rng = stream_rng(9, 0);
        let mean = (0..2000).map(|_| CliffordElement::random(2, &mut rng).cx_count()).sum::<usize>() as f64 / 2000.0;
        assert!(mean > 1.0 && mean < 3.0, "{mean}");
    }
}
