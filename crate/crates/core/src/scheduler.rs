//! ALA approximation of entangling layers and crosstalk-adaptive scheduling
//! of a cx layer into barrier-delimited sub-layers.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::device::{DeviceModel, Edge};
use crate::error::{Error, Result};

/// Largest layer the exact solver accepts.
pub const MAX_EXACT_GATES: usize = 12;

/// Objective values closer than this are ties.
pub const TIE_EPS: f64 = 1e-9;

const EPS_FLOOR: f64 = 1e-12;

/// Greedy edge colouring in program order: each gate takes the first group
/// holding no gate on its qubits.
pub fn ala_groups(gates: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for &g in gates {
        let slot = groups.iter().position(|grp| grp.iter().all(|&(a, b)| ![a, b].contains(&g.0) && ![a, b].contains(&g.1)));
        match slot {
            Some(i) => groups[i].push(g),
            None => groups.push(vec![g]),
        }
    }
    groups
}

/// Re-emits every entangling block of `c` (a maximal run of cx gates and
/// barriers) as ALA groups separated by full barriers. Rotations are untouched.
pub fn approximate_to_ala(c: &Circuit, device: &DeviceModel) -> Result<Circuit> {
    for g in c.ops().iter().filter(|g| g.kind == GateKind::Cx) {
        let (a, b) = (c.physical(g.qubits[0]), c.physical(g.qubits[1]));
        if !device.coupling.has_edge(a, b) {
            return Err(Error::Mapping(format!("cx on physical ({a},{b}) is not a coupling edge")));
        }
    }
    let mut out = Circuit::new(c.num_qubits());
    let ops = c.ops();
    let mut i = 0;
    while i < ops.len() {
        if ops[i].kind != GateKind::Cx {
            out.push(ops[i].clone())?;
            i += 1;
            continue;
        }
        let mut block = Vec::new();
        let mut j = i;
        while j < ops.len() && matches!(ops[j].kind, GateKind::Cx | GateKind::Barrier) {
            if ops[j].kind == GateKind::Cx {
                block.push((ops[j].qubits[0], ops[j].qubits[1]));
            }
            j += 1;
        }
        let trailing_barrier = ops[j - 1].kind == GateKind::Barrier;
        for (k, grp) in ala_groups(&block).iter().enumerate() {
            if k > 0 {
                out.push_full_barrier()?;
            }
            for &(a, b) in grp {
                out.push_cx(a, b)?;
            }
        }
        if trailing_barrier {
            out.push_full_barrier()?;
        }
        i = j;
    }
    let out = Circuit::from_ops(c.num_qubits(), out.ops().to_vec())?;
    match c.layout() {
        Some(l) => out.with_layout(l.to_vec()),
        None => Ok(out),
    }
}

/// `1 - exp(-t/T)`, `T = min(T1, T2)`; lifetime in ns, coherence times in µs.
pub fn decoherence_error(lifetime_ns: f64, t1_us: f64, t2_us: f64) -> f64 {
    let t = t1_us.min(t2_us) * 1e3;
    -(-lifetime_ns / t).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    pub omega: f64,
    /// A pair enters the overlap model when either conditional/independent
    /// ratio exceeds this.
    pub threshold: f64,
    /// Subtract the decoherence term instead of adding it.
    pub paper_literal_sign: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions { omega: 0.5, threshold: 1.0, paper_literal_sign: false }
    }
}

impl ScheduleOptions {
    pub fn with_omega(omega: f64) -> Self {
        ScheduleOptions { omega, ..Default::default() }
    }
}

/// Which gate pairs may overlap with a crosstalk penalty, and which overlaps
/// a schedule realises.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapModel {
    pub threshold: f64,
    /// Per gate, the gates whose concurrency changes its error.
    pub olap: Vec<Vec<usize>>,
    /// Overlap indicator for every resource-disjoint pair `(i, j)`, `i < j`.
    pub sigma: BTreeMap<(usize, usize), bool>,
}

impl OverlapModel {
    pub fn new(gates: &[(usize, usize)], device: &DeviceModel, threshold: f64) -> Self {
        let edges: Vec<Edge> = gates.iter().map(|&(a, b)| Edge::new(a, b)).collect();
        let n = gates.len();
        let mut olap = vec![Vec::new(); n];
        let mut sigma = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                if !edges[i].is_disjoint(edges[j]) {
                    continue;
                }
                sigma.insert((i, j), false);
                if device.multiplier(edges[i], edges[j]) > threshold || device.multiplier(edges[j], edges[i]) > threshold {
                    olap[i].push(j);
                    olap[j].push(i);
                }
            }
        }
        OverlapModel { threshold, olap, sigma }
    }

    /// Sets `sigma` from sub-layer co-membership.
    pub fn realize(&mut self, assignment: &[usize]) {
        for ((i, j), s) in self.sigma.iter_mut() {
            *s = assignment[*i] == assignment[*j];
        }
    }
}

/// Rate of gate `g` while `concurrent` gates run: the largest of its
/// independent rate and the conditional rates that clear `threshold`.
pub fn gate_error(g: Edge, concurrent: &[Edge], device: &DeviceModel, threshold: f64) -> Result<f64> {
    let base = device.cx_epc(g)?;
    Ok(concurrent
        .iter()
        .map(|&h| {
            let m = device.multiplier(g, h);
            if m > threshold {
                base * m
            } else {
                base
            }
        })
        .fold(base, f64::max))
}

/// Assignment of a layer's gates to ordered sub-layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Physical `(control, target)` in program order.
    pub gates: Vec<(usize, usize)>,
    /// Sub-layer index per gate.
    pub assignment: Vec<usize>,
    pub start_ns: Vec<f64>,
    /// Gate indices per sub-layer, ascending.
    pub sublayers: Vec<Vec<usize>>,
    pub objective: f64,
    pub omega: f64,
    pub threshold: f64,
}

impl Schedule {
    pub fn num_sublayers(&self) -> usize {
        self.sublayers.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubLayerSet {
    pub r: usize,
    pub layers: Vec<Vec<(usize, usize)>>,
}

pub fn extract_sublayers(s: &Schedule) -> SubLayerSet {
    let layers: Vec<Vec<(usize, usize)>> = s.sublayers.iter().map(|l| l.iter().map(|&g| s.gates[g]).collect()).collect();
    SubLayerSet { r: layers.len(), layers }
}

/// Ordered cx sets between barriers of a barrier-delimited circuit, on
/// physical qubits.
pub fn sublayers_of_circuit(c: &Circuit) -> SubLayerSet {
    let mut layers = Vec::new();
    let mut current = Vec::new();
    for g in c.ops() {
        match g.kind {
            GateKind::Cx => current.push((c.physical(g.qubits[0]), c.physical(g.qubits[1]))),
            GateKind::Barrier if !current.is_empty() => layers.push(std::mem::take(&mut current)),
            _ => {}
        }
    }
    if !current.is_empty() {
        layers.push(current);
    }
    SubLayerSet { r: layers.len(), layers }
}

/// Precomputed per-gate data for one layer.
struct Problem {
    n: usize,
    dur: Vec<f64>,
    ln_ind: Vec<f64>,
    /// `pair_err[g][h]`: rate of g when h runs beside it.
    pair_err: Vec<Vec<f64>>,
    base_err: Vec<f64>,
    /// Local qubit ids per gate.
    qubits: Vec<[usize; 2]>,
    inv_t: Vec<f64>,
    preds: Vec<u32>,
    omega: f64,
    literal: bool,
}

impl Problem {
    fn new(gates: &[(usize, usize)], device: &DeviceModel, opts: &ScheduleOptions) -> Result<Self> {
        if !(0.0..=1.0).contains(&opts.omega) {
            return Err(Error::InvalidArgument(format!("omega must lie in [0,1], got {}", opts.omega)));
        }
        let n = gates.len();
        let edges: Vec<Edge> = gates.iter().map(|&(a, b)| Edge::new(a, b)).collect();
        for (&(a, b), e) in gates.iter().zip(&edges) {
            if a == b || !device.coupling.has_edge(a, b) {
                return Err(Error::Mapping(format!("cx ({a},{b}) is not on a coupling edge")));
            }
            device.cx_epc(*e)?;
        }
        let model = OverlapModel::new(gates, device, opts.threshold);
        let mut phys: Vec<usize> = gates.iter().flat_map(|&(a, b)| [a, b]).collect();
        phys.sort_unstable();
        phys.dedup();
        let local = |q: usize| phys.binary_search(&q).unwrap();
        let base_err: Vec<f64> = edges.iter().map(|&e| device.cx_epc(e)).collect::<Result<_>>()?;
        let mut pair_err = vec![vec![0.0; n]; n];
        for g in 0..n {
            for &h in &model.olap[g] {
                pair_err[g][h] = gate_error(edges[g], &[edges[h]], device, opts.threshold)?;
            }
        }
        let preds = (0..n)
            .map(|j| (0..j).filter(|&i| !edges[i].is_disjoint(edges[j])).fold(0u32, |m, i| m | 1 << i))
            .collect();
        Ok(Problem {
            n,
            dur: edges.iter().map(|&e| device.cx_duration(e)).collect::<Result<_>>()?,
            ln_ind: base_err.iter().map(|&e| e.max(EPS_FLOOR).ln()).collect(),
            pair_err,
            base_err,
            qubits: gates.iter().map(|&(a, b)| [local(a), local(b)]).collect(),
            inv_t: phys.iter().map(|&q| 1.0 / device.qubit_cal[q].t_min_ns()).collect(),
            preds,
            omega: opts.omega,
            literal: opts.paper_literal_sign,
        })
    }

    fn eps_in(&self, g: usize, members: impl Iterator<Item = usize>) -> f64 {
        members.filter(|&h| h != g).map(|h| self.pair_err[g][h]).fold(self.base_err[g], f64::max)
    }

    fn combine(&self, err: f64, life: f64) -> f64 {
        if self.literal {
            self.omega * err - (1.0 - self.omega) * life
        } else {
            self.omega * err + (1.0 - self.omega) * life
        }
    }

    /// Start times and objective of a complete assignment.
    fn evaluate(&self, assignment: &[usize]) -> (Vec<f64>, f64) {
        let r = assignment.iter().max().map_or(0, |m| m + 1);
        let mut layer_dur = vec![0.0f64; r];
        for g in 0..self.n {
            layer_dur[assignment[g]] = layer_dur[assignment[g]].max(self.dur[g]);
        }
        let mut offsets = vec![0.0; r];
        for k in 1..r {
            offsets[k] = offsets[k - 1] + layer_dur[k - 1];
        }
        let start: Vec<f64> = assignment.iter().map(|&k| offsets[k]).collect();
        let mut first = vec![f64::INFINITY; self.inv_t.len()];
        let mut last = vec![f64::NEG_INFINITY; self.inv_t.len()];
        let mut err = 0.0;
        for g in 0..self.n {
            for &q in &self.qubits[g] {
                first[q] = first[q].min(start[g]);
                last[q] = last[q].max(start[g] + self.dur[g]);
            }
            let eps = self.eps_in(g, (0..self.n).filter(|&h| assignment[h] == assignment[g]));
            if eps <= 0.0 {
                warn!("gate error of gate {g} is zero; clamping to {EPS_FLOOR}");
            }
            err += eps.max(EPS_FLOOR).ln();
        }
        let life: f64 = (0..self.inv_t.len()).map(|q| (last[q] - first[q]) * self.inv_t[q]).sum();
        (start, self.combine(err, life))
    }

    fn valid(&self, assignment: &[usize]) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|i| self.preds[j] >> i & 1 == 0 || assignment[i] < assignment[j]))
    }
}

/// Objective of a complete assignment of `gates` to sub-layers.
pub fn objective(gates: &[(usize, usize)], assignment: &[usize], device: &DeviceModel, opts: &ScheduleOptions) -> Result<f64> {
    let p = Problem::new(gates, device, opts)?;
    if assignment.len() != gates.len() || !p.valid(assignment) {
        return Err(Error::InvalidArgument("assignment violates sub-layer constraints".into()));
    }
    Ok(p.evaluate(assignment).1)
}

/// Whether `(obj, r, assignment)` beats the incumbent under the tie rule:
/// lower objective, then fewer sub-layers, then lexicographically smaller assignment.
pub fn better(obj: f64, r: usize, assignment: &[usize], best: Option<(f64, usize, &[usize])>) -> bool {
    match best {
        None => true,
        Some((bo, br, ba)) => {
            if obj < bo - TIE_EPS {
                true
            } else if obj > bo + TIE_EPS {
                false
            } else {
                (r, assignment) < (br, ba)
            }
        }
    }
}

struct Search<'a> {
    p: &'a Problem,
    assignment: Vec<usize>,
    first: Vec<f64>,
    last: Vec<f64>,
    best: Option<(f64, usize, Vec<usize>)>,
}

impl Search<'_> {
    fn bound(&self, done: u32, t_cur: f64, err: f64) -> (f64, usize) {
        let p = self.p;
        let mut err_lb = err;
        let mut rem = vec![0.0; p.inv_t.len()];
        let mut rem_count = vec![0usize; p.inv_t.len()];
        let mut rem_all = 0.0;
        for g in (0..p.n).filter(|&g| done >> g & 1 == 0) {
            err_lb += p.ln_ind[g];
            rem_all += p.dur[g];
            for &q in &p.qubits[g] {
                rem[q] += p.dur[g];
                rem_count[q] += 1;
            }
        }
        let life: f64 = (0..p.inv_t.len())
            .map(|q| {
                let t = if p.literal {
                    // upper bound on lifetime, since the term is subtracted
                    let s = if self.first[q].is_finite() { self.first[q] } else { t_cur };
                    (t_cur + rem_all).max(self.last[q]) - s
                } else if self.first[q].is_finite() {
                    let end = if rem[q] > 0.0 { t_cur + rem[q] } else { self.last[q] };
                    end.max(self.last[q]) - self.first[q]
                } else {
                    rem[q]
                };
                t * p.inv_t[q]
            })
            .sum();
        let r_extra = rem_count.iter().copied().max().unwrap_or(0);
        (p.combine(err_lb, life), r_extra)
    }

    fn dfs(&mut self, done: u32, r: usize, t_cur: f64, err: f64) {
        let p = self.p;
        let full = if p.n == 32 { u32::MAX } else { (1u32 << p.n) - 1 };
        if done == full {
            let (_, obj) = p.evaluate(&self.assignment);
            let best = self.best.as_ref().map(|(o, r, a)| (*o, *r, a.as_slice()));
            if better(obj, r, &self.assignment, best) {
                self.best = Some((obj, r, self.assignment.clone()));
            }
            return;
        }
        if let Some((bo, br, _)) = &self.best {
            let (lb, r_extra) = self.bound(done, t_cur, err);
            if lb > bo + TIE_EPS || (lb >= bo - TIE_EPS && r + r_extra > *br) {
                return;
            }
        }
        let ready: Vec<usize> = (0..p.n).filter(|&g| done >> g & 1 == 0 && p.preds[g] & !done == 0).collect();
        let k = ready.len();
        for sub in (1..1u32 << k).rev() {
            let members: Vec<usize> = (0..k).filter(|&i| sub >> i & 1 == 1).map(|i| ready[i]).collect();
            let mut mask = done;
            let mut dur = 0.0f64;
            let mut layer_err = 0.0;
            let saved: Vec<(usize, f64, f64)> = members
                .iter()
                .flat_map(|&g| p.qubits[g])
                .map(|q| (q, self.first[q], self.last[q]))
                .collect();
            for &g in &members {
                mask |= 1 << g;
                dur = dur.max(p.dur[g]);
                self.assignment[g] = r;
                layer_err += p.eps_in(g, members.iter().copied()).max(EPS_FLOOR).ln();
                for &q in &p.qubits[g] {
                    if !self.first[q].is_finite() {
                        self.first[q] = t_cur;
                    }
                    self.last[q] = self.last[q].max(t_cur + p.dur[g]);
                }
            }
            self.dfs(mask, r + 1, t_cur + dur, err + layer_err);
            for (q, f, l) in saved.into_iter().rev() {
                self.first[q] = f;
                self.last[q] = l;
            }
        }
    }
}

fn finish(gates: &[(usize, usize)], p: &Problem, assignment: Vec<usize>, opts: &ScheduleOptions) -> Schedule {
    let (start_ns, objective) = p.evaluate(&assignment);
    let r = assignment.iter().max().map_or(0, |m| m + 1);
    let sublayers = (0..r).map(|k| (0..gates.len()).filter(|&g| assignment[g] == k).collect()).collect();
    Schedule {
        gates: gates.to_vec(),
        assignment,
        start_ns,
        sublayers,
        objective,
        omega: opts.omega,
        threshold: opts.threshold,
    }
}

/// Globally optimal sub-layer assignment of a cx layer (physical qubits,
/// program order) by branch and bound.
pub fn xtalk_schedule(gates: &[(usize, usize)], device: &DeviceModel, opts: &ScheduleOptions) -> Result<Schedule> {
    if gates.len() > MAX_EXACT_GATES {
        return Err(Error::ScheduleTooLarge { size: gates.len(), max: MAX_EXACT_GATES });
    }
    let p = Problem::new(gates, device, opts)?;
    if gates.is_empty() {
        return Ok(finish(gates, &p, Vec::new(), opts));
    }
    let mut s = Search {
        p: &p,
        assignment: vec![0; p.n],
        first: vec![f64::INFINITY; p.inv_t.len()],
        last: vec![f64::NEG_INFINITY; p.inv_t.len()],
        best: None,
    };
    s.dfs(0, 0, 0.0, 0.0);
    let (_, _, assignment) = s.best.expect("a complete schedule always exists");
    Ok(finish(gates, &p, assignment, opts))
}

/// Heuristic for layers beyond the exact bound: each sub-layer takes ready
/// gates in program order while the added crosstalk cost stays below the
/// decoherence cost of deferring the gate by one sub-layer.
pub fn greedy_schedule(gates: &[(usize, usize)], device: &DeviceModel, opts: &ScheduleOptions) -> Result<Schedule> {
    if gates.len() > 32 {
        return Err(Error::InvalidArgument("greedy scheduler supports at most 32 gates per layer".into()));
    }
    let p = Problem::new(gates, device, opts)?;
    let mut assignment = vec![usize::MAX; p.n];
    let mut done = 0u32;
    let mut r = 0;
    while done.count_ones() as usize != p.n {
        let ready: Vec<usize> = (0..p.n).filter(|&g| done >> g & 1 == 0 && p.preds[g] & !done == 0).collect();
        let mut members: Vec<usize> = Vec::new();
        for &g in &ready {
            if members.is_empty() {
                members.push(g);
                continue;
            }
            let before: f64 = members.iter().map(|&h| p.eps_in(h, members.iter().copied()).ln()).sum::<f64>() + p.ln_ind[g];
            let mut with = members.clone();
            with.push(g);
            let after: f64 = with.iter().map(|&h| p.eps_in(h, with.iter().copied()).ln()).sum();
            let crosstalk_cost = p.omega * (after - before);
            let defer_cost = (1.0 - p.omega) * p.dur[g] * p.qubits[g].iter().map(|&q| p.inv_t[q]).sum::<f64>();
            if crosstalk_cost <= defer_cost {
                members.push(g);
            }
        }
        for &g in &members {
            assignment[g] = r;
            done |= 1 << g;
        }
        r += 1;
    }
    Ok(finish(gates, &p, assignment, opts))
}

/// Appends the schedule's sub-layers to `c`, full barriers between them.
/// `to_logical` maps physical qubits to circuit qubits.
pub fn emit_sublayers(c: &mut Circuit, layers: &SubLayerSet, to_logical: impl Fn(usize) -> usize) -> Result<()> {
    for (k, layer) in layers.layers.iter().enumerate() {
        if k > 0 {
            c.push_full_barrier()?;
        }
        for &(a, b) in layer {
            c.push(Gate::cx(to_logical(a), to_logical(b)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::CouplingMap;

    fn line(n: usize) -> DeviceModel {
        DeviceModel::uniform(CouplingMap::line(n), 100.0, 300.0, 0.01)
    }

    fn chain(n: usize) -> Vec<(usize, usize)> {
        (0..n - 1).map(|i| (i, i + 1)).collect()
    }

    #[test]
    fn ala_of_chain() {
        assert_eq!(ala_groups(&chain(5)), vec![vec![(0, 1), (2, 3)], vec![(1, 2), (3, 4)]]);
        assert_eq!(ala_groups(&[(0, 1), (2, 3)]), vec![vec![(0, 1), (2, 3)]]);
    }

    #[test]
    fn approximate_keeps_rotations_and_gate_multiset() {
        let mut c = Circuit::new(4);
        for q in 0..4 {
            c.push_param_rotation(GateKind::Ry, q).unwrap();
        }
        c.push_full_barrier().unwrap();
        for (a, b) in chain(4) {
            c.push_cx(a, b).unwrap();
        }
        c.push_full_barrier().unwrap();
        let a = approximate_to_ala(&c, &line(4)).unwrap();
        assert_eq!(a.count(GateKind::Cx), 3);
        assert_eq!(a.count(GateKind::Ry), 4);
        assert_eq!(sublayers_of_circuit(&a).layers, vec![vec![(0, 1), (2, 3)], vec![(1, 2)]]);
    }

    #[test]
    fn approximate_rejects_non_edge() {
        let mut c = Circuit::new(3);
        c.push_cx(0, 2).unwrap();
        assert!(matches!(approximate_to_ala(&c, &line(3)), Err(Error::Mapping(_))));
    }

    #[test]
    fn decoherence_values() {
        assert_eq!(decoherence_error(0.0, 100.0, 80.0), 0.0);
        assert!((decoherence_error(80_000.0, 100.0, 80.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let small = decoherence_error(500.0, 100.0, 100.0);
        assert!((small / 0.005 - 1.0).abs() < 0.01);
    }

    #[test]
    fn gate_error_rules() {
        let mut d = DeviceModel::uniform(CouplingMap::line(6), 100.0, 300.0, 0.01);
        let (g, h1, h2) = (Edge::new(2, 3), Edge::new(0, 1), Edge::new(4, 5));
        assert_eq!(gate_error(g, &[], &d, 1.0).unwrap(), 0.01);
        d.set_multiplier(g, h1, 1.2);
        d.set_multiplier(g, h2, 3.0);
        assert!((gate_error(g, &[h1, h2], &d, 1.0).unwrap() - 0.03).abs() < 1e-15);
        d.set_multiplier(g, h2, 0.8);
        assert_eq!(gate_error(g, &[h2], &d, 1.0).unwrap(), 0.01);
    }

    #[test]
    fn single_gate_objective() {
        // ε = 0.01, t/T = 160/100000 = 0.0016
        let d = DeviceModel::uniform(CouplingMap::line(2), 100.0, 160.0, 0.01);
        let obj = objective(&[(0, 1)], &[0], &d, &ScheduleOptions::with_omega(0.5)).unwrap();
        // both qubits contribute 0.0016
        assert!((obj - (0.5 * 0.01f64.ln() + 0.5 * 0.0032)).abs() < 1e-12);
    }

    #[test]
    fn omega_extremes_on_path() {
        let d = line(5).with_uniform_crosstalk(1.5);
        let gates: Vec<_> = ala_groups(&chain(5)).concat();
        let s0 = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(0.0)).unwrap();
        assert_eq!(s0.num_sublayers(), 2);
        // (0,1) and (3,4) are two hops apart, so only the one-hop pairs split
        let s1 = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(1.0)).unwrap();
        assert_eq!(s1.num_sublayers(), 3);
        let short: Vec<_> = ala_groups(&chain(4)).concat();
        let s1 = xtalk_schedule(&short, &line(4).with_uniform_crosstalk(1.5), &ScheduleOptions::with_omega(1.0)).unwrap();
        assert_eq!(s1.num_sublayers(), 3);
        let sm = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(0.5)).unwrap();
        assert!((2..=3).contains(&sm.num_sublayers()));
    }

    #[test]
    fn sublayers_are_disjoint_and_ordered() {
        let d = line(7).with_uniform_crosstalk(1.3);
        let gates: Vec<_> = ala_groups(&chain(7)).concat();
        for w in [0.0, 0.01, 0.5, 1.0] {
            let s = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(w)).unwrap();
            for layer in extract_sublayers(&s).layers {
                for (i, a) in layer.iter().enumerate() {
                    for b in &layer[i + 1..] {
                        assert!(Edge::new(a.0, a.1).is_disjoint(Edge::new(b.0, b.1)));
                    }
                }
            }
            for i in 0..gates.len() {
                for j in i + 1..gates.len() {
                    if !Edge::new(gates[i].0, gates[i].1).is_disjoint(Edge::new(gates[j].0, gates[j].1)) {
                        assert!(s.assignment[i] < s.assignment[j]);
                        assert!(s.start_ns[i] + 300.0 <= s.start_ns[j] + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn reschedule_is_idempotent() {
        let d = line(6).with_uniform_crosstalk(1.8);
        let gates: Vec<_> = ala_groups(&chain(6)).concat();
        let opts = ScheduleOptions::with_omega(0.5);
        let s = xtalk_schedule(&gates, &d, &opts).unwrap();
        let flat: Vec<_> = extract_sublayers(&s).layers.concat();
        let again = xtalk_schedule(&flat, &d, &opts).unwrap();
        assert_eq!(again.num_sublayers(), s.num_sublayers());
        assert!((again.objective - s.objective).abs() < 1e-12);
    }

    #[test]
    fn too_large_layer() {
        let d = line(30);
        let gates = chain(30);
        assert!(matches!(xtalk_schedule(&gates, &d, &ScheduleOptions::default()), Err(Error::ScheduleTooLarge { .. })));
        let g = greedy_schedule(&gates, &d, &ScheduleOptions::with_omega(0.0)).unwrap();
        assert_eq!(g.assignment.len(), 29);
    }

    #[test]
    fn emitted_layers_round_trip() {
        let d = line(5).with_uniform_crosstalk(2.0);
        let gates: Vec<_> = ala_groups(&chain(5)).concat();
        let s = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(0.5)).unwrap();
        let mut c = Circuit::new(5);
        emit_sublayers(&mut c, &extract_sublayers(&s), |q| q).unwrap();
        assert_eq!(sublayers_of_circuit(&c), extract_sublayers(&s));
    }
}
