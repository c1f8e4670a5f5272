//! Device description: coupling map, calibration and the pairwise crosstalk table.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected coupling edge, stored with the smaller qubit first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge(usize, usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn lo(self) -> usize {
        self.0
    }

    pub fn hi(self) -> usize {
        self.1
    }

    pub fn qubits(self) -> [usize; 2] {
        [self.0, self.1]
    }

    pub fn touches(self, q: usize) -> bool {
        self.0 == q || self.1 == q
    }

    pub fn is_disjoint(self, other: Edge) -> bool {
        !other.touches(self.0) && !other.touches(self.1)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

impl Serialize for Edge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0, self.1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[usize; 2]>::deserialize(d)?;
        Ok(Edge::new(a, b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingMap {
    num_qubits: usize,
    edges: BTreeSet<Edge>,
    adj: Vec<BTreeSet<usize>>,
}

impl CouplingMap {
    pub fn new(num_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut adj = vec![BTreeSet::new(); num_qubits];
        for (a, b) in edges {
            if a == b {
                return Err(Error::Device(format!("self-loop on qubit {a}")));
            }
            if a >= num_qubits || b >= num_qubits {
                return Err(Error::Device(format!("edge ({a},{b}) out of range for {num_qubits} qubits")));
            }
            set.insert(Edge::new(a, b));
            adj[a].insert(b);
            adj[b].insert(a);
        }
        Ok(CouplingMap { num_qubits, edges: set, adj })
    }

    /// Path graph 0-1-…-(n-1).
    pub fn line(n: usize) -> Self {
        CouplingMap::new(n, (1..n).map(|i| (i - 1, i))).expect("line is valid")
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&Edge::new(a, b))
    }

    pub fn neighbors(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[q].iter().copied()
    }

    pub fn is_connected(&self) -> bool {
        if self.num_qubits == 0 {
            return true;
        }
        let mut seen = vec![false; self.num_qubits];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(q) = queue.pop_front() {
            for &n in &self.adj[q] {
                if !std::mem::replace(&mut seen[n], true) {
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Whether two disjoint edges sit one hop apart: some endpoint of one is
    /// adjacent to some endpoint of the other.
    pub fn is_one_hop(&self, e1: Edge, e2: Edge) -> bool {
        e1.is_disjoint(e2) && e1.qubits().iter().any(|&a| e2.qubits().iter().any(|&b| self.adj[a].contains(&b)))
    }

    /// All ordered one-hop edge pairs; both orders of every pair are present.
    pub fn one_hop_pairs(&self) -> Vec<(Edge, Edge)> {
        let mut out = Vec::new();
        for e1 in self.edges() {
            for e2 in self.edges() {
                if self.is_one_hop(e1, e2) {
                    out.push((e1, e2));
                }
            }
        }
        out
    }

    /// First simple path visiting `n` qubits, by depth-first search from the
    /// lowest qubit index with neighbours tried in ascending order.
    pub fn find_path(&self, n: usize) -> Option<Vec<usize>> {
        if n == 0 || n > self.num_qubits {
            return None;
        }
        fn dfs(map: &CouplingMap, n: usize, path: &mut Vec<usize>, used: &mut [bool]) -> bool {
            if path.len() == n {
                return true;
            }
            let last = *path.last().unwrap();
            for next in map.neighbors(last) {
                if !used[next] {
                    used[next] = true;
                    path.push(next);
                    if dfs(map, n, path, used) {
                        return true;
                    }
                    path.pop();
                    used[next] = false;
                }
            }
            false
        }
        for start in 0..self.num_qubits {
            let mut used = vec![false; self.num_qubits];
            used[start] = true;
            let mut path = vec![start];
            if dfs(self, n, &mut path, &mut used) {
                return Some(path);
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCal {
    pub t1_us: f64,
    pub t2_us: f64,
}

impl QubitCal {
    /// Coherence limit min(T1, T2) in nanoseconds.
    pub fn t_min_ns(&self) -> f64 {
        self.t1_us.min(self.t2_us) * 1e3
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCal {
    pub name: String,
    pub qubits: Vec<usize>,
    pub duration_ns: f64,
    pub epc: f64,
}

/// Conditional error rates keyed by ordered edge pair: `E(g1 | g2)` is the
/// error of the gate on `g1` while the gate on `g2` runs concurrently.
///
/// Independent rates are attached so multipliers can be read off directly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrosstalkTable {
    conditional: BTreeMap<(Edge, Edge), f64>,
    independent: BTreeMap<Edge, f64>,
}

impl CrosstalkTable {
    pub fn new(independent: BTreeMap<Edge, f64>) -> Self {
        CrosstalkTable { conditional: BTreeMap::new(), independent }
    }

    pub fn insert(&mut self, g1: Edge, g2: Edge, conditional_epc: f64) {
        self.conditional.insert((g1, g2), conditional_epc);
    }

    pub fn remove(&mut self, g1: Edge, g2: Edge) -> Option<f64> {
        self.conditional.remove(&(g1, g2))
    }

    pub fn clear(&mut self) {
        self.conditional.clear();
    }

    pub fn conditional(&self, g1: Edge, g2: Edge) -> Option<f64> {
        self.conditional.get(&(g1, g2)).copied()
    }

    pub fn independent(&self, e: Edge) -> Option<f64> {
        self.independent.get(&e).copied()
    }

    pub fn set_independent(&mut self, e: Edge, epc: f64) {
        self.independent.insert(e, epc);
    }

    pub fn entries(&self) -> impl Iterator<Item = ((Edge, Edge), f64)> + '_ {
        self.conditional.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.conditional.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditional.is_empty()
    }

    /// Ratio `E(g1|g2) / E(g1)`; 1 when the pair has no entry.
    pub fn multiplier(&self, g1: Edge, g2: Edge) -> f64 {
        match (self.conditional(g1, g2), self.independent(g1)) {
            (Some(c), Some(i)) if i > 0.0 => c / i,
            _ => 1.0,
        }
    }

    /// Rewrites every entry so its multiplier becomes `f(g1, g2, current)`.
    pub fn map_multipliers(&mut self, mut f: impl FnMut(Edge, Edge, f64) -> f64) {
        let keys: Vec<_> = self.conditional.keys().copied().collect();
        for (g1, g2) in keys {
            let m = f(g1, g2, self.multiplier(g1, g2));
            let ind = self.independent(g1).unwrap_or(0.0);
            self.conditional.insert((g1, g2), m * ind);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    pub coupling: CouplingMap,
    pub qubit_cal: Vec<QubitCal>,
    pub gate_cal: Vec<GateCal>,
    pub xtalk: CrosstalkTable,
}

#[derive(Serialize, Deserialize)]
struct XtalkEntry {
    g1: Edge,
    g2: Edge,
    conditional_epc: f64,
}

#[derive(Serialize, Deserialize)]
struct DeviceFile {
    num_qubits: usize,
    edges: Vec<[usize; 2]>,
    qubits: Vec<QubitCal>,
    gates: Vec<GateCal>,
    #[serde(default)]
    xtalk: Vec<XtalkEntry>,
}

const DEFAULT_DEVICE_JSON: &str = include_str!("../data/guadalupe.json");

impl DeviceModel {
    /// Builds and validates a device from its parts. The crosstalk table's
    /// independent rates are refreshed from the cx calibration.
    pub fn new(
        coupling: CouplingMap,
        qubit_cal: Vec<QubitCal>,
        gate_cal: Vec<GateCal>,
        mut xtalk: CrosstalkTable,
    ) -> Result<Self> {
        let n = coupling.num_qubits();
        if qubit_cal.len() != n {
            return Err(Error::Device(format!(
                "{} qubit calibrations for {n} qubits; qubit {} uncalibrated",
                qubit_cal.len(),
                qubit_cal.len().min(n)
            )));
        }
        for (q, cal) in qubit_cal.iter().enumerate() {
            if !(cal.t1_us > 0.0 && cal.t2_us > 0.0) {
                return Err(Error::Device(format!("qubit {q} has non-positive T1/T2")));
            }
        }
        for g in &gate_cal {
            let desc = format!("{} on {:?}", g.name, g.qubits);
            if !(g.duration_ns > 0.0) {
                return Err(Error::Device(format!("{desc}: duration must be positive")));
            }
            if !(0.0..1.0).contains(&g.epc) {
                return Err(Error::Device(format!("{desc}: epc must lie in [0,1)")));
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= n) {
                return Err(Error::Device(format!("{desc}: qubit {q} out of range")));
            }
            match g.name.as_str() {
                "cx" => {
                    if g.qubits.len() != 2 || !coupling.has_edge(g.qubits[0], g.qubits[1]) {
                        return Err(Error::Device(format!("{desc}: cx calibrated off the coupling map")));
                    }
                }
                "rx" | "ry" | "rz" => {
                    if g.qubits.len() != 1 {
                        return Err(Error::Device(format!("{desc}: rotation takes one qubit")));
                    }
                }
                other => return Err(Error::Device(format!("unknown gate '{other}' in calibration"))),
            }
        }
        for e in coupling.edges() {
            let epc = gate_cal
                .iter()
                .find(|g| g.name == "cx" && Edge::new(g.qubits[0], g.qubits[1]) == e)
                .map(|g| g.epc)
                .ok_or_else(|| Error::Device(format!("edge {e} uncalibrated")))?;
            xtalk.set_independent(e, epc);
        }
        for ((g1, g2), c) in xtalk.entries() {
            if !coupling.has_edge(g1.lo(), g1.hi()) || !coupling.has_edge(g2.lo(), g2.hi()) {
                return Err(Error::Device(format!("crosstalk entry {g1}|{g2} names a non-edge")));
            }
            if !coupling.is_one_hop(g1, g2) {
                return Err(Error::Device(format!("crosstalk entry {g1}|{g2} is not a one-hop disjoint pair")));
            }
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Device(format!("crosstalk entry {g1}|{g2}: conditional epc must lie in (0,1)")));
            }
        }
        Ok(DeviceModel { coupling, qubit_cal, gate_cal, xtalk })
    }

    /// Shipped 16-qubit heavy-hex device with representative calibration.
    pub fn default_device() -> Self {
        Self::from_json(DEFAULT_DEVICE_JSON).expect("shipped device is valid")
    }

    /// Device over an arbitrary coupling map with uniform calibration and no crosstalk.
    pub fn uniform(coupling: CouplingMap, t_us: f64, cx_ns: f64, cx_epc: f64) -> Self {
        let n = coupling.num_qubits();
        let mut gates: Vec<GateCal> = coupling
            .edges()
            .map(|e| GateCal { name: "cx".into(), qubits: e.qubits().to_vec(), duration_ns: cx_ns, epc: cx_epc })
            .collect();
        for q in 0..n {
            for name in ["rx", "ry", "rz"] {
                gates.push(GateCal { name: name.into(), qubits: vec![q], duration_ns: 35.5, epc: 3e-4 });
            }
        }
        let cal = vec![QubitCal { t1_us: t_us, t2_us: t_us }; n];
        DeviceModel::new(coupling, cal, gates, CrosstalkTable::default()).expect("uniform device is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DeviceFile = serde_json::from_str(text)?;
        let coupling = CouplingMap::new(file.num_qubits, file.edges.iter().map(|e| (e[0], e[1])))?;
        let mut table = CrosstalkTable::default();
        for x in file.xtalk {
            table.insert(x.g1, x.g2, x.conditional_epc);
        }
        DeviceModel::new(coupling, file.qubits, file.gates, table)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DeviceFile {
            num_qubits: self.num_qubits(),
            edges: self.coupling.edges().map(|e| e.qubits()).collect(),
            qubits: self.qubit_cal.clone(),
            gates: self.gate_cal.clone(),
            xtalk: self
                .xtalk
                .entries()
                .map(|((g1, g2), conditional_epc)| XtalkEntry { g1, g2, conditional_epc })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.coupling.num_qubits()
    }

    fn find_gate(&self, name: &str, qubits: &[usize]) -> Option<&GateCal> {
        self.gate_cal.iter().find(|g| {
            g.name == name
                && match (name, qubits) {
                    ("cx", [a, b]) => g.qubits.len() == 2 && Edge::new(g.qubits[0], g.qubits[1]) == Edge::new(*a, *b),
                    _ => g.qubits == qubits,
                }
        })
    }

    /// Calibrated duration of a gate on device qubits.
    pub fn gate_duration(&self, name: &str, qubits: &[usize]) -> Result<f64> {
        self.find_gate(name, qubits)
            .map(|g| g.duration_ns)
            .ok_or_else(|| Error::Mapping(format!("{name} on {qubits:?} is not calibrated on this device")))
    }

    pub fn cx_epc(&self, e: Edge) -> Result<f64> {
        self.find_gate("cx", &e.qubits())
            .map(|g| g.epc)
            .ok_or_else(|| Error::Mapping(format!("cx on {e} is not calibrated on this device")))
    }

    pub fn cx_duration(&self, e: Edge) -> Result<f64> {
        self.gate_duration("cx", &e.qubits())
    }

    pub fn set_cx_epc(&mut self, e: Edge, epc: f64) {
        for g in &mut self.gate_cal {
            if g.name == "cx" && Edge::new(g.qubits[0], g.qubits[1]) == e {
                g.epc = epc;
            }
        }
        self.xtalk.set_independent(e, epc);
    }

    /// `E(g1|g2)/E(g1)`, or 1 without an entry.
    pub fn multiplier(&self, g1: Edge, g2: Edge) -> f64 {
        self.xtalk.multiplier(g1, g2)
    }

    /// Sets the conditional rate of `g1` under `g2` to `m` times its independent rate.
    pub fn set_multiplier(&mut self, g1: Edge, g2: Edge, m: f64) {
        let ind = self.xtalk.independent(g1).unwrap_or(0.0);
        self.xtalk.insert(g1, g2, m * ind);
    }

    /// Copy of this device with every one-hop pair at multiplier `m`.
    pub fn with_uniform_crosstalk(&self, m: f64) -> Self {
        let mut d = self.clone();
        d.xtalk.clear();
        for (g1, g2) in self.coupling.one_hop_pairs() {
            d.set_multiplier(g1, g2, m);
        }
        d
    }

    pub fn without_crosstalk(&self) -> Self {
        let mut d = self.clone();
        d.xtalk.clear();
        d
    }
}
