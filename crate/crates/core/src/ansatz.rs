//! The five PQC families: base1 (sequential cx chain), base2 (ALA groups)
//! and high/medium/low crosstalk-scheduled variants.
//!
//! Every family shares the rotation structure, ry then rz per qubit, and
//! fences each entangling block with full barriers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateKind};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::scheduler::{
    ala_groups, emit_sublayers, extract_sublayers, greedy_schedule, xtalk_schedule, Schedule, ScheduleOptions, SubLayerSet,
    MAX_EXACT_GATES,
};

pub const DEFAULT_BASE_LAYERS: usize = 2;
pub const MAX_BASE_LAYERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    High,
    Medium,
    Low,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::High, Level::Medium, Level::Low];

    /// Scheduler weight: high tolerance 0, medium 0.5, low 1.
    pub fn omega(self) -> f64 {
        match self {
            Level::High => 0.0,
            Level::Medium => 0.5,
            Level::Low => 1.0,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::High => "high",
            Level::Medium => "medium",
            Level::Low => "low",
        })
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Level::High),
            "medium" => Ok(Level::Medium),
            "low" => Ok(Level::Low),
            _ => Err(Error::InvalidArgument(format!("unknown crosstalk level '{s}' (expected high, medium or low)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Family {
    Base1,
    Base2,
    Xtalk(Level),
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Base1, Family::Base2, Family::Xtalk(Level::High), Family::Xtalk(Level::Medium), Family::Xtalk(Level::Low)];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Base1 => f.write_str("base1"),
            Family::Base2 => f.write_str("base2"),
            Family::Xtalk(l) => write!(f, "{l}_xtalk"),
        }
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for Family {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "base1" => Ok(Family::Base1),
            "base2" => Ok(Family::Base2),
            _ => match s.strip_suffix("_xtalk") {
                Some(level) => Ok(Family::Xtalk(level.parse()?)),
                None => Err(Error::InvalidArgument(format!(
                    "unknown family '{s}' (expected base1, base2, high_xtalk, medium_xtalk or low_xtalk)"
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PqcConfig {
    pub family: Family,
    pub n: usize,
    pub layers: usize,
    /// Leading base1 layers of an xtalk circuit.
    pub m: usize,
    pub threshold: f64,
    /// Use the greedy scheduler when the layer exceeds the exact solver bound.
    pub greedy_fallback: bool,
}

impl PqcConfig {
    pub fn new(family: Family, n: usize, layers: usize) -> Self {
        PqcConfig { family, n, layers, m: DEFAULT_BASE_LAYERS.min(layers), threshold: 1.0, greedy_fallback: false }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }
}

/// A built ansatz: the circuit (logical qubits, layout onto a device path)
/// and, for xtalk families, the scheduled entangling sub-layers.
#[derive(Clone, Debug)]
pub struct Ansatz {
    pub family: Family,
    pub circuit: Circuit,
    pub path: Vec<usize>,
    pub schedule: Option<Schedule>,
    pub sublayers: Option<SubLayerSet>,
}

impl Ansatz {
    /// Number of sub-layers in a scheduled entangling layer.
    pub fn r(&self) -> Option<usize> {
        self.sublayers.as_ref().map(|s| s.r)
    }
}

fn device_path(n: usize, device: &DeviceModel) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidArgument("ansatz needs at least one qubit".into()));
    }
    if n > device.num_qubits() {
        return Err(Error::Mapping(format!("{n} qubits requested but the device has {}", device.num_qubits())));
    }
    device.coupling.find_path(n).ok_or_else(|| Error::Mapping(format!("device has no line of {n} connected qubits")))
}

fn rotation_layer(c: &mut Circuit) -> Result<()> {
    for q in 0..c.num_qubits() {
        c.push_param_rotation(GateKind::Ry, q)?;
        c.push_param_rotation(GateKind::Rz, q)?;
    }
    Ok(())
}

fn chain(n: usize) -> Vec<(usize, usize)> {
    (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

/// Appends one repetition: rotations, barrier, entangling sub-layers, barrier.
fn push_layer(c: &mut Circuit, entangler: &SubLayerSet) -> Result<()> {
    rotation_layer(c)?;
    if entangler.r == 0 {
        return Ok(());
    }
    c.push_full_barrier()?;
    emit_sublayers(c, entangler, |q| q)?;
    c.push_full_barrier()
}

fn sequential(n: usize) -> SubLayerSet {
    // one "sub-layer" holding the whole chain in program order, no inner barriers
    let layers: Vec<Vec<(usize, usize)>> = if n > 1 { vec![chain(n)] } else { vec![] };
    SubLayerSet { r: layers.len(), layers }
}

fn assemble(n: usize, path: Vec<usize>, blocks: &[&SubLayerSet]) -> Result<Circuit> {
    let mut c = Circuit::new(n);
    for b in blocks {
        push_layer(&mut c, b)?;
    }
    rotation_layer(&mut c)?;
    c.with_layout(path)
}

/// `layers` repetitions of [rotations, sequential cx chain] and a final
/// rotation layer; `2n(L+1)` parameters.
pub fn build_base1(n: usize, layers: usize, device: &DeviceModel) -> Result<Circuit> {
    let path = device_path(n, device)?;
    let block = sequential(n);
    assemble(n, path, &vec![&block; layers])
}

/// ALA grouping of the chain: logical gates in group order.
pub fn ala_layer(n: usize) -> SubLayerSet {
    let layers = ala_groups(&chain(n));
    SubLayerSet { r: layers.len(), layers }
}

/// base1 with every chain re-emitted as barrier-delimited ALA groups.
pub fn build_base2(n: usize, layers: usize, device: &DeviceModel) -> Result<Circuit> {
    let path = device_path(n, device)?;
    let block = ala_layer(n);
    assemble(n, path, &vec![&block; layers])
}

/// Schedules the ALA layer of an n-qubit line at `opts`, on physical qubits.
pub fn schedule_layer(n: usize, device: &DeviceModel, opts: &ScheduleOptions, greedy_fallback: bool) -> Result<(Vec<usize>, Schedule)> {
    let path = device_path(n, device)?;
    let gates: Vec<(usize, usize)> = ala_layer(n).layers.concat().into_iter().map(|(a, b)| (path[a], path[b])).collect();
    let schedule = if gates.len() > MAX_EXACT_GATES && greedy_fallback {
        greedy_schedule(&gates, device, opts)?
    } else {
        xtalk_schedule(&gates, device, opts)?
    };
    Ok((path, schedule))
}

/// `m` base1 layers, then `L - m` repetitions of rotations plus the
/// scheduled sub-layers, then a final rotation layer.
pub fn build_xtalk(cfg: &PqcConfig, device: &DeviceModel) -> Result<Ansatz> {
    let Family::Xtalk(level) = cfg.family else {
        return Err(Error::InvalidArgument(format!("{} is not a crosstalk-scheduled family", cfg.family)));
    };
    if cfg.m > cfg.layers {
        return Err(Error::InvalidArgument(format!("m = {} exceeds L = {}", cfg.m, cfg.layers)));
    }
    if cfg.m > MAX_BASE_LAYERS {
        return Err(Error::InvalidArgument(format!("m = {} exceeds the limit of {MAX_BASE_LAYERS} base layers", cfg.m)));
    }
    let opts = ScheduleOptions { omega: level.omega(), threshold: cfg.threshold, paper_literal_sign: false };
    let (path, schedule) = schedule_layer(cfg.n, device, &opts, cfg.greedy_fallback)?;
    let pos = |q: usize| path.iter().position(|&p| p == q).expect("scheduled qubit lies on the path");
    let physical = extract_sublayers(&schedule);
    let logical = SubLayerSet {
        r: physical.r,
        layers: physical.layers.iter().map(|l| l.iter().map(|&(a, b)| (pos(a), pos(b))).collect()).collect(),
    };
    let base = sequential(cfg.n);
    let blocks: Vec<&SubLayerSet> =
        (0..cfg.layers).map(|k| if k < cfg.m { &base } else { &logical }).collect();
    let circuit = assemble(cfg.n, path.clone(), &blocks)?;
    Ok(Ansatz { family: cfg.family, circuit, path, schedule: Some(schedule), sublayers: Some(logical) })
}

/// Any family from its configuration.
pub fn build(cfg: &PqcConfig, device: &DeviceModel) -> Result<Ansatz> {
    match cfg.family {
        Family::Base1 | Family::Base2 => {
            let circuit = if cfg.family == Family::Base1 {
                build_base1(cfg.n, cfg.layers, device)?
            } else {
                build_base2(cfg.n, cfg.layers, device)?
            };
            let path = circuit.layout().map(<[usize]>::to_vec).unwrap_or_default();
            Ok(Ansatz { family: cfg.family, circuit, path, schedule: None, sublayers: None })
        }
        Family::Xtalk(_) => build_xtalk(cfg, device),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::CouplingMap;
    use crate::scheduler::sublayers_of_circuit;
    use crate::simulator::{unitaries_equal_up_to_phase, unitary_columns};

    fn kinds(c: &Circuit) -> Vec<GateKind> {
        c.ops().iter().map(|g| g.kind).filter(|k| *k != GateKind::Barrier).collect()
    }

    #[test]
    fn base1_two_qubits() {
        let d = DeviceModel::default_device();
        let c = build_base1(2, 1, &d).unwrap();
        use GateKind::*;
        assert_eq!(kinds(&c), vec![Ry, Rz, Ry, Rz, Cx, Ry, Rz, Ry, Rz]);
        assert_eq!(c.num_params(), 8);
        assert_eq!(c.layout(), Some(&[0, 1][..]));
    }

    #[test]
    fn base1_counts() {
        let d = DeviceModel::default_device();
        assert_eq!(build_base1(4, 1, &d).unwrap().count(GateKind::Cx), 3);
        let flat = build_base1(4, 0, &d).unwrap();
        assert_eq!(flat.count(GateKind::Cx), 0);
        assert_eq!(flat.num_params(), 8);
        for n in 1..7 {
            for l in 0..4 {
                assert_eq!(build_base1(n, l, &d).unwrap().num_params(), 2 * n * (l + 1));
            }
        }
    }

    #[test]
    fn base1_without_path() {
        let d = DeviceModel::uniform(CouplingMap::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap(), 100.0, 300.0, 0.01);
        assert!(matches!(build_base1(4, 1, &d), Err(Error::Mapping(_))));
    }

    #[test]
    fn base2_groups() {
        let d = DeviceModel::default_device();
        let c = build_base2(4, 1, &d).unwrap();
        let logical = Circuit::from_ops(4, c.ops().to_vec()).unwrap();
        assert_eq!(sublayers_of_circuit(&logical).layers, vec![vec![(0, 1), (2, 3)], vec![(1, 2)]]);
        assert_eq!(kinds(&build_base2(2, 2, &d).unwrap()), kinds(&build_base1(2, 2, &d).unwrap()));
        assert_eq!(build_base2(6, 3, &d).unwrap().count(GateKind::Cx), 15);
    }

    #[test]
    fn level_extremes() {
        let d = DeviceModel::default_device().with_uniform_crosstalk(1.5);
        let low = build_xtalk(&PqcConfig::new(Family::Xtalk(Level::Low), 4, 3), &d).unwrap();
        assert_eq!(low.r(), Some(3));
        let high = build_xtalk(&PqcConfig::new(Family::Xtalk(Level::High), 6, 3), &d).unwrap();
        assert_eq!(high.r(), Some(ala_layer(6).r));
    }

    #[test]
    fn m_equal_to_layers_is_base1() {
        let d = DeviceModel::default_device();
        let x = build_xtalk(&PqcConfig::new(Family::Xtalk(Level::Medium), 5, 3).with_m(3), &d).unwrap();
        assert_eq!(x.circuit, build_base1(5, 3, &d).unwrap());
    }

    #[test]
    fn m_bounds() {
        let d = DeviceModel::default_device();
        assert!(build_xtalk(&PqcConfig::new(Family::Xtalk(Level::High), 4, 2).with_m(3), &d).is_err());
        assert!(build_xtalk(&PqcConfig::new(Family::Xtalk(Level::High), 4, 8).with_m(6), &d).is_err());
    }

    #[test]
    fn high_matches_base2_without_crosstalk() {
        let d = DeviceModel::default_device().without_crosstalk();
        for n in 2..=4 {
            let x = build_xtalk(&PqcConfig::new(Family::Xtalk(Level::High), n, 2).with_m(0), &d).unwrap();
            let b = build_base2(n, 2, &d).unwrap();
            let theta: Vec<f64> = (0..b.num_params()).map(|i| 0.3 + 0.17 * i as f64).collect();
            let u = unitary_columns(&x.circuit.bind(&theta).unwrap()).unwrap();
            let v = unitary_columns(&b.bind(&theta).unwrap()).unwrap();
            assert!(unitaries_equal_up_to_phase(&u, &v, 1e-10));
        }
    }

    #[test]
    fn families_share_parameters_and_cx_multiset() {
        let d = DeviceModel::default_device();
        for n in [3, 5, 7] {
            let mut counts = Vec::new();
            for f in Family::ALL {
                let a = build(&PqcConfig::new(f, n, 3), &d).unwrap();
                let mut cx: Vec<(usize, usize)> =
                    a.circuit.ops().iter().filter(|g| g.kind == GateKind::Cx).map(|g| (g.qubits[0], g.qubits[1])).collect();
                cx.sort_unstable();
                counts.push((a.circuit.num_params(), cx));
            }
            assert!(counts.windows(2).all(|w| w[0] == w[1]), "n={n}");
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
        assert!("mid_xtalk".parse::<Family>().is_err());
    }
}
