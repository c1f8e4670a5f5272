//! Gate-level circuit IR over the fixed gate set {rx, ry, rz, cx, barrier}.
//!
//! Rotations carry either a bound angle (radians) or a symbolic slot into the
//! circuit's parameter vector. A circuit may carry a layout mapping its qubit
//! indices onto device qubits; without one, circuit qubit `q` is device qubit `q`.
//!
//! Text form, one instruction per line (`#` starts a comment):
//!
//! ```text
//! qubits 3
//! layout 0 1 4
//! ry 0 p0
//! rz 1 1.5707963267948966
//! cx 0 1
//! barrier 0 1 2
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cx,
    Barrier,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Cx => "cx",
            GateKind::Barrier => "barrier",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rx" => Ok(GateKind::Rx),
            "ry" => Ok(GateKind::Ry),
            "rz" => Ok(GateKind::Rz),
            "cx" => Ok(GateKind::Cx),
            "barrier" => Ok(GateKind::Barrier),
            other => Err(format!("unknown gate '{other}'")),
        }
    }
}

/// Rotation argument: a bound angle or a slot in the parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Angle(f64),
    Slot { slot: usize },
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Angle(a) => write!(f, "{a}"),
            Param::Slot { slot } => write!(f, "p{slot}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    #[serde(rename = "name")]
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<Param>,
}

impl Gate {
    pub fn rotation(kind: GateKind, qubit: usize, param: Param) -> Self {
        debug_assert!(kind.is_rotation());
        Gate { kind, qubits: vec![qubit], param: Some(param) }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::Cx, qubits: vec![control, target], param: None }
    }

    pub fn barrier(qubits: impl IntoIterator<Item = usize>) -> Self {
        Gate { kind: GateKind::Barrier, qubits: qubits.into_iter().collect(), param: None }
    }

    /// Bound angle, if the gate is a rotation with a concrete argument.
    pub fn angle(&self) -> Option<f64> {
        match self.param {
            Some(Param::Angle(a)) => Some(a),
            _ => None,
        }
    }

    pub fn slot(&self) -> Option<usize> {
        match self.param {
            Some(Param::Slot { slot }) => Some(slot),
            _ => None,
        }
    }

    fn check(&self, num_qubits: usize) -> std::result::Result<(), String> {
        let distinct: BTreeSet<_> = self.qubits.iter().collect();
        if distinct.len() != self.qubits.len() {
            return Err(format!("{} has duplicate qubits", self.kind));
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= num_qubits) {
            return Err(format!("qubit {q} out of range for {num_qubits}-qubit circuit"));
        }
        match self.kind {
            GateKind::Cx if self.qubits.len() != 2 => {
                Err(format!("cx takes 2 qubits, got {}", self.qubits.len()))
            }
            GateKind::Barrier if self.qubits.is_empty() => Err("barrier needs at least one qubit".into()),
            k if k.is_rotation() && self.qubits.len() != 1 => {
                Err(format!("{k} takes 1 qubit, got {}", self.qubits.len()))
            }
            k if k.is_rotation() => match self.param {
                None => Err(format!("{k} is missing its angle")),
                Some(Param::Angle(a)) if !a.is_finite() => Err(format!("{k} angle is not finite")),
                _ => Ok(()),
            },
            _ if self.param.is_some() => Err(format!("{} takes no parameter", self.kind)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for q in &self.qubits {
            write!(f, " {q}")?;
        }
        if let Some(p) = &self.param {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<Gate>,
    num_params: usize,
    layout: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawCircuit {
    num_qubits: usize,
    ops: Vec<Gate>,
    num_params: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<Vec<usize>>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        let mut c = Circuit::from_ops(raw.num_qubits, raw.ops)?;
        if c.num_params != raw.num_params {
            return Err(Error::InvalidCircuit(format!(
                "num_params is {} but ops reference {} slots",
                raw.num_params, c.num_params
            )));
        }
        if let Some(layout) = raw.layout {
            c = c.with_layout(layout)?;
        }
        Ok(c)
    }
}

impl From<Circuit> for RawCircuit {
    fn from(c: Circuit) -> Self {
        RawCircuit { num_qubits: c.num_qubits, ops: c.ops, num_params: c.num_params, layout: c.layout }
    }
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit { num_qubits, ops: Vec::new(), num_params: 0, layout: None }
    }

    /// Builds a circuit from an op list, checking every gate and that the
    /// symbolic slots form the contiguous range `0..num_params`.
    pub fn from_ops(num_qubits: usize, ops: Vec<Gate>) -> Result<Self> {
        let mut slots = BTreeSet::new();
        for (i, g) in ops.iter().enumerate() {
            g.check(num_qubits).map_err(|m| Error::InvalidCircuit(format!("op {i}: {m}")))?;
            if let Some(s) = g.slot() {
                slots.insert(s);
            }
        }
        let num_params = slots.last().map_or(0, |s| s + 1);
        if slots.len() != num_params {
            let missing = (0..num_params).find(|s| !slots.contains(s)).unwrap();
            return Err(Error::InvalidCircuit(format!("parameter slot p{missing} is never used")));
        }
        Ok(Circuit { num_qubits, ops, num_params, layout: None })
    }

    pub fn with_layout(mut self, layout: Vec<usize>) -> Result<Self> {
        if layout.len() != self.num_qubits {
            return Err(Error::InvalidCircuit(format!(
                "layout has {} entries for {} qubits",
                layout.len(),
                self.num_qubits
            )));
        }
        if layout.iter().collect::<BTreeSet<_>>().len() != layout.len() {
            return Err(Error::InvalidCircuit("layout maps two qubits to the same device qubit".into()));
        }
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[Gate] {
        &self.ops
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn layout(&self) -> Option<&[usize]> {
        self.layout.as_deref()
    }

    /// Device qubit backing circuit qubit `q`.
    pub fn physical(&self, q: usize) -> usize {
        self.layout.as_ref().map_or(q, |l| l[q])
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Appends a gate. Symbolic slots may only extend the parameter vector by one.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.num_qubits).map_err(Error::InvalidCircuit)?;
        if let Some(s) = gate.slot() {
            if s > self.num_params {
                return Err(Error::InvalidCircuit(format!(
                    "slot p{s} skips p{}; slots must be introduced in order",
                    self.num_params
                )));
            }
            self.num_params = self.num_params.max(s + 1);
        }
        self.ops.push(gate);
        Ok(())
    }

    /// Appends a rotation on a fresh parameter slot and returns the slot.
    pub fn push_param_rotation(&mut self, kind: GateKind, qubit: usize) -> Result<usize> {
        let slot = self.num_params;
        self.push(Gate::rotation(kind, qubit, Param::Slot { slot }))?;
        Ok(slot)
    }

    pub fn push_rotation(&mut self, kind: GateKind, qubit: usize, angle: f64) -> Result<()> {
        self.push(Gate::rotation(kind, qubit, Param::Angle(angle)))
    }

    pub fn push_cx(&mut self, control: usize, target: usize) -> Result<()> {
        self.push(Gate::cx(control, target))
    }

    pub fn push_barrier(&mut self, qubits: impl IntoIterator<Item = usize>) -> Result<()> {
        self.push(Gate::barrier(qubits))
    }

    /// Barrier across every qubit of the circuit.
    pub fn push_full_barrier(&mut self) -> Result<()> {
        self.push(Gate::barrier(0..self.num_qubits))
    }

    /// Appends all ops of a bound circuit of the same width.
    pub fn extend_bound(&mut self, other: &Circuit) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::InvalidCircuit("width mismatch while appending".into()));
        }
        if other.num_params != 0 {
            return Err(Error::InvalidCircuit("appended circuit must be fully bound".into()));
        }
        self.ops.extend(other.ops.iter().cloned());
        Ok(())
    }

    /// Replaces every symbolic slot with its angle from `theta`.
    pub fn bind(&self, theta: &[f64]) -> Result<Circuit> {
        if theta.len() != self.num_params {
            return Err(Error::ParamLength { expected: self.num_params, got: theta.len() });
        }
        let ops = self
            .ops
            .iter()
            .map(|g| match g.param {
                Some(Param::Slot { slot }) => Gate { param: Some(Param::Angle(theta[slot])), ..g.clone() },
                _ => g.clone(),
            })
            .collect();
        Ok(Circuit { num_qubits: self.num_qubits, ops, num_params: 0, layout: self.layout.clone() })
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.ops.iter().filter(|g| g.kind == kind).count()
    }

    /// Greedy ASAP layering of the non-barrier ops.
    ///
    /// A barrier lifts every qubit it covers to the latest frontier among them,
    /// so nothing after it lands in a layer at or before an op it fences.
    pub fn dag_layers(&self) -> DagLayering {
        let mut frontier = vec![0usize; self.num_qubits];
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (i, g) in self.ops.iter().enumerate() {
            let level = g.qubits.iter().map(|&q| frontier[q]).max().unwrap_or(0);
            if g.kind == GateKind::Barrier {
                for &q in &g.qubits {
                    frontier[q] = level;
                }
                continue;
            }
            if layers.len() <= level {
                layers.resize_with(level + 1, Vec::new);
            }
            layers[level].push(i);
            for &q in &g.qubits {
                frontier[q] = level + 1;
            }
        }
        DagLayering { layers }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.num_qubits);
        if let Some(layout) = &self.layout {
            out.push_str("layout");
            for q in layout {
                out.push_str(&format!(" {q}"));
            }
            out.push('\n');
        }
        for g in &self.ops {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the text form. Without a `qubits` header the width is inferred
    /// from the largest qubit index used.
    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut declared: Option<usize> = None;
        let mut layout: Option<(usize, Vec<usize>)> = None;
        let mut ops: Vec<(usize, Gate)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap();
            let rest: Vec<&str> = toks.collect();
            let parse_usize = |t: &str| t.parse::<usize>().map_err(|_| perr(format!("bad qubit index '{t}'")));
            match head {
                "qubits" => {
                    if declared.is_some() || !ops.is_empty() {
                        return Err(perr("'qubits' must appear once, before any gate".into()));
                    }
                    if rest.len() != 1 {
                        return Err(perr("'qubits' takes one count".into()));
                    }
                    declared = Some(parse_usize(rest[0])?);
                }
                "layout" => {
                    let l = rest.iter().map(|t| parse_usize(t)).collect::<Result<Vec<_>>>()?;
                    layout = Some((line_no, l));
                }
                name => {
                    let kind: GateKind = name.parse().map_err(perr)?;
                    let (qtoks, param) = if kind.is_rotation() {
                        if rest.len() != 2 {
                            return Err(perr(format!("{kind} expects '<qubit> <angle|p<k>>'")));
                        }
                        (&rest[..1], Some(parse_param(rest[1]).map_err(perr)?))
                    } else {
                        (&rest[..], None)
                    };
                    let qubits = qtoks.iter().map(|t| parse_usize(t)).collect::<Result<Vec<_>>>()?;
                    let gate = Gate { kind, qubits, param };
                    // width-independent checks now; range check once the width is known
                    gate.check(usize::MAX).map_err(perr)?;
                    ops.push((line_no, gate));
                }
            }
        }

        let num_qubits = match declared {
            Some(n) => n,
            None => ops.iter().flat_map(|(_, g)| g.qubits.iter()).max().map_or(0, |m| m + 1),
        };
        for (line, g) in &ops {
            g.check(num_qubits).map_err(|msg| Error::Parse { line: *line, msg })?;
        }
        let mut c = Circuit::from_ops(num_qubits, ops.into_iter().map(|(_, g)| g).collect())?;
        if let Some((line, l)) = layout {
            c = c.with_layout(l).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        Ok(c)
    }
}

fn parse_param(tok: &str) -> std::result::Result<Param, String> {
    if let Some(rest) = tok.strip_prefix('p') {
        return rest.parse().map(|slot| Param::Slot { slot }).map_err(|_| format!("bad parameter slot '{tok}'"));
    }
    match tok.parse::<f64>() {
        Ok(a) if a.is_finite() => Ok(Param::Angle(a)),
        _ => Err(format!("bad angle '{tok}'")),
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Circuit::from_text(s)
    }
}

/// Ordered partition of a circuit's non-barrier ops into parallel layers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagLayering {
    pub layers: Vec<Vec<usize>>,
}

impl DagLayering {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer index of every op; `None` for barriers.
    pub fn layer_of(&self, num_ops: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_ops];
        for (l, ops) in self.layers.iter().enumerate() {
            for &i in ops {
                out[i] = Some(l);
            }
        }
        out
    }
}
