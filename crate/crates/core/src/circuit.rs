//! Layered stabiliser circuits and their text form.
//!
//! A circuit is a list of layers separated by `TICK`. Each layer holds gates
//! (`H`, `CX`, `R`, `M`, `MR`) acting on disjoint qubits, followed by noise
//! channels that act after those gates. Detectors and observables refer to
//! measurement records with `rec[-k]`, which is resolved to an absolute index
//! at the point of declaration.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use crate::error::CircuitError;

pub type Qubit = u32;

/// Largest accepted qubit index in circuit text.
pub const MAX_QUBIT: Qubit = (1 << 24) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    H(Qubit),
    Cx {
        control: Qubit,
        target: Qubit,
    },
    /// Reset to |0>.
    R(Qubit),
    /// Z-basis measurement.
    M(Qubit),
    /// Z-basis measurement followed by reset.
    Mr(Qubit),
}

impl Gate {
    pub fn qubits(&self) -> impl Iterator<Item = Qubit> {
        let (a, b) = match *self {
            Gate::H(q) | Gate::R(q) | Gate::M(q) | Gate::Mr(q) => (q, None),
            Gate::Cx { control, target } => (control, Some(target)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Gate::M(_) | Gate::Mr(_))
    }

    fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::Cx { .. } => "CX",
            Gate::R(_) => "R",
            Gate::M(_) => "M",
            Gate::Mr(_) => "MR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    XError {
        p: f64,
        qubit: Qubit,
    },
    ZError {
        p: f64,
        qubit: Qubit,
    },
    Depolarize1 {
        p: f64,
        qubit: Qubit,
    },
    /// Two-qubit depolarising channel. The pair must be a CX of the same
    /// layer (either orientation) or two qubits idle in that layer.
    Depolarize2 {
        p: f64,
        a: Qubit,
        b: Qubit,
    },
    /// Classical flip of the measurement of `qubit` in the same layer.
    MeasFlip {
        p: f64,
        qubit: Qubit,
    },
}

impl Noise {
    pub fn probability(&self) -> f64 {
        match *self {
            Noise::XError { p, .. }
            | Noise::ZError { p, .. }
            | Noise::Depolarize1 { p, .. }
            | Noise::Depolarize2 { p, .. }
            | Noise::MeasFlip { p, .. } => p,
        }
    }

    pub fn qubits(&self) -> impl Iterator<Item = Qubit> {
        let (a, b) = match *self {
            Noise::XError { qubit, .. }
            | Noise::ZError { qubit, .. }
            | Noise::Depolarize1 { qubit, .. }
            | Noise::MeasFlip { qubit, .. } => (qubit, None),
            Noise::Depolarize2 { a, b, .. } => (a, Some(b)),
        };
        std::iter::once(a).chain(b)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    pub gates: Vec<Gate>,
    /// Measurement flips first (in gate order), then the remaining channels.
    pub noise: Vec<Noise>,
}

impl Layer {
    pub fn is_empty(&self) -> bool {
        self.gates.is_empty() && self.noise.is_empty()
    }

    /// Gate acting on `q` in this layer, if any.
    pub fn gate_on(&self, q: Qubit) -> Option<&Gate> {
        self.gates.iter().find(|g| g.qubits().any(|x| x == q))
    }

    pub fn num_measurements(&self) -> usize {
        self.gates.iter().filter(|g| g.is_measurement()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detector {
    pub id: usize,
    /// Sorted absolute measurement indices.
    pub measurements: Vec<usize>,
    /// Layer in which the detector was declared.
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observable {
    pub id: usize,
    pub measurements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub num_qubits: u32,
    pub layers: Vec<Layer>,
    pub num_measurements: usize,
    pub detectors: Vec<Detector>,
    pub observables: Vec<Observable>,
}

impl Circuit {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Absolute index of the first measurement in each layer, plus a final
    /// entry holding the total.
    pub fn record_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        for layer in &self.layers {
            out.push(acc);
            acc += layer.num_measurements();
        }
        out.push(acc);
        out
    }

    /// Absolute record index of the measurement of `qubit` in `layer`.
    pub fn record_of(&self, offsets: &[usize], layer: usize, qubit: Qubit) -> Option<usize> {
        self.layers[layer]
            .gates
            .iter()
            .filter(|g| g.is_measurement())
            .position(|g| g.qubits().next() == Some(qubit))
            .map(|i| offsets[layer] + i)
    }

    /// `(layer, qubit)` of every measurement record, in record order.
    pub fn measurement_sites(&self) -> Vec<(usize, Qubit)> {
        let mut out = Vec::with_capacity(self.num_measurements);
        for (i, layer) in self.layers.iter().enumerate() {
            for g in layer.gates.iter().filter(|g| g.is_measurement()) {
                out.push((i, g.qubits().next().unwrap()));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// XOR-fold a list of record indices into a sorted parity set.
pub(crate) fn parity_set(records: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = records.into_iter().collect();
    v.sort_unstable();
    let mut out: Vec<usize> = Vec::with_capacity(v.len());
    for r in v {
        if out.last() == Some(&r) {
            out.pop();
        } else {
            out.push(r);
        }
    }
    out
}

fn check_probability(layer: usize, p: f64) -> Result<(), CircuitError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CircuitError::BadProbability {
            layer,
            probability: p,
        })
    }
}

/// Check every layer-local invariant of one layer.
fn check_layer(index: usize, layer: &Layer, num_qubits: u32) -> Result<(), CircuitError> {
    let mut used = HashSet::new();
    for g in &layer.gates {
        for q in g.qubits() {
            if q >= num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    layer: index,
                    qubit: q,
                    num_qubits,
                });
            }
            if !used.insert(q) {
                return Err(CircuitError::LayerConflict {
                    layer: index,
                    qubit: q,
                });
            }
        }
    }
    let mut pairs: Vec<(Qubit, Qubit)> = Vec::new();
    let mut flipped = HashSet::new();
    for n in &layer.noise {
        check_probability(index, n.probability())?;
        for q in n.qubits() {
            if q >= num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    layer: index,
                    qubit: q,
                    num_qubits,
                });
            }
        }
        match *n {
            Noise::Depolarize2 { a, b, .. } => {
                if a == b {
                    return Err(CircuitError::BadNoise {
                        layer: index,
                        message: format!("DEPOLARIZE2 targets qubit {a} twice"),
                    });
                }
                let is_cx = layer.gates.iter().any(|g| {
                    matches!(*g, Gate::Cx { control, target }
                        if (control, target) == (a, b) || (control, target) == (b, a))
                });
                if !is_cx && (used.contains(&a) || used.contains(&b)) {
                    return Err(CircuitError::BadNoise {
                        layer: index,
                        message: format!(
                            "DEPOLARIZE2 {a} {b} is neither a CX pair of this layer nor an idle pair"
                        ),
                    });
                }
                if !pairs.contains(&(a, b)) {
                    if pairs
                        .iter()
                        .any(|&(x, y)| x == a || x == b || y == a || y == b)
                    {
                        return Err(CircuitError::BadNoise {
                            layer: index,
                            message: format!("DEPOLARIZE2 {a} {b} overlaps another pair"),
                        });
                    }
                    pairs.push((a, b));
                }
            }
            Noise::MeasFlip { qubit, .. } => {
                let measured = layer
                    .gate_on(qubit)
                    .map(Gate::is_measurement)
                    .unwrap_or(false);
                if !measured {
                    return Err(CircuitError::DanglingMeasFlip {
                        layer: index,
                        qubit,
                    });
                }
                if !flipped.insert(qubit) {
                    return Err(CircuitError::BadNoise {
                        layer: index,
                        message: format!("measurement of qubit {qubit} has two flip channels"),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Check all circuit invariants, returning the first violation found.
pub fn validate_layers(c: &Circuit) -> Result<(), CircuitError> {
    for (i, layer) in c.layers.iter().enumerate() {
        check_layer(i, layer, c.num_qubits)?;
    }
    let offsets = c.record_offsets();
    let total = *offsets.last().unwrap();
    if total != c.num_measurements {
        return Err(CircuitError::MeasurementCount {
            declared: c.num_measurements,
            actual: total,
        });
    }
    let mut last_layer = 0;
    for (index, det) in c.detectors.iter().enumerate() {
        if det.id != index || det.layer < last_layer || det.layer >= c.layers.len().max(1) {
            return Err(CircuitError::BadId {
                what: "detector",
                index,
                id: det.id,
            });
        }
        last_layer = det.layer;
        if det.measurements.is_empty() {
            return Err(CircuitError::EmptyMeasurementSet {
                what: "detector",
                id: det.id,
            });
        }
        let available = offsets.get(det.layer + 1).copied().unwrap_or(0);
        if let Some(&record) = det.measurements.iter().find(|&&m| m >= available) {
            return Err(CircuitError::UnresolvedRecord {
                what: "detector",
                id: det.id,
                record,
                available,
            });
        }
    }
    for (index, obs) in c.observables.iter().enumerate() {
        if obs.id != index {
            return Err(CircuitError::BadId {
                what: "observable",
                index,
                id: obs.id,
            });
        }
        if let Some(&record) = obs.measurements.iter().find(|&&m| m >= total) {
            return Err(CircuitError::UnresolvedRecord {
                what: "observable",
                id: obs.id,
                record,
                available: total,
            });
        }
    }
    Ok(())
}

/// Programmatic construction of a [`Circuit`], one layer at a time.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    num_qubits: u32,
    layers: Vec<Layer>,
    gates: Vec<Gate>,
    flips: Vec<Noise>,
    noise: Vec<Noise>,
    num_measurements: usize,
    detectors: Vec<Detector>,
    observables: Vec<Option<Vec<usize>>>,
}

impl CircuitBuilder {
    pub fn new(num_qubits: u32) -> Self {
        Self {
            num_qubits,
            layers: Vec::new(),
            gates: Vec::new(),
            flips: Vec::new(),
            noise: Vec::new(),
            num_measurements: 0,
            detectors: Vec::new(),
            observables: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn num_measurements(&self) -> usize {
        self.num_measurements
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    /// Index of the layer currently being filled.
    pub fn current_layer(&self) -> usize {
        self.layers.len()
    }

    pub fn gate(&mut self, g: Gate) -> &mut Self {
        self.gates.push(g);
        self
    }

    pub fn h(&mut self, q: Qubit) -> &mut Self {
        self.gate(Gate::H(q))
    }

    pub fn cx(&mut self, control: Qubit, target: Qubit) -> &mut Self {
        self.gate(Gate::Cx { control, target })
    }

    pub fn reset(&mut self, q: Qubit) -> &mut Self {
        self.gate(Gate::R(q))
    }

    /// Measure `q` in the Z basis, returning its record index.
    pub fn measure(&mut self, q: Qubit, flip: Option<f64>) -> usize {
        self.record(Gate::M(q), q, flip)
    }

    pub fn measure_reset(&mut self, q: Qubit, flip: Option<f64>) -> usize {
        self.record(Gate::Mr(q), q, flip)
    }

    fn record(&mut self, g: Gate, q: Qubit, flip: Option<f64>) -> usize {
        self.gates.push(g);
        if let Some(p) = flip {
            self.flips.push(Noise::MeasFlip { p, qubit: q });
        }
        self.num_measurements += 1;
        self.num_measurements - 1
    }

    pub fn noise(&mut self, n: Noise) -> &mut Self {
        self.noise.push(n);
        self
    }

    pub fn tick(&mut self) -> &mut Self {
        let mut noise = std::mem::take(&mut self.flips);
        noise.append(&mut self.noise);
        self.layers.push(Layer {
            gates: std::mem::take(&mut self.gates),
            noise,
        });
        self
    }

    /// Declare a detector over absolute record indices (parity semantics).
    pub fn detector(&mut self, records: impl IntoIterator<Item = usize>) -> usize {
        let id = self.detectors.len();
        self.detectors.push(Detector {
            id,
            measurements: parity_set(records),
            layer: self.layers.len(),
        });
        id
    }

    pub fn observable_include(&mut self, id: usize, records: impl IntoIterator<Item = usize>) {
        if self.observables.len() <= id {
            self.observables.resize(id + 1, None);
        }
        let entry = self.observables[id].get_or_insert_with(Vec::new);
        let merged = parity_set(entry.iter().copied().chain(records));
        *entry = merged;
    }

    fn pending(&self) -> bool {
        !self.gates.is_empty() || !self.flips.is_empty() || !self.noise.is_empty()
    }

    /// Closed layers so far.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Close the current layer and validate. Trailing empty layers are
    /// dropped; annotations after the last layer attach to it.
    pub fn finish(mut self) -> Result<Circuit, CircuitError> {
        if self.pending() {
            self.tick();
        }
        while self.layers.last().is_some_and(Layer::is_empty) {
            self.layers.pop();
        }
        let last = self.layers.len().saturating_sub(1);
        for d in &mut self.detectors {
            d.layer = d.layer.min(last);
        }
        let mut observables = Vec::with_capacity(self.observables.len());
        for (id, o) in self.observables.into_iter().enumerate() {
            match o {
                Some(measurements) => observables.push(Observable { id, measurements }),
                None => return Err(CircuitError::SparseObservables { missing: id }),
            }
        }
        let c = Circuit {
            num_qubits: self.num_qubits,
            layers: self.layers,
            num_measurements: self.num_measurements,
            detectors: self.detectors,
            observables,
        };
        validate_layers(&c)?;
        Ok(c)
    }
}

// ---------------------------------------------------------------------------
// Text form

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    out
}

struct Parser {
    line: usize,
    builder: CircuitBuilder,
    max_qubit: Option<Qubit>,
    gate_qubits: HashSet<Qubit>,
    noisy_qubits: HashSet<Qubit>,
    pairs: Vec<(Qubit, Qubit)>,
}

const UNSUPPORTED: &[&str] = &[
    "X",
    "Y",
    "Z",
    "I",
    "S",
    "S_DAG",
    "SQRT_X",
    "SQRT_X_DAG",
    "SQRT_Y",
    "SQRT_Y_DAG",
    "SQRT_Z",
    "SQRT_Z_DAG",
    "H_XY",
    "H_YZ",
    "CZ",
    "CY",
    "CNOT",
    "ZCX",
    "SWAP",
    "ISWAP",
    "ISWAP_DAG",
    "XCX",
    "XCZ",
    "YCZ",
    "MX",
    "MY",
    "MZ",
    "RX",
    "RY",
    "RZ",
    "MRX",
    "MRY",
    "MRZ",
    "MPP",
    "C_XYZ",
    "C_ZYX",
    "Y_ERROR",
    "PAULI_CHANNEL_1",
    "PAULI_CHANNEL_2",
    "E",
    "ELSE_CORRELATED_ERROR",
    "CORRELATED_ERROR",
    "REPEAT",
    "QUBIT_COORDS",
    "SHIFT_COORDS",
    "MPAD",
    "HERALDED_ERASE",
];

impl Parser {
    fn err(&self, column: usize, message: impl Into<String>) -> CircuitError {
        CircuitError::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn qubit(&mut self, tok: &Token<'_>) -> Result<Qubit, CircuitError> {
        let q: u64 = tok.text.parse().map_err(|_| {
            self.err(
                tok.column,
                format!("expected a qubit index, found '{}'", tok.text),
            )
        })?;
        if q > MAX_QUBIT as u64 {
            return Err(self.err(
                tok.column,
                format!("qubit {q} is out of range (max {MAX_QUBIT})"),
            ));
        }
        let q = q as Qubit;
        self.max_qubit = Some(self.max_qubit.map_or(q, |m| m.max(q)));
        Ok(q)
    }

    fn record(&self, tok: &Token<'_>) -> Result<usize, CircuitError> {
        let inner = tok
            .text
            .strip_prefix("rec[-")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| {
                self.err(
                    tok.column,
                    format!("expected rec[-k], found '{}'", tok.text),
                )
            })?;
        let k: usize =
            inner.parse().ok().filter(|&k| k > 0).ok_or_else(|| {
                self.err(tok.column, format!("bad record offset in '{}'", tok.text))
            })?;
        let available = self.builder.num_measurements();
        if k > available {
            return Err(self.err(
                tok.column,
                format!(
                    "unresolved record reference {}: only {available} measurements so far",
                    tok.text
                ),
            ));
        }
        Ok(available - k)
    }

    fn use_gate_qubit(&mut self, q: Qubit, column: usize) -> Result<(), CircuitError> {
        if self.noisy_qubits.contains(&q) {
            return Err(self.err(
                column,
                format!("gate on qubit {q} follows noise on it in the same layer; noise acts after a layer's gates (insert TICK)"),
            ));
        }
        if !self.gate_qubits.insert(q) {
            return Err(self.err(
                column,
                format!("qubit {q} is already used by a gate in this layer"),
            ));
        }
        Ok(())
    }

    fn probability(
        &self,
        arg: Option<&str>,
        column: usize,
        name: &str,
    ) -> Result<f64, CircuitError> {
        let a =
            arg.ok_or_else(|| self.err(column, format!("{name} needs a probability argument")))?;
        let p: f64 = a
            .trim()
            .parse()
            .map_err(|_| self.err(column, format!("bad probability '{a}'")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(self.err(column, format!("probability {p} is outside [0, 1]")));
        }
        Ok(p)
    }

    fn tick(&mut self) {
        self.builder.tick();
        self.gate_qubits.clear();
        self.noisy_qubits.clear();
        self.pairs.clear();
    }

    fn instruction(&mut self, toks: &[Token<'_>]) -> Result<(), CircuitError> {
        let head = &toks[0];
        let (name, arg) = match head.text.find('(') {
            Some(i) => {
                let rest = &head.text[i + 1..];
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| self.err(head.column, "unterminated argument list"))?;
                (&head.text[..i], Some(inner))
            }
            None => (head.text, None),
        };
        let targets = &toks[1..];
        let no_arg = |p: &Parser| -> Result<(), CircuitError> {
            match arg {
                Some(_) => Err(p.err(head.column, format!("{name} takes no argument"))),
                None => Ok(()),
            }
        };
        let need_targets = |p: &Parser| -> Result<(), CircuitError> {
            if targets.is_empty() {
                Err(p.err(head.column, format!("{name} needs at least one target")))
            } else {
                Ok(())
            }
        };
        match name {
            "TICK" => {
                no_arg(self)?;
                if let Some(t) = targets.first() {
                    return Err(self.err(t.column, "TICK takes no targets"));
                }
                self.tick();
            }
            "H" | "R" => {
                no_arg(self)?;
                need_targets(self)?;
                for t in targets {
                    let q = self.qubit(t)?;
                    self.use_gate_qubit(q, t.column)?;
                    self.builder
                        .gate(if name == "H" { Gate::H(q) } else { Gate::R(q) });
                }
            }
            "M" | "MR" => {
                let flip = match arg {
                    Some(_) => Some(self.probability(arg, head.column, name)?),
                    None => None,
                };
                need_targets(self)?;
                for t in targets {
                    let q = self.qubit(t)?;
                    self.use_gate_qubit(q, t.column)?;
                    if name == "M" {
                        self.builder.measure(q, flip);
                    } else {
                        self.builder.measure_reset(q, flip);
                    }
                }
            }
            "CX" => {
                no_arg(self)?;
                need_targets(self)?;
                if targets.len() % 2 != 0 {
                    return Err(self.err(head.column, "CX needs an even number of targets"));
                }
                for pair in targets.chunks(2) {
                    let c = self.qubit(&pair[0])?;
                    let t = self.qubit(&pair[1])?;
                    if c == t {
                        return Err(self.err(
                            pair[1].column,
                            format!("CX control and target are both {c}"),
                        ));
                    }
                    self.use_gate_qubit(c, pair[0].column)?;
                    self.use_gate_qubit(t, pair[1].column)?;
                    self.builder.cx(c, t);
                }
            }
            "X_ERROR" | "Z_ERROR" | "DEPOLARIZE1" => {
                let p = self.probability(arg, head.column, name)?;
                need_targets(self)?;
                for t in targets {
                    let qubit = self.qubit(t)?;
                    self.noisy_qubits.insert(qubit);
                    self.builder.noise(match name {
                        "X_ERROR" => Noise::XError { p, qubit },
                        "Z_ERROR" => Noise::ZError { p, qubit },
                        _ => Noise::Depolarize1 { p, qubit },
                    });
                }
            }
            "DEPOLARIZE2" => {
                let p = self.probability(arg, head.column, name)?;
                need_targets(self)?;
                if targets.len() % 2 != 0 {
                    return Err(
                        self.err(head.column, "DEPOLARIZE2 needs an even number of targets")
                    );
                }
                for pair in targets.chunks(2) {
                    let a = self.qubit(&pair[0])?;
                    let b = self.qubit(&pair[1])?;
                    if a == b {
                        return Err(self.err(
                            pair[1].column,
                            format!("DEPOLARIZE2 targets qubit {a} twice"),
                        ));
                    }
                    let cx = self.builder.gates.iter().any(|g| {
                        matches!(*g, Gate::Cx { control, target }
                            if (control, target) == (a, b) || (control, target) == (b, a))
                    });
                    if !cx && (self.gate_qubits.contains(&a) || self.gate_qubits.contains(&b)) {
                        return Err(self.err(
                            pair[0].column,
                            format!("DEPOLARIZE2 {a} {b} is neither a CX pair of this layer nor an idle pair"),
                        ));
                    }
                    if !self.pairs.contains(&(a, b)) {
                        if self
                            .pairs
                            .iter()
                            .any(|&(x, y)| x == a || x == b || y == a || y == b)
                        {
                            return Err(self.err(
                                pair[0].column,
                                format!("DEPOLARIZE2 {a} {b} overlaps another pair"),
                            ));
                        }
                        self.pairs.push((a, b));
                    }
                    self.noisy_qubits.insert(a);
                    self.noisy_qubits.insert(b);
                    self.builder.noise(Noise::Depolarize2 { p, a, b });
                }
            }
            "DETECTOR" => {
                if arg.is_some() {
                    return Err(self.err(head.column, "coordinate annotations are not supported"));
                }
                need_targets(self)?;
                let records = targets
                    .iter()
                    .map(|t| self.record(t))
                    .collect::<Result<Vec<_>, _>>()?;
                let set = parity_set(records);
                if set.is_empty() {
                    return Err(self.err(head.column, "detector measurement set cancels to empty"));
                }
                self.builder.detector(set);
            }
            "OBSERVABLE_INCLUDE" => {
                let a = arg.ok_or_else(|| {
                    self.err(head.column, "OBSERVABLE_INCLUDE needs an observable index")
                })?;
                let id: usize = a
                    .trim()
                    .parse()
                    .map_err(|_| self.err(head.column, format!("bad observable index '{a}'")))?;
                let records = targets
                    .iter()
                    .map(|t| self.record(t))
                    .collect::<Result<Vec<_>, _>>()?;
                self.builder.observable_include(id, records);
            }
            other if UNSUPPORTED.contains(&other) => {
                return Err(self.err(
                    head.column,
                    format!("unsupported instruction '{other}' (supported gates: H, CX, R, M, MR)"),
                ));
            }
            other => return Err(self.err(head.column, format!("unknown instruction '{other}'"))),
        }
        Ok(())
    }
}

/// Parse circuit text into a validated [`Circuit`].
///
/// The qubit count is one more than the largest qubit index referenced.
pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut p = Parser {
        line: 0,
        builder: CircuitBuilder::new(0),
        max_qubit: None,
        gate_qubits: HashSet::new(),
        noisy_qubits: HashSet::new(),
        pairs: Vec::new(),
    };
    let mut seen_instruction = false;
    for (i, raw) in text.lines().enumerate() {
        p.line = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokenize(line);
        if toks.is_empty() {
            continue;
        }
        seen_instruction = true;
        p.instruction(&toks)?;
    }
    let mut builder = p.builder;
    builder.num_qubits = p.max_qubit.map_or(0, |q| q + 1);
    if !seen_instruction {
        return Ok(Circuit::default());
    }
    builder.finish()
}

impl std::str::FromStr for Circuit {
    type Err = CircuitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_circuit(s)
    }
}

fn write_grouped<T, K: PartialEq>(
    out: &mut String,
    items: &[T],
    key: impl Fn(&T) -> K,
    head: impl Fn(&T) -> String,
    targets: impl Fn(&T) -> Vec<Qubit>,
) {
    let mut i = 0;
    while i < items.len() {
        let k = key(&items[i]);
        let mut j = i + 1;
        while j < items.len() && key(&items[j]) == k {
            j += 1;
        }
        out.push_str(&head(&items[i]));
        for item in &items[i..j] {
            for q in targets(item) {
                let _ = write!(out, " {q}");
            }
        }
        out.push('\n');
        i = j;
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let offsets = self.record_offsets();
        let mut out = String::new();
        let mut detectors = self.detectors.iter().peekable();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                out.push_str("TICK\n");
            }
            let flip_of = |q: Qubit| {
                layer.noise.iter().find_map(|n| match *n {
                    Noise::MeasFlip { p, qubit } if qubit == q => Some(p),
                    _ => None,
                })
            };
            // Key: gate kind plus flip probability bits for measurements.
            let key = |g: &Gate| {
                let flip = match *g {
                    Gate::M(q) | Gate::Mr(q) => flip_of(q).map(f64::to_bits),
                    _ => None,
                };
                (g.name(), flip)
            };
            let head = |g: &Gate| match *g {
                Gate::M(q) | Gate::Mr(q) => match flip_of(q) {
                    Some(p) => format!("{}({p})", g.name()),
                    None => g.name().to_string(),
                },
                _ => g.name().to_string(),
            };
            write_grouped(&mut out, &layer.gates, key, head, |g| g.qubits().collect());
            let channels: Vec<Noise> = layer
                .noise
                .iter()
                .copied()
                .filter(|n| !matches!(n, Noise::MeasFlip { .. }))
                .collect();
            let name = |n: &Noise| match n {
                Noise::XError { .. } => "X_ERROR",
                Noise::ZError { .. } => "Z_ERROR",
                Noise::Depolarize1 { .. } => "DEPOLARIZE1",
                Noise::Depolarize2 { .. } => "DEPOLARIZE2",
                Noise::MeasFlip { .. } => unreachable!(),
            };
            write_grouped(
                &mut out,
                &channels,
                |n| (name(n), n.probability().to_bits()),
                |n| format!("{}({})", name(n), n.probability()),
                |n| n.qubits().collect(),
            );
            let end = offsets[i + 1];
            while let Some(d) = detectors.next_if(|d| d.layer == i) {
                out.push_str("DETECTOR");
                for &m in &d.measurements {
                    let _ = write!(out, " rec[-{}]", end - m);
                }
                out.push('\n');
            }
            if i + 1 == self.layers.len() {
                for o in &self.observables {
                    let _ = write!(out, "OBSERVABLE_INCLUDE({})", o.id);
                    for &m in &o.measurements {
                        let _ = write!(out, " rec[-{}]", end - m);
                    }
                    out.push('\n');
                }
            }
        }
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let c = parse_circuit("R 0\nTICK\nM 0\nDETECTOR rec[-1]").unwrap();
        assert_eq!(c.num_qubits, 1);
        assert_eq!(c.num_layers(), 2);
        assert_eq!(c.num_measurements, 1);
        assert_eq!(c.detectors.len(), 1);
        assert_eq!(c.detectors[0].measurements, vec![0]);
    }

    #[test]
    fn unresolved_record() {
        let err = parse_circuit("M 0\nDETECTOR rec[-2]").unwrap_err();
        match err {
            CircuitError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("unresolved"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn record_resolution_is_positional() {
        let c = parse_circuit("M 0\nDETECTOR rec[-1]\nTICK\nM 0\nDETECTOR rec[-1]").unwrap();
        assert_eq!(c.detectors[0].measurements, vec![0]);
        assert_eq!(c.detectors[1].measurements, vec![1]);
    }

    #[test]
    fn conflict_in_layer() {
        let err = parse_circuit("CX 0 1\nH 0").unwrap_err();
        assert!(
            matches!(
                err,
                CircuitError::Parse {
                    line: 2,
                    column: 3,
                    ..
                }
            ),
            "{err:?}"
        );

        let c = Circuit {
            num_qubits: 2,
            layers: vec![Layer {
                gates: vec![
                    Gate::Cx {
                        control: 0,
                        target: 1,
                    },
                    Gate::H(0),
                ],
                noise: vec![],
            }],
            ..Default::default()
        };
        assert_eq!(
            validate_layers(&c),
            Err(CircuitError::LayerConflict { layer: 0, qubit: 0 })
        );
    }

    #[test]
    fn empty_circuit() {
        let c = parse_circuit("# nothing here\n\n").unwrap();
        assert_eq!(c, Circuit::default());
        assert!(validate_layers(&c).is_ok());
        assert_eq!(c.to_text(), "");
    }

    #[test]
    fn unsupported_gates_are_named() {
        let err = parse_circuit("S 0").unwrap_err();
        assert!(
            err.to_string().contains("unsupported instruction 'S'"),
            "{err}"
        );
        let err = parse_circuit("FOO 0").unwrap_err();
        assert!(err.to_string().contains("unknown instruction"), "{err}");
    }

    #[test]
    fn noise_before_gate_rejected() {
        let err = parse_circuit("X_ERROR(0.1) 0\nM 0").unwrap_err();
        assert!(err.to_string().contains("insert TICK"), "{err}");
    }

    #[test]
    fn bad_probability() {
        assert!(parse_circuit("X_ERROR(1.5) 0").is_err());
        assert!(parse_circuit("X_ERROR(nan) 0").is_err());
        assert!(parse_circuit("M(-0.1) 0").is_err());
    }

    #[test]
    fn depolarize2_pairing() {
        assert!(parse_circuit("CX 0 1\nDEPOLARIZE2(0.1) 0 1").is_ok());
        assert!(parse_circuit("CX 0 1\nDEPOLARIZE2(0.1) 1 0").is_ok());
        assert!(parse_circuit("DEPOLARIZE2(0.1) 2 3").is_ok());
        assert!(parse_circuit("CX 0 1\nDEPOLARIZE2(0.1) 0 2").is_err());
        assert!(parse_circuit("DEPOLARIZE2(0.1) 0 1 1 2").is_err());
    }

    #[test]
    fn meas_flip_attaches_to_measurement() {
        let c = parse_circuit("M(0.01) 0 1\nMR 2").unwrap();
        assert_eq!(
            c.layers[0].noise,
            vec![
                Noise::MeasFlip { p: 0.01, qubit: 0 },
                Noise::MeasFlip { p: 0.01, qubit: 1 }
            ]
        );
        assert_eq!(c.num_measurements, 3);
    }

    #[test]
    fn observables_must_be_dense() {
        let err = parse_circuit("M 0\nOBSERVABLE_INCLUDE(1) rec[-1]").unwrap_err();
        assert_eq!(err, CircuitError::SparseObservables { missing: 0 });
        let c =
            parse_circuit("M 0 1\nOBSERVABLE_INCLUDE(0) rec[-1]\nOBSERVABLE_INCLUDE(0) rec[-2]")
                .unwrap();
        assert_eq!(c.observables[0].measurements, vec![0, 1]);
    }

    #[test]
    fn round_trip_preserves_structure() {
        let src = "R 0 1 2\nX_ERROR(0.001) 0 1 2\nTICK\nCX 0 1\nDEPOLARIZE2(0.01) 0 1\nDEPOLARIZE1(0.002) 2\nTICK\nTICK\nM(0.003) 1\nMR 2\nDETECTOR rec[-2]\nTICK\nM 0 1\nDETECTOR rec[-1] rec[-4]\nOBSERVABLE_INCLUDE(0) rec[-2]\n";
        let c = parse_circuit(src).unwrap();
        assert_eq!(c.num_layers(), 5);
        let again = parse_circuit(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn trailing_tick_is_dropped() {
        let c = parse_circuit("H 0\nTICK\n").unwrap();
        assert_eq!(c.num_layers(), 1);
    }
}
