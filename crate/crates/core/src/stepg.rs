//! Lowering of a [`Circuit`] to the space-time error propagation graph.
//!
//! Boundary `i` sits after the gates of layer `i`. Each boundary has `k = αn`
//! slots: X/Z nodes for every qubit, then (from L1) a Y node per qubit and
//! correlated two-qubit nodes per `DEPOLARIZE2` pair attached to the boundary.
//! Measurement results live in an appended leaf region, node `l·k + j` for
//! record `j`.

use std::fmt::{self, Write as _};

use crate::circuit::{Circuit, Gate, Noise, Qubit};
use crate::error::LowerError;

/// Marks an absent successor or component.
pub const SENTINEL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CorrelationLevel {
    #[default]
    L0,
    L1,
    L2,
}

impl CorrelationLevel {
    pub const ALL: [CorrelationLevel; 3] = [Self::L0, Self::L1, Self::L2];

    /// Nodes per qubit and boundary.
    pub fn alpha(self) -> u32 {
        match self {
            Self::L0 => 2,
            Self::L1 => 4,
            Self::L2 => 7,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    pub fn index(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for CorrelationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.index())
    }
}

impl std::str::FromStr for CorrelationLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix(['L', 'l']).unwrap_or(t);
        digits
            .parse::<u8>()
            .ok()
            .and_then(Self::from_index)
            .ok_or_else(|| format!("unknown correlation level '{s}' (expected 0, 1 or 2)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliTerm {
    pub qubit: Qubit,
    pub pauli: Pauli,
}

/// Two-qubit Pauli with a dedicated correlated slot. Order matches slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Correlated {
    Xz,
    Zx,
    Xy,
    Yx,
    Yy,
    Yz,
    Zy,
}

impl Correlated {
    pub const ALL: [Correlated; 7] = [
        Self::Xz,
        Self::Zx,
        Self::Xy,
        Self::Yx,
        Self::Yy,
        Self::Yz,
        Self::Zy,
    ];

    pub fn paulis(self) -> (Pauli, Pauli) {
        use Pauli::*;
        match self {
            Self::Xz => (X, Z),
            Self::Zx => (Z, X),
            Self::Xy => (X, Y),
            Self::Yx => (Y, X),
            Self::Yy => (Y, Y),
            Self::Yz => (Y, Z),
            Self::Zy => (Z, Y),
        }
    }

    fn from_paulis(a: Pauli, b: Pauli) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.paulis() == (a, b))
    }

    pub fn level(self) -> CorrelationLevel {
        match self {
            Self::Xz | Self::Zx => CorrelationLevel::L1,
            _ => CorrelationLevel::L2,
        }
    }
}

/// What a slot of a boundary represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    X(Qubit),
    Z(Qubit),
    Y(Qubit),
    /// Correlated node of the `pair`-th two-qubit channel pair.
    Pair {
        pair: u32,
        kind: Correlated,
    },
    Unused,
}

/// Slot arithmetic for one boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotLayout {
    pub level: CorrelationLevel,
    pub n: u32,
    pub k: u32,
}

impl SlotLayout {
    pub fn new(level: CorrelationLevel, n: u32) -> Self {
        Self {
            level,
            n,
            k: level.alpha() * n,
        }
    }

    pub fn x(&self, q: Qubit) -> u32 {
        2 * q
    }

    pub fn z(&self, q: Qubit) -> u32 {
        2 * q + 1
    }

    pub fn y(&self, q: Qubit) -> Option<u32> {
        (self.level >= CorrelationLevel::L1).then(|| 2 * self.n + q)
    }

    /// Largest number of correlated pairs a boundary can hold.
    pub fn max_pairs(&self) -> u32 {
        self.n / 2
    }

    pub fn pair(&self, pair: u32, kind: Correlated) -> Option<u32> {
        if kind.level() > self.level || pair >= self.max_pairs() {
            return None;
        }
        Some(match kind {
            Correlated::Xz => 3 * self.n + 2 * pair,
            Correlated::Zx => 3 * self.n + 2 * pair + 1,
            other => 4 * self.n + 5 * pair + (other as u32 - Correlated::Xy as u32),
        })
    }

    pub fn describe(&self, slot: u32) -> SlotKind {
        let n = self.n;
        if slot >= self.k {
            return SlotKind::Unused;
        }
        if slot < 2 * n {
            return if slot % 2 == 0 {
                SlotKind::X(slot / 2)
            } else {
                SlotKind::Z(slot / 2)
            };
        }
        if slot < 3 * n {
            return SlotKind::Y(slot - 2 * n);
        }
        if slot < 4 * n {
            let off = slot - 3 * n;
            let pair = off / 2;
            if pair >= self.max_pairs() {
                return SlotKind::Unused;
            }
            let kind = if off % 2 == 0 {
                Correlated::Xz
            } else {
                Correlated::Zx
            };
            return SlotKind::Pair { pair, kind };
        }
        let off = slot - 4 * n;
        let pair = off / 5;
        if pair >= self.max_pairs() {
            return SlotKind::Unused;
        }
        SlotKind::Pair {
            pair,
            kind: Correlated::ALL[2 + (off % 5) as usize],
        }
    }

    /// Slot ranges of the three sub-passes: base, level 1, level 2.
    pub fn sub_passes(&self) -> [std::ops::Range<u32>; 3] {
        let n = self.n;
        match self.level {
            CorrelationLevel::L0 => [0..2 * n, 2 * n..2 * n, 2 * n..2 * n],
            CorrelationLevel::L1 => [0..2 * n, 2 * n..4 * n, 4 * n..4 * n],
            CorrelationLevel::L2 => [0..2 * n, 2 * n..4 * n, 4 * n..7 * n],
        }
    }
}

/// One error component of a noise channel, before placement in the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseComponent {
    Pauli {
        first: PauliTerm,
        second: Option<PauliTerm>,
    },
    /// Flip of the measurement of this qubit in the channel's layer.
    Flip(Qubit),
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

fn retained(a: Pauli, b: Pauli, level: CorrelationLevel) -> bool {
    use Pauli::*;
    let needed = match (a, b) {
        (I, X) | (I, Z) | (X, I) | (Z, I) | (X, X) | (Z, Z) => CorrelationLevel::L0,
        (I, Y) | (Y, I) => CorrelationLevel::L1,
        (a, b) => match Correlated::from_paulis(a, b) {
            Some(c) => c.level(),
            None => return false,
        },
    };
    needed <= level
}

/// Split a channel into independent components retained at `level`.
pub fn decompose_noise(op: &Noise, level: CorrelationLevel) -> Vec<(NoiseComponent, f64)> {
    let single = |qubit, pauli| NoiseComponent::Pauli {
        first: PauliTerm { qubit, pauli },
        second: None,
    };
    match *op {
        Noise::XError { p, qubit } => vec![(single(qubit, Pauli::X), p)],
        Noise::ZError { p, qubit } => vec![(single(qubit, Pauli::Z), p)],
        Noise::MeasFlip { p, qubit } => vec![(NoiseComponent::Flip(qubit), p)],
        Noise::Depolarize1 { p, qubit } => {
            let mut out = vec![
                (single(qubit, Pauli::X), p / 3.0),
                (single(qubit, Pauli::Z), p / 3.0),
            ];
            if level >= CorrelationLevel::L1 {
                out.push((single(qubit, Pauli::Y), p / 3.0));
            }
            out
        }
        Noise::Depolarize2 { p, a, b } => {
            let mut out = Vec::with_capacity(15);
            for pa in PAULIS {
                for pb in PAULIS {
                    if (pa, pb) == (Pauli::I, Pauli::I) || !retained(pa, pb, level) {
                        continue;
                    }
                    let comp = match (pa, pb) {
                        (Pauli::I, _) => single(b, pb),
                        (_, Pauli::I) => single(a, pa),
                        _ => NoiseComponent::Pauli {
                            first: PauliTerm {
                                qubit: a,
                                pauli: pa,
                            },
                            second: Some(PauliTerm {
                                qubit: b,
                                pauli: pb,
                            }),
                        },
                    };
                    out.push((comp, p / 15.0));
                }
            }
            out
        }
    }
}

/// A placed physical fault.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultKind {
    /// Pauli error at `boundary`, i.e. right after the gates of that layer.
    Pauli {
        boundary: usize,
        first: PauliTerm,
        second: Option<PauliTerm>,
    },
    MeasurementFlip {
        record: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fault {
    pub kind: FaultKind,
    pub probability: f64,
}

/// Every fault the circuit's noise contributes at `level`, in circuit order.
pub fn fault_inventory(c: &Circuit, level: CorrelationLevel) -> Vec<Fault> {
    let offsets = c.record_offsets();
    let mut out = Vec::new();
    for (i, layer) in c.layers.iter().enumerate() {
        for op in &layer.noise {
            for (comp, probability) in decompose_noise(op, level) {
                let kind = match comp {
                    NoiseComponent::Pauli { first, second } => FaultKind::Pauli {
                        boundary: i,
                        first,
                        second,
                    },
                    NoiseComponent::Flip(q) => FaultKind::MeasurementFlip {
                        record: c
                            .record_of(&offsets, i, q)
                            .expect("validated circuit has a measurement for every flip"),
                    },
                };
                out.push(Fault { kind, probability });
            }
        }
    }
    out
}

/// Error source: XOR of up to two node classes, with a Bernoulli rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSource {
    /// Second entry is [`SENTINEL`] for single-component sources.
    pub nodes: [u32; 2],
    pub probability: f64,
}

impl ErrorSource {
    pub fn components(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().copied().filter(|&n| n != SENTINEL)
    }
}

#[inline]
pub fn pack(s0: u32, s1: u32) -> u64 {
    s0 as u64 | ((s1 as u64) << 32)
}

#[inline]
pub fn unpack(e: u64) -> (u32, u32) {
    (e as u32, (e >> 32) as u32)
}

/// The compiler IR: layered DAG, leaf region and error sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepg {
    pub layout: SlotLayout,
    /// Number of boundaries (one per layer).
    pub l: u32,
    /// `l·k` packed successor pairs.
    pub successors: Vec<u64>,
    pub num_measurements: u32,
    pub sources: Vec<ErrorSource>,
    pub detectors: Vec<Vec<usize>>,
    pub observables: Vec<Vec<usize>>,
}

impl Stepg {
    pub fn k(&self) -> u32 {
        self.layout.k
    }

    pub fn node(&self, boundary: u32, slot: u32) -> u32 {
        boundary * self.layout.k + slot
    }

    pub fn leaf(&self, record: usize) -> u32 {
        self.l * self.layout.k + record as u32
    }

    pub fn num_graph_nodes(&self) -> usize {
        self.successors.len()
    }

    /// Graph nodes plus leaves.
    pub fn num_rows(&self) -> usize {
        self.successors.len() + self.num_measurements as usize
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn num_observables(&self) -> usize {
        self.observables.len()
    }

    pub fn successors_of(&self, node: u32) -> (u32, u32) {
        match self.successors.get(node as usize) {
            Some(&e) => unpack(e),
            None => (SENTINEL, SENTINEL),
        }
    }

    /// Text edge list `node -> s0 s1`, `-` for an absent successor.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let show = |s: u32| {
            if s == SENTINEL {
                "-".to_string()
            } else {
                s.to_string()
            }
        };
        for (u, &e) in self.successors.iter().enumerate() {
            let (a, b) = unpack(e);
            let _ = writeln!(out, "{u} -> {} {}", show(a), show(b));
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Role {
    Idle,
    H,
    Control(Qubit),
    Target(Qubit),
    Reset,
    Measure(u32),
    MeasureReset(u32),
}

/// Lower `c` to its STEPG at the given correlation level.
pub fn lower(c: &Circuit, level: CorrelationLevel) -> Result<Stepg, LowerError> {
    let n = c.num_qubits;
    let l = c.layers.len() as u64;
    let k = level.alpha() as u64 * n as u64;
    let required = l * k + c.num_measurements as u64;
    if required >= SENTINEL as u64 || k > u32::MAX as u64 {
        return Err(LowerError::IndexSpaceExceeded { required });
    }
    let layout = SlotLayout::new(level, n);
    let (l, k) = (l as u32, k as u32);
    let leaf_base = l * k;
    let offsets = c.record_offsets();

    // Per-layer role of each qubit.
    let roles: Vec<Vec<Role>> = c
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let mut r = vec![Role::Idle; n as usize];
            let mut rec = offsets[i] as u32;
            for g in &layer.gates {
                match *g {
                    Gate::H(q) => r[q as usize] = Role::H,
                    Gate::Cx { control, target } => {
                        r[control as usize] = Role::Control(target);
                        r[target as usize] = Role::Target(control);
                    }
                    Gate::R(q) => r[q as usize] = Role::Reset,
                    Gate::M(q) => {
                        r[q as usize] = Role::Measure(leaf_base + rec);
                        rec += 1;
                    }
                    Gate::Mr(q) => {
                        r[q as usize] = Role::MeasureReset(leaf_base + rec);
                        rec += 1;
                    }
                }
            }
            r
        })
        .collect();

    // Distinct DEPOLARIZE2 pairs per boundary, in order of appearance.
    let pairs: Vec<Vec<(Qubit, Qubit)>> = c
        .layers
        .iter()
        .map(|layer| {
            let mut v: Vec<(Qubit, Qubit)> = Vec::new();
            for op in &layer.noise {
                if let Noise::Depolarize2 { a, b, .. } = *op {
                    if !v.contains(&(a, b)) {
                        v.push((a, b));
                    }
                }
            }
            v
        })
        .collect();

    let mut successors = vec![pack(SENTINEL, SENTINEL); (l * k) as usize];
    for i in 0..l {
        let base = i * k;
        if i + 1 < l {
            let next = base + k;
            for q in 0..n {
                let (x, z) = (next + layout.x(q), next + layout.z(q));
                let (sx, sz) = match roles[i as usize + 1][q as usize] {
                    Role::Idle => ((x, SENTINEL), (z, SENTINEL)),
                    Role::H => ((z, SENTINEL), (x, SENTINEL)),
                    Role::Control(t) => ((x, next + layout.x(t)), (z, SENTINEL)),
                    Role::Target(ctl) => ((x, SENTINEL), (next + layout.z(ctl), z)),
                    Role::Reset => ((SENTINEL, SENTINEL), (SENTINEL, SENTINEL)),
                    Role::Measure(leaf) => ((leaf, x), (SENTINEL, SENTINEL)),
                    Role::MeasureReset(leaf) => ((leaf, SENTINEL), (SENTINEL, SENTINEL)),
                };
                successors[(base + layout.x(q)) as usize] = pack(sx.0, sx.1);
                successors[(base + layout.z(q)) as usize] = pack(sz.0, sz.1);
            }
        }
        if level >= CorrelationLevel::L1 {
            for q in 0..n {
                let y = layout.y(q).unwrap();
                successors[(base + y) as usize] = pack(base + layout.x(q), base + layout.z(q));
            }
            let node = |p: Pauli, q: Qubit| match p {
                Pauli::X => base + layout.x(q),
                Pauli::Z => base + layout.z(q),
                Pauli::Y => base + layout.y(q).unwrap(),
                Pauli::I => unreachable!(),
            };
            for (j, &(a, b)) in pairs[i as usize].iter().enumerate() {
                for kind in Correlated::ALL {
                    if let Some(slot) = layout.pair(j as u32, kind) {
                        let (pa, pb) = kind.paulis();
                        successors[(base + slot) as usize] = pack(node(pa, a), node(pb, b));
                    }
                }
            }
        }
    }

    let mut sources = Vec::new();
    for (i, layer) in c.layers.iter().enumerate() {
        let base = i as u32 * k;
        for op in &layer.noise {
            let pair_index = match *op {
                Noise::Depolarize2 { a, b, .. } => {
                    pairs[i].iter().position(|&p| p == (a, b)).map(|j| j as u32)
                }
                _ => None,
            };
            for (comp, probability) in decompose_noise(op, level) {
                let term_node = |t: PauliTerm| match t.pauli {
                    Pauli::X => base + layout.x(t.qubit),
                    Pauli::Z => base + layout.z(t.qubit),
                    Pauli::Y => base + layout.y(t.qubit).expect("Y retained only from L1"),
                    Pauli::I => unreachable!(),
                };
                let nodes = match comp {
                    NoiseComponent::Flip(q) => {
                        let rec = c.record_of(&offsets, i, q).expect("validated flip");
                        [leaf_base + rec as u32, SENTINEL]
                    }
                    NoiseComponent::Pauli {
                        first,
                        second: None,
                    } => [term_node(first), SENTINEL],
                    NoiseComponent::Pauli {
                        first,
                        second: Some(second),
                    } => match Correlated::from_paulis(first.pauli, second.pauli) {
                        Some(kind) => {
                            let slot = layout
                                .pair(pair_index.expect("pair channel"), kind)
                                .expect("retained correlated term has a slot");
                            [base + slot, SENTINEL]
                        }
                        None => [term_node(first), term_node(second)],
                    },
                };
                sources.push(ErrorSource { nodes, probability });
            }
        }
    }

    Ok(Stepg {
        layout,
        l,
        successors,
        num_measurements: c.num_measurements as u32,
        sources,
        detectors: c.detectors.iter().map(|d| d.measurements.clone()).collect(),
        observables: c
            .observables
            .iter()
            .map(|o| o.measurements.clone())
            .collect(),
    })
}
