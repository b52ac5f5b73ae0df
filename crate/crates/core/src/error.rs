use thiserror::Error;

/// A problem found while parsing or validating a circuit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("layer {layer}: qubit {qubit} is out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange {
        layer: usize,
        qubit: u32,
        num_qubits: u32,
    },
    #[error("layer {layer}: qubit {qubit} is used by more than one gate")]
    LayerConflict { layer: usize, qubit: u32 },
    #[error("layer {layer}: probability {probability} is outside [0, 1]")]
    BadProbability { layer: usize, probability: f64 },
    #[error("layer {layer}: {message}")]
    BadNoise { layer: usize, message: String },
    #[error("{what} {id}: measurement record {record} does not exist (only {available} measurements so far)")]
    UnresolvedRecord {
        what: &'static str,
        id: usize,
        record: usize,
        available: usize,
    },
    #[error("layer {layer}: MEAS_FLIP on qubit {qubit}, which is not measured in that layer")]
    DanglingMeasFlip { layer: usize, qubit: u32 },
    #[error("circuit declares {declared} measurements but its layers contain {actual}")]
    MeasurementCount { declared: usize, actual: usize },
    #[error("{what} {index} has id {id}; ids must be dense and in declaration order")]
    BadId {
        what: &'static str,
        index: usize,
        id: usize,
    },
    #[error("{what} {id} has an empty measurement set")]
    EmptyMeasurementSet { what: &'static str, id: usize },
    #[error("observable ids are not dense: observable {missing} is never defined")]
    SparseObservables { missing: usize },
}

/// Failures of the lowering stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowerError {
    #[error("circuit needs {required} graph nodes, which exceeds the 32-bit node index space")]
    IndexSpaceExceeded { required: u64 },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Leaf(#[from] MissingLeaf),
}

/// Problems reading a detector error model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("distance {0} is odd; an Iceberg pairing needs an even number of outer data qubits")]
    OddDistance(usize),
    #[error("distance {0} is too small")]
    DistanceTooSmall(usize),
    #[error("pair ({a:?}, {b:?}) violates the layout: {reason}")]
    Violation {
        a: (usize, usize),
        b: (usize, usize),
        reason: &'static str,
    },
    #[error("qubit {0:?} was left unpaired")]
    Unpaired((usize, usize)),
    #[error("coordinate ({r}, {c}) is outside a distance-{d} lattice")]
    OutOfRange { r: usize, c: usize, d: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("logical error rate {rate} or round count {rounds} outside the valid domain")]
pub struct DomainError {
    pub rate: f64,
    pub rounds: usize,
}

/// A detector or observable names a measurement with no leaf in the graph.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("measurement record {record} has no leaf (graph has {num_measurements} measurements)")]
pub struct MissingLeaf {
    pub record: usize,
    pub num_measurements: usize,
}
