//! Reference model: push each fault forward through the circuit with a
//! Pauli frame and read off the detectors and observables it flips.
//!
//! This is quadratic in circuit size and exists to check the graph pipeline.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::circuit::{Circuit, Gate};
use crate::dem::{merge_prob, Dem, Hyperedge};
use crate::stepg::{fault_inventory, CorrelationLevel, FaultKind, Pauli, PauliTerm};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliFrame {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
    pub measurement_flips: Vec<bool>,
}

impl PauliFrame {
    pub fn new(num_qubits: usize, num_measurements: usize) -> Self {
        Self {
            x: vec![false; num_qubits],
            z: vec![false; num_qubits],
            measurement_flips: vec![false; num_measurements],
        }
    }

    fn apply(&mut self, t: PauliTerm) {
        let q = t.qubit as usize;
        match t.pauli {
            Pauli::I => {}
            Pauli::X => self.x[q] ^= true,
            Pauli::Z => self.z[q] ^= true,
            Pauli::Y => {
                self.x[q] ^= true;
                self.z[q] ^= true;
            }
        }
    }

    /// Conjugate the frame through one gate, recording into `next_record`.
    fn gate(&mut self, g: &Gate, next_record: &mut usize) {
        match *g {
            Gate::H(q) => {
                let q = q as usize;
                std::mem::swap(&mut self.x[q], &mut self.z[q]);
            }
            Gate::Cx { control, target } => {
                let (c, t) = (control as usize, target as usize);
                self.x[t] ^= self.x[c];
                self.z[c] ^= self.z[t];
            }
            Gate::R(q) => {
                self.x[q as usize] = false;
                self.z[q as usize] = false;
            }
            Gate::M(q) => {
                self.measurement_flips[*next_record] = self.x[q as usize];
                self.z[q as usize] = false;
                *next_record += 1;
            }
            Gate::Mr(q) => {
                self.measurement_flips[*next_record] = self.x[q as usize];
                self.x[q as usize] = false;
                self.z[q as usize] = false;
                *next_record += 1;
            }
        }
    }
}

/// Errors a placed fault can be checked against.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlacementError {
    #[error("boundary {boundary} does not exist ({layers} layers)")]
    Boundary { boundary: usize, layers: usize },
    #[error("qubit {qubit} is out of range")]
    Qubit { qubit: u32 },
    #[error("measurement record {record} does not exist")]
    Record { record: usize },
}

/// Detector and observable flips of one fault: (detectors, observables).
pub fn propagate_error(
    c: &Circuit,
    fault: &FaultKind,
) -> Result<(Vec<u32>, Vec<u32>), PlacementError> {
    let mut frame = PauliFrame::new(c.num_qubits as usize, c.num_measurements);
    match *fault {
        FaultKind::MeasurementFlip { record } => {
            if record >= c.num_measurements {
                return Err(PlacementError::Record { record });
            }
            frame.measurement_flips[record] = true;
        }
        FaultKind::Pauli {
            boundary,
            first,
            second,
        } => {
            if boundary >= c.layers.len() {
                return Err(PlacementError::Boundary {
                    boundary,
                    layers: c.layers.len(),
                });
            }
            for t in std::iter::once(first).chain(second) {
                if t.qubit >= c.num_qubits {
                    return Err(PlacementError::Qubit { qubit: t.qubit });
                }
                frame.apply(t);
            }
            let mut record: usize = c.layers[..=boundary]
                .iter()
                .map(|l| l.num_measurements())
                .sum();
            for layer in &c.layers[boundary + 1..] {
                for g in &layer.gates {
                    frame.gate(g, &mut record);
                }
            }
        }
    }
    let parity =
        |set: &[usize]| set.iter().filter(|&&m| frame.measurement_flips[m]).count() % 2 == 1;
    let dets = c
        .detectors
        .iter()
        .filter(|d| parity(&d.measurements))
        .map(|d| d.id as u32)
        .collect();
    let obs = c
        .observables
        .iter()
        .filter(|o| parity(&o.measurements))
        .map(|o| o.id as u32)
        .collect();
    Ok((dets, obs))
}

/// Detector error model by exhaustive forward propagation.
pub fn build_dem_oracle(c: &Circuit, level: CorrelationLevel) -> Dem {
    let faults = fault_inventory(c, level);
    let sigs: Vec<(Vec<u32>, Vec<u32>)> = faults
        .par_iter()
        .map(|f| propagate_error(c, &f.kind).expect("inventory faults are well placed"))
        .collect();
    let mut merged: BTreeMap<(Vec<u32>, Vec<u32>), f64> = BTreeMap::new();
    for (f, sig) in faults.iter().zip(sigs) {
        if sig.0.is_empty() && sig.1.is_empty() {
            continue;
        }
        let p = merged.entry(sig).or_insert(0.0);
        *p = merge_prob(*p, f.probability);
    }
    Dem {
        num_detectors: c.detectors.len(),
        num_observables: c.observables.len(),
        hyperedges: merged
            .into_iter()
            .map(|((detectors, observables), probability)| Hyperedge {
                detectors,
                observables,
                probability,
            })
            .collect(),
    }
}
