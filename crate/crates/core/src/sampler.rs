//! Noisy Pauli-frame sampling.
//!
//! Every ideal outcome in the circuits handled here is deterministic, so a
//! frame of X/Z flips fully determines which measurements flip. Z flips are
//! randomised whenever the state becomes a Z eigenstate (start, reset,
//! measurement), which makes any detector that is not truly deterministic
//! show up as random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, Gate, Layer, Noise, Qubit};

#[derive(Debug, Clone)]
pub struct FrameSampler {
    /// Noise frame.
    x: Vec<bool>,
    z: Vec<bool>,
    /// Correction frame: deliberate Paulis applied by feedback, kept apart so
    /// detector values stay those of the feedback-free circuit.
    cx: Vec<bool>,
    cz: Vec<bool>,
    records: Vec<bool>,
    corrections: Vec<bool>,
    rng: ChaCha8Rng,
}

impl FrameSampler {
    pub fn new(num_qubits: u32, rng: ChaCha8Rng) -> Self {
        let n = num_qubits as usize;
        let mut s = Self {
            x: vec![false; n],
            z: vec![false; n],
            cx: vec![false; n],
            cz: vec![false; n],
            records: Vec::new(),
            corrections: Vec::new(),
            rng,
        };
        for q in 0..n {
            s.z[q] = s.rng.random();
        }
        s
    }

    pub fn seeded(num_qubits: u32, seed: u64) -> Self {
        Self::new(num_qubits, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Noise-frame flip of every measurement so far.
    pub fn records(&self) -> &[bool] {
        &self.records
    }

    /// Flip of the physical outcome of measurement `i` relative to its
    /// noiseless value, including applied corrections.
    pub fn physical(&self, i: usize) -> bool {
        self.records[i] ^ self.corrections[i]
    }

    pub fn correct_x(&mut self, q: Qubit) {
        self.cx[q as usize] ^= true;
    }

    pub fn correct_z(&mut self, q: Qubit) {
        self.cz[q as usize] ^= true;
    }

    fn gate(&mut self, g: &Gate) {
        match *g {
            Gate::H(q) => {
                let q = q as usize;
                std::mem::swap(&mut self.x[q], &mut self.z[q]);
                std::mem::swap(&mut self.cx[q], &mut self.cz[q]);
            }
            Gate::Cx { control, target } => {
                let (c, t) = (control as usize, target as usize);
                self.x[t] ^= self.x[c];
                self.z[c] ^= self.z[t];
                self.cx[t] ^= self.cx[c];
                self.cz[c] ^= self.cz[t];
            }
            Gate::R(q) => {
                let q = q as usize;
                self.x[q] = false;
                self.z[q] = self.rng.random();
                self.cx[q] = false;
                self.cz[q] = false;
            }
            Gate::M(q) => {
                let q = q as usize;
                self.records.push(self.x[q]);
                self.corrections.push(self.cx[q]);
                self.z[q] = self.rng.random();
                self.cz[q] = false;
            }
            Gate::Mr(q) => {
                let q = q as usize;
                self.records.push(self.x[q]);
                self.corrections.push(self.cx[q]);
                self.x[q] = false;
                self.z[q] = self.rng.random();
                self.cx[q] = false;
                self.cz[q] = false;
            }
        }
    }

    fn pauli(&mut self, q: Qubit, which: u8) {
        // 1 = X, 2 = Y, 3 = Z
        let q = q as usize;
        if which == 1 || which == 2 {
            self.x[q] ^= true;
        }
        if which == 2 || which == 3 {
            self.z[q] ^= true;
        }
    }

    /// Run one layer: gates, then a sample of each noise channel.
    pub fn step(&mut self, layer: &Layer) {
        let first = self.records.len();
        let mut measured: Vec<Qubit> = Vec::new();
        for g in &layer.gates {
            self.gate(g);
            if let Gate::M(q) | Gate::Mr(q) = *g {
                measured.push(q);
            }
        }
        for n in &layer.noise {
            let p = n.probability();
            if p <= 0.0 || !self.rng.random_bool(p.min(1.0)) {
                continue;
            }
            match *n {
                Noise::XError { qubit, .. } => self.pauli(qubit, 1),
                Noise::ZError { qubit, .. } => self.pauli(qubit, 3),
                Noise::Depolarize1 { qubit, .. } => {
                    let w = self.rng.random_range(1..=3);
                    self.pauli(qubit, w);
                }
                Noise::Depolarize2 { a, b, .. } => {
                    let w: u8 = self.rng.random_range(1..16);
                    self.pauli(a, w / 4);
                    self.pauli(b, w % 4);
                }
                Noise::MeasFlip { qubit, .. } => {
                    let i = measured
                        .iter()
                        .position(|&m| m == qubit)
                        .expect("flip on measured qubit");
                    self.records[first + i] ^= true;
                }
            }
        }
    }
}

/// Sample detector and observable flips of a static circuit.
pub fn sample_circuit(c: &Circuit, seed: u64) -> (Vec<bool>, Vec<bool>) {
    let mut s = FrameSampler::seeded(c.num_qubits, seed);
    for layer in &c.layers {
        s.step(layer);
    }
    let parity = |set: &[usize]| set.iter().fold(false, |acc, &m| acc ^ s.records[m]);
    (
        c.detectors
            .iter()
            .map(|d| parity(&d.measurements))
            .collect(),
        c.observables
            .iter()
            .map(|o| parity(&o.measurements))
            .collect(),
    )
}
