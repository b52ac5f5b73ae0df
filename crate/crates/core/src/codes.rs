//! Memory-experiment generators: repetition code and rotated surface code.

use crate::circuit::{Circuit, CircuitBuilder, Layer, Noise, Qubit};

/// Circuit-level noise of strength `p`.
///
/// Single-qubit gates get `DEPOLARIZE1(p)`, CX gates `DEPOLARIZE2(p/10)`,
/// measurements flip with `p`, resets fail (X) with `p`, idle qubits get
/// `DEPOLARIZE1(p/10)` in every layer. `swap_gate_rates` exchanges the two
/// gate strengths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub p: f64,
    pub swap_gate_rates: bool,
}

impl NoiseModel {
    pub fn new(p: f64) -> Self {
        assert!(
            (0.0..=1.0).contains(&p),
            "noise strength {p} outside [0, 1]"
        );
        Self {
            p,
            swap_gate_rates: false,
        }
    }

    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.p == 0.0
    }

    pub fn one_qubit(&self) -> f64 {
        if self.swap_gate_rates {
            self.p / 10.0
        } else {
            self.p
        }
    }

    pub fn two_qubit(&self) -> f64 {
        if self.swap_gate_rates {
            self.p
        } else {
            self.p / 10.0
        }
    }

    pub fn measurement(&self) -> f64 {
        self.p
    }

    pub fn reset(&self) -> f64 {
        self.p
    }

    pub fn idle(&self) -> f64 {
        self.p / 10.0
    }
}

/// [`CircuitBuilder`] that attaches the noise model to every gate and idle
/// qubit. With a noiseless model no channels are emitted at all.
#[derive(Debug, Clone)]
pub struct NoisyBuilder {
    inner: CircuitBuilder,
    noise: NoiseModel,
    busy: Vec<bool>,
    pending: Vec<Noise>,
}

impl NoisyBuilder {
    pub fn new(num_qubits: u32, noise: NoiseModel) -> Self {
        Self {
            inner: CircuitBuilder::new(num_qubits),
            noise,
            busy: vec![false; num_qubits as usize],
            pending: Vec::new(),
        }
    }

    fn mark(&mut self, q: Qubit) {
        self.busy[q as usize] = true;
    }

    fn push(&mut self, n: Noise) {
        if !self.noise.is_noiseless() {
            self.pending.push(n);
        }
    }

    pub fn h(&mut self, q: Qubit) {
        self.mark(q);
        self.inner.h(q);
        self.push(Noise::Depolarize1 {
            p: self.noise.one_qubit(),
            qubit: q,
        });
    }

    pub fn cx(&mut self, control: Qubit, target: Qubit) {
        self.mark(control);
        self.mark(target);
        self.inner.cx(control, target);
        self.push(Noise::Depolarize2 {
            p: self.noise.two_qubit(),
            a: control,
            b: target,
        });
    }

    pub fn reset(&mut self, q: Qubit) {
        self.mark(q);
        self.inner.reset(q);
        self.push(Noise::XError {
            p: self.noise.reset(),
            qubit: q,
        });
    }

    fn flip(&self) -> Option<f64> {
        (!self.noise.is_noiseless()).then(|| self.noise.measurement())
    }

    pub fn measure(&mut self, q: Qubit) -> usize {
        self.mark(q);
        let f = self.flip();
        self.inner.measure(q, f)
    }

    pub fn measure_reset(&mut self, q: Qubit) -> usize {
        self.mark(q);
        let f = self.flip();
        let r = self.inner.measure_reset(q, f);
        self.push(Noise::XError {
            p: self.noise.reset(),
            qubit: q,
        });
        r
    }

    /// Close the layer, adding idle noise on untouched qubits.
    pub fn tick(&mut self) {
        let idle = self.noise.idle();
        for q in 0..self.busy.len() {
            if !self.busy[q] {
                self.push(Noise::Depolarize1 {
                    p: idle,
                    qubit: q as Qubit,
                });
            }
            self.busy[q] = false;
        }
        for n in self.pending.drain(..) {
            self.inner.noise(n);
        }
        self.inner.tick();
    }

    pub fn detector(&mut self, records: impl IntoIterator<Item = usize>) -> usize {
        self.inner.detector(records)
    }

    pub fn observable_include(&mut self, id: usize, records: impl IntoIterator<Item = usize>) {
        self.inner.observable_include(id, records);
    }

    pub fn num_measurements(&self) -> usize {
        self.inner.num_measurements()
    }

    pub fn num_detectors(&self) -> usize {
        self.inner.num_detectors()
    }

    pub fn layers(&self) -> &[Layer] {
        self.inner.layers()
    }

    /// Close the last layer (if it holds gates) and build.
    pub fn finish(mut self) -> Circuit {
        if self.busy.iter().any(|&b| b) {
            self.tick();
        }
        self.inner.finish().expect("generated circuits are valid")
    }
}

/// Repetition-code memory experiment: data `i` on qubit `2i`, ancilla `j` on
/// qubit `2j+1`, a final data readout, observable on data qubit 0.
pub fn gen_repetition(d: usize, rounds: usize, noise: NoiseModel) -> Circuit {
    assert!(d >= 2 && rounds >= 1, "need d >= 2 and rounds >= 1");
    let n = 2 * d - 1;
    let data = |i: usize| (2 * i) as Qubit;
    let anc = |j: usize| (2 * j + 1) as Qubit;
    let mut b = NoisyBuilder::new(n as u32, noise);
    for q in 0..n {
        b.reset(q as Qubit);
    }
    b.tick();
    let mut prev: Vec<Option<usize>> = vec![None; d - 1];
    for _ in 0..rounds {
        for j in 0..d - 1 {
            b.cx(data(j), anc(j));
        }
        b.tick();
        for j in 0..d - 1 {
            b.cx(data(j + 1), anc(j));
        }
        b.tick();
        let recs: Vec<usize> = (0..d - 1).map(|j| b.measure_reset(anc(j))).collect();
        for (j, &r) in recs.iter().enumerate() {
            match prev[j] {
                None => b.detector([r]),
                Some(p) => b.detector([r, p]),
            };
            prev[j] = Some(r);
        }
        b.tick();
    }
    let finals: Vec<usize> = (0..d).map(|i| b.measure(data(i))).collect();
    for j in 0..d - 1 {
        b.detector([finals[j], finals[j + 1], prev[j].unwrap()]);
    }
    b.observable_include(0, [finals[0]]);
    b.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

/// One stabiliser of the rotated surface code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub basis: Basis,
    /// Plaquette coordinate; corners are data (i, j), (i, j+1), (i+1, j), (i+1, j+1).
    pub plaquette: (isize, isize),
    /// Data qubits at NW, NE, SW, SE (absent at the boundary).
    pub corners: [Option<usize>; 4],
}

impl Check {
    /// Data qubit touched at CNOT step `t` (0..4).
    pub fn target_at(&self, t: usize) -> Option<usize> {
        let order = match self.basis {
            Basis::X => [0, 1, 2, 3],
            Basis::Z => [0, 2, 1, 3],
        };
        self.corners[order[t]]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.corners.iter().flatten().copied()
    }
}

/// Rotated distance-`d` surface code: data `(r, c)` is index `r·d + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceLayout {
    pub d: usize,
    pub checks: Vec<Check>,
}

impl SurfaceLayout {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2, "surface code needs d >= 2");
        let di = d as isize;
        let mut checks = Vec::new();
        for i in -1..di {
            for j in -1..di {
                let basis = if (i + j).rem_euclid(2) == 0 {
                    Basis::X
                } else {
                    Basis::Z
                };
                let row_edge = i == -1 || i == di - 1;
                let col_edge = j == -1 || j == di - 1;
                let keep = match (row_edge, col_edge) {
                    (false, false) => true,
                    (true, false) => basis == Basis::X,
                    (false, true) => basis == Basis::Z,
                    (true, true) => false,
                };
                if !keep {
                    continue;
                }
                let at = |r: isize, c: isize| {
                    (r >= 0 && c >= 0 && r < di && c < di).then(|| (r * di + c) as usize)
                };
                checks.push(Check {
                    basis,
                    plaquette: (i, j),
                    corners: [at(i, j), at(i, j + 1), at(i + 1, j), at(i + 1, j + 1)],
                });
            }
        }
        Self { d, checks }
    }

    pub fn num_data(&self) -> usize {
        self.d * self.d
    }

    pub fn data_index(&self, r: usize, c: usize) -> usize {
        r * self.d + c
    }

    /// Z on the top row.
    pub fn logical_z(&self) -> Vec<usize> {
        (0..self.d).collect()
    }

    /// Checks whose support includes data qubit `q`.
    pub fn checks_on(&self, q: usize) -> Vec<usize> {
        (0..self.checks.len())
            .filter(|&c| self.checks[c].support().any(|x| x == q))
            .collect()
    }

    /// Steps (0..4) at which checks of `basis` touch data qubit `q`.
    pub fn time_slots(&self, q: usize, basis: Basis) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .checks
            .iter()
            .filter(|c| c.basis == basis)
            .flat_map(|c| (0..4).filter(move |&t| c.target_at(t) == Some(q)))
            .collect();
        v.sort_unstable();
        v
    }
}

/// Z-basis rotated surface-code memory experiment. Qubits `0..d²` are data,
/// then one ancilla per check. X-check detectors are omitted in the first
/// round (their outcomes are random) and entirely when `z_only` is set.
pub fn gen_surface(d: usize, rounds: usize, noise: NoiseModel, z_only: bool) -> Circuit {
    assert!(rounds >= 1, "need rounds >= 1");
    let layout = SurfaceLayout::new(d);
    let nd = layout.num_data();
    let na = layout.checks.len();
    let anc = |a: usize| (nd + a) as Qubit;
    let mut b = NoisyBuilder::new((nd + na) as u32, noise);
    for q in 0..nd + na {
        b.reset(q as Qubit);
    }
    b.tick();
    let x_checks: Vec<usize> = (0..na)
        .filter(|&a| layout.checks[a].basis == Basis::X)
        .collect();
    let mut prev: Vec<Option<usize>> = vec![None; na];
    for _ in 0..rounds {
        for &a in &x_checks {
            b.h(anc(a));
        }
        b.tick();
        for t in 0..4 {
            for (a, chk) in layout.checks.iter().enumerate() {
                if let Some(q) = chk.target_at(t) {
                    match chk.basis {
                        Basis::X => b.cx(anc(a), q as Qubit),
                        Basis::Z => b.cx(q as Qubit, anc(a)),
                    }
                }
            }
            b.tick();
        }
        for &a in &x_checks {
            b.h(anc(a));
        }
        b.tick();
        let recs: Vec<usize> = (0..na).map(|a| b.measure_reset(anc(a))).collect();
        for (a, &r) in recs.iter().enumerate() {
            let is_x = layout.checks[a].basis == Basis::X;
            match prev[a] {
                None if !is_x => {
                    b.detector([r]);
                }
                Some(p) if !(is_x && z_only) => {
                    b.detector([r, p]);
                }
                _ => {}
            }
            prev[a] = Some(r);
        }
        b.tick();
    }
    let finals: Vec<usize> = (0..nd).map(|q| b.measure(q as Qubit)).collect();
    for (a, chk) in layout.checks.iter().enumerate() {
        if chk.basis == Basis::Z {
            let recs = chk.support().map(|q| finals[q]).chain(prev[a]);
            b.detector(recs);
        }
    }
    b.observable_include(0, layout.logical_z().into_iter().map(|q| finals[q]));
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_circuit, Gate};
    use crate::compile::compile;
    use crate::eec::Schedule;
    use crate::sampler::sample_circuit;
    use crate::stepg::CorrelationLevel;

    #[test]
    fn repetition_smallest() {
        let c = gen_repetition(2, 1, NoiseModel::noiseless());
        assert_eq!(c.num_qubits, 3);
        assert_eq!(c.detectors.len(), 2);
        assert!(compile(&c, CorrelationLevel::L2, Schedule::Serial)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn repetition_shape() {
        let c = gen_repetition(3, 2, NoiseModel::new(0.001));
        assert_eq!(c.num_qubits, 5);
        assert_eq!(c.detectors.len(), 6);
        assert_eq!(
            c.layers[1].gates,
            vec![
                Gate::Cx {
                    control: 0,
                    target: 1
                },
                Gate::Cx {
                    control: 2,
                    target: 3
                }
            ]
        );
        assert_eq!(
            c.layers[2].gates,
            vec![
                Gate::Cx {
                    control: 2,
                    target: 1
                },
                Gate::Cx {
                    control: 4,
                    target: 3
                }
            ]
        );
        // Blue detector: both measurements of ancilla 0.
        assert_eq!(c.detectors[2].measurements, vec![0, 2]);
        assert_eq!(parse_circuit(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn surface_layout_counts() {
        for d in 2..8 {
            let l = SurfaceLayout::new(d);
            assert_eq!(l.checks.len(), d * d - 1, "d={d}");
            for q in 0..l.num_data() {
                assert!(l.checks_on(q).len() <= 4);
            }
            for c in &l.checks {
                let w = c.support().count();
                assert!(w == 2 || w == 4);
            }
        }
        assert_eq!(
            gen_surface(3, 1, NoiseModel::noiseless(), false).num_qubits,
            17
        );
    }

    #[test]
    fn checks_commute() {
        for d in 2..8 {
            let l = SurfaceLayout::new(d);
            for a in l.checks.iter().filter(|c| c.basis == Basis::X) {
                for b in l.checks.iter().filter(|c| c.basis == Basis::Z) {
                    let overlap = a.support().filter(|q| b.support().any(|x| x == *q)).count();
                    assert_eq!(overlap % 2, 0);
                }
                let on_row0 = a.support().filter(|&q| q < d).count();
                assert_eq!(on_row0 % 2, 0, "logical Z must commute with X checks");
            }
        }
    }

    #[test]
    fn schedule_has_no_conflicts() {
        for d in 2..8 {
            let l = SurfaceLayout::new(d);
            for t in 0..4 {
                let mut seen = vec![false; l.num_data()];
                for c in &l.checks {
                    if let Some(q) = c.target_at(t) {
                        assert!(!seen[q], "d={d} step {t} qubit {q}");
                        seen[q] = true;
                    }
                }
            }
        }
    }

    #[test]
    fn noise_audit() {
        let c = gen_surface(3, 2, NoiseModel::new(0.01), false);
        for layer in &c.layers {
            let cx = layer
                .gates
                .iter()
                .filter(|g| matches!(g, Gate::Cx { .. }))
                .count();
            let dep2 = layer
                .noise
                .iter()
                .filter(|n| matches!(n, Noise::Depolarize2 { .. }))
                .count();
            assert_eq!(cx, dep2);
            let meas = layer.num_measurements();
            let flips = layer
                .noise
                .iter()
                .filter(|n| matches!(n, Noise::MeasFlip { .. }))
                .count();
            assert_eq!(meas, flips);
            let busy: usize = layer.gates.iter().map(|g| g.qubits().count()).sum();
            let idle = layer
                .noise
                .iter()
                .filter(|n| matches!(n, Noise::Depolarize1 { p, .. } if *p == 0.001))
                .count();
            assert_eq!(idle, c.num_qubits as usize - busy);
        }
    }

    #[test]
    fn surface_is_deterministic_when_noiseless() {
        for d in [2, 3, 4] {
            let c = gen_surface(d, 3, NoiseModel::noiseless(), false);
            for seed in 0..50 {
                let (dets, obs) = sample_circuit(&c, seed);
                assert!(dets.iter().all(|&x| !x), "d={d} seed={seed}");
                assert!(obs.iter().all(|&x| !x));
            }
        }
    }

    #[test]
    fn swapped_rates() {
        let n = NoiseModel {
            p: 0.01,
            swap_gate_rates: true,
        };
        assert_eq!(n.one_qubit(), 0.001);
        assert_eq!(n.two_qubit(), 0.01);
    }
}
