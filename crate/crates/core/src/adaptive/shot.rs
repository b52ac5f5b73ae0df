//! Per-shot simulation of the adaptive protocol.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::Circuit;
use crate::codes::NoiseModel;
use crate::compile::{compile_timed, StageTimings};
use crate::dem::Dem;
use crate::eec::Schedule;
use crate::sampler::FrameSampler;
use crate::stepg::CorrelationLevel;

use super::concat::{check_kinds, num_qubits, ConcatBuilder};
use super::layout::IcebergLayout;
use super::tracker::DetectorTracker;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub d: usize,
    pub rounds: usize,
    /// Period of forced full-check rounds.
    pub refresh: usize,
    pub p: f64,
    pub shots: usize,
    pub seed: u64,
    /// Emit detectors for Z-type checks only.
    pub z_only: bool,
}

impl AdaptiveConfig {
    /// `d` rounds, refresh every `d/2` rounds.
    pub fn new(d: usize, p: f64) -> Self {
        Self {
            d,
            rounds: d,
            refresh: (d / 2).max(1),
            p,
            shots: 1,
            seed: 0,
            z_only: true,
        }
    }

    /// Whether round `t` runs every outer check.
    pub fn is_full_round(&self, t: usize) -> bool {
        t == 0 || t + 1 == self.rounds || t % self.refresh.max(1) == 0
    }
}

/// Outer checks supporting a data qubit in a block whose inner difference
/// syndrome is nonzero; every check in a full round.
pub fn trigger_set(diff: &[bool], layout: &IcebergLayout, full: bool) -> Vec<usize> {
    let checks = &layout.surface.checks;
    if full {
        return (0..checks.len()).collect();
    }
    let excited: Vec<bool> = (0..layout.num_blocks())
        .map(|b| diff[2 * b] || diff[2 * b + 1])
        .collect();
    (0..checks.len())
        .filter(|&o| checks[o].support().any(|q| excited[layout.block_of[q].0]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    X(u32),
    Z(u32),
}

/// Heuristic inner decoding from absolute outcomes: a fired ZZZZ check means
/// an X error, answered by X on the shared qubit; XXXX likewise with Z.
pub fn inner_correct(outcomes: &[bool], layout: &IcebergLayout) -> Vec<Correction> {
    let mut out = Vec::new();
    for b in 0..layout.num_blocks() {
        let a = layout.shared_qubit(b);
        if outcomes[2 * b + 1] {
            out.push(Correction::X(a));
        }
        if outcomes[2 * b] {
            out.push(Correction::Z(a));
        }
    }
    out
}

/// The circuit one shot actually executed, with its sampled values.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCircuit {
    pub circuit: Circuit,
    pub detector_values: Vec<bool>,
    pub observable_values: Vec<bool>,
    /// Outer checks executed in each round.
    pub triggered: Vec<usize>,
    pub build_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub shot: usize,
    pub detector_values: Vec<bool>,
    pub observable_values: Vec<bool>,
    pub triggered: Vec<usize>,
    pub dem: Dem,
    pub build_time: Duration,
    pub compile: StageTimings,
    /// `weights[w]` = hyperedges flipping exactly `w` detectors.
    pub weights: Vec<usize>,
}

/// Random stream of shot `shot` under `seed`.
pub fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

/// Simulate one shot, building its circuit round by round.
pub fn simulate_shot(cfg: &AdaptiveConfig, layout: &IcebergLayout, rng: ChaCha8Rng) -> ShotCircuit {
    let start = Instant::now();
    let noise = NoiseModel::new(cfg.p);
    let kinds = check_kinds(layout, cfg.z_only);
    let nb = layout.num_blocks();
    let mut tracker = DetectorTracker::new(kinds);
    let mut sampler = FrameSampler::new(num_qubits(layout), rng);
    let mut c = ConcatBuilder::new(layout, noise);
    let mut stepped = 0;
    let mut sync = |c: &ConcatBuilder<'_>, s: &mut FrameSampler| {
        for layer in &c.layers()[stepped..] {
            s.step(layer);
        }
        stepped = c.layers().len();
    };

    c.prepare();
    let mut previous = vec![false; 2 * nb];
    let mut triggered = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let inner = c.inner_round();
        sync(&c, &mut sampler);
        let outcomes: Vec<bool> = inner.iter().map(|&r| sampler.physical(r)).collect();
        let diff: Vec<bool> = outcomes.iter().zip(&previous).map(|(a, b)| a ^ b).collect();
        previous = outcomes;
        for corr in inner_correct(&previous, layout) {
            match corr {
                Correction::X(q) => sampler.correct_x(q),
                Correction::Z(q) => sampler.correct_z(q),
            }
        }
        let active = trigger_set(&diff, layout, cfg.is_full_round(t));
        let outer = c.outer_checks(&active);
        sync(&c, &mut sampler);
        triggered.push(active.len());
        for (i, &r) in inner.iter().enumerate() {
            tracker.executed(i, r);
        }
        for (&o, &r) in active.iter().zip(&outer) {
            tracker.executed(2 * nb + o, r);
        }
        for (_, set) in tracker.end_round() {
            c.builder.detector(set);
        }
    }
    let finals = c.final_readout();
    sync(&c, &mut sampler);
    let last: Vec<Option<usize>> = (0..tracker.num_checks())
        .map(|i| tracker.current(i))
        .collect();
    c.close(&finals, &last);
    let circuit = c.finish();

    let records = sampler.records();
    let parity = |set: &[usize]| set.iter().fold(false, |acc, &m| acc ^ records[m]);
    ShotCircuit {
        detector_values: circuit
            .detectors
            .iter()
            .map(|d| parity(&d.measurements))
            .collect(),
        observable_values: circuit
            .observables
            .iter()
            .map(|o| parity(&o.measurements))
            .collect(),
        triggered,
        build_time: start.elapsed(),
        circuit,
    }
}

/// Simulate and compile one shot at L0.
pub fn run_shot(cfg: &AdaptiveConfig, layout: &IcebergLayout, shot: usize) -> ShotRecord {
    let sc = simulate_shot(cfg, layout, shot_rng(cfg.seed, shot));
    let (dem, compile) = compile_timed(&sc.circuit, CorrelationLevel::L0, Schedule::Serial)
        .expect("generated circuits lower");
    let mut weights = Vec::new();
    for h in &dem.hyperedges {
        let w = h.detectors.len();
        if weights.len() <= w {
            weights.resize(w + 1, 0);
        }
        weights[w] += 1;
    }
    ShotRecord {
        shot,
        detector_values: sc.detector_values,
        observable_values: sc.observable_values,
        triggered: sc.triggered,
        dem,
        build_time: sc.build_time,
        compile,
        weights,
    }
}

/// All shots of `cfg`, in parallel, returned in shot order.
pub fn run_shots(cfg: &AdaptiveConfig, layout: &IcebergLayout) -> Vec<ShotRecord> {
    (0..cfg.shots)
        .into_par_iter()
        .map(|s| run_shot(cfg, layout, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::concat::{gen_concatenated, num_checks};
    use crate::adaptive::layout::build_layout;
    use crate::sampler::FrameSampler;

    #[test]
    fn full_round_schedule() {
        let cfg = AdaptiveConfig::new(6, 0.0);
        let full: Vec<usize> = (0..6).filter(|&t| cfg.is_full_round(t)).collect();
        assert_eq!(full, vec![0, 3, 5]);
    }

    #[test]
    fn leading_block_trigger() {
        let l = build_layout(4).unwrap();
        let mut diff = vec![false; 16];
        assert!(trigger_set(&diff, &l, false).is_empty());
        assert_eq!(trigger_set(&diff, &l, true).len(), 15);
        diff[1] = true;
        let t = trigger_set(&diff, &l, false);
        let expect: Vec<usize> = (0..15)
            .filter(|&o| l.surface.checks[o].support().any(|q| q == 0 || q == 14))
            .collect();
        assert_eq!(t, expect);
        assert!(!t.is_empty());
    }

    #[test]
    fn corrections() {
        let l = build_layout(4).unwrap();
        assert!(inner_correct(&[false; 16], &l).is_empty());
        let mut o = vec![false; 16];
        o[2 * 3 + 1] = true;
        assert_eq!(inner_correct(&o, &l), vec![Correction::X(12)]);
    }

    #[test]
    fn correction_answers_its_syndrome() {
        // X error on a non-shared qubit of block 0, one inner round, correct,
        // then a noiseless inner round reads ZZZZ = 0 again.
        let l = build_layout(4).unwrap();
        let mut c = ConcatBuilder::new(&l, NoiseModel::noiseless());
        c.prepare();
        let first = c.inner_round();
        let second = c.inner_round();
        let circuit = c.finish();
        let prep = circuit.layers.len() - 2 * 7;
        let mut flipped = FrameSampler::seeded(circuit.num_qubits, 9);
        for layer in &circuit.layers[..prep] {
            flipped.step(layer);
        }
        flipped.correct_x(2); // stands in for an X error on qubit c of block 0
        for layer in &circuit.layers[prep..prep + 7] {
            flipped.step(layer);
        }
        assert!(flipped.physical(first[1]));
        for corr in inner_correct(
            &first
                .iter()
                .map(|&r| flipped.physical(r))
                .collect::<Vec<_>>(),
            &l,
        ) {
            if let Correction::X(q) = corr {
                flipped.correct_x(q);
            }
        }
        for layer in &circuit.layers[prep + 7..] {
            flipped.step(layer);
        }
        assert!(!flipped.physical(second[1]));
    }

    #[test]
    fn same_seed_same_record() {
        let l = build_layout(4).unwrap();
        let mut cfg = AdaptiveConfig::new(4, 0.01);
        cfg.seed = 42;
        let a = run_shot(&cfg, &l, 3);
        let b = run_shot(&cfg, &l, 3);
        assert_eq!(a.detector_values, b.detector_values);
        assert_eq!(a.triggered, b.triggered);
        assert_eq!(a.dem, b.dem);
    }

    #[test]
    fn noiseless_shots() {
        let l = build_layout(4).unwrap();
        let cfg = AdaptiveConfig::new(4, 0.0);
        for shot in 0..20 {
            let sc = simulate_shot(&cfg, &l, shot_rng(1, shot));
            assert!(sc.detector_values.iter().all(|&v| !v));
            assert_eq!(sc.triggered, vec![15, 0, 15, 15]);
        }
    }

    #[test]
    fn refresh_one_matches_static() {
        let l = build_layout(4).unwrap();
        let mut cfg = AdaptiveConfig::new(4, 0.01);
        cfg.refresh = 1;
        let sc = simulate_shot(&cfg, &l, shot_rng(5, 0));
        let st = gen_concatenated(&l, 4, NoiseModel::new(0.01), true);
        assert_eq!(sc.circuit.detectors.len(), st.detectors.len());
        assert_eq!(sc.circuit, st);
        assert_eq!(num_checks(&l), 31);
    }
}
