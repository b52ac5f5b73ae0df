//! Physical circuit of a surface code concatenated with Iceberg blocks.
//!
//! Qubit map for `B` blocks and `C = d²−1` outer checks: block data
//! `0..4B`, inner ancillas `4B..6B` (X then Z per block), outer check
//! ancillas `6B..6B+C`. Inner checks are indexed `2b` (XXXX) and `2b+1`
//! (ZZZZ); outer check `o` has check index `2B + o`.

use crate::circuit::{Circuit, Layer, Qubit};
use crate::codes::{Basis, NoiseModel, NoisyBuilder};

use super::layout::IcebergLayout;
use super::tracker::CheckKind;

/// Z-check data order relative to the X check's `0, 1, 2, 3`.
const INNER_Z_ORDER: [usize; 4] = [1, 0, 3, 2];

pub fn num_qubits(layout: &IcebergLayout) -> u32 {
    (6 * layout.num_blocks() + layout.surface.checks.len()) as u32
}

pub fn num_checks(layout: &IcebergLayout) -> usize {
    2 * layout.num_blocks() + layout.surface.checks.len()
}

/// Detector behaviour of every check, in check-index order.
pub fn check_kinds(layout: &IcebergLayout, z_only: bool) -> Vec<CheckKind> {
    let inner = (0..2 * layout.num_blocks()).map(|i| CheckKind {
        deterministic_first: true,
        emit: !(z_only && i % 2 == 0),
    });
    let outer = layout.surface.checks.iter().map(|c| CheckKind {
        deterministic_first: c.basis == Basis::Z,
        emit: !(z_only && c.basis == Basis::X),
    });
    inner.chain(outer).collect()
}

/// Emits the gate layers of the concatenated experiment.
#[derive(Debug, Clone)]
pub struct ConcatBuilder<'a> {
    pub layout: &'a IcebergLayout,
    pub builder: NoisyBuilder,
}

impl<'a> ConcatBuilder<'a> {
    pub fn new(layout: &'a IcebergLayout, noise: NoiseModel) -> Self {
        Self {
            layout,
            builder: NoisyBuilder::new(num_qubits(layout), noise),
        }
    }

    fn blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    pub fn inner_x_ancilla(&self, block: usize) -> Qubit {
        (4 * self.blocks() + 2 * block) as Qubit
    }

    pub fn inner_z_ancilla(&self, block: usize) -> Qubit {
        (4 * self.blocks() + 2 * block + 1) as Qubit
    }

    pub fn outer_ancilla(&self, check: usize) -> Qubit {
        (6 * self.blocks() + check) as Qubit
    }

    pub fn layers(&self) -> &[Layer] {
        self.builder.layers()
    }

    /// Reset everything and put each block in the GHZ state, which is the
    /// logical |00> and fixes both inner checks.
    pub fn prepare(&mut self) {
        let b = &mut self.builder;
        for q in 0..num_qubits(self.layout) {
            b.reset(q);
        }
        b.tick();
        for blk in 0..self.layout.num_blocks() {
            b.h(self.layout.shared_qubit(blk));
        }
        b.tick();
        for other in 1..4 {
            for blk in 0..self.layout.num_blocks() {
                let data = self.layout.block_data(blk);
                b.cx(data[0], data[other]);
            }
            b.tick();
        }
    }

    /// Measure XXXX and ZZZZ of every block; records in inner-check order.
    pub fn inner_round(&mut self) -> Vec<usize> {
        let nb = self.blocks();
        let (xa, za): (Vec<Qubit>, Vec<Qubit>) = (0..nb)
            .map(|k| (self.inner_x_ancilla(k), self.inner_z_ancilla(k)))
            .unzip();
        let b = &mut self.builder;
        for &a in &xa {
            b.h(a);
        }
        b.tick();
        for t in 0..4 {
            for blk in 0..nb {
                let data = self.layout.block_data(blk);
                b.cx(xa[blk], data[t]);
                b.cx(data[INNER_Z_ORDER[t]], za[blk]);
            }
            b.tick();
        }
        for &a in &xa {
            b.h(a);
        }
        b.tick();
        let mut recs = Vec::with_capacity(2 * nb);
        for blk in 0..nb {
            recs.push(b.measure_reset(xa[blk]));
            recs.push(b.measure_reset(za[blk]));
        }
        b.tick();
        recs
    }

    /// Execute the given outer checks (ascending indices). All X checks run
    /// before all Z checks so that shared qubits never clash. Returns one
    /// record per check, in the given order.
    pub fn outer_checks(&mut self, active: &[usize]) -> Vec<usize> {
        if active.is_empty() {
            return Vec::new();
        }
        let surface = &self.layout.surface;
        let anc: Vec<Qubit> = active.iter().map(|&o| self.outer_ancilla(o)).collect();
        let xs: Vec<usize> = (0..active.len())
            .filter(|&i| surface.checks[active[i]].basis == Basis::X)
            .collect();
        let b = &mut self.builder;
        if !xs.is_empty() {
            for &i in &xs {
                b.h(anc[i]);
            }
            b.tick();
        }
        for basis in [Basis::X, Basis::Z] {
            for t in 0..4 {
                for sub in 0..2 {
                    let mut any = false;
                    for (i, &o) in active.iter().enumerate() {
                        let chk = &surface.checks[o];
                        if chk.basis != basis {
                            continue;
                        }
                        if let Some(q) = chk.target_at(t) {
                            any = true;
                            match basis {
                                Basis::X => b.cx(anc[i], self.layout.logical_x(q)[sub]),
                                Basis::Z => b.cx(self.layout.logical_z(q)[sub], anc[i]),
                            }
                        }
                    }
                    if any {
                        b.tick();
                    }
                }
            }
        }
        if !xs.is_empty() {
            for &i in &xs {
                b.h(anc[i]);
            }
            b.tick();
        }
        let recs = anc.iter().map(|&a| b.measure_reset(a)).collect();
        b.tick();
        recs
    }

    /// Measure every block data qubit; records indexed by physical qubit.
    pub fn final_readout(&mut self) -> Vec<usize> {
        let b = &mut self.builder;
        let recs = (0..4 * self.layout.num_blocks())
            .map(|q| b.measure(q as Qubit))
            .collect();
        b.tick();
        recs
    }

    /// Final detectors (ZZZZ of each block, then each outer Z check) and the
    /// logical observable, given the last record of every check.
    pub fn close(&mut self, finals: &[usize], last: &[Option<usize>]) {
        let nb = self.blocks();
        for blk in 0..nb {
            let data = self.layout.block_data(blk);
            let recs = data
                .iter()
                .map(|&q| finals[q as usize])
                .chain(last[2 * blk + 1]);
            self.builder.detector(recs);
        }
        for (o, chk) in self.layout.surface.checks.iter().enumerate() {
            if chk.basis != Basis::Z {
                continue;
            }
            let recs: Vec<usize> = chk
                .support()
                .flat_map(|q| self.layout.logical_z(q))
                .map(|p| finals[p as usize])
                .chain(last[2 * nb + o])
                .collect();
            self.builder.detector(recs);
        }
        let obs: Vec<usize> = self
            .layout
            .surface
            .logical_z()
            .into_iter()
            .flat_map(|q| self.layout.logical_z(q))
            .map(|p| finals[p as usize])
            .collect();
        self.builder.observable_include(0, obs);
    }

    pub fn finish(self) -> Circuit {
        self.builder.finish()
    }
}

/// The non-adaptive experiment: every check in every round, detectors
/// comparing consecutive rounds.
pub fn gen_concatenated(
    layout: &IcebergLayout,
    rounds: usize,
    noise: NoiseModel,
    z_only: bool,
) -> Circuit {
    assert!(rounds >= 1);
    let kinds = check_kinds(layout, z_only);
    let nb = layout.num_blocks();
    let all: Vec<usize> = (0..layout.surface.checks.len()).collect();
    let mut c = ConcatBuilder::new(layout, noise);
    c.prepare();
    let mut last: Vec<Option<usize>> = vec![None; kinds.len()];
    for t in 0..rounds {
        let mut recs = c.inner_round();
        recs.extend(c.outer_checks(&all));
        debug_assert_eq!(recs.len(), kinds.len());
        for (i, &r) in recs.iter().enumerate() {
            if kinds[i].emit && (t > 0 || kinds[i].deterministic_first) {
                c.builder.detector(last[i].into_iter().chain([r]));
            }
            last[i] = Some(r);
        }
    }
    let finals = c.final_readout();
    debug_assert_eq!(finals.len(), 4 * nb);
    c.close(&finals, &last);
    c.finish()
}
