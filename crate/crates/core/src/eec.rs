//! Backward traversal computing each node's error equivalence class.
//!
//! Classes are bit rows over detector and observable columns, stored
//! column-major: word `w` of every row is contiguous, so each word column is
//! an independent problem. Boundaries are processed last to first. Inside a
//! boundary the base slots are finished before the level-1 slots, which are
//! finished before the level-2 slots, because correlated nodes read classes
//! of the same boundary.

use rayon::prelude::*;

use crate::error::MissingLeaf;
use crate::stepg::{unpack, ErrorSource, Stepg, SENTINEL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EecMatrix {
    rows: usize,
    words: usize,
    data: Vec<u64>,
}

impl EecMatrix {
    pub fn new(rows: usize, bits: usize) -> Self {
        let words = bits.div_ceil(64);
        Self {
            rows,
            words,
            data: vec![0; rows * words],
        }
    }

    /// Zeroed matrix sized for `g`.
    pub fn for_graph(g: &Stepg) -> Self {
        Self::new(g.num_rows(), g.num_detectors() + g.num_observables())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn words(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn address(&self, row: usize, word: usize) -> usize {
        word * self.rows + row
    }

    pub fn column(&self, word: usize) -> &[u64] {
        &self.data[word * self.rows..(word + 1) * self.rows]
    }

    pub fn bit(&self, row: usize, bit: usize) -> bool {
        self.data[self.address(row, bit / 64)] >> (bit % 64) & 1 == 1
    }

    pub fn xor_bit(&mut self, row: usize, bit: usize) {
        let a = self.address(row, bit / 64);
        self.data[a] ^= 1 << (bit % 64);
    }

    pub fn row(&self, row: usize) -> Vec<u64> {
        (0..self.words)
            .map(|w| self.data[self.address(row, w)])
            .collect()
    }

    /// Set bits of a row, ascending.
    pub fn row_bits(&self, row: usize) -> Vec<usize> {
        bits_of(&self.row(row))
    }
}

impl std::ops::BitXorAssign<&EecMatrix> for EecMatrix {
    fn bitxor_assign(&mut self, rhs: &EecMatrix) {
        assert_eq!((self.rows, self.words), (rhs.rows, rhs.words));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a ^= b;
        }
    }
}

/// Indices of set bits in a packed signature.
pub fn bits_of(words: &[u64]) -> Vec<usize> {
    let mut out = Vec::new();
    for (w, &word) in words.iter().enumerate() {
        let mut x = word;
        while x != 0 {
            out.push(w * 64 + x.trailing_zeros() as usize);
            x &= x - 1;
        }
    }
    out
}

/// XOR each detector's (and, offset by D, each observable's) basis vector
/// into the leaf rows of its measurements.
pub fn init_leaves(g: &Stepg, m: &mut EecMatrix) -> Result<(), MissingLeaf> {
    let d = g.num_detectors();
    let sets = g
        .detectors
        .iter()
        .enumerate()
        .chain(g.observables.iter().enumerate().map(|(i, s)| (d + i, s)));
    for (bit, set) in sets {
        for &rec in set {
            if rec >= g.num_measurements as usize {
                return Err(MissingLeaf {
                    record: rec,
                    num_measurements: g.num_measurements as usize,
                });
            }
            m.xor_bit(g.leaf(rec) as usize, bit);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Serial,
    /// Word columns and slots within a sub-pass spread over the rayon pool.
    Parallel,
}

const PAR_MIN_SLOTS: usize = 256;

#[inline]
fn class(read: &[u64], off: usize, s: u32) -> u64 {
    if s == SENTINEL {
        0
    } else {
        read[s as usize - off]
    }
}

/// One sub-pass on one word column. Base slots read later boundaries or
/// leaves (all rows at or after `hi`); correlated slots read earlier slots of
/// the same boundary (all rows before `lo`).
fn sub_pass(
    col: &mut [u64],
    succ: &[u64],
    lo: usize,
    hi: usize,
    forward_reads: bool,
    parallel: bool,
) {
    let eval = |read: &[u64], off: usize, e: u64| {
        let (s0, s1) = unpack(e);
        class(read, off, s0) ^ class(read, off, s1)
    };
    if forward_reads {
        let (write, read) = col[lo..].split_at_mut(hi - lo);
        if parallel && write.len() >= PAR_MIN_SLOTS {
            write
                .par_iter_mut()
                .with_min_len(PAR_MIN_SLOTS)
                .zip(succ.par_iter())
                .for_each(|(dst, &e)| *dst = eval(read, hi, e));
        } else {
            for (dst, &e) in write.iter_mut().zip(succ) {
                *dst = eval(read, hi, e);
            }
        }
    } else {
        let (read, rest) = col.split_at_mut(lo);
        let write = &mut rest[..hi - lo];
        if parallel && write.len() >= PAR_MIN_SLOTS {
            write
                .par_iter_mut()
                .with_min_len(PAR_MIN_SLOTS)
                .zip(succ.par_iter())
                .for_each(|(dst, &e)| *dst = eval(read, 0, e));
        } else {
            for (dst, &e) in write.iter_mut().zip(succ) {
                *dst = eval(read, 0, e);
            }
        }
    }
}

fn column_backward(g: &Stepg, col: &mut [u64], parallel: bool) {
    let k = g.k() as usize;
    let passes = g.layout.sub_passes();
    for i in (0..g.l as usize).rev() {
        let base = i * k;
        for (p, range) in passes.iter().enumerate() {
            let (lo, hi) = (base + range.start as usize, base + range.end as usize);
            if lo == hi {
                continue;
            }
            sub_pass(col, &g.successors[lo..hi], lo, hi, p == 0, parallel);
        }
    }
}

/// Fill every graph row from the initialised leaves.
pub fn run_backward(g: &Stepg, m: &mut EecMatrix, schedule: Schedule) {
    assert_eq!(m.rows, g.num_rows(), "matrix does not match graph");
    if m.rows == 0 {
        return;
    }
    match schedule {
        Schedule::Serial => {
            for col in m.data.chunks_mut(m.rows) {
                column_backward(g, col, false);
            }
        }
        Schedule::Parallel => {
            m.data
                .par_chunks_mut(m.rows)
                .for_each(|col| column_backward(g, col, true));
        }
    }
}

/// XOR of the classes of the source's components.
pub fn source_signature(m: &EecMatrix, s: &ErrorSource) -> Vec<u64> {
    let mut out = vec![0; m.words];
    for (w, word) in out.iter_mut().enumerate() {
        for u in s.components() {
            *word ^= m.data[m.address(u as usize, w)];
        }
    }
    out
}

/// Signatures of every source of `g`, flattened with `m.words()` words each.
pub fn all_signatures(g: &Stepg, m: &EecMatrix, schedule: Schedule) -> Vec<u64> {
    let w = m.words;
    let mut out = vec![0u64; g.sources.len() * w];
    if w == 0 {
        return out;
    }
    let fill = |(sig, s): (&mut [u64], &ErrorSource)| {
        for (wi, word) in sig.iter_mut().enumerate() {
            let col = m.column(wi);
            let (a, b) = (s.nodes[0], s.nodes[1]);
            *word = col[a as usize] ^ if b == SENTINEL { 0 } else { col[b as usize] };
        }
    };
    match schedule {
        Schedule::Serial => out.chunks_mut(w).zip(&g.sources).for_each(fill),
        Schedule::Parallel => out
            .par_chunks_mut(w)
            .with_min_len(1024)
            .zip(g.sources.par_iter())
            .for_each(fill),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;
    use crate::stepg::{lower, CorrelationLevel};

    const SAMPLE: &str = "R 0 1 2 3 4\nTICK\nCX 0 1 2 3\nTICK\nCX 2 1 4 3\nTICK\nMR 1 3\nDETECTOR rec[-2]\nDETECTOR rec[-1]\nTICK\nCX 0 1 2 3\nDEPOLARIZE2(0.01) 0 1 2 3\nTICK\nCX 2 1 4 3\nDEPOLARIZE1(0.01) 0\nTICK\nMR 1 3\nDETECTOR rec[-2] rec[-4]\nDETECTOR rec[-1] rec[-3]\nTICK\nM 0 2 4\nDETECTOR rec[-2] rec[-3] rec[-5]\nOBSERVABLE_INCLUDE(0) rec[-3]\n";

    fn solved(level: CorrelationLevel) -> (Stepg, EecMatrix) {
        let g = lower(&parse_circuit(SAMPLE).unwrap(), level).unwrap();
        let mut m = EecMatrix::for_graph(&g);
        init_leaves(&g, &mut m).unwrap();
        run_backward(&g, &mut m, Schedule::Serial);
        (g, m)
    }

    #[test]
    fn leaf_initialisation() {
        let c = parse_circuit(
            "M 0 1\nDETECTOR rec[-2]\nDETECTOR rec[-2] rec[-1]\nOBSERVABLE_INCLUDE(0) rec[-1]",
        )
        .unwrap();
        let g = lower(&c, CorrelationLevel::L0).unwrap();
        let mut m = EecMatrix::for_graph(&g);
        init_leaves(&g, &mut m).unwrap();
        assert_eq!(m.row_bits(g.leaf(0) as usize), vec![0, 1]);
        assert_eq!(m.row_bits(g.leaf(1) as usize), vec![1, 2]);
    }

    #[test]
    fn missing_leaf_reported() {
        let c = parse_circuit("M 0\nDETECTOR rec[-1]").unwrap();
        let mut g = lower(&c, CorrelationLevel::L0).unwrap();
        g.detectors[0] = vec![3];
        let mut m = EecMatrix::for_graph(&g);
        assert_eq!(
            init_leaves(&g, &mut m),
            Err(MissingLeaf {
                record: 3,
                num_measurements: 1
            })
        );
    }

    #[test]
    fn column_major_addressing() {
        let m = EecMatrix::new(10, 130);
        assert_eq!(m.words(), 3);
        assert_eq!(m.address(4, 2), 24);
    }

    #[test]
    fn serial_equals_parallel() {
        for level in CorrelationLevel::ALL {
            let (g, m) = solved(level);
            let mut p = EecMatrix::for_graph(&g);
            init_leaves(&g, &mut p).unwrap();
            run_backward(&g, &mut p, Schedule::Parallel);
            assert_eq!(m, p);
            assert_eq!(
                all_signatures(&g, &m, Schedule::Serial),
                all_signatures(&g, &p, Schedule::Parallel)
            );
        }
    }

    #[test]
    fn order_within_sub_pass_is_irrelevant() {
        for level in CorrelationLevel::ALL {
            let (g, m) = solved(level);
            // Reference: row-at-a-time, slots visited in reverse within a sub-pass.
            let mut r = EecMatrix::for_graph(&g);
            init_leaves(&g, &mut r).unwrap();
            let k = g.k();
            for i in (0..g.l).rev() {
                for range in g.layout.sub_passes() {
                    for slot in range.rev() {
                        let u = (i * k + slot) as usize;
                        let (s0, s1) = unpack(g.successors[u]);
                        for w in 0..r.words() {
                            let get = |s: u32| {
                                if s == SENTINEL {
                                    0
                                } else {
                                    r.data[r.address(s as usize, w)]
                                }
                            };
                            let v = get(s0) ^ get(s1);
                            let a = r.address(u, w);
                            r.data[a] = v;
                        }
                    }
                }
            }
            assert_eq!(m, r);
        }
    }

    #[test]
    fn linearity() {
        let (g, full) = solved(CorrelationLevel::L2);
        let bits = g.num_detectors() + g.num_observables();
        let mut combined = EecMatrix::for_graph(&g);
        for (bit, set) in g.detectors.iter().chain(&g.observables).enumerate() {
            let mut single = EecMatrix::new(g.num_rows(), bits);
            for &rec in set {
                single.xor_bit(g.leaf(rec) as usize, bit);
            }
            run_backward(&g, &mut single, Schedule::Serial);
            combined ^= &single;
        }
        assert_eq!(combined, full);
    }

    #[test]
    fn sentinel_rows_are_zero() {
        let (g, m) = solved(CorrelationLevel::L2);
        for (u, &e) in g.successors.iter().enumerate() {
            if unpack(e) == (SENTINEL, SENTINEL) {
                assert!(m.row(u).iter().all(|&w| w == 0));
            }
        }
    }

    #[test]
    fn signature_of_two_components() {
        let (g, m) = solved(CorrelationLevel::L0);
        for s in &g.sources {
            let mut expect = vec![0; m.words()];
            for u in s.components() {
                for (e, r) in expect.iter_mut().zip(m.row(u as usize)) {
                    *e ^= r;
                }
            }
            assert_eq!(source_signature(&m, s), expect);
        }
    }
}
