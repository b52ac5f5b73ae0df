//! Pairing of outer surface-code qubits into Iceberg blocks.

use crate::codes::{Basis, SurfaceLayout};
use crate::error::LayoutError;

/// Partner cell of `(r, c)`: reflected across the lattice and shifted two
/// columns.
pub fn partner(r: usize, c: usize, d: usize) -> Result<(usize, usize), LayoutError> {
    if r >= d || c >= d {
        return Err(LayoutError::OutOfRange { r, c, d });
    }
    Ok((d - 1 - r, (c + 2) % d))
}

/// Outer qubits grouped into `[[4,2,2]]` blocks.
///
/// Block `b` holds physical data qubits `4b..4b+4`, ordered `[a, b, c, e]`
/// with `a` shared by both logical X and both logical Z operators:
/// `X1 = XaXb`, `Z1 = ZaZc`, `X2 = XaXc`, `Z2 = ZaZb`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcebergLayout {
    pub d: usize,
    pub surface: SurfaceLayout,
    /// Outer qubit indices hosted by each block as (first, second) logical.
    pub blocks: Vec<(usize, usize)>,
    /// For each outer qubit: (block, logical slot 1 or 2).
    pub block_of: Vec<(usize, u8)>,
}

impl IcebergLayout {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn shared_qubit(&self, block: usize) -> u32 {
        4 * block as u32
    }

    pub fn block_data(&self, block: usize) -> [u32; 4] {
        let a = 4 * block as u32;
        [a, a + 1, a + 2, a + 3]
    }

    /// Physical support of logical X of outer qubit `q`.
    pub fn logical_x(&self, q: usize) -> [u32; 2] {
        let (b, slot) = self.block_of[q];
        let [a, bq, cq, _] = self.block_data(b);
        if slot == 1 {
            [a, bq]
        } else {
            [a, cq]
        }
    }

    /// Physical support of logical Z of outer qubit `q`.
    pub fn logical_z(&self, q: usize) -> [u32; 2] {
        let (b, slot) = self.block_of[q];
        let [a, bq, cq, _] = self.block_data(b);
        if slot == 1 {
            [a, cq]
        } else {
            [a, bq]
        }
    }

    /// Re-check all three pairing constraints.
    pub fn validate(&self) -> Result<(), LayoutError> {
        validate_pairs(&self.surface, &self.blocks)
    }
}

fn cell(q: usize, d: usize) -> (usize, usize) {
    (q / d, q % d)
}

fn validate_pairs(s: &SurfaceLayout, blocks: &[(usize, usize)]) -> Result<(), LayoutError> {
    let d = s.d;
    let mut seen = vec![false; d * d];
    for &(x, y) in blocks {
        let fail = |reason| LayoutError::Violation {
            a: cell(x, d),
            b: cell(y, d),
            reason,
        };
        if x == y || seen[x] || seen[y] {
            return Err(fail("qubit used twice"));
        }
        seen[x] = true;
        seen[y] = true;
        let cx = s.checks_on(x);
        if s.checks_on(y).iter().any(|c| cx.contains(c)) {
            return Err(fail("paired qubits share an outer check"));
        }
        for basis in [Basis::X, Basis::Z] {
            let tx = s.time_slots(x, basis);
            if s.time_slots(y, basis).iter().any(|t| tx.contains(t)) {
                return Err(fail("paired qubits share a time slot"));
            }
        }
    }
    if let Some(q) = seen.iter().position(|&v| !v) {
        return Err(LayoutError::Unpaired(cell(q, d)));
    }
    Ok(())
}

/// Pair qubits along orbits of the partner map, scanning in row-major order.
///
/// Starting from the first unpaired qubit `q`, the orbit `q, P(q), P²(q), …`
/// is cut into consecutive pairs `(q, P(q)), (P²(q), P³(q)), …`, so every
/// pair has the form `(x, P(x))`. Orbits have even length for even `d`.
pub fn build_layout(d: usize) -> Result<IcebergLayout, LayoutError> {
    if d % 2 == 1 {
        return Err(LayoutError::OddDistance(d));
    }
    if d < 2 {
        return Err(LayoutError::DistanceTooSmall(d));
    }
    let surface = SurfaceLayout::new(d);
    let index = |(r, c): (usize, usize)| r * d + c;
    let step = |q: usize| index(partner(q / d, q % d, d).expect("cell in range"));
    let mut paired = vec![false; d * d];
    let mut blocks = Vec::with_capacity(d * d / 2);
    for start in 0..d * d {
        if paired[start] {
            continue;
        }
        let mut q = start;
        loop {
            let p = step(q);
            if paired[q] || paired[p] || p == q {
                return Err(LayoutError::Unpaired(cell(q, d)));
            }
            paired[q] = true;
            paired[p] = true;
            blocks.push((q, p));
            q = step(p);
            if q == start {
                break;
            }
        }
    }
    validate_pairs(&surface, &blocks)?;
    let mut block_of = vec![(0, 0); d * d];
    for (b, &(x, y)) in blocks.iter().enumerate() {
        block_of[x] = (b, 1);
        block_of[y] = (b, 2);
    }
    Ok(IcebergLayout {
        d,
        surface,
        blocks,
        block_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partner_examples() {
        assert_eq!(partner(0, 0, 4).unwrap(), (3, 2));
        assert_eq!(partner(0, 0, 6).unwrap(), (5, 2));
        assert!(partner(4, 0, 4).is_err());
    }

    #[test]
    fn partner_is_an_involution_at_d4() {
        for r in 0..4 {
            for c in 0..4 {
                let (r2, c2) = partner(r, c, 4).unwrap();
                assert_eq!(partner(r2, c2, 4).unwrap(), (r, c));
            }
        }
    }

    #[test]
    fn leading_block() {
        let l = build_layout(4).unwrap();
        assert_eq!(l.blocks.len(), 8);
        assert_eq!(l.blocks[0], (0, 14));
        assert_eq!(l.block_of[14], (0, 2));
    }

    #[test]
    fn orbit_lengths_are_even() {
        for d in [4, 6, 8, 10] {
            let step = |q: usize| {
                let (r, c) = partner(q / d, q % d, d).unwrap();
                r * d + c
            };
            for q in 0..d * d {
                let mut n = 1;
                let mut x = step(q);
                while x != q {
                    x = step(x);
                    n += 1;
                }
                assert_eq!(n % 2, 0, "d={d} q={q}");
            }
        }
    }

    #[test]
    fn small_and_odd_distances() {
        assert_eq!(build_layout(3), Err(LayoutError::OddDistance(3)));
        assert!(matches!(
            build_layout(2),
            Err(LayoutError::Violation { .. })
        ));
    }

    #[test]
    fn logical_operators_commute_correctly() {
        let l = build_layout(4).unwrap();
        let overlap = |a: [u32; 2], b: [u32; 2]| a.iter().filter(|x| b.contains(x)).count();
        let (x, y) = l.blocks[0];
        assert_eq!(overlap(l.logical_x(x), l.logical_z(x)) % 2, 1);
        assert_eq!(overlap(l.logical_x(y), l.logical_z(y)) % 2, 1);
        assert_eq!(overlap(l.logical_x(x), l.logical_z(y)) % 2, 0);
        assert_eq!(overlap(l.logical_x(y), l.logical_z(x)) % 2, 0);
    }

    #[test]
    fn validation_rejects_bad_pairs() {
        let l = build_layout(4).unwrap();
        let mut blocks = l.blocks.clone();
        // Neighbours (0,0) and (0,1) share a check.
        let (x, _) = blocks[0];
        let j = blocks.iter().position(|&(a, b)| a == 1 || b == 1).unwrap();
        blocks[0] = (x, 1);
        blocks.remove(j);
        assert!(validate_pairs(&l.surface, &blocks).is_err());
    }
}
