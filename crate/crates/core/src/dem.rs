//! Signature deduplication and the detector error model.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::DemError;

/// Probability that exactly one of two independent events fires.
#[inline]
pub fn merge_prob(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1 (multiply, then XOR) over raw bytes.
pub fn fnv1_64_bytes(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| {
        h.wrapping_mul(FNV_PRIME) ^ b as u64
    })
}

/// FNV-1 of a signature, each word as little-endian bytes, word 0 first.
pub fn fnv1_64(words: &[u64]) -> u64 {
    let mut h = FNV_OFFSET_BASIS;
    for w in words {
        for b in w.to_le_bytes() {
            h = h.wrapping_mul(FNV_PRIME) ^ b as u64;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    pub detectors: Vec<u32>,
    pub observables: Vec<u32>,
    pub probability: f64,
}

impl Hyperedge {
    fn key_cmp(&self, other: &Self) -> Ordering {
        (&self.detectors, &self.observables).cmp(&(&other.detectors, &other.observables))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dem {
    pub num_detectors: usize,
    pub num_observables: usize,
    pub hyperedges: Vec<Hyperedge>,
}

impl Dem {
    pub fn len(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperedges.is_empty()
    }

    /// Sort hyperedges by (detectors, observables).
    pub fn canonicalize(&mut self) {
        self.hyperedges.sort_by(Hyperedge::key_cmp);
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Hyperedge with exactly these targets, if present.
    pub fn find(&self, detectors: &[u32], observables: &[u32]) -> Option<&Hyperedge> {
        self.hyperedges
            .iter()
            .find(|h| h.detectors == detectors && h.observables == observables)
    }
}

impl fmt::Display for Dem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut line = String::new();
        for h in &self.hyperedges {
            line.clear();
            let _ = write!(line, "error({})", h.probability);
            for d in &h.detectors {
                let _ = write!(line, " D{d}");
            }
            for o in &h.observables {
                let _ = write!(line, " L{o}");
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Parse the `error(p) D.. L..` subset. Counts are inferred from the largest
/// target seen.
pub fn parse_dem(text: &str) -> Result<Dem, DemError> {
    let mut dem = Dem::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| DemError::Parse {
            line: i + 1,
            message,
        };
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap();
        let p = head
            .strip_prefix("error(")
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| err(format!("expected error(p), found '{head}'")))?;
        let probability: f64 = p
            .parse()
            .map_err(|_| err(format!("bad probability '{p}'")))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(err(format!("probability {probability} is outside [0, 1]")));
        }
        let mut h = Hyperedge {
            detectors: Vec::new(),
            observables: Vec::new(),
            probability,
        };
        for t in toks {
            let (list, num) = if let Some(n) = t.strip_prefix('D') {
                (&mut h.detectors, n)
            } else if let Some(n) = t.strip_prefix('L') {
                (&mut h.observables, n)
            } else {
                return Err(err(format!("unexpected target '{t}'")));
            };
            let v: u32 = num.parse().map_err(|_| err(format!("bad target '{t}'")))?;
            if list.last().is_some_and(|&last| last >= v) {
                return Err(err(format!("targets must be strictly ascending at '{t}'")));
            }
            list.push(v);
        }
        if h.detectors.is_empty() && h.observables.is_empty() {
            return Err(err("error with no targets".into()));
        }
        if let Some(&d) = h.detectors.last() {
            dem.num_detectors = dem.num_detectors.max(d as usize + 1);
        }
        if let Some(&o) = h.observables.last() {
            dem.num_observables = dem.num_observables.max(o as usize + 1);
        }
        dem.hyperedges.push(h);
    }
    Ok(dem)
}

impl std::str::FromStr for Dem {
    type Err = DemError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dem(s)
    }
}

/// First difference found between two models.
#[derive(Debug, Clone, PartialEq)]
pub enum DemDiff {
    Count { left: usize, right: usize },
    OnlyLeft(Hyperedge),
    OnlyRight(Hyperedge),
    Probability { left: Hyperedge, right: f64 },
    Duplicate(Hyperedge),
}

fn targets(h: &Hyperedge) -> String {
    let mut s = String::new();
    for d in &h.detectors {
        let _ = write!(s, " D{d}");
    }
    for o in &h.observables {
        let _ = write!(s, " L{o}");
    }
    s
}

impl fmt::Display for DemDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemDiff::Count { left, right } => {
                write!(f, "hyperedge counts differ: {left} vs {right}")
            }
            DemDiff::OnlyLeft(h) => {
                write!(f, "only in left: error({}){}", h.probability, targets(h))
            }
            DemDiff::OnlyRight(h) => {
                write!(f, "only in right: error({}){}", h.probability, targets(h))
            }
            DemDiff::Probability { left, right } => write!(
                f,
                "probability differs for{}: {} vs {right}",
                targets(left),
                left.probability
            ),
            DemDiff::Duplicate(h) => write!(f, "duplicate hyperedge{}", targets(h)),
        }
    }
}

/// Compare hyperedge sets, probabilities within `tol` absolute.
///
/// A count mismatch is reported together with the first differing edge when
/// one exists.
pub fn compare_dems(a: &Dem, b: &Dem, tol: f64) -> Result<(), Vec<DemDiff>> {
    fn sorted(d: &Dem) -> Vec<&Hyperedge> {
        let mut v: Vec<&Hyperedge> = d.hyperedges.iter().collect();
        v.sort_by(|x, y| x.key_cmp(y));
        v
    }
    let (x, y) = (sorted(a), sorted(b));
    let mut diffs = Vec::new();
    if x.len() != y.len() {
        diffs.push(DemDiff::Count {
            left: x.len(),
            right: y.len(),
        });
    }
    for v in [&x, &y] {
        if let Some(w) = v.windows(2).find(|w| w[0].key_cmp(w[1]) == Ordering::Equal) {
            diffs.push(DemDiff::Duplicate(w[0].clone()));
            return Err(diffs);
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let ord = match (x.get(i), y.get(j)) {
            (Some(l), Some(r)) => l.key_cmp(r),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                diffs.push(DemDiff::OnlyLeft(x[i].clone()));
                break;
            }
            Ordering::Greater => {
                diffs.push(DemDiff::OnlyRight(y[j].clone()));
                break;
            }
            Ordering::Equal => {
                let (l, r) = (x[i], y[j]);
                if !((l.probability - r.probability).abs() <= tol) {
                    diffs.push(DemDiff::Probability {
                        left: l.clone(),
                        right: r.probability,
                    });
                    break;
                }
                i += 1;
                j += 1;
            }
        }
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(diffs)
    }
}

/// Signatures of all sources, flattened with a fixed word count.
#[derive(Debug, Clone, Copy)]
pub struct Signatures<'a> {
    pub words: &'a [u64],
    pub width: usize,
    pub probabilities: &'a [f64],
    pub num_detectors: usize,
    pub num_observables: usize,
}

impl<'a> Signatures<'a> {
    fn get(&self, i: usize) -> &'a [u64] {
        &self.words[i * self.width..(i + 1) * self.width]
    }

    fn len(&self) -> usize {
        self.probabilities.len()
    }
}

const PAR_SORT_MIN: usize = 1 << 14;

/// Deduplicate with FNV-1 keys.
pub fn reduce(s: Signatures<'_>) -> Dem {
    reduce_with_hasher(s, fnv1_64)
}

pub fn reduce_with_hasher<H>(s: Signatures<'_>, hasher: H) -> Dem
where
    H: Fn(&[u64]) -> u64 + Sync,
{
    reduce_grouped(s, hasher).0
}

/// Full reduction, also returning the source indices folded into each
/// hyperedge (same order as the hyperedges).
pub fn reduce_grouped<H>(s: Signatures<'_>, hasher: H) -> (Dem, Vec<Vec<usize>>)
where
    H: Fn(&[u64]) -> u64 + Sync,
{
    assert_eq!(s.words.len(), s.len() * s.width, "signature buffer size");
    let n = s.len();
    let keys: Vec<u64> = if n >= PAR_SORT_MIN {
        (0..n).into_par_iter().map(|i| hasher(s.get(i))).collect()
    } else {
        (0..n).map(|i| hasher(s.get(i))).collect()
    };
    let order_key = |&a: &usize, &b: &usize| {
        keys[a]
            .cmp(&keys[b])
            .then_with(|| s.get(a).cmp(s.get(b)))
            .then_with(|| s.probabilities[a].total_cmp(&s.probabilities[b]))
            .then_with(|| a.cmp(&b))
    };
    let mut order: Vec<usize> = (0..n).collect();
    if n >= PAR_SORT_MIN {
        order.par_sort_unstable_by(order_key);
    } else {
        order.sort_unstable_by(order_key);
    }

    let d = s.num_detectors;
    let mut edges: Vec<(Hyperedge, Vec<usize>)> = Vec::new();
    let mut i = 0;
    while i < n {
        let first = order[i];
        let sig = s.get(first);
        let mut j = i + 1;
        while j < n && keys[order[j]] == keys[first] && s.get(order[j]) == sig {
            j += 1;
        }
        if sig.iter().any(|&w| w != 0) {
            let probability = order[i..j]
                .iter()
                .fold(0.0, |acc, &k| merge_prob(acc, s.probabilities[k]));
            let mut h = Hyperedge {
                detectors: Vec::new(),
                observables: Vec::new(),
                probability,
            };
            for bit in crate::eec::bits_of(sig) {
                if bit < d {
                    h.detectors.push(bit as u32);
                } else {
                    h.observables.push((bit - d) as u32);
                }
            }
            let mut members = order[i..j].to_vec();
            members.sort_unstable();
            edges.push((h, members));
        }
        i = j;
    }
    edges.sort_by(|a, b| a.0.key_cmp(&b.0));
    let (hyperedges, groups) = edges.into_iter().unzip();
    (
        Dem {
            num_detectors: s.num_detectors,
            num_observables: s.num_observables,
            hyperedges,
        },
        groups,
    )
}
