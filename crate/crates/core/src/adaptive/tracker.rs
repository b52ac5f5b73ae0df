//! Detector instantiation for circuits whose check schedule is decided
//! while they run.

/// How a check contributes detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckKind {
    /// The first outcome is fixed in the absence of noise.
    pub deterministic_first: bool,
    /// Emit detectors for this check at all.
    pub emit: bool,
}

/// Previous and current measurement index of every check. A detector
/// exists for a check in a round iff the two differ.
#[derive(Debug, Clone)]
pub struct DetectorTracker {
    kinds: Vec<CheckKind>,
    prev: Vec<Option<usize>>,
    cur: Vec<Option<usize>>,
    detectors: usize,
}

impl DetectorTracker {
    pub fn new(kinds: Vec<CheckKind>) -> Self {
        let n = kinds.len();
        Self {
            kinds,
            prev: vec![None; n],
            cur: vec![None; n],
            detectors: 0,
        }
    }

    pub fn num_checks(&self) -> usize {
        self.kinds.len()
    }

    /// Number of detectors handed out so far.
    pub fn num_detectors(&self) -> usize {
        self.detectors
    }

    /// Check `check` was executed with result in measurement `record`.
    pub fn executed(&mut self, check: usize, record: usize) {
        self.cur[check] = Some(record);
    }

    pub fn current(&self, check: usize) -> Option<usize> {
        self.cur[check]
    }

    /// Close a round: return, in check order, the measurement sets of the
    /// detectors to instantiate, and advance the previous indices.
    pub fn end_round(&mut self) -> Vec<(usize, Vec<usize>)> {
        let mut out = Vec::new();
        for c in 0..self.kinds.len() {
            if self.cur[c] == self.prev[c] {
                continue;
            }
            let cur = self.cur[c].expect("index only advances on execution");
            let set = match self.prev[c] {
                Some(p) => Some(vec![p, cur]),
                None if self.kinds[c].deterministic_first => Some(vec![cur]),
                None => None,
            };
            if let (Some(set), true) = (set, self.kinds[c].emit) {
                out.push((c, set));
            }
            self.prev[c] = self.cur[c];
        }
        self.detectors += out.len();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DET: CheckKind = CheckKind {
        deterministic_first: true,
        emit: true,
    };
    const RANDOM: CheckKind = CheckKind {
        deterministic_first: false,
        emit: true,
    };

    #[test]
    fn detectors_only_when_indices_differ() {
        let mut t = DetectorTracker::new(vec![DET, RANDOM]);
        t.executed(0, 0);
        t.executed(1, 1);
        assert_eq!(t.end_round(), vec![(0, vec![0])]);
        // Round without check 1.
        t.executed(0, 2);
        assert_eq!(t.end_round(), vec![(0, vec![0, 2])]);
        // Check 1 compares against its last execution, two rounds back.
        t.executed(1, 3);
        assert_eq!(t.end_round(), vec![(1, vec![1, 3])]);
        assert_eq!(t.end_round(), vec![]);
        assert_eq!(t.num_detectors(), 3);
    }

    #[test]
    fn muted_checks_still_advance() {
        let mut t = DetectorTracker::new(vec![CheckKind {
            deterministic_first: true,
            emit: false,
        }]);
        t.executed(0, 5);
        assert!(t.end_round().is_empty());
        assert_eq!(t.current(0), Some(5));
    }
}
