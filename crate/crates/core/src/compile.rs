//! The end-to-end pipeline: lower, traverse, sign, reduce.

use std::time::{Duration, Instant};

use crate::circuit::Circuit;
use crate::dem::{reduce, Dem, Signatures};
use crate::eec::{all_signatures, init_leaves, run_backward, EecMatrix, Schedule};
use crate::error::LowerError;
use crate::stepg::{lower, CorrelationLevel};

/// Wall time of each pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub lower: Duration,
    pub traverse: Duration,
    pub signatures: Duration,
    pub reduce: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.lower + self.traverse + self.signatures + self.reduce
    }
}

pub fn compile(
    c: &Circuit,
    level: CorrelationLevel,
    schedule: Schedule,
) -> Result<Dem, LowerError> {
    compile_timed(c, level, schedule).map(|(d, _)| d)
}

pub fn compile_timed(
    c: &Circuit,
    level: CorrelationLevel,
    schedule: Schedule,
) -> Result<(Dem, StageTimings), LowerError> {
    let mut t = StageTimings::default();
    let start = Instant::now();
    let g = lower(c, level)?;
    t.lower = start.elapsed();

    let start = Instant::now();
    let mut m = EecMatrix::for_graph(&g);
    init_leaves(&g, &mut m)?;
    run_backward(&g, &mut m, schedule);
    t.traverse = start.elapsed();

    let start = Instant::now();
    let words = all_signatures(&g, &m, schedule);
    let probabilities: Vec<f64> = g.sources.iter().map(|s| s.probability).collect();
    t.signatures = start.elapsed();

    let start = Instant::now();
    let dem = reduce(Signatures {
        words: &words,
        width: m.words(),
        probabilities: &probabilities,
        num_detectors: g.num_detectors(),
        num_observables: g.num_observables(),
    });
    t.reduce = start.elapsed();
    Ok((dem, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    #[test]
    fn noiseless_circuit_has_empty_dem() {
        let c = parse_circuit("R 0\nTICK\nM 0\nDETECTOR rec[-1]").unwrap();
        let d = compile(&c, CorrelationLevel::L2, Schedule::Serial).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.num_detectors, 1);
    }

    #[test]
    fn empty_circuit() {
        let d = compile(
            &Circuit::default(),
            CorrelationLevel::L0,
            Schedule::Parallel,
        )
        .unwrap();
        assert_eq!(d, Dem::default());
    }

    #[test]
    fn z_before_mr_is_invisible() {
        let c = parse_circuit("R 0\nZ_ERROR(0.1) 0\nTICK\nMR 0\nDETECTOR rec[-1]").unwrap();
        assert!(compile(&c, CorrelationLevel::L0, Schedule::Serial)
            .unwrap()
            .is_empty());
        let c = parse_circuit("R 0\nX_ERROR(0.1) 0\nTICK\nMR 0\nDETECTOR rec[-1]").unwrap();
        assert_eq!(
            compile(&c, CorrelationLevel::L0, Schedule::Serial)
                .unwrap()
                .to_text(),
            "error(0.1) D0\n"
        );
    }
}
