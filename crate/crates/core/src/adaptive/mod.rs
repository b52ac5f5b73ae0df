//! Adaptive syndrome extraction on a concatenated Iceberg/surface code,
//! with a fresh detector error model compiled for every shot.

pub mod concat;
pub mod layout;
pub mod shot;
pub mod tracker;

pub use concat::{gen_concatenated, ConcatBuilder};
pub use layout::{build_layout, partner, IcebergLayout};
pub use shot::{run_shot, run_shots, AdaptiveConfig, ShotRecord};
pub use tracker::{CheckKind, DetectorTracker};

use crate::error::DomainError;

/// Per-round error rate whose `rounds`-fold composition gives total rate
/// `total`: `½(1 − (1 − 2R)^{1/d})`.
pub fn per_round_rate(total: f64, rounds: usize) -> Result<f64, DomainError> {
    if !(0.0..=0.5).contains(&total) || rounds == 0 {
        return Err(DomainError {
            rate: total,
            rounds,
        });
    }
    if rounds == 1 {
        return Ok(total);
    }
    // Same expression, evaluated without cancellation for small rates.
    Ok(-0.5 * ((-2.0 * total).ln_1p() / rounds as f64).exp_m1())
}
