//! Compile stabiliser circuits into detector error models by backward
//! traversal of a space-time error propagation graph.
//!
//! ```
//! use stepg::{circuit::parse_circuit, compile, CorrelationLevel, Schedule};
//!
//! let c = parse_circuit("R 0\nX_ERROR(0.01) 0\nTICK\nM 0\nDETECTOR rec[-1]").unwrap();
//! let dem = compile(&c, CorrelationLevel::L0, Schedule::Serial).unwrap();
//! assert_eq!(dem.to_text(), "error(0.01) D0\n");
//! ```

pub mod adaptive;
pub mod bench;
pub mod circuit;
pub mod codes;
pub mod compile;
pub mod dem;
pub mod eec;
pub mod error;
pub mod fixtures;
pub mod oracle;
pub mod sampler;
pub mod stepg;

pub use circuit::{Circuit, CircuitBuilder};
pub use compile::{compile, compile_timed, StageTimings};
pub use dem::{Dem, Hyperedge};
pub use eec::Schedule;
pub use stepg::CorrelationLevel;
