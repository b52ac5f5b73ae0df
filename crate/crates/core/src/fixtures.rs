//! Frozen test corpus and its golden detector error models.
//!
//! A golden lives in `<root>/<name>/` as `circuit.txt`, `level`,
//! `expected.dem` and `note.md`. Expected models always come from the
//! forward-propagation oracle, and regeneration refuses to write anything
//! when the compiler disagrees with it.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::circuit::{parse_circuit, Circuit};
use crate::codes::{gen_repetition, gen_surface, NoiseModel};
use crate::compile::compile;
use crate::dem::{compare_dems, Dem};
use crate::eec::Schedule;
use crate::error::{CircuitError, LowerError};
use crate::oracle::build_dem_oracle;
use crate::stepg::CorrelationLevel;

/// Distance-3 repetition code, two rounds, with one labelled bit flip `E0`
/// to `E25` at every location. Qubits: d0=0, a0=1, d1=2, a1=3, d2=4.
/// Detectors: D0 first a0 outcome, D1 first a1 outcome, D2 and D3 the
/// round-to-round parities of a0 and a1.
pub const LABELLED_REPETITION: &str = "\
R 0 1 2 3 4
X_ERROR(0.001) 0 1 2 3 4
TICK
CX 0 1 2 3
X_ERROR(0.001) 0 1 2 3 4
TICK
CX 2 1 4 3
X_ERROR(0.001) 0 1 2 3 4
TICK
MR 1 3
X_ERROR(0.001) 0 1 2 3 4
DETECTOR rec[-2]
DETECTOR rec[-1]
TICK
CX 0 1 2 3
X_ERROR(0.001) 0 1 2 3 4
TICK
CX 2 1 4 3
X_ERROR(0.001) 1
TICK
MR 1 3
DETECTOR rec[-2] rec[-4]
DETECTOR rec[-1] rec[-3]
";

/// Colour names conventionally given to detectors 0..3.
pub const DETECTOR_COLOURS: [&str; 4] = ["orange", "green", "blue", "yellow"];

/// Label `E{i}` of every fault in `LABELLED_REPETITION`, in inventory order.
pub fn labelled_fault_names() -> Vec<String> {
    (0..26).map(|i| format!("E{i}")).collect()
}

pub fn labelled_repetition() -> Circuit {
    parse_circuit(LABELLED_REPETITION).expect("fixture parses")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCase {
    pub name: String,
    pub circuit: String,
    pub level: CorrelationLevel,
    pub note: String,
}

/// Every golden the repository carries.
pub fn corpus() -> Vec<GoldenCase> {
    let p = NoiseModel::new(0.001);
    let case = |name: &str, c: String, level, note: &str| GoldenCase {
        name: name.to_string(),
        circuit: c,
        level,
        note: note.to_string(),
    };
    vec![
        case(
            "labelled_repetition",
            LABELLED_REPETITION.to_string(),
            CorrelationLevel::L0,
            "Distance-3 repetition code over two rounds with 26 labelled X faults \
             (E0..E25, one X_ERROR target each, in order). D0 orange, D1 green, \
             D2 blue, D3 yellow. Nine equivalence classes; E3, E8 and E13 share one; \
             E12 flips blue and yellow.",
        ),
        case(
            "repetition_d3_r2",
            gen_repetition(3, 2, p).to_text(),
            CorrelationLevel::L1,
            "Generated repetition code, d=3, two rounds, p=0.001.",
        ),
        case(
            "surface_d3_r2_l0",
            gen_surface(3, 2, p, false).to_text(),
            CorrelationLevel::L0,
            "Generated rotated surface code, d=3, two rounds, p=0.001.",
        ),
        case(
            "surface_d3_r2_l2",
            gen_surface(3, 2, p, false).to_text(),
            CorrelationLevel::L2,
            "Same circuit as surface_d3_r2_l0 at full correlation.",
        ),
    ]
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{name}: {source}")]
    Circuit { name: String, source: CircuitError },
    #[error("{name}: {source}")]
    Lower { name: String, source: LowerError },
    #[error("{name}: compiler and oracle disagree: {detail}")]
    Divergence { name: String, detail: String },
    #[error("{name}: bad level file {content:?}")]
    Level { name: String, content: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Oracle model of a case, after checking the compiler agrees with it under
/// both schedules.
pub fn expected_dem(case: &GoldenCase) -> Result<Dem, FixtureError> {
    let c = parse_circuit(&case.circuit).map_err(|source| FixtureError::Circuit {
        name: case.name.clone(),
        source,
    })?;
    let mut oracle = build_dem_oracle(&c, case.level);
    oracle.canonicalize();
    for schedule in [Schedule::Serial, Schedule::Parallel] {
        let dem = compile(&c, case.level, schedule).map_err(|source| FixtureError::Lower {
            name: case.name.clone(),
            source,
        })?;
        if let Err(diffs) = compare_dems(&dem, &oracle, 1e-12) {
            return Err(FixtureError::Divergence {
                name: case.name.clone(),
                detail: diffs
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
    }
    Ok(oracle)
}

fn write_if_changed(
    path: &Path,
    content: &str,
    changed: &mut Vec<PathBuf>,
) -> Result<(), FixtureError> {
    if fs::read_to_string(path).ok().as_deref() == Some(content) {
        return Ok(());
    }
    fs::write(path, content).map_err(io_err(path))?;
    changed.push(path.to_path_buf());
    Ok(())
}

/// Rewrite every golden under `root`. All expected models are computed and
/// cross-checked before any file is touched. Returns the files that changed.
pub fn regenerate_goldens(root: &Path) -> Result<Vec<PathBuf>, FixtureError> {
    let cases = corpus();
    let dems = cases
        .iter()
        .map(expected_dem)
        .collect::<Result<Vec<_>, _>>()?;
    let mut changed = Vec::new();
    for (case, dem) in cases.iter().zip(&dems) {
        let dir = root.join(&case.name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_if_changed(&dir.join("circuit.txt"), &case.circuit, &mut changed)?;
        write_if_changed(
            &dir.join("level"),
            &format!("{}\n", case.level),
            &mut changed,
        )?;
        write_if_changed(&dir.join("expected.dem"), &dem.to_text(), &mut changed)?;
        write_if_changed(
            &dir.join("note.md"),
            &format!("# {}\n\n{}\n", case.name, case.note),
            &mut changed,
        )?;
    }
    Ok(changed)
}

/// A golden as stored on disk.
#[derive(Debug, Clone)]
pub struct StoredGolden {
    pub name: String,
    pub circuit: String,
    pub level: CorrelationLevel,
    pub expected: String,
}

pub fn load_golden(root: &Path, name: &str) -> Result<StoredGolden, FixtureError> {
    let dir = root.join(name);
    let read = |f: &str| {
        let p = dir.join(f);
        fs::read_to_string(&p).map_err(io_err(&p))
    };
    let level_text = read("level")?;
    let level = level_text.trim().parse().map_err(|_| FixtureError::Level {
        name: name.to_string(),
        content: level_text.clone(),
    })?;
    Ok(StoredGolden {
        name: name.to_string(),
        circuit: read("circuit.txt")?,
        level,
        expected: read("expected.dem")?,
    })
}
