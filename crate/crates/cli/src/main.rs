use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stepg::adaptive::{build_layout, run_shots, AdaptiveConfig, ShotRecord};
use stepg::bench::bench_compile;
use stepg::circuit::{parse_circuit, Circuit};
use stepg::codes::{gen_repetition, gen_surface, NoiseModel};
use stepg::dem::{compare_dems, parse_dem};
use stepg::fixtures::regenerate_goldens;
use stepg::oracle::build_dem_oracle;
use stepg::{compile_timed, CorrelationLevel, Schedule};

#[derive(Parser)]
#[command(
    name = "stepg",
    version,
    about = "Compile stabiliser circuits into detector error models"
)]
struct Cli {
    /// Worker threads; more than one selects the parallel engine schedule.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a circuit file into a detector error model.
    Compile {
        input: PathBuf,
        #[arg(long, default_value = "0")]
        level: CorrelationLevel,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the compiler against the forward-propagation oracle.
    Verify {
        input: PathBuf,
        #[arg(long, default_value = "0")]
        level: CorrelationLevel,
        /// Also compare against this model file.
        #[arg(long)]
        expected: Option<PathBuf>,
        /// Refuse circuits with more than this many qubit-layers.
        #[arg(long, default_value_t = 20000)]
        cap: usize,
    },
    /// Generate a memory-experiment circuit.
    Gen {
        code: Code,
        #[command(flatten)]
        shape: Shape,
        /// Emit detectors for Z checks only (surface code).
        #[arg(long)]
        z_only: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time compilation of a generated circuit; writes one CSV record.
    Bench {
        #[arg(long, value_enum, default_value_t = Code::Surface)]
        code: Code,
        #[command(flatten)]
        shape: Shape,
        #[arg(long, default_value = "2")]
        level: CorrelationLevel,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare two model files.
    DemDiff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Adaptive concatenated-code experiments.
    Adaptive {
        #[command(subcommand)]
        command: AdaptiveCommand,
    },
    /// Rewrite the golden fixtures from the oracle.
    Fixtures {
        #[arg(default_value = "fixtures")]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum AdaptiveCommand {
    /// Simulate shots and write one CSV row per shot.
    Run {
        #[arg(long, default_value_t = 4)]
        distance: usize,
        /// Defaults to the distance.
        #[arg(long)]
        rounds: Option<usize>,
        /// Defaults to half the distance.
        #[arg(long)]
        refresh: Option<usize>,
        #[arg(long, default_value_t = 0.001)]
        noise: f64,
        #[arg(long, default_value_t = 100)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also emit detectors for X-type checks.
        #[arg(long)]
        all_checks: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Code {
    Repetition,
    Surface,
}

#[derive(Args)]
struct Shape {
    #[arg(long, default_value_t = 3)]
    distance: usize,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    #[arg(long, default_value_t = 0.001)]
    noise: f64,
}

impl Shape {
    fn generate(&self, code: Code, z_only: bool) -> Result<Circuit> {
        if !(0.0..=1.0).contains(&self.noise) {
            bail!("noise {} is not a probability", self.noise);
        }
        if self.rounds == 0 {
            bail!("need at least one round");
        }
        let noise = NoiseModel::new(self.noise);
        Ok(match code {
            Code::Repetition => {
                if self.distance < 2 {
                    bail!("repetition code needs distance >= 2");
                }
                gen_repetition(self.distance, self.rounds, noise)
            }
            Code::Surface => {
                if self.distance < 2 {
                    bail!("surface code needs distance >= 2");
                }
                gen_surface(self.distance, self.rounds, noise, z_only)
            }
        })
    }
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_circuit(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(path: Option<&Path>, content: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(content).context("writing to stdout"),
    }
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => {
            Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn shot_row(r: &ShotRecord) -> Vec<String> {
    let join = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    let fired = r.detector_values.iter().filter(|&&v| v).count();
    let max_weight = r.weights.len().saturating_sub(1);
    vec![
        r.shot.to_string(),
        join(&r.triggered),
        r.detector_values.len().to_string(),
        fired.to_string(),
        r.dem.len().to_string(),
        r.compile.total().as_nanos().to_string(),
        join(&r.weights),
        max_weight.to_string(),
    ]
}

fn run(cli: Cli) -> Result<ExitCode> {
    let schedule = match cli.threads {
        Some(t) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .context("configuring the thread pool")?;
            if t > 1 {
                Schedule::Parallel
            } else {
                Schedule::Serial
            }
        }
        None => Schedule::Serial,
    };
    match cli.command {
        Command::Compile {
            input,
            level,
            output,
        } => {
            let c = read_circuit(&input)?;
            let start = Instant::now();
            let (dem, _) = compile_timed(&c, level, schedule)?;
            let wall = start.elapsed();
            write_output(output.as_deref(), dem.to_text().as_bytes())?;
            eprintln!(
                "D={} O={} E={} time={:.3}ms",
                dem.num_detectors,
                dem.num_observables,
                dem.len(),
                wall.as_secs_f64() * 1e3
            );
        }
        Command::Verify {
            input,
            level,
            expected,
            cap,
        } => {
            let c = read_circuit(&input)?;
            let size = c.num_qubits as usize * c.num_layers();
            if size > cap {
                bail!("circuit has {size} qubit-layers, above the oracle cap of {cap}");
            }
            let (dem, _) = compile_timed(&c, level, schedule)?;
            let oracle = build_dem_oracle(&c, level);
            if let Err(diffs) = compare_dems(&dem, &oracle, 1e-12) {
                println!("FAIL compiler vs oracle: {}", diffs[0]);
                return Ok(ExitCode::FAILURE);
            }
            if let Some(path) = expected {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let want =
                    parse_dem(&text).with_context(|| format!("parsing {}", path.display()))?;
                if let Err(diffs) = compare_dems(&dem, &want, 1e-12) {
                    println!("FAIL compiler vs {}: {}", path.display(), diffs[0]);
                    return Ok(ExitCode::FAILURE);
                }
            }
            println!("OK {} hyperedges", dem.len());
        }
        Command::Gen {
            code,
            shape,
            z_only,
            output,
        } => {
            let c = shape.generate(code, z_only)?;
            write_output(output.as_deref(), c.to_text().as_bytes())?;
        }
        Command::Bench {
            code,
            shape,
            level,
            iters,
            output,
        } => {
            if iters == 0 {
                bail!("need at least one iteration");
            }
            let c = shape.generate(code, false)?;
            let label = format!(
                "{}_d{}_r{}",
                match code {
                    Code::Repetition => "repetition",
                    Code::Surface => "surface",
                },
                shape.distance,
                shape.rounds
            );
            let rec = bench_compile(&label, &c, shape.rounds, level, schedule, iters)?;
            let mut w = csv_writer(output.as_deref())?;
            w.serialize(&rec)?;
            w.flush()?;
        }
        Command::DemDiff { a, b, tolerance } => {
            let load = |p: &Path| -> Result<_> {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                parse_dem(&text).with_context(|| format!("parsing {}", p.display()))
            };
            let (x, y) = (load(&a)?, load(&b)?);
            match compare_dems(&x, &y, tolerance) {
                Ok(()) => println!("equal ({} hyperedges)", x.len()),
                Err(diffs) => {
                    for d in &diffs {
                        println!("{d}");
                    }
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Adaptive {
            command:
                AdaptiveCommand::Run {
                    distance,
                    rounds,
                    refresh,
                    noise,
                    shots,
                    seed,
                    all_checks,
                    output,
                },
        } => {
            if !(0.0..=1.0).contains(&noise) {
                bail!("noise {noise} is not a probability");
            }
            let layout = build_layout(distance)?;
            let mut cfg = AdaptiveConfig::new(distance, noise);
            cfg.rounds = rounds.unwrap_or(distance);
            cfg.refresh = refresh.unwrap_or(cfg.refresh);
            cfg.shots = shots;
            cfg.seed = seed;
            cfg.z_only = !all_checks;
            if cfg.rounds == 0 || cfg.refresh == 0 {
                bail!("rounds and refresh must be positive");
            }
            let records = run_shots(&cfg, &layout);
            let mut w = csv_writer(output.as_deref())?;
            w.write_record([
                "shot",
                "triggered_per_round",
                "detectors",
                "fired_detectors",
                "hyperedges",
                "compile_ns",
                "weight_histogram",
                "max_weight",
            ])?;
            for r in &records {
                w.write_record(shot_row(r))?;
            }
            w.flush()?;
        }
        Command::Fixtures { dir } => {
            let changed = regenerate_goldens(&dir)?;
            for p in &changed {
                eprintln!("wrote {}", p.display());
            }
            eprintln!("{} files changed", changed.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
