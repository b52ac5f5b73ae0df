//! Acceptance criteria, one PASS/FAIL line each. Run with `--nocapture` to
//! see the report.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stepg::adaptive::concat::gen_concatenated;
use stepg::adaptive::shot::{shot_rng, simulate_shot};
use stepg::adaptive::{build_layout, per_round_rate, run_shot, AdaptiveConfig};
use stepg::bench::bench_compile;
use stepg::circuit::Circuit;
use stepg::codes::{gen_repetition, gen_surface, Basis, NoiseModel};
use stepg::dem::{compare_dems, merge_prob, Dem};
use stepg::fixtures::labelled_repetition;
use stepg::oracle::{build_dem_oracle, propagate_error};
use stepg::sampler::sample_circuit;
use stepg::stepg::fault_inventory;
use stepg::{compile, CorrelationLevel, Schedule};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn oracle_corpus() -> Vec<(&'static str, Circuit)> {
    let p = NoiseModel::new(0.001);
    vec![
        ("repetition_d3_r2", gen_repetition(3, 2, p)),
        ("surface_d3_r2", gen_surface(3, 2, p, false)),
        ("surface_d3_r3", gen_surface(3, 3, p, false)),
    ]
}

/// Everything the determinism and monotonicity criteria range over.
fn full_corpus() -> Vec<(String, Circuit)> {
    let p = NoiseModel::new(0.001);
    let mut v: Vec<(String, Circuit)> = oracle_corpus()
        .into_iter()
        .map(|(n, c)| (n.to_string(), c))
        .collect();
    v.push(("labelled_repetition".into(), labelled_repetition()));
    v.push(("surface_d5_r5".into(), gen_surface(5, 5, p, false)));
    v.push(("surface_d5_r3_zonly".into(), gen_surface(5, 3, p, true)));
    v.push(("repetition_d7_r7".into(), gen_repetition(7, 7, p)));
    let layout = build_layout(4).unwrap();
    v.push((
        "concatenated_d4_r2".into(),
        gen_concatenated(&layout, 2, p, true),
    ));
    v
}

fn c1_labelled_repetition() -> Outcome {
    let start = Instant::now();
    let c = labelled_repetition();
    let dem = compile(&c, CorrelationLevel::L0, Schedule::Serial).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    // Classes from forward propagation of each labelled fault.
    let faults = fault_inventory(&c, CorrelationLevel::L0);
    let sig = |i: usize| propagate_error(&c, &faults[i].kind).unwrap();
    let merged = sig(3) == sig(8) && sig(8) == sig(13);
    let members = (0..faults.len()).filter(|&i| sig(i) == sig(3)).count();
    let edge = dem.find(&sig(3).0, &sig(3).1);
    let one_edge = edge.is_some_and(|h| {
        let mut p = 0.0;
        for _ in 0..members {
            p = merge_prob(p, 0.001);
        }
        (h.probability - p).abs() < 1e-15
    });
    let e12 = sig(12) == (vec![2, 3], vec![]);
    check(
        dem.len() == 9 && merged && one_edge && e12 && elapsed < Duration::from_secs(1),
        format!("9 hyperedges, E3/E8/E13 merged, E12 -> {{D2 blue, D3 yellow}}, {elapsed:?}"),
        format!(
            "{} hyperedges, merged={merged}, single edge={one_edge}, E12 blue+yellow={e12}, {elapsed:?}",
            dem.len()
        ),
    )
}

fn c2_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for (name, c) in oracle_corpus() {
        for level in CorrelationLevel::ALL {
            let oracle = build_dem_oracle(&c, level);
            for schedule in [Schedule::Serial, Schedule::Parallel] {
                let dem = compile(&c, level, schedule).map_err(|e| e.to_string())?;
                if let Err(d) = compare_dems(&dem, &oracle, 1e-12) {
                    return Err(format!("{name} {level} {schedule:?}: {}", d[0]));
                }
                cases += 1;
            }
        }
    }
    let t = start.elapsed();
    check(
        t < Duration::from_secs(60),
        format!("{cases} circuit/level/schedule cases equal within 1e-12 in {t:?}"),
        format!("equal but took {t:?}"),
    )
}

fn c3_merge_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let (a, b, c) = (a * 0.5, b * 0.5, c * 0.5);
        if merge_prob(a, 0.0) != a || merge_prob(0.5, a) != 0.5 {
            return Err(format!("identity or absorption fails at {a}"));
        }
        worst = worst
            .max((merge_prob(a, b) - merge_prob(b, a)).abs())
            .max((merge_prob(merge_prob(a, b), c) - merge_prob(a, merge_prob(b, c))).abs());
    }
    check(
        worst <= 1e-15,
        format!("identity, absorption exact; worst comm/assoc error {worst:e} over 1e4 triples"),
        format!("worst comm/assoc error {worst:e}"),
    )
}

fn c4_per_round_rate() -> Outcome {
    let zero = (1..50).all(|d| per_round_rate(0.0, d) == Ok(0.0));
    let ident = [0.0, 0.01, 0.18, 0.3, 0.5]
        .iter()
        .all(|&r| per_round_rate(r, 1) == Ok(r));
    let v = per_round_rate(0.18, 2).map_err(|e| e.to_string())?;
    check(
        zero && ident && (v - 0.1).abs() <= 1e-12,
        format!("(0,d)=0, (R,1)=R, (0.18,2)={v}"),
        format!("zero={zero} identity={ident} (0.18,2)={v}"),
    )
}

fn c5_levels() -> Outcome {
    let alpha: Vec<u32> = CorrelationLevel::ALL.iter().map(|l| l.alpha()).collect();
    if alpha != [2, 4, 7] {
        return Err(format!("alpha = {alpha:?}"));
    }
    let mut rows = Vec::new();
    for (name, c) in full_corpus() {
        let n: Vec<usize> = CorrelationLevel::ALL
            .iter()
            .map(|&l| compile(&c, l, Schedule::Serial).map(|d| d.len()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        if !(n[0] <= n[1] && n[1] <= n[2]) {
            return Err(format!("{name}: counts {n:?}"));
        }
        rows.push(format!("{name} {n:?}"));
    }
    Ok(format!(
        "alpha (2,4,7); monotone counts: {}",
        rows.join(", ")
    ))
}

fn c6_determinism() -> Outcome {
    let corpus = full_corpus();
    for (name, c) in &corpus {
        for level in CorrelationLevel::ALL {
            let reference = compile(c, level, Schedule::Serial)
                .map_err(|e| e.to_string())?
                .to_text();
            for run in 0..20 {
                let schedule = if run % 2 == 0 {
                    Schedule::Parallel
                } else {
                    Schedule::Serial
                };
                let text = compile(c, level, schedule)
                    .map_err(|e| e.to_string())?
                    .to_text();
                if text != reference {
                    return Err(format!("{name} {level}: run {run} ({schedule:?}) differs"));
                }
            }
        }
    }
    Ok(format!(
        "{} circuits x 3 levels, 20 runs each alternating schedules, byte-identical",
        corpus.len()
    ))
}

fn c7_noiseless() -> Outcome {
    for d in [3, 5] {
        let c = gen_surface(d, d, NoiseModel::noiseless(), false);
        for seed in 0..1000 {
            let (dets, obs) = sample_circuit(&c, seed);
            if dets.iter().chain(&obs).any(|&b| b) {
                return Err(format!("surface d={d} seed {seed} fired"));
            }
        }
    }
    let layout = build_layout(4).unwrap();
    let cfg = AdaptiveConfig::new(4, 0.0);
    for shot in 0..1000 {
        let s = simulate_shot(&cfg, &layout, shot_rng(7, shot));
        if s.detector_values
            .iter()
            .chain(&s.observable_values)
            .any(|&b| b)
        {
            return Err(format!("adaptive shot {shot} fired"));
        }
    }
    Ok("surface d=3,5 and adaptive d=4: 1000 shots each, all detectors zero".into())
}

fn c8_adaptive_static() -> Outcome {
    let layout = build_layout(4).unwrap();
    let p = 0.001;
    let mut cfg = AdaptiveConfig::new(4, p);
    cfg.refresh = 1;
    cfg.seed = 11;
    let mut stat: Dem = compile(
        &gen_concatenated(&layout, cfg.rounds, NoiseModel::new(p), cfg.z_only),
        CorrelationLevel::L0,
        Schedule::Serial,
    )
    .map_err(|e| e.to_string())?;
    stat.canonicalize();
    for shot in 0..5 {
        let r = run_shot(&cfg, &layout, shot);
        if r.dem != stat {
            return Err(format!(
                "shot {shot}: {} vs {} hyperedges",
                r.dem.len(),
                stat.len()
            ));
        }
    }
    Ok(format!(
        "5 shots, each equal to the static model ({} hyperedges)",
        stat.len()
    ))
}

fn c9_layouts() -> Outcome {
    for d in [4, 6, 8, 10] {
        let l = build_layout(d).map_err(|e| format!("d={d}: {e}"))?;
        l.validate().map_err(|e| format!("d={d}: {e}"))?;
        // Independent recount of the three constraints.
        let mut seen = vec![0; d * d];
        for &(x, y) in &l.blocks {
            seen[x] += 1;
            seen[y] += 1;
            let sx = l.surface.checks_on(x);
            if l.surface.checks_on(y).iter().any(|c| sx.contains(c)) {
                return Err(format!("d={d}: {x},{y} share a check"));
            }
            for basis in [Basis::X, Basis::Z] {
                let ax = l.surface.time_slots(x, basis);
                if l.surface
                    .time_slots(y, basis)
                    .iter()
                    .any(|t| ax.contains(t))
                {
                    return Err(format!("d={d}: {x},{y} share a {basis:?} time slot"));
                }
            }
        }
        if seen.iter().any(|&n| n != 1) {
            return Err(format!("d={d}: not a perfect matching"));
        }
    }
    Ok("d=4,6,8,10: perfect matching, disjoint checks, distinct time slots".into())
}

fn c10_performance() -> Outcome {
    let level = CorrelationLevel::L2;
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [7, 9] {
        let c = gen_surface(d, 1, NoiseModel::new(0.001), false);
        let r = bench_compile(
            &format!("surface_d{d}"),
            &c,
            1,
            level,
            Schedule::Serial,
            100,
        )
        .map_err(|e| e.to_string())?;
        let mean_s = r.mean_ns * 1e-9;
        ok &= r.hyperedges_per_sec > 1e5;
        if d == 9 {
            ok &= mean_s < 1.0;
        }
        parts.push(format!(
            "d={d}: {:.3} ms/round, {:.3e} hyperedges/s",
            mean_s * 1e3,
            r.hyperedges_per_sec
        ));
    }
    check(ok, parts.join("; "), parts.join("; "))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        (
            "labelled repetition circuit classes",
            c1_labelled_repetition,
        ),
        (
            "compiler equals forward-propagation oracle",
            c2_oracle_equivalence,
        ),
        ("probability-merge algebra", c3_merge_algebra),
        ("per-round error rate", c4_per_round_rate),
        ("correlation-level structure", c5_levels),
        ("determinism and schedule independence", c6_determinism),
        ("noiseless soundness", c7_noiseless),
        ("adaptive/static equivalence", c8_adaptive_static),
        ("Iceberg layout validity", c9_layouts),
        ("desk-scale performance", c10_performance),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
