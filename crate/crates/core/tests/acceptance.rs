//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use common::*;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};
use wteleport::analysis::{sample, sample_serial, SweepSpec};
use wteleport::cli::{self, EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION};
use wteleport::povm::{build_set_a, build_set_b, validate, DiscriminationParams};
use wteleport::protocol::{alice_bell_measure, bob_attach_and_cnot, bob_vonneumann, decompose_check, CORRECTIONS};
use wteleport::qsim::apply;
use wteleport::{build_composite, enumerate, report, sweep, ChannelParams, Classification, InputState};

/// Seed for the Monte Carlo criterion.
const MC_SEED: u64 = 20_240_517;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid_inputs() -> Vec<(ChannelParams, Vec<InputState>)> {
    let mut r = rng(1);
    channel_grid()
        .into_iter()
        .map(|p| (p, (0..10).map(|_| random_input(&mut r)).collect()))
        .collect()
}

fn success_probability() -> Check {
    let grid = grid_inputs();
    ensure(grid.len() >= 200, || format!("grid has only {} triples", grid.len()))?;
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (p, inputs) in &grid {
        for s in inputs {
            let t = enumerate(p, s).map_err(|e| e.to_string())?;
            worst = worst.max((t.total_for(Classification::Success) - 2.0 * p.b() * p.b()).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= TOL, || format!("max |P - 2b^2| = {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} triples x 10 inputs, max deviation {worst:.1e}, {elapsed:.2?}",
        grid.len()
    ))
}

fn failure_decomposition() -> Check {
    let mut worst = 0.0f64;
    for (p, inputs) in grid_inputs() {
        let (a, b, c) = (p.a(), p.b(), p.c());
        for s in &inputs {
            let t = enumerate(&p, s).map_err(|e| e.to_string())?;
            let sum = t.total_for(Classification::Success)
                + t.total_for(Classification::FailVonNeumann)
                + t.total_for(Classification::FailInconclusive);
            worst = worst
                .max((t.total_for(Classification::FailVonNeumann) - c * c).abs())
                .max((t.total_for(Classification::FailInconclusive) - (a * a - b * b)).abs())
                .max((sum - 1.0).abs());
        }
    }
    ensure(worst <= TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn success_fidelity() -> Check {
    let mut min = f64::INFINITY;
    let mut leaves = 0;
    for (p, inputs) in grid_inputs() {
        for s in &inputs {
            let t = enumerate(&p, s).map_err(|e| e.to_string())?;
            for row in t
                .rows
                .iter()
                .filter(|r| r.reachable() && r.classification == Classification::Success)
            {
                let f = row.fidelity.ok_or("success leaf without fidelity")?;
                min = min.min(f);
                leaves += 1;
            }
        }
    }
    ensure(min >= 1.0 - TOL, || format!("min fidelity {min}"))?;
    Ok(format!("{leaves} success leaves, min fidelity {min:.15}"))
}

fn povm_axioms() -> Check {
    let mut pairs: Vec<(f64, f64)> = (0..=120)
        .map(|i| {
            let theta = std::f64::consts::FRAC_PI_4 * i as f64 / 120.0;
            (theta.cos(), theta.sin())
        })
        .collect();
    let mut r = rng(4);
    pairs.extend((0..30).map(|_| {
        let p = random_channel(&mut r);
        let n = p.a().hypot(p.b());
        (p.a() / n, p.b() / n)
    }));
    for &(x1, y1) in &pairs {
        let d = DiscriminationParams::new(x1, y1).map_err(|e| e.to_string())?;
        for (name, set) in [("A", build_set_a(&d)), ("B", build_set_b(&d))] {
            let v = validate(&set);
            let want = 2.0 * d.y1() * d.y1();
            ensure(
                v.completeness_residual <= TOL
                    && v.min_eigenvalue >= -TOL
                    && v.unambiguity_residual <= TOL
                    && (v.conclusive_probability - want).abs() <= TOL,
                || format!("set {name} at (x1, y1) = ({x1}, {y1}): {v:?}"),
            )?;
        }
    }
    Ok(format!("{} (x1, y1) pairs, both sets", pairs.len()))
}

fn closed_form_branches() -> Check {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let sets = 60;
    for _ in 0..sets {
        let p = random_channel(&mut r);
        let s = random_input(&mut r);
        let e = |x: wteleport::QsimError| x.to_string();
        for bell in alice_bell_measure(&build_composite(&p, &s)).map_err(|x| x.to_string())? {
            let want = bell_residual(&p, &s, bell.outcome);
            worst = worst.max(bell.state.max_abs_diff(&want).map_err(e)?);
            worst = worst.max((bell.probability - want.norm_sqr()).abs());
            for vn in bob_vonneumann(&bell.state).map_err(|x| x.to_string())? {
                let want = vn_residual(&p, &s, bell.outcome, vn.outcome);
                worst = worst.max(vn.state.max_abs_diff(&want).map_err(e)?);
                if vn.outcome == 0 {
                    let joined = bob_attach_and_cnot(&vn, bell.outcome).map_err(|x| x.to_string())?;
                    worst = worst.max(joined.max_abs_diff(&after_cnot(&p, &s, bell.outcome)).map_err(e)?);
                    worst = worst.max(decompose_check(&joined, bell.outcome, &p, &s).map_err(|x| x.to_string())?);
                }
            }
        }
    }
    ensure(worst <= TOL, || format!("max coefficient deviation {worst:e}"))?;
    Ok(format!("{sets} parameter sets, max deviation {worst:.1e}"))
}

fn correction_table() -> Check {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    let inputs = 25;
    for _ in 0..inputs {
        let s = random_input(&mut r);
        let target = s.target_state(["2", "A"]);
        for row in CORRECTIONS {
            let fixed = apply(&row.unitary(), &["2"], &row.source_state(&s)).map_err(|e| e.to_string())?;
            worst = worst.max(phase_free_diff(&fixed, &target));
        }
    }
    ensure(worst <= TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("8 rows x {inputs} inputs, max deviation {worst:.1e}"))
}

fn monte_carlo() -> Check {
    let p = ChannelParams::new(0.8, 0.6, 0.0).map_err(|e| e.to_string())?;
    let s = InputState::real(0.6, 0.8).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let first = sample(&p, &s, 100_000, MC_SEED).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let again = sample(&p, &s, 100_000, MC_SEED).map_err(|e| e.to_string())?;
    let serial = sample_serial(&p, &s, 100_000, MC_SEED).map_err(|e| e.to_string())?;
    ensure(first.within_sigma(0.72, 3.0), || {
        format!("p_hat {} std_err {}", first.p_hat, first.std_err)
    })?;
    ensure(
        first.p_hat.to_bits() == again.p_hat.to_bits() && first == again && first == serial,
        || "reruns differ".into(),
    )?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "seed {MC_SEED}: p_hat = {:.5} +/- {:.5}, rerun identical, {elapsed:.2?}",
        first.p_hat, first.std_err
    ))
}

fn limit_claim() -> Check {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let spec: SweepSpec = "c:0.57:0:58"
        .parse()
        .map_err(|e: wteleport::analysis::AnalysisError| e.to_string())?;
    let grid = spec.grid([h, h, 0.0]).map_err(|e| e.to_string())?;
    let reports = sweep(&grid, &InputState::real(0.6, 0.8).unwrap()).map_err(|e| e.to_string())?;
    let probs: Vec<f64> = reports.iter().map(|r| r.p_success_exact).collect();
    ensure(
        reports.iter().all(|r| (r.channel.a() - r.channel.b()).abs() <= TOL),
        || "a != b".into(),
    )?;
    ensure(probs.windows(2).all(|w| w[1] > w[0]), || {
        format!("not increasing: {probs:?}")
    })?;
    let last = *probs.last().unwrap();
    ensure((last - 1.0).abs() <= TOL, || format!("P at c = 0 is {last}"))?;
    Ok(format!("{} points, P from {:.4} to {last:.15}", probs.len(), probs[0]))
}

fn cli_contract() -> Check {
    let argv = [
        "wteleport",
        "--a",
        "0.8",
        "--b",
        "0.6",
        "--c",
        "0",
        "--mode",
        "montecarlo",
        "--trials",
        "10000",
        "--seed",
        "3",
        "--format",
        "json",
    ];
    let config = cli::parse_args(argv).map_err(|e| e.to_string())?;
    let (x, _) = cli::render(&config, false).map_err(|e| e.to_string())?;
    let (y, _) = cli::render(&config.clone(), false).map_err(|e| e.to_string())?;
    ensure(x == y, || "library renders differ".into())?;
    let (c1, o1, _) = run_cli(&argv[1..]);
    let (c2, o2, _) = run_cli(&argv[1..]);
    ensure(c1 == EXIT_OK && c2 == EXIT_OK && o1 == o2 && o1 == x.as_bytes(), || {
        "binary output not byte-identical".into()
    })?;

    let (code, _, _) = run_cli(&["--a", "0.6", "--b", "0.8", "--c", "0"]);
    ensure(code == EXIT_USAGE, || format!("ordering violation exited {code}"))?;
    let (code, _, _) = run_cli(&["--a", "0.8", "--b", "0.6", "--c", "0", "--mode", "montecarlo"]);
    ensure(code == EXIT_USAGE, || format!("missing --trials exited {code}"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bad = dir.path().join("no-such-dir").join("r.json");
    let (code, _, _) = run_cli(&["--a", "0.8", "--b", "0.6", "--c", "0", "--out", bad.to_str().unwrap()]);
    ensure(code == EXIT_VERIFICATION, || format!("unwritable output exited {code}"))?;

    let mut tampered = report(
        &ChannelParams::new(0.8, 0.6, 0.0).unwrap(),
        &InputState::real(0.6, 0.8).unwrap(),
        None,
    )
    .map_err(|e| e.to_string())?;
    tampered.branch_table.rows[0].fidelity = Some(0.5);
    tampered.min_success_fidelity = tampered.branch_table.min_success_fidelity();
    let failed = tampered.failed_checks();
    let code = cli::emit(None, "", &failed, &mut Vec::new(), &mut Vec::new());
    ensure(code == EXIT_VERIFICATION, || format!("tampered report exited {code}"))?;
    Ok("byte-identical JSON; exit codes 0, 1 (I/O, tampered report), 2 (parameters, usage)".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("success probability equals 2b^2", success_probability),
        ("failure decomposition c^2 and a^2 - b^2", failure_decomposition),
        ("unit fidelity on every success leaf", success_fidelity),
        ("POVM axioms for both sets", povm_axioms),
        ("intermediate states match closed forms", closed_form_branches),
        ("correction table restores the input", correction_table),
        ("Monte Carlo consistency and reproducibility", monte_carlo),
        ("a = b limit reaches certainty", limit_claim),
        ("CLI determinism and exit codes", cli_contract),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
