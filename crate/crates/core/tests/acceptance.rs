//! Acceptance suite. Each criterion prints one `[PASS]` or `[FAIL]` line;
//! the process exits nonzero if any criterion fails.

#![allow(clippy::approx_constant)]

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use matter_transport::estimator::EmpiricalDistribution;
use matter_transport::rng::replicate_stream;
use matter_transport::{
    bound_minimal_redundancy, destination_ci, ensemble, estimate_b, generate_terrain,
    minimal_redundancy_empirical, rugosity, sample_bac, success_probability, velocity_spatial,
    velocity_temporal, ContactLog, DragModel, NoiseModel, RedundancyConfig, ThrustProfile,
    TransportModel, TransportTask,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn constant_model(b: f64) -> TransportModel {
    TransportModel::new(
        ThrustProfile::constant(1.0, 1.0).unwrap(),
        DragModel::new(1.0).unwrap(),
        NoiseModel::new(b).unwrap(),
    )
}

fn hump_model(b: f64) -> TransportModel {
    let profile = ThrustProfile::tabulated(
        1.0,
        vec![(0.0, 0.0), (0.2, 1.2), (0.45, 2.0), (0.7, 1.1), (0.9, 0.2)],
    )
    .unwrap();
    TransportModel::new(
        profile,
        DragModel::new(0.8).unwrap(),
        NoiseModel::new(b).unwrap(),
    )
}

fn noise_sampler() -> Outcome {
    let start = Instant::now();
    let b = 0.5;
    let n = 100_000;
    let model = constant_model(b);
    let mut rng = replicate_stream(1, 0);
    let durations: Vec<f64> = (0..n)
        .map(|_| sample_bac(&model.profile, &model.noise, &mut rng).tau_u)
        .collect();
    let elapsed = start.elapsed();

    let atom = durations.iter().filter(|&&d| d == 0.0).count() as f64 / n as f64;
    let dist = EmpiricalDistribution::new(durations).unwrap();
    let ks = dist.ks_distance(|x| model.noise.cdf(x, 1.0));
    check(
        (atom - b).abs() <= 0.005 && ks < 0.01 && elapsed < Duration::from_secs(5),
        format!(
            "P(tau_u=0)={atom:.4} KS={ks:.5} time={:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn mean_law() -> Outcome {
    let start = Instant::now();
    let replicates = 100_000;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (i, b) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let model = constant_model(b);
        for n in [1, 2, 4, 8] {
            let cfg = RedundancyConfig::new(n, 1).unwrap();
            let res = ensemble(&model, cfg, replicates, 100 + i as u64).unwrap();
            let expected = (1.0 - b.powi(n as i32)) * model.v_open();
            let sigma = (expected * (1.0 - expected) / replicates as f64).sqrt();
            let z = (res.velocities.mean() - expected).abs() / sigma;
            worst = worst.max(z);
            if z > 3.0 {
                failures.push(format!("b={b} N={n}"));
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "max |z|={worst:.2} time={:.1}s {failures:?}",
            elapsed.as_secs_f64()
        ),
    )
}

struct Sweep {
    variances: Vec<f64>,
    var_se: Vec<f64>,
    means: Vec<f64>,
    mean_se: Vec<f64>,
}

fn sweep(model: &TransportModel, cells: &[(usize, usize)], replicates: usize, seed: u64) -> Sweep {
    let mut s = Sweep {
        variances: Vec::new(),
        var_se: Vec::new(),
        means: Vec::new(),
        mean_se: Vec::new(),
    };
    for (i, &(n, t)) in cells.iter().enumerate() {
        let cfg = RedundancyConfig::new(n, t).unwrap();
        let res = ensemble(model, cfg, replicates, seed + i as u64).unwrap();
        s.variances.push(res.velocities.variance());
        s.var_se.push(res.velocities.variance_std_err());
        s.means.push(res.velocities.mean());
        s.mean_se.push(res.velocities.std_err());
    }
    s
}

fn decays(s: &Sweep) -> bool {
    s.variances
        .windows(2)
        .zip(s.var_se.windows(2))
        .all(|(v, se)| v[1] <= v[0] || v[1] - v[0] <= 2.0 * se[0].hypot(se[1]))
}

fn variance_decay() -> Outcome {
    let replicates = 50_000;
    let steps = [1, 2, 4, 8, 16, 32];
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, model) in [("constant", constant_model(0.5)), ("hump", hump_model(0.5))] {
        let over_t: Vec<_> = steps.iter().map(|&t| (1, t)).collect();
        let over_n: Vec<_> = steps.iter().map(|&n| (n, 1)).collect();
        let st = sweep(&model, &over_t, replicates, 300);
        let sn = sweep(&model, &over_n, replicates, 400);
        let flat = st
            .means
            .iter()
            .zip(&st.mean_se)
            .all(|(m, se)| (m - st.means[0]).abs() <= 3.0 * se.hypot(st.mean_se[0]));
        ok &= decays(&st) && decays(&sn) && flat;
        detail.push(format!(
            "{name}: var T=1..32 {:.4}->{:.5}, N=1..32 {:.4}->{:.6}, mean flat={flat}",
            st.variances[0], st.variances[5], sn.variances[0], sn.variances[5]
        ));
    }
    check(ok, detail.join("; "))
}

fn success_oracle() -> Outcome {
    let replicates = 100_000;
    let mut detail = Vec::new();
    let mut ok = true;
    for (b, n, t, expected) in [(0.5, 1, 2, 0.25), (0.5, 3, 1, 0.875), (0.3, 2, 2, 0.8281)] {
        let model = constant_model(b);
        let task = TransportTask::on_schedule(&model, t, 0.1, 0.9).unwrap();
        let est = success_probability(&model, n, &task, replicates, 500).unwrap();
        let exact = (1.0f64 - b.powi(n as i32)).powi(t as i32);
        let sigma = (exact * (1.0 - exact) / replicates as f64).sqrt();
        ok &= (exact - expected).abs() < 5e-5 && (est.probability - exact).abs() <= 3.0 * sigma;
        detail.push(format!("({b},{n},{t})={:.4}", est.probability));
    }

    let model = constant_model(0.5);
    let task = TransportTask::on_schedule(&model, 1, 0.1, 0.9).unwrap();
    let curve: Vec<f64> = (1..=16)
        .map(|n| {
            success_probability(&model, n, &task, 10_000, 501)
                .unwrap()
                .probability
        })
        .collect();
    let monotone = curve.windows(2).all(|w| w[1] >= w[0]);
    ok &= monotone && curve[15] >= 0.999;
    detail.push(format!("monotone={monotone} p(N=16)={:.4}", curve[15]));
    check(ok, detail.join(" "))
}

fn bound_consistency() -> Outcome {
    let start = Instant::now();
    let replicates = 10_000;
    let mut ok = true;
    let mut violations = Vec::new();
    for b in [0.3, 0.5, 0.7, 0.8] {
        let model = constant_model(b);
        for p0 in [0.8, 0.9] {
            for kd in [1, 2] {
                let task = TransportTask::on_schedule(&model, kd, 0.1, p0).unwrap();
                let bound = bound_minimal_redundancy(&task, b)
                    .unwrap()
                    .ceiled()
                    .unwrap();
                let found = minimal_redundancy_empirical(&model, &task, replicates, 600, 64)
                    .unwrap()
                    .modules();
                if !found.is_some_and(|n| n <= bound) {
                    ok = false;
                    violations.push(format!("b={b} p0={p0} kD={kd}: {found:?} > {bound}"));
                }
            }
        }
    }
    let model = constant_model(0.5);
    let task = TransportTask::on_schedule(&model, 1, 0.1, 0.9).unwrap();
    let spot = bound_minimal_redundancy(&task, 0.5)
        .unwrap()
        .value()
        .unwrap();
    let spot_n = minimal_redundancy_empirical(&model, &task, replicates, 601, 64)
        .unwrap()
        .modules();
    let elapsed = start.elapsed();
    ok &= (spot - 3.3219).abs() < 1e-4 && spot_n == Some(4) && elapsed < Duration::from_secs(120);
    check(
        ok,
        format!(
            "16 cells, spot bound={spot:.4} N={spot_n:?} time={:.1}s {violations:?}",
            elapsed.as_secs_f64()
        ),
    )
}

fn ci_narrowing() -> Outcome {
    let replicates = 10_000;
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, model) in [("constant", constant_model(0.5)), ("hump", hump_model(0.5))] {
        let mut failures = Vec::new();
        for t in 1..=16 {
            let ci = |n| {
                let res = ensemble(
                    &model,
                    RedundancyConfig::new(n, t).unwrap(),
                    replicates,
                    700 + t as u64,
                )
                .unwrap();
                destination_ci(&res, 0.9).unwrap()
            };
            let (lo1, hi1) = ci(1);
            let (lo8, hi8) = ci(8);
            let nominal = model.nominal_step() * t as f64;
            if !(hi8 - lo8 < hi1 - lo1 && lo8 <= nominal && nominal <= hi8) {
                failures.push(t);
            }
        }
        ok &= failures.is_empty();
        detail.push(format!("{name} failing T={failures:?}"));
    }
    check(ok, detail.join(" "))
}

fn b_round_trip() -> Outcome {
    let n = 10_000;
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, b) in [0.1, 0.3, 0.5, 0.8].into_iter().enumerate() {
        let model = hump_model(b);
        let mut rng = replicate_stream(800 + i as u64, 0);
        let durations = (0..n)
            .map(|_| sample_bac(&model.profile, &model.noise, &mut rng).tau_u)
            .collect();
        let est = estimate_b(&ContactLog::new(1.0, durations).unwrap()).unwrap();
        ok &= (est.b_hat - b).abs() <= 3.0 * (b * (1.0 - b) / n as f64).sqrt();
        detail.push(format!("{b}->{:.4}", est.b_hat));
    }
    check(ok, detail.join(" "))
}

fn terrain_targets() -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    for target in [0.0, 0.17, 0.32] {
        for seed in 0..5 {
            let make = || {
                generate_terrain(20, 30, target, 10.0, 5, &mut replicate_stream(seed, 0)).unwrap()
            };
            let map = make();
            let err = (rugosity(&map) - target).abs();
            worst = worst.max(err);
            ok &= err <= 1e-6 && map.heights == make().heights;
        }
    }
    check(
        ok,
        format!("max |R_g - target|={worst:.2e}, deterministic={ok}"),
    )
}

fn run_cli(threads: usize, args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_matter-transport"))
        .env_remove("MATTER_TRANSPORT_OUT")
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let work = tempfile::TempDir::new().unwrap();
    let cfg = work.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"profile": {"kind": "tabulated", "tau": 1.0, "points": [[0.0, 0.0], [0.3, 1.5], [0.6, 2.0], [0.9, 0.3]]},
            "gamma": 0.8, "noise": {"b": 0.5}, "grid": {"modules": [1, 4], "periods": [1, 6]},
            "task": {"distance": 3.0, "periods": 3, "tolerance": 0.3, "p0": 0.9, "k": 1.0},
            "replicates": 2000, "seed": 17}"#,
    )
    .unwrap();
    let log = work.path().join("log.csv");
    let model = hump_model(0.3);
    let mut rng = replicate_stream(5, 0);
    let durations = (0..500)
        .map(|_| sample_bac(&model.profile, &model.noise, &mut rng).tau_u)
        .collect();
    ContactLog::new(1.0, durations)
        .unwrap()
        .write_csv(fs::File::create(&log).unwrap())
        .unwrap();

    let cfg = cfg.to_str().unwrap();
    let jobs: Vec<(&str, Vec<&str>)> = vec![
        ("sim", vec!["sim", "--config", cfg]),
        (
            "fig3e",
            vec!["reproduce-fig3", "--panel", "E", "--config", cfg],
        ),
        (
            "fig3f",
            vec!["reproduce-fig3", "--panel", "F", "--config", cfg],
        ),
        (
            "fig3g",
            vec!["reproduce-fig3", "--panel", "G", "--config", cfg],
        ),
        (
            "fig3h",
            vec!["reproduce-fig3", "--panel", "H", "--config", cfg],
        ),
        (
            "terrain",
            vec![
                "terrain", "--rows", "12", "--cols", "15", "--rg", "0.32", "--seed", "9",
            ],
        ),
    ];
    let mut compared = 0;
    for (name, args) in &jobs {
        let runs: Vec<_> = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|&(threads, tag)| {
                let dir = work.path().join(format!("{name}-{tag}"));
                run_cli(threads, args, &dir).map(|_| files(&dir))
            })
            .collect::<Result<_, _>>()?;
        if runs[0] != runs[1] || runs[0] != runs[2] {
            return Err(format!("{name} outputs differ"));
        }
        compared += runs[0].len();
    }

    let fit = |threads: usize| {
        Command::new(env!("CARGO_BIN_EXE_matter-transport"))
            .arg("--threads")
            .arg(threads.to_string())
            .args(["fit-b", "--log"])
            .arg(&log)
            .output()
            .map(|o| o.stdout)
            .map_err(|e| e.to_string())
    };
    let fits = [fit(1)?, fit(1)?, fit(4)?];
    check(
        !fits[0].is_empty() && fits[0] == fits[1] && fits[0] == fits[2],
        format!("{compared} files byte-identical across reruns and 1 vs 4 threads, fit-b stable"),
    )
}

fn reduction_identity() -> Outcome {
    let models = [hump_model(0.5), constant_model(0.3)];
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let model = &models[seed as usize % 2];
        let t = 1 + seed as usize % 7;
        let spatial = velocity_spatial(
            model,
            RedundancyConfig::new(1, t).unwrap(),
            &mut replicate_stream(seed, 0),
        );
        let temporal = velocity_temporal(model, t, &mut replicate_stream(seed, 0)).unwrap();
        if spatial != temporal {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over 1000 seeds"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1 noise-sampler fidelity", noise_sampler),
        ("AC2 constant-thrust mean law", mean_law),
        ("AC3 variance decay", variance_decay),
        ("AC4 success-probability oracle", success_oracle),
        ("AC5 bound consistency", bound_consistency),
        ("AC6 CI narrowing", ci_narrowing),
        ("AC7 round-trip b estimation", b_round_trip),
        ("AC8 terrain targets", terrain_targets),
        ("AC9 determinism", determinism),
        ("AC10 reduction identity", reduction_identity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
