use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::svg::{staircase, Plot, Series};
use super::Panel;
use crate::estimator::{
    asymptotic_velocity, bound_minimal_redundancy, destination_ci, ensemble,
    minimal_redundancy_empirical, success_probability, AnalyticSummary, EmpiricalDistribution,
    RedundancyBound, TransportTask,
};
use crate::model::{NoiseModel, TransportModel};
use crate::redundancy::RedundancyConfig;
use crate::rng::seeded;
use crate::terrain::{estimate_b, generate_terrain, BEstimate, ContactLog, TerrainMap};

const SVG_MAX_POINTS: usize = 500;

pub(crate) fn write_csv(
    path: &Path,
    comment: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(format!("# {comment}\n").as_bytes());
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_svg(path: &Path, plot: &Plot) -> Result<()> {
    fs::write(path, plot.render()).with_context(|| format!("writing {}", path.display()))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn effective_b(model: &TransportModel) -> f64 {
    if model.noise.enabled() {
        model.noise.b()
    } else {
        0.0
    }
}

#[derive(Debug, Serialize)]
struct CellSummary {
    #[serde(rename = "N")]
    modules: usize,
    #[serde(rename = "T")]
    periods: usize,
    mean_v: f64,
    var_v: f64,
    std_err_v: f64,
    mean_d: f64,
    var_d: f64,
    ci90_d: [f64; 2],
    mean_approx: f64,
    success: Option<SuccessSummary>,
}

#[derive(Debug, Serialize)]
struct SuccessSummary {
    probability: f64,
    std_err: f64,
}

#[derive(Debug, Serialize)]
struct SimSummary {
    seed: u64,
    replicates: usize,
    v_open: f64,
    nominal_step: f64,
    b: f64,
    noise_enabled: bool,
    cs: f64,
    task: Option<TransportTask>,
    bound_n: Option<RedundancyBound>,
    cells: Vec<CellSummary>,
}

/// Runs every `(N, T)` cell of the grid; writes `samples.csv` and `summary.json`.
pub fn cmd_sim(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    prepare_dir(out)?;
    let model = cfg.model();
    let cs = asymptotic_velocity(&model, cfg.seed)?;
    let b = effective_b(&model);

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for cell in cfg.cells() {
        let res = ensemble(&model, cell, cfg.replicates, cfg.seed)?;
        for (r, (v, d)) in res
            .velocities
            .values()
            .iter()
            .zip(res.destinations.values())
            .enumerate()
        {
            rows.push(vec![
                r.to_string(),
                cell.modules().to_string(),
                cell.periods().to_string(),
                num(*v),
                num(*d),
            ]);
        }
        let (lo, hi) = destination_ci(&res, 0.9)?;
        let success = cfg.task.filter(|t| t.periods() == cell.periods()).map(|t| {
            let hits = res
                .destinations
                .values()
                .iter()
                .filter(|&&d| t.is_success(d))
                .count();
            let p = hits as f64 / res.replicate_count as f64;
            SuccessSummary {
                probability: p,
                std_err: (p * (1.0 - p) / res.replicate_count as f64).sqrt(),
            }
        });
        let analytic = AnalyticSummary::compute(&model, cs, cell.modules(), None)?;
        cells.push(CellSummary {
            modules: cell.modules(),
            periods: cell.periods(),
            mean_v: res.velocities.mean(),
            var_v: res.velocities.variance(),
            std_err_v: res.velocities.std_err(),
            mean_d: res.destinations.mean(),
            var_d: res.destinations.variance(),
            ci90_d: [lo, hi],
            mean_approx: analytic.mean_approx,
            success,
        });
    }

    let samples = out.join("samples.csv");
    write_csv(
        &samples,
        &format!("seed={} replicates={}", cfg.seed, cfg.replicates),
        &["replicate", "N", "T", "v_hat", "D_hat"],
        &rows,
    )?;
    let bound_n = cfg
        .task
        .map(|t| bound_minimal_redundancy(&t, b))
        .transpose()?;
    let summary = out.join("summary.json");
    write_json(
        &summary,
        &SimSummary {
            seed: cfg.seed,
            replicates: cfg.replicates,
            v_open: model.v_open(),
            nominal_step: model.nominal_step(),
            b,
            noise_enabled: model.noise.enabled(),
            cs,
            task: cfg.task,
            bound_n,
            cells,
        },
    )?;
    Ok(vec![samples, summary])
}

/// Unique values with the CDF at the last occurrence of each.
fn cdf_steps(dist: &EmpiricalDistribution) -> Vec<(f64, f64)> {
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (x, p) in dist.cdf_points() {
        match steps.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => steps.push((x, p)),
        }
    }
    steps
}

fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= SVG_MAX_POINTS {
        return points;
    }
    let stride = points.len().div_ceil(SVG_MAX_POINTS);
    let last = *points.last().expect("nonempty");
    let mut out: Vec<(f64, f64)> = points.into_iter().step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Writes `fig3<panel>.csv` and `fig3<panel>.svg`.
pub fn cmd_reproduce_fig3(
    panel: Panel,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    prepare_dir(out)?;
    let stem = match panel {
        Panel::E => "fig3e",
        Panel::F => "fig3f",
        Panel::G => "fig3g",
        Panel::H => "fig3h",
    };
    let comment = format!(
        "seed={} replicates={} b={}",
        cfg.seed,
        cfg.replicates,
        effective_b(&cfg.model())
    );
    let mut plot = match panel {
        Panel::E => panel_e(cfg, &out.join(format!("{stem}.csv")), &comment)?,
        Panel::F => panel_f(cfg, &out.join(format!("{stem}.csv")), &comment)?,
        Panel::G => panel_g(cfg, &out.join(format!("{stem}.csv")), &comment)?,
        Panel::H => panel_h(cfg, &out.join(format!("{stem}.csv")), &comment)?,
    };
    plot.comment = Some(comment);
    let svg = out.join(format!("{stem}.svg"));
    write_svg(&svg, &plot)?;
    Ok(vec![out.join(format!("{stem}.csv")), svg])
}

fn panel_e(cfg: &ExperimentConfig, csv: &Path, comment: &str) -> Result<Plot> {
    let model = cfg.model();
    let v_open = model.v_open();
    let mut plot = Plot::new("Velocity CDF", "v / v_open", "CDF");
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &[t, n] in &cfg.fig3.e_cells {
        let res = ensemble(
            &model,
            RedundancyConfig::new(n, t)?,
            cfg.replicates,
            cfg.seed,
        )?;
        let steps: Vec<(f64, f64)> = cdf_steps(&res.velocities)
            .into_iter()
            .map(|(v, p)| (v / v_open, p))
            .collect();
        for &(x, p) in &steps {
            rows.push(vec![t.to_string(), n.to_string(), num(x), num(p)]);
        }
        curves.push((format!("T={t}, N={n}"), steps));
    }
    let x_max = curves
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .fold(1.0f64, f64::max);
    for (label, steps) in curves {
        plot.push(Series::new(label, thin(staircase(&steps, 0.0, x_max))));
    }
    plot.push(
        Series::new("nominal", staircase(&[(1.0, 1.0)], 0.0, x_max))
            .dashed()
            .color("black"),
    );
    write_csv(csv, comment, &["T", "N", "v_norm", "cdf"], &rows)?;
    Ok(plot)
}

fn panel_f(cfg: &ExperimentConfig, csv: &Path, comment: &str) -> Result<Plot> {
    let model = cfg.model();
    let step = model.nominal_step();
    let level = cfg.fig3.f_level;
    let mut plot = Plot::new(
        &format!("{}% CI of destination", level * 100.0),
        "D_hat",
        "T (periods)",
    );
    let mut rows = Vec::new();
    for &n in &cfg.fig3.f_modules {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for t in 1..=cfg.fig3.f_max_periods {
            let res = ensemble(
                &model,
                RedundancyConfig::new(n, t)?,
                cfg.replicates,
                cfg.seed,
            )?;
            let (lo, hi) = destination_ci(&res, level)?;
            let median = res.destinations.quantile(0.5);
            rows.push(vec![
                n.to_string(),
                t.to_string(),
                num(lo),
                num(hi),
                num(median),
                num(step * t as f64),
            ]);
            lower.push((lo, t as f64));
            upper.push((hi, t as f64));
        }
        plot.push(Series::new(format!("N={n} lower"), lower));
        plot.push(Series::new(format!("N={n} upper"), upper));
    }
    let t_max = cfg.fig3.f_max_periods as f64;
    plot.push(
        Series::new("nominal", vec![(0.0, 0.0), (step * t_max, t_max)])
            .dashed()
            .color("black"),
    );
    write_csv(
        csv,
        comment,
        &["N", "T", "lower", "upper", "median", "nominal"],
        &rows,
    )?;
    Ok(plot)
}

fn panel_g(cfg: &ExperimentConfig, csv: &Path, comment: &str) -> Result<Plot> {
    let model = cfg.model();
    let b = effective_b(&model);
    let periods = cfg.fig3.g_periods;
    let mut plot = Plot::new("Scheduled transport success", "N", "P(success)");
    let mut rows = Vec::new();
    for &frac in &cfg.fig3.g_tolerances {
        let nominal = model.nominal_step() * periods as f64;
        let task = TransportTask::on_schedule(&model, periods, frac * nominal, 0.5)?;
        let mut curve = Vec::new();
        for n in 1..=cfg.fig3.g_max_modules {
            let est = success_probability(&model, n, &task, cfg.replicates, cfg.seed)?;
            let limit = (1.0 - b.powi(n as i32)).powi(periods as i32);
            rows.push(vec![
                num(task.tolerance()),
                n.to_string(),
                num(est.probability),
                num(est.std_err),
                num(limit),
            ]);
            curve.push((n as f64, est.probability));
        }
        plot.push(Series::new(format!("eps={}", task.tolerance()), curve));
    }
    let limit: Vec<(f64, f64)> = (1..=cfg.fig3.g_max_modules)
        .map(|n| (n as f64, (1.0 - b.powi(n as i32)).powi(periods as i32)))
        .collect();
    plot.push(Series::new("limit", limit).dashed().color("black"));
    write_csv(
        csv,
        comment,
        &["epsilon", "N", "probability", "std_err", "limit"],
        &rows,
    )?;
    Ok(plot)
}

fn panel_h(cfg: &ExperimentConfig, csv: &Path, comment: &str) -> Result<Plot> {
    let base = cfg.model();
    let periods = cfg.fig3.h_periods;
    let mut plot = Plot::new("Minimal spatial redundancy", "b", "N_min");
    let mut rows = Vec::new();
    for &[frac, p0] in &cfg.fig3.h_targets {
        let mut curve = Vec::new();
        for &b in &cfg.fig3.h_b_values {
            let noise = if base.noise.enabled() {
                NoiseModel::new(b)?
            } else {
                NoiseModel::disabled()
            };
            let model = base.with_noise(noise);
            let nominal = model.nominal_step() * periods as f64;
            let task = TransportTask::on_schedule(&model, periods, frac * nominal, p0)?;
            let found = minimal_redundancy_empirical(
                &model,
                &task,
                cfg.replicates,
                cfg.seed,
                cfg.fig3.h_max_modules,
            )?;
            let bound = bound_minimal_redundancy(&task, b)?;
            rows.push(vec![
                num(task.tolerance()),
                num(p0),
                num(b),
                found.modules().map(|n| n.to_string()).unwrap_or_default(),
                opt(bound.value()),
                bound.ceiled().map(|n| n.to_string()).unwrap_or_default(),
            ]);
            if let Some(n) = found.modules() {
                curve.push((b, n as f64));
            }
        }
        plot.push(Series::new(format!("eps={frac}, p0={p0}"), curve));
    }
    // bound curve at p0 = 0.9
    let probe = TransportTask::on_schedule(&base, periods, 1.0, 0.9)?;
    let bound_curve: Vec<(f64, f64)> = cfg
        .fig3
        .h_b_values
        .iter()
        .filter_map(|&b| {
            bound_minimal_redundancy(&probe, b)
                .ok()?
                .value()
                .map(|v| (b, v))
        })
        .collect();
    plot.push(
        Series::new("bound p0=0.9", bound_curve)
            .dashed()
            .color("black"),
    );
    write_csv(
        csv,
        comment,
        &["epsilon", "p0", "b", "n_min", "bound", "bound_ceil"],
        &rows,
    )?;
    Ok(plot)
}

#[derive(Debug, Serialize)]
struct TerrainMeta<'a> {
    seed: u64,
    rows: usize,
    cols: usize,
    block_side: f64,
    height_levels: usize,
    target_rugosity: f64,
    rugosity: f64,
    heights: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
pub struct TerrainArgs {
    pub rows: usize,
    pub cols: usize,
    pub rg: f64,
    pub seed: u64,
    pub block_side: f64,
    pub levels: usize,
}

/// Writes `terrain.csv` and `terrain.json`.
pub fn cmd_terrain(args: TerrainArgs, out: &Path) -> Result<(TerrainMap, Vec<PathBuf>)> {
    let map = generate_terrain(
        args.rows,
        args.cols,
        args.rg,
        args.block_side,
        args.levels,
        &mut seeded(args.seed),
    )?;
    prepare_dir(out)?;
    let csv_path = out.join("terrain.csv");
    let mut buf = Vec::new();
    map.write_csv(&mut buf, Some(args.seed))?;
    fs::write(&csv_path, buf).with_context(|| format!("writing {}", csv_path.display()))?;
    let json_path = out.join("terrain.json");
    write_json(
        &json_path,
        &TerrainMeta {
            seed: args.seed,
            rows: map.rows,
            cols: map.cols,
            block_side: map.block_side,
            height_levels: args.levels,
            target_rugosity: args.rg,
            rugosity: map.rugosity,
            heights: &map.heights,
        },
    )?;
    Ok((map, vec![csv_path, json_path]))
}

#[derive(Debug, Serialize)]
struct FitReport {
    b_hat: f64,
    slope: Option<f64>,
    intercept: Option<f64>,
    samples: usize,
    zeros: usize,
    tau: f64,
}

/// Fits `b` to a contact log and returns the JSON report.
pub fn cmd_fit_b(log_path: &Path) -> Result<(BEstimate, String)> {
    let file =
        fs::File::open(log_path).with_context(|| format!("opening {}", log_path.display()))?;
    let log =
        ContactLog::read_csv(file).with_context(|| format!("reading {}", log_path.display()))?;
    let est = estimate_b(&log)?;
    let mut text = serde_json::to_string_pretty(&FitReport {
        b_hat: est.b_hat,
        slope: est.slope,
        intercept: est.intercept,
        samples: est.samples,
        zeros: est.zeros,
        tau: log.tau,
    })?;
    text.push('\n');
    Ok((est, text))
}
