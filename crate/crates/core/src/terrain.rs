//! Rugose block terrains and estimation of the contact-noise level from logs.

use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Durations below `ZERO_FRACTION * tau` count as a complete bac loss.
pub const ZERO_FRACTION: f64 = 1e-9;

/// Minimum log size accepted by [`estimate_b`].
pub const MIN_LOG_SAMPLES: usize = 10;

const MAX_REDRAWS: usize = 64;

/// Height family drawn before the affine rescale to the target rugosity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeightDistribution {
    /// Equally likely, equally spaced discrete levels.
    Levels { count: usize },
    /// Continuous uniform heights.
    Uniform,
}

/// A grid of square blocks of side `block_side`, heights stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainMap {
    pub rows: usize,
    pub cols: usize,
    pub block_side: f64,
    pub rugosity: f64,
    pub heights: Vec<f64>,
}

impl TerrainMap {
    pub fn new(rows: usize, cols: usize, heights: Vec<f64>, block_side: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::invalid("terrain", "grid must be nonempty"));
        }
        if heights.len() != rows * cols {
            return Err(ModelError::invalid(
                "terrain.heights",
                format!("expected {} heights, got {}", rows * cols, heights.len()),
            ));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(ModelError::invalid(
                "terrain.heights",
                "heights must be finite",
            ));
        }
        if !(block_side.is_finite() && block_side > 0.0) {
            return Err(ModelError::invalid(
                "block_side",
                format!("must be > 0, got {block_side}"),
            ));
        }
        let rugosity = population_std(&heights) / block_side;
        Ok(TerrainMap {
            rows,
            cols,
            block_side,
            rugosity,
            heights,
        })
    }

    pub fn height(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    /// CSV grid: a `#` comment line with metadata, a `c0..` header, then one line per row.
    pub fn write_csv<W: Write>(&self, out: W, seed: Option<u64>) -> std::io::Result<()> {
        let mut out = out;
        let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            out,
            "# seed={seed} block_side={} rugosity={} rows={} cols={}",
            self.block_side, self.rugosity, self.rows, self.cols
        )?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record((0..self.cols).map(|c| format!("c{c}")))?;
        for row in self.heights.chunks(self.cols) {
            w.write_record(row.iter().map(|h| h.to_string()))?;
        }
        w.flush()
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Standard deviation of block heights over the block side length.
pub fn rugosity(map: &TerrainMap) -> f64 {
    population_std(&map.heights) / map.block_side
}

/// Heightmap with `height_levels` discrete levels rescaled to rugosity `target_rg`.
pub fn generate_terrain<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    target_rg: f64,
    block_side: f64,
    height_levels: usize,
    rng: &mut R,
) -> Result<TerrainMap> {
    generate_terrain_with(
        rows,
        cols,
        target_rg,
        block_side,
        HeightDistribution::Levels {
            count: height_levels,
        },
        rng,
    )
}

pub fn generate_terrain_with<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    target_rg: f64,
    block_side: f64,
    distribution: HeightDistribution,
    rng: &mut R,
) -> Result<TerrainMap> {
    if !(target_rg.is_finite() && target_rg >= 0.0) {
        return Err(ModelError::invalid(
            "rg",
            format!("must be >= 0, got {target_rg}"),
        ));
    }
    if rows == 0 || cols == 0 {
        return Err(ModelError::invalid("terrain", "grid must be nonempty"));
    }
    if let HeightDistribution::Levels { count: 0 } = distribution {
        return Err(ModelError::invalid("height_levels", "must be >= 1"));
    }
    let cells = rows * cols;
    if target_rg == 0.0 {
        return TerrainMap::new(rows, cols, vec![0.0; cells], block_side);
    }
    if let HeightDistribution::Levels { count: 1 } = distribution {
        return Err(ModelError::InfeasibleTerrain(
            "a single height level cannot produce positive rugosity".into(),
        ));
    }
    if cells == 1 {
        return Err(ModelError::InfeasibleTerrain(
            "a single block cannot produce positive rugosity".into(),
        ));
    }

    let draw = |rng: &mut R| -> Vec<f64> {
        (0..cells)
            .map(|_| match distribution {
                HeightDistribution::Levels { count } => rng.gen_range(0..count) as f64,
                HeightDistribution::Uniform => rng.gen::<f64>(),
            })
            .collect()
    };
    let mut raw = draw(rng);
    let mut attempts = 1;
    while population_std(&raw) == 0.0 {
        if attempts == MAX_REDRAWS {
            return Err(ModelError::InfeasibleTerrain(format!(
                "all blocks drew the same height {MAX_REDRAWS} times"
            )));
        }
        raw = draw(rng);
        attempts += 1;
    }

    let mean = raw.iter().sum::<f64>() / cells as f64;
    let scale = target_rg * block_side / population_std(&raw);
    let centered: Vec<f64> = raw.iter().map(|x| (x - mean) * scale).collect();
    let floor = centered.iter().copied().fold(f64::INFINITY, f64::min);
    let heights = centered.into_iter().map(|h| h - floor).collect();
    TerrainMap::new(rows, cols, heights, block_side)
}

/// Measured bac durations with the nominal duration `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactLog {
    pub tau: f64,
    pub durations: Vec<f64>,
}

impl ContactLog {
    pub fn new(tau: f64, durations: Vec<f64>) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(ModelError::invalid(
                "tau",
                format!("must be > 0, got {tau}"),
            ));
        }
        if let Some((i, d)) = durations
            .iter()
            .enumerate()
            .find(|(_, d)| !(0.0..=tau).contains(*d))
        {
            return Err(ModelError::invalid(
                "tau_u",
                format!("sample {i} = {d} outside [0, {tau}]"),
            ));
        }
        Ok(ContactLog { tau, durations })
    }

    /// Reads `# tau=<value>`, a `tau_u` header, then one duration per line.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| ModelError::invalid("log", e.to_string()))?;
        let tau = first
            .trim()
            .strip_prefix('#')
            .into_iter()
            .flat_map(|s| s.split_whitespace())
            .find_map(|kv| kv.strip_prefix("tau="))
            .ok_or_else(|| ModelError::invalid("log", "first line must be `# tau=<value>`"))?
            .parse::<f64>()
            .map_err(|e| ModelError::invalid("tau", e.to_string()))?;

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| ModelError::invalid("log", e.to_string()))?;
        if headers.len() != 1 || &headers[0] != "tau_u" {
            return Err(ModelError::invalid(
                "log",
                "expected a single `tau_u` column",
            ));
        }
        let mut durations = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| ModelError::invalid("log", e.to_string()))?;
            let v = rec[0]
                .parse::<f64>()
                .map_err(|e| ModelError::invalid("tau_u", format!("row {}: {e}", line + 1)))?;
            durations.push(v);
        }
        ContactLog::new(tau, durations)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# tau={}", self.tau)?;
        writeln!(out, "tau_u")?;
        for d in &self.durations {
            writeln!(out, "{d}")?;
        }
        Ok(())
    }
}

/// Estimated contact-noise level plus a linear fit of the duration CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BEstimate {
    pub b_hat: f64,
    /// Least-squares intercept of the empirical CDF on `(0, tau)`; close to `b_hat` under the model.
    pub intercept: Option<f64>,
    /// Least-squares slope; close to `(1 - b_hat) / tau` under the model.
    pub slope: Option<f64>,
    pub samples: usize,
    pub zeros: usize,
}

/// Atom mass at zero as the estimate of `b`, with a linear CDF fit as a diagnostic.
pub fn estimate_b(log: &ContactLog) -> Result<BEstimate> {
    let n = log.durations.len();
    if n < MIN_LOG_SAMPLES {
        return Err(ModelError::TooFewSamples {
            needed: MIN_LOG_SAMPLES,
            got: n,
        });
    }
    let threshold = ZERO_FRACTION * log.tau;
    let mut positive: Vec<f64> = log
        .durations
        .iter()
        .copied()
        .filter(|&d| d >= threshold)
        .collect();
    positive.sort_by(f64::total_cmp);
    let zeros = n - positive.len();

    // midpoint plotting positions of the positive order statistics
    let points: Vec<(f64, f64)> = positive
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, (zeros as f64 + i as f64 + 0.5) / n as f64))
        .collect();
    let (intercept, slope) = match least_squares(&points) {
        Some((a, s)) => (Some(a), Some(s)),
        None => (None, None),
    };
    Ok(BEstimate {
        b_hat: zeros as f64 / n as f64,
        intercept,
        slope,
        samples: n,
        zeros,
    })
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}
