//! Occupancy histograms of the planar location under iterated time-1 maps.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{self, IntegratorConfig, Termination};
use crate::zoo::{Table, ZooEntry};

/// Histogram of visits on a rows × cols grid over a bounding box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityGrid {
    /// [x_min, x_max, y_min, y_max].
    pub bounds: [f64; 4],
    pub rows: usize,
    pub cols: usize,
    /// Row-major; row 0 is the lowest y band.
    pub counts: Vec<u64>,
    pub total: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Termination label of every run that stopped early.
    pub flags: Vec<String>,
}

impl DensityGrid {
    pub fn empty(bounds: [f64; 4], rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("grid must have at least one cell".into()));
        }
        if !(bounds[1] > bounds[0] && bounds[3] > bounds[2]) {
            return Err(Error::InvalidParameter("grid bounds are empty".into()));
        }
        Ok(Self { bounds, rows, cols, counts: vec![0; rows * cols], total: 0, iterations: 0, burn_in: 0, trajectories: 0, seed, flags: Vec::new() })
    }

    /// (row, col) of the cell holding a point, if it lies in the box.
    pub fn cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let [x0, x1, y0, y1] = self.bounds;
        if !(x >= x0 && x <= x1 && y >= y0 && y <= y1) {
            return None;
        }
        let col = (((x - x0) / (x1 - x0)) * self.cols as f64) as usize;
        let row = (((y - y0) / (y1 - y0)) * self.rows as f64) as usize;
        Some((row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    pub fn record(&mut self, x: f64, y: f64) {
        if let Some((r, c)) = self.cell(x, y) {
            self.counts[r * self.cols + c] += 1;
            self.total += 1;
        }
    }

    /// Fraction of samples per cell; all zero for an empty grid.
    pub fn normalized(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let total = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Adds the counts of a grid with the same layout.
    pub fn merge(&mut self, other: &DensityGrid) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols || self.bounds != other.bounds {
            return Err(Error::Dimension { expected: self.counts.len(), got: other.counts.len() });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.iterations += other.iterations;
        self.trajectories += other.trajectories;
        self.flags.extend(other.flags.iter().cloned());
        Ok(())
    }

    /// Centre of cell (row, col).
    pub fn centre(&self, row: usize, col: usize) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.bounds;
        (x0 + (col as f64 + 0.5) * (x1 - x0) / self.cols as f64, y0 + (row as f64 + 0.5) * (y1 - y0) / self.rows as f64)
    }
}

/// Half the L¹ distance between two normalized grids.
pub fn total_variation(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    if a.counts.len() != b.counts.len() {
        return Err(Error::Dimension { expected: a.counts.len(), got: b.counts.len() });
    }
    Ok(0.5 * a.normalized().iter().zip(b.normalized()).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

fn grid_bounds(entry: &ZooEntry) -> Result<[f64; 4]> {
    match &entry.table {
        Some(table @ Table::Ellipse { .. }) => Ok(table.bounds()),
        _ => Err(Error::InvalidModel(alloc::format!("{} has no bounded table", entry.name))),
    }
}

/// Settings shared by single and ensemble runs.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

/// Iterates the time-1 map from `x0`, discarding the first `burn_in`
/// iterates and binning the planar location of the rest. A run stopped by
/// the Zeno guard or another early termination returns the partial grid
/// with a flag.
pub fn accumulate_density(entry: &ZooEntry, x0: &[f64], settings: &DensitySettings, config: &IntegratorConfig) -> Result<DensityGrid> {
    if settings.burn_in > settings.iterations {
        return Err(Error::InvalidParameter("burn-in exceeds the iteration count".into()));
    }
    let mut grid = DensityGrid::empty(grid_bounds(entry)?, settings.rows, settings.cols, settings.seed)?;
    grid.iterations = settings.iterations;
    grid.burn_in = settings.burn_in;
    grid.trajectories = 1;
    let cfg = IntegratorConfig { record_arcs: false, ..config.clone() };
    let mut x = x0.to_vec();
    for k in 1..=settings.iterations {
        let traj = flow::hybrid_flow(&entry.system, &x, 1.0, &cfg)?;
        if traj.termination != Termination::Horizon {
            grid.flags.push(alloc::format!("{} after {} iterates", traj.termination.label(), k - 1));
            break;
        }
        x = traj.final_state;
        if k > settings.burn_in {
            let [px, py] = (entry.locate)(&x);
            grid.record(px, py);
        }
    }
    Ok(grid)
}

/// Seeds of the ensemble members, derived from the master seed.
pub fn member_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.random()).collect()
}

/// One ensemble member: an interior state drawn from `seed`, then
/// [`accumulate_density`].
pub fn member_density(entry: &ZooEntry, seed: u64, settings: &DensitySettings, config: &IntegratorConfig) -> Result<DensityGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = entry.sample_interior(&mut rng)?;
    accumulate_density(entry, &x0, &DensitySettings { seed, ..settings.clone() }, config)
}

/// Pools the grids of `count` members drawn from the master seed in
/// `settings`.
pub fn ensemble_density(entry: &ZooEntry, count: usize, settings: &DensitySettings, config: &IntegratorConfig) -> Result<DensityGrid> {
    let grids = member_seeds(settings.seed, count)
        .into_iter()
        .map(|s| member_density(entry, s, settings, config))
        .collect::<Result<Vec<_>>>()?;
    pool(grids, settings)
}

/// Merges member grids in order.
pub fn pool(grids: Vec<DensityGrid>, settings: &DensitySettings) -> Result<DensityGrid> {
    let mut iter = grids.into_iter();
    let mut out = iter.next().ok_or_else(|| Error::InvalidParameter("empty ensemble".to_string()))?;
    for g in iter {
        out.merge(&g)?;
    }
    out.seed = settings.seed;
    Ok(out)
}
