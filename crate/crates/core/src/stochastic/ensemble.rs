use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_field, simulate_trajectory_with, StochasticError, Trajectory};
use crate::dynamics::{mean_dipole, mean_inversion, InitialCondition};
use crate::model::{derive_params, SystemParams};

/// Trajectories processed per parallel block; the reduction walks blocks
/// and their members in index order.
const BLOCK: usize = 512;

/// Seed of trajectory `index`, a SplitMix64 mix of the pair.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub n_realizations: usize,
    pub dt: f64,
    pub horizon: f64,
    pub master_seed: u64,
    /// RK4 steps per field interval.
    pub substeps: usize,
}

impl EnsembleOptions {
    pub fn new(n_realizations: usize, dt: f64, horizon: f64, master_seed: u64) -> Self {
        Self {
            n_realizations,
            dt,
            horizon,
            master_seed,
            substeps: 1,
        }
    }

    pub fn n_steps(&self) -> usize {
        // Tolerate horizons that are a whole number of steps up to rounding.
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub params: SystemParams,
    pub initial: InitialCondition,
    pub options: EnsembleOptions,
    pub seeds: Vec<u64>,
    pub times: Vec<f64>,
    pub mean_m: Vec<f64>,
    pub stderr_m: Vec<f64>,
    pub mean_w: Vec<f64>,
    pub stderr_w: Vec<f64>,
    pub closed_m: Vec<f64>,
    pub closed_w: Vec<f64>,
    pub residual_m: Vec<f64>,
    pub residual_w: Vec<f64>,
    /// Largest |w| reached by any single trajectory.
    pub max_abs_w: f64,
}

/// Outcome of the pointwise acceptance bands
/// |residual| ≤ max(3·SE, 5% of the closed-form range, 1e−6).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub pass_m: bool,
    pub pass_w: bool,
    /// Largest |residual| / band over the grid.
    pub worst_ratio_m: f64,
    pub worst_ratio_w: f64,
}

impl BandCheck {
    pub fn passed(&self) -> bool {
        self.pass_m && self.pass_w
    }
}

/// Smallest band, covering integrator error when there is no noise.
pub const BAND_FLOOR: f64 = 1e-6;

fn worst_ratio(residual: &[f64], stderr: &[f64], closed: &[f64]) -> f64 {
    let lo = closed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = closed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    residual
        .iter()
        .zip(stderr)
        .map(|(r, se)| r.abs() / (3.0 * se).max(0.05 * range).max(BAND_FLOOR))
        .fold(0.0, f64::max)
}

impl EnsembleReport {
    pub fn check_bands(&self) -> BandCheck {
        let worst_ratio_m = worst_ratio(&self.residual_m, &self.stderr_m, &self.closed_m);
        let worst_ratio_w = worst_ratio(&self.residual_w, &self.stderr_w, &self.closed_w);
        BandCheck {
            pass_m: worst_ratio_m <= 1.0,
            pass_w: worst_ratio_w <= 1.0,
            worst_ratio_m,
            worst_ratio_w,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Welford {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.count - 1.0) / self.count).sqrt()
    }
}

pub fn ensemble_average(
    ic: &InitialCondition,
    p: &SystemParams,
    n_realizations: usize,
    dt: f64,
    horizon: f64,
    master_seed: u64,
) -> Result<EnsembleReport, StochasticError> {
    ensemble_average_with(ic, p, &EnsembleOptions::new(n_realizations, dt, horizon, master_seed))
}

pub fn ensemble_average_with(
    ic: &InitialCondition,
    p: &SystemParams,
    opts: &EnsembleOptions,
) -> Result<EnsembleReport, StochasticError> {
    p.validate()?;
    if opts.n_realizations < 2 {
        return Err(StochasticError::InvalidArgument("at least 2 realisations are required".into()));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(StochasticError::InvalidArgument(format!("horizon = {}", opts.horizon)));
    }
    let d = derive_params(p)?;
    let n_steps = opts.n_steps();
    let seeds: Vec<u64> = (0..opts.n_realizations as u64)
        .map(|i| trajectory_seed(opts.master_seed, i))
        .collect();
    let run = |seed: u64| -> Result<Trajectory, StochasticError> {
        let field = sample_field(p, opts.dt, n_steps, seed)?;
        simulate_trajectory_with(ic, p, &field, n_steps, opts.substeps)
    };

    let mut acc_m = vec![Welford::default(); n_steps + 1];
    let mut acc_w = vec![Welford::default(); n_steps + 1];
    let mut max_abs_w: f64 = 0.0;
    for block in seeds.chunks(BLOCK) {
        let trajectories: Vec<Result<Trajectory, StochasticError>> = block.par_iter().map(|s| run(*s)).collect();
        for traj in trajectories {
            let traj = traj?;
            for (k, s) in traj.states.iter().enumerate() {
                acc_m[k].push(s.m);
                acc_w[k].push(s.w);
                max_abs_w = max_abs_w.max(s.w.abs());
            }
        }
    }

    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * opts.dt).collect();
    let closed_m: Vec<f64> = times.iter().map(|t| mean_dipole(ic, p, *t)).collect();
    let closed_w: Vec<f64> = times.iter().map(|t| mean_inversion(ic, &d, p, *t)).collect();
    let mean_m: Vec<f64> = acc_m.iter().map(|a| a.mean).collect();
    let mean_w: Vec<f64> = acc_w.iter().map(|a| a.mean).collect();
    let residual_m = mean_m.iter().zip(&closed_m).map(|(a, b)| a - b).collect();
    let residual_w = mean_w.iter().zip(&closed_w).map(|(a, b)| a - b).collect();
    Ok(EnsembleReport {
        params: *p,
        initial: *ic,
        options: *opts,
        seeds,
        times,
        stderr_m: acc_m.iter().map(Welford::stderr).collect(),
        stderr_w: acc_w.iter().map(Welford::stderr).collect(),
        mean_m,
        mean_w,
        closed_m,
        closed_w,
        residual_m,
        residual_w,
        max_abs_w,
    })
}
