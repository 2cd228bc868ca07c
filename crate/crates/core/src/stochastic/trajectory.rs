use serde::{Deserialize, Serialize};

use super::{FieldRealization, StochasticError};
use crate::dynamics::InitialCondition;
use crate::model::SystemParams;

/// Integration aborts once |m|, |ṁ|/Ω or |w| exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e3;

/// Instantaneous dimensionless dipole, its rate and the inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub m: f64,
    pub mdot: f64,
    pub w: f64,
}

impl TrajectoryState {
    fn axpy(self, h: f64, k: TrajectoryState) -> Self {
        Self {
            m: self.m + h * k.m,
            mdot: self.mdot + h * k.mdot,
            w: self.w + h * k.w,
        }
    }
}

/// States on the field grid, starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<TrajectoryState>,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// m'' = −Ω²m − ΩκE·w,  w' = (κ/Ω)E·m' − β_s(w + 1).
fn rhs(p: &SystemParams, e: f64, s: TrajectoryState) -> TrajectoryState {
    TrajectoryState {
        m: s.mdot,
        mdot: -p.omega * p.omega * s.m - p.omega * p.kappa * e * s.w,
        w: p.kappa / p.omega * e * s.mdot - p.beta_s * (s.w + 1.0),
    }
}

/// Integrates over the whole field grid, one RK4 step per grid interval.
pub fn simulate_trajectory(
    ic: &InitialCondition,
    p: &SystemParams,
    field: &FieldRealization,
) -> Result<Trajectory, StochasticError> {
    simulate_trajectory_with(ic, p, field, field.len().saturating_sub(1), 1)
}

/// Integrates `n_steps` grid intervals with `substeps` RK4 steps each; the
/// field is linear inside every interval.
pub fn simulate_trajectory_with(
    ic: &InitialCondition,
    p: &SystemParams,
    field: &FieldRealization,
    n_steps: usize,
    substeps: usize,
) -> Result<Trajectory, StochasticError> {
    p.validate()?;
    if substeps == 0 {
        return Err(StochasticError::InvalidArgument("substeps must be at least 1".into()));
    }
    if n_steps + 1 > field.len() {
        return Err(StochasticError::HorizonNotCovered {
            requested: n_steps as f64 * field.dt,
            available: field.horizon(),
        });
    }
    let dt = field.dt;
    let h = dt / substeps as f64;
    let mut s = TrajectoryState {
        m: ic.m0,
        mdot: ic.mdot0,
        w: ic.w0,
    };
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(s);
    for k in 0..n_steps {
        let (e0, e1) = (field.values[k], field.values[k + 1]);
        let e_at = |frac: f64| e0 + frac * (e1 - e0);
        for j in 0..substeps {
            let f0 = j as f64 / substeps as f64;
            let fh = (j as f64 + 0.5) / substeps as f64;
            let f1 = (j as f64 + 1.0) / substeps as f64;
            let k1 = rhs(p, e_at(f0), s);
            let k2 = rhs(p, e_at(fh), s.axpy(0.5 * h, k1));
            let k3 = rhs(p, e_at(fh), s.axpy(0.5 * h, k2));
            let k4 = rhs(p, e_at(f1), s.axpy(h, k3));
            s = TrajectoryState {
                m: s.m + h / 6.0 * (k1.m + 2.0 * k2.m + 2.0 * k3.m + k4.m),
                mdot: s.mdot + h / 6.0 * (k1.mdot + 2.0 * k2.mdot + 2.0 * k3.mdot + k4.mdot),
                w: s.w + h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
            };
        }
        let bad = |x: f64| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT;
        if bad(s.m) || bad(s.mdot / p.omega) || bad(s.w) {
            return Err(StochasticError::Diverged {
                seed: field.seed,
                t: (k + 1) as f64 * dt,
                m: s.m,
                mdot: s.mdot,
                w: s.w,
            });
        }
        states.push(s);
    }
    Ok(Trajectory { dt, states })
}
