use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::StochasticError;
use crate::model::SystemParams;
use crate::output::{format_float, CsvTable};

/// Field samples E(k·dt), k = 0, 1, …
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl FieldRealization {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last grid time.
    pub fn horizon(&self) -> f64 {
        self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    /// Linear interpolation between grid samples, clamped at the ends.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t / self.dt).max(0.0);
        let k = x.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap_or(&0.0);
        }
        let frac = x - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// `t,E` table.
    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(["t", "E"]);
        for (k, v) in self.values.iter().enumerate() {
            table.push(vec![format_float(k as f64 * self.dt), format_float(*v)]);
        }
        table.render()
    }
}

/// Largest grid step resolving both the correlation time and the carrier.
pub fn max_field_step(p: &SystemParams) -> f64 {
    (0.05 / p.beta).min(0.05 * TAU / p.omega)
}

/// Samples E = X cos Ωt + Y sin Ωt with X, Y independent stationary
/// Ornstein–Uhlenbeck processes of rate β and variance πI₀β, so that
/// E[E(t)E(s)] = πI₀β e^{−β|t−s|} cos Ω(t−s). `n_steps` steps give
/// `n_steps + 1` samples.
pub fn sample_field(p: &SystemParams, dt: f64, n_steps: usize, seed: u64) -> Result<FieldRealization, StochasticError> {
    p.validate()?;
    let limit = max_field_step(p);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StochasticError::InvalidArgument(format!("dt = {dt}")));
    }
    if dt > limit * (1.0 + 1e-12) {
        return Err(StochasticError::StepTooLarge { dt, limit });
    }
    if n_steps == 0 {
        return Err(StochasticError::InvalidArgument("n_steps must be at least 1".into()));
    }
    let variance = p.field_variance();
    if variance == 0.0 {
        return Ok(FieldRealization {
            dt,
            values: vec![0.0; n_steps + 1],
            seed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = (-p.beta * dt).exp();
    let innovation = (variance * (1.0 - rho * rho)).sqrt();
    let sd = variance.sqrt();
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut x = sd * normal();
    let mut y = sd * normal();
    let mut values = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let (s, c) = (p.omega * k as f64 * dt).sin_cos();
        values.push(x * c + y * s);
        x = rho * x + innovation * normal();
        y = rho * y + innovation * normal();
    }
    Ok(FieldRealization { dt, values, seed })
}
