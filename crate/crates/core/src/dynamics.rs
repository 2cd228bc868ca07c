//! Closed-form ensemble evolution of the Bloch vector.
//!
//! The averaged state is ρ(t) = ½(I + w σ₃ + m σ₁) with
//!
//! ```text
//! m(t) = m₀ cos Ωt
//! W(t) = −A + e^{−γt} [ (A + W₀) C(t) + (c_sine + skew·W₀) S(t) ],   w = 2W/Ω
//! ```
//!
//! where (C, S) = (cos λt, sin λt / λ) or their hyperbolic continuation
//! (see [`Oscillation`]). This is the exact inverse Laplace transform of the
//! resolvent with the Lorentzian kernel; the commonly quoted reduced form
//! without the `skew·W₀` term is available as
//! [`mean_inversion_as_printed`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DerivedParams, Oscillation, SystemParams};

/// Slack allowed on Bloch-ball membership before a state is rejected.
pub const BLOCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("time must be finite and non-negative (got {0})")]
    InvalidTime(f64),
    #[error("initial condition (m0 = {m0}, w0 = {w0}) lies outside the Bloch ball")]
    InvalidInitial { m0: f64, w0: f64 },
    #[error("mixing angle {0} outside [0, pi/2]")]
    InvalidTheta(f64),
    #[error("evolved state (m = {m}, w = {w}) leaves the Bloch ball by {excess:e} at t = {t}")]
    OutsideBlochBall { m: f64, w: f64, excess: f64, t: f64 },
}

/// Initial dipole, its rate, and inversion, all dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub m0: f64,
    /// Only consumed by the stochastic integrator; the averaged formulas
    /// assume it vanishes.
    pub mdot0: f64,
    pub w0: f64,
}

impl InitialCondition {
    pub fn new(m0: f64, w0: f64) -> Result<Self, DynamicsError> {
        if !(m0.is_finite() && w0.is_finite()) || m0 * m0 + w0 * w0 > 1.0 + BLOCH_TOLERANCE {
            return Err(DynamicsError::InvalidInitial { m0, w0 });
        }
        Ok(Self { m0, mdot0: 0.0, w0 })
    }

    pub fn ground() -> Self {
        Self {
            m0: 0.0,
            mdot0: 0.0,
            w0: -1.0,
        }
    }

    pub fn with_mdot0(self, mdot0: f64) -> Self {
        Self { mdot0, ..self }
    }
}

/// Bloch-antipodal pure pair at mixing angle θ: members (±sin θ, ±cos θ)
/// in (m, w). θ = 0 is the inversion pair, θ = π/2 the coherence pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub theta: f64,
}

impl StatePair {
    pub fn new(theta: f64) -> Result<Self, DynamicsError> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(DynamicsError::InvalidTheta(theta));
        }
        Ok(Self { theta })
    }

    pub fn members(&self) -> (InitialCondition, InitialCondition) {
        let (s, c) = self.theta.sin_cos();
        (
            InitialCondition {
                m0: s,
                mdot0: 0.0,
                w0: c,
            },
            InitialCondition {
                m0: -s,
                mdot0: 0.0,
                w0: -c,
            },
        )
    }
}

/// Which formula family the trace-distance and backflow computations use.
///
/// `Derived` is consistent with [`mean_inversion`]: the inversion difference
/// decays as e^{−γt}. `AsPrinted` uses the widely reproduced reduced form in
/// which the squared inversion difference carries only e^{−γt}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaSource {
    #[default]
    Derived,
    AsPrinted,
}

impl fmt::Display for FormulaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormulaSource::Derived => "derived",
            FormulaSource::AsPrinted => "as-printed",
        })
    }
}

impl FromStr for FormulaSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "derived" => Ok(FormulaSource::Derived),
            "as-printed" => Ok(FormulaSource::AsPrinted),
            other => Err(format!("unknown formula source `{other}` (expected derived|as-printed)")),
        }
    }
}

/// Dimensionless Bloch components: x (dipole) and z (inversion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub m: f64,
    pub w: f64,
}

impl BlochState {
    pub fn norm_sq(&self) -> f64 {
        self.m * self.m + self.w * self.w
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    /// ½(I + w σ₃ + m σ₁) as a real 2×2 matrix.
    pub fn density_matrix(&self) -> [[f64; 2]; 2] {
        [[0.5 * (1.0 + self.w), 0.5 * self.m], [0.5 * self.m, 0.5 * (1.0 - self.w)]]
    }
}

pub fn purity(s: &BlochState) -> f64 {
    0.5 * (1.0 + s.norm_sq())
}

fn check_time(t: f64) -> Result<(), DynamicsError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidTime(t))
    }
}

pub fn mean_dipole(ic: &InitialCondition, p: &SystemParams, t: f64) -> f64 {
    ic.m0 * (p.omega * t).cos()
}

pub fn mean_inversion(ic: &InitialCondition, d: &DerivedParams, p: &SystemParams, t: f64) -> f64 {
    let w0 = 0.5 * p.omega * ic.w0;
    let (c, s) = d.oscillation().pair(t);
    let env = (-d.gamma * t).exp();
    let energy = -d.a_const + env * ((d.a_const + w0) * c + (d.c_sine + d.skew * w0) * s);
    2.0 * energy / p.omega
}

/// The reduced closed form without the W₀-dependent sine term. Exact only
/// when β = β_s or W₀ = 0.
pub fn mean_inversion_as_printed(ic: &InitialCondition, d: &DerivedParams, p: &SystemParams, t: f64) -> f64 {
    let w0 = 0.5 * p.omega * ic.w0;
    let (c, s) = d.oscillation().pair(t);
    let env = (-d.gamma * t).exp();
    let energy = d.a_const * (-1.0 + env * c) + w0 * env * c + d.c_sine * env * s;
    2.0 * energy / p.omega
}

pub fn evolved_state(
    ic: &InitialCondition,
    d: &DerivedParams,
    p: &SystemParams,
    t: f64,
) -> Result<BlochState, DynamicsError> {
    check_time(t)?;
    let state = BlochState {
        m: mean_dipole(ic, p, t),
        w: mean_inversion(ic, d, p, t),
    };
    let excess = state.norm_sq() - 1.0;
    if excess > BLOCH_TOLERANCE {
        return Err(DynamicsError::OutsideBlochBall {
            m: state.m,
            w: state.w,
            excess,
            t,
        });
    }
    Ok(state)
}

/// Amplitude `a(t)` (and its derivative) multiplying cos θ inside the
/// trace distance D = √(cos²θ·a² + sin²θ·cos²Ωt).
///
/// Derived: a = e^{−γt}(C + skew·S), the propagator of an inversion
/// difference. As-printed: a = e^{−γt/2}·C.
pub fn inversion_amplitude(gamma: f64, osc: Oscillation, skew: f64, t: f64, mode: FormulaSource) -> (f64, f64) {
    let (c, s) = osc.pair(t);
    let l2 = osc.lambda_sq();
    match mode {
        FormulaSource::Derived => {
            let env = (-gamma * t).exp();
            let inner = c + skew * s;
            let inner_dot = -l2 * s + skew * c;
            (env * inner, env * (inner_dot - gamma * inner))
        }
        FormulaSource::AsPrinted => {
            let env = (-0.5 * gamma * t).exp();
            // The printed envelope cannot absorb cosh growth; the overdamped
            // case is read as λ = 0 there.
            let (c, s, l2) = match osc {
                Oscillation::Overdamped { .. } => (1.0, t, 0.0),
                _ => (c, s, l2),
            };
            (env * c, env * (-l2 * s - 0.5 * gamma * c))
        }
    }
}

pub fn trace_distance(pair: &StatePair, d: &DerivedParams, p: &SystemParams, t: f64, mode: FormulaSource) -> f64 {
    let (s, c) = pair.theta.sin_cos();
    let (a, _) = inversion_amplitude(d.gamma, d.oscillation(), d.skew, t, mode);
    let b = (p.omega * t).cos();
    (c * c * a * a + s * s * b * b).sqrt()
}
