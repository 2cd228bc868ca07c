//! Physical inputs, the closed-form constants of the averaged dynamics, and
//! the dimensionless configuration consumed by the backflow engine.
//!
//! Units are natural (ħ = 1). The field enters only through the product
//! `kappa * E`, which has the dimension of an angular frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be non-negative (got {value})")]
    Negative { name: &'static str, value: f64 },
}

impl ModelError {
    /// The offending parameter.
    pub fn name(&self) -> &'static str {
        match self {
            ModelError::NonFinite { name, .. } | ModelError::NonPositive { name, .. } | ModelError::Negative { name, .. } => {
                name
            }
        }
    }
}

/// Physical parameters of the atom and of the Lorentzian background field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Angular transition frequency Ω.
    pub omega: f64,
    /// Effective dipole coupling 2μ·cos α.
    pub kappa: f64,
    /// Spontaneous-emission rate.
    pub beta_s: f64,
    /// Height of the field spectrum at resonance.
    pub i0: f64,
    /// Half-width of the field spectrum.
    pub beta: f64,
}

impl SystemParams {
    pub fn new(omega: f64, kappa: f64, beta_s: f64, i0: f64, beta: f64) -> Result<Self, ModelError> {
        let p = Self {
            omega,
            kappa,
            beta_s,
            i0,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the combined coupling `pi * i0 * kappa^2`,
    /// taking `kappa = 1`.
    pub fn from_coupling(omega: f64, coupling: f64, beta_s: f64, beta: f64) -> Result<Self, ModelError> {
        Self::new(omega, 1.0, beta_s, coupling / PI, beta)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("beta_s", self.beta_s),
            ("i0", self.i0),
            ("beta", self.beta),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        if self.omega <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "omega",
                value: self.omega,
            });
        }
        if self.beta <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "beta",
                value: self.beta,
            });
        }
        if self.beta_s < 0.0 {
            return Err(ModelError::Negative {
                name: "beta_s",
                value: self.beta_s,
            });
        }
        if self.i0 < 0.0 {
            return Err(ModelError::Negative {
                name: "i0",
                value: self.i0,
            });
        }
        Ok(())
    }

    /// The combination π·I₀·κ² that sets the field-induced transition rate.
    pub fn coupling(&self) -> f64 {
        PI * self.i0 * self.kappa * self.kappa
    }

    /// Zero-lag field autocorrelation, C(0) = π·I₀·β.
    ///
    /// This normalisation makes C(τ) = ∫ I(ω) cos(ωτ) dω for the one-sided
    /// Lorentzian I(ω), which is the convention under which the resolvent
    /// kernel reduces to π·I₀·β / (2(z + β)).
    pub fn field_variance(&self) -> f64 {
        PI * self.i0 * self.beta
    }

    /// Lorentzian spectrum I(ω) = I₀β² / ((ω − Ω)² + β²).
    pub fn spectrum(&self, w: f64) -> f64 {
        let d = w - self.omega;
        self.i0 * self.beta * self.beta / (d * d + self.beta * self.beta)
    }
}

/// The pair of functions (C, S) solving C' = −λ²S, S' = C with C(0) = 1,
/// S(0) = 0.
///
/// For λ² > 0 this is (cos λt, sin λt / λ); for λ² < 0 the hyperbolic
/// continuation; for λ² = 0 the limit (1, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oscillation {
    Oscillatory { lambda: f64 },
    Critical,
    Overdamped { mu: f64 },
}

impl Oscillation {
    pub fn from_lambda_sq(lambda_sq: f64) -> Self {
        if lambda_sq > 0.0 {
            Oscillation::Oscillatory {
                lambda: lambda_sq.sqrt(),
            }
        } else if lambda_sq < 0.0 {
            Oscillation::Overdamped {
                mu: (-lambda_sq).sqrt(),
            }
        } else {
            Oscillation::Critical
        }
    }

    pub fn lambda_sq(&self) -> f64 {
        match *self {
            Oscillation::Oscillatory { lambda } => lambda * lambda,
            Oscillation::Critical => 0.0,
            Oscillation::Overdamped { mu } => -mu * mu,
        }
    }

    /// |λ| (or μ in the overdamped case).
    pub fn rate(&self) -> f64 {
        match *self {
            Oscillation::Oscillatory { lambda } => lambda,
            Oscillation::Critical => 0.0,
            Oscillation::Overdamped { mu } => mu,
        }
    }

    pub fn cos_like(&self, t: f64) -> f64 {
        match *self {
            Oscillation::Oscillatory { lambda } => (lambda * t).cos(),
            Oscillation::Critical => 1.0,
            Oscillation::Overdamped { mu } => (mu * t).cosh(),
        }
    }

    pub fn sin_like(&self, t: f64) -> f64 {
        match *self {
            Oscillation::Oscillatory { lambda } => (lambda * t).sin() / lambda,
            Oscillation::Critical => t,
            Oscillation::Overdamped { mu } => (mu * t).sinh() / mu,
        }
    }

    /// `(C(t), S(t))` together.
    pub fn pair(&self, t: f64) -> (f64, f64) {
        (self.cos_like(t), self.sin_like(t))
    }
}

/// Closed-form constants of the ensemble-averaged inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Steady-state offset A; the inversion relaxes to −A.
    pub a_const: f64,
    /// B, absent when 2β_s + πI₀κ² = 0.
    pub b_const: Option<f64>,
    /// Envelope decay rate γ = (β + β_s)/2.
    pub gamma: f64,
    /// λ², negative in the overdamped regime.
    pub lambda_sq: f64,
    /// ½β_s(B − A) in cancellation-free form; zero when β_s = 0.
    pub c_sine: f64,
    /// (β − β_s)/2, the weight of W₀ in the sine term of the exact
    /// resolvent inversion.
    pub skew: f64,
    /// True iff λ² > 0.
    pub oscillatory: bool,
}

impl DerivedParams {
    pub fn oscillation(&self) -> Oscillation {
        Oscillation::from_lambda_sq(self.lambda_sq)
    }

    /// λ when oscillatory, otherwise `None`.
    pub fn lambda(&self) -> Option<f64> {
        self.oscillatory.then(|| self.lambda_sq.sqrt())
    }
}

pub fn derive_params(p: &SystemParams) -> Result<DerivedParams, ModelError> {
    p.validate()?;
    let coupling = p.coupling();
    let denom = 2.0 * p.beta_s + coupling;
    let a_const = if denom > 0.0 {
        p.omega * p.beta_s / denom
    } else {
        0.0
    };
    let b_const = (denom > 0.0).then(|| p.omega * (p.beta - coupling) / denom);
    let c_sine = if p.beta_s == 0.0 {
        0.0
    } else {
        p.beta_s * p.omega * (p.beta - coupling - p.beta_s) / (2.0 * denom)
    };
    let diff = p.beta - p.beta_s;
    let lambda_sq = 0.5 * coupling * p.beta - 0.25 * diff * diff;
    Ok(DerivedParams {
        a_const,
        b_const,
        gamma: 0.5 * (p.beta + p.beta_s),
        lambda_sq,
        c_sine,
        skew: 0.5 * diff,
        oscillatory: lambda_sq > 0.0,
    })
}

/// Dimensionless inputs of the backflow engine; all times in units of 1/γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessConfig {
    /// λ/γ, or √(−λ²)/γ when `overdamped`.
    pub lambda_hat: f64,
    pub omega_hat: f64,
    /// γ·T.
    pub t_max: f64,
    /// (β − β_s)/(β + β_s). Zero in the reduced two-parameter model.
    #[serde(default)]
    pub skew_hat: f64,
    #[serde(default)]
    pub overdamped: bool,
}

impl DimensionlessConfig {
    /// The reduced model: oscillatory, no skew.
    pub fn reduced(lambda_hat: f64, omega_hat: f64, t_max: f64) -> Self {
        Self {
            lambda_hat,
            omega_hat,
            t_max,
            skew_hat: 0.0,
            overdamped: false,
        }
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        Self { t_max, ..self }
    }

    pub fn oscillation(&self) -> Oscillation {
        let l2 = self.lambda_hat * self.lambda_hat;
        Oscillation::from_lambda_sq(if self.overdamped { -l2 } else { l2 })
    }
}

pub fn nondimensionalize(p: &SystemParams, t_max: f64) -> Result<DimensionlessConfig, ModelError> {
    if !t_max.is_finite() {
        return Err(ModelError::NonFinite {
            name: "t_max",
            value: t_max,
        });
    }
    if t_max < 0.0 {
        return Err(ModelError::Negative {
            name: "t_max",
            value: t_max,
        });
    }
    let d = derive_params(p)?;
    let g = d.gamma;
    Ok(DimensionlessConfig {
        lambda_hat: d.lambda_sq.abs().sqrt() / g,
        omega_hat: p.omega / g,
        t_max: g * t_max,
        skew_hat: d.skew / g,
        overdamped: d.lambda_sq < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn derive_unit_example() {
        // πI₀κ² = 2 with κ = 1.
        let p = SystemParams::from_coupling(2.0, 2.0, 1.0, 1.0).unwrap();
        let d = derive_params(&p).unwrap();
        assert_relative_eq!(d.gamma, 1.0);
        assert_relative_eq!(d.lambda_sq, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.a_const, 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.b_const.unwrap(), -0.5, epsilon = 1e-15);
        assert!(d.oscillatory);
        assert_relative_eq!(d.c_sine, 0.5 * 1.0 * (-0.5 - 0.5), epsilon = 1e-15);
    }

    #[test]
    fn zero_field_degenerates() {
        let p = SystemParams::new(3.0, 7.5, 0.0, 0.0, 2.0).unwrap();
        let d = derive_params(&p).unwrap();
        assert_eq!(d.gamma, 1.0);
        assert_eq!(d.lambda_sq, -1.0);
        assert_eq!(d.a_const, 0.0);
        assert_eq!(d.c_sine, 0.0);
        assert_eq!(d.b_const, None);
        assert!(!d.oscillatory);
    }

    #[test]
    fn weak_coupling_overdamped() {
        let p = SystemParams::from_coupling(5.0, 0.1, 0.2, 1.0).unwrap();
        let d = derive_params(&p).unwrap();
        assert_relative_eq!(d.gamma, 0.6, epsilon = 1e-15);
        assert_relative_eq!(d.lambda_sq, -0.11, epsilon = 1e-15);
        // Direct root solving of z² + (β+β_s)z + ββ_s + ½·coupling·β.
        let (b, c): (f64, f64) = (1.2, 0.2 + 0.05);
        let disc = b * b - 4.0 * c;
        let r1 = (-b + disc.sqrt()) / 2.0;
        let r2 = (-b - disc.sqrt()) / 2.0;
        let mu = (-d.lambda_sq).sqrt();
        assert_relative_eq!(-d.gamma + mu, r1, max_relative = 1e-12);
        assert_relative_eq!(-d.gamma - mu, r2, max_relative = 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(matches!(
            SystemParams::new(0.0, 1.0, 0.1, 1.0, 1.0),
            Err(ModelError::NonPositive { name: "omega", .. })
        ));
        assert!(matches!(
            SystemParams::new(1.0, 1.0, 0.1, 1.0, -1.0),
            Err(ModelError::NonPositive { name: "beta", .. })
        ));
        assert!(matches!(
            SystemParams::new(1.0, 1.0, -0.1, 1.0, 1.0),
            Err(ModelError::Negative { name: "beta_s", .. })
        ));
        assert!(matches!(
            SystemParams::new(1.0, 1.0, 0.1, -1.0, 1.0),
            Err(ModelError::Negative { name: "i0", .. })
        ));
        assert!(matches!(
            SystemParams::new(1.0, f64::NAN, 0.1, 1.0, 1.0),
            Err(ModelError::NonFinite { name: "kappa", .. })
        ));
    }

    #[test]
    fn nondimensionalize_examples() {
        // γ = 2, λ = 4, Ω = 6, T = 1  →  (2, 3, 2).
        // β = β_s = 2 gives γ = 2 and λ² = coupling.
        let p = SystemParams::from_coupling(6.0, 16.0, 2.0, 2.0).unwrap();
        let c = nondimensionalize(&p, 1.0).unwrap();
        assert_relative_eq!(c.lambda_hat, 2.0, epsilon = 1e-14);
        assert_relative_eq!(c.omega_hat, 3.0, epsilon = 1e-14);
        assert_relative_eq!(c.t_max, 2.0, epsilon = 1e-14);
        assert_eq!(c.skew_hat, 0.0);
        assert!(!c.overdamped);

        let p = SystemParams::from_coupling(1.0, 2.0, 1.0, 1.0).unwrap();
        let c = nondimensionalize(&p, 5.0).unwrap();
        assert_relative_eq!(c.lambda_hat, 1.0, epsilon = 1e-14);
        assert_relative_eq!(c.omega_hat, 1.0, epsilon = 1e-14);
        assert_relative_eq!(c.t_max, 5.0, epsilon = 1e-14);

        // γ = 0.5, λ = 1, Ω = 8, T = 2 → (2, 16, 1).
        let p = SystemParams::from_coupling(8.0, 4.0, 0.5, 0.5).unwrap();
        let c = nondimensionalize(&p, 2.0).unwrap();
        assert_relative_eq!(c.lambda_hat, 2.0, epsilon = 1e-14);
        assert_relative_eq!(c.omega_hat, 16.0, epsilon = 1e-14);
        assert_relative_eq!(c.t_max, 1.0, epsilon = 1e-14);

        assert!(nondimensionalize(&p, -1.0).is_err());
    }

    #[test]
    fn oscillation_pairs_satisfy_their_ode() {
        for l2 in [2.3, 0.0, -0.7] {
            let o = Oscillation::from_lambda_sq(l2);
            let h = 1e-5;
            for t in [0.0, 0.4, 1.7, 3.0] {
                let (c0, s0) = o.pair(t);
                let (cp, sp) = o.pair(t + h);
                let (cm, sm) = o.pair((t - h).max(0.0));
                let dt = if t == 0.0 { h } else { 2.0 * h };
                assert_relative_eq!((cp - cm) / dt, -l2 * s0, epsilon = 1e-4);
                assert_relative_eq!((sp - sm) / dt, c0, epsilon = 1e-4);
            }
            assert_eq!(o.pair(0.0), (1.0, 0.0));
        }
    }

    #[test]
    fn lorentzian_kernel_matches_quadrature() {
        // F(z) = (z/2) ∫ I(ω) / ((ω−Ω)² + z²) dω should equal πI₀β / (2(z+β)).
        let p = SystemParams::new(4.0, 1.3, 0.2, 0.7, 0.9).unwrap();
        for z in [0.3, 1.0, 2.5] {
            // ω − Ω = tan(u) maps the real line onto (−π/2, π/2).
            let f = |u: f64| {
                let x = u.tan();
                let jac = 1.0 + x * x;
                p.spectrum(p.omega + x) / (x * x + z * z) * jac
            };
            let lim = PI / 2.0 - 1e-9;
            let q = crate::quadrature::integrate(f, -lim, lim, 1e-12, 2000).unwrap();
            let numeric = 0.5 * z * q.value;
            let closed = PI * p.i0 * p.beta / (2.0 * (z + p.beta));
            assert_relative_eq!(numeric, closed, max_relative = 1e-8);
        }
    }

    #[test]
    fn steady_state_is_zero_pole_residue() {
        let p = SystemParams::new(3.0, 0.8, 0.4, 0.25, 1.1).unwrap();
        let d = derive_params(&p).unwrap();
        let f0 = PI * p.i0 * p.beta / (2.0 * p.beta);
        let residue = -0.5 * p.beta_s * p.omega / (p.beta_s + p.kappa * p.kappa * f0);
        assert_relative_eq!(-d.a_const, residue, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn poles_solve_characteristic_polynomial(
            beta in 0.01f64..10.0,
            beta_s in 0.0f64..10.0,
            coupling in 0.0f64..20.0,
            omega in 0.1f64..10.0,
        ) {
            let p = SystemParams::from_coupling(omega, coupling, beta_s, beta).unwrap();
            let d = derive_params(&p).unwrap();
            // (z + β_s)(z + β) + ½ coupling β = z² + b z + c
            let b = beta + beta_s;
            let c = beta * beta_s + 0.5 * coupling * beta;
            let disc = b * b - 4.0 * c;
            let scale = b.max(c.sqrt()).max(1e-300);
            if disc >= 0.0 {
                // real roots −γ ± √(−λ²)
                let s = disc.sqrt() / 2.0;
                let mu = (-d.lambda_sq).max(0.0).sqrt();
                prop_assert!(((-d.gamma + mu) - (-b / 2.0 + s)).abs() <= 1e-12 * scale);
                prop_assert!(((-d.gamma - mu) - (-b / 2.0 - s)).abs() <= 1e-12 * scale);
            } else {
                let im = (-disc).sqrt() / 2.0;
                prop_assert!((d.gamma - b / 2.0).abs() <= 1e-12 * scale);
                prop_assert!((d.lambda_sq.sqrt() - im).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn scale_covariance(
            beta in 0.01f64..5.0,
            beta_s in 0.0f64..5.0,
            coupling in 0.0f64..5.0,
            c in 0.1f64..10.0,
        ) {
            let p = SystemParams::from_coupling(2.0, coupling, beta_s, beta).unwrap();
            let q = SystemParams::from_coupling(2.0, c * coupling, c * beta_s, c * beta).unwrap();
            let dp = derive_params(&p).unwrap();
            let dq = derive_params(&q).unwrap();
            prop_assert!((dq.gamma - c * dp.gamma).abs() <= 1e-12 * dq.gamma.abs().max(1.0));
            let l = c * c * dp.lambda_sq;
            prop_assert!((dq.lambda_sq - l).abs() <= 1e-10 * l.abs().max(1.0));
            // A depends only on the ratio coupling/β_s.
            prop_assert!((dq.a_const - dp.a_const).abs() <= 1e-12);
        }

        #[test]
        fn c_sine_is_finite(
            beta in 0.01f64..5.0,
            beta_s in prop_oneof![Just(0.0), 0.0f64..5.0],
            coupling in prop_oneof![Just(0.0), 0.0f64..5.0],
        ) {
            let p = SystemParams::from_coupling(1.0, coupling, beta_s, beta).unwrap();
            let d = derive_params(&p).unwrap();
            prop_assert!(d.c_sine.is_finite());
            if let Some(b) = d.b_const {
                prop_assert!((d.c_sine - 0.5 * beta_s * (b - d.a_const)).abs() <= 1e-10);
            }
        }
    }
}
