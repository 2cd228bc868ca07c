//! Information backflow: rate of change of the trace distance, its positive
//! part integrated over time, and the maximisation over initial pairs.
//!
//! All routines here work in units of 1/γ unless the name says otherwise.
//! For the antipodal pair at mixing angle θ the distance is
//!
//! ```text
//! D(τ) = √( cos²θ · a(τ)² + sin²θ · cos²(Ω̂τ) )
//! ```
//!
//! with the inversion amplitude `a` from
//! [`inversion_amplitude`](crate::dynamics::inversion_amplitude). The
//! backflow over `[0, T]` is the integral of max(0, dD/dτ). Intervals where
//! the rate is positive are bracketed on a grid that contains every zero of
//! `a` and of cos Ω̂τ (where D has kinks), refined by bisection, and
//! integrated with adaptive Gauss–Kronrod quadrature.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{inversion_amplitude, FormulaSource};
use crate::model::{DimensionlessConfig, Oscillation};
use crate::quadrature::{self, QuadratureError};

/// Default θ-grid size for [`n_measure`].
pub const DEFAULT_THETA_GRID: usize = 65;

/// Two backflow values closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlpError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The two endpoint pairs of the θ family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    /// Coherence pair (θ = π/2); backflow depends on Ω̂ only.
    OmegaBranch,
    /// Inversion pair (θ = 0); backflow depends on λ̂ and the damping.
    LambdaBranch,
}

impl BranchKind {
    pub fn theta(self) -> f64 {
        match self {
            BranchKind::OmegaBranch => FRAC_PI_2,
            BranchKind::LambdaBranch => 0.0,
        }
    }

    /// Branch whose endpoint is closer to `theta`.
    pub fn nearest(theta: f64) -> Self {
        if theta < FRAC_PI_4 {
            BranchKind::LambdaBranch
        } else {
            BranchKind::OmegaBranch
        }
    }
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchKind::OmegaBranch => "omega_branch",
            BranchKind::LambdaBranch => "lambda_branch",
        })
    }
}

/// dD/dτ at a point. `kink` is set when D vanishes there; `value` is then
/// the right-hand limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub kink: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackflowResult {
    pub n_value: f64,
    pub winning_branch: BranchKind,
    pub theta_star: f64,
    /// Maximal intervals on which the rate is positive, ordered.
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackflowOptions {
    /// Absolute tolerance of each per-interval quadrature.
    pub abs_tol: f64,
    /// Bracket width at which root refinement stops (time units of the call).
    pub root_tol: f64,
    pub max_subdivisions: usize,
    /// Sign probes per bracketing segment.
    pub samples_per_segment: usize,
}

impl Default for BackflowOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            root_tol: 1e-12,
            max_subdivisions: 200,
            samples_per_segment: 8,
        }
    }
}

/// The antipodal pair at angle θ evolving under a given rate γ.
#[derive(Debug, Clone, Copy)]
struct PairGeometry {
    cos_sq: f64,
    sin_sq: f64,
    gamma: f64,
    osc: Oscillation,
    skew: f64,
    omega: f64,
    mode: FormulaSource,
}

impl PairGeometry {
    fn new(theta: f64, gamma: f64, osc: Oscillation, skew: f64, omega: f64, mode: FormulaSource) -> Self {
        let (s, c) = theta.sin_cos();
        // Snap the endpoints so the unused term vanishes exactly.
        let (cos_sq, sin_sq) = if theta == FRAC_PI_2 {
            (0.0, 1.0)
        } else if theta == 0.0 {
            (1.0, 0.0)
        } else {
            (c * c, s * s)
        };
        Self {
            cos_sq,
            sin_sq,
            gamma,
            osc,
            skew,
            omega,
            mode,
        }
    }

    fn dimensionless(theta: f64, cfg: &DimensionlessConfig, mode: FormulaSource) -> Self {
        Self::new(theta, 1.0, cfg.oscillation(), cfg.skew_hat, cfg.omega_hat, mode)
    }

    fn terms(&self, t: f64) -> (f64, f64, f64, f64) {
        let (a, da) = inversion_amplitude(self.gamma, self.osc, self.skew, t, self.mode);
        let (sb, cb) = (self.omega * t).sin_cos();
        (a, da, cb, -self.omega * sb)
    }

    fn distance(&self, t: f64) -> f64 {
        let (a, _, b, _) = self.terms(t);
        (self.cos_sq * a * a + self.sin_sq * b * b).sqrt()
    }

    /// Rate with the one-sided limit taken from the right (`right = true`)
    /// or the left where D = 0.
    fn rate_sided(&self, t: f64, right: bool) -> Rate {
        let (a, da, b, db) = self.terms(t);
        let d = (self.cos_sq * a * a + self.sin_sq * b * b).sqrt();
        if d > 0.0 {
            Rate {
                value: (self.cos_sq * a * da + self.sin_sq * b * db) / d,
                kink: false,
            }
        } else {
            let slope = (self.cos_sq * da * da + self.sin_sq * db * db).sqrt();
            Rate {
                value: if right { slope } else { -slope },
                kink: true,
            }
        }
    }

    fn rate(&self, t: f64) -> f64 {
        self.rate_sided(t, true).value
    }

    /// Bracketing grid: every zero of `a` (and its quarter-period
    /// companions) and every multiple of π/(2Ω) inside (0, t_end).
    fn knots(&self, t_end: f64) -> Vec<f64> {
        let mut knots = vec![0.0, t_end];
        let mut push_lattice = |offset: f64, step: f64| {
            if step.is_finite() && step > 0.0 {
                let k0 = (-offset / step).ceil() as i64;
                let mut k = k0.max(0);
                loop {
                    let t = offset + k as f64 * step;
                    if t >= t_end {
                        break;
                    }
                    if t > 0.0 {
                        knots.push(t);
                    }
                    k += 1;
                }
            }
        };
        if self.sin_sq > 0.0 && self.omega > 0.0 {
            push_lattice(0.0, FRAC_PI_2 / self.omega);
        }
        if self.cos_sq > 0.0 {
            let skew = match self.mode {
                FormulaSource::Derived => self.skew,
                FormulaSource::AsPrinted => 0.0,
            };
            match self.osc {
                Oscillation::Oscillatory { lambda } => {
                    // C + skew·S = R cos(λt − φ)
                    let phi = (skew / lambda).atan();
                    push_lattice(phi / lambda, FRAC_PI_2 / lambda);
                }
                Oscillation::Critical => {
                    if skew < 0.0 {
                        knots.push(-1.0 / skew);
                    }
                }
                Oscillation::Overdamped { mu } => {
                    if skew < -mu {
                        knots.push((-mu / skew).atanh() / mu);
                    }
                }
            }
        }
        knots.retain(|t| (0.0..=t_end).contains(t));
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * t_end.max(1.0));
        knots
    }
}

fn check_config(cfg: &DimensionlessConfig) -> Result<(), BlpError> {
    let ok = cfg.lambda_hat.is_finite()
        && cfg.lambda_hat >= 0.0
        && cfg.omega_hat.is_finite()
        && cfg.omega_hat >= 0.0
        && cfg.t_max.is_finite()
        && cfg.t_max >= 0.0
        && cfg.skew_hat.is_finite();
    if ok {
        Ok(())
    } else {
        Err(BlpError::InvalidInput(format!("{cfg:?}")))
    }
}

/// Rate of change of the trace distance in units of γ.
pub fn sigma_rate(theta: f64, cfg: &DimensionlessConfig, tau: f64, mode: FormulaSource) -> Rate {
    PairGeometry::dimensionless(theta, cfg, mode).rate_sided(tau, true)
}

/// Trace distance of the θ pair at dimensionless time τ.
pub fn pair_distance(theta: f64, cfg: &DimensionlessConfig, tau: f64, mode: FormulaSource) -> f64 {
    PairGeometry::dimensionless(theta, cfg, mode).distance(tau)
}

/// Rate of change of the trace distance for dimensionful (γ, λ², skew, Ω)
/// at time `t`.
pub fn sigma_rate_dimensional(
    theta: f64,
    gamma: f64,
    lambda_sq: f64,
    skew: f64,
    omega: f64,
    t: f64,
    mode: FormulaSource,
) -> Rate {
    PairGeometry::new(theta, gamma, Oscillation::from_lambda_sq(lambda_sq), skew, omega, mode).rate_sided(t, true)
}

/// Positive part of d|cos Ω̂τ|/dτ.
pub fn branch_integrand_omega(tau: f64, omega_hat: f64) -> f64 {
    let (s, c) = (omega_hat * tau).sin_cos();
    if c == 0.0 {
        // right-hand limit: |cos| rises at rate Ω̂ after its zero
        return omega_hat * s.abs();
    }
    let s2 = 2.0 * s * c;
    0.25 * omega_hat * (s2.abs() - s2) / c.abs()
}

/// Positive part of d/dτ of the inversion-pair distance in the reduced
/// model: e^{−τ}|cos λ̂τ| (derived) or e^{−τ/2}|cos λ̂τ| (as printed).
pub fn branch_integrand_lambda(tau: f64, lambda_hat: f64, mode: FormulaSource) -> f64 {
    let (s, c) = (lambda_hat * tau).sin_cos();
    let sin2 = 2.0 * s * c;
    match mode {
        FormulaSource::Derived => {
            if c == 0.0 {
                return (-tau).exp() * lambda_hat * s.abs();
            }
            let x = c * c + 0.5 * lambda_hat * sin2;
            (-tau).exp() * (-x).max(0.0) / c.abs()
        }
        FormulaSource::AsPrinted => {
            if c == 0.0 {
                return (-0.5 * tau).exp() * lambda_hat * s.abs();
            }
            let x = c * c + lambda_hat * sin2;
            (-0.5 * tau).exp() * (-x).max(0.0) / (2.0 * c.abs())
        }
    }
}

/// ∫ max(0, dD/dτ) over `[0, t_end]` together with the positivity
/// intervals.
fn positive_backflow(
    geom: &PairGeometry,
    t_end: f64,
    opts: &BackflowOptions,
) -> Result<(f64, Vec<(f64, f64)>), QuadratureError> {
    if t_end <= 0.0 {
        return Ok((0.0, Vec::new()));
    }
    let knots = geom.knots(t_end);
    // Probe spacing never exceeds a quarter of the damping time.
    let max_step = 0.25 / geom.gamma.max(f64::MIN_POSITIVE);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;

    for seg in knots.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let n = opts.samples_per_segment.max(2).max((len / max_step).ceil() as usize + 1);
        let nudge = 1e-10 * len;
        let probe = |i: usize| -> f64 {
            if i == 0 {
                lo + nudge
            } else if i == n {
                hi - nudge
            } else {
                lo + len * i as f64 / n as f64
            }
        };
        let mut prev_x = probe(0);
        let mut prev_pos = geom.rate(prev_x) > 0.0;
        if prev_pos && open.is_none() {
            open = Some(lo);
        } else if !prev_pos {
            if let Some(start) = open.take() {
                intervals.push((start, lo));
            }
        }
        for i in 1..=n {
            let x = probe(i);
            let pos = geom.rate(x) > 0.0;
            if pos != prev_pos {
                let root = quadrature::bisect(|t| geom.rate(t), prev_x, x, opts.root_tol);
                if pos {
                    open = Some(root);
                } else if let Some(start) = open.take() {
                    intervals.push((start, root));
                }
            }
            prev_x = x;
            prev_pos = pos;
        }
        // Carry an open interval across the knot; it closes on the next
        // segment's first probe if the rate turns negative there.
    }
    if let Some(start) = open.take() {
        intervals.push((start, t_end));
    }
    intervals.retain(|(a, b)| b > a);

    let mut total = 0.0;
    for &(a, b) in &intervals {
        // Split at interior knots so every panel is smooth.
        let mut edges: Vec<f64> = knots.iter().copied().filter(|k| *k > a && *k < b).collect();
        edges.insert(0, a);
        edges.push(b);
        for w in edges.windows(2) {
            let est = quadrature::integrate(
                |t| geom.rate(t).max(0.0),
                w[0],
                w[1],
                opts.abs_tol,
                opts.max_subdivisions,
            )?;
            total += est.value;
        }
    }
    Ok((total, intervals))
}

/// Backflow of the θ pair over `[0, cfg.t_max]`.
pub fn backflow_integral(theta: f64, cfg: &DimensionlessConfig, mode: FormulaSource) -> Result<BackflowResult, BlpError> {
    backflow_integral_with(theta, cfg, mode, &BackflowOptions::default())
}

pub fn backflow_integral_with(
    theta: f64,
    cfg: &DimensionlessConfig,
    mode: FormulaSource,
    opts: &BackflowOptions,
) -> Result<BackflowResult, BlpError> {
    check_config(cfg)?;
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(BlpError::InvalidInput(format!("theta = {theta} outside [0, pi/2]")));
    }
    let geom = PairGeometry::dimensionless(theta, cfg, mode);
    let (n_value, intervals) = positive_backflow(&geom, cfg.t_max, opts)?;
    Ok(BackflowResult {
        n_value,
        winning_branch: BranchKind::nearest(theta),
        theta_star: theta,
        intervals,
    })
}

pub fn backflow_branch(branch: BranchKind, cfg: &DimensionlessConfig, mode: FormulaSource) -> Result<BackflowResult, BlpError> {
    backflow_integral(branch.theta(), cfg, mode)
}

/// Backflow computed directly in dimensionful time over `[0, t_max]`.
#[allow(clippy::too_many_arguments)]
pub fn backflow_integral_dimensional(
    theta: f64,
    gamma: f64,
    lambda_sq: f64,
    skew: f64,
    omega: f64,
    t_max: f64,
    mode: FormulaSource,
) -> Result<f64, BlpError> {
    let geom = PairGeometry::new(theta, gamma, Oscillation::from_lambda_sq(lambda_sq), skew, omega, mode);
    let opts = BackflowOptions {
        root_tol: 1e-12 / gamma.max(1.0),
        ..BackflowOptions::default()
    };
    Ok(positive_backflow(&geom, t_max, &opts)?.0)
}

/// Closed form of the coherence-pair backflow:
/// ⌊Ω̂T/π⌋ + ½(|cos Ω̂T| − |sin Ω̂T| cot Ω̂T), with the bracket's limit 0 at
/// multiples of π.
pub fn analytic_n_omega(omega_hat: f64, t: f64) -> f64 {
    let x = omega_hat * t;
    let mut k = (x / PI).floor();
    let mut r = x - k * PI;
    if r < 0.0 {
        k -= 1.0;
        r += PI;
    } else if r >= PI {
        k += 1.0;
        r -= PI;
    }
    let s = r.sin();
    let bracket = if r == 0.0 || s == 0.0 {
        0.0
    } else {
        0.5 * (r.cos().abs() - s.abs() * r.cos() / s)
    };
    k + bracket
}

/// Outcome of the maximisation over the θ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMarkovianity {
    pub config: DimensionlessConfig,
    pub mode: FormulaSource,
    /// Winner over the θ grid.
    pub best: BackflowResult,
    pub n_omega_branch: f64,
    pub n_lambda_branch: f64,
    /// Grid of (θ, backflow).
    pub theta_scan: Vec<(f64, f64)>,
    /// Largest interior value minus the larger endpoint value.
    pub interior_excess: f64,
    /// ∫ max(g_Ω, g_λ) dτ, when requested.
    pub n_literal: Option<f64>,
}

impl NonMarkovianity {
    /// Larger endpoint branch, ties going to the Ω branch.
    pub fn endpoint_winner(&self) -> BranchKind {
        if self.n_lambda_branch > self.n_omega_branch + TIE_TOLERANCE {
            BranchKind::LambdaBranch
        } else {
            BranchKind::OmegaBranch
        }
    }
}

pub fn theta_grid(size: usize) -> Vec<f64> {
    (0..size)
        .map(|i| if i + 1 == size { FRAC_PI_2 } else { FRAC_PI_2 * i as f64 / (size - 1) as f64 })
        .collect()
}

/// Maximises the backflow over a uniform θ grid on [0, π/2] (both
/// endpoints included).
pub fn n_measure(cfg: &DimensionlessConfig, mode: FormulaSource, theta_grid_size: usize) -> Result<NonMarkovianity, BlpError> {
    n_measure_with(cfg, mode, theta_grid_size, false, &BackflowOptions::default())
}

pub fn n_measure_with(
    cfg: &DimensionlessConfig,
    mode: FormulaSource,
    theta_grid_size: usize,
    literal: bool,
    opts: &BackflowOptions,
) -> Result<NonMarkovianity, BlpError> {
    if theta_grid_size < 2 {
        return Err(BlpError::InvalidInput(format!(
            "theta grid needs at least 2 points (got {theta_grid_size})"
        )));
    }
    check_config(cfg)?;
    let grid = theta_grid(theta_grid_size);
    let mut results = Vec::with_capacity(grid.len());
    for &theta in &grid {
        results.push(backflow_integral_with(theta, cfg, mode, opts)?);
    }
    let last = results.len() - 1;
    let n_lambda_branch = results[0].n_value;
    let n_omega_branch = results[last].n_value;
    let endpoint_max = n_lambda_branch.max(n_omega_branch);
    let interior_max = results[1..last].iter().map(|r| r.n_value).fold(f64::NEG_INFINITY, f64::max);

    // Endpoints first so ties resolve to them; Ω before λ on exact ties.
    let mut order = vec![last, 0];
    order.extend(1..last);
    let mut best_idx = order[0];
    for &i in &order[1..] {
        if results[i].n_value > results[best_idx].n_value + TIE_TOLERANCE {
            best_idx = i;
        }
    }
    let theta_scan = grid.iter().zip(&results).map(|(t, r)| (*t, r.n_value)).collect();
    let mut best = results.swap_remove(best_idx);
    best.winning_branch = if best_idx == 0 || best_idx == last {
        if n_lambda_branch > n_omega_branch + TIE_TOLERANCE {
            BranchKind::LambdaBranch
        } else {
            BranchKind::OmegaBranch
        }
    } else {
        BranchKind::nearest(best.theta_star)
    };
    let n_literal = if literal {
        Some(literal_pointwise_max(cfg, mode, opts)?)
    } else {
        None
    };
    Ok(NonMarkovianity {
        config: *cfg,
        mode,
        best,
        n_omega_branch,
        n_lambda_branch,
        theta_scan,
        interior_excess: if last > 1 { interior_max - endpoint_max } else { f64::NEG_INFINITY },
        n_literal,
    })
}

/// ∫₀^T max(g_Ω(τ), g_λ(τ)) dτ, the pointwise maximum of the two endpoint
/// integrands. Always ≥ the larger of the two branch integrals.
pub fn literal_pointwise_max(cfg: &DimensionlessConfig, mode: FormulaSource, opts: &BackflowOptions) -> Result<f64, BlpError> {
    check_config(cfg)?;
    let omega = PairGeometry::dimensionless(FRAC_PI_2, cfg, mode);
    let lambda = PairGeometry::dimensionless(0.0, cfg, mode);
    let mut knots = omega.knots(cfg.t_max);
    knots.extend(lambda.knots(cfg.t_max));
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * cfg.t_max.max(1.0));
    let f = |t: f64| omega.rate(t).max(lambda.rate(t)).max(0.0);
    let mut total = 0.0;
    for w in knots.windows(2) {
        if w[1] > w[0] {
            total += quadrature::integrate(f, w[0], w[1], opts.abs_tol, opts.max_subdivisions.max(500))?.value;
        }
    }
    Ok(total)
}

/// Which endpoint branch carries more backflow over `[0, t]`; ties within
/// [`TIE_TOLERANCE`] go to the Ω branch.
pub fn dominant_regime(lambda_hat: f64, omega_hat: f64, t: f64, mode: FormulaSource) -> Result<BranchKind, BlpError> {
    let cfg = DimensionlessConfig::reduced(lambda_hat, omega_hat, t);
    let n_l = backflow_integral(0.0, &cfg, mode)?.n_value;
    let n_o = backflow_integral(FRAC_PI_2, &cfg, mode)?.n_value;
    Ok(if n_l > n_o + TIE_TOLERANCE {
        BranchKind::LambdaBranch
    } else {
        BranchKind::OmegaBranch
    })
}
