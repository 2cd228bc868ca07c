use std::f64::consts::{PI, TAU};

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DVector, Dyn, OMatrix, Vector3, U3};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{FieldRealization, StochasticError};

/// Fitted h·g² / (g² + (ω − ω₀)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub peak_omega: f64,
    pub peak_height: f64,
    pub hwhm: f64,
    /// Points inside the fitting window.
    pub points: usize,
    pub evaluations: usize,
}

impl LorentzianFit {
    pub fn eval(&self, omega: f64) -> f64 {
        let g2 = self.hwhm * self.hwhm;
        self.peak_height * g2 / (g2 + (omega - self.peak_omega).powi(2))
    }
}

/// Averaged periodogram on the non-negative frequency grid, scaled by 1/π
/// so that a field with on-resonance spectrum height I₀ peaks at I₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub realizations: usize,
    /// Absent when the spectrum is identically zero.
    pub fit: Option<LorentzianFit>,
}

pub fn estimate_spectrum(realizations: &[FieldRealization]) -> Result<SpectrumEstimate, StochasticError> {
    if realizations.len() < 2 {
        return Err(StochasticError::NotEnoughRealizations);
    }
    let (n, dt) = (realizations[0].len(), realizations[0].dt);
    if n < 2 {
        return Err(StochasticError::NotEnoughRealizations);
    }
    if realizations.iter().any(|r| r.len() != n || r.dt != dt) {
        return Err(StochasticError::GridMismatch);
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut buffer = vec![Complex::new(0.0, 0.0); n];
    for r in realizations {
        for (b, v) in buffer.iter_mut().zip(&r.values) {
            *b = Complex::new(*v, 0.0);
        }
        fft.process(&mut buffer);
        for (p, x) in power.iter_mut().zip(&buffer) {
            *p += x.norm_sqr();
        }
    }
    let scale = dt / (n as f64 * realizations.len() as f64 * PI);
    power.iter_mut().for_each(|p| *p *= scale);
    let omega: Vec<f64> = (0..bins).map(|k| TAU * k as f64 / (n as f64 * dt)).collect();
    let mut estimate = SpectrumEstimate {
        omega,
        power,
        realizations: realizations.len(),
        fit: None,
    };
    if estimate.power.iter().any(|p| *p > 0.0) {
        estimate.fit = Some(fit_lorentzian(&estimate.omega, &estimate.power)?);
    }
    Ok(estimate)
}

struct LorentzianProblem {
    omega: Vec<f64>,
    power: Vec<f64>,
    params: Vector3<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U3> for LorentzianProblem {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, x: &Vector3<f64>) {
        self.params.copy_from(x);
    }

    fn params(&self) -> Vector3<f64> {
        self.params
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (w0, h, g) = (self.params[0], self.params[1], self.params[2]);
        let g2 = g * g;
        Some(DVector::from_iterator(
            self.omega.len(),
            self.omega
                .iter()
                .zip(&self.power)
                .map(|(w, y)| h * g2 / (g2 + (w - w0).powi(2)) - y),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U3>> {
        let (w0, h, g) = (self.params[0], self.params[1], self.params[2]);
        let g2 = g * g;
        let mut jac = OMatrix::<f64, Dyn, U3>::zeros(self.omega.len());
        for (i, w) in self.omega.iter().enumerate() {
            let u = w - w0;
            let d = g2 + u * u;
            jac[(i, 0)] = 2.0 * h * g2 * u / (d * d);
            jac[(i, 1)] = g2 / d;
            jac[(i, 2)] = 2.0 * h * g * u * u / (d * d);
        }
        Some(jac)
    }
}

/// Least-squares Lorentzian fit around the highest bin, within ten
/// half-widths of the initial guess.
pub fn fit_lorentzian(omega: &[f64], power: &[f64]) -> Result<LorentzianFit, StochasticError> {
    let (peak, &height) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(StochasticError::FitDidNotConverge("empty spectrum".into()))?;
    if height.is_nan() || height <= 0.0 {
        return Err(StochasticError::FitDidNotConverge("no positive power".into()));
    }
    let half = 0.5 * height;
    let right = (peak..power.len()).find(|&k| power[k] < half).unwrap_or(power.len() - 1);
    let left = (0..=peak).rev().find(|&k| power[k] < half).unwrap_or(0);
    let spacing = omega.get(1).map_or(1.0, |w| w - omega[0]);
    let width = (0.5 * (omega[right] - omega[left])).max(spacing);
    let (lo, hi) = (omega[peak] - 10.0 * width, omega[peak] + 10.0 * width);
    let (xs, ys): (Vec<f64>, Vec<f64>) = omega
        .iter()
        .zip(power)
        .filter(|(w, _)| (lo..=hi).contains(*w))
        .map(|(w, p)| (*w, *p))
        .unzip();
    if xs.len() < 4 {
        return Err(StochasticError::FitDidNotConverge(format!(
            "only {} points inside the fitting window",
            xs.len()
        )));
    }
    let points = xs.len();
    let problem = LorentzianProblem {
        omega: xs,
        power: ys,
        params: Vector3::new(omega[peak], height, width),
    };
    let (solved, report) = LevenbergMarquardt::new().minimize(problem);
    let p = solved.params;
    let fit = LorentzianFit {
        peak_omega: p[0],
        peak_height: p[1],
        hwhm: p[2].abs(),
        points,
        evaluations: report.number_of_evaluations,
    };
    if !report.termination.was_successful() || !(p.iter().all(|v| v.is_finite()) && fit.hwhm > 0.0 && fit.peak_height > 0.0) {
        return Err(StochasticError::FitDidNotConverge(format!("{:?}", report.termination)));
    }
    Ok(fit)
}
