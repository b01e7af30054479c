//! Variance lower bounds for the ATE estimators: exact Cramér–Rao for the
//! linear model, asymptotic (delta method through the Fisher information)
//! for the binary likelihoods, and closed-form sampling variances for the
//! two difference-in-means estimators.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ClassSizes, DesignMatrix};
use crate::linalg::invert_spd;
use crate::models::{ModelKind, ModelParams};
use crate::stats::{logistic_weight, norm_cdf, norm_pdf, probit_weight};

/// Fisher information of a binary-response fit, evaluated at fixed
/// parameters over a fixed design.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherInfo {
    pub matrix: Matrix3<f64>,
    pub model: ModelKind,
    pub evaluated_at: ModelParams,
}

/// A variance lower bound together with the functional gradient that
/// produced it. `asymptotic` is false only for the exact finite-sample
/// linear bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub crlb: f64,
    pub gradient: [f64; 3],
    pub asymptotic: bool,
}

fn quadratic_form(grad: &[f64; 3], cov: &Matrix3<f64>) -> f64 {
    let g = Vector3::new(grad[0], grad[1], grad[2]);
    (g.transpose() * cov * g)[(0, 0)]
}

/// gᵀ Σ g for a symmetric covariance Σ. Rejects asymmetric input rather
/// than silently averaging it: every Σ here comes from [`invert_spd`],
/// which symmetrizes, so asymmetry indicates a caller bug.
pub fn delta_method(gradient: &[f64; 3], covariance: &Matrix3<f64>) -> Result<f64> {
    for i in 0..3 {
        for j in (i + 1)..3 {
            let a = covariance[(i, j)];
            let b = covariance[(j, i)];
            if a != b && (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                return Err(Error::AsymmetricCovariance);
            }
        }
    }
    Ok(quadratic_form(gradient, covariance))
}

/// Exact variance bound for unbiased estimation of b1 + b2 in the linear
/// model: sigma^2 c' (X'X)^-1 c with c = (0, 1, 1).
pub fn crlb_linear(x: &DesignMatrix, sigma: f64) -> Result<BoundResult> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be a positive finite number, got {sigma}"),
        });
    }
    let inv = invert_spd(&x.xtx()).map_err(|column| Error::SingularDesign { column })?;
    let gradient = [0.0, 1.0, 1.0];
    Ok(BoundResult {
        crlb: sigma * sigma * quadratic_form(&gradient, &inv),
        gradient,
        asymptotic: false,
    })
}

fn fim(x: &DesignMatrix, beta: &[f64; 3], weight: impl Fn(f64) -> f64) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for r in x.rows() {
        let s = r[0] * beta[0] + r[1] * beta[1] + r[2] * beta[2];
        let w = weight(s);
        for i in 0..3 {
            for j in i..3 {
                m[(i, j)] += w * r[i] * r[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// Expected information of the probit model at `beta` over design `x`.
/// `beta` is on the unit latent scale: callers with sigma != 1 divide the
/// coefficients by sigma first.
pub fn fim_probit(x: &DesignMatrix, beta: &[f64; 3], params: ModelParams) -> FisherInfo {
    FisherInfo {
        matrix: fim(x, beta, probit_weight),
        model: ModelKind::Probit,
        evaluated_at: params,
    }
}

/// Expected information of the logistic model at `beta` over design `x`.
pub fn fim_logit(x: &DesignMatrix, beta: &[f64; 3], params: ModelParams) -> FisherInfo {
    FisherInfo {
        matrix: fim(x, beta, logistic_weight),
        model: ModelKind::Logistic,
        evaluated_at: params,
    }
}

fn invert_information(info: &FisherInfo) -> Result<Matrix3<f64>> {
    invert_spd(&info.matrix).map_err(|column| Error::SingularInformation { column })
}

/// Asymptotic bound for the probit ATE Phi(b0+b1+b2) - Phi(b0), by the
/// delta method through the inverse information.
pub fn crlb_probit(info: &FisherInfo, beta: &[f64; 3]) -> Result<BoundResult> {
    let inv = invert_information(info)?;
    let u = beta[0] + beta[1] + beta[2];
    let gradient = [
        norm_pdf(u) - norm_pdf(beta[0]),
        norm_pdf(u),
        norm_pdf(u),
    ];
    Ok(BoundResult {
        crlb: delta_method(&gradient, &inv)?,
        gradient,
        asymptotic: true,
    })
}

/// Asymptotic bound for the logistic ATE sigmoid(b0+b1+b2) - sigmoid(b0).
/// The sigmoid's derivative is the logistic variance weight, so the same
/// function supplies both the information and the gradient here.
pub fn crlb_logit(info: &FisherInfo, beta: &[f64; 3]) -> Result<BoundResult> {
    let inv = invert_information(info)?;
    let u = beta[0] + beta[1] + beta[2];
    let gradient = [
        logistic_weight(u) - logistic_weight(beta[0]),
        logistic_weight(u),
        logistic_weight(u),
    ];
    Ok(BoundResult {
        crlb: delta_method(&gradient, &inv)?,
        gradient,
        asymptotic: true,
    })
}

/// Variance bounds on the saturation design for its two natural contrasts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauBounds {
    /// c = (0, 1, 1): treatment plus spillover slope.
    pub full_effect: BoundResult,
    /// c = (0, 1, 0): the saturated contrast, which is this model's ATE.
    pub treatment_only: BoundResult,
}

/// Exact bounds for OLS on the saturation design.
pub fn crlb_tau(x_tau: &DesignMatrix, sigma: f64) -> Result<TauBounds> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be a positive finite number, got {sigma}"),
        });
    }
    let inv = invert_spd(&x_tau.xtx()).map_err(|column| Error::SingularDesign { column })?;
    let s2 = sigma * sigma;
    let make = |gradient: [f64; 3]| BoundResult {
        crlb: s2 * quadratic_form(&gradient, &inv),
        gradient,
        asymptotic: false,
    };
    Ok(TauBounds {
        full_effect: make([0.0, 1.0, 1.0]),
        treatment_only: make([0.0, 1.0, 0.0]),
    })
}

fn positive_class_sizes(sizes: &ClassSizes) -> Result<(f64, f64)> {
    if sizes.treated_saturated == 0 || sizes.control_saturated == 0 {
        return Err(Error::EmptyExposureClass {
            treated_saturated: sizes.treated_saturated,
            control_saturated: sizes.control_saturated,
        });
    }
    Ok((sizes.treated_saturated as f64, sizes.control_saturated as f64))
}

/// Exact MSE of the saturated difference-in-means on real-valued responses:
/// the estimator is unbiased there, so its MSE is its sampling variance
/// sigma^2 (1/n1 + 1/n0).
pub fn mse_tau_closed(sizes: &ClassSizes, sigma: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be a positive finite number, got {sigma}"),
        });
    }
    let (n1, n0) = positive_class_sizes(sizes)?;
    Ok(sigma * sigma * (1.0 / n1 + 1.0 / n0))
}

/// Exact MSE of the saturated difference-in-means on thresholded responses:
/// Bernoulli variance in each saturated class, scaled by its size.
pub fn mse_taubin_closed(sizes: &ClassSizes, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let (n1, n0) = positive_class_sizes(sizes)?;
    let p1 = norm_cdf((params.beta[0] + params.beta[1]) / params.sigma);
    let p0 = norm_cdf(params.beta[0] / params.sigma);
    Ok(p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0)
}
