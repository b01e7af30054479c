//! ATE estimators over a realized assignment: difference-in-means under a
//! no-interference assumption, least squares on the linear and saturation
//! designs, and maximum likelihood for the binary-response models.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ExposureVector, NodeId, TreatmentVector};
use crate::linalg::invert_spd;
use crate::models::{exposure_case, ExposureCase, ModelKind};
use crate::stats::{
    ln_norm_cdf, logistic, logistic_weight, mills_ratio, norm_cdf, softplus,
};

/// Score sup-norm below which a likelihood fit counts as converged.
pub const MLE_SCORE_TOL: f64 = 1e-8;
pub const MLE_MAX_ITERATIONS: usize = 100;
/// Coefficient norm past which a binary fit is treated as separated.
pub const SEPARATION_NORM: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Difference in arm means, valid only without interference.
    Sutva,
    /// Difference in means between saturated-treated and saturated-control nodes.
    TauDim,
    /// Least squares on the (1, z, g) design, ATE = b1 + b2.
    LinearOls,
    /// Least squares on the saturation design, ATE = b1.
    TauOls,
    ProbitMle,
    LogitMle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Sutva,
        EstimatorKind::TauDim,
        EstimatorKind::LinearOls,
        EstimatorKind::TauOls,
        EstimatorKind::ProbitMle,
        EstimatorKind::LogitMle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Sutva => "sutva",
            EstimatorKind::TauDim => "tau-dim",
            EstimatorKind::LinearOls => "linear-ols",
            EstimatorKind::TauOls => "tau-ols",
            EstimatorKind::ProbitMle => "probit-mle",
            EstimatorKind::LogitMle => "logit-mle",
        }
    }

    /// Whether the estimator is defined for responses of this model's type:
    /// likelihood fits need 0/1 outcomes, the least-squares estimators are
    /// reserved for real-valued responses, difference-in-means works on both.
    pub fn applicable_to(self, model: ModelKind) -> bool {
        match self {
            EstimatorKind::Sutva | EstimatorKind::TauDim => true,
            EstimatorKind::LinearOls | EstimatorKind::TauOls => !model.is_binary(),
            EstimatorKind::ProbitMle | EstimatorKind::LogitMle => model.is_binary(),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<EstimatorKind> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "estimator",
                reason: format!(
                    "unknown estimator {s:?}; expected one of sutva, tau-dim, linear-ols, \
                     tau-ols, probit-mle, logit-mle"
                ),
            })
    }
}

/// N x 3 design matrix stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<[f64; 3]>,
}

impl DesignMatrix {
    pub fn from_rows(rows: Vec<[f64; 3]>) -> DesignMatrix {
        DesignMatrix { rows }
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn xtx(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for r in &self.rows {
            for i in 0..3 {
                for j in i..3 {
                    m[(i, j)] += r[i] * r[j];
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

    pub fn xty(&self, y: &[f64]) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for (r, &yi) in self.rows.iter().zip(y) {
            v[0] += r[0] * yi;
            v[1] += r[1] * yi;
            v[2] += r[2] * yi;
        }
        v
    }
}

/// Rows (1, z_i, g_i).
pub fn build_design_linear(z: &TreatmentVector, g: &ExposureVector) -> Result<DesignMatrix> {
    check_same_len(z.len(), g.len())?;
    let rows = (0..z.len())
        .map(|i| [1.0, f64::from(z.get(i)), g.get(i)])
        .collect();
    Ok(DesignMatrix { rows })
}

/// Saturation design: the exposure column is zero for saturated nodes and
/// the signed distance from the arm's saturation boundary otherwise, so the
/// treatment coefficient alone carries the fully-saturated contrast.
pub fn build_design_tau(z: &TreatmentVector, g: &ExposureVector, tau: f64) -> Result<DesignMatrix> {
    check_same_len(z.len(), g.len())?;
    let rows = (0..z.len())
        .map(|i| {
            let gi = g.get(i);
            match exposure_case(z.get(i), gi, tau) {
                ExposureCase::ControlSaturated => [1.0, 0.0, 0.0],
                ExposureCase::ControlPartial => [1.0, 0.0, gi - (1.0 - tau)],
                ExposureCase::TreatedSaturated => [1.0, 1.0, 0.0],
                ExposureCase::TreatedPartial => [1.0, 1.0, gi - tau],
            }
        })
        .collect();
    Ok(DesignMatrix { rows })
}

fn check_same_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// Node index sets for the four exposure regimes; ascending within each set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExposureClasses {
    n_nodes: usize,
    pub control_saturated: Vec<NodeId>,
    pub control_partial: Vec<NodeId>,
    pub treated_saturated: Vec<NodeId>,
    pub treated_partial: Vec<NodeId>,
}

/// Class cardinalities in a report-friendly form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSizes {
    pub control_saturated: usize,
    pub control_partial: usize,
    pub treated_saturated: usize,
    pub treated_partial: usize,
}

impl ExposureClasses {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn sizes(&self) -> ClassSizes {
        ClassSizes {
            control_saturated: self.control_saturated.len(),
            control_partial: self.control_partial.len(),
            treated_saturated: self.treated_saturated.len(),
            treated_partial: self.treated_partial.len(),
        }
    }
}

/// Partitions nodes into the four exposure regimes under threshold `tau`.
pub fn classify_exposure(
    z: &TreatmentVector,
    g: &ExposureVector,
    tau: f64,
) -> Result<ExposureClasses> {
    check_same_len(z.len(), g.len())?;
    let mut classes = ExposureClasses {
        n_nodes: z.len(),
        control_saturated: Vec::new(),
        control_partial: Vec::new(),
        treated_saturated: Vec::new(),
        treated_partial: Vec::new(),
    };
    for i in 0..z.len() {
        let id = i as NodeId;
        match exposure_case(z.get(i), g.get(i), tau) {
            ExposureCase::ControlSaturated => classes.control_saturated.push(id),
            ExposureCase::ControlPartial => classes.control_partial.push(id),
            ExposureCase::TreatedSaturated => classes.treated_saturated.push(id),
            ExposureCase::TreatedPartial => classes.treated_partial.push(id),
        }
    }
    Ok(classes)
}

/// Outcome of a single estimator run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimator: EstimatorKind,
    pub ate_hat: f64,
    pub beta_hat: Option<[f64; 3]>,
    pub sigma2_hat: Option<f64>,
    /// False when a likelihood fit hit the iteration cap or separated; the
    /// point estimate is still reported.
    pub converged: bool,
    pub iterations: usize,
}

/// Least squares via the normal equations: returns coefficients and the
/// residual variance estimate (undefined when there are no residual
/// degrees of freedom).
pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<([f64; 3], Option<f64>)> {
    check_same_len(x.len(), y.len())?;
    if x.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: x.len() });
    }
    let inv = invert_spd(&x.xtx()).map_err(|column| Error::SingularDesign { column })?;
    let beta = inv * x.xty(y);
    let rss: f64 = x
        .rows()
        .iter()
        .zip(y)
        .map(|(r, &yi)| {
            let fit = r[0] * beta[0] + r[1] * beta[1] + r[2] * beta[2];
            (yi - fit) * (yi - fit)
        })
        .sum();
    let sigma2 = (x.len() > 3).then(|| rss / (x.len() - 3) as f64);
    Ok(([beta[0], beta[1], beta[2]], sigma2))
}

/// OLS on the linear design; the ATE is the sum of the treatment and
/// exposure coefficients (full switch moves both z and g from 0 to 1).
pub fn estimate_ate_linear(x: &DesignMatrix, y: &[f64]) -> Result<EstimationResult> {
    let (beta, sigma2) = ols_fit(x, y)?;
    Ok(EstimationResult {
        estimator: EstimatorKind::LinearOls,
        ate_hat: beta[1] + beta[2],
        beta_hat: Some(beta),
        sigma2_hat: sigma2,
        converged: true,
        iterations: 0,
    })
}

/// OLS on the saturation design; under that model the treatment coefficient
/// is the ATE.
pub fn tau_ols(x_tau: &DesignMatrix, y: &[f64]) -> Result<EstimationResult> {
    let (beta, sigma2) = ols_fit(x_tau, y)?;
    Ok(EstimationResult {
        estimator: EstimatorKind::TauOls,
        ate_hat: beta[1],
        beta_hat: Some(beta),
        sigma2_hat: sigma2,
        converged: true,
        iterations: 0,
    })
}

fn mean_over(y: &[f64], idx: &[NodeId]) -> f64 {
    let mut sum = 0.0;
    for &i in idx {
        sum += y[i as usize];
    }
    sum / idx.len() as f64
}

fn diff_in_means(
    estimator: EstimatorKind,
    y: &[f64],
    plus: &[NodeId],
    minus: &[NodeId],
) -> EstimationResult {
    EstimationResult {
        estimator,
        ate_hat: mean_over(y, plus) - mean_over(y, minus),
        beta_hat: None,
        sigma2_hat: None,
        converged: true,
        iterations: 0,
    }
}

/// Mean response of saturated-treated nodes minus saturated-control nodes.
pub fn tau_diff_in_means(y: &[f64], classes: &ExposureClasses) -> Result<EstimationResult> {
    check_same_len(classes.n_nodes(), y.len())?;
    if classes.treated_saturated.is_empty() || classes.control_saturated.is_empty() {
        return Err(Error::EmptyExposureClass {
            treated_saturated: classes.treated_saturated.len(),
            control_saturated: classes.control_saturated.len(),
        });
    }
    Ok(diff_in_means(
        EstimatorKind::TauDim,
        y,
        &classes.treated_saturated,
        &classes.control_saturated,
    ))
}

/// Classic arm contrast, ignoring interference: mean over the treated arm
/// minus mean over the control arm. Shares the arithmetic path of
/// [`tau_diff_in_means`], so when the saturated classes coincide with the
/// arms the two agree bit for bit.
pub fn sutva_diff_in_means(y: &[f64], z: &TreatmentVector) -> Result<EstimationResult> {
    check_same_len(z.len(), y.len())?;
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for i in 0..z.len() {
        if z.get(i) {
            treated.push(i as NodeId);
        } else {
            control.push(i as NodeId);
        }
    }
    if treated.is_empty() || control.is_empty() {
        return Err(Error::EmptyArm {
            treated: treated.len(),
            control: control.len(),
        });
    }
    Ok(diff_in_means(EstimatorKind::Sutva, y, &treated, &control))
}

#[derive(Clone, Copy)]
enum Link {
    Probit,
    Logit,
}

fn log_likelihood(x: &DesignMatrix, y: &[f64], beta: &Vector3<f64>, link: Link) -> f64 {
    let mut ll = 0.0;
    for (r, &yi) in x.rows().iter().zip(y) {
        let s = r[0] * beta[0] + r[1] * beta[1] + r[2] * beta[2];
        ll += match link {
            Link::Probit => {
                if yi == 1.0 {
                    ln_norm_cdf(s)
                } else {
                    ln_norm_cdf(-s)
                }
            }
            Link::Logit => {
                if yi == 1.0 {
                    -softplus(-s)
                } else {
                    -softplus(s)
                }
            }
        };
    }
    ll
}

fn score_and_curvature(
    x: &DesignMatrix,
    y: &[f64],
    beta: &Vector3<f64>,
    link: Link,
) -> (Vector3<f64>, Matrix3<f64>) {
    let mut score = Vector3::zeros();
    let mut curvature = Matrix3::zeros();
    for (r, &yi) in x.rows().iter().zip(y) {
        let s = r[0] * beta[0] + r[1] * beta[1] + r[2] * beta[2];
        // coef is the per-row score factor, w the negative second derivative
        let (coef, w) = match link {
            Link::Probit => {
                if yi == 1.0 {
                    let lambda = mills_ratio(s);
                    (lambda, lambda * (lambda + s))
                } else {
                    let mu = mills_ratio(-s);
                    (-mu, mu * (mu - s))
                }
            }
            Link::Logit => {
                let p = logistic(s);
                (yi - p, logistic_weight(s))
            }
        };
        for i in 0..3 {
            score[i] += coef * r[i];
            for j in i..3 {
                curvature[(i, j)] += w * r[i] * r[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            curvature[(i, j)] = curvature[(j, i)];
        }
    }
    (score, curvature)
}

/// Newton fit of a binary-response model with step halving. Both links have
/// globally concave log-likelihoods, so the damped Newton iteration is
/// globally convergent whenever a maximizer exists; separated data instead
/// drives the coefficients off to infinity, which the norm guard catches.
fn binary_mle(x: &DesignMatrix, y: &[f64], link: Link) -> Result<EstimationResult> {
    check_same_len(x.len(), y.len())?;
    if x.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: x.len() });
    }
    let mut ones = 0usize;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return Err(Error::NonBinaryResponse { index: i, value: v });
        }
    }
    if ones == 0 || ones == y.len() {
        return Err(Error::DegenerateResponse);
    }

    let mut beta = Vector3::zeros();
    let mut ll = log_likelihood(x, y, &beta, link);
    let mut iterations = 0;
    let converged = loop {
        let (score, curvature) = score_and_curvature(x, y, &beta, link);
        if score.amax() < MLE_SCORE_TOL {
            break true;
        }
        if iterations == MLE_MAX_ITERATIONS {
            break false;
        }
        iterations += 1;
        let inv = invert_spd(&curvature).map_err(|column| Error::SingularDesign { column })?;
        let direction = inv * score;
        // Near the optimum a Newton step improves the likelihood by less
        // than the sum's own rounding resolution, so the comparison must
        // tolerate a few ulps or the line search rejects progress forever
        // while the score is still above its tolerance.
        let slack = 8.0 * f64::EPSILON * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut halvings = 0;
        let (next_beta, next_ll) = loop {
            let candidate = beta + step * direction;
            let cand_ll = log_likelihood(x, y, &candidate, link);
            // NaN compares false, so it also lands in the halving branch
            if cand_ll >= ll - slack || halvings >= 40 {
                break (candidate, cand_ll);
            }
            step *= 0.5;
            halvings += 1;
        };
        beta = next_beta;
        ll = next_ll;
        if beta.norm() > SEPARATION_NORM {
            break false; // separation: estimates diverge, report as non-converged
        }
    };

    let b = [beta[0], beta[1], beta[2]];
    let ate_hat = match link {
        Link::Probit => norm_cdf(b[0] + b[1] + b[2]) - norm_cdf(b[0]),
        Link::Logit => logistic(b[0] + b[1] + b[2]) - logistic(b[0]),
    };
    Ok(EstimationResult {
        estimator: match link {
            Link::Probit => EstimatorKind::ProbitMle,
            Link::Logit => EstimatorKind::LogitMle,
        },
        ate_hat,
        beta_hat: Some(b),
        sigma2_hat: None,
        converged,
        iterations,
    })
}

/// Probit maximum likelihood on the linear design, latent scale normalized
/// to one; the ATE maps the fitted index through the normal CDF.
pub fn probit_mle(x: &DesignMatrix, y: &[f64]) -> Result<EstimationResult> {
    binary_mle(x, y, Link::Probit)
}

/// Logistic maximum likelihood on the linear design; the ATE maps the
/// fitted index through the sigmoid.
pub fn logit_mle(x: &DesignMatrix, y: &[f64]) -> Result<EstimationResult> {
    binary_mle(x, y, Link::Logit)
}

/// Convenience dispatch for running any estimator straight from
/// `(z, g, y)` data, building whatever design it needs.
pub fn apply_estimator(
    kind: EstimatorKind,
    z: &TreatmentVector,
    g: &ExposureVector,
    y: &[f64],
    tau: f64,
) -> Result<EstimationResult> {
    match kind {
        EstimatorKind::Sutva => sutva_diff_in_means(y, z),
        EstimatorKind::TauDim => {
            let classes = classify_exposure(z, g, tau)?;
            tau_diff_in_means(y, &classes)
        }
        EstimatorKind::LinearOls => {
            let x = build_design_linear(z, g)?;
            estimate_ate_linear(&x, y)
        }
        EstimatorKind::TauOls => {
            let x = build_design_tau(z, g, tau)?;
            tau_ols(&x, y)
        }
        EstimatorKind::ProbitMle => {
            let x = build_design_linear(z, g)?;
            probit_mle(&x, y)
        }
        EstimatorKind::LogitMle => {
            let x = build_design_linear(z, g)?;
            logit_mle(&x, y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zg(z: &[u8], g: &[f64]) -> (TreatmentVector, ExposureVector) {
        (
            TreatmentVector::from_indicators(z).unwrap(),
            ExposureVector::new(g.to_vec()).unwrap(),
        )
    }

    #[test]
    fn linear_design_rows() {
        let (z, g) = zg(&[1, 0], &[0.5, 0.25]);
        let x = build_design_linear(&z, &g).unwrap();
        assert_eq!(x.rows(), &[[1.0, 1.0, 0.5], [1.0, 0.0, 0.25]]);
    }

    #[test]
    fn tau_design_rows_by_case() {
        let (z, g) = zg(&[1, 1, 0, 0], &[0.9, 0.5, 0.1, 0.2]);
        let x = build_design_tau(&z, &g, 0.85).unwrap();
        assert_eq!(x.rows()[0], [1.0, 1.0, 0.0]); // saturated treated
        assert_relative_eq!(x.rows()[1][2], 0.5 - 0.85); // partial treated offset
        assert_eq!(x.rows()[2], [1.0, 0.0, 0.0]); // saturated control
        assert_relative_eq!(x.rows()[3][2], 0.2 - 0.15, epsilon = 1e-12); // partial control offset
    }

    #[test]
    fn classify_matches_the_case_predicate() {
        let (z, g) = zg(&[1, 1, 0, 0, 1], &[0.85, 0.3, 0.15, 0.5, 0.2]);
        let c = classify_exposure(&z, &g, 0.85).unwrap();
        assert_eq!(c.treated_saturated, vec![0]);
        assert_eq!(c.treated_partial, vec![1, 4]);
        assert_eq!(c.control_saturated, vec![2]);
        assert_eq!(c.control_partial, vec![3]);
        assert_eq!(c.sizes().treated_partial, 2);
    }

    #[test]
    fn ols_recovers_an_exact_linear_response() {
        let (z, g) = zg(&[1, 0, 1, 0, 1], &[0.2, 0.4, 0.8, 0.1, 0.5]);
        let x = build_design_linear(&z, &g).unwrap();
        let truth = [0.5, 1.0, -0.4];
        let y: Vec<f64> = x
            .rows()
            .iter()
            .map(|r| r[0] * truth[0] + r[1] * truth[1] + r[2] * truth[2])
            .collect();
        let (beta, sigma2) = ols_fit(&x, &y).unwrap();
        for i in 0..3 {
            assert_relative_eq!(beta[i], truth[i], epsilon = 1e-10);
        }
        assert!(sigma2.unwrap() < 1e-18);
        let r = estimate_ate_linear(&x, &y).unwrap();
        assert_relative_eq!(r.ate_hat, 0.6, epsilon = 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn ols_names_the_degenerate_column() {
        // all z equal: treatment column collinear with the intercept
        let (z, g) = zg(&[1, 1, 1, 1], &[0.1, 0.4, 0.6, 0.9]);
        let x = build_design_linear(&z, &g).unwrap();
        let err = ols_fit(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        match err {
            Error::SingularDesign { column } => assert_eq!(column, "treatment"),
            other => panic!("unexpected error {other:?}"),
        }
        // constant exposure
        let (z, g) = zg(&[1, 0, 1, 0], &[0.5, 0.5, 0.5, 0.5]);
        let x = build_design_linear(&z, &g).unwrap();
        let err = ols_fit(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        match err {
            Error::SingularDesign { column } => assert_eq!(column, "exposure"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tau_ols_recovers_the_saturation_model() {
        use crate::models::{tau_mean, ModelParams};
        let (z, g) = zg(
            &[1, 1, 0, 0, 1, 0],
            &[0.9, 0.4, 0.1, 0.6, 0.7, 0.3],
        );
        let params = ModelParams::new([0.25, 1.0, 2.0]);
        let y: Vec<f64> = (0..z.len())
            .map(|i| tau_mean(&params, z.get(i), g.get(i)))
            .collect();
        let x = build_design_tau(&z, &g, params.tau).unwrap();
        let r = tau_ols(&x, &y).unwrap();
        assert_relative_eq!(r.ate_hat, 1.0, epsilon = 1e-9);
        let beta = r.beta_hat.unwrap();
        assert_relative_eq!(beta[0], 0.25, epsilon = 1e-9);
        assert_relative_eq!(beta[2], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn tau_ols_on_an_all_saturated_design_is_singular() {
        let (z, g) = zg(&[1, 1, 0, 0], &[1.0, 0.9, 0.0, 0.1]);
        let x = build_design_tau(&z, &g, 0.85).unwrap();
        assert!(matches!(
            tau_ols(&x, &[1.0, 1.0, 0.0, 0.0]),
            Err(Error::SingularDesign { column: "exposure" })
        ));
    }

    #[test]
    fn tau_dim_hand_example() {
        let (z, g) = zg(&[1, 1, 0, 0, 1], &[0.9, 1.0, 0.0, 0.1, 0.5]);
        let c = classify_exposure(&z, &g, 0.85).unwrap();
        let y = [1.0, 3.0, 4.0, 4.0, 100.0]; // partial node must be ignored
        let r = tau_diff_in_means(&y, &c).unwrap();
        assert_relative_eq!(r.ate_hat, 2.0 - 4.0);
    }

    #[test]
    fn tau_dim_reports_both_cardinalities_when_a_class_is_empty() {
        let (z, g) = zg(&[1, 1, 0], &[0.5, 0.4, 0.0]);
        let c = classify_exposure(&z, &g, 0.85).unwrap();
        match tau_diff_in_means(&[1.0, 1.0, 0.0], &c).unwrap_err() {
            Error::EmptyExposureClass {
                treated_saturated,
                control_saturated,
            } => {
                assert_eq!(treated_saturated, 0);
                assert_eq!(control_saturated, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sutva_equals_tau_dim_when_classes_coincide_with_arms() {
        // tau = 0.5 with unanimous neighborhoods: every node is saturated
        let (z, g) = zg(&[1, 1, 0, 0], &[1.0, 1.0, 0.0, 0.0]);
        let y = [2.5, 3.5, 1.0, 2.0];
        let c = classify_exposure(&z, &g, 0.5).unwrap();
        let a = tau_diff_in_means(&y, &c).unwrap();
        let b = sutva_diff_in_means(&y, &z).unwrap();
        assert_eq!(a.ate_hat.to_bits(), b.ate_hat.to_bits());
    }

    #[test]
    fn sutva_rejects_a_single_arm() {
        let (z, _) = zg(&[1, 1, 1], &[0.0, 0.0, 0.0]);
        assert!(matches!(
            sutva_diff_in_means(&[1.0, 1.0, 1.0], &z),
            Err(Error::EmptyArm { treated: 3, control: 0 })
        ));
    }

    #[test]
    fn mle_rejects_degenerate_and_non_binary_responses() {
        let (z, g) = zg(&[1, 0, 1, 0], &[0.2, 0.3, 0.6, 0.8]);
        let x = build_design_linear(&z, &g).unwrap();
        assert!(matches!(
            probit_mle(&x, &[1.0, 1.0, 1.0, 1.0]),
            Err(Error::DegenerateResponse)
        ));
        assert!(matches!(
            logit_mle(&x, &[1.0, 0.0, 0.5, 1.0]),
            Err(Error::NonBinaryResponse { index: 2, .. })
        ));
    }

    #[test]
    fn separated_logit_trips_the_norm_guard() {
        // Response equals treatment exactly. The logit score decays like
        // exp(-margin), so with this many rows it stays above tolerance
        // until the coefficient walk crosses the norm guard.
        let n = 10_000;
        let z: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let g: Vec<f64> = (0..n).map(|i| 0.4 + 0.2 * ((i / 2) % 2) as f64).collect();
        let (z, g) = zg(&z, &g);
        let y: Vec<f64> = z.as_slice().iter().map(|&b| f64::from(b)).collect();
        let x = build_design_linear(&z, &g).unwrap();
        let fit = logit_mle(&x, &y).unwrap();
        assert!(!fit.converged, "separated fit reported converged: {fit:?}");
        assert!(fit.ate_hat.is_finite());
        assert!(fit.ate_hat > 0.99, "{fit:?}");
    }

    #[test]
    fn separated_probit_converges_to_the_boundary() {
        // Probit scores decay like exp(-margin^2/2), so on separated data
        // they vanish numerically at small coefficients: the fit stops as
        // converged with the estimate pinned at the boundary.
        let n = 40;
        let z: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let g: Vec<f64> = (0..n).map(|i| 0.3 + 0.4 * ((i / 2) % 2) as f64).collect();
        let (z, g) = zg(&z, &g);
        let y: Vec<f64> = z.as_slice().iter().map(|&b| f64::from(b)).collect();
        let x = build_design_linear(&z, &g).unwrap();
        let fit = probit_mle(&x, &y).unwrap();
        assert!(fit.ate_hat.is_finite());
        assert!(fit.ate_hat > 0.999, "{fit:?}");
        assert!(fit.iterations < MLE_MAX_ITERATIONS, "{fit:?}");
    }

    #[test]
    fn mle_on_a_null_model_estimates_near_zero_ate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 20_000;
        let z: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen::<bool>())).collect();
        let (z, g) = zg(&z, &g);
        let x = build_design_linear(&z, &g).unwrap();
        for fit in [probit_mle(&x, &y).unwrap(), logit_mle(&x, &y).unwrap()] {
            assert!(fit.converged);
            // ATE of a flat model is 0; allow ~3 binomial standard errors
            assert!(fit.ate_hat.abs() < 3.0 * 0.5 / (n as f64).sqrt() * 2.0, "{fit:?}");
        }
    }

    #[test]
    fn apply_estimator_dispatches_consistently() {
        let (z, g) = zg(&[1, 0, 1, 0, 1, 0], &[0.9, 0.1, 0.4, 0.3, 1.0, 0.0]);
        let y = [2.0, 0.5, 1.5, 0.4, 2.2, 0.1];
        let direct = sutva_diff_in_means(&y, &z).unwrap();
        let via = apply_estimator(EstimatorKind::Sutva, &z, &g, &y, 0.85).unwrap();
        assert_eq!(direct, via);
    }
}
