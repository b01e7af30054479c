//! Response models linking a node's outcome to its own treatment and to the
//! treated fraction of its neighborhood, plus their closed-form ATEs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{treated_fraction, ExposureVector, Graph, TreatmentVector};
use crate::stats::{logistic, norm_cdf};

pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_TAU: f64 = 0.85;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Probit,
    Logistic,
    TauExposure,
    TauExposureBinary,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Linear,
        ModelKind::Probit,
        ModelKind::Logistic,
        ModelKind::TauExposure,
        ModelKind::TauExposureBinary,
    ];

    /// Whether the model emits 0/1 outcomes rather than real values.
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            ModelKind::Probit | ModelKind::Logistic | ModelKind::TauExposureBinary
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Probit => "probit",
            ModelKind::Logistic => "logistic",
            ModelKind::TauExposure => "tau-exposure",
            ModelKind::TauExposureBinary => "tau-exposure-binary",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "model",
                reason: format!(
                    "unknown model {s:?}; expected one of linear, probit, logistic, \
                     tau-exposure, tau-exposure-binary"
                ),
            })
    }
}

/// Coefficients shared by every model: intercept, own-treatment effect and
/// neighborhood-exposure effect, plus the noise scale and the saturation
/// threshold used by the tau-exposure family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: [f64; 3],
    pub sigma: f64,
    pub tau: f64,
}

impl ModelParams {
    pub fn new(beta: [f64; 3]) -> ModelParams {
        ModelParams {
            beta,
            sigma: DEFAULT_SIGMA,
            tau: DEFAULT_TAU,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> ModelParams {
        self.sigma = sigma;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> ModelParams {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("coefficients must be finite, got {:?}", self.beta),
            });
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("noise scale must be positive, got {}", self.sigma),
            });
        }
        if !self.tau.is_finite() || !(0.5..=1.0).contains(&self.tau) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("saturation threshold must lie in [0.5, 1], got {}", self.tau),
            });
        }
        Ok(())
    }

    /// Plausibility notes that do not block a run: the estimand stays well
    /// defined, the setting is just unusual for an adoption experiment.
    pub fn realism_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.beta[1] * self.beta[2] < 0.0 {
            warnings.push(format!(
                "treatment effect ({}) and spillover effect ({}) have opposite signs",
                self.beta[1], self.beta[2]
            ));
        }
        warnings
    }
}

/// Exposure regime of a node under the tau-exposure family: whether its
/// neighborhood is saturated enough for the node's own arm to fully apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExposureCase {
    ControlSaturated,
    ControlPartial,
    TreatedSaturated,
    TreatedPartial,
}

/// Four-way split on `(z, g)`. Boundaries are inclusive on the saturated
/// side: `g == 1 - tau` counts as control-saturated, `g == tau` as
/// treated-saturated.
pub fn exposure_case(z: bool, g: f64, tau: f64) -> ExposureCase {
    if z {
        if g >= tau {
            ExposureCase::TreatedSaturated
        } else {
            ExposureCase::TreatedPartial
        }
    } else if g <= 1.0 - tau {
        ExposureCase::ControlSaturated
    } else {
        ExposureCase::ControlPartial
    }
}

/// Noiseless tau-exposure response. Saturated nodes sit exactly at the arm
/// mean; partially exposed nodes drift away from it proportionally to how
/// far their neighborhood is from saturation.
pub fn tau_mean(params: &ModelParams, z: bool, g: f64) -> f64 {
    let [b0, b1, b2] = params.beta;
    let tau = params.tau;
    match exposure_case(z, g, tau) {
        ExposureCase::ControlSaturated => b0,
        ExposureCase::ControlPartial => b0 + b2 * (g - (1.0 - tau)),
        ExposureCase::TreatedSaturated => b0 + b1,
        ExposureCase::TreatedPartial => b0 + b1 + b2 * (g - tau),
    }
}

/// Noiseless response for one node. For the latent-index models (probit,
/// logistic) this is the linear index, not the success probability; for
/// the binary tau model it is the latent mean whose sign is thresholded.
pub fn mean_response(kind: ModelKind, params: &ModelParams, z: bool, g: f64) -> f64 {
    let [b0, b1, b2] = params.beta;
    match kind {
        ModelKind::Linear | ModelKind::Probit | ModelKind::Logistic => {
            b0 + b1 * (z as u8 as f64) + b2 * g
        }
        ModelKind::TauExposure | ModelKind::TauExposureBinary => tau_mean(params, z, g),
    }
}

/// Outcomes produced by [`generate`]; binary kinds hold exactly 0.0 / 1.0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseVector {
    kind: ModelKind,
    values: Vec<f64>,
}

impl ResponseVector {
    pub fn new(kind: ModelKind, values: Vec<f64>) -> ResponseVector {
        ResponseVector { kind, values }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Draws one response vector for the whole graph; exposure is computed from
/// the assignment. Deterministic given the rng state.
pub fn generate<R: Rng + ?Sized>(
    kind: ModelKind,
    params: &ModelParams,
    graph: &Graph,
    z: &TreatmentVector,
    rng: &mut R,
) -> Result<ResponseVector> {
    let g = treated_fraction(graph, z)?;
    generate_with_exposure(kind, params, z, &g, rng)
}

/// Same as [`generate`] but with the exposure vector precomputed, so a
/// fixed assignment can be replicated without rescanning the graph.
pub fn generate_with_exposure<R: Rng + ?Sized>(
    kind: ModelKind,
    params: &ModelParams,
    z: &TreatmentVector,
    g: &ExposureVector,
    rng: &mut R,
) -> Result<ResponseVector> {
    params.validate()?;
    if z.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            got: g.len(),
        });
    }
    let n = z.len();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let m = mean_response(kind, params, z.get(i), g.get(i));
        let y = match kind {
            ModelKind::Linear | ModelKind::TauExposure => {
                let eps: f64 = rng.sample(StandardNormal);
                m + params.sigma * eps
            }
            // Latent-threshold draw; the same path gives Bernoulli(Phi(m / sigma)).
            ModelKind::Probit | ModelKind::TauExposureBinary => {
                let eps: f64 = rng.sample(StandardNormal);
                f64::from(m + params.sigma * eps > 0.0)
            }
            ModelKind::Logistic => f64::from(rng.gen::<f64>() < logistic(m)),
        };
        values.push(y);
    }
    Ok(ResponseVector { kind, values })
}

/// Population average treatment effect of switching every node's own arm
/// while its whole neighborhood switches with it (fully treated vs fully
/// control network).
pub fn true_ate(kind: ModelKind, params: &ModelParams) -> f64 {
    let [b0, b1, b2] = params.beta;
    let s = params.sigma;
    match kind {
        ModelKind::Linear => b1 + b2,
        ModelKind::TauExposure => b1,
        ModelKind::Probit => norm_cdf((b0 + b1 + b2) / s) - norm_cdf(b0 / s),
        ModelKind::Logistic => logistic(b0 + b1 + b2) - logistic(b0),
        ModelKind::TauExposureBinary => norm_cdf((b0 + b1) / s) - norm_cdf(b0 / s),
    }
}
