//! Replicated misspecification studies on a fixed graph: generate responses
//! from one model over a grid of effect configurations, run a set of
//! estimators against every generated data set, and tabulate MSEs with
//! confidence intervals, significance against the per-column best, and
//! theoretical references where the estimator is correctly specified.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bounds::{
    crlb_linear, crlb_logit, crlb_probit, crlb_tau, fim_logit, fim_probit, mse_tau_closed,
    mse_taubin_closed,
};
use crate::error::{Error, Result};
use crate::estimators::{
    apply_estimator, build_design_linear, build_design_tau, classify_exposure, ClassSizes,
    EstimationResult, EstimatorKind,
};
use crate::graph::{
    erdos_renyi, parse_edge_list, treated_fraction, ExposureVector, Graph, Separator,
    TreatmentVector,
};
use crate::models::{
    generate_with_exposure, true_ate, ModelKind, ModelParams, DEFAULT_SIGMA, DEFAULT_TAU,
};
use crate::stats::{mean, sample_variance, skewness};

/// Seed used when neither the caller nor the environment provides one.
pub const DEFAULT_SEED: u64 = 7919;
/// Two-sided 95% standard normal critical value.
pub const Z_95: f64 = 1.959963984540054;
/// Significance level for the star marking in rendered tables.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Effect grid swept when a config does not list its own: a pure spillover
/// setting, then a unit direct effect with spillover 0.5, 0, 1 and 2.
pub const DEFAULT_BETAS: [[f64; 3]; 5] = [
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.5],
    [0.0, 1.0, 0.0],
    [0.0, 1.0, 1.0],
    [0.0, 1.0, 2.0],
];

// Stream tags keeping graph generation, treatment assignment and response
// noise on disjoint substreams of the master seed.
pub const STREAM_GRAPH: u64 = 1;
pub const STREAM_ASSIGN: u64 = 2;
pub const STREAM_NOISE: u64 = 3;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

// splitmix64 finalizer
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

fn absorb(seed: u64, words: &[u64]) -> u64 {
    let mut state = mix64(seed.wrapping_add(GOLDEN));
    for &w in words {
        state = mix64(state.wrapping_add(w).wrapping_add(GOLDEN));
    }
    state
}

/// Independent generator for one labeled substream of `seed`. The words
/// identify the substream (stream tag, column index, replication index);
/// any change to any word yields an unrelated stream, so replications can
/// run in parallel in any order.
pub fn derive_rng(seed: u64, words: &[u64]) -> ChaCha8Rng {
    let mut state = absorb(seed, words);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Single u64 drawn from a labeled substream, for APIs that take a plain
/// integer seed.
pub fn derive_u64(seed: u64, words: &[u64]) -> u64 {
    mix64(absorb(seed, words).wrapping_add(GOLDEN))
}

/// Independent Bernoulli(p) assignment for every node.
pub fn assign_treatment<R: Rng>(n_nodes: usize, p: f64, rng: &mut R) -> TreatmentVector {
    TreatmentVector::new((0..n_nodes).map(|_| rng.gen_bool(p)).collect())
}

/// Where the study graph comes from.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphSource {
    ErdosRenyi { nodes: usize, mean_degree: f64 },
    File {
        path: PathBuf,
        #[serde(default)]
        separator: Separator,
    },
}

impl GraphSource {
    /// Builds or reads the graph. Synthetic graphs draw from the master
    /// seed's graph substream, so one seed pins the whole study.
    pub fn load(&self, seed: u64) -> Result<(Graph, String)> {
        match self {
            GraphSource::ErdosRenyi { nodes, mean_degree } => {
                let graph = erdos_renyi(*nodes, *mean_degree, derive_u64(seed, &[STREAM_GRAPH]))?;
                let label = format!("erdos-renyi(nodes={nodes} mean_degree={mean_degree})");
                Ok((graph, label))
            }
            GraphSource::File { path, separator } => {
                let text = std::fs::read_to_string(path).map_err(|err| {
                    Error::Io(std::io::Error::new(
                        err.kind(),
                        format!("{}: {err}", path.display()),
                    ))
                })?;
                let graph = parse_edge_list(&text, *separator)?;
                Ok((graph, path.display().to_string()))
            }
        }
    }
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_treatment_probability() -> f64 {
    0.5
}

fn default_betas() -> Vec<[f64; 3]> {
    DEFAULT_BETAS.to_vec()
}

fn default_replications() -> usize {
    1000
}

/// Full description of a study run. Parse from TOML with
/// [`ExperimentConfig::from_toml_str`] or construct directly.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; resolution against the environment and the built-in
    /// default happens in the caller, absent here means "not pinned".
    pub seed: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Marginal probability that a node is treated.
    #[serde(default = "default_treatment_probability")]
    pub treatment_probability: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Significance level used when rendering stars next to Welch p-values.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Redraw the assignment every replication instead of fixing one per
    /// configuration. Theoretical references are design-conditional, so
    /// they are omitted in this mode.
    #[serde(default)]
    pub rerandomize: bool,
    /// Response model the data are generated from.
    pub model: ModelKind,
    /// When absent the model's default estimator set is used.
    #[serde(default)]
    pub estimators: Option<Vec<EstimatorKind>>,
    #[serde(default = "default_betas")]
    pub betas: Vec<[f64; 3]>,
    pub graph: GraphSource,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replications < 2 {
            return fail(format!(
                "replications must be at least 2, got {}",
                self.replications
            ));
        }
        if !(self.treatment_probability > 0.0 && self.treatment_probability < 1.0) {
            return fail(format!(
                "treatment_probability must lie strictly between 0 and 1, got {}",
                self.treatment_probability
            ));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return fail(format!(
                "sigma must be a positive finite number, got {}",
                self.sigma
            ));
        }
        if !(0.5..=1.0).contains(&self.tau) {
            return fail(format!("tau must lie in [0.5, 1], got {}", self.tau));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            ));
        }
        if self.betas.is_empty() {
            return fail("betas must list at least one coefficient triple".into());
        }
        for (i, b) in self.betas.iter().enumerate() {
            if !b.iter().all(|v| v.is_finite()) {
                return fail(format!("betas[{i}] contains a non-finite value: {b:?}"));
            }
        }
        if let Some(estimators) = &self.estimators {
            if estimators.is_empty() {
                return fail("estimators, when given, must not be empty".into());
            }
            for (i, e) in estimators.iter().enumerate() {
                if estimators[..i].contains(e) {
                    return fail(format!("estimators lists {e} more than once"));
                }
                if !e.applicable_to(self.model) {
                    return fail(format!(
                        "estimator {e} is not defined for {} responses",
                        self.model
                    ));
                }
            }
        }
        match &self.graph {
            GraphSource::ErdosRenyi { nodes, mean_degree } => {
                if *nodes == 0 {
                    return fail("graph.nodes must be positive".into());
                }
                let max = (*nodes - 1) as f64;
                if !(0.0..=max).contains(mean_degree) {
                    return fail(format!(
                        "graph.mean_degree must lie in [0, {max}], got {mean_degree}"
                    ));
                }
            }
            GraphSource::File { path, .. } => {
                if path.as_os_str().is_empty() {
                    return fail("graph.path must not be empty".into());
                }
            }
        }
        Ok(())
    }

    /// Estimators to run: the configured override, or the model's default
    /// set.
    pub fn estimator_set(&self) -> Vec<EstimatorKind> {
        match &self.estimators {
            Some(list) => list.clone(),
            None => default_estimators(self.model),
        }
    }
}

/// Default estimator line-up: the no-interference baseline, the two
/// likelihood fits or the two least-squares fits depending on response
/// type, and the saturated difference in means.
pub fn default_estimators(model: ModelKind) -> Vec<EstimatorKind> {
    if model.is_binary() {
        vec![
            EstimatorKind::Sutva,
            EstimatorKind::LogitMle,
            EstimatorKind::ProbitMle,
            EstimatorKind::TauDim,
        ]
    } else {
        vec![
            EstimatorKind::Sutva,
            EstimatorKind::LinearOls,
            EstimatorKind::TauOls,
            EstimatorKind::TauDim,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub label: String,
    pub n_nodes: usize,
    pub n_edges: usize,
}

/// Replication summaries for one estimator in one column. Absent when
/// fewer than two replications produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub skewness: f64,
    pub mse: f64,
    pub mse_ci_low: f64,
    pub mse_ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCell {
    pub estimator: EstimatorKind,
    pub n_success: usize,
    pub n_failed: usize,
    pub n_nonconverged: usize,
    pub stats: Option<CellStats>,
    /// Theoretical reference when the estimator is correctly specified for
    /// the generating model: the variance bound for the regression and
    /// likelihood fits, the exact sampling MSE for the saturated
    /// difference in means. Absent under rerandomized assignment.
    pub crlb: Option<f64>,
    /// Exactly one cell per column, the smallest MSE (first on ties).
    pub best: bool,
    /// Two-sided Welch p-value comparing this cell's squared errors with
    /// the best cell's. Absent on the best cell itself.
    pub welch_p: Option<f64>,
    /// Per-replication estimates in replication order, null where the
    /// estimator failed. Kept so exports can feed histograms without
    /// rerunning the study.
    pub estimates: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyColumn {
    pub beta: [f64; 3],
    pub true_ate: f64,
    /// Assignment diagnostics for the fixed design; absent under
    /// rerandomization, where they vary by replication.
    pub treated_count: Option<usize>,
    pub class_sizes: Option<ClassSizes>,
    pub cells: Vec<EstimatorCell>,
}

impl StudyColumn {
    pub fn cell(&self, estimator: EstimatorKind) -> Option<&EstimatorCell> {
        self.cells.iter().find(|c| c.estimator == estimator)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub replications: usize,
    pub treatment_probability: f64,
    pub sigma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub rerandomize: bool,
    pub graph: GraphSummary,
    pub model: ModelKind,
    pub columns: Vec<StudyColumn>,
}

/// Runs the full study described by `config`. Deterministic in the
/// resolved seed: reports compare equal across runs and thread counts.
pub fn run_study(config: &ExperimentConfig) -> Result<StudyReport> {
    config.validate()?;
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    let (graph, label) = config.graph.load(seed)?;
    let estimators = config.estimator_set();
    let mut columns = Vec::with_capacity(config.betas.len());
    for (c_idx, &beta) in config.betas.iter().enumerate() {
        let params = ModelParams::new(beta)
            .with_sigma(config.sigma)
            .with_tau(config.tau);
        columns.push(run_cell(
            &graph,
            config.model,
            params,
            &estimators,
            seed,
            c_idx as u64,
            config.replications,
            config.treatment_probability,
            config.rerandomize,
        )?);
    }
    Ok(StudyReport {
        seed,
        replications: config.replications,
        treatment_probability: config.treatment_probability,
        sigma: config.sigma,
        tau: config.tau,
        alpha: config.alpha,
        rerandomize: config.rerandomize,
        graph: GraphSummary {
            label,
            n_nodes: graph.n_nodes(),
            n_edges: graph.n_edges(),
        },
        model: config.model,
        columns,
    })
}

type RepOutcomes = Vec<crate::error::Result<EstimationResult>>;

#[allow(clippy::too_many_arguments)]
fn run_cell(
    graph: &Graph,
    model: ModelKind,
    params: ModelParams,
    estimators: &[EstimatorKind],
    seed: u64,
    c_idx: u64,
    replications: usize,
    treatment_probability: f64,
    rerandomize: bool,
) -> Result<StudyColumn> {
    let truth = true_ate(model, &params);
    let fixed: Option<(TreatmentVector, ExposureVector)> = if rerandomize {
        None
    } else {
        let mut rng = derive_rng(seed, &[STREAM_ASSIGN, c_idx, 0]);
        let z = assign_treatment(graph.n_nodes(), treatment_probability, &mut rng);
        let g = treated_fraction(graph, &z)?;
        Some((z, g))
    };

    let outcomes: Vec<RepOutcomes> = (0..replications)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcomes> {
            let drawn;
            let (z, g) = match &fixed {
                Some((z, g)) => (z, g),
                None => {
                    let mut rng = derive_rng(seed, &[STREAM_ASSIGN, c_idx, rep as u64]);
                    let z = assign_treatment(graph.n_nodes(), treatment_probability, &mut rng);
                    let g = treated_fraction(graph, &z)?;
                    drawn = (z, g);
                    (&drawn.0, &drawn.1)
                }
            };
            let mut rng = derive_rng(seed, &[STREAM_NOISE, c_idx, rep as u64]);
            let y = generate_with_exposure(model, &params, z, g, &mut rng)?;
            Ok(estimators
                .iter()
                .map(|&e| apply_estimator(e, z, g, y.values(), params.tau))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    struct Acc {
        estimates: Vec<Option<f64>>,
        successes: Vec<f64>,
        sq_errors: Vec<f64>,
        n_failed: usize,
        n_nonconverged: usize,
    }
    let mut accs: Vec<Acc> = estimators
        .iter()
        .map(|_| Acc {
            estimates: Vec::with_capacity(replications),
            successes: Vec::with_capacity(replications),
            sq_errors: Vec::with_capacity(replications),
            n_failed: 0,
            n_nonconverged: 0,
        })
        .collect();
    for rep in &outcomes {
        for (acc, outcome) in accs.iter_mut().zip(rep) {
            match outcome {
                Ok(fit) if fit.ate_hat.is_finite() => {
                    acc.estimates.push(Some(fit.ate_hat));
                    acc.successes.push(fit.ate_hat);
                    acc.sq_errors.push((fit.ate_hat - truth) * (fit.ate_hat - truth));
                    if !fit.converged {
                        acc.n_nonconverged += 1;
                    }
                }
                _ => {
                    acc.estimates.push(None);
                    acc.n_failed += 1;
                }
            }
        }
    }

    let (treated_count, class_sizes) = match &fixed {
        Some((z, g)) => {
            let sizes = classify_exposure(z, g, params.tau)?.sizes();
            (Some(z.treated_count()), Some(sizes))
        }
        None => (None, None),
    };

    let stats: Vec<Option<CellStats>> = accs
        .iter()
        .map(|acc| {
            if acc.successes.len() < 2 {
                return None;
            }
            let mse = mean(&acc.sq_errors);
            let half =
                Z_95 * (sample_variance(&acc.sq_errors) / acc.sq_errors.len() as f64).sqrt();
            Some(CellStats {
                mean_estimate: mean(&acc.successes),
                sd_estimate: sample_variance(&acc.successes).sqrt(),
                skewness: skewness(&acc.successes),
                mse,
                mse_ci_low: mse - half,
                mse_ci_high: mse + half,
            })
        })
        .collect();

    let best_idx = stats
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s.mse)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);

    let mut cells = Vec::with_capacity(estimators.len());
    for (i, (&estimator, acc)) in estimators.iter().zip(&accs).enumerate() {
        let welch_p = match (best_idx, &stats[i]) {
            (Some(b), Some(_)) if b != i => {
                Some(welch_test(&acc.sq_errors, &accs[b].sq_errors)?.p)
            }
            _ => None,
        };
        let crlb = match &fixed {
            Some((z, g)) => theoretical_reference(
                model,
                estimator,
                z,
                g,
                class_sizes.as_ref().expect("sizes computed for fixed designs"),
                &params,
            ),
            None => None,
        };
        cells.push(EstimatorCell {
            estimator,
            n_success: acc.successes.len(),
            n_failed: acc.n_failed,
            n_nonconverged: acc.n_nonconverged,
            stats: stats[i],
            crlb,
            best: best_idx == Some(i),
            welch_p,
            estimates: acc.estimates.clone(),
        });
    }

    Ok(StudyColumn {
        beta: params.beta,
        true_ate: truth,
        treated_count,
        class_sizes,
        cells,
    })
}

/// Design-conditional reference value for a correctly specified estimator;
/// None when the estimator is misspecified for the generating model or the
/// reference does not exist on this design.
fn theoretical_reference(
    model: ModelKind,
    estimator: EstimatorKind,
    z: &TreatmentVector,
    g: &ExposureVector,
    sizes: &ClassSizes,
    params: &ModelParams,
) -> Option<f64> {
    match (model, estimator) {
        (ModelKind::Linear, EstimatorKind::LinearOls) => {
            let x = build_design_linear(z, g).ok()?;
            Some(crlb_linear(&x, params.sigma).ok()?.crlb)
        }
        (ModelKind::Probit, EstimatorKind::ProbitMle) => {
            // the fit sees the unit-scale coefficients
            let x = build_design_linear(z, g).ok()?;
            let scaled = params.beta.map(|b| b / params.sigma);
            let info = fim_probit(&x, &scaled, *params);
            Some(crlb_probit(&info, &scaled).ok()?.crlb)
        }
        (ModelKind::Logistic, EstimatorKind::LogitMle) => {
            let x = build_design_linear(z, g).ok()?;
            let info = fim_logit(&x, &params.beta, *params);
            Some(crlb_logit(&info, &params.beta).ok()?.crlb)
        }
        (ModelKind::TauExposure, EstimatorKind::TauOls) => {
            let x = build_design_tau(z, g, params.tau).ok()?;
            Some(crlb_tau(&x, params.sigma).ok()?.treatment_only.crlb)
        }
        (ModelKind::TauExposure, EstimatorKind::TauDim) => {
            mse_tau_closed(sizes, params.sigma).ok()
        }
        (ModelKind::TauExposureBinary, EstimatorKind::TauDim) => {
            mse_taubin_closed(sizes, params).ok()
        }
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance two-sample t-test, two-sided. Two exactly
/// constant samples carry no evidence either way and report p = 1.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 && vb == 0.0 {
        return Ok(WelchTest {
            t: 0.0,
            df: na + nb - 2.0,
            p: 1.0,
        });
    }
    let sea = va / na;
    let seb = vb / nb;
    let se2 = sea + seb;
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter {
        name: "welch_df",
        reason: e.to_string(),
    })?;
    let p = 2.0 * dist.cdf(-t.abs());
    Ok(WelchTest { t, df, p })
}
