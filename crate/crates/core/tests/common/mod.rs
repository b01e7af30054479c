//! Reference computations for the oracle and acceptance suites. Everything
//! here recomputes answers through routes the library does not use: statrs
//! for the normal CDF and density (the library links against libm), naive
//! exp/ln arithmetic for the logistic pieces, cofactor expansion for 3x3
//! inverses, and finite differences for derivatives.

#![allow(dead_code)]

// Index loops over fixed 3-vectors and matrices read better here.
#![allow(clippy::needless_range_loop)]
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use netab_core::graph::{ExposureVector, TreatmentVector};

pub fn phi_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

pub fn phi_pdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().pdf(x)
}

pub fn sigmoid_naive(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// z Bernoulli(1/2), g uniform on [0, 1]: a well-conditioned design that
/// exercises every estimator without building a graph.
pub fn synthetic_design(seed: u64, n: usize) -> (TreatmentVector, ExposureVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = TreatmentVector::new((0..n).map(|_| rng.gen_bool(0.5)).collect());
    let g = ExposureVector::new((0..n).map(|_| rng.gen()).collect()).unwrap();
    (z, g)
}

pub fn dot3(row: &[f64; 3], b: &[f64; 3]) -> f64 {
    row[0] * b[0] + row[1] * b[1] + row[2] * b[2]
}

#[derive(Clone, Copy, Debug)]
pub enum Link {
    Probit,
    Logit,
}

impl Link {
    pub fn prob(self, s: f64) -> f64 {
        match self {
            Link::Probit => phi_cdf(s),
            Link::Logit => sigmoid_naive(s),
        }
    }
}

/// Bernoulli log-likelihood evaluated the obvious way; the y = 0 branch
/// uses the mirrored argument because both links complement by reflection,
/// so no 1 - p cancellation creeps in at large scores.
pub fn oracle_ll(link: Link, rows: &[[f64; 3]], y: &[f64], b: &[f64; 3]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let s = dot3(row, b);
            if yi > 0.5 {
                link.prob(s).ln()
            } else {
                link.prob(-s).ln()
            }
        })
        .sum()
}

/// Expectation of the log-likelihood under response probabilities frozen
/// at `beta_star`, as a function of the free parameter `b`. Its negated
/// Hessian at b = beta_star is the Fisher information.
pub fn expected_ll(link: Link, rows: &[[f64; 3]], beta_star: &[f64; 3], b: &[f64; 3]) -> f64 {
    rows.iter()
        .map(|row| {
            let p_star = link.prob(dot3(row, beta_star));
            let s = dot3(row, b);
            p_star * link.prob(s).ln() + (1.0 - p_star) * link.prob(-s).ln()
        })
        .sum()
}

pub fn fd_gradient(f: impl Fn(&[f64; 3]) -> f64, at: &[f64; 3], h: f64) -> [f64; 3] {
    let mut grad = [0.0; 3];
    for j in 0..3 {
        let mut hi = *at;
        hi[j] += h;
        let mut lo = *at;
        lo[j] -= h;
        grad[j] = (f(&hi) - f(&lo)) / (2.0 * h);
    }
    grad
}

/// Central-difference Hessian: fourth-order stencil on the diagonal,
/// second-order cross terms.
pub fn fd_hessian(f: impl Fn(&[f64; 3]) -> f64, at: &[f64; 3], h: f64) -> [[f64; 3]; 3] {
    let mut hess = [[0.0; 3]; 3];
    let shift = |j: usize, k: f64| {
        let mut x = *at;
        x[j] += k * h;
        x
    };
    let center = f(at);
    for j in 0..3 {
        hess[j][j] = (-f(&shift(j, 2.0)) + 16.0 * f(&shift(j, 1.0)) - 30.0 * center
            + 16.0 * f(&shift(j, -1.0))
            - f(&shift(j, -2.0)))
            / (12.0 * h * h);
    }
    for j in 0..3 {
        for k in (j + 1)..3 {
            let mut pp = *at;
            pp[j] += h;
            pp[k] += h;
            let mut pm = *at;
            pm[j] += h;
            pm[k] -= h;
            let mut mp = *at;
            mp[j] -= h;
            mp[k] += h;
            let mut mm = *at;
            mm[j] -= h;
            mm[k] -= h;
            let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
            hess[j][k] = v;
            hess[k][j] = v;
        }
    }
    hess
}

/// Normal-equation pieces accumulated on plain arrays.
pub fn xtx_xty(rows: &[[f64; 3]], y: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for (row, &yi) in rows.iter().zip(y) {
        for j in 0..3 {
            for k in 0..3 {
                xtx[j][k] += row[j] * row[k];
            }
            xty[j] += row[j] * yi;
        }
    }
    (xtx, xty)
}

/// Inverse of a 3x3 matrix by cofactor expansion; None on a vanishing
/// determinant.
pub fn adjugate_inv3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
        ],
    ])
}

pub fn mat_vec3(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [dot3(&m[0], v), dot3(&m[1], v), dot3(&m[2], v)]
}

pub fn quad_form3(g: &[f64; 3], m: &[[f64; 3]; 3]) -> f64 {
    dot3(g, &mat_vec3(m, g))
}

pub fn inf_norm3(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}
