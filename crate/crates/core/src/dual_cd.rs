//! Linear SVM trained by coordinate descent on the dual.
//!
//! The problem solved is
//!
//! ```text
//! min_α  f(α) = ½ αᵀQα − eᵀα    subject to  0 ≤ α_i ≤ C,
//! Q_ij = y_i y_j x̃_iᵀ x̃_j
//! ```
//!
//! where `x̃_i` is row `i` with a constant `1` appended, so the bias lives in
//! the last coordinate of `w̃ = Σ α_i y_i x̃_i` and no equality constraint
//! couples the multipliers. Each inner step minimizes `f` exactly along one
//! coordinate and clips to the box; `w̃` is kept up to date incrementally.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_labels, LinearModel};
use crate::sparse::FeatureMatrix;
use crate::trace::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub c: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub seed: u64,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            c: 1.0,
            tol: 1e-3,
            max_outer: 1000,
            seed: 0,
        }
    }
}

impl DualConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("c", format!("must be > 0, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::config("tol", format!("must be > 0, got {}", self.tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::config("max_outer", "must be at least 1"));
        }
        Ok(())
    }
}

/// Multipliers plus the maintained augmented weight vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    /// Length `dim + 1`; the last coordinate is the bias.
    pub w: Vec<f64>,
    pub outer_iter: usize,
}

/// Training data in augmented form with cached diagonal `Q_ii`.
pub struct DualProblem<'a> {
    matrix: &'a FeatureMatrix,
    y: Vec<f64>,
    qd: Vec<f64>,
}

impl<'a> DualProblem<'a> {
    pub fn new(matrix: &'a FeatureMatrix, labels: &[Label]) -> Result<Self> {
        if labels.len() != matrix.n_rows() {
            return Err(Error::LengthMismatch {
                left: matrix.n_rows(),
                right: labels.len(),
            });
        }
        let y = labels.iter().map(|l| l.sign()).collect();
        let qd = matrix.rows.iter().map(|r| r.norm_sq() + 1.0).collect();
        Ok(DualProblem { matrix, y, qd })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn initial_state(&self) -> DualState {
        DualState {
            alpha: vec![0.0; self.n()],
            w: vec![0.0; self.dim() + 1],
            outer_iter: 0,
        }
    }

    pub fn q_entry(&self, i: usize, j: usize) -> f64 {
        let (xi, xj) = (&self.matrix.rows[i], &self.matrix.rows[j]);
        self.y[i] * self.y[j] * (xi.dot(xj) + 1.0)
    }

    /// `w̃ · x̃_i`.
    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        self.matrix.rows[i].dot_dense(w) + w[self.dim()]
    }

    /// `½‖w̃‖² − Σα`, equal to `½αᵀQα − eᵀα` while the identity holds.
    pub fn dual_objective(&self, state: &DualState) -> f64 {
        let wsq: f64 = state.w.iter().map(|v| v * v).sum();
        0.5 * wsq - state.alpha.iter().sum::<f64>()
    }

    pub fn gradient(&self, i: usize, state: &DualState) -> f64 {
        self.y[i] * self.margin(i, &state.w) - 1.0
    }

    pub fn projected_gradient(&self, i: usize, state: &DualState, c: f64) -> f64 {
        project(self.gradient(i, state), state.alpha[i], c)
    }

    /// Exact box-constrained minimization of `f` along coordinate `i`.
    pub fn cd_update(&self, i: usize, state: &mut DualState, c: f64) {
        let qii = self.qd[i];
        if qii <= 0.0 {
            return;
        }
        let g = self.gradient(i, state);
        if project(g, state.alpha[i], c) == 0.0 {
            return;
        }
        let old = state.alpha[i];
        let new = (old - g / qii).clamp(0.0, c);
        state.alpha[i] = new;
        let d = (new - old) * self.y[i];
        if d != 0.0 {
            self.matrix.rows[i].axpy_into(d, &mut state.w);
            let last = self.dim();
            state.w[last] += d;
        }
    }

    /// `Σ α_i y_i x̃_i` computed from scratch.
    pub fn recompute_w(&self, alpha: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim() + 1];
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let s = a * self.y[i];
                self.matrix.rows[i].axpy_into(s, &mut w);
                w[self.dim()] += s;
            }
        }
        w
    }

    pub fn max_projected_gradient(&self, state: &DualState, c: f64) -> f64 {
        (0..self.n())
            .filter(|&i| self.qd[i] > 0.0)
            .map(|i| self.projected_gradient(i, state, c).abs())
            .fold(0.0, f64::max)
    }

    pub fn model(&self, state: &DualState) -> LinearModel {
        let d = self.dim();
        LinearModel {
            weights: state.w[..d].to_vec(),
            bias: state.w[d],
        }
    }
}

fn project(g: f64, alpha: f64, c: f64) -> f64 {
    if (alpha <= 0.0 && g >= 0.0) || (alpha >= c && g <= 0.0) {
        0.0
    } else {
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualOutcome {
    pub model: LinearModel,
    pub state: DualState,
    pub converged: bool,
    pub max_projected_gradient: f64,
}

pub fn train_dual_cd(matrix: &FeatureMatrix, labels: &[Label], config: &DualConfig) -> Result<LinearModel> {
    train_dual_cd_detailed(matrix, labels, config).map(|o| o.model)
}

/// Runs outer sweeps until every projected gradient is below `tol` or
/// `max_outer` sweeps have been made. Hitting the cap is reported through
/// [`DualOutcome::converged`], not as an error.
pub fn train_dual_cd_detailed(
    matrix: &FeatureMatrix,
    labels: &[Label],
    config: &DualConfig,
) -> Result<DualOutcome> {
    config.validate()?;
    check_labels(matrix, labels)?;
    let prob = DualProblem::new(matrix, labels)?;
    let mut state = prob.initial_state();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..prob.n()).collect();
    let c = config.c;

    let mut pg_max = f64::INFINITY;
    while state.outer_iter < config.max_outer {
        order.shuffle(&mut rng);
        for &i in &order {
            prob.cd_update(i, &mut state, c);
        }
        state.outer_iter += 1;
        pg_max = prob.max_projected_gradient(&state, c);
        if pg_max < config.tol {
            break;
        }
    }

    Ok(DualOutcome {
        model: prob.model(&state),
        converged: pg_max < config.tol,
        max_projected_gradient: pg_max,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVector;

    fn sv(dim: usize, pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_pairs(dim, pairs.to_vec()).unwrap()
    }

    fn two_point() -> (FeatureMatrix, Vec<Label>) {
        let m = FeatureMatrix::from_rows(1, vec![sv(1, &[(0, 1.0)]), sv(1, &[(0, -1.0)])]).unwrap();
        (m, vec![Label::Malicious, Label::Benign])
    }

    #[test]
    fn q_entry_examples() {
        let m = FeatureMatrix::from_rows(1, vec![sv(1, &[(0, 1.0)]), sv(1, &[(0, 1.0)])]).unwrap();
        let p = DualProblem::new(&m, &[Label::Malicious, Label::Malicious]).unwrap();
        assert_eq!(p.q_entry(0, 1), 2.0);
        assert!(p.q_entry(0, 0) >= 0.0);
        let p = DualProblem::new(&m, &[Label::Malicious, Label::Benign]).unwrap();
        assert_eq!(p.q_entry(0, 1), -2.0);
    }

    #[test]
    fn projection_rules() {
        assert_eq!(project(2.0, 0.0, 1.0), 0.0);
        assert_eq!(project(-0.3, 0.4, 1.0), -0.3);
        assert_eq!(project(-1.0, 1.0, 1.0), 0.0);
        assert_eq!(project(-1.0, 0.0, 1.0), -1.0);
        assert_eq!(project(0.5, 1.0, 1.0), 0.5);
    }

    #[test]
    fn zero_state_objective() {
        let (m, y) = two_point();
        let p = DualProblem::new(&m, &y).unwrap();
        assert_eq!(p.dual_objective(&p.initial_state()), 0.0);
    }

    #[test]
    fn update_is_noop_at_zero_gradient() {
        let (m, y) = two_point();
        let p = DualProblem::new(&m, &y).unwrap();
        // α = (0.5, 0.5) gives w̃ = (1, 0), y_i w̃·x̃_i = 1, G = 0
        let mut s = DualState {
            alpha: vec![0.5, 0.5],
            w: p.recompute_w(&[0.5, 0.5]),
            outer_iter: 0,
        };
        assert_eq!(s.w, [1.0, 0.0]);
        let before = s.clone();
        p.cd_update(0, &mut s, 10.0);
        assert_eq!(s, before);
    }

    #[test]
    fn update_clips_at_zero() {
        let m = FeatureMatrix::from_rows(
            1,
            vec![sv(1, &[(0, 1.0)]), sv(1, &[(0, 1.0)]), sv(1, &[(0, -1.0)])],
        )
        .unwrap();
        let p = DualProblem::new(&m, &[Label::Malicious, Label::Malicious, Label::Benign]).unwrap();
        let alpha = vec![0.1, 3.0, 0.0];
        let mut s = DualState {
            w: p.recompute_w(&alpha),
            alpha,
            outer_iter: 0,
        };
        // unconstrained step 0.1 - 5.2/2 lands below zero
        assert_eq!(p.gradient(0, &s), 5.2);
        p.cd_update(0, &mut s, 10.0);
        assert_eq!(s.alpha[0], 0.0);
        let fresh = p.recompute_w(&s.alpha);
        for (a, b) in fresh.iter().zip(&s.w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_analytic() {
        let (m, y) = two_point();
        let cfg = DualConfig { c: 10.0, tol: 1e-6, ..DualConfig::default() };
        let out = train_dual_cd_detailed(&m, &y, &cfg).unwrap();
        assert!(out.converged);
        assert!((out.model.weights[0] - 1.0).abs() < 1e-3);
        assert!(out.model.bias.abs() < 1e-3);
        let again = train_dual_cd(&m, &y, &cfg).unwrap();
        assert_eq!(again, out.model);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (m, _) = two_point();
        assert!(matches!(
            train_dual_cd(&m, &[Label::Benign, Label::Benign], &DualConfig::default()),
            Err(Error::DegenerateLabels)
        ));
        let bad = DualConfig { c: -1.0, ..DualConfig::default() };
        assert!(train_dual_cd(&m, &[Label::Malicious, Label::Benign], &bad).is_err());
    }
}
