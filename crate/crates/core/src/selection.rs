//! Train/test splitting and exhaustive `(alpha, tol)` grid search.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::f1_score;
use crate::par::Exec;
use crate::sparse::FeatureMatrix;
use crate::trace::{Label, SyscallTrace};
use crate::trainer::{TrainerConfig, TrainerKind};

/// Regularization strengths, 10² down to 10⁻⁷.
pub const DEFAULT_ALPHA_GRID: [f64; 10] = [100.0, 10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
/// Stopping tolerances, 10² down to 10⁻⁴, then 5·10⁻⁵.
pub const DEFAULT_TOL_GRID: [f64; 8] = [100.0, 10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4, 5e-5];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Index form of [`train_test_split`]. Both returned lists are ascending.
pub fn split_indices(labels: &[Label], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config(
            "train_fraction",
            format!("must be in (0, 1), got {}", spec.train_fraction),
        ));
    }
    let n = labels.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} traces cannot be split")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target = round_half_up(spec.train_fraction * n as f64).clamp(1, n - 1);

    let (mut train, mut test) = (Vec::new(), Vec::new());
    if spec.stratified {
        let classes = [Label::Benign, Label::Malicious];
        let groups: Vec<Vec<usize>> = classes
            .iter()
            .map(|c| (0..n).filter(|&i| labels[i] == *c).collect())
            .collect();
        for (c, g) in classes.iter().zip(&groups) {
            if g.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "class {c} has {} trace(s); at least 2 are needed to appear in both splits",
                    g.len()
                )));
            }
        }
        // largest-remainder apportionment of the train total across classes
        let exact: Vec<f64> = groups.iter().map(|g| spec.train_fraction * g.len() as f64).collect();
        let mut take: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut short = target.saturating_sub(take.iter().sum());
        let mut by_rem: Vec<usize> = (0..groups.len()).collect();
        by_rem.sort_by(|&a, &b| {
            let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in &by_rem {
            if short == 0 {
                break;
            }
            take[k] += 1;
            short -= 1;
        }
        for (g, t) in groups.into_iter().zip(take) {
            let mut g = g;
            g.shuffle(&mut rng);
            let t = t.clamp(1, g.len() - 1);
            train.extend_from_slice(&g[..t]);
            test.extend_from_slice(&g[t..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..target]);
        test.extend_from_slice(&all[target..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits labeled traces into disjoint train and test sets covering the corpus.
pub fn train_test_split(
    corpus: &[SyscallTrace],
    spec: &SplitSpec,
) -> Result<(Vec<SyscallTrace>, Vec<SyscallTrace>)> {
    let labels = corpus
        .iter()
        .map(|t| {
            t.label
                .ok_or_else(|| Error::InsufficientData(format!("trace {} is unlabeled", t.source_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (tr, te) = split_indices(&labels, spec)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| corpus[i].clone()).collect();
    Ok((pick(&tr), pick(&te)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub tol: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    /// Alpha-major order, matching the grids as given.
    pub table: Vec<GridCell>,
    pub best: GridCell,
    pub trainer_kind: TrainerKind,
}

impl GridSearchResult {
    /// CSV `alpha,tol,f1`, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,tol,f1\n");
        for c in &self.table {
            let _ = writeln!(out, "{},{},{}", c.alpha, c.tol, c.f1);
        }
        out
    }
}

fn labels_of(m: &FeatureMatrix) -> Result<&[Label]> {
    m.labels
        .as_deref()
        .ok_or_else(|| Error::InsufficientData("feature matrix has no labels".into()))
}

/// Trains and scores one cell: the model is fit on `train` and F1
/// (malware-positive) is measured on `validation`.
pub fn evaluate_cell(
    train: &FeatureMatrix,
    validation: &FeatureMatrix,
    base: &TrainerConfig,
    alpha: f64,
    tol: f64,
) -> Result<f64> {
    let wrap = |e: Error| Error::GridCell {
        alpha,
        tol,
        source: Box::new(e),
    };
    let cfg = base.with_cell(alpha, tol);
    let (model, _) = cfg.train(train, labels_of(train)?).map_err(wrap)?;
    let preds = model.predict_matrix(validation).map_err(wrap)?;
    f1_score(&preds, labels_of(validation)?).map_err(wrap)
}

/// Exhaustive search over `alpha_grid × tol_grid`. Ties on F1 go to the
/// smallest alpha, then the smallest tol.
pub fn grid_search(
    train: &FeatureMatrix,
    validation: &FeatureMatrix,
    base: &TrainerConfig,
    alpha_grid: &[f64],
    tol_grid: &[f64],
    exec: Exec,
) -> Result<GridSearchResult> {
    if alpha_grid.is_empty() || tol_grid.is_empty() {
        return Err(Error::config("grid", "alpha and tol grids must be non-empty"));
    }
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InsufficientData("empty train or validation split".into()));
    }
    let cells: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| tol_grid.iter().map(move |&t| (a, t)))
        .collect();
    let table: Vec<GridCell> = exec.try_map(&cells, |&(alpha, tol)| {
        evaluate_cell(train, validation, base, alpha, tol).map(|f1| GridCell { alpha, tol, f1 })
    })?;
    let best = *table
        .iter()
        .reduce(|best, c| {
            let better = c.f1 > best.f1
                || (c.f1 == best.f1
                    && (c.alpha < best.alpha || (c.alpha == best.alpha && c.tol < best.tol)));
            if better {
                c
            } else {
                best
            }
        })
        .expect("grid is non-empty");
    Ok(GridSearchResult {
        table,
        best,
        trainer_kind: base.kind(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgd::SgdConfig;
    use crate::sparse::SparseVector;
    use Label::{Benign as B, Malicious as M};

    #[test]
    fn stratified_counts() {
        let labels = [M, M, M, M, M, M, B, B, B, B];
        let (tr, te) = split_indices(&labels, &SplitSpec::default()).unwrap();
        let mal = tr.iter().filter(|&&i| labels[i] == M).count();
        assert_eq!(tr.len(), 8);
        assert_eq!(mal, 5);
        assert_eq!(tr.len() - mal, 3);
        assert_eq!(te.len(), 2);
    }

    #[test]
    fn split_is_partition_and_deterministic() {
        let labels: Vec<Label> = (0..37).map(|i| if i % 3 == 0 { B } else { M }).collect();
        for stratified in [true, false] {
            let spec = SplitSpec { seed: 9, stratified, ..SplitSpec::default() };
            let (tr, te) = split_indices(&labels, &spec).unwrap();
            let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..37).collect::<Vec<_>>());
            assert_eq!(split_indices(&labels, &spec).unwrap(), (tr, te));
        }
    }

    #[test]
    fn insufficient_class() {
        let labels = [M, M, M, B];
        assert!(matches!(
            split_indices(&labels, &SplitSpec::default()),
            Err(Error::InsufficientData(_))
        ));
        let bad = SplitSpec { train_fraction: 1.0, ..SplitSpec::default() };
        assert!(split_indices(&[M, M, B, B], &bad).is_err());
    }

    fn toy() -> FeatureMatrix {
        let rows = (0..8)
            .map(|i| SparseVector::from_pairs(2, vec![(i % 2, 1.0)]).unwrap())
            .collect();
        let labels = (0..8).map(|i| if i % 2 == 0 { M } else { B }).collect();
        let ids = (0..8).map(|i| i.to_string()).collect();
        FeatureMatrix::new(2, rows, ids, Some(labels)).unwrap()
    }

    #[test]
    fn one_by_one_grid() {
        let m = toy();
        let base = TrainerConfig::Sgd(SgdConfig::default());
        let r = grid_search(&m, &m, &base, &[0.01], &[1e-3], Exec::Sequential).unwrap();
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.best, r.table[0]);
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn best_is_table_max_with_tie_break() {
        let m = toy();
        let base = TrainerConfig::Sgd(SgdConfig::default());
        let r = grid_search(&m, &m, &base, &[1.0, 0.01], &[0.1, 1e-3], Exec::default()).unwrap();
        assert_eq!(r.table.len(), 4);
        let max = r.table.iter().map(|c| c.f1).fold(f64::MIN, f64::max);
        assert_eq!(r.best.f1, max);
        let first = r
            .table
            .iter()
            .filter(|c| c.f1 == max)
            .min_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.tol.total_cmp(&b.tol)))
            .unwrap();
        assert_eq!(&r.best, first);
    }

    #[test]
    fn empty_grid_rejected() {
        let m = toy();
        let base = TrainerConfig::Sgd(SgdConfig::default());
        assert!(grid_search(&m, &m, &base, &[], &[0.1], Exec::Sequential).is_err());
    }
}
