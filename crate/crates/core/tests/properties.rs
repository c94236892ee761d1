use proptest::prelude::*;

use tracesvm::dual_cd::{train_dual_cd_detailed, DualConfig, DualProblem};
use tracesvm::prelude::*;
use tracesvm::selection::split_indices;

fn labeled(traces: &[SyscallTrace]) -> Vec<Label> {
    traces.iter().map(|t| t.label.unwrap()).collect()
}

fn small_corpus(seed: u64) -> Vec<SyscallTrace> {
    let cfg = GeneratorConfig { n_traces: 80, seed, ..GeneratorConfig::default() };
    generate(&cfg, Exec::default()).unwrap().traces
}

#[test]
fn optimizers_agree_on_separable_corpus() {
    let corpus = small_corpus(21);
    let (_, x) = Vectorizer::fit(&corpus, NgramRange::default(), IdfOptions::default(), Exec::default()).unwrap();
    let y = labeled(&corpus);

    let sgd = train_sgd(&x, &y, &SgdConfig { alpha: 1e-5, ..SgdConfig::default() }).unwrap();
    let dual = train_dual_cd(&x, &y, &DualConfig { c: 100.0, ..DualConfig::default() }).unwrap();
    assert_eq!(sgd.predict_matrix(&x).unwrap(), y);
    assert_eq!(dual.predict_matrix(&x).unwrap(), y);
}

#[test]
fn execution_modes_match() {
    let corpus = small_corpus(22);
    let fit = |exec| Vectorizer::fit(&corpus, NgramRange::default(), IdfOptions::default(), exec).unwrap();
    let (vs, xs) = fit(Exec::Sequential);
    let (vp, xp) = fit(Exec::Parallel);
    assert_eq!(vs, vp);
    assert_eq!(xs, xp);

    let base = TrainerConfig::Sgd(SgdConfig::default());
    let grid = |exec| grid_search(&xs, &xs, &base, &[1.0, 1e-3], &[0.1, 1e-3], exec).unwrap();
    assert_eq!(grid(Exec::Sequential), grid(Exec::Parallel));
}

fn problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, f64)> {
    (2usize..8, 1usize..4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n),
            prop::collection::vec(any::<bool>(), n),
            prop::sample::select(vec![0.1, 1.0, 10.0]),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_solution_satisfies_kkt((rows, signs, c) in problem()) {
        let mut labels: Vec<Label> = signs.iter().map(|&s| if s { Label::Malicious } else { Label::Benign }).collect();
        labels[0] = Label::Malicious;
        labels[1] = Label::Benign;
        let dim = rows[0].len();
        let m = FeatureMatrix::from_rows(dim, rows.iter().map(|r| SparseVector::from_dense(r)).collect()).unwrap();
        let tol = 1e-6;
        let out = train_dual_cd_detailed(&m, &labels, &DualConfig { c, tol, max_outer: 50_000, seed: 0 }).unwrap();
        prop_assert!(out.converged);
        let p = DualProblem::new(&m, &labels).unwrap();
        for (i, &a) in out.state.alpha.iter().enumerate() {
            prop_assert!((0.0..=c).contains(&a));
            let g = p.gradient(i, &out.state);
            if a == 0.0 {
                prop_assert!(g >= -tol);
            } else if a == c {
                prop_assert!(g <= tol);
            } else {
                prop_assert!(g.abs() < tol);
            }
        }
        let fresh = p.recompute_w(&out.state.alpha);
        for (x, y) in fresh.iter().zip(&out.state.w) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn split_is_stratified_partition(n_mal in 2usize..40, n_ben in 2usize..40, seed in any::<u64>(), frac in 0.05f64..0.95) {
        let labels: Vec<Label> = (0..n_mal + n_ben)
            .map(|i| if i < n_mal { Label::Malicious } else { Label::Benign })
            .collect();
        let spec = SplitSpec { train_fraction: frac, seed, stratified: true };
        let (tr, te) = split_indices(&labels, &spec).unwrap();
        prop_assert_eq!(tr.len() + te.len(), labels.len());
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), labels.len());
        for (class, total) in [(Label::Malicious, n_mal), (Label::Benign, n_ben)] {
            let in_train = tr.iter().filter(|&&i| labels[i] == class).count();
            prop_assert!(in_train >= 1 && in_train < total);
            let ideal = frac * total as f64;
            prop_assert!((in_train as f64 - ideal).abs() <= 1.0 + 1e-9, "{} vs {}", in_train, ideal);
        }
    }
}
