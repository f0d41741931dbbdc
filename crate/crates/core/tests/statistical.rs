mod common;

use gwish::chol::PrecisionMatrix;
use gwish::ggm::{enumerate_posterior, run_ggm_chain, ChainConfig, GgmPrior, PriorConstants, SufficientStats};
use gwish::graph::Graph;
use gwish::gwishart::{log_norm_const_mc, sample_chain, sample_wishart_complete, GWishartParams};
use gwish::io::sample_matrix_normal;
use gwish::linalg::sample_mvn_precision;
use gwish::matrix::{
    run_matrix_chain, run_matrix_chain_from, MatrixChainState, MatrixConstants, MatrixData, MatrixPrior, RunLength,
};
use gwish::rng::chain_rng;
use nalgebra::{DMatrix, DVector};

fn gaussian_rows(k: &DMatrix<f64>, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = chain_rng(seed, 0);
    let p = k.nrows();
    let rows: Vec<_> = (0..n)
        .map(|_| {
            sample_mvn_precision(&DVector::zeros(p), k, &mut rng)
                .unwrap()
                .transpose()
        })
        .collect();
    DMatrix::from_rows(&rows)
}

fn equicorrelated_precision(p: usize, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { off })
}

#[test]
fn mh_ratio_of_entries_matches_direct_sampler() {
    let params = GWishartParams::new(Graph::complete(2), 3.0, DMatrix::identity(2, 2)).unwrap();
    let thin = 10;
    let (draws, _) = sample_chain(&params, 1_000 + 10_000 * thin, 0.5, false, chain_rng(1, 0)).unwrap();
    let a: Vec<f64> = draws[1_000..]
        .iter()
        .step_by(thin)
        .map(|k| k.matrix()[(0, 1)] / k.matrix()[(0, 0)])
        .collect();
    let mut rng = chain_rng(2, 0);
    let b: Vec<f64> = (0..a.len())
        .map(|_| {
            let k = sample_wishart_complete(3.0, params.d(), &mut rng).unwrap();
            k.matrix()[(0, 1)] / k.matrix()[(0, 0)]
        })
        .collect();
    let d = common::ks_statistic(&a, &b);
    let crit = common::ks_critical(a.len(), b.len(), 0.001);
    assert!(d < crit, "KS statistic {d} exceeds {crit}");
}

#[test]
fn constant_estimator_variance_falls_as_one_over_n() {
    let params = GWishartParams::new(Graph::cycle(4), 3.0, DMatrix::identity(4, 4)).unwrap();
    let reps = 60;
    let mut pts = vec![];
    for (k, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let xs: Vec<f64> = (0..reps)
            .map(|r| {
                log_norm_const_mc(&params, n, &mut chain_rng(10 + k as u64, r))
                    .unwrap()
                    .log_value
            })
            .collect();
        let m = xs.iter().sum::<f64>() / reps as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
        pts.push(((n as f64).ln(), v.ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((-1.2..=-0.8).contains(&slope), "log-variance slope {slope}");
}

#[test]
fn fixed_graph_posterior_mean_is_consistent() {
    let k_true = DMatrix::from_row_slice(3, 3, &[1.5, 0.6, 0.0, 0.6, 1.0, -0.4, 0.0, -0.4, 1.2]);
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let g_has = |i: usize, j: usize| i == j || g.has_edge(i, j);
    let x = gaussian_rows(&k_true, 5_000, 5);
    let stats = SufficientStats::from_data(&x).unwrap();
    let sample_precision = (stats.u() / stats.n() as f64).try_inverse().unwrap();
    let prior = GgmPrior::default_for(3);
    let params = GWishartParams::new(g.clone(), stats.n() as f64 + prior.delta0, stats.u() + &prior.d0).unwrap();
    let (draws, _) = sample_chain(&params, 6_000, 0.5, false, chain_rng(4, 0)).unwrap();
    let mean = draws[1_000..].iter().fold(DMatrix::zeros(3, 3), |a, k| a + k.matrix()) / 5_000.0;
    for i in 0..3 {
        for j in 0..3 {
            let scale = (k_true[(i, i)] * k_true[(j, j)]).sqrt();
            let err = (mean[(i, j)] - k_true[(i, j)]).abs() / scale;
            assert!(err < 0.05, "K[{i},{j}]: {} vs {}", mean[(i, j)], k_true[(i, j)]);
            if g_has(i, j) {
                let err = (mean[(i, j)] - sample_precision[(i, j)]).abs() / scale;
                assert!(
                    err < 0.01,
                    "K[{i},{j}]: {} vs sample {}",
                    mean[(i, j)],
                    sample_precision[(i, j)]
                );
            }
        }
    }
}

#[test]
fn independent_data_gives_low_edge_frequencies() {
    let x = gaussian_rows(&DMatrix::identity(3, 3), 500, 5);
    let consts = PriorConstants::new(3.0, DMatrix::identity(3, 3), 10_000, 6).unwrap();
    let tr = run_ggm_chain(
        &x,
        &GgmPrior::default_for(3),
        &ChainConfig::new(6_000, 1_000),
        &consts,
        &mut chain_rng(7, 0),
    )
    .unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(tr.edge_freq[(i, j)] < 0.5, "edge {i}-{j}: {}", tr.edge_freq[(i, j)]);
    }
}

#[test]
fn dependent_data_gives_high_edge_frequencies() {
    // Partial correlations of 0.4 between every pair.
    let x = gaussian_rows(&equicorrelated_precision(3, -0.4), 500, 8);
    let consts = PriorConstants::new(3.0, DMatrix::identity(3, 3), 10_000, 9).unwrap();
    let tr = run_ggm_chain(
        &x,
        &GgmPrior::default_for(3),
        &ChainConfig::new(6_000, 1_000),
        &consts,
        &mut chain_rng(10, 0),
    )
    .unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(tr.edge_freq[(i, j)] > 0.5, "edge {i}-{j}: {}", tr.edge_freq[(i, j)]);
    }
}

#[test]
fn single_column_matrix_model_matches_graph_enumeration() {
    let k_true = DMatrix::from_row_slice(3, 3, &[1.0, 0.45, 0.0, 0.45, 1.0, 0.25, 0.0, 0.25, 1.0]);
    let x = gaussian_rows(&k_true, 12, 11);
    let samples: Vec<DMatrix<f64>> = (0..x.nrows())
        .map(|r| DMatrix::from_iterator(3, 1, x.row(r).iter().copied()))
        .collect();
    let data = MatrixData::new(samples).unwrap();
    let prior = MatrixPrior::default_for(3, 1);
    let consts = MatrixConstants::new(&prior, 100_000, 12).unwrap();
    let tr = run_matrix_chain(
        &data,
        &prior,
        RunLength::new(80_000, 5_000, 1).unwrap(),
        &consts,
        &mut chain_rng(13, 0),
    )
    .unwrap();
    let stats = SufficientStats::from_data(&x).unwrap();
    let exact = enumerate_posterior(&stats, &GgmPrior::default_for(3), 100_000, &mut chain_rng(14, 0)).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (c, e) = (tr.row_edge_freq[(i, j)], exact.edge_probs[(i, j)]);
        assert!((c - e).abs() < 0.05, "edge {i}-{j}: chain {c}, enumeration {e}");
    }
    assert!(tr.kc_mean[(0, 0)] == 1.0);
}

/// Chains started at `(K_R, z)` and `(4 K_R, z / 4)` target the same
/// posterior, so their summaries must agree.
#[test]
fn rescaled_starting_states_reach_the_same_kronecker_product() {
    let g_r = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let g_c = Graph::cycle(4);
    let k_r = DMatrix::from_fn(3, 3, |i, j| {
        if i == j {
            1.0
        } else if g_r.has_edge(i, j) {
            0.4
        } else {
            0.0
        }
    });
    let k_c = DMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            1.0
        } else if g_c.has_edge(i, j) {
            0.3
        } else {
            0.0
        }
    });
    let data = sample_matrix_normal(&k_r, &k_c, 60, &mut chain_rng(15, 0)).unwrap();
    let prior = MatrixPrior::default_for(3, 4);
    let consts = MatrixConstants::new(&prior, 10_000, 16).unwrap();
    let run = RunLength::new(30_000, 5_000, 1).unwrap();
    let start = |scale: f64| MatrixChainState {
        k_r: PrecisionMatrix::new(DMatrix::identity(3, 3) * scale, Graph::empty(3)).unwrap(),
        k_c: PrecisionMatrix::new(DMatrix::identity(4, 4), Graph::empty(4)).unwrap(),
        z: 1.0 / scale,
    };
    let a = run_matrix_chain_from(start(1.0), &data, &prior, run, &consts, &mut chain_rng(17, 0)).unwrap();
    let b = run_matrix_chain_from(start(4.0), &data, &prior, run, &consts, &mut chain_rng(17, 1)).unwrap();
    let ka = a.kr_mean.kronecker(&a.kc_mean);
    let kb = b.kr_mean.kronecker(&b.kc_mean);
    for i in 0..12 {
        for j in 0..12 {
            let scale = (ka[(i, i)] * ka[(j, j)]).sqrt();
            let err = (ka[(i, j)] - kb[(i, j)]).abs() / scale;
            assert!(err < 0.05, "entry ({i},{j}): {} vs {}", ka[(i, j)], kb[(i, j)]);
        }
    }
}
