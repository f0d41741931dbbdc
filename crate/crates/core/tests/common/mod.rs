//! Synthetic lattices and datasets shared by the integration tests.
#![allow(dead_code)]

use gwish::graph::Graph;
use gwish::io::sample_matrix_normal;
use gwish::rng::chain_rng;
use gwish::spatial::{car_centering, default_tau2, CarPrior, CountData, Lattice, RegressionSpec};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Poisson};

/// `r × r` grid with rook adjacency, regions numbered row by row.
pub fn grid(r: usize) -> Lattice {
    let mut e = vec![];
    for a in 0..r {
        for b in 0..r {
            let v = a * r + b;
            if b + 1 < r {
                e.push((v, v + 1));
            }
            if a + 1 < r {
                e.push((v, v + r));
            }
        }
    }
    Lattice::from_graph(Graph::from_edges(r * r, &e).unwrap())
}

pub struct GaussianCase {
    pub car: CarPrior,
    pub spec: RegressionSpec,
    pub y: DMatrix<f64>,
    pub beta: DMatrix<f64>,
}

/// 4×4 grid, covariate spread over 5..80, both outcomes with coefficients
/// (550, −2, 0.015), residuals drawn at the CAR prior mode with outcome
/// correlation 0.35.
pub fn gaussian_case(seed: u64) -> GaussianCase {
    let l = grid(4);
    let car = car_centering(&l, 0.99, default_tau2(&l), 3.0).unwrap();
    let n = l.p();
    let z = DVector::from_fn(n, |i, _| 5.0 + 75.0 * i as f64 / (n - 1) as f64);
    let spec = RegressionSpec::quadratic(&z, 2).unwrap();
    let beta = DMatrix::from_column_slice(3, 2, &[550.0, -2.0, 0.015, 550.0, -2.0, 0.015]);
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.35, 0.35, 1.0]);
    let k_c = cov.try_inverse().unwrap();
    let mut rng = chain_rng(seed, 0);
    let x = sample_matrix_normal(&car.mode, &k_c, 1, &mut rng).unwrap().samples()[0].clone();
    let y = spec.design() * &beta + x;
    GaussianCase { car, spec, y, beta }
}

pub struct PoissonCase {
    pub car: CarPrior,
    pub data: CountData,
    pub rates: DMatrix<f64>,
}

/// Counts on a 3×3 grid with two outcomes whose rates per unit population
/// are equal across regions.
pub fn poisson_case(seed: u64, rates: [f64; 2], base_pop: f64) -> PoissonCase {
    let l = grid(3);
    let car = car_centering(&l, 0.99, default_tau2(&l), 3.0).unwrap();
    let m = DVector::from_fn(9, |i, _| base_pop * (1.0 + 0.25 * i as f64));
    let mut rng = chain_rng(seed, 0);
    let y = DMatrix::from_fn(9, 2, |i, j| Poisson::new(m[i] * rates[j]).unwrap().sample(&mut rng));
    PoissonCase {
        car,
        data: CountData::new(y, m).unwrap(),
        rates: DMatrix::from_fn(9, 2, |_, j| rates[j]),
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic two-sample KS rejection threshold at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}
