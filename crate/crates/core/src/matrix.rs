//! Matrix-variate Gaussian graphical model: `vec(Xᵀ) ~ N(0, (K_R ⊗ K_C)⁻¹)`
//! with G-Wishart priors on both precisions, `(K_C)₁₁ = 1` for
//! identifiability and an auxiliary scale `z` that restores conjugacy of
//! the column side.
//!
//! One iteration runs five steps in order: row graph, row precision, column
//! graph, column precision, `z`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::chol::PrecisionMatrix;
use crate::diagnostics::EdgeFrequency;
use crate::error::{Error, Result};
use crate::ggm::{rj_move, PriorConstants, RjContext, RjOutcome, RjStats};
use crate::graph::Graph;
use crate::gwishart::{with_relabeling, AcceptStats, GWishartParams};
use crate::linalg::{symmetrize, trace_inner};

/// `n` observed `p_R × p_C` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixData {
    samples: Vec<DMatrix<f64>>,
    p_r: usize,
    p_c: usize,
}

impl MatrixData {
    pub fn new(samples: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        };
        let (p_r, p_c) = first.shape();
        for (k, x) in samples.iter().enumerate() {
            if x.shape() != (p_r, p_c) {
                return Err(Error::DimensionMismatch {
                    expected: p_r * p_c,
                    found: x.nrows() * x.ncols(),
                });
            }
            for r in 0..p_r {
                for c in 0..p_c {
                    if !x[(r, c)].is_finite() {
                        return Err(Error::NonFiniteData {
                            row: k * p_r + r + 1,
                            col: c + 1,
                        });
                    }
                }
            }
        }
        Ok(MatrixData { samples, p_r, p_c })
    }

    /// Splits an `(n·p_R) × p_C` matrix of vertically stacked samples.
    pub fn from_stacked(m: &DMatrix<f64>, p_r: usize) -> Result<Self> {
        if p_r == 0 || !m.nrows().is_multiple_of(p_r) || m.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "{} stacked rows are not a positive multiple of p_R = {p_r}",
                m.nrows()
            )));
        }
        let samples = (0..m.nrows() / p_r)
            .map(|k| m.rows(k * p_r, p_r).into_owned())
            .collect();
        Self::new(samples)
    }

    pub fn to_stacked(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n() * self.p_r, self.p_c);
        for (k, x) in self.samples.iter().enumerate() {
            out.rows_mut(k * self.p_r, self.p_r).copy_from(x);
        }
        out
    }

    pub fn transposed(&self) -> MatrixData {
        MatrixData {
            samples: self.samples.iter().map(|x| x.transpose()).collect(),
            p_r: self.p_c,
            p_c: self.p_r,
        }
    }

    pub fn samples(&self) -> &[DMatrix<f64>] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn p_r(&self) -> usize {
        self.p_r
    }

    pub fn p_c(&self) -> usize {
        self.p_c
    }
}

/// Priors, optional known row graph and proposal scales.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPrior {
    pub delta_r: f64,
    pub delta_c: f64,
    pub d_r: DMatrix<f64>,
    pub d_c: DMatrix<f64>,
    /// When set, the row graph is held at this graph and only `K_R` moves.
    pub row_graph_fixed: Option<Graph>,
    pub sigma_m_r: f64,
    pub sigma_m_c: f64,
    pub sigma_g_r: f64,
    pub sigma_g_c: f64,
}

impl MatrixPrior {
    /// `δ_R = δ_C = 3`, identity centering, all scales 0.5.
    pub fn default_for(p_r: usize, p_c: usize) -> Self {
        MatrixPrior {
            delta_r: 3.0,
            delta_c: 3.0,
            d_r: DMatrix::identity(p_r, p_r),
            d_c: DMatrix::identity(p_c, p_c),
            row_graph_fixed: None,
            sigma_m_r: 0.5,
            sigma_m_c: 0.5,
            sigma_g_r: 0.5,
            sigma_g_c: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GWishartParams::new(Graph::empty(self.d_r.nrows()), self.delta_r, self.d_r.clone())?;
        GWishartParams::new(Graph::empty(self.d_c.nrows()), self.delta_c, self.d_c.clone())?;
        for (name, s) in [
            ("sigma_m_r", self.sigma_m_r),
            ("sigma_m_c", self.sigma_m_c),
            ("sigma_g_r", self.sigma_g_r),
            ("sigma_g_c", self.sigma_g_c),
        ] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {s}")));
            }
        }
        if let Some(g) = &self.row_graph_fixed {
            if g.p() != self.d_r.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: self.d_r.nrows(),
                    found: g.p(),
                });
            }
        }
        Ok(())
    }

    fn check_dims(&self, p_r: usize, p_c: usize) -> Result<()> {
        if self.d_r.nrows() != p_r {
            return Err(Error::DimensionMismatch {
                expected: p_r,
                found: self.d_r.nrows(),
            });
        }
        if self.d_c.nrows() != p_c {
            return Err(Error::DimensionMismatch {
                expected: p_c,
                found: self.d_c.nrows(),
            });
        }
        Ok(())
    }
}

/// Prior-constant caches for the two sides.
#[derive(Debug)]
pub struct MatrixConstants {
    pub row: PriorConstants,
    pub col: PriorConstants,
}

impl MatrixConstants {
    pub fn new(prior: &MatrixPrior, n_samples: usize, seed: u64) -> Result<Self> {
        Ok(MatrixConstants {
            row: PriorConstants::new(prior.delta_r, prior.d_r.clone(), n_samples, seed)?,
            col: PriorConstants::new(prior.delta_c, prior.d_c.clone(), n_samples, seed ^ 0x5a5a_5a5a)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixChainState {
    pub k_r: PrecisionMatrix,
    pub k_c: PrecisionMatrix,
    pub z: f64,
}

impl MatrixChainState {
    /// Identity precisions on empty graphs (or the fixed row graph), `z = 1`.
    pub fn initial(p_r: usize, p_c: usize, prior: &MatrixPrior) -> Result<Self> {
        let g_r = prior.row_graph_fixed.clone().unwrap_or_else(|| Graph::empty(p_r));
        Ok(MatrixChainState {
            k_r: PrecisionMatrix::new(DMatrix::identity(p_r, p_r), g_r)?,
            k_c: PrecisionMatrix::new(DMatrix::identity(p_c, p_c), Graph::empty(p_c))?,
            z: 1.0,
        })
    }

    pub fn g_r(&self) -> &Graph {
        self.k_r.graph()
    }

    pub fn g_c(&self) -> &Graph {
        self.k_c.graph()
    }

    pub fn validate(&self) -> Result<()> {
        if (self.k_c.matrix()[(0, 0)] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(
                "column precision must have (1,1) entry 1".into(),
            ));
        }
        if !(self.z > 0.0) {
            return Err(Error::InvalidParameter(format!("z must be positive, got {}", self.z)));
        }
        Ok(())
    }
}

/// `(n·p_C, Σ x K_C xᵀ)`.
pub fn row_stats(data: &MatrixData, k_c: &DMatrix<f64>) -> Result<(usize, DMatrix<f64>)> {
    if k_c.nrows() != data.p_c() {
        return Err(Error::DimensionMismatch {
            expected: data.p_c(),
            found: k_c.nrows(),
        });
    }
    let mut u = DMatrix::zeros(data.p_r(), data.p_r());
    for x in data.samples() {
        u += x * k_c * x.transpose();
    }
    Ok((data.n() * data.p_c(), symmetrize(&u)))
}

/// `(n·p_R, Σ xᵀ K_R x)`.
pub fn col_stats(data: &MatrixData, k_r: &DMatrix<f64>) -> Result<(usize, DMatrix<f64>)> {
    if k_r.nrows() != data.p_r() {
        return Err(Error::DimensionMismatch {
            expected: data.p_r(),
            found: k_r.nrows(),
        });
    }
    let mut u = DMatrix::zeros(data.p_c(), data.p_c());
    for x in data.samples() {
        u += x.transpose() * k_r * x;
    }
    Ok((data.n() * data.p_r(), symmetrize(&u)))
}

/// Row graph move (unless the row graph is fixed) and row precision sweep
/// under one relabeling.
pub fn step_row<R: Rng + ?Sized>(
    state: &MatrixChainState,
    data: &MatrixData,
    prior: &MatrixPrior,
    consts: &MatrixConstants,
    rng: &mut R,
) -> Result<(MatrixChainState, Option<RjOutcome>, AcceptStats)> {
    let (n_star, u_star) = row_stats(data, state.k_c.matrix())?;
    let d = u_star + &prior.d_r;
    let delta = n_star as f64 + prior.delta_r;
    let fixed = prior.row_graph_fixed.is_some();
    let (k, g, (rj, acc)) = with_relabeling(state.k_r.matrix(), state.g_r(), &d, false, rng, |s, ord, rng| {
        let rj = if fixed || s.p() < 2 {
            None
        } else {
            let inv = ord.inverse();
            let ctx = RjContext {
                sigma_g: prior.sigma_g_r,
                log_z: 0.0,
                consts: &consts.row,
                to_canonical: &inv,
            };
            Some(rj_move(s, &ctx, rng)?)
        };
        Ok((rj, s.sweep(delta, prior.sigma_m_r, rng)))
    })?;
    let mut out = state.clone();
    out.k_r = PrecisionMatrix::from_parts_unchecked(k, g);
    Ok((out, rj, acc))
}

fn col_centering(data: &MatrixData, state: &MatrixChainState, prior: &MatrixPrior) -> Result<(f64, DMatrix<f64>)> {
    let (n_star, u_star) = col_stats(data, state.k_r.matrix())?;
    Ok((n_star as f64 + prior.delta_c, u_star + &prior.d_c * state.z))
}

/// Column graph move with `(K_C)₁₁` held at 1. The proposal weights
/// candidates by `z^|ν|` within each half; every candidate in a half has
/// the same `|ν|`, so the weighted sums are counts times a common power of
/// `z` and the ratio reduces to the uniform one times `z^(±1)`.
pub fn step_col_graph<R: Rng + ?Sized>(
    state: &MatrixChainState,
    data: &MatrixData,
    prior: &MatrixPrior,
    consts: &MatrixConstants,
    rng: &mut R,
) -> Result<(MatrixChainState, Option<RjOutcome>)> {
    state.validate()?;
    if data.p_c() < 2 {
        return Ok((state.clone(), None));
    }
    let (_, d) = col_centering(data, state, prior)?;
    let log_z = state.z.ln();
    let (k, g, rj) = with_relabeling(state.k_c.matrix(), state.g_c(), &d, true, rng, |s, ord, rng| {
        let inv = ord.inverse();
        let ctx = RjContext {
            sigma_g: prior.sigma_g_c,
            log_z,
            consts: &consts.col,
            to_canonical: &inv,
        };
        rj_move(s, &ctx, rng)
    })?;
    let mut out = state.clone();
    out.k_c = PrecisionMatrix::from_parts_unchecked(k, g);
    Ok((out, Some(rj)))
}

/// Constrained sweep targeting `Wis_{G_C}(n·p_R + δ_C, U*_C + z D_C)`.
pub fn step_col_precision<R: Rng + ?Sized>(
    state: &MatrixChainState,
    data: &MatrixData,
    prior: &MatrixPrior,
    rng: &mut R,
) -> Result<(MatrixChainState, AcceptStats)> {
    state.validate()?;
    let (delta, d) = col_centering(data, state, prior)?;
    let (k, g, acc) = with_relabeling(state.k_c.matrix(), state.g_c(), &d, true, rng, |s, _, rng| {
        Ok(s.sweep(delta, prior.sigma_m_c, rng))
    })?;
    let mut out = state.clone();
    out.k_c = PrecisionMatrix::from_parts_unchecked(k, g);
    Ok((out, acc))
}

/// Shape and rate of the full conditional of `z`.
pub fn z_conditional(k_c: &PrecisionMatrix, d_c: &DMatrix<f64>, delta_c: f64) -> Result<(f64, f64)> {
    let p_c = k_c.p();
    let shape = p_c as f64 * (delta_c - 2.0) / 2.0 + k_c.graph().n_free() as f64;
    let rate = 0.5 * trace_inner(k_c.matrix(), d_c);
    if !(rate > 0.0) || !(shape > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "z conditional is degenerate: shape {shape}, rate {rate}"
        )));
    }
    Ok((shape, rate))
}

pub fn step_z<R: Rng + ?Sized>(state: &MatrixChainState, prior: &MatrixPrior, rng: &mut R) -> Result<MatrixChainState> {
    let (shape, rate) = z_conditional(&state.k_c, &prior.d_c, prior.delta_c)?;
    let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut out = state.clone();
    out.z = gamma.sample(rng).max(f64::MIN_POSITIVE);
    Ok(out)
}

/// Acceptance counts of every step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatrixStats {
    pub row_rj: RjStats,
    pub col_rj: RjStats,
    pub row_mh: AcceptStats,
    pub col_mh: AcceptStats,
}

/// One five-step iteration.
pub fn matrix_iteration<R: Rng + ?Sized>(
    state: &MatrixChainState,
    data: &MatrixData,
    prior: &MatrixPrior,
    consts: &MatrixConstants,
    stats: &mut MatrixStats,
    rng: &mut R,
) -> Result<MatrixChainState> {
    let (s, rj, acc) = step_row(state, data, prior, consts, rng)?;
    if let Some(o) = rj {
        stats.row_rj.record(&o);
    }
    stats.row_mh.merge(acc);
    let (s, rj) = step_col_graph(&s, data, prior, consts, rng)?;
    if let Some(o) = rj {
        stats.col_rj.record(&o);
    }
    let (s, acc) = step_col_precision(&s, data, prior, rng)?;
    stats.col_mh.merge(acc);
    step_z(&s, prior, rng)
}

/// Run length and thinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLength {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
}

impl RunLength {
    pub fn new(iters: usize, burnin: usize, thin: usize) -> Result<Self> {
        if iters <= burnin {
            return Err(Error::InvalidParameter(format!(
                "iterations ({iters}) must exceed burn-in ({burnin})"
            )));
        }
        if thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        Ok(RunLength { iters, burnin, thin })
    }

    pub fn kept(&self) -> usize {
        self.iters - self.burnin
    }

    /// Whether iteration `it` (0-based) is kept, and whether it is saved.
    pub fn keep(&self, it: usize) -> (bool, bool) {
        let kept = it >= self.burnin;
        (kept, kept && (it - self.burnin).is_multiple_of(self.thin))
    }
}

/// Post-burn-in summaries in the original labeling.
#[derive(Debug, Clone)]
pub struct MatrixTrace {
    pub row_edge_freq: DMatrix<f64>,
    pub row_edge_se: DMatrix<f64>,
    pub col_edge_freq: DMatrix<f64>,
    pub col_edge_se: DMatrix<f64>,
    pub kr_mean: DMatrix<f64>,
    pub kc_mean: DMatrix<f64>,
    /// `z` at every saved iteration.
    pub z_trace: Vec<f64>,
    pub stats: MatrixStats,
    pub final_state: MatrixChainState,
}

pub fn run_matrix_chain<R: Rng + ?Sized>(
    data: &MatrixData,
    prior: &MatrixPrior,
    run: RunLength,
    consts: &MatrixConstants,
    rng: &mut R,
) -> Result<MatrixTrace> {
    let init = MatrixChainState::initial(data.p_r(), data.p_c(), prior)?;
    run_matrix_chain_from(init, data, prior, run, consts, rng)
}

/// As [`run_matrix_chain`] from a given starting state.
pub fn run_matrix_chain_from<R: Rng + ?Sized>(
    init: MatrixChainState,
    data: &MatrixData,
    prior: &MatrixPrior,
    run: RunLength,
    consts: &MatrixConstants,
    rng: &mut R,
) -> Result<MatrixTrace> {
    prior.validate()?;
    prior.check_dims(data.p_r(), data.p_c())?;
    init.validate()?;
    let (p_r, p_c) = (data.p_r(), data.p_c());
    let mut state = init;
    let mut stats = MatrixStats::default();
    let mut row_freq = EdgeFrequency::new(p_r, run.kept(), EdgeFrequency::DEFAULT_BATCHES);
    let mut col_freq = EdgeFrequency::new(p_c, run.kept(), EdgeFrequency::DEFAULT_BATCHES);
    let mut kr_sum = DMatrix::zeros(p_r, p_r);
    let mut kc_sum = DMatrix::zeros(p_c, p_c);
    let mut z_trace = Vec::new();
    for it in 0..run.iters {
        state = matrix_iteration(&state, data, prior, consts, &mut stats, rng)?;
        let (kept, saved) = run.keep(it);
        if kept {
            row_freq.push(state.g_r());
            col_freq.push(state.g_c());
            kr_sum += state.k_r.matrix();
            kc_sum += state.k_c.matrix();
        }
        if saved {
            z_trace.push(state.z);
        }
    }
    let kept = run.kept() as f64;
    Ok(MatrixTrace {
        row_edge_freq: row_freq.frequencies(),
        row_edge_se: row_freq.std_errors(),
        col_edge_freq: col_freq.frequencies(),
        col_edge_se: col_freq.std_errors(),
        kr_mean: kr_sum / kept,
        kc_mean: kc_sum / kept,
        z_trace,
        stats,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_data(n: usize, p_r: usize, p_c: usize, seed: u64) -> MatrixData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MatrixData::new(
            (0..n)
                .map(|_| DMatrix::from_fn(p_r, p_c, |_, _| rng.sample::<f64, _>(StandardNormal)))
                .collect(),
        )
        .unwrap()
    }

    /// With no observations the column steps target the prior, under which
    /// every graph is equally likely once `z` and `K_C` are integrated out.
    #[test]
    fn column_steps_without_data_sample_uniform_graphs() {
        let data = MatrixData {
            samples: vec![],
            p_r: 1,
            p_c: 4,
        };
        let prior = MatrixPrior::default_for(1, 4);
        let consts = MatrixConstants::new(&prior, 20_000, 3).unwrap();
        let mut state = MatrixChainState::initial(1, 4, &prior).unwrap();
        let mut rng = chain_rng(11, 0);
        let iters = 60_000;
        let mut freq = EdgeFrequency::new(4, iters, 20);
        let mut size_counts = [0usize; 7];
        for _ in 0..iters {
            state = step_col_graph(&state, &data, &prior, &consts, &mut rng).unwrap().0;
            state = step_col_precision(&state, &data, &prior, &mut rng).unwrap().0;
            state = step_z(&state, &prior, &mut rng).unwrap();
            freq.push(state.g_c());
            size_counts[state.g_c().n_edges()] += 1;
        }
        let f = freq.frequencies();
        println!("{f:.3} {size_counts:?}");
        for (i, j) in Graph::empty(4).non_edges() {
            assert!((f[(i, j)] - 0.5).abs() < 0.03, "edge {i},{j}: {}", f[(i, j)]);
        }
        let binom = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
        for (k, c) in size_counts.iter().enumerate() {
            let want = binom[k] / 64.0;
            assert!((*c as f64 / iters as f64 - want).abs() < 0.03, "size {k}: {c}");
        }
    }

    #[test]
    fn row_stats_examples() {
        let data = MatrixData::new(vec![DMatrix::from_element(2, 2, 1.0)]).unwrap();
        let (n, u) = row_stats(&data, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(n, 2);
        assert_eq!(u, DMatrix::from_element(2, 2, 2.0));
        let (n, u) = col_stats(&data, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(n, 2);
        assert_eq!(u, DMatrix::from_element(2, 2, 2.0));
        assert!(row_stats(&data, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn stats_with_identity_and_duality() {
        let data = random_data(4, 3, 5, 1);
        let (_, u) = row_stats(&data, &DMatrix::identity(5, 5)).unwrap();
        let plain = data
            .samples()
            .iter()
            .fold(DMatrix::zeros(3, 3), |a, x| a + x * x.transpose());
        assert!((u - plain).amax() < 1e-12);
        let k = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.3 });
        let (nc, uc) = col_stats(&data, &k).unwrap();
        let (nt, ut) = row_stats(&data.transposed(), &k).unwrap();
        assert_eq!(nc, nt);
        assert!((&uc - &ut).amax() < 1e-12);
        assert!((&uc - uc.transpose()).amax() < 1e-12);
    }

    #[test]
    fn stacking_round_trip() {
        let data = random_data(3, 2, 4, 2);
        let back = MatrixData::from_stacked(&data.to_stacked(), 2).unwrap();
        assert_eq!(back, data);
        assert!(MatrixData::from_stacked(&data.to_stacked(), 4).is_err());
        assert!(MatrixData::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 3)]).is_err());
    }

    #[test]
    fn z_shape_arithmetic() {
        let k = PrecisionMatrix::new(DMatrix::identity(10, 10), Graph::cycle(10)).unwrap();
        let (shape, rate) = z_conditional(&k, &DMatrix::identity(10, 10), 3.0).unwrap();
        assert_eq!(shape, 25.0);
        assert_eq!(rate, 5.0);
    }

    #[test]
    fn z_draws_have_gamma_mean() {
        let prior = MatrixPrior::default_for(1, 2);
        let mut state = MatrixChainState::initial(1, 2, &prior).unwrap();
        state.k_c = state.k_c.with_graph(Graph::complete(2)).unwrap();
        let mut rng = chain_rng(3, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z = step_z(&state, &prior, &mut rng).unwrap().z;
            assert!(z > 0.0);
            sum += z;
        }
        assert!((sum / n as f64 - 4.0).abs() < 0.04);
    }

    #[test]
    fn fixed_row_graph_never_changes() {
        let data = random_data(5, 3, 3, 4);
        let mut prior = MatrixPrior::default_for(3, 3);
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        prior.row_graph_fixed = Some(g.clone());
        let consts = MatrixConstants::new(&prior, 200, 1).unwrap();
        let mut state = MatrixChainState::initial(3, 3, &prior).unwrap();
        let mut st = MatrixStats::default();
        let mut rng = chain_rng(5, 0);
        for _ in 0..200 {
            state = matrix_iteration(&state, &data, &prior, &consts, &mut st, &mut rng).unwrap();
            assert_eq!(state.g_r(), &g);
            assert!((state.k_c.matrix()[(0, 0)] - 1.0).abs() < 1e-10);
            assert!(state.z > 0.0);
        }
        assert_eq!(st.row_rj.add.proposed + st.row_rj.delete.proposed, 0);
    }

    #[test]
    fn same_seed_same_trace() {
        let data = random_data(6, 3, 4, 7);
        let prior = MatrixPrior::default_for(3, 4);
        let run = RunLength::new(200, 50, 2).unwrap();
        let go = || {
            let consts = MatrixConstants::new(&prior, 200, 9).unwrap();
            run_matrix_chain(&data, &prior, run, &consts, &mut chain_rng(1, 1)).unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a.z_trace, b.z_trace);
        assert_eq!(a.z_trace.len(), 75);
        assert_eq!(a.kr_mean, b.kr_mean);
        assert_eq!(a.col_edge_freq, b.col_edge_freq);
    }

    #[test]
    fn run_length_validation() {
        assert!(RunLength::new(10, 10, 1).is_err());
        assert!(RunLength::new(10, 0, 0).is_err());
        let r = RunLength::new(10, 4, 3).unwrap();
        assert_eq!(r.keep(3), (false, false));
        assert_eq!(r.keep(4), (true, true));
        assert_eq!(r.keep(5), (true, false));
        assert_eq!(r.keep(7), (true, true));
    }
}
