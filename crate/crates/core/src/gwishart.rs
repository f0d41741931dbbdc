//! G-Wishart density, the free-element Metropolis-Hastings sampler, a direct
//! sampler for complete graphs and the Monte Carlo estimate of the
//! normalizing constant.
//!
//! The sampler moves in `Ψ` coordinates. A diagonal free entry gets a normal
//! proposal truncated at zero and the acceptance ratio carries the
//! normal-CDF correction for the truncation; an off-diagonal free entry gets
//! a symmetric normal proposal. After each perturbation the non-free entries
//! that follow it in lexicographic order are re-completed. Every iteration
//! of [`GWishartChain`] draws a fresh vertex relabeling before sweeping so no
//! free entry is permanently first in line.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::chol::{
    complete_full, complete_rows, extract_completed, inverse_cholesky, CholFactor, CompletedPsi, FreePsi,
    PrecisionMatrix, DIAG_EPS,
};
use crate::error::{Error, Result};
use crate::graph::{free_index_set, random_ordering, relabel, Graph, VertexOrdering};
use crate::linalg::{log_det_spd, log_sum_exp, permute_sym, spd_inverse, trace_inner};

/// `Wis_G(δ, D)` with the cached factor `Q` of `D⁻¹`.
#[derive(Debug, Clone)]
pub struct GWishartParams {
    graph: Graph,
    delta: f64,
    d: DMatrix<f64>,
    q: CholFactor,
}

impl GWishartParams {
    pub fn new(graph: Graph, delta: f64, d: DMatrix<f64>) -> Result<Self> {
        if !(delta > 2.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must exceed 2, got {delta}"
            )));
        }
        if d.nrows() != graph.p() || d.ncols() != graph.p() {
            return Err(Error::DimensionMismatch {
                expected: graph.p(),
                found: d.nrows(),
            });
        }
        let q = inverse_cholesky(&d)?;
        Ok(GWishartParams { graph, delta, d, q })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn q(&self) -> &CholFactor {
        &self.q
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }
}

/// Proposal scales: `sigma_m` for precision updates, `sigma_g` for the
/// dimension-matching draw of graph moves, `sigma_latent` for latent-field
/// updates in the Poisson model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub sigma_m: f64,
    pub sigma_g: f64,
    pub sigma_latent: f64,
}

impl StepSizes {
    pub fn new(sigma_m: f64, sigma_g: f64, sigma_latent: f64) -> Result<Self> {
        for (name, s) in [
            ("sigma_m", sigma_m),
            ("sigma_g", sigma_g),
            ("sigma_latent", sigma_latent),
        ] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(StepSizes {
            sigma_m,
            sigma_g,
            sigma_latent,
        })
    }
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            sigma_m: 0.5,
            sigma_g: 0.5,
            sigma_latent: 0.5,
        }
    }
}

/// `((δ - 2)/2) log det K - ⟨K, D⟩/2`.
pub fn log_density_unnorm(k: &PrecisionMatrix, params: &GWishartParams) -> Result<f64> {
    let km = k.matrix();
    if k.p() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: k.p(),
        });
    }
    let g = params.graph();
    let scale = (0..g.p()).map(|i| km[(i, i)].abs()).fold(1.0, f64::max);
    for (i, j) in g.non_edges() {
        if km[(i, j)].abs() > crate::chol::ZERO_TOL * scale {
            return Err(Error::ConeViolation {
                i: i + 1,
                j: j + 1,
                value: km[(i, j)],
            });
        }
    }
    let log_det = log_det_spd(km)?;
    Ok(0.5 * (params.delta - 2.0) * log_det - 0.5 * trace_inner(km, &params.d))
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Acceptance counts for a batch of Metropolis-Hastings updates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptStats {
    pub accepted: u64,
    pub proposed: u64,
}

impl AcceptStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn rejection_rate(&self) -> f64 {
        1.0 - self.rate()
    }

    pub fn merge(&mut self, other: AcceptStats) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// A candidate produced by toggling one edge.
#[derive(Debug, Clone)]
pub(crate) struct EdgeToggle {
    pub graph: Graph,
    pub c: CompletedPsi,
    pub old_entry: f64,
    pub new_entry: f64,
    pub delta_sum_sq: f64,
}

/// Working state of a chain in one vertex labeling: the graph, `Q` for the
/// current centering matrix and the completed `Ψ`/`Φ` pair.
#[derive(Debug, Clone)]
pub(crate) struct PsiState {
    pub graph: Graph,
    pub q: DMatrix<f64>,
    pub c: CompletedPsi,
    pub pinned: bool,
    v: Vec<usize>,
    scratch: CompletedPsi,
}

impl PsiState {
    /// Expresses `k` (already in this labeling) in the coordinates defined by
    /// `q`. With `pinned`, `Ψ₁₁` is set to `1/Q₁₁` so that `K₁₁ = 1`.
    pub fn from_precision(k: &DMatrix<f64>, graph: Graph, q: CholFactor, pinned: bool) -> Result<Self> {
        let mut c = extract_completed(k, &graph, &q)?;
        if pinned {
            c.psi[(0, 0)] = 1.0 / q.diag(0);
        }
        let q = q.matrix().clone();
        // Re-complete so the non-free entries are exactly the completion of
        // the free ones rather than their round-off perturbed values.
        complete_rows(&mut c.psi, &mut c.phi, &graph, &q, 0, pinned)?;
        Ok(Self::assemble_state(graph, q, c, pinned))
    }

    pub fn from_free(free: &FreePsi, q: &CholFactor, pinned: bool) -> Result<Self> {
        let c = complete_full(free, q, pinned)?;
        Ok(Self::assemble_state(
            free.graph().clone(),
            q.matrix().clone(),
            c,
            pinned,
        ))
    }

    fn assemble_state(graph: Graph, q: DMatrix<f64>, c: CompletedPsi, pinned: bool) -> Self {
        let v = free_index_set(&graph).v;
        let scratch = c.clone();
        PsiState {
            graph,
            q,
            c,
            pinned,
            v,
            scratch,
        }
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    fn row_sum_sq(m: &DMatrix<f64>, from: usize) -> f64 {
        let p = m.nrows();
        let mut s = 0.0;
        for i in from..p {
            for j in i..p {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        s
    }

    /// Copies rows `from..` of the current state into scratch.
    fn prepare_scratch(&mut self, from: usize) {
        let p = self.p();
        for i in from..p {
            for j in i..p {
                self.scratch.psi[(i, j)] = self.c.psi[(i, j)];
                self.scratch.phi[(i, j)] = self.c.phi[(i, j)];
            }
        }
    }

    fn accept_scratch(&mut self, from: usize) {
        let p = self.p();
        for i in from..p {
            for j in i..p {
                self.c.psi[(i, j)] = self.scratch.psi[(i, j)];
                self.c.phi[(i, j)] = self.scratch.phi[(i, j)];
            }
        }
    }

    /// One Metropolis-Hastings pass over the free entries in lexicographic
    /// order, targeting `Wis_G(δ, D)` with `Q` the factor of `D⁻¹`.
    pub fn sweep<R: Rng + ?Sized>(&mut self, delta: f64, sigma: f64, rng: &mut R) -> AcceptStats {
        let p = self.p();
        let mut stats = AcceptStats::default();
        for i0 in 0..p {
            for j0 in i0..p {
                if j0 != i0 && !self.graph.has_edge(i0, j0) {
                    continue;
                }
                if i0 == 0 && j0 == 0 && self.pinned {
                    continue;
                }
                stats.proposed += 1;
                if self.update_entry(i0, j0, delta, sigma, rng) {
                    stats.accepted += 1;
                }
            }
        }
        stats
    }

    fn update_entry<R: Rng + ?Sized>(&mut self, i0: usize, j0: usize, delta: f64, sigma: f64, rng: &mut R) -> bool {
        let current = self.c.psi[(i0, j0)];
        let proposal = if i0 == j0 {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                let g = current + sigma * z;
                if g > 0.0 {
                    break g;
                }
            }
        } else {
            current + sigma * rng.sample::<f64, _>(StandardNormal)
        };
        if i0 == j0 && proposal <= DIAG_EPS {
            let _: f64 = rng.random();
            return false;
        }
        self.prepare_scratch(i0);
        self.scratch.psi[(i0, j0)] = proposal;
        if complete_rows(
            &mut self.scratch.psi,
            &mut self.scratch.phi,
            &self.graph,
            &self.q,
            i0,
            self.pinned,
        )
        .is_err()
        {
            self.prepare_scratch(i0);
            let _: f64 = rng.random();
            return false;
        }
        let old_sq = Self::row_sum_sq(&self.c.psi, i0);
        let new_sq = Self::row_sum_sq(&self.scratch.psi, i0);
        let mut log_r = -0.5 * (new_sq - old_sq);
        if i0 == j0 {
            let exponent = self.v[i0] as f64 + delta - 1.0;
            log_r += exponent * (proposal.ln() - current.ln());
            log_r += std_normal_cdf(current / sigma).ln() - std_normal_cdf(proposal / sigma).ln();
        }
        let u: f64 = rng.random();
        if u.ln() < log_r {
            self.accept_scratch(i0);
            true
        } else {
            // Later updates read the rows above their own from scratch.
            self.prepare_scratch(i0);
            false
        }
    }

    /// Builds the candidate obtained by adding (`gamma = Some`) or deleting
    /// (`gamma = None`) the edge `(i0, j0)`, `i0 < j0`.
    pub fn toggle_edge(&self, i0: usize, j0: usize, gamma: Option<f64>) -> Result<EdgeToggle> {
        debug_assert!(i0 < j0);
        let graph = match gamma {
            Some(_) => self.graph.with_edge(i0, j0),
            None => self.graph.without_edge(i0, j0),
        };
        let mut c = self.c.clone();
        if let Some(g) = gamma {
            c.psi[(i0, j0)] = g;
        }
        complete_rows(&mut c.psi, &mut c.phi, &graph, &self.q, i0, self.pinned)?;
        let delta_sum_sq = Self::row_sum_sq(&c.psi, i0) - Self::row_sum_sq(&self.c.psi, i0);
        Ok(EdgeToggle {
            graph,
            old_entry: self.c.psi[(i0, j0)],
            new_entry: c.psi[(i0, j0)],
            c,
            delta_sum_sq,
        })
    }

    pub fn accept_toggle(&mut self, t: EdgeToggle) {
        self.v = free_index_set(&t.graph).v;
        self.graph = t.graph;
        self.c = t.c;
        self.scratch = self.c.clone();
    }

    /// `Φᵀ Φ` with non-edges set to exactly zero.
    pub fn precision(&self) -> DMatrix<f64> {
        let mut k = self.c.precision();
        let p = self.p();
        for i in 0..p {
            for j in (i + 1)..p {
                if self.graph.has_edge(i, j) {
                    let s = 0.5 * (k[(i, j)] + k[(j, i)]);
                    k[(i, j)] = s;
                    k[(j, i)] = s;
                } else {
                    k[(i, j)] = 0.0;
                    k[(j, i)] = 0.0;
                }
            }
        }
        if self.pinned {
            k[(0, 0)] = 1.0;
        }
        k
    }

    pub fn free_psi(&self) -> FreePsi {
        FreePsi::new(self.graph.clone(), self.c.psi.clone()).expect("state keeps a positive diagonal")
    }
}

/// One sweep over the free entries of `free` in its own labeling.
///
/// With `constrain_11` the `(1,1)` entry is held at `1/Q₁₁` (it must already
/// hold that value) so every state has `K₁₁ = 1`.
pub fn mh_sweep<R: Rng + ?Sized>(
    free: &FreePsi,
    params: &GWishartParams,
    sigma_m: f64,
    constrain_11: bool,
    rng: &mut R,
) -> Result<(FreePsi, usize)> {
    if free.graph() != params.graph() {
        return Err(Error::InvalidGraph(
            "free elements and parameters refer to different graphs".into(),
        ));
    }
    if !(sigma_m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_m must be positive, got {sigma_m}"
        )));
    }
    if constrain_11 {
        let want = 1.0 / params.q().diag(0);
        if (free.get(0, 0) - want).abs() > 1e-10 * want {
            return Err(Error::InvalidParameter(format!(
                "constrained sweep needs Psi_11 = 1/Q_11 = {want}, got {}",
                free.get(0, 0)
            )));
        }
    }
    let mut state = PsiState::from_free(free, params.q(), constrain_11)?;
    let stats = state.sweep(params.delta(), sigma_m, rng);
    Ok((state.free_psi(), stats.accepted as usize))
}

/// Draws a relabeling, re-expresses `k` in it against centering `d`, runs
/// `f` on the working state and maps the result back.
pub(crate) fn with_relabeling<R, F, T>(
    k: &DMatrix<f64>,
    graph: &Graph,
    d: &DMatrix<f64>,
    pinned: bool,
    rng: &mut R,
    f: F,
) -> Result<(DMatrix<f64>, Graph, T)>
where
    R: Rng + ?Sized,
    F: FnOnce(&mut PsiState, &VertexOrdering, &mut R) -> Result<T>,
{
    let ord = random_ordering(graph.p(), pinned, rng);
    let g_rel = relabel(graph, &ord)?;
    let q = inverse_cholesky(&permute_sym(d, &ord))?;
    let mut state = PsiState::from_precision(&permute_sym(k, &ord), g_rel, q, pinned)?;
    let out = f(&mut state, &ord, rng)?;
    let inv = ord.inverse();
    let k_new = permute_sym(&state.precision(), &inv);
    let g_new = relabel(&state.graph, &inv)?;
    Ok((k_new, g_new, out))
}

/// A G-Wishart Markov chain. Each call to `next` performs one iteration:
/// random relabeling, refactorization of `D⁻¹` and a full sweep.
pub struct GWishartChain<'a, R: Rng> {
    params: &'a GWishartParams,
    sigma_m: f64,
    constrain_11: bool,
    k: DMatrix<f64>,
    rng: R,
    stats: AcceptStats,
    remaining: usize,
}

impl<'a, R: Rng> GWishartChain<'a, R> {
    pub fn new(params: &'a GWishartParams, sigma_m: f64, constrain_11: bool, rng: R) -> Result<Self> {
        if !(sigma_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_m must be positive, got {sigma_m}"
            )));
        }
        let d_inv = spd_inverse(params.d())?;
        let mut diag: Vec<f64> = (0..params.p()).map(|i| params.delta() * d_inv[(i, i)]).collect();
        if constrain_11 {
            let s = diag[0];
            diag.iter_mut().for_each(|x| *x /= s);
            diag[0] = 1.0;
        }
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        Ok(GWishartChain {
            params,
            sigma_m,
            constrain_11,
            k,
            rng,
            stats: AcceptStats::default(),
            remaining: usize::MAX,
        })
    }

    /// Limits the chain to `iters` iterations.
    pub fn take_iters(mut self, iters: usize) -> Self {
        self.remaining = iters;
        self
    }

    /// Starts from `k` instead of the default diagonal state.
    pub fn with_initial(mut self, k: &PrecisionMatrix) -> Result<Self> {
        let k = k.with_graph(self.params.graph().clone())?;
        if self.constrain_11 && (k.matrix()[(0, 0)] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter("constrained chain needs K_11 = 1".into()));
        }
        self.k = k.into_matrix();
        Ok(self)
    }

    pub fn stats(&self) -> AcceptStats {
        self.stats
    }

    pub fn step(&mut self) -> Result<PrecisionMatrix> {
        let (delta, sigma) = (self.params.delta(), self.sigma_m);
        let (k, g, stats) = with_relabeling(
            &self.k,
            self.params.graph(),
            self.params.d(),
            self.constrain_11,
            &mut self.rng,
            |state, _, rng| Ok(state.sweep(delta, sigma, rng)),
        )?;
        self.stats.merge(stats);
        self.k = k;
        Ok(PrecisionMatrix::from_parts_unchecked(self.k.clone(), g))
    }
}

impl<R: Rng> Iterator for GWishartChain<'_, R> {
    type Item = Result<PrecisionMatrix>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.step())
    }
}

/// Runs `iters` iterations and collects every state.
pub fn sample_chain<R: Rng>(
    params: &GWishartParams,
    iters: usize,
    sigma_m: f64,
    constrain_11: bool,
    rng: R,
) -> Result<(Vec<PrecisionMatrix>, AcceptStats)> {
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    let mut chain = GWishartChain::new(params, sigma_m, constrain_11, rng)?.take_iters(iters);
    let draws = chain.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((draws, chain.stats()))
}

/// Exact draw from the Wishart law that `Wis_G(δ, D)` reduces to on the
/// complete graph: chi-distributed diagonal and standard normal upper
/// triangle in `Ψ` coordinates.
pub fn sample_wishart_complete<R: Rng + ?Sized>(delta: f64, d: &DMatrix<f64>, rng: &mut R) -> Result<PrecisionMatrix> {
    let params = GWishartParams::new(Graph::complete(d.nrows()), delta, d.clone())?;
    let p = params.p();
    let mut psi = DMatrix::zeros(p, p);
    for i in 0..p {
        let dof = (p - 1 - i) as f64 + delta;
        let chi2 = ChiSquared::new(dof).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        psi[(i, i)] = chi2.sample(rng).sqrt();
        for j in (i + 1)..p {
            psi[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let phi = &psi * params.q().matrix();
    Ok(PrecisionMatrix::from_parts_unchecked(
        crate::linalg::symmetrize(&phi.tr_mul(&phi)),
        params.graph().clone(),
    ))
}

/// `log I_G(δ, D)` and its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConstEstimate {
    pub log_value: f64,
    pub std_error: f64,
}

/// Log of the factor of `I_G(δ, D)` that is available in closed form:
/// `2^p ∏ Q_ii^(v_i+d_i+δ)` times the chi and Gaussian integrals over the
/// free entries.
pub fn log_norm_const_closed_part(params: &GWishartParams) -> f64 {
    let g = params.graph();
    let fis = free_index_set(g);
    let delta = params.delta();
    let ln2 = std::f64::consts::LN_2;
    let mut s = g.p() as f64 * ln2;
    for i in 0..g.p() {
        let a = fis.v[i] as f64 + delta;
        s += (fis.v[i] + fis.d[i]) as f64 * params.q().diag(i).ln() + delta * params.q().diag(i).ln();
        s += (0.5 * a - 1.0) * ln2 + ln_gamma(0.5 * a);
    }
    s + 0.5 * g.n_edges() as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Importance-sampling estimate of the G-Wishart normalizing constant: the
/// free entries are drawn from their chi / normal reference laws, completed,
/// and `exp(-½ Σ_nonfree Ψ_ij²)` is averaged.
pub fn log_norm_const_mc<R: Rng + ?Sized>(params: &GWishartParams, n: usize, rng: &mut R) -> Result<NormConstEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let closed = log_norm_const_closed_part(params);
    let g = params.graph();
    let non_free = g.non_edges();
    if non_free.is_empty() {
        return Ok(NormConstEstimate {
            log_value: closed,
            std_error: 0.0,
        });
    }
    let p = g.p();
    let fis = free_index_set(g);
    let chis = (0..p)
        .map(|i| ChiSquared::new(fis.v[i] as f64 + params.delta()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let q = params.q().matrix();
    let mut psi = DMatrix::zeros(p, p);
    let mut phi = DMatrix::zeros(p, p);
    let mut log_w = Vec::with_capacity(n);
    for _ in 0..n {
        for i in 0..p {
            psi[(i, i)] = chis[i].sample(rng).sqrt().max(f64::MIN_POSITIVE);
            for j in (i + 1)..p {
                if g.has_edge(i, j) {
                    psi[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        complete_rows(&mut psi, &mut phi, g, q, 0, false)?;
        let s: f64 = non_free.iter().map(|&(i, j)| psi[(i, j)] * psi[(i, j)]).sum();
        log_w.push(-0.5 * s);
    }
    let lse = log_sum_exp(&log_w);
    let log_mean = lse - (n as f64).ln();
    // Relative standard error of the mean weight.
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_w.iter().map(|x| (x - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        scaled.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(NormConstEstimate {
        log_value: closed + log_mean,
        std_error: var.sqrt() / (mean * (n as f64).sqrt()),
    })
}
