//! Lattice models. A proximity matrix `W` over regions gives a proper CAR
//! precision `τ⁻²(E_W − ρW)`, which is used as the mode of a G-Wishart prior
//! on the row precision of a matrix-variate GGM. Two hierarchical samplers
//! sit on top: a Gaussian regression with spatially correlated residuals
//! and a Poisson log-linear model with spatial random effects and
//! imputation of low counts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chol::PrecisionMatrix;
use crate::diagnostics::{quantile, EdgeFrequency};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::gwishart::AcceptStats;
use crate::linalg::{cholesky_lower, sample_mvn_precision, spd_inverse, symmetrize};
use crate::matrix::{
    matrix_iteration, MatrixChainState, MatrixConstants, MatrixData, MatrixPrior, MatrixStats, RunLength,
};

/// Regions and their 0/1 neighbor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    graph: Graph,
    w: DMatrix<f64>,
    row_sums: DVector<f64>,
}

impl Lattice {
    pub fn from_graph(graph: Graph) -> Self {
        let p = graph.p();
        let w = DMatrix::from_fn(p, p, |i, j| if graph.has_edge(i, j) { 1.0 } else { 0.0 });
        let row_sums = DVector::from_fn(p, |i, _| graph.degree(i) as f64);
        Lattice { graph, w, row_sums }
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Neighbor counts `w_{i+}`.
    pub fn row_sums(&self) -> &DVector<f64> {
        &self.row_sums
    }

    pub fn e_w(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.row_sums)
    }

    pub fn n_components(&self) -> usize {
        self.graph.n_components()
    }

    /// 0-based indices of regions without neighbors.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.p()).filter(|&i| self.row_sums[i] == 0.0).collect()
    }

    /// Open interval of `ρ` for which `E_W − ρW` is positive definite:
    /// the reciprocals of the extreme eigenvalues of `E_W^{-1/2} W E_W^{-1/2}`.
    /// Isolated regions are left out of the scaling.
    pub fn rho_interval(&self) -> (f64, f64) {
        let s = self.row_sums.map(|r| if r > 0.0 { 1.0 / r.sqrt() } else { 0.0 });
        let scaled = DMatrix::from_fn(self.p(), self.p(), |i, j| s[i] * self.w[(i, j)] * s[j]);
        let eig = SymmetricEigen::new(scaled).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let inv = |l: f64, inf: f64| if l.abs() < 1e-12 { inf } else { 1.0 / l };
        (inv(lo, f64::NEG_INFINITY), inv(hi, f64::INFINITY))
    }

    /// Short human-readable description: sizes, components and isolated regions.
    pub fn report(&self) -> String {
        let iso = self.isolated();
        let mut s = format!(
            "regions: {}\nneighbor pairs: {}\nconnected components: {}\n",
            self.p(),
            self.graph.n_edges(),
            self.n_components()
        );
        if !iso.is_empty() {
            let labels: Vec<String> = iso.iter().map(|i| (i + 1).to_string()).collect();
            s.push_str(&format!("isolated regions (w_i+ = 0): {}\n", labels.join(" ")));
        }
        s
    }
}

/// Lattice from a 1-based edge list over `p_r` regions.
pub fn build_lattice(adjacency: &str, p_r: usize) -> Result<Lattice> {
    Ok(Lattice::from_graph(Graph::parse_edge_list(adjacency, p_r)?))
}

/// Proper CAR prior and the G-Wishart centering built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CarPrior {
    pub rho: f64,
    pub tau2: f64,
    pub delta: f64,
    /// `(δ − 2)·τ²(E_W − ρW)⁻¹`.
    pub centering: DMatrix<f64>,
    /// `τ⁻²(E_W − ρW)`, the prior mode of the precision.
    pub mode: DMatrix<f64>,
    graph: Graph,
}

impl CarPrior {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Residuals of the mode system: the largest deviation of `mode⁻¹` from
    /// `centering/(δ − 2)` over the diagonal and lattice edges, and the
    /// largest absolute mode entry at non-edges.
    pub fn mode_residuals(&self) -> Result<(f64, f64)> {
        let inv = spd_inverse(&self.mode)?;
        let target = &self.centering / (self.delta - 2.0);
        let p = self.mode.nrows();
        let mut free = 0.0f64;
        let mut zeros = 0.0f64;
        for i in 0..p {
            for j in i..p {
                if i == j || self.graph.has_edge(i, j) {
                    free = free.max((inv[(i, j)] - target[(i, j)]).abs());
                } else {
                    zeros = zeros.max(self.mode[(i, j)].abs());
                }
            }
        }
        Ok((free, zeros))
    }

    pub fn mode_precision(&self) -> Result<PrecisionMatrix> {
        PrecisionMatrix::new(self.mode.clone(), self.graph.clone())
    }
}

/// `τ² = w_{1+}`, the neighbor count of the first region.
pub fn default_tau2(lattice: &Lattice) -> f64 {
    lattice.row_sums()[0]
}

pub fn car_centering(lattice: &Lattice, rho: f64, tau2: f64, delta: f64) -> Result<CarPrior> {
    let iso = lattice.isolated();
    if let Some(&i) = iso.first() {
        return Err(Error::InvalidParameter(format!(
            "region {} has no neighbors, so E_W - rho W is singular; connect it to a neighbor or drop it",
            i + 1
        )));
    }
    if !(tau2 > 0.0) || !tau2.is_finite() {
        return Err(Error::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
    }
    if !(delta > 2.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must exceed 2, got {delta}")));
    }
    let (lo, hi) = lattice.rho_interval();
    if !(rho > lo && rho < hi) {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} lies outside the validity interval ({lo}, {hi})"
        )));
    }
    let kernel = lattice.e_w() - lattice.w() * rho;
    cholesky_lower(&kernel)?;
    let centering = symmetrize(&(spd_inverse(&kernel)? * ((delta - 2.0) * tau2)));
    Ok(CarPrior {
        rho,
        tau2,
        delta,
        centering,
        mode: kernel / tau2,
        graph: lattice.graph().clone(),
    })
}

/// Mean and variance of `x_i` given every other region under precision `k`.
pub fn car_full_conditional(k: &PrecisionMatrix, x: &DVector<f64>, i: usize) -> (f64, f64) {
    let m = k.matrix();
    let kii = m[(i, i)];
    let mean = -k.graph().neighbors(i).map(|l| m[(i, l)] * x[l]).sum::<f64>() / kii;
    (mean, 1.0 / kii)
}

/// Autoregression weights `b_il = −K_il/K_ii` and conditional variances
/// `1/K_ii` implied by a precision matrix.
pub fn car_weights(k: &PrecisionMatrix) -> (DMatrix<f64>, DVector<f64>) {
    let m = k.matrix();
    let p = k.p();
    let b = DMatrix::from_fn(p, p, |i, l| if i == l { 0.0 } else { -m[(i, l)] / m[(i, i)] });
    (b, DVector::from_fn(p, |i, _| 1.0 / m[(i, i)]))
}

/// `MatrixPrior` for a spatial model: the row graph is held at the lattice
/// graph and centered at the CAR prior; columns get `δ_C = 3` and identity
/// centering.
pub fn spatial_matrix_prior(car: &CarPrior, p_c: usize) -> MatrixPrior {
    let mut prior = MatrixPrior::default_for(car.centering.nrows(), p_c);
    prior.delta_r = car.delta;
    prior.d_r = car.centering.clone();
    prior.row_graph_fixed = Some(car.graph().clone());
    prior
}

fn require_fixed_rows(prior: &MatrixPrior, p_r: usize) -> Result<()> {
    match &prior.row_graph_fixed {
        Some(g) if g.p() == p_r => Ok(()),
        Some(g) => Err(Error::DimensionMismatch {
            expected: p_r,
            found: g.p(),
        }),
        None => Err(Error::InvalidParameter(
            "spatial models need the row graph fixed to the lattice graph".into(),
        )),
    }
}

/// Design matrix and independent normal priors `β_j ~ N(b_j, Ω_j⁻¹)`, one
/// per outcome column.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    design: DMatrix<f64>,
    b: Vec<DVector<f64>>,
    omega: Vec<DMatrix<f64>>,
}

impl RegressionSpec {
    pub fn new(design: DMatrix<f64>, b: Vec<DVector<f64>>, omega: Vec<DMatrix<f64>>) -> Result<Self> {
        let q = design.ncols();
        if b.len() != omega.len() || b.is_empty() {
            return Err(Error::InvalidParameter(
                "need one prior mean and one prior precision per outcome".into(),
            ));
        }
        for (bj, oj) in b.iter().zip(&omega) {
            if bj.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: bj.len(),
                });
            }
            if oj.nrows() != q || oj.ncols() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: oj.nrows(),
                });
            }
            cholesky_lower(oj)?;
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("design matrix has non-finite entries".into()));
        }
        Ok(RegressionSpec { design, b, omega })
    }

    /// Rows `(1, z_i, z_i²)` with priors `b_j = (550, 0, 0)` and
    /// `Ω_j⁻¹ = diag(225, 10, 10)` for each of `p_c` outcomes.
    pub fn quadratic(z: &DVector<f64>, p_c: usize) -> Result<Self> {
        let design = quadratic_design(z);
        let b = DVector::from_vec(vec![550.0, 0.0, 0.0]);
        let omega = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 225.0, 0.1, 0.1]));
        Self::new(design, vec![b; p_c], vec![omega; p_c])
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn prior_mean(&self, j: usize) -> &DVector<f64> {
        &self.b[j]
    }

    pub fn prior_precision(&self, j: usize) -> &DMatrix<f64> {
        &self.omega[j]
    }

    pub fn n_outcomes(&self) -> usize {
        self.b.len()
    }

    pub fn n_coef(&self) -> usize {
        self.design.ncols()
    }

    /// `q × p_C` matrix whose columns are the prior means.
    pub fn prior_means(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.b)
    }
}

pub fn quadratic_design(z: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(z.len(), 3, |i, c| z[i].powi(c as i32))
}

/// Full conditional `N(mean, precision⁻¹)` of `β_j` given the other
/// coefficient columns under `vec(Yᵀ) ~ N(vec((Zβ)ᵀ), (K_R ⊗ K_C)⁻¹)`.
///
/// Column `j` of the residual given the others has mean
/// `−Σ_{l≠j} (K_C)_jl/(K_C)_jj · x_l` and precision `(K_C)_jj K_R`.
pub fn beta_conditional(
    y: &DMatrix<f64>,
    spec: &RegressionSpec,
    beta: &DMatrix<f64>,
    k_r: &DMatrix<f64>,
    k_c: &DMatrix<f64>,
    j: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let z = spec.design();
    let kjj = k_c[(j, j)];
    let resid = y - z * beta;
    let mut target = y.column(j).into_owned();
    for l in 0..y.ncols() {
        if l != j && k_c[(j, l)] != 0.0 {
            target += resid.column(l) * (k_c[(j, l)] / kjj);
        }
    }
    let zt_kr = z.transpose() * k_r;
    let omega = &spec.omega[j];
    let precision = symmetrize(&(&zt_kr * z * kjj + omega));
    let rhs = &zt_kr * target * kjj + omega * &spec.b[j];
    let chol = precision
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
    Ok((chol.solve(&rhs), precision))
}

/// Draws every `β_j` in turn from its full conditional.
pub fn beta_step<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    spec: &RegressionSpec,
    beta: &mut DMatrix<f64>,
    k_r: &DMatrix<f64>,
    k_c: &DMatrix<f64>,
    rng: &mut R,
) -> Result<()> {
    for j in 0..y.ncols() {
        let (mean, prec) = beta_conditional(y, spec, beta, k_r, k_c, j)?;
        let draw = sample_mvn_precision(&mean, &prec, rng)?;
        beta.set_column(j, &draw);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GaussianTrace {
    /// One row per saved iteration; column `j·q + k` holds `β_kj`.
    pub beta_trace: DMatrix<f64>,
    pub beta_mean: DMatrix<f64>,
    pub beta_sd: DMatrix<f64>,
    /// Posterior mean of `Zβ`.
    pub fitted: DMatrix<f64>,
    pub col_edge_freq: DMatrix<f64>,
    pub col_edge_se: DMatrix<f64>,
    pub kr_mean: DMatrix<f64>,
    pub kc_mean: DMatrix<f64>,
    pub z_trace: Vec<f64>,
    pub stats: MatrixStats,
    pub final_state: MatrixChainState,
    pub final_beta: DMatrix<f64>,
}

fn check_outcome_matrix(y: &DMatrix<f64>, prior: &MatrixPrior) -> Result<()> {
    if y.ncols() != prior.d_c.nrows() {
        return Err(Error::DimensionMismatch {
            expected: prior.d_c.nrows(),
            found: y.ncols(),
        });
    }
    if y.nrows() != prior.d_r.nrows() {
        return Err(Error::DimensionMismatch {
            expected: prior.d_r.nrows(),
            found: y.nrows(),
        });
    }
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            if !y[(i, j)].is_finite() {
                return Err(Error::NonFiniteData { row: i + 1, col: j + 1 });
            }
        }
    }
    Ok(())
}

/// Regression `Y = Zβ + X` with matrix-variate GGM residuals whose row
/// graph is the lattice graph. Each iteration draws every `β_j`, then runs
/// the matrix-GGM steps on the residual matrix as a single observation.
/// The chain starts at `β = b` and identity precisions.
pub fn gaussian_mcar_regression<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    spec: &RegressionSpec,
    prior: &MatrixPrior,
    run: RunLength,
    consts: &MatrixConstants,
    rng: &mut R,
) -> Result<GaussianTrace> {
    prior.validate()?;
    check_outcome_matrix(y, prior)?;
    require_fixed_rows(prior, y.nrows())?;
    if spec.design().nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: y.nrows(),
            found: spec.design().nrows(),
        });
    }
    if spec.n_outcomes() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: y.ncols(),
            found: spec.n_outcomes(),
        });
    }
    let (p_r, p_c, q) = (y.nrows(), y.ncols(), spec.n_coef());
    let mut state = MatrixChainState::initial(p_r, p_c, prior)?;
    let mut beta = spec.prior_means();
    let mut stats = MatrixStats::default();
    let mut col_freq = EdgeFrequency::new(p_c, run.kept(), EdgeFrequency::DEFAULT_BATCHES);
    let mut kr_sum = DMatrix::zeros(p_r, p_r);
    let mut kc_sum = DMatrix::zeros(p_c, p_c);
    let mut b_sum = DMatrix::zeros(q, p_c);
    let mut b_sq = DMatrix::zeros(q, p_c);
    let mut saved = Vec::new();
    let mut z_trace = Vec::new();
    for it in 0..run.iters {
        beta_step(y, spec, &mut beta, state.k_r.matrix(), state.k_c.matrix(), rng)?;
        let resid = y - spec.design() * &beta;
        let data = MatrixData::new(vec![resid])?;
        state = matrix_iteration(&state, &data, prior, consts, &mut stats, rng)?;
        let (kept, save) = run.keep(it);
        if kept {
            col_freq.push(state.g_c());
            kr_sum += state.k_r.matrix();
            kc_sum += state.k_c.matrix();
            b_sum += &beta;
            b_sq += beta.component_mul(&beta);
        }
        if save {
            saved.extend(beta.iter().cloned());
            z_trace.push(state.z);
        }
    }
    let kept = run.kept() as f64;
    let beta_mean = &b_sum / kept;
    let beta_sd = (b_sq / kept - beta_mean.component_mul(&beta_mean)).map(|v| v.max(0.0).sqrt());
    Ok(GaussianTrace {
        beta_trace: DMatrix::from_row_slice(z_trace.len(), q * p_c, &saved),
        fitted: spec.design() * &beta_mean,
        beta_mean,
        beta_sd,
        col_edge_freq: col_freq.frequencies(),
        col_edge_se: col_freq.std_errors(),
        kr_mean: kr_sum / kept,
        kc_mean: kc_sum / kept,
        z_trace,
        stats,
        final_state: state,
        final_beta: beta,
    })
}

/// Counts `Y` (`p_R × p_C`) and region populations `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountData {
    counts: DMatrix<f64>,
    populations: DVector<f64>,
}

impl CountData {
    pub fn new(counts: DMatrix<f64>, populations: DVector<f64>) -> Result<Self> {
        if populations.len() != counts.nrows() {
            return Err(Error::DimensionMismatch {
                expected: counts.nrows(),
                found: populations.len(),
            });
        }
        for j in 0..counts.ncols() {
            for i in 0..counts.nrows() {
                let y = counts[(i, j)];
                if !y.is_finite() {
                    return Err(Error::NonFiniteData { row: i + 1, col: j + 1 });
                }
                if y < 0.0 || y.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "count at row {}, column {} is not a nonnegative integer: {y}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if let Some(i) = populations.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "population of region {} must be positive, got {}",
                i + 1,
                populations[i]
            )));
        }
        Ok(CountData { counts, populations })
    }

    pub fn counts(&self) -> &DMatrix<f64> {
        &self.counts
    }

    pub fn populations(&self) -> &DVector<f64> {
        &self.populations
    }

    pub fn p_r(&self) -> usize {
        self.counts.nrows()
    }

    pub fn p_c(&self) -> usize {
        self.counts.ncols()
    }

    /// `log((Y_ij + 0.5)/m_i)`.
    pub fn raw_log_rates(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p_r(), self.p_c(), |i, j| {
            ((self.counts[(i, j)] + 0.5) / self.populations[i]).ln()
        })
    }

    /// Cells whose count is below `threshold`, row-major. A zero threshold
    /// masks nothing.
    pub fn censored_cells(&self, threshold: u64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p_r() {
            for j in 0..self.p_c() {
                if self.counts[(i, j)] < threshold as f64 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Prior on the intercepts `μ ~ N(μ₀, Ω⁻¹)` and latent-update settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonPrior {
    pub mu0: DVector<f64>,
    pub omega: DMatrix<f64>,
    pub sigma_latent: f64,
    /// Counts below this are resampled; 0 disables imputation.
    pub threshold: u64,
}

impl PoissonPrior {
    /// `μ₀ = median` and `ω = 2·IQR` of the raw log rates, `Ω = ω⁻² I`.
    /// A zero IQR falls back to `ω = 1`.
    pub fn from_data(data: &CountData, sigma_latent: f64, threshold: u64) -> Self {
        let (mu0, omega) = default_mu_hyper(data);
        let p_c = data.p_c();
        PoissonPrior {
            mu0: DVector::from_element(p_c, mu0),
            omega: DMatrix::identity(p_c, p_c) / (omega * omega),
            sigma_latent,
            threshold,
        }
    }

    pub fn validate(&self, p_c: usize) -> Result<()> {
        if self.mu0.len() != p_c {
            return Err(Error::DimensionMismatch {
                expected: p_c,
                found: self.mu0.len(),
            });
        }
        if self.omega.nrows() != p_c || self.omega.ncols() != p_c {
            return Err(Error::DimensionMismatch {
                expected: p_c,
                found: self.omega.nrows(),
            });
        }
        cholesky_lower(&self.omega)?;
        if !(self.sigma_latent > 0.0) || !self.sigma_latent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_latent must be positive, got {}",
                self.sigma_latent
            )));
        }
        Ok(())
    }
}

/// `(median, 2·IQR)` of the raw log rates.
pub fn default_mu_hyper(data: &CountData) -> (f64, f64) {
    let rates: Vec<f64> = data.raw_log_rates().iter().cloned().collect();
    let med = quantile(&rates, 0.5);
    let iqr = quantile(&rates, 0.75) - quantile(&rates, 0.25);
    (med, if iqr > 0.0 { 2.0 * iqr } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmState {
    pub mu: DVector<f64>,
    /// `X̃_ij = μ_j + X_ij`.
    pub latent: DMatrix<f64>,
    /// Observed counts with censored cells replaced by their current draws.
    pub counts: DMatrix<f64>,
    pub matrix: MatrixChainState,
}

impl GlmState {
    /// `μ = μ₀`, latent field at the raw log rates, identity precisions.
    pub fn initial(data: &CountData, prior: &PoissonPrior, mprior: &MatrixPrior) -> Result<Self> {
        Ok(GlmState {
            mu: prior.mu0.clone(),
            latent: data.raw_log_rates(),
            counts: data.counts().clone(),
            matrix: MatrixChainState::initial(data.p_r(), data.p_c(), mprior)?,
        })
    }

    /// `X̃ − 1μᵀ`.
    pub fn centered(&self) -> DMatrix<f64> {
        let mut x = self.latent.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mu[j]);
        }
        x
    }
}

/// Full conditional `N(mean, precision⁻¹)` of `μ` with precision
/// `(1ᵀK_R1)K_C + p_R Ω` and mean `precision⁻¹[K_C X̃ᵀK_R 1 + p_R Ω μ₀]`.
pub fn mu_conditional(
    latent: &DMatrix<f64>,
    k_r: &DMatrix<f64>,
    k_c: &DMatrix<f64>,
    prior: &PoissonPrior,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p_r = latent.nrows() as f64;
    let kr_one = DVector::from_fn(k_r.nrows(), |i, _| k_r.row(i).sum());
    let precision = symmetrize(&(k_c * kr_one.sum() + &prior.omega * p_r));
    let rhs = k_c * (latent.transpose() * kr_one) + &prior.omega * &prior.mu0 * p_r;
    let chol = precision
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
    Ok((chol.solve(&rhs), precision))
}

pub fn mu_full_conditional<R: Rng + ?Sized>(
    state: &GlmState,
    prior: &PoissonPrior,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (mean, prec) = mu_conditional(
        &state.latent,
        state.matrix.k_r.matrix(),
        state.matrix.k_c.matrix(),
        prior,
    )?;
    sample_mvn_precision(&mean, &prec, rng)
}

/// Conditional prior mean `M_i` of latent row `i` given the other rows.
pub fn latent_prior_mean(latent: &DMatrix<f64>, mu: &DVector<f64>, k_r: &PrecisionMatrix, i: usize) -> DVector<f64> {
    let m = k_r.matrix();
    let mut out = mu.clone();
    for l in k_r.graph().neighbors(i) {
        let w = m[(i, l)] / m[(i, i)];
        for j in 0..mu.len() {
            out[j] -= w * (latent[(l, j)] - mu[j]);
        }
    }
    out
}

/// Random-walk Metropolis update of each entry of latent row `i` against
/// the Poisson likelihood `Y_ij X̃_ij − m_i exp(X̃_ij)` and the conditional
/// prior `N(M_i, ((K_R)_ii K_C)⁻¹)`.
pub fn latent_row_update<R: Rng + ?Sized>(
    state: &mut GlmState,
    populations: &DVector<f64>,
    i: usize,
    sigma: f64,
    rng: &mut R,
) -> AcceptStats {
    let k_r = &state.matrix.k_r;
    let k_c = state.matrix.k_c.matrix();
    let scale = k_r.matrix()[(i, i)];
    let target = latent_prior_mean(&state.latent, &state.mu, k_r, i);
    let m_i = populations[i];
    let mut r: DVector<f64> = state.latent.row(i).transpose() - &target;
    let mut stats = AcceptStats::default();
    for j in 0..state.mu.len() {
        let x = state.latent[(i, j)];
        let gamma = x + sigma * rng.sample::<f64, _>(StandardNormal);
        let d = gamma - x;
        let y = state.counts[(i, j)];
        let lik = y * d - m_i * (gamma.exp() - x.exp());
        let quad = scale * (2.0 * d * k_c.column(j).dot(&r) + d * d * k_c[(j, j)]);
        let log_ratio = lik - 0.5 * quad;
        stats.proposed += 1;
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            state.latent[(i, j)] = gamma;
            r[j] += d;
            stats.accepted += 1;
        }
    }
    stats
}

/// One draw from Poisson(`rate`) restricted to `{0, …, threshold − 1}`, by
/// inversion of the normalized log-space mass function.
pub fn truncated_poisson_sample<R: Rng + ?Sized>(rate: f64, threshold: u64, rng: &mut R) -> Result<u64> {
    if threshold == 0 {
        return Err(Error::Imputation("threshold must be at least 1".into()));
    }
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::Imputation(format!(
            "Poisson rate {rate} is not a finite nonnegative number"
        )));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let ln_rate = rate.ln();
    let mut logw = Vec::with_capacity(threshold as usize);
    let mut ln_fact = 0.0;
    for k in 0..threshold {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        logw.push(k as f64 * ln_rate - ln_fact);
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Imputation(format!(
            "truncated mass at rate {rate} is degenerate"
        )));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk;
        if u < acc {
            return Ok(k as u64);
        }
    }
    Ok(threshold - 1)
}

/// Redraws every masked count from its truncated Poisson given the current
/// latent field. An empty mask draws nothing.
pub fn impute_low_counts<R: Rng + ?Sized>(
    state: &mut GlmState,
    mask: &[(usize, usize)],
    threshold: u64,
    populations: &DVector<f64>,
    rng: &mut R,
) -> Result<()> {
    for &(i, j) in mask {
        let rate = populations[i] * state.latent[(i, j)].exp();
        state.counts[(i, j)] = truncated_poisson_sample(rate, threshold, rng).map_err(|e| match e {
            Error::Imputation(msg) => Error::Imputation(format!("cell ({}, {}): {msg}", i + 1, j + 1)),
            other => other,
        })? as f64;
    }
    Ok(())
}

/// Posterior summary of one censored cell (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationSummary {
    pub row: usize,
    pub col: usize,
    pub observed: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ImputationSummary {
    /// Median and central 95% interval of `draws`.
    pub fn from_draws(row: usize, col: usize, observed: f64, draws: &[f64]) -> Self {
        ImputationSummary {
            row,
            col,
            observed,
            median: quantile(draws, 0.5),
            lower: quantile(draws, 0.025),
            upper: quantile(draws, 0.975),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonTrace {
    /// One row per saved iteration.
    pub mu_trace: DMatrix<f64>,
    pub mu_mean: DMatrix<f64>,
    /// Posterior mean of `exp(X̃_ij)`, the rate per unit population.
    pub fitted: DMatrix<f64>,
    pub imputations: Vec<ImputationSummary>,
    /// Post-burn-in draws of each censored cell, in the order of `imputations`.
    pub imputation_draws: Vec<Vec<f64>>,
    pub col_edge_freq: DMatrix<f64>,
    pub col_edge_se: DMatrix<f64>,
    pub kr_mean: DMatrix<f64>,
    pub kc_mean: DMatrix<f64>,
    pub z_trace: Vec<f64>,
    pub stats: MatrixStats,
    pub latent_mh: AcceptStats,
    pub final_state: GlmState,
}

/// One iteration: `μ`, latent rows, imputation, then the matrix-GGM steps
/// on `X̃ − 1μᵀ` as a single observation.
pub fn poisson_iteration<R: Rng + ?Sized>(
    state: &mut GlmState,
    data: &CountData,
    prior: &PoissonPrior,
    mprior: &MatrixPrior,
    consts: &MatrixConstants,
    mask: &[(usize, usize)],
    stats: &mut MatrixStats,
    latent_mh: &mut AcceptStats,
    rng: &mut R,
) -> Result<()> {
    state.mu = mu_full_conditional(state, prior, rng)?;
    for i in 0..data.p_r() {
        latent_mh.merge(latent_row_update(state, data.populations(), i, prior.sigma_latent, rng));
    }
    impute_low_counts(state, mask, prior.threshold, data.populations(), rng)?;
    let x = MatrixData::new(vec![state.centered()])?;
    state.matrix = matrix_iteration(&state.matrix, &x, mprior, consts, stats, rng)?;
    Ok(())
}

pub fn poisson_mcar_glm<R: Rng + ?Sized>(
    data: &CountData,
    prior: &PoissonPrior,
    mprior: &MatrixPrior,
    run: RunLength,
    consts: &MatrixConstants,
    rng: &mut R,
) -> Result<PoissonTrace> {
    let (p_r, p_c) = (data.p_r(), data.p_c());
    mprior.validate()?;
    check_outcome_matrix(data.counts(), mprior)?;
    require_fixed_rows(mprior, p_r)?;
    prior.validate(p_c)?;
    let mask = data.censored_cells(prior.threshold);
    let mut state = GlmState::initial(data, prior, mprior)?;
    let mut stats = MatrixStats::default();
    let mut latent_mh = AcceptStats::default();
    let mut col_freq = EdgeFrequency::new(p_c, run.kept(), EdgeFrequency::DEFAULT_BATCHES);
    let mut kr_sum = DMatrix::zeros(p_r, p_r);
    let mut kc_sum = DMatrix::zeros(p_c, p_c);
    let mut mu_sum = DMatrix::zeros(1, p_c);
    let mut rate_sum = DMatrix::zeros(p_r, p_c);
    let mut imputed: Vec<Vec<f64>> = vec![Vec::with_capacity(run.kept()); mask.len()];
    let mut mu_saved = Vec::new();
    let mut z_trace = Vec::new();
    for it in 0..run.iters {
        poisson_iteration(
            &mut state,
            data,
            prior,
            mprior,
            consts,
            &mask,
            &mut stats,
            &mut latent_mh,
            rng,
        )?;
        let (kept, save) = run.keep(it);
        if kept {
            col_freq.push(state.matrix.g_c());
            kr_sum += state.matrix.k_r.matrix();
            kc_sum += state.matrix.k_c.matrix();
            mu_sum += state.mu.transpose();
            rate_sum += state.latent.map(f64::exp);
            for (draws, &(i, j)) in imputed.iter_mut().zip(&mask) {
                draws.push(state.counts[(i, j)]);
            }
        }
        if save {
            mu_saved.extend(state.mu.iter().cloned());
            z_trace.push(state.matrix.z);
        }
    }
    let kept = run.kept() as f64;
    let imputations = mask
        .iter()
        .zip(&imputed)
        .map(|(&(i, j), draws)| ImputationSummary::from_draws(i, j, data.counts()[(i, j)], draws))
        .collect();
    Ok(PoissonTrace {
        imputation_draws: imputed,
        mu_trace: DMatrix::from_row_slice(z_trace.len(), p_c, &mu_saved),
        mu_mean: mu_sum / kept,
        fitted: rate_sum / kept,
        imputations,
        col_edge_freq: col_freq.frequencies(),
        col_edge_se: col_freq.std_errors(),
        kr_mean: kr_sum / kept,
        kc_mean: kc_sum / kept,
        z_trace,
        stats,
        latent_mh,
        final_state: state,
    })
}
