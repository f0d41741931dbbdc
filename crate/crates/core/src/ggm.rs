//! Joint sampling of `(K, G)` for i.i.d. Gaussian data: a balanced
//! add/delete edge proposal with reversible-jump acceptance, followed by a
//! G-Wishart sweep of the precision matrix. Also an exact enumeration of the
//! graph posterior for very small `p`, used as an oracle.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chol::PrecisionMatrix;
use crate::diagnostics::EdgeFrequency;
use crate::error::{Error, Result};
use crate::graph::{relabel, Graph, VertexOrdering};
use crate::gwishart::{log_norm_const_mc, with_relabeling, AcceptStats, GWishartParams, PsiState};
use crate::linalg::{log_sum_exp, spd_inverse, symmetrize};
use crate::rng::{chain_rng, mix64};

/// `U = Σ x xᵀ` and the sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    u: DMatrix<f64>,
    n: usize,
}

impl SufficientStats {
    pub fn new(u: DMatrix<f64>, n: usize) -> Result<Self> {
        if u.nrows() != u.ncols() {
            return Err(Error::DimensionMismatch {
                expected: u.nrows(),
                found: u.ncols(),
            });
        }
        let scale = u.amax().max(1.0);
        if (&u - u.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidParameter(
                "sum-of-products matrix is not symmetric".into(),
            ));
        }
        Ok(SufficientStats { u: symmetrize(&u), n })
    }

    /// From an `n × p` data matrix (one observation per row).
    pub fn from_data(x: &DMatrix<f64>) -> Result<Self> {
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                if !x[(r, c)].is_finite() {
                    return Err(Error::NonFiniteData { row: r + 1, col: c + 1 });
                }
            }
        }
        Ok(SufficientStats {
            u: symmetrize(&x.tr_mul(x)),
            n: x.nrows(),
        })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.u.nrows()
    }
}

/// `Wis_G(δ₀, D₀)` prior on `K` given `G`; the graph prior is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct GgmPrior {
    pub delta0: f64,
    pub d0: DMatrix<f64>,
}

impl GgmPrior {
    pub fn new(delta0: f64, d0: DMatrix<f64>) -> Result<Self> {
        // Validation of δ₀ and D₀ is shared with the G-Wishart parameters.
        GWishartParams::new(Graph::empty(d0.nrows()), delta0, d0.clone())?;
        Ok(GgmPrior { delta0, d0 })
    }

    /// `δ₀ = 3`, `D₀ = I_p`.
    pub fn default_for(p: usize) -> Self {
        GgmPrior {
            delta0: 3.0,
            d0: DMatrix::identity(p, p),
        }
    }

    fn posterior_d(&self, stats: &SufficientStats) -> Result<DMatrix<f64>> {
        if stats.p() != self.d0.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.d0.nrows(),
                found: stats.p(),
            });
        }
        Ok(stats.u() + &self.d0)
    }
}

/// Current `(K, G)`; the graph is the one carried by `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GgmChainState {
    pub k: PrecisionMatrix,
}

impl GgmChainState {
    pub fn graph(&self) -> &Graph {
        self.k.graph()
    }

    /// Empty graph with `K` the diagonal of `(n + δ₀)(U + D₀)⁻¹`.
    pub fn initial(stats: &SufficientStats, prior: &GgmPrior) -> Result<Self> {
        let dinv = spd_inverse(&prior.posterior_d(stats)?)?;
        let scale = stats.n() as f64 + prior.delta0;
        let diag: Vec<f64> = (0..stats.p()).map(|i| scale * dinv[(i, i)]).collect();
        Ok(GgmChainState {
            k: PrecisionMatrix::diagonal(&diag, Graph::empty(stats.p()))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Add,
    Delete,
}

/// A one-edge move and the probabilities of proposing it and its reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphProposal {
    pub graph: Graph,
    pub edge: (usize, usize),
    pub kind: MoveKind,
    pub forward_prob: f64,
    pub reverse_prob: f64,
}

/// Probability of proposing one specific move of `kind` from `g`. Each
/// half gets mass ½ unless the other half is empty, in which case it gets
/// all of it.
pub fn move_prob(g: &Graph, kind: MoveKind) -> f64 {
    let n_add = g.n_pairs() - g.n_edges();
    let n_del = g.n_edges();
    let (this, other) = match kind {
        MoveKind::Add => (n_add, n_del),
        MoveKind::Delete => (n_del, n_add),
    };
    if this == 0 {
        0.0
    } else if other == 0 {
        1.0 / this as f64
    } else {
        0.5 / this as f64
    }
}

pub fn propose_graph<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<GraphProposal> {
    if g.p() < 2 {
        return Err(Error::InvalidGraph(
            "graphs on fewer than 2 vertices have no neighbors".into(),
        ));
    }
    let n_add = g.n_pairs() - g.n_edges();
    let n_del = g.n_edges();
    let kind = if n_add == 0 {
        MoveKind::Delete
    } else if n_del == 0 || rng.random_bool(0.5) {
        MoveKind::Add
    } else {
        MoveKind::Delete
    };
    let (edge, graph, reverse) = match kind {
        MoveKind::Add => {
            let e = *g.non_edges().choose(rng).expect("non-empty");
            (e, g.with_edge(e.0, e.1), MoveKind::Delete)
        }
        MoveKind::Delete => {
            let e = *g.edges().choose(rng).expect("non-empty");
            (e, g.without_edge(e.0, e.1), MoveKind::Add)
        }
    };
    Ok(GraphProposal {
        forward_prob: move_prob(g, kind),
        reverse_prob: move_prob(&graph, reverse),
        graph,
        edge,
        kind,
    })
}

/// Memoized `log I_G(δ, D)` per labeled graph.
///
/// Each graph's estimate uses its own RNG stream derived from the base
/// seed and the edge set, so the value is independent of lookup order and
/// of which chain asks first.
#[derive(Debug)]
pub struct PriorConstants {
    params: Option<(f64, DMatrix<f64>)>,
    n_samples: usize,
    seed: u64,
    cache: Mutex<HashMap<Graph, f64>>,
}

impl PriorConstants {
    pub const DEFAULT_SAMPLES: usize = 10_000;

    pub fn new(delta: f64, d: DMatrix<f64>, n_samples: usize, seed: u64) -> Result<Self> {
        GWishartParams::new(Graph::empty(d.nrows()), delta, d.clone())?;
        if n_samples == 0 {
            return Err(Error::InvalidParameter(
                "constant sample count must be at least 1".into(),
            ));
        }
        Ok(PriorConstants {
            params: Some((delta, d)),
            n_samples,
            seed,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// A fixed table; looking up a graph that is not in it is an error.
    pub fn from_table(table: HashMap<Graph, f64>) -> Self {
        PriorConstants {
            params: None,
            n_samples: 0,
            seed: 0,
            cache: Mutex::new(table),
        }
    }

    fn graph_seed(&self, g: &Graph) -> u64 {
        g.edges().iter().fold(mix64(self.seed, g.p() as u64), |h, &(i, j)| {
            mix64(h, (i * g.p() + j) as u64 + 1)
        })
    }

    pub fn log_const(&self, g: &Graph) -> Result<f64> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(g) {
            return Ok(*v);
        }
        let Some((delta, d)) = &self.params else {
            return Err(Error::MissingPriorConstant(g.to_string()));
        };
        let params = GWishartParams::new(g.clone(), *delta, d.clone())?;
        let mut rng = chain_rng(self.graph_seed(g), 0);
        let est = log_norm_const_mc(&params, self.n_samples, &mut rng)?;
        self.cache.lock().expect("cache lock").insert(g.clone(), est.log_value);
        Ok(est.log_value)
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of one graph move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RjOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    pub log_ratio: f64,
}

/// Acceptance counts split by move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RjStats {
    pub add: AcceptStats,
    pub delete: AcceptStats,
}

impl RjStats {
    pub fn record(&mut self, o: &RjOutcome) {
        let s = match o.kind {
            MoveKind::Add => &mut self.add,
            MoveKind::Delete => &mut self.delete,
        };
        s.proposed += 1;
        s.accepted += o.accepted as u64;
    }

    pub fn merge(&mut self, other: RjStats) {
        self.add.merge(other.add);
        self.delete.merge(other.delete);
    }
}

/// Inputs of a reversible-jump move that do not live in the `Ψ` state.
pub(crate) struct RjContext<'a> {
    pub sigma_g: f64,
    /// `log z` for the column sampler's `z^|ν(G)|` weight, 0 otherwise.
    pub log_z: f64,
    pub consts: &'a PriorConstants,
    /// Maps the working labels back to the labels the constants are keyed on.
    pub to_canonical: &'a VertexOrdering,
}

/// `log` of the add-move ratio for a proposal from `state` that sets the new
/// free entry to `gamma`; the delete-move ratio is its reciprocal evaluated
/// from the larger graph.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rj_log_ratio(
    state: &PsiState,
    edge: (usize, usize),
    kind: MoveKind,
    delta_sum_sq: f64,
    old_entry: f64,
    new_entry: f64,
    sigma_g: f64,
    log_const_ratio: f64,
    log_proposal_ratio: f64,
    log_z: f64,
) -> f64 {
    let (i0, j0) = edge;
    let log_prefactor = (sigma_g * (2.0 * std::f64::consts::PI).sqrt()).ln()
        + state.q[(i0, i0)].ln()
        + state.q[(j0, j0)].ln()
        + state.c.psi[(i0, i0)].ln();
    let jump = (new_entry - old_entry).powi(2) / (sigma_g * sigma_g);
    match kind {
        MoveKind::Add => log_prefactor + log_const_ratio + log_proposal_ratio + log_z - 0.5 * (delta_sum_sq - jump),
        MoveKind::Delete => -log_prefactor + log_const_ratio + log_proposal_ratio - log_z - 0.5 * (delta_sum_sq + jump),
    }
}

/// One add/delete move on the working state. `state.q` must factor the
/// inverse of the posterior centering matrix in the working labels.
pub(crate) fn rj_move<R: Rng + ?Sized>(state: &mut PsiState, ctx: &RjContext, rng: &mut R) -> Result<RjOutcome> {
    let prop = propose_graph(&state.graph, rng)?;
    let (i0, j0) = prop.edge;
    let gamma = match prop.kind {
        MoveKind::Add => Some(state.c.psi[(i0, j0)] + ctx.sigma_g * rng.sample::<f64, _>(StandardNormal)),
        MoveKind::Delete => None,
    };
    let u: f64 = rng.random();
    let toggle = match state.toggle_edge(i0, j0, gamma) {
        Ok(t) => t,
        Err(_) => {
            return Ok(RjOutcome {
                kind: prop.kind,
                accepted: false,
                log_ratio: f64::NEG_INFINITY,
            })
        }
    };
    let canon_cur = relabel(&state.graph, ctx.to_canonical)?;
    let canon_new = relabel(&toggle.graph, ctx.to_canonical)?;
    let log_const_ratio = ctx.consts.log_const(&canon_cur)? - ctx.consts.log_const(&canon_new)?;
    let log_ratio = rj_log_ratio(
        state,
        prop.edge,
        prop.kind,
        toggle.delta_sum_sq,
        toggle.old_entry,
        toggle.new_entry,
        ctx.sigma_g,
        log_const_ratio,
        prop.reverse_prob.ln() - prop.forward_prob.ln(),
        ctx.log_z,
    );
    let accepted = u.ln() < log_ratio;
    if accepted {
        debug_assert!({ (0..state.p()).all(|i| state.c.psi[(i, i)] == toggle.c.psi[(i, i)]) });
        state.accept_toggle(toggle);
    }
    Ok(RjOutcome {
        kind: prop.kind,
        accepted,
        log_ratio,
    })
}

/// Step 1 alone: a graph move under a fresh relabeling.
pub fn rj_graph_update<R: Rng + ?Sized>(
    state: &GgmChainState,
    stats: &SufficientStats,
    prior: &GgmPrior,
    sigma_g: f64,
    consts: &PriorConstants,
    rng: &mut R,
) -> Result<(GgmChainState, RjOutcome)> {
    let d = prior.posterior_d(stats)?;
    let (k, g, out) = with_relabeling(state.k.matrix(), state.graph(), &d, false, rng, |s, ord, rng| {
        let inv = ord.inverse();
        let ctx = RjContext {
            sigma_g,
            log_z: 0.0,
            consts,
            to_canonical: &inv,
        };
        rj_move(s, &ctx, rng)
    })?;
    Ok((
        GgmChainState {
            k: PrecisionMatrix::from_parts_unchecked(k, g),
        },
        out,
    ))
}

/// Step 2 alone: a sweep targeting `Wis_G(n + δ₀, U + D₀)`.
pub fn precision_update<R: Rng + ?Sized>(
    state: &GgmChainState,
    stats: &SufficientStats,
    prior: &GgmPrior,
    sigma_m: f64,
    rng: &mut R,
) -> Result<(GgmChainState, AcceptStats)> {
    let d = prior.posterior_d(stats)?;
    let delta = stats.n() as f64 + prior.delta0;
    let (k, g, acc) = with_relabeling(state.k.matrix(), state.graph(), &d, false, rng, |s, _, rng| {
        Ok(s.sweep(delta, sigma_m, rng))
    })?;
    Ok((
        GgmChainState {
            k: PrecisionMatrix::from_parts_unchecked(k, g),
        },
        acc,
    ))
}

/// Both steps under a single relabeling.
pub fn ggm_iteration<R: Rng + ?Sized>(
    state: &GgmChainState,
    stats: &SufficientStats,
    prior: &GgmPrior,
    steps: (f64, f64),
    consts: &PriorConstants,
    rng: &mut R,
) -> Result<(GgmChainState, RjOutcome, AcceptStats)> {
    let (sigma_m, sigma_g) = steps;
    let d = prior.posterior_d(stats)?;
    let delta = stats.n() as f64 + prior.delta0;
    let (k, g, (rj, acc)) = with_relabeling(state.k.matrix(), state.graph(), &d, false, rng, |s, ord, rng| {
        let inv = ord.inverse();
        let ctx = RjContext {
            sigma_g,
            log_z: 0.0,
            consts,
            to_canonical: &inv,
        };
        let rj = rj_move(s, &ctx, rng)?;
        Ok((rj, s.sweep(delta, sigma_m, rng)))
    })?;
    Ok((
        GgmChainState {
            k: PrecisionMatrix::from_parts_unchecked(k, g),
        },
        rj,
        acc,
    ))
}

/// Run length, thinning and proposal scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub sigma_m: f64,
    pub sigma_g: f64,
    /// Keep the thinned post-burn-in states.
    pub save_samples: bool,
}

impl ChainConfig {
    pub fn new(iters: usize, burnin: usize) -> Self {
        ChainConfig {
            iters,
            burnin,
            thin: 1,
            sigma_m: 0.5,
            sigma_g: 0.5,
            save_samples: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::InvalidParameter(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        for (name, s) in [("sigma_m", self.sigma_m), ("sigma_g", self.sigma_g)] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        self.iters - self.burnin
    }
}

/// Post-burn-in summaries of a GGM chain in the original labeling.
#[derive(Debug, Clone)]
pub struct GgmTrace {
    pub edge_freq: DMatrix<f64>,
    pub edge_freq_se: DMatrix<f64>,
    pub k_mean: DMatrix<f64>,
    pub samples: Vec<PrecisionMatrix>,
    pub rj: RjStats,
    pub mh: AcceptStats,
    pub final_state: GgmChainState,
}

pub fn run_ggm_chain<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    prior: &GgmPrior,
    config: &ChainConfig,
    consts: &PriorConstants,
    rng: &mut R,
) -> Result<GgmTrace> {
    if data.nrows() == 0 || data.ncols() < 2 {
        return Err(Error::InvalidParameter(
            "need at least 1 observation of at least 2 variables".into(),
        ));
    }
    let stats = SufficientStats::from_data(data)?;
    run_ggm_chain_stats(&stats, prior, config, consts, rng)
}

/// As [`run_ggm_chain`], from sufficient statistics.
pub fn run_ggm_chain_stats<R: Rng + ?Sized>(
    stats: &SufficientStats,
    prior: &GgmPrior,
    config: &ChainConfig,
    consts: &PriorConstants,
    rng: &mut R,
) -> Result<GgmTrace> {
    config.validate()?;
    let p = stats.p();
    let mut state = GgmChainState::initial(stats, prior)?;
    let mut freq = EdgeFrequency::new(p, config.kept(), EdgeFrequency::DEFAULT_BATCHES);
    let mut k_sum = DMatrix::zeros(p, p);
    let mut samples = Vec::new();
    let mut rj_stats = RjStats::default();
    let mut mh = AcceptStats::default();
    for it in 0..config.iters {
        let (next, rj, acc) = ggm_iteration(&state, stats, prior, (config.sigma_m, config.sigma_g), consts, rng)?;
        state = next;
        rj_stats.record(&rj);
        mh.merge(acc);
        if it >= config.burnin {
            freq.push(state.graph());
            k_sum += state.k.matrix();
            if config.save_samples && (it - config.burnin).is_multiple_of(config.thin) {
                samples.push(state.k.clone());
            }
        }
    }
    Ok(GgmTrace {
        edge_freq: freq.frequencies(),
        edge_freq_se: freq.std_errors(),
        k_mean: k_sum / config.kept() as f64,
        samples,
        rj: rj_stats,
        mh,
        final_state: state,
    })
}

/// Exact graph posterior for small `p`, from normalizing-constant
/// estimates of every graph.
#[derive(Debug, Clone)]
pub struct EnumeratedPosterior {
    /// Every graph on `p` vertices with its posterior probability.
    pub graphs: Vec<(Graph, f64)>,
    pub edge_probs: DMatrix<f64>,
}

pub const MAX_ENUMERATION_P: usize = 4;

/// Every graph on `p` labeled vertices.
pub fn all_graphs(p: usize) -> Vec<Graph> {
    let pairs = Graph::empty(p).non_edges();
    (0u64..(1u64 << pairs.len()))
        .map(|mask| {
            let chosen: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, e)| *e)
                .collect();
            Graph::from_edges(p, &chosen).expect("valid pairs")
        })
        .collect()
}

/// Marginal likelihood of each graph is `I_G(n+δ₀, U+D₀) / I_G(δ₀, D₀)`
/// times `(2π)^(-np/2)`; the graph prior is uniform.
pub fn enumerate_posterior<R: Rng + ?Sized>(
    stats: &SufficientStats,
    prior: &GgmPrior,
    mc_n: usize,
    rng: &mut R,
) -> Result<EnumeratedPosterior> {
    let p = stats.p();
    if p > MAX_ENUMERATION_P {
        return Err(Error::InvalidParameter(format!(
            "enumeration supports p <= {MAX_ENUMERATION_P}, got {p}"
        )));
    }
    let d_post = prior.posterior_d(stats)?;
    let delta_post = stats.n() as f64 + prior.delta0;
    let graphs = all_graphs(p);
    let mut log_post = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let post = GWishartParams::new(g.clone(), delta_post, d_post.clone())?;
        let pri = GWishartParams::new(g.clone(), prior.delta0, prior.d0.clone())?;
        // Common random numbers for the two constants of a graph.
        let seed: u64 = rng.random();
        let lp = log_norm_const_mc(&post, mc_n, &mut chain_rng(seed, 0))?.log_value
            - log_norm_const_mc(&pri, mc_n, &mut chain_rng(seed, 0))?.log_value;
        log_post.push(lp - 0.5 * (stats.n() * p) as f64 * (2.0 * std::f64::consts::PI).ln());
    }
    let lse = log_sum_exp(&log_post);
    let probs: Vec<f64> = log_post.iter().map(|l| (l - lse).exp()).collect();
    let mut edge_probs = DMatrix::zeros(p, p);
    for (g, w) in graphs.iter().zip(&probs) {
        for &(i, j) in g.edges() {
            edge_probs[(i, j)] += w;
            edge_probs[(j, i)] += w;
        }
    }
    Ok(EnumeratedPosterior {
        graphs: graphs.into_iter().zip(probs).collect(),
        edge_probs,
    })
}
