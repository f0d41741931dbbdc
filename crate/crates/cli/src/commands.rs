use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gwish::diagnostics::convergence_report;
use gwish::ggm::{run_ggm_chain_stats, ChainConfig, GgmPrior, GgmTrace, PriorConstants, SufficientStats};
use gwish::graph::Graph;
use gwish::gwishart::{AcceptStats, GWishartChain, GWishartParams};
use gwish::io::{
    generate_simulation_fixture, load_matrix_csv, load_square_or_identity, matrix_to_csv, upper_triangle,
    upper_triangle_header, write_text,
};
use gwish::matrix::{run_matrix_chain, MatrixConstants, MatrixData, MatrixPrior, MatrixStats, MatrixTrace, RunLength};
use gwish::rng::{chain_rng, mix64, RNG_NAME};
use gwish::spatial::{
    build_lattice, car_centering, default_tau2, gaussian_mcar_regression, poisson_mcar_glm, spatial_matrix_prior,
    CountData, ImputationSummary, Lattice, PoissonPrior, RegressionSpec,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::{
    CarArgs, GgmArgs, MatrixArgs, MatrixSteps, ReportArgs, RunArgs, SampleArgs, SimulateArgs, SpatialGaussianArgs,
    SpatialPoissonArgs,
};

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input, invalid model settings.
    Usage(String),
    /// The sampler hit a numerical failure after a valid setup.
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

trait Phase<T> {
    fn usage(self) -> Result<T, CliError>;
    fn numeric(self) -> Result<T, CliError>;
}

impl<T> Phase<T> for gwish::Result<T> {
    fn usage(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Usage(e.to_string()))
    }

    fn numeric(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Numeric(e.to_string()))
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// Seed for the prior-constant caches, kept apart from the chain streams.
fn const_seed(seed: u64) -> u64 {
    mix64(seed, 0x6e6f_726d_636f_6e73)
}

fn run_length(r: &RunArgs) -> Result<RunLength, CliError> {
    if r.chains == 0 {
        return usage("--chains must be at least 1");
    }
    if r.mc_const_n == 0 {
        return usage("--mc-const-n must be at least 1");
    }
    RunLength::new(r.iters, r.burnin, r.thin).usage()
}

/// Runs `f(chain)` for every chain in parallel; results keep chain order.
fn par_chains<T: Send>(chains: usize, f: impl Fn(u64) -> gwish::Result<T> + Sync) -> Result<Vec<T>, CliError> {
    (0..chains as u64)
        .into_par_iter()
        .map(|c| f(c).map_err(|e| CliError::Numeric(format!("chain {}: {e}", c + 1))))
        .collect()
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))
}

struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn csv(&self, name: &str, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_text(&path, &matrix_to_csv(m, header)).usage()?;
        Ok(path)
    }

    fn text(&self, name: &str, s: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_text(&path, s).usage()?;
        Ok(path)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// A single row or column of numbers.
fn load_vector(path: &Path) -> Result<DVector<f64>, CliError> {
    let m = load_matrix_csv(path).usage()?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        usage(format!(
            "{}: expected a single row or column, found {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        ))
    }
}

fn load_lattice(path: &Path, p_r: usize) -> Result<Lattice, CliError> {
    let text = read_text(path)?;
    build_lattice(&text, p_r).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn mean_of(ms: impl Iterator<Item = DMatrix<f64>>) -> DMatrix<f64> {
    let v: Vec<DMatrix<f64>> = ms.collect();
    let n = v.len() as f64;
    v.into_iter().reduce(|a, b| a + b).expect("at least one chain") / n
}

fn chain_header(chains: usize) -> Vec<String> {
    (1..=chains).map(|c| format!("chain_{c}")).collect()
}

fn run_header(cmd: &str, r: &RunArgs) -> String {
    format!(
        "command: {cmd}\nrng: {RNG_NAME}\nseed: {}\nchains: {}\niterations: {}\nburn-in: {}\nthin: {}\nprior constant samples: {}\n",
        r.seed, r.chains, r.iters, r.burnin, r.thin, r.mc_const_n
    )
}

fn rate_line(name: &str, a: &AcceptStats) -> String {
    format!(
        "{name}: accepted {} of {} (acceptance {:.4})\n",
        a.accepted,
        a.proposed,
        a.rate()
    )
}

/// Side-by-side z traces, one column per chain.
fn z_matrix(traces: &[Vec<f64>]) -> DMatrix<f64> {
    let n = traces[0].len();
    DMatrix::from_fn(n, traces.len(), |i, c| traces[c][i])
}

fn convergence_section(traces: &[Vec<f64>]) -> Result<String, CliError> {
    if traces.len() < 2 {
        return Ok(String::new());
    }
    let rep = convergence_report(traces).numeric()?;
    Ok(format!("\nrunning mean of z by iteration\n{}", rep.to_table()))
}

fn matrix_stats_section(stats: &[MatrixStats], fixed_rows: bool) -> String {
    let mut s = String::new();
    for (c, st) in stats.iter().enumerate() {
        let _ = writeln!(s, "chain {}", c + 1);
        if !fixed_rows {
            s.push_str(&rate_line("  row graph add", &st.row_rj.add));
            s.push_str(&rate_line("  row graph delete", &st.row_rj.delete));
        }
        s.push_str(&rate_line("  column graph add", &st.col_rj.add));
        s.push_str(&rate_line("  column graph delete", &st.col_rj.delete));
        let _ = writeln!(s, "  row precision rejection rate: {:.4}", st.row_mh.rejection_rate());
        let _ = writeln!(
            s,
            "  column precision rejection rate: {:.4}",
            st.col_mh.rejection_rate()
        );
    }
    s
}

fn matrix_prior(steps: &MatrixSteps, d_r: DMatrix<f64>, d_c: DMatrix<f64>, fixed: Option<Graph>) -> MatrixPrior {
    MatrixPrior {
        delta_r: steps.delta_r,
        delta_c: steps.delta_c,
        d_r,
        d_c,
        row_graph_fixed: fixed,
        sigma_m_r: steps.sigma_m_r,
        sigma_m_c: steps.sigma_m_c,
        sigma_g_r: steps.sigma_g_r,
        sigma_g_c: steps.sigma_g_c,
    }
}

pub fn sample_gwishart(a: &SampleArgs) -> Result<(), CliError> {
    let graph = match (&a.graph, a.p) {
        (Some(path), p) => {
            let text = read_text(path)?;
            let p = p.unwrap_or_else(|| Graph::max_label_in_edge_list(&text));
            if p == 0 {
                return usage("cannot infer the dimension from an empty edge list; pass --p");
            }
            Graph::parse_edge_list(&text, p).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(p)) if p > 0 => Graph::complete(p),
        _ => return usage("pass --graph, --p, or both"),
    };
    let p = graph.p();
    let d = load_square_or_identity(&a.d_matrix, p).usage()?;
    let params = GWishartParams::new(graph, a.delta, d).usage()?;
    let run = RunLength::new(a.iters, a.burnin, a.thin).usage()?;
    let mut chain = GWishartChain::new(&params, a.sigma_m, a.constrain_11, chain_rng(a.seed, 0)).usage()?;
    let mut rows: Vec<f64> = Vec::new();
    let mut saved = 0;
    for it in 0..run.iters {
        let k = chain.step().numeric()?;
        if run.keep(it).1 {
            rows.extend(upper_triangle(k.matrix()));
            saved += 1;
        }
    }
    let header = upper_triangle_header("K", p);
    let m = DMatrix::from_row_slice(saved, header.len(), &rows);
    write_text(&a.out, &matrix_to_csv(&m, Some(&header))).usage()?;
    let st = chain.stats();
    println!("rng: {RNG_NAME}");
    println!("seed: {}", a.seed);
    println!("draws written: {saved} to {}", a.out.display());
    println!(
        "element updates: {} proposed, rejection rate {:.4}",
        st.proposed,
        st.rejection_rate()
    );
    Ok(())
}

fn per_chain_edges(trace: &GgmTrace) -> String {
    let f = &trace.edge_freq;
    let p = f.nrows();
    let mut s = String::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let _ = write!(s, " {}-{}:{:.4}", i + 1, j + 1, f[(i, j)]);
        }
    }
    s
}

pub fn ggm(a: &GgmArgs) -> Result<(), CliError> {
    let run = run_length(&a.run)?;
    let data = load_matrix_csv(&a.data).usage()?;
    if data.nrows() == 0 || data.ncols() < 2 {
        return usage("--data needs at least one row and two columns");
    }
    let p = data.ncols();
    let d0 = load_square_or_identity(&a.d0, p).usage()?;
    let prior = GgmPrior::new(a.delta0, d0.clone()).usage()?;
    let config = ChainConfig {
        iters: run.iters,
        burnin: run.burnin,
        thin: run.thin,
        sigma_m: a.sigma_m,
        sigma_g: a.sigma_g,
        save_samples: true,
    };
    config.validate().usage()?;
    let stats = SufficientStats::from_data(&data).usage()?;
    let consts = PriorConstants::new(a.delta0, d0, a.run.mc_const_n, const_seed(a.run.seed)).usage()?;
    prepare_dir(&a.out_dir)?;
    let traces = par_chains(a.run.chains, |c| {
        run_ggm_chain_stats(&stats, &prior, &config, &consts, &mut chain_rng(a.run.seed, c))
    })?;

    let out = Output { dir: &a.out_dir };
    out.csv(
        "edge_probs.csv",
        &mean_of(traces.iter().map(|t| t.edge_freq.clone())),
        None,
    )?;
    out.csv("k_mean.csv", &mean_of(traces.iter().map(|t| t.k_mean.clone())), None)?;
    let mut header = vec!["chain".to_string()];
    header.extend(upper_triangle_header("K", p));
    let mut rows = Vec::new();
    let mut n_rows = 0;
    for (c, t) in traces.iter().enumerate() {
        for k in &t.samples {
            rows.push((c + 1) as f64);
            rows.extend(upper_triangle(k.matrix()));
            n_rows += 1;
        }
    }
    out.csv(
        "trace_k.csv",
        &DMatrix::from_row_slice(n_rows, header.len(), &rows),
        Some(&header),
    )?;

    let mut s = run_header("ggm", &a.run);
    let _ = writeln!(s, "variables: {p}\nobservations: {}", stats.n());
    for (c, t) in traces.iter().enumerate() {
        let _ = writeln!(s, "chain {}", c + 1);
        s.push_str(&rate_line("  graph add", &t.rj.add));
        s.push_str(&rate_line("  graph delete", &t.rj.delete));
        let _ = writeln!(s, "  precision rejection rate: {:.4}", t.mh.rejection_rate());
        let _ = writeln!(s, "  edge frequencies:{}", per_chain_edges(t));
    }
    out.text("summary.txt", &s)?;
    Ok(())
}

fn write_matrix_outputs(out: &Output, traces: &[MatrixTrace]) -> Result<(), CliError> {
    out.csv(
        "row_edge_probs.csv",
        &mean_of(traces.iter().map(|t| t.row_edge_freq.clone())),
        None,
    )?;
    out.csv(
        "col_edge_probs.csv",
        &mean_of(traces.iter().map(|t| t.col_edge_freq.clone())),
        None,
    )?;
    out.csv("kr_mean.csv", &mean_of(traces.iter().map(|t| t.kr_mean.clone())), None)?;
    out.csv("kc_mean.csv", &mean_of(traces.iter().map(|t| t.kc_mean.clone())), None)?;
    let z: Vec<Vec<f64>> = traces.iter().map(|t| t.z_trace.clone()).collect();
    out.csv("z_trace.csv", &z_matrix(&z), Some(&chain_header(traces.len())))?;
    Ok(())
}

pub fn matrix_ggm(a: &MatrixArgs) -> Result<(), CliError> {
    let run = run_length(&a.run)?;
    let stacked = load_matrix_csv(&a.data).usage()?;
    let data = MatrixData::from_stacked(&stacked, a.pr).usage()?;
    if let Some(pc) = a.pc {
        if pc != data.p_c() {
            return usage(format!("--pc is {pc} but the data have {} columns", data.p_c()));
        }
    }
    if let Some(n) = a.n {
        if n != data.n() {
            return usage(format!("--n is {n} but the data hold {} samples", data.n()));
        }
    }
    let fixed = match &a.fixed_row_graph {
        Some(path) => Some(Graph::read_edge_list(path, data.p_r()).usage()?),
        None => None,
    };
    let d_r = load_square_or_identity(&a.dr, data.p_r()).usage()?;
    let d_c = load_square_or_identity(&a.dc, data.p_c()).usage()?;
    let prior = matrix_prior(&a.steps, d_r, d_c, fixed);
    prior.validate().usage()?;
    let consts = MatrixConstants::new(&prior, a.run.mc_const_n, const_seed(a.run.seed)).usage()?;
    prepare_dir(&a.out_dir)?;
    let traces = par_chains(a.run.chains, |c| {
        run_matrix_chain(&data, &prior, run, &consts, &mut chain_rng(a.run.seed, c))
    })?;

    let out = Output { dir: &a.out_dir };
    write_matrix_outputs(&out, &traces)?;
    let mut s = run_header("matrix-ggm", &a.run);
    let _ = writeln!(
        s,
        "rows: {}\ncolumns: {}\nsamples: {}",
        data.p_r(),
        data.p_c(),
        data.n()
    );
    let stats: Vec<MatrixStats> = traces.iter().map(|t| t.stats).collect();
    s.push_str(&matrix_stats_section(&stats, prior.row_graph_fixed.is_some()));
    let z: Vec<Vec<f64>> = traces.iter().map(|t| t.z_trace.clone()).collect();
    s.push_str(&convergence_section(&z)?);
    out.text("summary.txt", &s)?;
    Ok(())
}

fn spatial_setup(
    car: &CarArgs,
    steps: &MatrixSteps,
    p_r: usize,
    p_c: usize,
) -> Result<(Lattice, MatrixPrior, f64), CliError> {
    let lattice = load_lattice(&car.adjacency, p_r)?;
    let tau2 = car.tau2.unwrap_or_else(|| default_tau2(&lattice));
    let prior = car_centering(&lattice, car.rho, tau2, steps.delta_r).usage()?;
    let mut m = spatial_matrix_prior(&prior, p_c);
    m.delta_c = steps.delta_c;
    m.sigma_m_r = steps.sigma_m_r;
    m.sigma_m_c = steps.sigma_m_c;
    m.sigma_g_r = steps.sigma_g_r;
    m.sigma_g_c = steps.sigma_g_c;
    m.validate().usage()?;
    Ok((lattice, m, tau2))
}

pub fn spatial_gaussian(a: &SpatialGaussianArgs) -> Result<(), CliError> {
    let run = run_length(&a.run)?;
    let y = load_matrix_csv(&a.data).usage()?;
    let (p_r, p_c) = (y.nrows(), y.ncols());
    let z = load_vector(&a.covariate)?;
    if z.len() != p_r {
        return usage(format!(
            "--covariate has {} values but --data has {p_r} regions",
            z.len()
        ));
    }
    let (lattice, prior, tau2) = spatial_setup(&a.car, &a.steps, p_r, p_c)?;
    let spec = RegressionSpec::quadratic(&z, p_c).usage()?;
    let consts = MatrixConstants::new(&prior, a.run.mc_const_n, const_seed(a.run.seed)).usage()?;
    prepare_dir(&a.out_dir)?;
    let traces = par_chains(a.run.chains, |c| {
        gaussian_mcar_regression(&y, &spec, &prior, run, &consts, &mut chain_rng(a.run.seed, c))
    })?;

    let out = Output { dir: &a.out_dir };
    let q = spec.n_coef();
    let mut header = vec!["chain".to_string()];
    for j in 0..p_c {
        for k in 0..q {
            header.push(format!("beta_{k}_{}", j + 1));
        }
    }
    let mut rows = Vec::new();
    let mut n_rows = 0;
    for (c, t) in traces.iter().enumerate() {
        for r in 0..t.beta_trace.nrows() {
            rows.push((c + 1) as f64);
            rows.extend(t.beta_trace.row(r).iter().cloned());
            n_rows += 1;
        }
    }
    out.csv(
        "beta_trace.csv",
        &DMatrix::from_row_slice(n_rows, header.len(), &rows),
        Some(&header),
    )?;
    out.csv("fitted.csv", &mean_of(traces.iter().map(|t| t.fitted.clone())), None)?;
    out.csv(
        "col_edge_probs.csv",
        &mean_of(traces.iter().map(|t| t.col_edge_freq.clone())),
        None,
    )?;
    out.csv("kr_mean.csv", &mean_of(traces.iter().map(|t| t.kr_mean.clone())), None)?;
    out.csv("kc_mean.csv", &mean_of(traces.iter().map(|t| t.kc_mean.clone())), None)?;
    let zt: Vec<Vec<f64>> = traces.iter().map(|t| t.z_trace.clone()).collect();
    out.csv("z_trace.csv", &z_matrix(&zt), Some(&chain_header(traces.len())))?;

    let mean = mean_of(traces.iter().map(|t| t.beta_mean.clone()));
    let second = mean_of(
        traces
            .iter()
            .map(|t| t.beta_sd.component_mul(&t.beta_sd) + t.beta_mean.component_mul(&t.beta_mean)),
    );
    let sd = (second - mean.component_mul(&mean)).map(|v| v.max(0.0).sqrt());
    let mut s = run_header("spatial-gaussian", &a.run);
    s.push_str(&lattice.report());
    let _ = writeln!(s, "rho: {}\ntau2: {tau2}\noutcomes: {p_c}", a.car.rho);
    s.push_str("coefficients (posterior mean, sd)\n");
    for j in 0..p_c {
        for k in 0..q {
            let _ = writeln!(s, "  beta_{k}_{}: {:.6} {:.6}", j + 1, mean[(k, j)], sd[(k, j)]);
        }
    }
    let stats: Vec<MatrixStats> = traces.iter().map(|t| t.stats).collect();
    s.push_str(&matrix_stats_section(&stats, true));
    s.push_str(&convergence_section(&zt)?);
    out.text("summary.txt", &s)?;
    Ok(())
}

pub fn spatial_poisson(a: &SpatialPoissonArgs) -> Result<(), CliError> {
    let run = run_length(&a.run)?;
    let counts = load_matrix_csv(&a.data).usage()?;
    let pops = load_vector(&a.populations)?;
    let data = CountData::new(counts, pops).usage()?;
    let (p_r, p_c) = (data.p_r(), data.p_c());
    let (lattice, mprior, tau2) = spatial_setup(&a.car, &a.steps, p_r, p_c)?;
    let mut prior = PoissonPrior::from_data(&data, a.sigma_latent, a.censor_threshold);
    if let Some(mu0) = a.mu0 {
        prior.mu0 = DVector::from_element(p_c, mu0);
    }
    if let Some(w) = a.omega {
        if w <= 0.0 || !w.is_finite() {
            return usage(format!("--omega must be positive, got {w}"));
        }
        prior.omega = DMatrix::identity(p_c, p_c) / (w * w);
    }
    prior.validate(p_c).usage()?;
    let consts = MatrixConstants::new(&mprior, a.run.mc_const_n, const_seed(a.run.seed)).usage()?;
    prepare_dir(&a.out_dir)?;
    let traces = par_chains(a.run.chains, |c| {
        poisson_mcar_glm(&data, &prior, &mprior, run, &consts, &mut chain_rng(a.run.seed, c))
    })?;

    let out = Output { dir: &a.out_dir };
    let mut header = vec!["chain".to_string()];
    header.extend((1..=p_c).map(|j| format!("mu_{j}")));
    let mut rows = Vec::new();
    let mut n_rows = 0;
    for (c, t) in traces.iter().enumerate() {
        for r in 0..t.mu_trace.nrows() {
            rows.push((c + 1) as f64);
            rows.extend(t.mu_trace.row(r).iter().cloned());
            n_rows += 1;
        }
    }
    out.csv(
        "mu_trace.csv",
        &DMatrix::from_row_slice(n_rows, header.len(), &rows),
        Some(&header),
    )?;
    out.csv("fitted.csv", &mean_of(traces.iter().map(|t| t.fitted.clone())), None)?;
    out.csv(
        "col_edge_probs.csv",
        &mean_of(traces.iter().map(|t| t.col_edge_freq.clone())),
        None,
    )?;
    out.csv("kr_mean.csv", &mean_of(traces.iter().map(|t| t.kr_mean.clone())), None)?;
    out.csv("kc_mean.csv", &mean_of(traces.iter().map(|t| t.kc_mean.clone())), None)?;
    let zt: Vec<Vec<f64>> = traces.iter().map(|t| t.z_trace.clone()).collect();
    out.csv("z_trace.csv", &z_matrix(&zt), Some(&chain_header(traces.len())))?;

    let pooled: Vec<ImputationSummary> = traces[0]
        .imputations
        .iter()
        .enumerate()
        .map(|(k, s0)| {
            let draws: Vec<f64> = traces
                .iter()
                .flat_map(|t| t.imputation_draws[k].iter().cloned())
                .collect();
            ImputationSummary::from_draws(s0.row, s0.col, s0.observed, &draws)
        })
        .collect();
    let imp_header: Vec<String> = ["region", "outcome", "observed", "median", "lower_2_5", "upper_97_5"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let imp = DMatrix::from_fn(pooled.len(), 6, |r, c| {
        let s = &pooled[r];
        [
            (s.row + 1) as f64,
            (s.col + 1) as f64,
            s.observed,
            s.median,
            s.lower,
            s.upper,
        ][c]
    });
    out.csv("imputations.csv", &imp, Some(&imp_header))?;

    let mut s = run_header("spatial-poisson", &a.run);
    s.push_str(&lattice.report());
    let _ = writeln!(s, "rho: {}\ntau2: {tau2}\noutcomes: {p_c}", a.car.rho);
    let _ = writeln!(
        s,
        "mu0: {}\nomega: {}\ncensor threshold: {}\ncensored cells: {}",
        prior.mu0[0],
        1.0 / prior.omega[(0, 0)].sqrt(),
        a.censor_threshold,
        pooled.len()
    );
    let mu = mean_of(traces.iter().map(|t| t.mu_mean.clone()));
    let cells: Vec<String> = mu.iter().map(|v| format!("{v:.6}")).collect();
    let _ = writeln!(s, "posterior mean of mu: {}", cells.join(" "));
    for (c, t) in traces.iter().enumerate() {
        let _ = writeln!(s, "chain {} latent acceptance: {:.4}", c + 1, t.latent_mh.rate());
    }
    let stats: Vec<MatrixStats> = traces.iter().map(|t| t.stats).collect();
    s.push_str(&matrix_stats_section(&stats, true));
    s.push_str(&convergence_section(&zt)?);
    out.text("summary.txt", &s)?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    prepare_dir(&a.out_dir)?;
    let fx = generate_simulation_fixture(a.seed);
    let out = Output { dir: &a.out_dir };
    out.csv("data.csv", &fx.data.to_stacked(), None)?;
    out.csv("true_kr.csv", fx.k_r.matrix(), None)?;
    out.csv("true_kc.csv", fx.k_c.matrix(), None)?;
    out.text("row_graph.txt", &fx.k_r.graph().to_edge_list())?;
    out.text("col_graph.txt", &fx.k_c.graph().to_edge_list())?;
    println!("rng: {RNG_NAME}");
    println!("seed: {}", a.seed);
    println!(
        "wrote {} samples of {} x {} to {}",
        fx.data.n(),
        fx.data.p_r(),
        fx.data.p_c(),
        a.out_dir.join("data.csv").display()
    );
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let m = load_matrix_csv(&a.traces).usage()?;
    let traces: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().cloned().collect()).collect();
    let rep = convergence_report(&traces).usage()?;
    print!("{}", rep.to_table());
    if let Some(path) = &a.out {
        let mut header = vec!["iteration".to_string()];
        header.extend(chain_header(traces.len()));
        write_text(path, &matrix_to_csv(&rep.to_matrix(), Some(&header))).usage()?;
    }
    Ok(())
}
