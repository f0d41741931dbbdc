//! Monte Carlo summaries: batch-means standard errors, edge-inclusion
//! accumulators and multi-chain convergence reports.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Standard error of the mean of `xs` by non-overlapping batch means.
/// Trailing draws that do not fill a batch are dropped.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> f64 {
    let len = xs.len() / n_batches.max(1);
    if n_batches < 2 || len == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = xs
        .chunks_exact(len)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (var / n_batches as f64).sqrt()
}

/// Linearly interpolated sample quantile (`q` in `[0, 1]`) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample quantile of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

/// Accumulates edge-inclusion indicators over a run of known length and
/// reports frequencies with batch-means standard errors.
#[derive(Debug, Clone)]
pub struct EdgeFrequency {
    p: usize,
    batch_len: usize,
    batches: Vec<DMatrix<f64>>,
    total: DMatrix<f64>,
    count: usize,
}

impl EdgeFrequency {
    pub const DEFAULT_BATCHES: usize = 20;

    /// `expected` is the number of graphs that will be pushed.
    pub fn new(p: usize, expected: usize, n_batches: usize) -> Self {
        let n_batches = n_batches.max(1);
        EdgeFrequency {
            p,
            batch_len: (expected / n_batches).max(1),
            batches: vec![DMatrix::zeros(p, p); n_batches],
            total: DMatrix::zeros(p, p),
            count: 0,
        }
    }

    pub fn push(&mut self, g: &Graph) {
        let b = self.count / self.batch_len;
        for &(i, j) in g.edges() {
            self.total[(i, j)] += 1.0;
            self.total[(j, i)] += 1.0;
            if b < self.batches.len() {
                self.batches[b][(i, j)] += 1.0;
                self.batches[b][(j, i)] += 1.0;
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Symmetric matrix of inclusion frequencies with zero diagonal.
    pub fn frequencies(&self) -> DMatrix<f64> {
        if self.count == 0 {
            return DMatrix::zeros(self.p, self.p);
        }
        &self.total / self.count as f64
    }

    pub fn std_errors(&self) -> DMatrix<f64> {
        let full = (self.count / self.batch_len).min(self.batches.len());
        if full < 2 {
            return DMatrix::from_element(self.p, self.p, f64::NAN);
        }
        let means: Vec<DMatrix<f64>> = self.batches[..full].iter().map(|b| b / self.batch_len as f64).collect();
        let grand = means.iter().fold(DMatrix::zeros(self.p, self.p), |a, m| a + m) / full as f64;
        DMatrix::from_fn(self.p, self.p, |i, j| {
            let v = means.iter().map(|m| (m[(i, j)] - grand[(i, j)]).powi(2)).sum::<f64>() / (full - 1) as f64;
            (v / full as f64).sqrt()
        })
    }
}

/// Running-mean comparison of one scalar trace per chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Iteration counts (1-based) at which running means are reported.
    pub checkpoints: Vec<usize>,
    /// `running_means[c][k]` is the mean of chain `c` over its first
    /// `checkpoints[k]` values.
    pub running_means: Vec<Vec<f64>>,
    /// `(max - min) / |mean of chain means|` at the final checkpoint.
    pub final_spread: f64,
}

/// Running means at log-spaced checkpoints (powers of two plus the final
/// length) and the relative spread across chains at the end.
pub fn convergence_report(traces: &[Vec<f64>]) -> Result<ConvergenceReport> {
    if traces.len() < 2 {
        return Err(Error::InvalidParameter(
            "convergence report needs at least 2 chains".into(),
        ));
    }
    let n = traces[0].len();
    if n == 0 {
        return Err(Error::InvalidParameter("traces are empty".into()));
    }
    if let Some(t) = traces.iter().find(|t| t.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: t.len(),
        });
    }
    let mut checkpoints = Vec::new();
    let mut c = 1;
    while c < n {
        checkpoints.push(c);
        c *= 2;
    }
    checkpoints.push(n);
    let running_means: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut sum = 0.0;
            let mut k = 0;
            for (idx, x) in t.iter().enumerate() {
                sum += x;
                if checkpoints[k] == idx + 1 {
                    out.push(sum / (idx + 1) as f64);
                    k += 1;
                }
            }
            out
        })
        .collect();
    let finals: Vec<f64> = running_means.iter().map(|m| *m.last().unwrap()).collect();
    let max = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let centre = finals.iter().sum::<f64>() / finals.len() as f64;
    let final_spread = if max == min { 0.0 } else { (max - min) / centre.abs() };
    Ok(ConvergenceReport {
        checkpoints,
        running_means,
        final_spread,
    })
}

impl ConvergenceReport {
    pub fn to_table(&self) -> String {
        let mut s = String::from("iteration");
        for c in 0..self.running_means.len() {
            s.push_str(&format!("  chain_{}", c + 1));
        }
        s.push('\n');
        for (k, it) in self.checkpoints.iter().enumerate() {
            s.push_str(&format!("{it:>9}"));
            for m in &self.running_means {
                s.push_str(&format!("  {:>10.5}", m[k]));
            }
            s.push('\n');
        }
        s.push_str(&format!("final relative spread: {:.6}\n", self.final_spread));
        s
    }

    /// One row per checkpoint: iteration followed by each chain's mean.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.checkpoints.len(), self.running_means.len() + 1, |k, c| {
            if c == 0 {
                self.checkpoints[k] as f64
            } else {
                self.running_means[c - 1][k]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert!((quantile(&xs, 0.25) - 1.75).abs() < 1e-12);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn identical_traces_have_zero_spread() {
        let t = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let r = convergence_report(&[t.clone(), t]).unwrap();
        assert_eq!(r.final_spread, 0.0);
        assert_eq!(r.checkpoints, vec![1, 2, 4, 5]);
        assert_eq!(r.running_means[0], vec![1.0, 1.5, 2.5, 3.0]);
    }

    #[test]
    fn constant_traces_spread() {
        let r = convergence_report(&[vec![2.0; 100], vec![2.2; 100]]).unwrap();
        // Spread is relative to the mean of the chain means.
        assert!((r.final_spread - 0.2 / 2.1).abs() < 1e-12);
        let r = convergence_report(&[
            vec![2.0; 10],
            vec![2.2; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
            vec![2.0; 10],
        ])
        .unwrap();
        assert!((r.final_spread - 0.1).abs() < 0.001);
    }

    #[test]
    fn report_errors() {
        assert!(convergence_report(&[vec![1.0]]).is_err());
        assert!(matches!(
            convergence_report(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn batch_means_of_iid_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let se = batch_means_se(&xs, 20);
        let exact = (1.0f64 / 12.0 / 100_000.0).sqrt();
        assert!((se / exact - 1.0).abs() < 0.5, "{se} vs {exact}");
    }

    #[test]
    fn edge_frequency_counts() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let empty = Graph::empty(3);
        let mut f = EdgeFrequency::new(3, 4, 2);
        for k in 0..4 {
            f.push(if k % 2 == 0 { &g } else { &empty });
        }
        let m = f.frequencies();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 0)], 0.5);
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(f.std_errors()[(0, 1)], 0.0);
    }
}
