//! Free-element Cholesky parameterization of the cone of positive definite
//! matrices with a prescribed zero pattern.
//!
//! A matrix `K` in the cone of graph `G` is written `K = Qᵀ (Ψᵀ Ψ) Q` where
//! `Q` is the upper Cholesky factor of `D⁻¹` and `Ψ` is upper triangular. Only
//! the entries of `Ψ` at the diagonal and at edges are free; every other
//! entry above the diagonal is fixed by requiring `K_ij = 0` and is filled in
//! lexicographic order (completion). `Φ = Ψ Q` is then the Cholesky factor
//! of `K` itself.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{free_index_set, Graph};
use crate::linalg::{cholesky_upper, spd_inverse, upper_tri_inverse};

/// Diagonal entries of `Ψ` at or below this are rejected.
pub const DIAG_EPS: f64 = 1e-12;

/// Relative tolerance for accepting a non-edge entry as zero.
pub const ZERO_TOL: f64 = 1e-8;

/// Upper-triangular `Q` with positive diagonal and `D⁻¹ = Qᵀ Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    q: DMatrix<f64>,
}

impl CholFactor {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.q[(i, i)]
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        upper_tri_inverse(&self.q)
    }

    pub fn identity(p: usize) -> Self {
        CholFactor {
            q: DMatrix::identity(p, p),
        }
    }
}

/// Factorizes `D⁻¹ = Qᵀ Q` for a symmetric positive definite `D`.
pub fn inverse_cholesky(d: &DMatrix<f64>) -> Result<CholFactor> {
    let d_inv = spd_inverse(d)?;
    let q = cholesky_upper(&d_inv)?;
    Ok(CholFactor { q })
}

/// Free entries of `Ψ` for a graph. Entries outside the free set are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FreePsi {
    graph: Graph,
    values: DMatrix<f64>,
}

impl FreePsi {
    /// `values` is read at the free positions only.
    pub fn new(graph: Graph, values: DMatrix<f64>) -> Result<Self> {
        let p = graph.p();
        if values.nrows() != p || values.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: values.nrows(),
            });
        }
        for i in 0..p {
            if !(values[(i, i)] > DIAG_EPS) {
                return Err(Error::DegenerateDiagonal {
                    index: i,
                    value: values[(i, i)],
                });
            }
        }
        let mut clean = DMatrix::zeros(p, p);
        for i in 0..p {
            clean[(i, i)] = values[(i, i)];
            for j in (i + 1)..p {
                if graph.has_edge(i, j) {
                    clean[(i, j)] = values[(i, j)];
                }
            }
        }
        Ok(FreePsi { graph, values: clean })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Free values in lexicographic order of the free index set.
    pub fn values(&self) -> Vec<((usize, usize), f64)> {
        free_index_set(&self.graph)
            .pairs
            .into_iter()
            .map(|(i, j)| ((i, j), self.values[(i, j)]))
            .collect()
    }

    /// Upper-triangular matrix holding the free values, zero elsewhere.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// A symmetric positive definite matrix whose off-diagonal zero pattern
/// matches its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    k: DMatrix<f64>,
    graph: Graph,
}

impl PrecisionMatrix {
    /// Validates symmetry, the zero pattern (relative tolerance `ZERO_TOL`)
    /// and positive definiteness. Non-edge entries within tolerance are set
    /// to exactly zero.
    pub fn new(k: DMatrix<f64>, graph: Graph) -> Result<Self> {
        let p = graph.p();
        if k.nrows() != p || k.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: k.nrows(),
            });
        }
        let scale = (0..p).map(|i| k[(i, i)].abs()).fold(1.0, f64::max);
        let mut k = k;
        for i in 0..p {
            for j in (i + 1)..p {
                if graph.has_edge(i, j) {
                    let s = 0.5 * (k[(i, j)] + k[(j, i)]);
                    k[(i, j)] = s;
                    k[(j, i)] = s;
                } else {
                    let worst = k[(i, j)].abs().max(k[(j, i)].abs());
                    if worst > ZERO_TOL * scale {
                        return Err(Error::ConeViolation {
                            i: i + 1,
                            j: j + 1,
                            value: worst,
                        });
                    }
                    k[(i, j)] = 0.0;
                    k[(j, i)] = 0.0;
                }
            }
        }
        cholesky_upper(&k)?;
        Ok(PrecisionMatrix { k, graph })
    }

    /// Diagonal matrix; belongs to the cone of every graph.
    pub fn diagonal(diag: &[f64], graph: Graph) -> Result<Self> {
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag));
        Self::new(k, graph)
    }

    pub(crate) fn from_parts_unchecked(k: DMatrix<f64>, graph: Graph) -> Self {
        PrecisionMatrix { k, graph }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.k
    }

    /// Same matrix viewed in the cone of a supergraph.
    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        Self::new(self.k.clone(), graph)
    }
}

/// Fills the non-free entries of rows `from..p` of `psi` and recomputes the
/// matching rows of `phi = psi q`. Rows above `from` must already be
/// consistent. When `pin_first` is set `phi[(0, 0)]` is forced to exactly 1,
/// which is what the `K₁₁ = 1` constraint requires.
pub(crate) fn complete_rows(
    psi: &mut DMatrix<f64>,
    phi: &mut DMatrix<f64>,
    graph: &Graph,
    q: &DMatrix<f64>,
    from: usize,
    pin_first: bool,
) -> Result<()> {
    let p = graph.p();
    // Column-major storage: entry (r, c) lives at c * p + r.
    let q = q.as_slice();
    let psi = psi.as_mut_slice();
    let phi = phi.as_mut_slice();
    for i in from..p {
        let psi_ii = psi[i * p + i];
        if !(psi_ii > DIAG_EPS) {
            return Err(Error::DegenerateDiagonal {
                index: i,
                value: psi_ii,
            });
        }
        let phi_ii = if pin_first && i == 0 {
            1.0
        } else {
            psi_ii * q[i * p + i]
        };
        phi[i * p + i] = phi_ii;
        for j in (i + 1)..p {
            let q_col = &q[j * p..j * p + p];
            let mut s = 0.0;
            for l in i..j {
                s += psi[l * p + i] * q_col[l];
            }
            if graph.has_edge(i, j) {
                phi[j * p + i] = s + psi[j * p + i] * q_col[j];
            } else {
                // K_ij = sum_{r <= i} phi_ri phi_rj = 0.
                let c: f64 = phi[i * p..i * p + i]
                    .iter()
                    .zip(&phi[j * p..j * p + i])
                    .map(|(a, b)| a * b)
                    .sum();
                let phi_ij = -c / phi_ii;
                psi[j * p + i] = (phi_ij - s) / q_col[j];
                phi[j * p + i] = phi_ij;
            }
        }
    }
    Ok(())
}

/// `Ψ` with every entry filled together with `Φ = Ψ Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedPsi {
    pub psi: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

impl CompletedPsi {
    /// `Φᵀ Φ`, the assembled precision matrix.
    pub fn precision(&self) -> DMatrix<f64> {
        self.phi.tr_mul(&self.phi)
    }

    /// Sum of squares of every upper-triangular entry of `Ψ`.
    pub fn sum_sq(&self) -> f64 {
        self.psi.iter().map(|x| x * x).sum()
    }
}

pub(crate) fn complete_full(free: &FreePsi, q: &CholFactor, pin_first: bool) -> Result<CompletedPsi> {
    let p = free.graph.p();
    if q.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: q.dim(),
        });
    }
    let mut psi = free.values.clone();
    let mut phi = DMatrix::zeros(p, p);
    complete_rows(&mut psi, &mut phi, &free.graph, &q.q, 0, pin_first)?;
    Ok(CompletedPsi { psi, phi })
}

/// Returns the full upper-triangular `Ψ`: free entries copied, the rest
/// filled so that the assembled matrix vanishes at every non-edge.
pub fn complete_psi(free: &FreePsi, q: &CholFactor) -> Result<DMatrix<f64>> {
    complete_full(free, q, false).map(|c| c.psi)
}

/// `Qᵀ Ψᵀ Ψ Q` with no validation.
pub fn assemble_dense(psi: &DMatrix<f64>, q: &CholFactor) -> DMatrix<f64> {
    let phi = psi * &q.q;
    phi.tr_mul(&phi)
}

pub fn assemble_precision(psi: &DMatrix<f64>, q: &CholFactor, graph: &Graph) -> Result<PrecisionMatrix> {
    let p = graph.p();
    if psi.nrows() != p || q.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: psi.nrows().min(q.dim()),
        });
    }
    PrecisionMatrix::new(assemble_dense(psi, q), graph.clone())
}

/// Inverse of assembly on the free coordinates: `Ψ = chol(K) Q⁻¹`.
pub fn extract_free_psi(k: &PrecisionMatrix, q: &CholFactor) -> Result<FreePsi> {
    let c = extract_completed(k.matrix(), k.graph(), q)?;
    FreePsi::new(k.graph().clone(), c.psi)
}

pub(crate) fn extract_completed(k: &DMatrix<f64>, graph: &Graph, q: &CholFactor) -> Result<CompletedPsi> {
    if q.dim() != graph.p() {
        return Err(Error::DimensionMismatch {
            expected: graph.p(),
            found: q.dim(),
        });
    }
    let phi = cholesky_upper(k)?;
    let psi = &phi * q.inverse();
    Ok(CompletedPsi { psi, phi })
}

/// `(log J(K → Φ^ν), log J(Φ^ν → Ψ^ν))` for a completed `Ψ`.
pub fn log_jacobians(psi: &DMatrix<f64>, q: &CholFactor, graph: &Graph) -> (f64, f64) {
    let fis = free_index_set(graph);
    let p = graph.p();
    let mut j1 = p as f64 * std::f64::consts::LN_2;
    let mut j2 = 0.0;
    for i in 0..p {
        let qi = q.diag(i);
        j1 += (fis.v[i] as f64 + 1.0) * (psi[(i, i)] * qi).ln();
        j2 += (fis.d[i] as f64 + 1.0) * qi.ln();
    }
    (j1, j2)
}

/// Unnormalized log-density of the free elements under `Wis_G(δ, D)`:
/// `Σ (v_i + δ - 1) log Ψ_ii - ½ Σ Ψ_ij²`. The `2^p ∏ Q_ii^(...)` factor and the
/// normalizing constant are left out.
pub fn log_free_psi_density(free: &FreePsi, q: &CholFactor, delta: f64) -> Result<f64> {
    if !(delta > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must exceed 2, got {delta}"
        )));
    }
    let c = complete_full(free, q, false)?;
    let fis = free_index_set(&free.graph);
    let log_diag: f64 = (0..free.graph.p())
        .map(|i| (fis.v[i] as f64 + delta - 1.0) * c.psi[(i, i)].ln())
        .sum();
    Ok(log_diag - 0.5 * c.sum_sq())
}
