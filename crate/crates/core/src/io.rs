//! CSV input/output and the synthetic matrix-variate fixture.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::chol::PrecisionMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::sample_mvn_precision;
use crate::matrix::MatrixData;
use crate::rng::chain_rng;

/// Parses comma-separated numbers. A first line containing any non-numeric
/// cell is taken as a header and skipped. Blank lines are ignored.
pub fn parse_matrix_csv(text: &str, path: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first = true;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<std::result::Result<f64, _>> = cells.iter().map(|c| c.parse::<f64>()).collect();
        if first {
            first = false;
            if parsed.iter().any(|p| p.is_err()) {
                width = Some(cells.len());
                continue;
            }
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) => row.push(v),
                Err(_) => {
                    return Err(Error::Parse {
                        path: path.to_string(),
                        line: line_no,
                        msg: format!("column {}: '{}' is not a number", col + 1, cells[col]),
                    })
                }
            }
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: line_no,
                    msg: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => width = Some(row.len()),
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 0,
            msg: "no numeric rows".into(),
        });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn load_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_matrix_csv(&text, &path.display().to_string())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_csv(m: &DMatrix<f64>, header: Option<&[String]>) -> String {
    let mut s = String::new();
    if let Some(h) = header {
        s.push_str(&h.join(","));
        s.push('\n');
    }
    for r in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols()).map(|c| format_f64(m[(r, c)])).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    write_text(path, &matrix_to_csv(m, header))
}

/// `"K_i_j"` names of the upper triangle (diagonal included) in
/// lexicographic order, 1-based.
pub fn upper_triangle_header(prefix: &str, p: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(p * (p + 1) / 2);
    for i in 0..p {
        for j in i..p {
            h.push(format!("{prefix}_{}_{}", i + 1, j + 1));
        }
    }
    h
}

pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut v = Vec::with_capacity(p * (p + 1) / 2);
    for i in 0..p {
        for j in i..p {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Reads a `p × p` matrix from CSV, or the identity for `"identity"`.
pub fn load_square_or_identity(spec: &str, p: usize) -> Result<DMatrix<f64>> {
    if spec.eq_ignore_ascii_case("identity") {
        return Ok(DMatrix::identity(p, p));
    }
    let m = load_matrix_csv(Path::new(spec))?;
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: if m.nrows() != p { m.nrows() } else { m.ncols() },
        });
    }
    Ok(m)
}

/// Synthetic matrix-variate dataset with known row and column structure.
#[derive(Debug, Clone)]
pub struct SimulationFixture {
    pub data: MatrixData,
    pub k_r: PrecisionMatrix,
    pub k_c: PrecisionMatrix,
}

pub const FIXTURE_P_R: usize = 5;
pub const FIXTURE_P_C: usize = 10;
pub const FIXTURE_N: usize = 100;

/// Row graph: vertex 1 joined to every other vertex plus the path
/// 2-3-4-5 and the chord 2-5.
pub fn fixture_row_graph() -> Graph {
    Graph::from_edges(
        FIXTURE_P_R,
        &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (1, 4)],
    )
    .expect("valid fixture graph")
}

pub fn fixture_col_graph() -> Graph {
    Graph::cycle(FIXTURE_P_C)
}

/// Unit diagonal and 0.4 on every edge.
pub fn fixture_precision(g: &Graph) -> PrecisionMatrix {
    let p = g.p();
    let k = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if g.has_edge(i, j) {
            0.4
        } else {
            0.0
        }
    });
    PrecisionMatrix::new(k, g.clone()).expect("fixture precision is positive definite")
}

/// Draws `n` samples by sampling `vec(Xᵀ)` from `N(0, (K_R ⊗ K_C)⁻¹)` and
/// reshaping row by row.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    k_r: &DMatrix<f64>,
    k_c: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<MatrixData> {
    let (p_r, p_c) = (k_r.nrows(), k_c.nrows());
    let prec = k_r.kronecker(k_c);
    let zero = DVector::zeros(p_r * p_c);
    let samples = (0..n)
        .map(|_| {
            let v = sample_mvn_precision(&zero, &prec, rng)?;
            Ok(DMatrix::from_fn(p_r, p_c, |i, j| v[i * p_c + j]))
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixData::new(samples)
}

pub fn generate_simulation_fixture(seed: u64) -> SimulationFixture {
    let k_r = fixture_precision(&fixture_row_graph());
    let k_c = fixture_precision(&fixture_col_graph());
    let mut rng = chain_rng(seed, 0);
    let data = sample_matrix_normal(k_r.matrix(), k_c.matrix(), FIXTURE_N, &mut rng)
        .expect("fixture precisions are positive definite");
    SimulationFixture { data, k_r, k_c }
}
