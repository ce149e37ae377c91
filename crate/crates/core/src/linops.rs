//! Dense finite-dimensional operator algebra: Moore–Penrose pseudoinverse,
//! Penrose residuals, spectral norm and kernel bases, all from the SVD.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOp(DMatrix<f64>);

impl LinOp {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Input("operator must have at least one row and column".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("operator has non-finite entries".into()));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn is_square(&self) -> bool {
        self.0.is_square()
    }
}

/// Full SVD with singular values in descending order: `M = U Σ Vᵀ`, `U` is
/// `rows×rows`, `V` is `cols×cols` and `s` has `min(rows, cols)` entries.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// nalgebra's SVD leaves reconstruction errors near 1e-10 on small
/// well-conditioned matrices, so the decomposition comes from faer.
pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> Result<SortedSvd> {
    let (rows, cols) = m.shape();
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = a
        .svd()
        .map_err(|e| Error::Domain(format!("SVD did not converge: {e:?}")))?;
    let (fu, fv) = (svd.U(), svd.V());
    let fs = svd.S().column_vector();
    let k = rows.min(cols);
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
    // Columns past k keep their order; they span the complements.
    let perm = |n: usize| -> Vec<usize> { idx.iter().copied().chain(k..n).collect() };
    let (pu, pv) = (perm(rows), perm(cols));
    Ok(SortedSvd {
        u: DMatrix::from_fn(rows, rows, |r, c| fu[(r, pu[c])]),
        s: idx.iter().map(|&i| fs[i]).collect(),
        v: DMatrix::from_fn(cols, cols, |r, c| fv[(r, pv[c])]),
    })
}

/// `eps · max(rows, cols) · σ_max`
pub fn default_rank_tol(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    f64::EPSILON * rows.max(cols) as f64 * sigma_max
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinvResult {
    pub pinv: LinOp,
    pub rank: usize,
    pub tol_used: f64,
    /// `M M⁺`, orthogonal projector onto the range of `M`.
    pub range_proj: LinOp,
    /// `M⁺ M`, orthogonal projector onto the range of `M*`.
    pub corange_proj: LinOp,
    /// Descending.
    pub singular_values: Vec<f64>,
}

impl PinvResult {
    /// True when a nonzero singular value sits within a factor 10 of the
    /// rank threshold, so the numerical rank depends on the tolerance.
    pub fn rank_ambiguous(&self) -> bool {
        let tol = self.tol_used;
        self.singular_values
            .iter()
            .any(|&s| s > 0.0 && s > tol / 10.0 && s <= tol * 10.0)
    }
}

/// Moore–Penrose pseudoinverse. `tol = 0` selects [`default_rank_tol`].
pub fn pinv(m: &LinOp, tol: f64) -> Result<PinvResult> {
    if !(tol >= 0.0) {
        return Err(Error::Input(format!("tolerance must be >= 0, got {tol}")));
    }
    let (rows, cols) = (m.nrows(), m.ncols());
    let svd = sorted_svd(m.matrix())?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    let tol_used = if tol == 0.0 {
        default_rank_tol(rows, cols, sigma_max)
    } else {
        tol
    };
    let rank = svd.s.iter().filter(|&&s| s > tol_used).count();

    let mut x = DMatrix::zeros(cols, rows);
    for k in 0..rank {
        let vk = svd.v.column(k);
        let uk = svd.u.column(k);
        x += (vk * uk.transpose()) / svd.s[k];
    }
    let range_proj = m.matrix() * &x;
    let corange_proj = &x * m.matrix();
    Ok(PinvResult {
        pinv: LinOp(x),
        rank,
        tol_used,
        range_proj: LinOp(range_proj),
        corange_proj: LinOp(corange_proj),
        singular_values: svd.s,
    })
}

/// Residuals of the four Penrose equations, in Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PenroseCheck {
    /// `‖XMX − X‖`
    pub xmx: f64,
    /// `‖MXM − M‖`
    pub mxm: f64,
    /// `‖(MX)ᵀ − MX‖`
    pub mx_sym: f64,
    /// `‖(XM)ᵀ − XM‖`
    pub xm_sym: f64,
    pub tol: f64,
    pub pass: bool,
}

impl PenroseCheck {
    pub fn max_residual(&self) -> f64 {
        self.xmx.max(self.mxm).max(self.mx_sym).max(self.xm_sym)
    }
}

pub fn check_penrose(m: &LinOp, x: &LinOp, tol: f64) -> Result<PenroseCheck> {
    if x.nrows() != m.ncols() || x.ncols() != m.nrows() {
        return Err(Error::Input(format!(
            "candidate inverse must be {}x{}, got {}x{}",
            m.ncols(),
            m.nrows(),
            x.nrows(),
            x.ncols()
        )));
    }
    let (m, x) = (m.matrix(), x.matrix());
    let mx = m * x;
    let xm = x * m;
    let xmx = (&xm * x - x).norm();
    let mxm = (&mx * m - m).norm();
    let mx_sym = (mx.transpose() - &mx).norm();
    let xm_sym = (xm.transpose() - &xm).norm();
    let pass = xmx <= tol && mxm <= tol && mx_sym <= tol && xm_sym <= tol;
    Ok(PenroseCheck {
        xmx,
        mxm,
        mx_sym,
        xm_sym,
        tol,
        pass,
    })
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &LinOp) -> f64 {
    spectral_norm(m.matrix())
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    sorted_svd(m).map_or(f64::NAN, |svd| svd.s[0])
}

/// Orthonormal columns spanning `ker M`. `tol = 0` selects
/// [`default_rank_tol`]; the number of columns is `cols − rank`.
pub fn kernel_basis(m: &LinOp, tol: f64) -> Result<DMatrix<f64>> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let svd = sorted_svd(m.matrix())?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    let tol = if tol == 0.0 {
        default_rank_tol(rows, cols, sigma_max)
    } else {
        tol
    };
    let rank = svd.s.iter().filter(|&&s| s > tol).count();
    Ok(svd.v.columns(rank, cols - rank).into_owned())
}

/// Parses the matrix CSV format: a header line `rows,cols` followed by `rows`
/// comma-separated lines. Blank lines and lines starting with `#` are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<LinOp> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Input("matrix CSV is empty".into()))?;
    let dims = parse_row(header, hline)?;
    if dims.len() != 2 || dims.iter().any(|d| *d < 1.0 || d.fract() != 0.0) {
        return Err(Error::Input(format!(
            "line {hline}: header must be `rows,cols` with positive integers"
        )));
    }
    let (rows, cols) = (dims[0] as usize, dims[1] as usize);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        let row = parse_row(line, lineno)?;
        if row.len() != cols {
            return Err(Error::Input(format!(
                "line {lineno}: expected {cols} values, found {}",
                row.len()
            )));
        }
        data.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Input(format!(
            "matrix CSV declares {rows} rows but contains {seen}"
        )));
    }
    LinOp::from_row_slice(rows, cols, &data)
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Input(format!("line {lineno}: bad number {tok:?}: {e}")))
        })
        .collect()
}

pub fn format_matrix_csv(m: &LinOp) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for r in m.matrix().row_iter() {
        let row: Vec<String> = r.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Random `rows×cols` matrix of exact rank `rank`: `U Σ Vᵀ` with orthonormal
/// factors from the QR of Gaussian matrices and singular values
/// log-uniform in `[sigma_min, 1]`.
pub fn random_with_rank<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rank: usize,
    sigma_min: f64,
    rng: &mut R,
) -> Result<LinOp> {
    if rank > rows.min(cols) || !(sigma_min > 0.0 && sigma_min <= 1.0) {
        return Err(Error::Input(format!(
            "rank {rank} for {rows}x{cols} with sigma_min {sigma_min}"
        )));
    }
    let mut gauss = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = gauss(rows, rows).qr().q();
    let v = gauss(cols, cols).qr().q();
    let mut sigma = DMatrix::zeros(rows, cols);
    let log_min = sigma_min.ln();
    for i in 0..rank {
        sigma[(i, i)] = (log_min * rng.random_range(0.0..=1.0)).exp();
    }
    LinOp::new(u * sigma * v.transpose())
}
