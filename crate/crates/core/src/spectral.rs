//! Sample covariance and correlation matrices, their spectra, and the
//! population-level eigenvalue count.
//!
//! Covariances use the divisor `n` (not `n - 1`). When a panel has fewer
//! observations than series, sample spectra are computed from the `n × n`
//! Gram matrix and padded with exact zeros, which is much cheaper than the
//! `p × p` eigensolve and yields the same nonzero eigenvalues.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues in `[-tol, 0)` are treated as round-off and clamped to zero.
pub const EIGEN_CLAMP: f64 = 1e-8;

/// Allowed relative asymmetry of an input to [`eigenvalues_desc`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Population eigenvalues must exceed `1 + KAISER_MARGIN` to count.
pub const KAISER_MARGIN: f64 = 1e-10;

/// An `n × p` panel: rows are observations, columns are series.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 3 {
            return Err(Error::Dimension(format!(
                "need at least 3 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(Error::Dimension("no series".into()));
        }
        check_finite(&values)?;
        Ok(Self { values })
    }

    /// Builds a panel from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {} has a different length",
                i + 1
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        sample_covariance(&self.values).expect("DataMatrix has at least 3 rows")
    }

    /// Multiplies column `j` by `scales[j]`.
    pub fn scale_columns(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.p() {
            return Err(Error::Dimension(format!(
                "{} scales for {} columns",
                scales.len(),
                self.p()
            )));
        }
        let mut values = self.values.clone();
        for (mut col, &s) in values.column_iter_mut().zip(scales) {
            col *= s;
        }
        Self::new(values)
    }

    /// Copy with every column centered on its sample mean.
    pub fn centered(&self) -> DMatrix<f64> {
        center_columns(&self.values)
    }

    /// Centered columns scaled to unit (divisor `n`) variance.
    pub fn standardized(&self) -> Result<DMatrix<f64>> {
        let mut z = self.centered();
        let n = self.n() as f64;
        let variances: Vec<f64> = z.column_iter().map(|c| c.norm_squared() / n).collect();
        check_variances(&variances)?;
        for (mut col, v) in z.column_iter_mut().zip(&variances) {
            col /= v.sqrt();
        }
        Ok(z)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for (j, col) in m.column_iter().enumerate() {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i + 1,
                column: j + 1,
            });
        }
    }
    Ok(())
}

fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut xc = x.clone();
    let n = x.nrows() as f64;
    for mut col in xc.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    xc
}

/// Variances at or below `1e-12 · mean variance` count as zero.
fn check_variances(variances: &[f64]) -> Result<()> {
    let p = variances.len().max(1) as f64;
    let floor = 1e-12 * variances.iter().sum::<f64>() / p;
    match variances.iter().position(|&v| v <= floor) {
        Some(j) => Err(Error::ZeroVarianceSeries { column: j + 1 }),
        None => Ok(()),
    }
}

/// Symmetric positive semidefinite `p × p` sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    /// Wraps a matrix after checking it is square and symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m, 1e-12)?;
        Ok(Self(m))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Unit-diagonal symmetric matrix with entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m, 1e-12)?;
        if let Some(i) = (0..m.nrows()).find(|&i| (m[(i, i)] - 1.0).abs() > 1e-12) {
            return Err(Error::NumericalDomain(format!(
                "diagonal entry {} is {}, expected 1",
                i + 1,
                m[(i, i)]
            )));
        }
        if m.iter().any(|v| v.abs() > 1.0 + 1e-12) {
            return Err(Error::NumericalDomain(
                "correlation entry outside [-1, 1]".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(());
    }
    let p = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..p {
        for i in (j + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs() / scale);
        }
    }
    if worst > tol {
        Err(Error::Asymmetric(worst))
    } else {
        Ok(())
    }
}

/// `n⁻¹ Σᵢ (yᵢ − ȳ)(yᵢ − ȳ)ᵀ` over the rows of `x`.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    check_finite(x)?;
    let xc = center_columns(x);
    let mut s = xc.tr_mul(&xc) / n as f64;
    symmetrize(&mut s);
    Ok(CovarianceMatrix(s))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `D^{-1/2} M D^{-1/2}` with `D = diag(M)`.
pub fn to_correlation(m: &CovarianceMatrix) -> Result<CorrelationMatrix> {
    let s = &m.0;
    let p = s.nrows();
    let diag: Vec<f64> = (0..p).map(|i| s[(i, i)]).collect();
    check_variances(&diag)?;
    let inv_sd: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut r = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (s[(i, j)] * inv_sd[i] * inv_sd[j]).clamp(-1.0, 1.0)
        }
    });
    symmetrize(&mut r);
    Ok(CorrelationMatrix(r))
}

/// Descending eigenvalues of a symmetric positive semidefinite matrix,
/// tagged with the sample size that produced it (0 for population
/// matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    n: usize,
}

impl Spectrum {
    /// Validates an already-descending sequence.
    pub fn new(eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Dimension("empty spectrum".into()));
        }
        if let Some(v) = eigenvalues.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain(format!("non-finite eigenvalue {v}")));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::NumericalDomain(
                "eigenvalues are not in descending order".into(),
            ));
        }
        let last = *eigenvalues.last().unwrap();
        if last < -EIGEN_CLAMP * eigenvalues[0].abs().max(1.0) {
            return Err(Error::NotPositiveSemidefinite(last));
        }
        Ok(Self { eigenvalues, n })
    }

    /// Sorts into descending order first.
    pub fn from_unsorted(mut eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self::new(eigenvalues, n)
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The `j`-th largest eigenvalue, counting from 1.
    pub fn lambda(&self, j: usize) -> f64 {
        self.eigenvalues[j - 1]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn top(&self, k: usize) -> &[f64] {
        &self.eigenvalues[..k.min(self.p())]
    }

    /// Every eigenvalue multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            eigenvalues: self.eigenvalues.iter().map(|v| v * c).collect(),
            n: self.n,
        }
    }
}

/// All eigenvalues of the symmetric matrix `m`, descending.
///
/// Values in `[-tol, 0)` are clamped to 0, with
/// `tol = EIGEN_CLAMP · max(1, trace/p)`; anything more negative is an error.
pub fn eigenvalues_desc(m: &DMatrix<f64>, n: usize) -> Result<Spectrum> {
    check_symmetric(m, SYMMETRY_TOL)?;
    let p = m.nrows();
    if p == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDomain(
            "matrix has non-finite entries".into(),
        ));
    }
    let tol = EIGEN_CLAMP * (m.trace() / p as f64).max(1.0);
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NotPositiveSemidefinite(*v));
            }
            *v = 0.0;
        }
    }
    Ok(Spectrum {
        eigenvalues: values,
        n,
    })
}

/// Spectrum of `AᵀA / n` for a column-centered `n × p` matrix `a`, via
/// whichever of the two Gram matrices is smaller.
fn gram_spectrum(a: &DMatrix<f64>, n: usize) -> Result<Spectrum> {
    let (rows, p) = a.shape();
    let scale = 1.0 / n as f64;
    if rows <= p {
        let mut g = a * a.transpose() * scale;
        symmetrize(&mut g);
        let small = eigenvalues_desc(&g, n)?;
        let mut values = small.eigenvalues;
        // Centering puts the ones vector in the kernel: rank ≤ n − 1.
        *values.last_mut().expect("n ≥ 1") = 0.0;
        values.resize(p, 0.0);
        Ok(Spectrum {
            eigenvalues: values,
            n,
        })
    } else {
        let mut g = a.tr_mul(a) * scale;
        symmetrize(&mut g);
        eigenvalues_desc(&g, n)
    }
}

/// Eigenvalues of the sample covariance matrix of `x`.
pub fn covariance_spectrum(x: &DataMatrix) -> Result<Spectrum> {
    check_panel(x)?;
    gram_spectrum(&x.centered(), x.n())
}

fn check_panel(x: &DataMatrix) -> Result<()> {
    if x.p() < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 series, got {}",
            x.p()
        )));
    }
    Ok(())
}

/// Eigenvalues of the sample correlation matrix of `x`.
pub fn correlation_spectrum(x: &DataMatrix) -> Result<Spectrum> {
    check_panel(x)?;
    gram_spectrum(&x.standardized()?, x.n())
}

/// `max{j : λ_j(R) > 1}` for a population correlation matrix, 0 if none.
pub fn kaiser_population_count(r: &CorrelationMatrix) -> Result<usize> {
    let spec = eigenvalues_desc(&r.0, 0)?;
    Ok(spec
        .values()
        .iter()
        .filter(|&&v| v > 1.0 + KAISER_MARGIN)
        .count())
}

/// Number of sample correlation eigenvalues above 1.
///
/// Not consistent once `p/n` is non-negligible: the noise bulk of a sample
/// correlation matrix spreads up to `(1 + √(p/n))²`.
pub fn naive_kaiser_estimate(spec: &Spectrum) -> usize {
    spec.values().iter().filter(|&&v| v > 1.0).count()
}
