//! Synthetic factor models `y = α + B f + ε` and samplers for them.
//!
//! Generators take `&mut impl Rng`; reproducible streams come from
//! [`SeededRng`], which maps a `(seed, stream)` pair onto an independent
//! ChaCha8 keystream.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{to_correlation, CorrelationMatrix, CovarianceMatrix, DataMatrix};

/// Distribution family of factors and idiosyncratic errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    /// `f ~ N(0, 1)`, `ε_j ~ N(0, ν_j²)`.
    #[default]
    Gaussian,
    /// `f ~ U(0, 2√3)`, `ε_j ~ U(0, 2√(3ν_j²))`: unit/`ν_j²` variance but
    /// nonzero means, which centering removes.
    Uniform,
}

/// Deterministic random stream: identical `(seed, stream)` pairs give
/// identical draws on every platform and thread schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededRng {
    pub seed: u64,
    pub stream: u64,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Where a model came from, kept for reproducibility manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelOrigin {
    Case { case: u8 },
    Table1 { scenario: u8, sigma2: f64 },
    IntroCounterexample { nu2_extra: f64, loading_scale: f64 },
    Custom,
}

/// How `a_{ℓj}` is read in the Case 1 loading construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case1SignRule {
    /// `a_{ℓj} = -1` iff `ℓ ≡ j (mod K)`: every row beyond the first `K`
    /// flips exactly one loading.
    #[default]
    Residue,
    /// `a_{ℓj} = -1` iff `ℓ = K·j`. Leaves the columns nearly collinear, so
    /// the population correlation has a single eigenvalue above 1.
    Product,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModelSpec {
    loadings: DMatrix<f64>,
    nu2: Vec<f64>,
    alpha: Vec<f64>,
    family: Population,
    origin: ModelOrigin,
}

impl FactorModelSpec {
    pub fn new(
        loadings: DMatrix<f64>,
        nu2: Vec<f64>,
        alpha: Vec<f64>,
        family: Population,
        origin: ModelOrigin,
    ) -> Result<Self> {
        let (p, k) = loadings.shape();
        if p <= k {
            return Err(Error::Config(format!("need p > K, got p = {p}, K = {k}")));
        }
        if nu2.len() != p || alpha.len() != p {
            return Err(Error::Dimension(format!(
                "{p} series but {} noise variances and {} intercepts",
                nu2.len(),
                alpha.len()
            )));
        }
        if let Some(v) = nu2.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!(
                "idiosyncratic variance {v} is not positive"
            )));
        }
        if loadings.iter().chain(&alpha).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite loading or intercept".into()));
        }
        Ok(Self {
            loadings,
            nu2,
            alpha,
            family,
            origin,
        })
    }

    pub fn p(&self) -> usize {
        self.loadings.nrows()
    }

    /// Number of loading columns.
    pub fn k(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn nu2(&self) -> &[f64] {
        &self.nu2
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn family(&self) -> Population {
        self.family
    }

    pub fn origin(&self) -> &ModelOrigin {
        &self.origin
    }

    pub fn with_family(mut self, family: Population) -> Self {
        self.family = family;
        self
    }

    /// `Σ = B Bᵀ + diag(ν²)`.
    pub fn covariance(&self) -> CovarianceMatrix {
        let mut sigma = &self.loadings * self.loadings.transpose();
        for (i, v) in self.nu2.iter().enumerate() {
            sigma[(i, i)] += v;
        }
        CovarianceMatrix::new(sigma).expect("B Bᵀ + diag is symmetric")
    }

    /// Numerical rank of `B`.
    pub fn loading_rank(&self) -> usize {
        matrix_rank(&self.loadings)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FactorModelDocument::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FactorModelDocument = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("model document: {e}")))?;
        doc.try_into()
    }
}

/// JSON form of a [`FactorModelSpec`]; loadings as nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModelDocument {
    pub p: usize,
    pub k: usize,
    pub loadings: Vec<Vec<f64>>,
    pub nu2: Vec<f64>,
    pub alpha: Vec<f64>,
    pub family: Population,
    pub origin: ModelOrigin,
}

impl From<&FactorModelSpec> for FactorModelDocument {
    fn from(s: &FactorModelSpec) -> Self {
        Self {
            p: s.p(),
            k: s.k(),
            loadings: s
                .loadings
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            nu2: s.nu2.clone(),
            alpha: s.alpha.clone(),
            family: s.family,
            origin: s.origin.clone(),
        }
    }
}

impl TryFrom<FactorModelDocument> for FactorModelSpec {
    type Error = Error;

    fn try_from(doc: FactorModelDocument) -> Result<Self> {
        if doc.loadings.len() != doc.p || doc.loadings.iter().any(|r| r.len() != doc.k) {
            return Err(Error::Dimension(
                "loadings do not match the declared p × K".into(),
            ));
        }
        let b = DMatrix::from_fn(doc.p, doc.k, |i, j| doc.loadings[i][j]);
        Self::new(b, doc.nu2, doc.alpha, doc.family, doc.origin)
    }
}

pub(crate) fn matrix_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    let tol = max * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Strictly positive draw from `U(0, hi)`.
fn positive_uniform<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> f64 {
    loop {
        let v = uniform(rng, 0.0, hi);
        if v > 0.0 {
            return v;
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

/// One of the four simulation designs with `K` factors in `p` series.
/// Gaussian population; see [`FactorModelSpec::with_family`].
pub fn build_case<R: Rng + ?Sized>(
    case: u8,
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<FactorModelSpec> {
    build_case_with(case, p, k, Case1SignRule::default(), rng)
}

pub fn build_case_with<R: Rng + ?Sized>(
    case: u8,
    p: usize,
    k: usize,
    sign_rule: Case1SignRule,
    rng: &mut R,
) -> Result<FactorModelSpec> {
    if k == 0 || p <= k {
        return Err(Error::Config(format!(
            "need p > K ≥ 1, got p = {p}, K = {k}"
        )));
    }
    let (b, nu2) = match case {
        1 => {
            let top = (3.0 / (p as f64).sqrt()).sqrt();
            let b = DMatrix::from_fn(p, k, |i, j| {
                let (l, j) = (i + 1, j + 1);
                if l <= k {
                    return top;
                }
                let flip = match sign_rule {
                    Case1SignRule::Residue => l % k == j % k,
                    Case1SignRule::Product => l == k * j,
                };
                let a = if flip { -1.0 } else { 1.0 };
                a * (3.0 / (p - j) as f64).sqrt()
            });
            (b, vec![0.55 * 0.55; p])
        }
        2 => {
            let b = random_rows(p, k, rng, |r| normal(r, 1.0));
            let nu2 = (0..p).map(|_| positive_uniform(rng, 180.0)).collect();
            (b, nu2)
        }
        3 => (random_rows(p, k, rng, |r| normal(r, 1.0)), vec![36.0; p]),
        4 => {
            let mut b = random_rows(p, k, rng, |r| normal(r, 0.2));
            for j in 0..k {
                b[(j, j)] = 1.0;
            }
            let nu2 = (0..p).map(|_| positive_uniform(rng, 5.5)).collect();
            (b, nu2)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown case {other}, expected 1..=4"
            )))
        }
    };
    FactorModelSpec::new(
        b,
        nu2,
        vec![0.0; p],
        Population::Gaussian,
        ModelOrigin::Case { case },
    )
}

/// `p × k` matrix filled row by row from `draw`.
fn random_rows<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> f64,
) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(p, k);
    for i in 0..p {
        for j in 0..k {
            b[(i, j)] = draw(rng);
        }
    }
    b
}

/// `n` independent rows `yᵢ = α + B fᵢ + εᵢ`.
pub fn sample_data<R: Rng + ?Sized>(
    spec: &FactorModelSpec,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    if n < 3 {
        return Err(Error::Config(format!("need n ≥ 3, got {n}")));
    }
    let (p, k) = (spec.p(), spec.k());
    let sd: Vec<f64> = spec.nu2.iter().map(|v| v.sqrt()).collect();
    let mut factors = DMatrix::zeros(n, k);
    let mut y = DMatrix::zeros(n, p);
    let sqrt3 = 3f64.sqrt();
    for i in 0..n {
        match spec.family {
            Population::Gaussian => {
                for f in 0..k {
                    factors[(i, f)] = normal(rng, 1.0);
                }
                for j in 0..p {
                    y[(i, j)] = normal(rng, sd[j]);
                }
            }
            Population::Uniform => {
                for f in 0..k {
                    factors[(i, f)] = uniform(rng, 0.0, 2.0 * sqrt3);
                }
                for j in 0..p {
                    y[(i, j)] = uniform(rng, 0.0, 2.0 * sqrt3 * sd[j]);
                }
            }
        }
    }
    y.gemm(1.0, &factors, &spec.loadings.transpose(), 1.0);
    for (mut col, a) in y.column_iter_mut().zip(&spec.alpha) {
        if *a != 0.0 {
            col.add_scalar_mut(*a);
        }
    }
    DataMatrix::new(y)
}

/// Correlation matrix of `Σ = B Bᵀ + diag(ν²)`.
pub fn population_correlation(spec: &FactorModelSpec) -> CorrelationMatrix {
    to_correlation(&spec.covariance()).expect("diagonal of Σ is at least ν² > 0")
}

/// `R = Q₁Q₁ᵀ + Q₂Q₂ᵀ` with `Q₁ = diag(Σ)^{-1/2} B` and the diagonal
/// `Q₂ = diag(Σ)^{-1/2} Ψ^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParts {
    pub q1: DMatrix<f64>,
    pub q2_diag: Vec<f64>,
}

impl CorrelationParts {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut r = &self.q1 * self.q1.transpose();
        for (i, q) in self.q2_diag.iter().enumerate() {
            r[(i, i)] += q * q;
        }
        r
    }
}

pub fn population_correlation_parts(spec: &FactorModelSpec) -> CorrelationParts {
    let sigma = spec.covariance();
    let inv_sd: Vec<f64> = (0..spec.p())
        .map(|i| 1.0 / sigma.as_matrix()[(i, i)].sqrt())
        .collect();
    let mut q1 = spec.loadings.clone();
    for (i, s) in inv_sd.iter().enumerate() {
        q1.row_mut(i).scale_mut(*s);
    }
    let q2_diag = spec
        .nu2
        .iter()
        .zip(&inv_sd)
        .map(|(v, s)| v.sqrt() * s)
        .collect();
    CorrelationParts { q1, q2_diag }
}

/// `‖diag(Σ)⁻¹ Ψ‖` for diagonal `Ψ`: the largest noise share of any
/// series. Values ≤ 1 satisfy the population eigenvalue bound's hypothesis.
pub fn noise_share_norm(spec: &FactorModelSpec) -> f64 {
    let sigma = spec.covariance();
    spec.nu2
        .iter()
        .enumerate()
        .map(|(i, v)| v / sigma.as_matrix()[(i, i)])
        .fold(0.0, f64::max)
}

/// Uniform-loading design: `K - 1` columns of `U(-1, 1)` loadings, a `K`-th column
/// that is random (scenario 1) or zero (scenario 2), and `ν² ≡ σ²`.
pub fn table1_scenario<R: Rng + ?Sized>(
    scenario: u8,
    k: usize,
    p: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<FactorModelSpec> {
    if k < 2 {
        return Err(Error::Config(format!("need K ≥ 2, got {k}")));
    }
    if !matches!(scenario, 1 | 2) {
        return Err(Error::Config(format!(
            "unknown scenario {scenario}, expected 1 or 2"
        )));
    }
    let mut b = random_rows(p, k, rng, |r| uniform(r, -1.0, 1.0));
    if scenario == 2 {
        b.column_mut(k - 1).fill(0.0);
    }
    FactorModelSpec::new(
        b,
        vec![sigma2; p],
        vec![0.0; p],
        Population::Gaussian,
        ModelOrigin::Table1 { scenario, sigma2 },
    )
}

/// Loadings only on the first `K` series through a well-conditioned
/// `K × K` block of `U(-1, 1)` entries, unit noise everywhere except series
/// `K + 1`, whose noise variance is `nu2_extra`.
pub fn intro_counterexample_spec<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    nu2_extra: f64,
    rng: &mut R,
) -> Result<FactorModelSpec> {
    intro_counterexample_spec_scaled(p, k, nu2_extra, 1.0, rng)
}

/// As [`intro_counterexample_spec`] with the loading block multiplied by
/// `loading_scale`.
pub fn intro_counterexample_spec_scaled<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    nu2_extra: f64,
    loading_scale: f64,
    rng: &mut R,
) -> Result<FactorModelSpec> {
    if k == 0 || p <= k + 1 {
        return Err(Error::Config(format!(
            "need p > K + 1, got p = {p}, K = {k}"
        )));
    }
    if !(nu2_extra > 0.0) || !(loading_scale > 0.0) {
        return Err(Error::Config(
            "nu2_extra and loading_scale must be positive".into(),
        ));
    }
    let block = loop {
        let candidate = random_rows(k, k, rng, |r| uniform(r, -1.0, 1.0));
        let sv = candidate.clone().singular_values();
        let (max, min) = (sv.max(), sv.min());
        if min > 0.0 && max / min < 100.0 {
            break candidate;
        }
    };
    let mut b = DMatrix::zeros(p, k);
    b.view_mut((0, 0), (k, k))
        .copy_from(&(block * loading_scale));
    let mut nu2 = vec![1.0; p];
    nu2[k] = nu2_extra;
    FactorModelSpec::new(
        b,
        nu2,
        vec![0.0; p],
        Population::Gaussian,
        ModelOrigin::IntroCounterexample {
            nu2_extra,
            loading_scale,
        },
    )
}
