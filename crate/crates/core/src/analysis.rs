//! Panel data ingestion, outlier cleaning and the empirical diagnostics:
//! variance explained, principal component scores, factor regressions and
//! subspace distances.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::act::{act_threshold, adjust_eigenvalues_with, default_r_max, ActOptions};
use crate::error::{Error, Result};
use crate::methods::{evaluate_on, Basis, EstimatorParams, Method, SampleSpectra};
use crate::report::SCHEMA_VERSION;
use crate::spectral::{correlation_spectrum, covariance_spectrum, DataMatrix, Spectrum};

/// Outlier rule: deviation from the mean beyond this many IQRs.
pub const OUTLIER_IQRS: f64 = 10.0;

/// Relative size below which an `R` diagonal entry counts as zero.
const RANK_TOL: f64 = 1e-10;

const MISSING_TOKENS: [&str; 6] = ["", "na", "nan", "n/a", "null", "."];
const INDEX_HEADERS: [&str; 10] = [
    "", "date", "dates", "time", "index", "sasdate", "period", "month", "year", "obs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexColumn {
    /// First column is an index when its header looks like a date/label
    /// header or its first cell is not numeric.
    #[default]
    Auto,
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Drop series with any missing cell instead of failing.
    pub drop_missing: bool,
    pub index_column: IndexColumn,
    /// Numeric codes that mean "missing", e.g. `-99.99`.
    pub missing_values: Vec<f64>,
    /// Keep only these series, in this order.
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedSeries {
    pub name: String,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRecord {
    pub name: String,
    /// 0-based observation indices.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CleaningLog {
    pub dropped_series: Vec<DroppedSeries>,
    pub outliers: Vec<OutlierRecord>,
    /// Nonconstant series with zero IQR; left untouched.
    pub zero_iqr_series: Vec<String>,
    /// Observations removed under [`OutlierPolicy::DropRow`], 0-based in
    /// the pre-cleaning numbering.
    pub dropped_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub names: Vec<String>,
    pub data: DataMatrix,
    /// Row labels from the index column, if any.
    pub index: Option<Vec<String>>,
    pub log: CleaningLog,
}

impl PanelDataset {
    pub fn new(names: Vec<String>, data: DataMatrix) -> Result<Self> {
        if names.len() != data.p() {
            return Err(Error::Dimension(format!(
                "{} names for {} series",
                names.len(),
                data.p()
            )));
        }
        Ok(Self {
            names,
            data,
            index: None,
            log: CleaningLog::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|s| s == name)?;
        Some(self.data.values().column(j).iter().copied().collect())
    }
}

fn is_missing_token(cell: &str) -> bool {
    MISSING_TOKENS.iter().any(|t| cell.eq_ignore_ascii_case(t))
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_csv(file, opts)
}

/// Parses a header row of series names followed by one observation per
/// row. Rows and columns in errors are 1-based file positions.
pub fn parse_csv<R: Read>(reader: R, opts: &IngestOptions) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        row,
        column,
        message,
    };
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            parse_err(row, 0, e.to_string())
        })?;
        let row = rec
            .position()
            .map_or(records.len() + 2, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(parse_err(
                row,
                rec.len().min(headers.len()) + 1,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        records.push((row, rec));
    }

    let has_index = match opts.index_column {
        IndexColumn::Yes => true,
        IndexColumn::No => false,
        IndexColumn::Auto => {
            let h = headers
                .first()
                .map(|h| h.to_ascii_lowercase())
                .unwrap_or_default();
            INDEX_HEADERS.contains(&h.as_str())
                || records
                    .first()
                    .is_some_and(|(_, r)| !is_missing_token(&r[0]) && r[0].parse::<f64>().is_err())
        }
    };
    let first = usize::from(has_index);

    let mut seen = HashMap::new();
    for (j, h) in headers.iter().enumerate().skip(first) {
        if let Some(prev) = seen.insert(h.as_str(), j) {
            return Err(parse_err(
                1,
                j + 1,
                format!("duplicate header '{h}' (also column {})", prev + 1),
            ));
        }
    }
    let selected: Vec<usize> = match &opts.columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                seen.get(c.as_str())
                    .copied()
                    .ok_or_else(|| Error::Config(format!("no series named '{c}'")))
            })
            .collect::<Result<_>>()?,
        None => (first..headers.len()).collect(),
    };

    let n = records.len();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); selected.len()];
    for (row, rec) in &records {
        for (c, &j) in selected.iter().enumerate() {
            let cell = &rec[j];
            let value = if is_missing_token(cell) {
                None
            } else {
                let x: f64 = cell
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| parse_err(*row, j + 1, format!("non-numeric cell '{cell}'")))?;
                (!opts.missing_values.contains(&x)).then_some(x)
            };
            if value.is_none() && !opts.drop_missing {
                return Err(parse_err(
                    *row,
                    j + 1,
                    "missing value (enable drop-missing to skip the series)".into(),
                ));
            }
            columns[c].push(value);
        }
    }

    let mut log = CleaningLog::default();
    let mut names = Vec::new();
    let mut kept = Vec::new();
    for (c, &j) in selected.iter().enumerate() {
        let missing = columns[c].iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            log.dropped_series.push(DroppedSeries {
                name: headers[j].clone(),
                missing,
            });
        } else {
            names.push(headers[j].clone());
            kept.push(c);
        }
    }
    let values = DMatrix::from_fn(n, kept.len(), |i, c| {
        columns[kept[c]][i].expect("kept columns are complete")
    });
    let data = DataMatrix::new(values)?;
    let index = has_index.then(|| records.iter().map(|(_, r)| r[0].to_string()).collect());
    Ok(PanelDataset {
        names,
        data,
        index,
        log,
    })
}

/// Type-7 sample quantile: linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    /// Replace each outlier with its series median.
    #[default]
    ReplaceMedian,
    /// Remove every observation that is an outlier in any series.
    DropRow,
}

/// Flags observations more than ten IQRs from their series mean.
pub fn clean_outliers(ds: &PanelDataset, policy: OutlierPolicy) -> Result<PanelDataset> {
    let n = ds.n();
    if n < 4 {
        return Err(Error::Dimension(format!(
            "outlier cleaning needs n ≥ 4, got {n}"
        )));
    }
    let mut values = ds.data.values().clone();
    let mut log = ds.log.clone();
    let mut drop = HashSet::new();
    for (j, name) in ds.names.iter().enumerate() {
        let col: Vec<f64> = values.column(j).iter().copied().collect();
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let mean = col.iter().sum::<f64>() / n as f64;
        if iqr == 0.0 {
            if sorted[0] != sorted[n - 1] {
                log.zero_iqr_series.push(name.clone());
            }
            continue;
        }
        let rows: Vec<usize> = (0..n)
            .filter(|&i| (col[i] - mean).abs() > OUTLIER_IQRS * iqr)
            .collect();
        if rows.is_empty() {
            continue;
        }
        match policy {
            OutlierPolicy::ReplaceMedian => {
                let median = quantile(&sorted, 0.5);
                for &i in &rows {
                    values[(i, j)] = median;
                }
            }
            OutlierPolicy::DropRow => drop.extend(rows.iter().copied()),
        }
        log.outliers.push(OutlierRecord {
            name: name.clone(),
            rows,
        });
    }
    let mut index = ds.index.clone();
    if !drop.is_empty() {
        let keep: Vec<usize> = (0..n).filter(|i| !drop.contains(i)).collect();
        values = values.select_rows(keep.iter());
        index = index.map(|labels| keep.iter().map(|&i| labels[i].clone()).collect());
        let mut dropped: Vec<usize> = drop.into_iter().collect();
        dropped.sort_unstable();
        log.dropped_rows.extend(dropped);
    }
    Ok(PanelDataset {
        names: ds.names.clone(),
        data: DataMatrix::new(values)?,
        index,
        log,
    })
}

/// Share of the total eigenvalue mass in the top `k` eigenvalues.
pub fn variance_explained(spec: &Spectrum, k: usize) -> Result<f64> {
    if k > spec.p() {
        return Err(Error::Config(format!("k = {k} exceeds p = {}", spec.p())));
    }
    let total = spec.trace();
    if !(total > 0.0) {
        return Err(Error::NumericalDomain(
            "spectrum has zero total variance".into(),
        ));
    }
    Ok(spec.values()[..k].iter().sum::<f64>() / total)
}

/// Top principal directions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponents {
    /// `n × k`, mutually orthogonal columns.
    pub scores: DMatrix<f64>,
    /// `p × k` unit eigenvectors; the largest-magnitude entry of each is
    /// positive.
    pub loadings: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

pub fn principal_components(x: &DataMatrix, k: usize, basis: Basis) -> Result<PrincipalComponents> {
    let (n, p) = (x.n(), x.p());
    if k > (n - 1).min(p) {
        return Err(Error::Config(format!(
            "k = {k} exceeds min(n - 1, p) = {}",
            (n - 1).min(p)
        )));
    }
    let z = match basis {
        Basis::Covariance => x.centered(),
        Basis::Correlation => x.standardized()?,
    };
    let s = (z.transpose() * &z) / n as f64;
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut loadings = DMatrix::zeros(p, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v = -v;
        }
        loadings.set_column(c, &v);
    }
    Ok(PrincipalComponents {
        scores: &z * &loadings,
        eigenvalues: order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect(),
        loadings,
    })
}

pub fn pc_scores(x: &DataMatrix, k: usize, basis: Basis) -> Result<DMatrix<f64>> {
    Ok(principal_components(x, k, basis)?.scores)
}

/// Orthonormal basis of the column span via Householder QR.
fn orthonormal_basis(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if a.ncols() == 0 || a.ncols() > a.nrows() {
        return Err(Error::RankDeficient(format!(
            "{what} is {}×{}; need 1 ≤ columns ≤ rows",
            a.nrows(),
            a.ncols()
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|d| d.abs()).collect();
    let scale = diag.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) || diag.iter().any(|&d| d <= RANK_TOL * scale) {
        return Err(Error::RankDeficient(format!(
            "{what} does not have full column rank"
        )));
    }
    Ok(qr.q())
}

/// Fitted values of `y` regressed on an intercept and the columns of `f`.
pub fn ols_fit(y: &[f64], f: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = y.len();
    if f.nrows() != n {
        return Err(Error::Dimension(format!(
            "y has {n} rows, F has {}",
            f.nrows()
        )));
    }
    if f.ncols() + 1 > n {
        return Err(Error::RankDeficient(format!(
            "{} regressors for {n} observations",
            f.ncols() + 1
        )));
    }
    let mut x = DMatrix::from_element(n, f.ncols() + 1, 1.0);
    x.view_mut((0, 1), (n, f.ncols())).copy_from(f);
    let q = orthonormal_basis(&x, "regressor matrix [1, F]")?;
    let y = DVector::from_column_slice(y);
    Ok((&q * (q.transpose() * &y)).iter().copied().collect())
}

/// Coefficient of determination of `y` on `(1, F)`.
pub fn ols_r2(y: &[f64], f: &DMatrix<f64>) -> Result<f64> {
    let fitted = ols_fit(y, f)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::NumericalDomain("response has zero variance".into()));
    }
    let ssr: f64 = y.iter().zip(&fitted).map(|(v, h)| (v - h).powi(2)).sum();
    Ok((1.0 - ssr / sst).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDistance {
    pub operator: f64,
    pub frobenius: f64,
}

/// Spectral and Frobenius norms of `P_A − P_B` through the principal angles
/// between the column spans, without forming `n × n` projections.
pub fn projection_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<ProjectionDistance> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "A has {} rows, B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let qa = orthonormal_basis(a, "A")?;
    let qb = orthonormal_basis(b, "B")?;
    let (k, m) = (qa.ncols(), qb.ncols());
    let cosines: Vec<f64> = (qa.transpose() * qb)
        .singular_values()
        .iter()
        .map(|s| s.min(1.0))
        .collect();
    let sum_sq: f64 = cosines.iter().map(|c| c * c).sum();
    let frobenius = ((k + m) as f64 - 2.0 * sum_sq).max(0.0).sqrt();
    let operator = if k != m {
        1.0
    } else {
        let min = cosines.iter().copied().fold(1.0, f64::min);
        (1.0 - min * min).max(0.0).sqrt()
    };
    Ok(ProjectionDistance {
        operator,
        frobenius,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub r_max: Option<usize>,
    pub ed_threshold: Option<f64>,
    pub on_r_min: usize,
    pub basis_override: Option<Basis>,
    pub act: ActOptions,
}

impl EstimateOptions {
    pub fn params(&self, p: usize, n: usize) -> EstimatorParams {
        EstimatorParams {
            r_max: self.r_max.unwrap_or_else(|| default_r_max(p, n)),
            ed_threshold: self.ed_threshold,
            on_r_min: self.on_r_min,
            act: self.act,
            basis_override: self.basis_override,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEstimate {
    pub method: Method,
    pub basis: Basis,
    pub estimate: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub methods: Vec<Method>,
    pub options: EstimateOptions,
    pub r_max: usize,
    /// ACT cutoff `1 + √(p / (n − 1))`.
    pub threshold: f64,
    pub estimates: Vec<MethodEstimate>,
    /// Top `r_max` eigenvalues; `None` when the spectrum failed.
    pub covariance_eigenvalues: Option<Vec<f64>>,
    pub correlation_eigenvalues: Option<Vec<f64>>,
    /// ACT-adjusted eigenvalues `1..=r_max` on ACT's basis.
    pub adjusted_eigenvalues: Option<Vec<f64>>,
    pub adjusted_jittered: Vec<usize>,
    pub spectrum_errors: Vec<String>,
    pub cleaning: CleaningLog,
}

impl EstimateReport {
    pub fn estimate(&self, m: Method) -> Option<usize> {
        self.estimates
            .iter()
            .find(|e| e.method == m)
            .and_then(|e| e.estimate)
    }
}

/// Every requested method on one dataset; per-method failures are recorded
/// in the report, invalid options fail the whole call.
pub fn estimate_command(
    ds: &PanelDataset,
    methods: &[Method],
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    let (n, p) = (ds.n(), ds.p());
    if p < 2 {
        return Err(Error::Dimension(format!("need at least 2 series, got {p}")));
    }
    let params = opts.params(p, n);
    params.validate(methods)?;
    if params.r_max > p.saturating_sub(2) {
        return Err(Error::Config(format!(
            "r_max = {} exceeds p − 2 = {}",
            params.r_max,
            p.saturating_sub(2)
        )));
    }
    let cov = covariance_spectrum(&ds.data);
    let corr = correlation_spectrum(&ds.data);
    let mut spectrum_errors = Vec::new();
    for (label, res) in [("covariance", &cov), ("correlation", &corr)] {
        if let Err(e) = res {
            spectrum_errors.push(format!("{label} spectrum: {e}"));
        }
    }
    let spectra = SampleSpectra {
        covariance: cov.clone().ok(),
        correlation: corr.clone().ok(),
    };
    let estimates = methods
        .iter()
        .map(|&m| {
            let basis = params.basis_for(m);
            let result = match (basis, &cov, &corr) {
                (Basis::Covariance, Err(e), _) | (Basis::Correlation, _, Err(e)) => Err(e.clone()),
                _ => evaluate_on(m, &spectra, n, &params),
            };
            MethodEstimate {
                method: m,
                basis,
                estimate: result.as_ref().ok().copied(),
                error: result.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let top = |s: &Spectrum| s.top(params.r_max).to_vec();
    let adjusted = spectra
        .get(params.basis_for(Method::Act))
        .and_then(|s| adjust_eigenvalues_with(s, n, params.r_max, params.act).ok());
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        n,
        p,
        methods: methods.to_vec(),
        options: opts.clone(),
        r_max: params.r_max,
        threshold: act_threshold(p, n),
        estimates,
        covariance_eigenvalues: spectra.covariance.as_ref().map(top),
        correlation_eigenvalues: spectra.correlation.as_ref().map(top),
        adjusted_jittered: adjusted
            .as_ref()
            .map(|a| a.jittered.clone())
            .unwrap_or_default(),
        adjusted_eigenvalues: adjusted.map(|a| a.adjusted),
        spectrum_errors,
        cleaning: ds.log.clone(),
    })
}

/// Restricts two datasets to the observations they share. Datasets with
/// index labels are joined on them (in the order of `a`); otherwise they
/// must have equal length.
pub fn align(a: &PanelDataset, b: &PanelDataset) -> Result<(PanelDataset, PanelDataset)> {
    match (&a.index, &b.index) {
        (Some(ia), Some(ib)) => {
            let pos: HashMap<&str, usize> = ib
                .iter()
                .enumerate()
                .map(|(i, l)| (l.as_str(), i))
                .collect();
            let pairs: Vec<(usize, usize)> = ia
                .iter()
                .enumerate()
                .filter_map(|(i, l)| pos.get(l.as_str()).map(|&j| (i, j)))
                .collect();
            let pick = |ds: &PanelDataset, rows: Vec<usize>| -> Result<PanelDataset> {
                Ok(PanelDataset {
                    names: ds.names.clone(),
                    data: DataMatrix::new(ds.data.values().select_rows(rows.iter()))?,
                    index: ds
                        .index
                        .as_ref()
                        .map(|l| rows.iter().map(|&i| l[i].clone()).collect()),
                    log: ds.log.clone(),
                })
            };
            Ok((
                pick(a, pairs.iter().map(|p| p.0).collect())?,
                pick(b, pairs.iter().map(|p| p.1).collect())?,
            ))
        }
        _ if a.n() == b.n() => Ok((a.clone(), b.clone())),
        _ => Err(Error::Dimension(format!(
            "datasets have {} and {} observations and no shared index",
            a.n(),
            b.n()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFit {
    pub name: String,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub basis: Basis,
    pub k: usize,
    /// ACT estimate on the panel, whether or not it set `k`.
    pub act_estimate: Option<usize>,
    pub variance_explained: f64,
    pub pc_eigenvalues: Vec<f64>,
    pub fits: Vec<FactorFit>,
    /// Span of all observed factors against the span of the `k` PC scores.
    pub projection: ProjectionDistance,
    pub cleaning: CleaningLog,
}

/// The output of [`analyze`] plus fitted series for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub report: AnalyzeReport,
    /// Observed and fitted values per factor, aligned to `index`.
    pub fitted: Vec<(String, Vec<f64>, Vec<f64>)>,
    pub index: Option<Vec<String>>,
}

/// Regresses every observed factor on the top `k` principal component
/// scores of the panel and measures the distance between the two spans.
/// `k` defaults to the ACT estimate.
pub fn analyze(
    panel: &PanelDataset,
    factors: &PanelDataset,
    k: Option<usize>,
    basis: Basis,
) -> Result<Analysis> {
    let (panel, factors) = align(panel, factors)?;
    let (n, p) = (panel.n(), panel.p());
    let spec = match basis {
        Basis::Covariance => covariance_spectrum(&panel.data)?,
        Basis::Correlation => correlation_spectrum(&panel.data)?,
    };
    let corr = correlation_spectrum(&panel.data)?;
    let act = adjust_eigenvalues_with(&corr, n, default_r_max(p, n), ActOptions::default())
        .ok()
        .map(|a| a.estimate());
    let k = match (k, act) {
        (Some(k), _) => k,
        (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::Config(
                "ACT failed on the panel; pass k explicitly".into(),
            ))
        }
    };
    if k == 0 {
        return Err(Error::Config("k = 0 leaves nothing to regress on".into()));
    }
    let pcs = principal_components(&panel.data, k, basis)?;
    let mut fits = Vec::new();
    let mut fitted = Vec::new();
    for (j, name) in factors.names.iter().enumerate() {
        let y: Vec<f64> = factors.data.values().column(j).iter().copied().collect();
        fits.push(FactorFit {
            name: name.clone(),
            r2: ols_r2(&y, &pcs.scores)?,
        });
        fitted.push((name.clone(), y.clone(), ols_fit(&y, &pcs.scores)?));
    }
    let projection = projection_distance(factors.data.values(), &pcs.scores)?;
    Ok(Analysis {
        report: AnalyzeReport {
            schema_version: SCHEMA_VERSION,
            n,
            p,
            basis,
            k,
            act_estimate: act,
            variance_explained: variance_explained(&spec, k)?,
            pc_eigenvalues: pcs.eigenvalues,
            fits,
            projection,
            cleaning: panel.log.clone(),
        },
        fitted,
        index: panel.index.clone(),
    })
}
