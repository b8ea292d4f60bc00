//! Monte Carlo replication engine: TRUE/OVER/UNDER/AVE tallies per method
//! and cell, plus the population-level Kaiser count grid.
//!
//! Replication `r` of cell `c` draws from stream `(c << 32) | r` of the
//! master seed, so results do not depend on the thread schedule.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::act::{default_r_max, ActOptions};
use crate::error::{Error, Result};
use crate::methods::{evaluate_on, Basis, EstimatorParams, Method, SampleSpectra};
use crate::report::SCHEMA_VERSION;
use crate::sim::{
    build_case_with, intro_counterexample_spec, population_correlation, sample_data,
    table1_scenario, Case1SignRule, FactorModelSpec, Population, SeededRng,
};
use crate::spectral::{correlation_spectrum, covariance_spectrum, kaiser_population_count};

/// Stream reserved for the shared loading draw in fixed-loading mode.
pub const FIXED_LOADING_STREAM: u64 = 0xFFFF_FFFF;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDesign {
    Case { case: u8 },
    IntroCounterexample { nu2_extra: f64 },
}

impl ModelDesign {
    fn label(&self) -> String {
        match self {
            ModelDesign::Case { case } => format!("Case {case}"),
            ModelDesign::IntroCounterexample { nu2_extra } => {
                format!("Counterexample (extra noise variance {nu2_extra})")
            }
        }
    }
}

/// Whether random loadings are redrawn for every replication or drawn once
/// per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingMode {
    #[default]
    Fresh,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: ModelDesign,
    pub k: usize,
    pub p_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub families: Vec<Population>,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// `None` uses the default bound for each `(p, n)`.
    pub r_max: Option<usize>,
    pub ed_threshold: Option<f64>,
    pub on_r_min: usize,
    pub act: ActOptions,
    pub basis_override: Option<Basis>,
    pub loadings: LoadingMode,
    pub case1_sign_rule: Case1SignRule,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    pub threads: usize,
}

impl ExperimentConfig {
    /// Gaussian, `K = 5`, all table methods, fresh loadings.
    pub fn for_case(
        case: u8,
        p_values: Vec<usize>,
        n_values: Vec<usize>,
        replications: usize,
        seed: u64,
    ) -> Self {
        Self {
            design: ModelDesign::Case { case },
            k: 5,
            p_values,
            n_values,
            families: vec![Population::Gaussian],
            replications,
            seed,
            methods: Method::TABLE.to_vec(),
            r_max: None,
            ed_threshold: None,
            on_r_min: 0,
            act: ActOptions::default(),
            basis_override: None,
            loadings: LoadingMode::Fresh,
            case1_sign_rule: Case1SignRule::default(),
            threads: 0,
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &family in &self.families {
            for &n in &self.n_values {
                for &p in &self.p_values {
                    cells.push(Cell {
                        id: cells.len() as u64,
                        family,
                        n,
                        p,
                    });
                }
            }
        }
        cells
    }

    fn params_for(&self, p: usize, n: usize) -> EstimatorParams {
        EstimatorParams {
            r_max: self.r_max.unwrap_or_else(|| default_r_max(p, n)),
            ed_threshold: self.ed_threshold,
            on_r_min: self.on_r_min,
            act: self.act,
            basis_override: self.basis_override,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("empty method list".into());
        }
        if self.replications == 0 {
            return bad("need at least one replication".into());
        }
        if self.p_values.is_empty() || self.n_values.is_empty() || self.families.is_empty() {
            return bad("p, n and family lists must be non-empty".into());
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if let ModelDesign::Case { case } = self.design {
            if !(1..=4).contains(&case) {
                return bad(format!("unknown case {case}, expected 1..=4"));
            }
        }
        if self.replications as u64 >= FIXED_LOADING_STREAM {
            return bad("too many replications".into());
        }
        for cell in self.cells() {
            if cell.n < 3 {
                return bad(format!("n = {} is below 3", cell.n));
            }
            if cell.p < self.k + 2 {
                return bad(format!(
                    "p = {} must be at least K + 2 = {}",
                    cell.p,
                    self.k + 2
                ));
            }
            let params = self.params_for(cell.p, cell.n);
            params.validate(&self.methods)?;
            if params.r_max > cell.p - 2 || params.r_max >= cell.n {
                return bad(format!(
                    "r_max = {} too large for p = {}, n = {}",
                    params.r_max, cell.p, cell.n
                ));
            }
        }
        Ok(())
    }
}

/// One `(family, n, p)` combination of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: u64,
    pub family: Population,
    pub n: usize,
    pub p: usize,
}

impl Cell {
    pub fn stream(&self, replication: u64) -> u64 {
        (self.id << 32) | replication
    }
}

/// Raw outcome counts of one method in one cell.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodTally {
    pub true_count: usize,
    pub over_count: usize,
    pub under_count: usize,
    pub failed_count: usize,
    /// Sum of successful estimates, for AVE.
    pub estimate_sum: usize,
    pub histogram: BTreeMap<usize, usize>,
    pub first_error: Option<String>,
}

impl MethodTally {
    pub fn record(&mut self, outcome: &Result<usize>, k: usize) {
        match outcome {
            Ok(est) => {
                match est.cmp(&k) {
                    std::cmp::Ordering::Equal => self.true_count += 1,
                    std::cmp::Ordering::Greater => self.over_count += 1,
                    std::cmp::Ordering::Less => self.under_count += 1,
                }
                self.estimate_sum += est;
                *self.histogram.entry(*est).or_default() += 1;
            }
            Err(e) => {
                self.failed_count += 1;
                if self.first_error.is_none() {
                    self.first_error = Some(e.to_string());
                }
            }
        }
    }

    /// Associative, commutative apart from which first error is kept.
    pub fn merge(&mut self, other: &MethodTally) {
        self.true_count += other.true_count;
        self.over_count += other.over_count;
        self.under_count += other.under_count;
        self.failed_count += other.failed_count;
        self.estimate_sum += other.estimate_sum;
        for (&k, &c) in &other.histogram {
            *self.histogram.entry(k).or_default() += c;
        }
        if self.first_error.is_none() {
            self.first_error.clone_from(&other.first_error);
        }
    }

    pub fn total(&self) -> usize {
        self.true_count + self.over_count + self.under_count + self.failed_count
    }

    pub fn successes(&self) -> usize {
        self.true_count + self.over_count + self.under_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTally {
    pub cell: Cell,
    pub k: usize,
    pub r_max: usize,
    pub replications: usize,
    pub methods: Vec<(Method, MethodTally)>,
}

/// Maps `f` over `0..count`, concurrently when the `parallel` feature is
/// on and `threads != 1`; output order always follows the index.
pub fn replicate<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
        if let Ok(pool) = pool {
            return pool.install(|| (0..count).into_par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    (0..count).map(f).collect()
}

fn build_model(
    cfg: &ExperimentConfig,
    p: usize,
    rng: &mut impl rand::Rng,
) -> Result<FactorModelSpec> {
    match cfg.design {
        ModelDesign::Case { case } => build_case_with(case, p, cfg.k, cfg.case1_sign_rule, rng),
        ModelDesign::IntroCounterexample { nu2_extra } => {
            intro_counterexample_spec(p, cfg.k, nu2_extra, rng)
        }
    }
}

/// The model used by `replication` of `cell`, drawn exactly as
/// [`run_cell`] draws it.
pub fn cell_model(cfg: &ExperimentConfig, cell: Cell, replication: u64) -> Result<FactorModelSpec> {
    let stream = match cfg.loadings {
        LoadingMode::Fixed => FIXED_LOADING_STREAM,
        LoadingMode::Fresh => replication,
    };
    let mut rng = SeededRng::new(cfg.seed, cell.stream(stream)).rng();
    Ok(build_model(cfg, cell.p, &mut rng)?.with_family(cell.family))
}

/// Runs every replication of one cell.
pub fn run_cell(cfg: &ExperimentConfig, cell: Cell) -> Result<CellTally> {
    let params = cfg.params_for(cell.p, cell.n);
    params.validate(&cfg.methods)?;
    let needs = |basis| cfg.methods.iter().any(|&m| params.basis_for(m) == basis);
    let (need_cov, need_corr) = (needs(Basis::Covariance), needs(Basis::Correlation));

    let fixed = match cfg.loadings {
        LoadingMode::Fixed => {
            let mut rng = SeededRng::new(cfg.seed, cell.stream(FIXED_LOADING_STREAM)).rng();
            Some(build_model(cfg, cell.p, &mut rng)?.with_family(cell.family))
        }
        LoadingMode::Fresh => None,
    };

    let outcomes: Vec<Result<Vec<Result<usize>>>> = replicate(cfg.replications, cfg.threads, |r| {
        let mut rng = SeededRng::new(cfg.seed, cell.stream(r as u64)).rng();
        let model = match &fixed {
            Some(m) => m.clone(),
            None => build_model(cfg, cell.p, &mut rng)?.with_family(cell.family),
        };
        let data = sample_data(&model, cell.n, &mut rng)?;
        let cov = need_cov.then(|| covariance_spectrum(&data));
        let corr = need_corr.then(|| correlation_spectrum(&data));
        let spectra = SampleSpectra {
            covariance: cov.as_ref().and_then(|s| s.as_ref().ok().cloned()),
            correlation: corr.as_ref().and_then(|s| s.as_ref().ok().cloned()),
        };
        Ok(cfg
            .methods
            .iter()
            .map(|&m| {
                let failed = match params.basis_for(m) {
                    Basis::Covariance => cov.as_ref().and_then(|s| s.as_ref().err()),
                    Basis::Correlation => corr.as_ref().and_then(|s| s.as_ref().err()),
                };
                match failed {
                    Some(e) => Err(e.clone()),
                    None => evaluate_on(m, &spectra, cell.n, &params),
                }
            })
            .collect())
    });

    let mut tallies: Vec<(Method, MethodTally)> = cfg
        .methods
        .iter()
        .map(|&m| (m, MethodTally::default()))
        .collect();
    for outcome in outcomes {
        let per_method = outcome?;
        for ((_, tally), result) in tallies.iter_mut().zip(&per_method) {
            tally.record(result, cfg.k);
        }
    }
    Ok(CellTally {
        cell,
        k: cfg.k,
        r_max: params.r_max,
        replications: cfg.replications,
        methods: tallies,
    })
}

/// Runs all cells of `cfg` and aggregates them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReplicationReport> {
    cfg.validate()?;
    let tallies = cfg
        .cells()
        .into_iter()
        .map(|cell| run_cell(cfg, cell))
        .collect::<Result<Vec<_>>>()?;
    aggregate(cfg, &tallies)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub basis: Basis,
    pub true_pct: f64,
    pub over_pct: f64,
    pub under_pct: f64,
    pub failed_pct: f64,
    pub true_count: usize,
    pub over_count: usize,
    pub under_count: usize,
    pub failed_count: usize,
    /// Mean estimate over successful replications; `None` if all failed.
    pub ave_k: Option<f64>,
    pub histogram: BTreeMap<usize, usize>,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell_id: u64,
    pub family: Population,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub r_max: usize,
    pub replications: usize,
    pub methods: Vec<MethodSummary>,
}

impl CellReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub master_seed: u64,
    pub generator: String,
    pub stream_rule: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub loadings: LoadingMode,
    /// How the ON configuration is parameterized.
    pub on_setting: String,
    pub seed_manifest: SeedManifest,
    pub cells: Vec<CellReport>,
}

/// Splits 100% over `counts` at 0.1 resolution by largest remainder, so the
/// parts always add up to exactly 1000 tenths.
pub fn percentages(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let mut tenths: Vec<usize> = counts.iter().map(|c| c * 1000 / total).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(counts[i] * 1000 % total));
    let short = 1000 - tenths.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        tenths[i] += 1;
    }
    tenths.into_iter().map(|t| t as f64 / 10.0).collect()
}

pub fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

pub fn summarize(method: Method, basis: Basis, tally: &MethodTally) -> MethodSummary {
    let pct = percentages(&[
        tally.true_count,
        tally.over_count,
        tally.under_count,
        tally.failed_count,
    ]);
    let ok = tally.successes();
    MethodSummary {
        method,
        basis,
        true_pct: pct[0],
        over_pct: pct[1],
        under_pct: pct[2],
        failed_pct: pct[3],
        true_count: tally.true_count,
        over_count: tally.over_count,
        under_count: tally.under_count,
        failed_count: tally.failed_count,
        ave_k: (ok > 0).then(|| round_to(tally.estimate_sum as f64 / ok as f64, 2)),
        histogram: tally.histogram.clone(),
        first_error: tally.first_error.clone(),
    }
}

pub fn aggregate(cfg: &ExperimentConfig, tallies: &[CellTally]) -> Result<ReplicationReport> {
    if cfg.methods.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    let cells = tallies
        .iter()
        .map(|t| {
            let params = cfg.params_for(t.cell.p, t.cell.n);
            CellReport {
                cell_id: t.cell.id,
                family: t.cell.family,
                n: t.cell.n,
                p: t.cell.p,
                k: t.k,
                r_max: t.r_max,
                replications: t.replications,
                methods: t
                    .methods
                    .iter()
                    .map(|(m, tally)| summarize(*m, params.basis_for(*m), tally))
                    .collect(),
            }
        })
        .collect();
    Ok(ReplicationReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        loadings: cfg.loadings,
        on_setting: format!("r_min = {}, r_max as configured", cfg.on_r_min),
        seed_manifest: SeedManifest {
            master_seed: cfg.seed,
            generator: "ChaCha8 (seed_from_u64, per-replication stream)".into(),
            stream_rule: format!(
                "stream = cell_id * 2^32 + replication; fixed loadings use replication {FIXED_LOADING_STREAM:#x}"
            ),
            cells: tallies.iter().map(|t| t.cell).collect(),
        },
        cells,
    })
}

fn family_label(f: Population) -> &'static str {
    match f {
        Population::Gaussian => "Gaussian",
        Population::Uniform => "Uniform",
    }
}

type RowFormat = fn(&MethodSummary) -> String;

/// Aligned TRUE/OVER/UNDER/AVE rows per `p`, one block per `(family, n)`.
pub fn text_table(report: &ReplicationReport) -> String {
    let mut out = String::new();
    let mut blocks: Vec<(Population, usize)> = Vec::new();
    for c in &report.cells {
        if !blocks.contains(&(c.family, c.n)) {
            blocks.push((c.family, c.n));
        }
    }
    for (family, n) in blocks {
        let cells: Vec<&CellReport> = report
            .cells
            .iter()
            .filter(|c| c.family == family && c.n == n)
            .collect();
        let reps = cells.first().map_or(0, |c| c.replications);
        let _ = writeln!(
            out,
            "{}, {} population, n = {n}, K = {}, R = {reps}",
            report.config.design.label(),
            family_label(family),
            report.config.k
        );
        let _ = write!(out, "{:>6} {:<6}", "p", "");
        for m in &report.config.methods {
            let _ = write!(out, "{:>8}", m.name());
        }
        out.push('\n');
        for cell in cells {
            let rows: [(&str, RowFormat); 4] = [
                ("TRUE", |s| format!("{:.1}", s.true_pct)),
                ("OVER", |s| format!("{:.1}", s.over_pct)),
                ("UNDER", |s| format!("{:.1}", s.under_pct)),
                ("AVE", |s| s.ave_k.map_or("-".into(), |a| format!("{a:.2}"))),
            ];
            for (i, (label, value)) in rows.iter().enumerate() {
                let p_col = if i == 0 {
                    cell.p.to_string()
                } else {
                    String::new()
                };
                let _ = write!(out, "{p_col:>6} {label:<6}");
                for s in &cell.methods {
                    let _ = write!(out, "{:>8}", value(s));
                }
                out.push('\n');
            }
            let failed: Vec<String> = cell
                .methods
                .iter()
                .filter(|s| s.failed_count > 0)
                .map(|s| format!("{} {}", s.method, s.failed_count))
                .collect();
            if !failed.is_empty() {
                let _ = writeln!(out, "{:>6} failed: {}", "", failed.join(", "));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub scenario: u8,
    pub k: usize,
    pub p: usize,
    pub sigma2: f64,
    pub expected: usize,
    /// Population Kaiser count for each seed.
    pub counts: Vec<usize>,
}

impl Table1Cell {
    pub fn all_match(&self) -> bool {
        self.counts.iter().all(|&c| c == self.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub schema_version: u32,
    pub master_seed: u64,
    pub seeds: usize,
    pub cells: Vec<Table1Cell>,
}

impl Table1Report {
    pub fn all_match(&self) -> bool {
        self.cells.iter().all(Table1Cell::all_match)
    }
}

/// Population correlation Kaiser counts over the grid `K ∈ {5, 10}`,
/// `p ∈ {50, 100}`, `σ² ∈ {1, 2, 3}` for both scenarios. Seed `s` of cell
/// `c` uses stream `(c << 32) | s`.
pub fn run_table1(seeds: usize, master_seed: u64) -> Result<Table1Report> {
    if seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let mut cells = Vec::new();
    let mut id = 0u64;
    for scenario in [1u8, 2] {
        for k in [5usize, 10] {
            for p in [50usize, 100] {
                for sigma2 in [1.0, 2.0, 3.0] {
                    let counts = (0..seeds as u64)
                        .map(|s| {
                            let mut rng = SeededRng::new(master_seed, (id << 32) | s).rng();
                            let spec = table1_scenario(scenario, k, p, sigma2, &mut rng)?;
                            kaiser_population_count(&population_correlation(&spec))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    cells.push(Table1Cell {
                        scenario,
                        k,
                        p,
                        sigma2,
                        expected: if scenario == 1 { k } else { k - 1 },
                        counts,
                    });
                    id += 1;
                }
            }
        }
    }
    Ok(Table1Report {
        schema_version: SCHEMA_VERSION,
        master_seed,
        seeds,
        cells,
    })
}

/// Scenario blocks side by side, one row per `(K, p)`, one column per `σ²`.
pub fn table1_text(report: &Table1Report) -> String {
    let mut out = format!(
        "Population correlation eigenvalues above 1 ({} seeds)\n",
        report.seeds
    );
    let _ = writeln!(
        out,
        "{:>9} {:>4} {:>4} {:>6} {:>6} {:>6}",
        "scenario", "K", "p", "s2=1", "s2=2", "s2=3"
    );
    for chunk in report.cells.chunks(3) {
        let c0 = &chunk[0];
        let _ = write!(out, "{:>9} {:>4} {:>4}", c0.scenario, c0.k, c0.p);
        for c in chunk {
            let shown = if c.all_match() {
                c.expected.to_string()
            } else {
                format!("{:?}", c.counts)
            };
            let _ = write!(out, " {shown:>6}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(case: u8, reps: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_case(case, vec![40], vec![60], reps, 11);
        cfg.methods = vec![Method::Act, Method::Er, Method::Ic3, Method::Kaiser];
        cfg
    }

    #[test]
    fn percentage_examples() {
        assert_eq!(percentages(&[198, 0, 2, 0]), vec![99.0, 0.0, 1.0, 0.0]);
        let thirds = percentages(&[1, 1, 1]);
        assert_eq!(
            thirds
                .iter()
                .map(|x| (x * 10.0).round() as usize)
                .sum::<usize>(),
            1000
        );
        assert_eq!(percentages(&[0, 0]), vec![0.0, 0.0]);
    }

    #[test]
    fn ave_rounds_to_hundredths() {
        let mut t = MethodTally::default();
        for est in [5, 5, 4] {
            t.record(&Ok(est), 5);
        }
        let s = summarize(Method::Act, Basis::Correlation, &t);
        assert_eq!(s.ave_k, Some(4.67));
        assert_eq!((s.true_count, s.under_count), (2, 1));
    }

    #[test]
    fn single_replication_true() {
        let mut t = MethodTally::default();
        t.record(&Ok(5), 5);
        let s = summarize(Method::Er, Basis::Covariance, &t);
        assert_eq!((s.true_pct, s.ave_k), (100.0, Some(5.0)));
    }

    #[test]
    fn failures_are_counted_not_dropped() {
        let mut t = MethodTally::default();
        t.record(&Ok(3), 5);
        t.record(&Err(Error::NumericalDomain("x".into())), 5);
        let s = summarize(Method::Gr, Basis::Covariance, &t);
        assert_eq!(s.failed_count, 1);
        assert_eq!((s.under_pct, s.failed_pct), (50.0, 50.0));
        assert_eq!(s.ave_k, Some(3.0));
        assert!(s.first_error.is_some());
    }

    #[test]
    fn empty_method_list_is_config_error() {
        let mut cfg = small(4, 2);
        cfg.methods.clear();
        assert!(aggregate(&cfg, &[]).unwrap_err().is_config());
        assert!(cfg.validate().unwrap_err().is_config());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small(4, 2);
        cfg.p_values = vec![6];
        assert!(cfg.validate().is_err());
        let mut cfg = small(9, 2);
        assert!(cfg.validate().is_err());
        cfg = small(4, 0);
        assert!(cfg.validate().is_err());
        cfg = small(4, 2);
        cfg.methods.push(Method::Ed);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tally_merge_matches_sequential_record() {
        let outcomes = [Ok(5), Ok(6), Err(Error::Config("a".into())), Ok(2), Ok(5)];
        let mut whole = MethodTally::default();
        outcomes.iter().for_each(|o| whole.record(o, 5));
        let (mut a, mut b) = (MethodTally::default(), MethodTally::default());
        outcomes[..2].iter().for_each(|o| a.record(o, 5));
        outcomes[2..].iter().for_each(|o| b.record(o, 5));
        a.merge(&b);
        assert_eq!(a, whole);
        assert_eq!(whole.total(), 5);
    }

    #[test]
    fn reports_partition_replications() {
        let report = run_experiment(&small(4, 6)).unwrap();
        for cell in &report.cells {
            for s in &cell.methods {
                assert_eq!(
                    s.true_count + s.over_count + s.under_count + s.failed_count,
                    6
                );
                let sum = s.true_pct + s.over_pct + s.under_pct + s.failed_pct;
                assert!((sum - 100.0).abs() < 1e-9);
                if let Some(a) = s.ave_k {
                    assert!(a >= 0.0 && a <= cell.r_max as f64);
                }
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = small(2, 8);
        cfg.threads = 1;
        let one = run_experiment(&cfg).unwrap();
        cfg.threads = 3;
        let three = run_experiment(&cfg).unwrap();
        assert_eq!(one.cells, three.cells);
        assert_eq!(
            crate::report::to_json(&one.cells, false).unwrap(),
            crate::report::to_json(&three.cells, false).unwrap()
        );
    }

    #[test]
    fn fixed_loadings_mode_runs() {
        let mut cfg = small(3, 4);
        cfg.loadings = LoadingMode::Fixed;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.loadings, LoadingMode::Fixed);
        assert_eq!(report.cells[0].methods.len(), 4);
    }

    #[test]
    fn cell_model_matches_run() {
        let cfg = small(2, 3);
        let cell = cfg.cells()[0];
        let mut rng = SeededRng::new(cfg.seed, cell.stream(1)).rng();
        let direct = build_case_with(2, 40, 5, Case1SignRule::default(), &mut rng).unwrap();
        assert_eq!(cell_model(&cfg, cell, 1).unwrap(), direct);
        let mut fixed = cfg.clone();
        fixed.loadings = LoadingMode::Fixed;
        assert_eq!(
            cell_model(&fixed, cell, 0).unwrap(),
            cell_model(&fixed, cell, 2).unwrap()
        );
    }

    #[test]
    fn cells_enumerate_family_then_n_then_p() {
        let mut cfg = ExperimentConfig::for_case(1, vec![20, 30], vec![50, 60], 1, 0);
        cfg.families = vec![Population::Gaussian, Population::Uniform];
        let cells = cfg.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!((cells[1].p, cells[1].n), (30, 50));
        assert_eq!((cells[2].p, cells[2].n), (20, 60));
        assert_eq!(cells[4].family, Population::Uniform);
        assert_eq!(cells[5].stream(7), (5 << 32) | 7);
    }

    #[test]
    fn text_table_layout() {
        let report = run_experiment(&small(1, 2)).unwrap();
        let text = text_table(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("Case 1, Gaussian population, n = 60"));
        assert!(lines[1].contains("ACT") && lines[1].contains("IC3"));
        assert!(lines[2].trim_start().starts_with("40 TRUE"));
        assert!(lines[3].trim_start().starts_with("OVER"));
        assert!(lines[5].trim_start().starts_with("AVE"));
    }

    #[test]
    fn table1_small_run() {
        let report = run_table1(2, 3).unwrap();
        assert_eq!(report.cells.len(), 24);
        assert!(report.all_match(), "{}", table1_text(&report));
        assert!(run_table1(0, 3).is_err());
    }
}
