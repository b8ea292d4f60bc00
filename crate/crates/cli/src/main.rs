use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use factor_count::act::{ActOptions, Normalization, TiePolicy};
use factor_count::analysis::{
    analyze, clean_outliers, estimate_command, ingest_csv, EstimateOptions, IndexColumn,
    IngestOptions, OutlierPolicy, PanelDataset,
};
use factor_count::harness::{
    cell_model, run_experiment, run_table1, table1_text, text_table, ExperimentConfig, LoadingMode,
    ModelDesign,
};
use factor_count::methods::{Basis, Method};
use factor_count::report::to_json;
use factor_count::sim::{Case1SignRule, Population};
use factor_count::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "factor-count",
    version,
    about = "Estimate the number of common factors in panel data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the number of factors of a CSV panel.
    Estimate(EstimateArgs),
    /// Monte Carlo comparison of estimators on a simulation design.
    Simulate(SimulateArgs),
    /// Population correlation eigenvalue counts for the uniform-loading grid.
    Table1(Table1Args),
    /// Regress observed factors on principal component factors.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-line JSON.
    #[arg(long)]
    compact: bool,
}

#[derive(Args)]
struct InputArgs {
    /// Drop series that have missing cells instead of failing.
    #[arg(long)]
    drop_missing: bool,
    /// Whether the first column holds row labels.
    #[arg(long, value_enum, default_value_t = IndexArg::Auto)]
    index_col: IndexArg,
    /// Numeric code that marks a missing cell; repeatable.
    #[arg(long = "missing-value", allow_hyphen_values = true)]
    missing_values: Vec<f64>,
    /// Replace or drop observations more than ten IQRs from the mean.
    #[arg(long)]
    clean: bool,
    #[arg(long, value_enum, default_value_t = OutlierArg::Median)]
    outlier_policy: OutlierArg,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Comma-separated subset of ACT,ER,GR,ED,ON,PC1-3,IC1-3,KAISER.
    #[arg(long, default_value = "ACT,ER,GR,ON,PC3,IC3")]
    methods: String,
    /// Largest count considered; default min(p/2, (n-1)/2, 50, p-2).
    #[arg(long)]
    r_max: Option<usize>,
    /// Eigenvalue gap threshold; required when ED is requested.
    #[arg(long)]
    ed_threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    on_r_min: usize,
    /// Feed every method this basis instead of its default.
    #[arg(long, value_enum)]
    basis: Option<BasisArg>,
    /// Divide the partial Stieltjes sum by p - j + 1 instead of p - j.
    #[arg(long)]
    averaged: bool,
    /// Fail on tied eigenvalues instead of jittering them apart.
    #[arg(long)]
    strict_ties: bool,
}

impl EstimatorArgs {
    fn act(&self) -> ActOptions {
        ActOptions {
            normalization: if self.averaged {
                Normalization::Averaged
            } else {
                Normalization::Verbatim
            },
            ties: if self.strict_ties {
                TiePolicy::Error
            } else {
                TiePolicy::Jitter
            },
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    csv: PathBuf,
    #[command(flatten)]
    estimators: EstimatorArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation design 1-4.
    #[arg(long, required_unless_present = "counterexample", value_parser = clap::value_parser!(u8).range(1..=4))]
    case: Option<u8>,
    /// Instead of a case, loadings on the first K series only and this
    /// noise variance on series K + 1.
    #[arg(long, conflicts_with = "case")]
    counterexample: Option<f64>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gaussian")]
    family: Vec<FamilyArg>,
    #[arg(long, value_enum, default_value_t = LoadingArg::Fresh)]
    loadings: LoadingArg,
    #[arg(long, value_enum, default_value_t = SignRuleArg::Residue)]
    case1_sign_rule: SignRuleArg,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Aligned TRUE/OVER/UNDER/AVE table instead of JSON.
    #[arg(long)]
    text_table: bool,
    /// Also write the first cell's replication-0 model as JSON.
    #[arg(long)]
    dump_model: Option<PathBuf>,
    #[command(flatten)]
    estimators: EstimatorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    text_table: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    csv: PathBuf,
    /// CSV of observed factors, one column per factor.
    #[arg(long)]
    factors: PathBuf,
    /// Number of PC factors; defaults to the ACT estimate.
    #[arg(long)]
    k: Option<usize>,
    /// Use only these factor columns.
    #[arg(long, value_delimiter = ',')]
    factor_columns: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = BasisArg::Corr)]
    basis: BasisArg,
    /// Write observed and fitted factor series as CSV for plotting.
    #[arg(long)]
    fitted_out: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Cov,
    Corr,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Cov => Basis::Covariance,
            BasisArg::Corr => Basis::Correlation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexArg {
    Auto,
    Yes,
    No,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutlierArg {
    Median,
    Drop,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum LoadingArg {
    Fresh,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignRuleArg {
    Residue,
    Product,
}

fn read_panel(
    path: &Path,
    input: &InputArgs,
    columns: Option<Vec<String>>,
    clean: bool,
) -> Result<PanelDataset> {
    let opts = IngestOptions {
        drop_missing: input.drop_missing,
        index_column: match input.index_col {
            IndexArg::Auto => IndexColumn::Auto,
            IndexArg::Yes => IndexColumn::Yes,
            IndexArg::No => IndexColumn::No,
        },
        missing_values: input.missing_values.clone(),
        columns,
    };
    let ds = ingest_csv(path, &opts)?;
    if !clean {
        return Ok(ds);
    }
    let policy = match input.outlier_policy {
        OutlierArg::Median => OutlierPolicy::ReplaceMedian,
        OutlierArg::Drop => OutlierPolicy::DropRow,
    };
    clean_outliers(&ds, policy)
}

fn emit(text: &str, output: &OutputArgs) -> Result<()> {
    match &output.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let methods = Method::parse_list(&args.estimators.methods)?;
    let ds = read_panel(&args.csv, &args.input, None, args.input.clean)?;
    let opts = EstimateOptions {
        r_max: args.estimators.r_max,
        ed_threshold: args.estimators.ed_threshold,
        on_r_min: args.estimators.on_r_min,
        basis_override: args.estimators.basis.map(Basis::from),
        act: args.estimators.act(),
    };
    let report = estimate_command(&ds, &methods, &opts)?;
    emit(&to_json(&report, !args.output.compact)?, &args.output)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let design = match (args.case, args.counterexample) {
        (_, Some(nu2_extra)) => ModelDesign::IntroCounterexample { nu2_extra },
        (Some(case), None) => ModelDesign::Case { case },
        (None, None) => return Err(Error::Config("pass --case or --counterexample".into())),
    };
    let cfg = ExperimentConfig {
        design,
        k: args.k,
        p_values: args.p,
        n_values: args.n,
        families: args
            .family
            .iter()
            .map(|f| match f {
                FamilyArg::Gaussian => Population::Gaussian,
                FamilyArg::Uniform => Population::Uniform,
            })
            .collect(),
        replications: args.reps,
        seed: args.seed,
        methods: Method::parse_list(&args.estimators.methods)?,
        r_max: args.estimators.r_max,
        ed_threshold: args.estimators.ed_threshold,
        on_r_min: args.estimators.on_r_min,
        act: args.estimators.act(),
        basis_override: args.estimators.basis.map(Basis::from),
        loadings: match args.loadings {
            LoadingArg::Fresh => LoadingMode::Fresh,
            LoadingArg::Fixed => LoadingMode::Fixed,
        },
        case1_sign_rule: match args.case1_sign_rule {
            SignRuleArg::Residue => Case1SignRule::Residue,
            SignRuleArg::Product => Case1SignRule::Product,
        },
        threads: args.threads,
    };
    cfg.validate()?;
    if let Some(path) = &args.dump_model {
        let model = cell_model(&cfg, cfg.cells()[0], 0)?;
        std::fs::write(path, model.to_json())
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    let report = run_experiment(&cfg)?;
    let text = if args.text_table {
        text_table(&report)
    } else {
        to_json(&report, !args.output.compact)?
    };
    emit(&text, &args.output)
}

fn table1(args: Table1Args) -> Result<()> {
    let report = run_table1(args.seeds, args.seed)?;
    let text = if args.text_table {
        table1_text(&report)
    } else {
        to_json(&report, !args.output.compact)?
    };
    emit(&text, &args.output)
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<()> {
    let panel = read_panel(&args.csv, &args.input, None, args.input.clean)?;
    let factors = read_panel(
        &args.factors,
        &args.input,
        args.factor_columns.clone(),
        false,
    )?;
    let result = analyze(&panel, &factors, args.k, args.basis.into())?;
    if let Some(path) = &args.fitted_out {
        let mut csv = String::from("index");
        for (name, ..) in &result.fitted {
            let _ = write!(csv, ",{name},{name}_fitted");
        }
        csv.push('\n');
        for i in 0..result.report.n {
            let label = result
                .index
                .as_ref()
                .map_or_else(|| (i + 1).to_string(), |l| l[i].clone());
            csv.push_str(&label);
            for (_, observed, fitted) in &result.fitted {
                let _ = write!(csv, ",{},{}", observed[i], fitted[i]);
            }
            csv.push('\n');
        }
        std::fs::write(path, csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    emit(
        &to_json(&result.report, !args.output.compact)?,
        &args.output,
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Table1(a) => table1(a),
        Command::Analyze(a) => analyze_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_DATA
            })
        }
    }
}
