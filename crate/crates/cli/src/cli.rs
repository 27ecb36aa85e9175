use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcskew::estimator::TestKind;

use crate::input::{Delimiter, Orientation};

#[derive(Debug, Parser)]
#[command(
    name = "pcskew",
    about = "Estimate the number of principal components from the skewness of PCA residual lengths",
    disable_version_flag = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the number of components of a data matrix.
    Estimate(EstimateArgs),
    /// Run Monte-Carlo replicates of the spiked model.
    Simulate(SimulateArgs),
    /// Tabulate the estimate over a grid of significance levels.
    AlphaSweep(AlphaSweepArgs),
    /// Print the tool and document schema versions.
    Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestChoice {
    Triples,
    Dagostino,
    Both,
}

impl TestChoice {
    pub fn kinds(self) -> Vec<TestKind> {
        match self {
            TestChoice::Triples => vec![TestKind::Triples],
            TestChoice::Dagostino => vec![TestKind::DAgostino],
            TestChoice::Both => TestKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    /// Delimited text matrix (comma, tab or whitespace separated).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Delimiter::Auto)]
    pub delimiter: Delimiter,
    /// Whether observations are the rows or the columns of the file.
    #[arg(long, value_enum)]
    pub orientation: Option<Orientation>,
    /// Skip the first non-comment line.
    #[arg(long)]
    pub header: bool,
    /// Subtract column means before the analysis.
    #[arg(long)]
    pub center: bool,
    /// Scale columns to unit variance (after centering).
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[arg(long, default_value_t = pcskew::estimator::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = TestChoice::Both)]
    pub test: TestChoice,
    /// Number of hypotheses M (default min(n - 2, 30)).
    #[arg(long)]
    pub max_k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Result document path (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for tab-separated plot-data files.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AlphaSweepArgs {
    /// Data matrix; omit when using --from.
    #[arg(required_unless_present = "from")]
    pub input: Option<PathBuf>,
    /// Reuse the p-values of an earlier result document.
    #[arg(long, conflicts_with = "input")]
    pub from: Option<PathBuf>,
    /// Comma-separated significance levels.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub alphas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Delimiter::Auto)]
    pub delimiter: Delimiter,
    #[arg(long, value_enum)]
    pub orientation: Option<Orientation>,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = pcskew::estimator::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Tests to sweep; with --from, defaults to those in the document.
    #[arg(long, value_enum)]
    pub test: Option<TestChoice>,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Preset (I, II, III, IV) or `custom`.
    #[arg(long)]
    pub case: Option<String>,
    /// `key = value` or JSON settings; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `normal` or `t3`.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Significance level of the Kritchman-Nadler baseline.
    #[arg(long)]
    pub kn_alpha: Option<f64>,
    /// Comma-separated: triples, dagostino, bai_ng, kritchman_nadler.
    #[arg(long)]
    pub estimators: Option<String>,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}
