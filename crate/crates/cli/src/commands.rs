//! Command-line surface: argument structs and the runner for each verb.
//!
//! Every runner is a pure function of (input files, flags, seed): running a
//! command twice with the same inputs produces byte-identical output trees.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scenclust_core::data::CsvLayout;
use scenclust_core::{generate_synthetic_with_truth, Dataset, SyntheticSpec};

use crate::config::ConfigMap;
use crate::error::{CliError, CliResult};
use crate::experiments::{
    cluster_report, compare_pipelines, format_ranking, group_experiment, read_reports,
    write_cluster_outputs, write_compare_outputs, write_group_outputs, write_ranking_csv,
    ClusterConfig, CompareConfig, GroupExperimentConfig, TableDistance,
};
use crate::manifest::Manifest;
use crate::pipeline::{PipelineParams, ReferenceKind, PIPELINE_NAMES};

/// Clusters collections of long time series and ranks competing
/// representation/distance pipelines.
#[derive(Debug, Parser)]
#[command(name = "scenclust", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario dataset.
    Generate(GenerateArgs),
    /// Compare distances from a reference record to same-location and
    /// same-scenario groups.
    GroupExperiment(GroupArgs),
    /// Run representation/distance pipelines and rank them by the combined
    /// index.
    Compare(CompareArgs),
    /// Cluster under one pipeline and emit lag-aligned representatives.
    Cluster(ClusterArgs),
    /// Re-rank previously written index reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutArg {
    Wide,
    Long,
}

impl std::str::FromStr for LayoutArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(LayoutArg::Wide),
            "long" => Ok(LayoutArg::Long),
            other => Err(format!("layout must be wide or long, got {other:?}")),
        }
    }
}

impl From<LayoutArg> for CsvLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Wide => CsvLayout::Wide,
            LayoutArg::Long => CsvLayout::Long,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Flat key = value config file; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub locations: Option<usize>,
    #[arg(long)]
    pub scenarios: Option<usize>,
    /// Series length.
    #[arg(long)]
    pub t: Option<usize>,
    /// Std of per-location mean offsets.
    #[arg(long)]
    pub spread: Option<f64>,
    /// Amplitude of the per-scenario shape.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// White-noise std.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Plant this many shape groups (default: one shape per scenario).
    #[arg(long)]
    pub shape_groups: Option<usize>,
    /// Desk-scale profile: 60 scenarios, T = 512.
    #[arg(long, default_value_t = false)]
    pub small: bool,
    /// CSV layout for the emitted dataset (wide or long).
    #[arg(long, default_value = "wide")]
    pub layout: LayoutArg,
}

/// Numeric flags shared by the experiment commands.
#[derive(Debug, Args)]
pub struct KernelArgs {
    /// MLPC lag window half-width in samples.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Sakoe-Chiba half-width for DTW; omit for unconstrained DTW.
    #[arg(long)]
    pub band: Option<usize>,
    /// Use banded DTW with the default band of ceil(0.1 T).
    #[arg(long, default_value_t = false)]
    pub banded: bool,
    /// Energy/variance fraction for Haar/Fourier/PCA.
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub const DEFAULT_K_MAX: usize = 240;
pub const DEFAULT_ALPHA: f64 = 0.95;
pub const DEFAULT_K: usize = 15;
pub const DEFAULT_RUNS: usize = 5;

impl KernelArgs {
    fn resolve(&self, cfg: &ConfigMap, t: usize) -> CliResult<PipelineParams> {
        let k_max = cfg.resolve(self.k_max, "k_max", DEFAULT_K_MAX)?;
        let alpha = cfg.resolve(self.alpha, "alpha", DEFAULT_ALPHA)?;
        let banded = cfg.resolve(Some(self.banded).filter(|&b| b), "banded", false)?;
        let band = match cfg.resolve_optional(self.band, "band")? {
            Some(b) => Some(b),
            None if banded => Some((t as f64 * 0.1).ceil() as usize),
            None => None,
        };
        Ok(PipelineParams { k_max, band, alpha })
    }
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// Input dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "wide")]
    pub layout: LayoutArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ref_scenario: Option<u64>,
    #[arg(long)]
    pub ref_location: Option<u64>,
    /// Comma-separated rows: mean,l2,haar95,mlpc,dtw.
    #[arg(long, value_delimiter = ',')]
    pub distances: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "wide")]
    pub layout: LayoutArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated pipelines; defaults to all seven.
    #[arg(long, value_delimiter = ',')]
    pub pipelines: Vec<String>,
    /// Reference distance for fidelity: l2, mlpc or dtw.
    #[arg(long)]
    pub reference: Option<ReferenceKind>,
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Clustering restarts per pipeline.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "wide")]
    pub layout: LayoutArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pipeline name (mean, l2, fourier95, haar95, pca95, mlpc, dtw).
    #[arg(long)]
    pub pipeline: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding index reports (a compare output directory or its
    /// reports/ subdirectory).
    #[arg(long)]
    pub reports: PathBuf,
    /// Optional directory for the re-ranked ranking.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_generate(args: &GenerateArgs) -> CliResult<()> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let (default_scenarios, default_t) = if args.small { (60, 512) } else { (200, 2160) };
    let spec = SyntheticSpec {
        n_locations: cfg.resolve(args.locations, "locations", 1)?,
        n_scenarios: cfg.resolve(args.scenarios, "scenarios", default_scenarios)?,
        t: cfg.resolve(args.t, "t", default_t)?,
        location_mean_spread: cfg.resolve(args.spread, "spread", 5.0)?,
        scenario_shape_amplitude: cfg.resolve(args.amplitude, "amplitude", 1.0)?,
        noise_std: cfg.resolve(args.noise, "noise", 0.3)?,
        rng_seed: cfg.resolve(args.seed, "seed", 0)?,
        shape_groups: cfg.resolve_optional(args.shape_groups, "shape_groups")?,
    };
    let (ds, truth) = generate_synthetic_with_truth(&spec)?;

    std::fs::create_dir_all(&args.out)?;
    ds.write_csv(args.out.join("dataset.csv"), args.layout.into())?;

    #[derive(serde::Serialize)]
    struct TruthFile<'a> {
        location_means: &'a [f64],
        scenario_groups: &'a [usize],
    }
    let truth_file = TruthFile {
        location_means: &truth.location_means,
        scenario_groups: &truth.scenario_groups,
    };
    let text = serde_json::to_string_pretty(&truth_file)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    std::fs::write(args.out.join("truth.json"), text + "\n")?;

    let mut manifest = Manifest::new("generate", spec.rng_seed);
    manifest.set("locations", spec.n_locations);
    manifest.set("scenarios", spec.n_scenarios);
    manifest.set("t", spec.t);
    manifest.set("spread", spec.location_mean_spread);
    manifest.set("amplitude", spec.scenario_shape_amplitude);
    manifest.set("noise", spec.noise_std);
    manifest.set("shape_groups", spec.shape_groups);
    manifest.set(
        "layout",
        if args.layout == LayoutArg::Wide { "wide" } else { "long" },
    );
    manifest.write(&args.out)?;
    Ok(())
}

fn load_dataset(path: &std::path::Path, layout: LayoutArg) -> CliResult<Dataset> {
    Ok(Dataset::load_csv(path, layout.into())?)
}

pub fn run_group_experiment(args: &GroupArgs) -> CliResult<()> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let ds = load_dataset(&args.data, args.layout)?;
    let params = args.kernel.resolve(&cfg, ds.t())?;
    let distances: Vec<TableDistance> = if args.distances.is_empty() {
        match cfg.entries().get("distances") {
            None => TableDistance::ALL.to_vec(),
            Some(raw) => parse_distances(&raw.split(',').map(str::to_string).collect::<Vec<_>>())?,
        }
    } else {
        parse_distances(&args.distances)?
    };
    let config = GroupExperimentConfig {
        reference_scenario: cfg.resolve(args.ref_scenario, "ref_scenario", 0)?,
        reference_location: cfg.resolve(args.ref_location, "ref_location", 0)?,
        distances,
        params,
        seed: cfg.resolve(args.seed, "seed", 0)?,
    };
    let report = group_experiment(&ds, &config)?;

    let mut manifest = Manifest::new("group-experiment", config.seed);
    manifest.set("data", args.data.display().to_string());
    manifest.set("ref_scenario", config.reference_scenario);
    manifest.set("ref_location", config.reference_location);
    manifest.set(
        "distances",
        config
            .distances
            .iter()
            .map(|d| d.name())
            .collect::<Vec<_>>()
            .join(","),
    );
    set_kernel_manifest(&mut manifest, &config.params);
    write_group_outputs(&args.out, &report, &manifest)?;
    Ok(())
}

fn parse_distances(names: &[String]) -> CliResult<Vec<TableDistance>> {
    names
        .iter()
        .map(|n| n.trim().parse().map_err(CliError::Config))
        .collect()
}

fn set_kernel_manifest(manifest: &mut Manifest, params: &PipelineParams) {
    manifest.set("k_max", params.k_max);
    manifest.set("band", params.band);
    manifest.set("alpha", params.alpha);
}

pub fn run_compare(args: &CompareArgs) -> CliResult<()> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let ds = load_dataset(&args.data, args.layout)?;
    let params = args.kernel.resolve(&cfg, ds.t())?;
    let pipelines: Vec<String> = if args.pipelines.is_empty() {
        match cfg.entries().get("pipelines") {
            None => PIPELINE_NAMES.iter().map(|s| s.to_string()).collect(),
            Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
        }
    } else {
        args.pipelines.clone()
    };
    let config = CompareConfig {
        pipelines,
        reference: cfg.resolve(args.reference, "reference", ReferenceKind::Mlpc)?,
        k: cfg.resolve(args.k, "k", DEFAULT_K)?,
        n_runs: cfg.resolve(args.runs, "runs", DEFAULT_RUNS)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
        perplexity: cfg.resolve_optional(args.perplexity, "perplexity")?,
        params,
    };
    let outcomes = compare_pipelines(&ds, &config)?;

    let mut manifest = Manifest::new("compare", config.seed);
    manifest.set("data", args.data.display().to_string());
    manifest.set("pipelines", config.pipelines.join(","));
    manifest.set(
        "reference",
        serde_json::to_value(config.reference).map_err(|e| CliError::Failure(e.to_string()))?,
    );
    manifest.set("k", config.k);
    manifest.set("runs", config.n_runs);
    manifest.set("perplexity", config.perplexity);
    set_kernel_manifest(&mut manifest, &config.params);
    write_compare_outputs(&args.out, &outcomes, &manifest)?;

    let reports: Vec<scenclust_core::evaluation::IndexReport> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|out| out.report.clone()))
        .collect();
    print!("{}", format_ranking(&reports));
    for outcome in &outcomes {
        if let Err(e) = &outcome.result {
            eprintln!("pipeline {} failed: {e}", outcome.name);
        }
    }
    Ok(())
}

pub fn run_cluster(args: &ClusterArgs) -> CliResult<()> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let ds = load_dataset(&args.data, args.layout)?;
    let params = args.kernel.resolve(&cfg, ds.t())?;
    let config = ClusterConfig {
        pipeline: cfg.resolve(args.pipeline.clone(), "pipeline", "mlpc".to_string())?,
        k: cfg.resolve(args.k, "k", DEFAULT_K)?,
        n_runs: cfg.resolve(args.runs, "runs", DEFAULT_RUNS)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
        params,
    };
    let artifacts = cluster_report(&ds, &config)?;

    let mut manifest = Manifest::new("cluster", config.seed);
    manifest.set("data", args.data.display().to_string());
    manifest.set("pipeline", config.pipeline.clone());
    manifest.set("k", config.k);
    manifest.set("runs", config.n_runs);
    set_kernel_manifest(&mut manifest, &config.params);
    write_cluster_outputs(&args.out, &artifacts, &manifest)?;
    Ok(())
}

pub fn run_report(args: &ReportArgs) -> CliResult<()> {
    let reports = read_reports(&args.reports)?;
    print!("{}", format_ranking(&reports));
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let refs: Vec<&scenclust_core::evaluation::IndexReport> = reports.iter().collect();
        write_ranking_csv(out, &refs)?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(args) => run_generate(&args),
        Command::GroupExperiment(args) => run_group_experiment(&args),
        Command::Compare(args) => run_compare(&args),
        Command::Cluster(args) => run_cluster(&args),
        Command::Report(args) => run_report(&args),
    }
}
