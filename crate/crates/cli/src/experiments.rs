//! The two batch experiments (distance-significance groups, pipeline
//! comparison) and the cluster report, plus their file outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scenclust_core::clustering::{
    extract_representative, write_representatives_csv, Representative,
};
use scenclust_core::data::fmt_sample;
use scenclust_core::distances::DistanceSpec;
use scenclust_core::evaluation::{affinities, IndexReport};
use scenclust_core::transforms::Representation;
use scenclust_core::Dataset;

use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::pipeline::{
    pipeline_from_name, reference_distance_spec, resolve_perplexity, run_pipeline, EvalBase,
    PipelineOutput, PipelineParams, ReferenceKind, ReprSpec,
};

pub const HISTOGRAM_BINS: usize = 30;

/// The named transformation/distance rows of the distance-significance
/// study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableDistance {
    Mean,
    L2,
    Haar95,
    Mlpc,
    Dtw,
}

impl TableDistance {
    pub const ALL: [TableDistance; 5] = [
        TableDistance::Mean,
        TableDistance::L2,
        TableDistance::Haar95,
        TableDistance::Mlpc,
        TableDistance::Dtw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableDistance::Mean => "mean",
            TableDistance::L2 => "l2",
            TableDistance::Haar95 => "haar95",
            TableDistance::Mlpc => "mlpc",
            TableDistance::Dtw => "dtw",
        }
    }
}

impl std::str::FromStr for TableDistance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(TableDistance::Mean),
            "l2" => Ok(TableDistance::L2),
            "haar95" => Ok(TableDistance::Haar95),
            "mlpc" => Ok(TableDistance::Mlpc),
            "dtw" => Ok(TableDistance::Dtw),
            other => Err(format!("unknown distance {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupExperimentConfig {
    pub reference_scenario: u64,
    pub reference_location: u64,
    pub distances: Vec<TableDistance>,
    pub params: PipelineParams,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub count_a: usize,
    pub count_b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDistanceReport {
    pub name: String,
    /// Mean distance from the reference to group A (same location, other
    /// scenarios).
    pub mean_a: f64,
    /// Mean distance from the reference to group B (same scenario, other
    /// locations).
    pub mean_b: f64,
    /// mean_b / mean_a; absent when mean_a is zero.
    pub ratio_b_over_a: Option<f64>,
    /// Histogram mass shared by the two samples, in [0, 1].
    pub overlap_coefficient: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupComparisonReport {
    pub reference_scenario: u64,
    pub reference_location: u64,
    /// Both groups are subsampled to this common size.
    pub group_size: usize,
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
    pub distances: Vec<GroupDistanceReport>,
}

/// Compares distances from one reference record to group A (same location,
/// other scenarios) and group B (same scenario, other locations), under each
/// requested transformation/distance row. The larger group is subsampled to
/// the smaller one's size with the given seed.
pub fn group_experiment(
    raw: &Dataset,
    cfg: &GroupExperimentConfig,
) -> CliResult<GroupComparisonReport> {
    let base = EvalBase::prepare(raw)?;
    let reference = raw
        .index_of(cfg.reference_scenario, cfg.reference_location)
        .ok_or_else(|| {
            CliError::Config(format!(
                "reference record (scenario {}, location {}) not found",
                cfg.reference_scenario, cfg.reference_location
            ))
        })?;

    let mut group_a = Vec::new();
    let mut group_b = Vec::new();
    for (i, rec) in raw.records().iter().enumerate() {
        if i == reference {
            continue;
        }
        if rec.location_id == cfg.reference_location && rec.scenario_id != cfg.reference_scenario {
            group_a.push(i);
        } else if rec.scenario_id == cfg.reference_scenario
            && rec.location_id != cfg.reference_location
        {
            group_b.push(i);
        }
    }
    if group_a.is_empty() || group_b.is_empty() {
        return Err(CliError::Config(format!(
            "empty comparison group: |A| = {}, |B| = {}",
            group_a.len(),
            group_b.len()
        )));
    }
    let m = group_a.len().min(group_b.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    subsample(&mut group_a, m, &mut rng);
    subsample(&mut group_b, m, &mut rng);

    let mut reports = Vec::new();
    for &dist in &cfg.distances {
        reports.push(distances_for_row(&base, dist, &cfg.params, reference, &group_a, &group_b)?);
    }
    Ok(GroupComparisonReport {
        reference_scenario: cfg.reference_scenario,
        reference_location: cfg.reference_location,
        group_size: m,
        group_a,
        group_b,
        distances: reports,
    })
}

fn subsample(group: &mut Vec<usize>, m: usize, rng: &mut ChaCha8Rng) {
    if group.len() > m {
        let picks = rand::seq::index::sample(rng, group.len(), m).into_vec();
        let mut kept: Vec<usize> = picks.into_iter().map(|p| group[p]).collect();
        kept.sort_unstable();
        *group = kept;
    }
}

fn distances_for_row(
    base: &EvalBase,
    dist: TableDistance,
    params: &PipelineParams,
    reference: usize,
    group_a: &[usize],
    group_b: &[usize],
) -> CliResult<GroupDistanceReport> {
    let (repr, spec): (ReprSpec, DistanceSpec) = match dist {
        TableDistance::Mean => (ReprSpec::Mean, DistanceSpec::l2()),
        TableDistance::L2 => (ReprSpec::Identity, DistanceSpec::l2()),
        TableDistance::Haar95 => (
            ReprSpec::HaarEnergy {
                energy: params.alpha,
            },
            DistanceSpec::l2(),
        ),
        TableDistance::Mlpc => (ReprSpec::Zscore, DistanceSpec::mlpc(params.k_max)),
        TableDistance::Dtw => (
            ReprSpec::Zscore,
            match params.band {
                None => DistanceSpec::dtw(scenclust_core::distances::DtwCost::Squared),
                Some(b) => {
                    DistanceSpec::dtw_banded(b, scenclust_core::distances::DtwCost::Squared)
                }
            },
        ),
    };
    let ds = match repr {
        ReprSpec::Zscore => base.zscored()?,
        _ => &base.centered,
    };
    let rep = repr.apply(ds)?;
    let features = &rep.features;
    let row = |i: usize| -> Vec<f64> { features.row(i).to_vec() };
    let ref_row = row(reference);
    let eval = |group: &[usize]| -> CliResult<Vec<f64>> {
        group
            .iter()
            .map(|&i| spec.distance(&ref_row, &row(i)).map_err(CliError::from))
            .collect()
    };
    let sample_a = eval(group_a)?;
    let sample_b = eval(group_b)?;

    let mean_a = scenclust_core::stats::mean(&sample_a);
    let mean_b = scenclust_core::stats::mean(&sample_b);
    let histogram = build_histogram(&sample_a, &sample_b);
    let shared: usize = histogram
        .iter()
        .map(|bin| bin.count_a.min(bin.count_b))
        .sum();
    Ok(GroupDistanceReport {
        name: dist.name().to_string(),
        mean_a,
        mean_b,
        ratio_b_over_a: (mean_a > 0.0).then(|| mean_b / mean_a),
        overlap_coefficient: shared as f64 / sample_a.len() as f64,
        histogram,
    })
}

/// Fixed 30-bin layout over the pooled range of both samples.
fn build_histogram(a: &[f64], b: &[f64]) -> Vec<HistogramBin> {
    let lo = a.iter().chain(b).fold(f64::INFINITY, |acc, &v| acc.min(v));
    let hi = a
        .iter()
        .chain(b)
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let index = |v: f64| -> usize {
        (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
    };
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin {
            bin_left: lo + i as f64 * width,
            count_a: 0,
            count_b: 0,
        })
        .collect();
    for &v in a {
        bins[index(v)].count_a += 1;
    }
    for &v in b {
        bins[index(v)].count_b += 1;
    }
    bins
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub pipelines: Vec<String>,
    pub reference: ReferenceKind,
    pub k: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub perplexity: Option<f64>,
    pub params: PipelineParams,
}

pub struct PipelineOutcome {
    pub name: String,
    pub result: Result<PipelineOutput, String>,
}

/// Runs every requested pipeline against one reference geometry. Pipelines
/// run in parallel and failures are isolated per pipeline; the reference
/// geometry itself failing fails the whole command.
pub fn compare_pipelines(raw: &Dataset, cfg: &CompareConfig) -> CliResult<Vec<PipelineOutcome>> {
    let base = EvalBase::prepare(raw)?;
    let perplexity = resolve_perplexity(cfg.perplexity, raw.n());
    let reference_spec = reference_distance_spec(cfg.reference, &cfg.params);
    let reference = base.reference_matrix(cfg.reference, &cfg.params)?;
    let reference_affinity = affinities(&reference, perplexity)?;

    let outcomes: Vec<PipelineOutcome> = cfg
        .pipelines
        .par_iter()
        .map(|name| {
            let result = pipeline_from_name(name, &cfg.params, cfg.k, cfg.n_runs, cfg.seed)
                .and_then(|spec| {
                    run_pipeline(&base, &spec, &reference_spec, &reference_affinity, perplexity)
                })
                .map_err(|e| e.to_string());
            PipelineOutcome {
                name: name.clone(),
                result,
            }
        })
        .collect();
    Ok(outcomes)
}

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub pipeline: String,
    pub k: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub params: PipelineParams,
}

pub struct ClusterArtifacts {
    pub representation: Representation,
    pub best: scenclust_core::clustering::ClusteringResult,
    pub runs: Vec<scenclust_core::clustering::ClusteringResult>,
    pub representatives: Vec<Representative>,
    /// The series the representatives were extracted from (z-scored for
    /// MLPC/DTW pipelines, globally centered otherwise).
    pub series: Dataset,
}

/// Clusters under one pipeline and extracts a lag-aligned representative per
/// cluster.
pub fn cluster_report(raw: &Dataset, cfg: &ClusterConfig) -> CliResult<ClusterArtifacts> {
    let base = EvalBase::prepare(raw)?;
    let spec = pipeline_from_name(&cfg.pipeline, &cfg.params, cfg.k, cfg.n_runs, cfg.seed)?;
    let series = match spec.representation {
        ReprSpec::Zscore => base.zscored()?.clone(),
        _ => base.centered.clone(),
    };
    let representation = spec.representation.apply(&series)?;
    let feature_matrix = scenclust_core::distances::distance_matrix(
        &representation.features,
        &spec.feature_distance,
    )?;
    let (best, runs) =
        scenclust_core::clustering::kmedoids_restarts(&feature_matrix, cfg.k, cfg.n_runs, cfg.seed)?;

    let lag_budget = cfg.params.k_max.min(series.t() - 1);
    let mut representatives = Vec::with_capacity(best.k());
    for c in 0..best.k() {
        let members = best.members_of(c);
        let mut rep = extract_representative(&series, &members, best.medoids[c], lag_budget)?;
        rep.cluster_id = c;
        representatives.push(rep);
    }
    Ok(ClusterArtifacts {
        representation,
        best,
        runs,
        representatives,
        series,
    })
}

// ---------------------------------------------------------------------------
// File outputs
// ---------------------------------------------------------------------------

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    writeln!(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_group_outputs(
    dir: &Path,
    report: &GroupComparisonReport,
    manifest: &Manifest,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    write_json(dir, "summary.json", report)?;
    for row in &report.distances {
        let mut w = create(dir, &format!("hist_{}.csv", row.name))?;
        writeln!(w, "bin_left,count_a,count_b")?;
        for bin in &row.histogram {
            writeln!(w, "{},{},{}", fmt_sample(bin.bin_left), bin.count_a, bin.count_b)?;
        }
        w.flush()?;
    }
    manifest.write(dir)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FailedPipeline {
    pipeline: String,
    error: String,
}

pub fn write_compare_outputs(
    dir: &Path,
    outcomes: &[PipelineOutcome],
    manifest: &Manifest,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let reports_dir = dir.join("reports");
    std::fs::create_dir_all(&reports_dir)?;
    let mut failed = Vec::new();
    for outcome in outcomes {
        match &outcome.result {
            Ok(output) => {
                write_json(&reports_dir, &format!("{}.json", outcome.name), &output.report)?
            }
            Err(error) => failed.push(FailedPipeline {
                pipeline: outcome.name.clone(),
                error: error.clone(),
            }),
        }
    }
    if !failed.is_empty() {
        write_json(dir, "failed.json", &failed)?;
    }
    let reports: Vec<&IndexReport> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|out| &out.report))
        .collect();
    write_ranking_csv(dir, &reports)?;
    manifest.write(dir)?;
    Ok(())
}

/// Ranked table, best combined index first.
pub fn write_ranking_csv(dir: &Path, reports: &[&IndexReport]) -> CliResult<()> {
    let mut order: Vec<&&IndexReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        b.combined
            .partial_cmp(&a.combined)
            .unwrap()
            .then_with(|| a.pipeline.cmp(&b.pipeline))
    });
    let mut w = create(dir, "ranking.csv")?;
    writeln!(w, "rank,pipeline,I,F,W,D_JS,consensus")?;
    for (rank, report) in order.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            rank + 1,
            report.pipeline,
            fmt_sample(report.combined),
            fmt_sample(report.fidelity),
            fmt_sample(report.within),
            fmt_sample(report.d_js),
            report
                .consensus
                .map(fmt_sample)
                .unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RepresentativeLags {
    cluster_id: usize,
    start: usize,
    member_lags: Vec<(usize, i64)>,
}

pub fn write_cluster_outputs(
    dir: &Path,
    artifacts: &ClusterArtifacts,
    manifest: &Manifest,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    write_json(dir, "labels.json", &artifacts.best)?;
    write_representatives_csv(dir.join("representatives.csv"), &artifacts.representatives)?;
    let lags: Vec<RepresentativeLags> = artifacts
        .representatives
        .iter()
        .map(|r| RepresentativeLags {
            cluster_id: r.cluster_id,
            start: r.start,
            member_lags: r.member_lags.clone(),
        })
        .collect();
    write_json(dir, "lags.json", &lags)?;

    let clusters_dir = dir.join("clusters");
    std::fs::create_dir_all(&clusters_dir)?;
    for rep in &artifacts.representatives {
        let mut w = create(&clusters_dir, &format!("cluster_{}.csv", rep.cluster_id))?;
        writeln!(w, "series,t,value")?;
        for &(record, _) in &rep.member_lags {
            for (t, v) in artifacts.series.records()[record].values.iter().enumerate() {
                writeln!(w, "{record},{t},{}", fmt_sample(*v))?;
            }
        }
        for (offset, v) in rep.series.iter().enumerate() {
            writeln!(w, "representative,{},{}", rep.start + offset, fmt_sample(*v))?;
        }
        w.flush()?;
    }
    manifest.write(dir)?;
    Ok(())
}

/// Reads every `reports/*.json` under `dir` (or `dir` itself) back into
/// index reports, sorted by file name.
pub fn read_reports(dir: &Path) -> CliResult<Vec<IndexReport>> {
    let reports_dir = if dir.join("reports").is_dir() {
        dir.join("reports")
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(&reports_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        match serde_json::from_str::<IndexReport>(&text) {
            Ok(report) => reports.push(report),
            Err(e) => {
                return Err(CliError::Config(format!(
                    "{}: not an index report: {e}",
                    path.display()
                )))
            }
        }
    }
    if reports.is_empty() {
        return Err(CliError::Config(format!(
            "no index reports found under {}",
            reports_dir.display()
        )));
    }
    Ok(reports)
}

/// Human-readable ranking table for stdout.
pub fn format_ranking(reports: &[IndexReport]) -> String {
    let mut order: Vec<&IndexReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        b.combined
            .partial_cmp(&a.combined)
            .unwrap()
            .then_with(|| a.pipeline.cmp(&b.pipeline))
    });
    let mut out = String::from("rank  pipeline   I         F         W         consensus\n");
    for (rank, r) in order.iter().enumerate() {
        out.push_str(&format!(
            "{:<5} {:<10} {:<9.4} {:<9.4} {:<9.4} {}\n",
            rank + 1,
            r.pipeline,
            r.combined,
            r.fidelity,
            r.within,
            r.consensus
                .map(|c| format!("{c:.4}"))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    out
}
