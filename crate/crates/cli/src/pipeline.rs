//! Pipeline plumbing: named representation/distance combinations, reference
//! geometries, and single-pipeline evaluation.
//!
//! The canonical pipelines mirror the model table this tool reproduces:
//!
//! | name      | representation      | feature distance |
//! |-----------|---------------------|------------------|
//! | mean      | per-record mean     | L2               |
//! | l2        | plain series        | L2               |
//! | fourier95 | Fourier, energy .95 | L2               |
//! | haar95    | Haar, energy .95    | L2               |
//! | pca95     | PCA, variance .95   | L2               |
//! | mlpc      | z-scored series     | MLPC             |
//! | dtw       | z-scored series     | DTW              |
//!
//! L2-family representations run on globally centered data; MLPC/DTW run on
//! z-scored data, and so do their reference geometries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use scenclust_core::clustering::{kmedoids_restarts, ClusteringResult};
use scenclust_core::distances::{
    distance_matrix, DistanceMatrix, DistanceSpec, DtwCost,
};
use scenclust_core::evaluation::{
    affinities, combined_index, consensus_index, default_perplexity, fidelity_from_divergence,
    js_divergence, within_index, AffinityModel, IndexReport,
};
use scenclust_core::transforms::{
    transform_fourier, transform_haar, transform_identity, transform_mean, transform_pca,
    transform_zscore, HaarMode, Representation,
};
use scenclust_core::{Dataset, Preprocessing};

use crate::error::{CliError, CliResult};

/// Representation choice at the configuration level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReprSpec {
    Mean,
    Identity,
    Zscore,
    HaarLevel { level: usize },
    HaarEnergy { energy: f64 },
    FourierEnergy { energy: f64 },
    Pca { energy: f64 },
}

impl ReprSpec {
    pub fn apply(&self, ds: &Dataset) -> CliResult<Representation> {
        let rep = match *self {
            ReprSpec::Mean => transform_mean(ds),
            ReprSpec::Identity => transform_identity(ds),
            ReprSpec::Zscore => transform_zscore(ds)?,
            ReprSpec::HaarLevel { level } => transform_haar(ds, HaarMode::Level(level))?,
            ReprSpec::HaarEnergy { energy } => transform_haar(ds, HaarMode::Energy(energy))?,
            ReprSpec::FourierEnergy { energy } => transform_fourier(ds, energy)?,
            ReprSpec::Pca { energy } => transform_pca(ds, energy)?,
        };
        Ok(rep)
    }
}

/// Reference geometry for the fidelity index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    L2,
    Mlpc,
    Dtw,
}

impl std::str::FromStr for ReferenceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(ReferenceKind::L2),
            "mlpc" => Ok(ReferenceKind::Mlpc),
            "dtw" => Ok(ReferenceKind::Dtw),
            other => Err(format!("unknown reference distance {other:?}")),
        }
    }
}

/// Shared numeric knobs for building pipelines from names.
#[derive(Debug, Clone, Copy)]
pub struct PipelineParams {
    pub k_max: usize,
    /// None runs DTW unconstrained; Some(b) uses a Sakoe-Chiba band.
    pub band: Option<usize>,
    /// Energy/variance fraction for the reducing representations.
    pub alpha: f64,
}

/// A fully specified pipeline: representation, feature distance, clustering
/// size and seeding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    pub representation: ReprSpec,
    pub feature_distance: DistanceSpec,
    pub k: usize,
    pub n_runs: usize,
    pub seed: u64,
}

/// Canonical pipeline names accepted by `compare` and `cluster`.
pub const PIPELINE_NAMES: [&str; 7] = [
    "mean",
    "l2",
    "fourier95",
    "haar95",
    "pca95",
    "mlpc",
    "dtw",
];

pub fn pipeline_from_name(
    name: &str,
    params: &PipelineParams,
    k: usize,
    n_runs: usize,
    seed: u64,
) -> CliResult<PipelineSpec> {
    let (representation, feature_distance) = match name.to_ascii_lowercase().as_str() {
        "mean" => (ReprSpec::Mean, DistanceSpec::l2()),
        "l2" => (ReprSpec::Identity, DistanceSpec::l2()),
        "fourier95" => (
            ReprSpec::FourierEnergy {
                energy: params.alpha,
            },
            DistanceSpec::l2(),
        ),
        "haar95" => (
            ReprSpec::HaarEnergy {
                energy: params.alpha,
            },
            DistanceSpec::l2(),
        ),
        "pca95" => (
            ReprSpec::Pca {
                energy: params.alpha,
            },
            DistanceSpec::l2(),
        ),
        "mlpc" => (ReprSpec::Zscore, DistanceSpec::mlpc(params.k_max)),
        "dtw" => (ReprSpec::Zscore, dtw_spec(params.band)),
        other => {
            return Err(CliError::Config(format!(
                "unknown pipeline {other:?}; known: {}",
                PIPELINE_NAMES.join(", ")
            )))
        }
    };
    Ok(PipelineSpec {
        name: name.to_ascii_lowercase(),
        representation,
        feature_distance,
        k,
        n_runs,
        seed,
    })
}

fn dtw_spec(band: Option<usize>) -> DistanceSpec {
    match band {
        None => DistanceSpec::dtw(DtwCost::Squared),
        Some(b) => DistanceSpec::dtw_banded(b, DtwCost::Squared),
    }
}

pub fn reference_distance_spec(kind: ReferenceKind, params: &PipelineParams) -> DistanceSpec {
    match kind {
        ReferenceKind::L2 => DistanceSpec::l2(),
        ReferenceKind::Mlpc => DistanceSpec::mlpc(params.k_max),
        ReferenceKind::Dtw => dtw_spec(params.band),
    }
}

/// Preprocessed views of one raw dataset. The z-scored view is optional
/// because it fails on constant records, which only matters to pipelines
/// that need it.
pub struct EvalBase {
    pub centered: Dataset,
    zscored: Result<Dataset, String>,
}

impl EvalBase {
    pub fn prepare(raw: &Dataset) -> CliResult<Self> {
        let centered = match raw.preprocessing() {
            Preprocessing::Raw => raw.center_global()?,
            _ => {
                return Err(CliError::Config(
                    "expected a raw dataset as input".into(),
                ))
            }
        };
        let zscored = centered.zscore().map_err(|e| e.to_string());
        Ok(Self { centered, zscored })
    }

    pub fn zscored(&self) -> CliResult<&Dataset> {
        self.zscored
            .as_ref()
            .map_err(|e| CliError::Numeric(e.clone()))
    }

    /// Dataset a representation runs on: z-score uses the z-scored view so
    /// MLPC/DTW see standardized series, everything else the centered view.
    fn dataset_for(&self, repr: &ReprSpec) -> CliResult<&Dataset> {
        match repr {
            ReprSpec::Zscore => self.zscored(),
            _ => Ok(&self.centered),
        }
    }

    /// Reference geometry: L2 on centered data, MLPC/DTW on z-scored data.
    pub fn reference_matrix(
        &self,
        kind: ReferenceKind,
        params: &PipelineParams,
    ) -> CliResult<DistanceMatrix> {
        let spec = reference_distance_spec(kind, params);
        let ds = match kind {
            ReferenceKind::L2 => &self.centered,
            ReferenceKind::Mlpc | ReferenceKind::Dtw => self.zscored()?,
        };
        Ok(distance_matrix(&ds.values_matrix(), &spec)?)
    }
}

/// Everything one pipeline evaluation produces.
pub struct PipelineOutput {
    pub report: IndexReport,
    pub best: ClusteringResult,
    pub runs: Vec<ClusteringResult>,
    pub feature_matrix: DistanceMatrix,
    pub representation: Representation,
}

/// Runs one pipeline end to end: transform, feature distances, k-medoids
/// restarts, then W (best run), consensus (all runs), F against the
/// reference affinities, and I = F(1 - W).
pub fn run_pipeline(
    base: &EvalBase,
    spec: &PipelineSpec,
    reference_spec: &DistanceSpec,
    reference_affinity: &AffinityModel,
    perplexity: f64,
) -> CliResult<PipelineOutput> {
    let ds = base.dataset_for(&spec.representation)?;
    let representation = spec.representation.apply(ds)?;
    let feature_matrix = distance_matrix(&representation.features, &spec.feature_distance)?;

    let (best, runs) = kmedoids_restarts(&feature_matrix, spec.k, spec.n_runs, spec.seed)?;
    let within = within_index(&feature_matrix, &best)?;
    let within_mean_runs = {
        let mut total = 0.0;
        for run in &runs {
            total += within_index(&feature_matrix, run)?;
        }
        total / runs.len() as f64
    };
    let consensus = if runs.len() >= 2 {
        Some(consensus_index(&runs)?)
    } else {
        None
    };

    let q = affinities(&feature_matrix, perplexity)?;
    let d_js = js_divergence(reference_affinity, &q)?;
    let fid = fidelity_from_divergence(d_js);

    let report = IndexReport {
        pipeline: spec.name.clone(),
        representation: representation.kind,
        representation_params: representation.params.clone(),
        feature_distance: spec.feature_distance.clone(),
        reference_distance: reference_spec.clone(),
        k: spec.k,
        n_runs: spec.n_runs,
        seed: spec.seed,
        perplexity,
        within,
        within_mean_runs,
        d_js,
        fidelity: fid,
        combined: combined_index(fid, within),
        consensus,
    };
    Ok(PipelineOutput {
        report,
        best,
        runs,
        feature_matrix,
        representation,
    })
}

/// Perplexity resolution shared by the commands.
pub fn resolve_perplexity(requested: Option<f64>, n: usize) -> f64 {
    requested.unwrap_or_else(|| default_perplexity(n))
}

/// Map of representation params for provenance when a transform failed
/// before producing a Representation.
pub fn empty_params() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenclust_core::{generate_synthetic, SyntheticSpec};

    fn small_raw() -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n_locations: 2,
            n_scenarios: 10,
            t: 64,
            location_mean_spread: 2.0,
            scenario_shape_amplitude: 1.0,
            noise_std: 0.2,
            rng_seed: 5,
            shape_groups: Some(3),
        })
        .unwrap()
    }

    #[test]
    fn canonical_names_build() {
        let params = PipelineParams {
            k_max: 8,
            band: Some(6),
            alpha: 0.95,
        };
        for name in PIPELINE_NAMES {
            let spec = pipeline_from_name(name, &params, 3, 2, 1).unwrap();
            assert_eq!(spec.name, name);
        }
        assert!(pipeline_from_name("nope", &params, 3, 2, 1).is_err());
    }

    #[test]
    fn identity_l2_pipeline_has_unit_fidelity() {
        let raw = small_raw();
        let base = EvalBase::prepare(&raw).unwrap();
        let params = PipelineParams {
            k_max: 8,
            band: None,
            alpha: 0.95,
        };
        let reference_spec = reference_distance_spec(ReferenceKind::L2, &params);
        let reference = base.reference_matrix(ReferenceKind::L2, &params).unwrap();
        let perplexity = resolve_perplexity(None, raw.n());
        let p = affinities(&reference, perplexity).unwrap();
        let spec = pipeline_from_name("l2", &params, 3, 2, 7).unwrap();
        let out = run_pipeline(&base, &spec, &reference_spec, &p, perplexity).unwrap();
        assert_eq!(out.report.fidelity, 1.0);
        assert_eq!(out.report.d_js, 0.0);
        assert_eq!(
            out.report.combined.to_bits(),
            (1.0 - out.report.within).to_bits()
        );
    }

    #[test]
    fn mean_pipeline_loses_fidelity_on_shape_data() {
        // One location: means carry almost nothing, shapes carry everything.
        let raw = generate_synthetic(&SyntheticSpec {
            n_locations: 1,
            n_scenarios: 12,
            t: 64,
            location_mean_spread: 0.0,
            scenario_shape_amplitude: 1.0,
            noise_std: 0.05,
            rng_seed: 9,
            shape_groups: Some(4),
        })
        .unwrap();
        let base = EvalBase::prepare(&raw).unwrap();
        let params = PipelineParams {
            k_max: 8,
            band: None,
            alpha: 0.95,
        };
        let reference_spec = reference_distance_spec(ReferenceKind::L2, &params);
        let reference = base.reference_matrix(ReferenceKind::L2, &params).unwrap();
        let perplexity = resolve_perplexity(None, raw.n());
        let p = affinities(&reference, perplexity).unwrap();

        let identity = run_pipeline(
            &base,
            &pipeline_from_name("l2", &params, 4, 2, 3).unwrap(),
            &reference_spec,
            &p,
            perplexity,
        )
        .unwrap();
        let mean = run_pipeline(
            &base,
            &pipeline_from_name("mean", &params, 4, 2, 3).unwrap(),
            &reference_spec,
            &p,
            perplexity,
        )
        .unwrap();
        assert!(
            mean.report.fidelity < identity.report.fidelity,
            "mean F {} vs identity F {}",
            mean.report.fidelity,
            identity.report.fidelity
        );
    }
}
