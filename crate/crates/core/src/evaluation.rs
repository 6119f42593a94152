//! Pipeline evaluation: Gaussian neighbor affinities, the fidelity index F,
//! the within index W, the combined index I = F(1-W), and the consensus
//! index across clustering runs.
//!
//! Affinities follow the stochastic-neighbor construction: per-point
//! bandwidths are solved by bisection so every conditional distribution has
//! the target perplexity, conditionals are symmetrized to a joint
//! distribution over ordered pairs, then floored and renormalized so the
//! symmetrized Kullback-Leibler divergence stays finite. Natural logarithms
//! throughout; the logistic map F = 2 / (1 + e^{D_JS}) is base-sensitive.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringResult;
use crate::distances::{DistanceMatrix, DistanceSpec};
use crate::error::{Error, Result};
use crate::transforms::RepresentationKind;

/// Floor applied to off-diagonal joint probabilities before renormalization.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Absolute tolerance on the per-row conditional perplexity.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-4;

const BISECTION_ITERATIONS: usize = 64;

/// Joint affinity distribution over ordered pairs (zero diagonal).
#[derive(Debug, Clone)]
pub struct AffinityModel {
    matrix: Array2<f64>,
    perplexity: Option<f64>,
    bandwidths: Option<Vec<f64>>,
}

impl AffinityModel {
    /// Wraps an explicit joint matrix (mostly for oracles and tests):
    /// symmetric, zero diagonal, off-diagonal entries at least the floor,
    /// summing to 1 within 1e-9.
    pub fn from_joint(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::SizeMismatch {
                left: n,
                right: matrix.ncols(),
            });
        }
        let mut sum = 0.0;
        for i in 0..n {
            if matrix[[i, i]] != 0.0 {
                return Err(Error::Format(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let p = matrix[[i, j]];
                if p < PROBABILITY_FLOOR || !p.is_finite() {
                    return Err(Error::Format(format!("entry ({i},{j}) below floor: {p}")));
                }
                if p != matrix[[j, i]] {
                    return Err(Error::Format(format!("asymmetry at ({i},{j})")));
                }
                sum += p;
            }
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("off-diagonal sum {sum} != 1")));
        }
        Ok(Self {
            matrix,
            perplexity: None,
            bandwidths: None,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn joint(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn perplexity(&self) -> Option<f64> {
        self.perplexity
    }

    /// Per-point Gaussian bandwidths sigma_i solved by the bisection.
    pub fn bandwidths(&self) -> Option<&[f64]> {
        self.bandwidths.as_deref()
    }
}

/// Default perplexity: 30, clamped to (N-1)/3 for small datasets.
pub fn default_perplexity(n: usize) -> f64 {
    (((n as f64) - 1.0) / 3.0).min(30.0).max(1.5)
}

/// Builds the Gaussian affinity model on a distance matrix. Conditional
/// p_{j|i} is proportional to exp(-d(i,j)^2 / (2 sigma_i^2)) with sigma_i
/// solved so the conditional perplexity (2^entropy) matches `perplexity`
/// within 1e-4; conditionals are symmetrized as (p_{j|i} + p_{i|j}) / (2N),
/// floored and renormalized.
pub fn affinities(d: &DistanceMatrix, perplexity: f64) -> Result<AffinityModel> {
    let n = d.n();
    if n < 3 {
        return Err(Error::DatasetTooSmall { n });
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::InvalidParam {
            name: "perplexity",
            reason: format!("must be in (1, N={n}), got {perplexity}"),
        });
    }

    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sq_dists: Vec<f64> = (0..n)
                .map(|j| {
                    let v = d.get(i, j);
                    v * v
                })
                .collect();
            solve_conditional(&sq_dists, i, perplexity)
        })
        .collect::<Result<_>>()?;

    let mut joint = Array2::zeros((n, n));
    let two_n = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            joint[[i, j]] = (rows[i].0[j] + rows[j].0[i]) / two_n;
        }
    }
    // Floor, then renormalize the off-diagonal mass back to 1.
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[[i, j]] = joint[[i, j]].max(PROBABILITY_FLOOR);
                sum += joint[[i, j]];
            }
        }
    }
    joint.mapv_inplace(|v| v / sum);

    Ok(AffinityModel {
        matrix: joint,
        perplexity: Some(perplexity),
        bandwidths: Some(rows.into_iter().map(|(_, s)| s).collect()),
    })
}

/// Solves one row's bandwidth by bisection on beta = 1/(2 sigma^2).
/// Returns the conditional distribution (full length, zero at `i`) and
/// sigma_i.
fn solve_conditional(sq_dists: &[f64], i: usize, perplexity: f64) -> Result<(Vec<f64>, f64)> {
    let n = sq_dists.len();
    // Shift squared distances so the smallest off-diagonal is zero; the
    // conditional distribution is invariant and exponentials stay tame.
    let shift = sq_dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);

    let eval = |beta: f64| -> (f64, Vec<f64>) {
        let mut probs = vec![0.0; n];
        let mut z = 0.0;
        for (j, &d2) in sq_dists.iter().enumerate() {
            if j == i {
                continue;
            }
            let p = (-(d2 - shift) * beta).exp();
            probs[j] = p;
            z += p;
        }
        let mut entropy = 0.0;
        for (j, p) in probs.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            *p /= z;
            if *p > 0.0 {
                entropy -= *p * p.ln();
            }
        }
        (entropy.exp(), probs)
    };

    let mut beta = 1.0;
    let mut beta_lo = 0.0f64;
    let mut beta_hi = f64::INFINITY;
    let (mut perp, mut probs) = eval(beta);
    // Bracket the target: perplexity decreases as beta grows.
    let mut expand = 0;
    while (perp - perplexity).abs() > PERPLEXITY_TOLERANCE && expand < BISECTION_ITERATIONS {
        if perp > perplexity {
            beta_lo = beta;
            beta = if beta_hi.is_finite() {
                (beta + beta_hi) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            beta_hi = beta;
            beta = (beta + beta_lo) / 2.0;
        }
        (perp, probs) = eval(beta);
        expand += 1;
    }
    // Bisect to effectively machine precision so affinities are invariant
    // under rescaling all distances.
    let mut iter = 0;
    while (perp - perplexity).abs() > 1e-10 && iter < BISECTION_ITERATIONS {
        if perp > perplexity {
            beta_lo = beta;
        } else {
            beta_hi = beta;
        }
        beta = if beta_hi.is_finite() {
            (beta_lo + beta_hi) / 2.0
        } else {
            beta * 2.0
        };
        (perp, probs) = eval(beta);
        iter += 1;
    }
    if (perp - perplexity).abs() > PERPLEXITY_TOLERANCE {
        return Err(Error::BisectionFailure {
            index: i,
            reason: format!(
                "perplexity {perp} does not reach target {perplexity} (degenerate distances)"
            ),
        });
    }
    Ok((probs, 1.0 / (2.0 * beta).sqrt()))
}

/// Symmetrized Kullback-Leibler divergence between two affinity models,
/// natural log, off-diagonal entries only:
/// `D_KL(P||Q)/2 + D_KL(Q||P)/2`.
pub fn js_divergence(p: &AffinityModel, q: &AffinityModel) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::SizeMismatch {
            left: p.n(),
            right: q.n(),
        });
    }
    let n = p.n();
    let mut kl_pq = 0.0;
    let mut kl_qp = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p.matrix[[i, j]];
            let qij = q.matrix[[i, j]];
            kl_pq += pij * (pij / qij).ln();
            kl_qp += qij * (qij / pij).ln();
        }
    }
    // Non-negative by Gibbs; clamp away FP residue so F stays in (0, 1].
    Ok((kl_pq / 2.0 + kl_qp / 2.0).max(0.0))
}

/// Logistic map from divergence to fidelity: F = 2 / (1 + e^{D_JS}).
pub fn fidelity_from_divergence(d_js: f64) -> f64 {
    2.0 / (1.0 + d_js.exp())
}

/// Fidelity of a feature-space geometry to a reference geometry: builds both
/// affinity models at the same perplexity and maps their divergence through
/// the logistic. Returns (F, D_JS).
pub fn fidelity(
    d_reference: &DistanceMatrix,
    d_feature: &DistanceMatrix,
    perplexity: f64,
) -> Result<(f64, f64)> {
    if d_reference.n() != d_feature.n() {
        return Err(Error::SizeMismatch {
            left: d_reference.n(),
            right: d_feature.n(),
        });
    }
    let p = affinities(d_reference, perplexity)?;
    let q = affinities(d_feature, perplexity)?;
    let d_js = js_divergence(&p, &q)?;
    Ok((fidelity_from_divergence(d_js), d_js))
}

/// Within index: mean squared distance to the assigned medoid, normalized by
/// the mean squared distance over all ordered pairs.
pub fn within_index(d: &DistanceMatrix, c: &ClusteringResult) -> Result<f64> {
    let n = d.n();
    if c.labels.len() != n {
        return Err(Error::SizeMismatch {
            left: c.labels.len(),
            right: n,
        });
    }
    for &m in &c.medoids {
        if m >= n {
            return Err(Error::InvalidParam {
                name: "medoids",
                reason: format!("medoid {m} out of range"),
            });
        }
    }
    let mut numerator = 0.0;
    for (i, &label) in c.labels.iter().enumerate() {
        let dist = d.get(i, c.medoids[label]);
        numerator += dist * dist;
    }
    numerator /= n as f64;

    let mut denominator = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dist = d.get(i, j);
                denominator += dist * dist;
            }
        }
    }
    denominator /= (n * (n - 1)) as f64;
    if denominator == 0.0 {
        return Err(Error::DegenerateData(
            "all pairwise distances are zero".into(),
        ));
    }
    Ok(numerator / denominator)
}

/// Combined index I = F (1 - W). Negative when W > 1; reported as-is.
pub fn combined_index(fidelity: f64, within: f64) -> f64 {
    fidelity * (1.0 - within)
}

/// Adjusted Rand index between two labelings of the same records. Returns 1
/// for two identical trivial partitions (the usual convention when the
/// chance-adjustment denominator vanishes).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::DatasetTooSmall { n });
    }
    let comb2 = |x: usize| -> f64 {
        let x = x as f64;
        x * (x - 1.0) / 2.0
    };
    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(n);
    let max_index = (sum_a + sum_b) / 2.0;
    if max_index == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Mean pairwise adjusted Rand index over all unordered run pairs.
pub fn consensus_index(runs: &[ClusteringResult]) -> Result<f64> {
    if runs.len() < 2 {
        return Err(Error::InvalidParam {
            name: "runs",
            reason: "consensus needs at least 2 runs".into(),
        });
    }
    let n = runs[0].labels.len();
    for run in runs {
        if run.labels.len() != n {
            return Err(Error::SizeMismatch {
                left: run.labels.len(),
                right: n,
            });
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            total += adjusted_rand_index(&runs[i].labels, &runs[j].labels)?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Scores and provenance for one (representation, distance) pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexReport {
    pub pipeline: String,
    pub representation: RepresentationKind,
    pub representation_params: BTreeMap<String, f64>,
    pub feature_distance: DistanceSpec,
    pub reference_distance: DistanceSpec,
    pub k: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub perplexity: f64,
    /// Within index of the best run.
    #[serde(rename = "W")]
    pub within: f64,
    /// Mean within index across all runs.
    pub within_mean_runs: f64,
    #[serde(rename = "D_JS")]
    pub d_js: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    /// I = F (1 - W), computed exactly as that product.
    #[serde(rename = "I")]
    pub combined: f64,
    /// Mean pairwise ARI across runs; absent for a single run.
    pub consensus: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmedoids;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn matrix_from_points(points: &[f64]) -> DistanceMatrix {
        let n = points.len();
        let values = Array2::from_shape_fn((n, n), |(i, j)| (points[i] - points[j]).abs());
        DistanceMatrix::new(DistanceSpec::l2(), values).unwrap()
    }

    fn random_distance_matrix(n: usize, seed: u64) -> DistanceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0))
            .collect();
        let values = Array2::from_shape_fn((n, n), |(i, j)| {
            let dx = points[i].0 - points[j].0;
            let dy = points[i].1 - points[j].1;
            (dx * dx + dy * dy).sqrt()
        });
        DistanceMatrix::new(DistanceSpec::l2(), values).unwrap()
    }

    #[test]
    fn three_equidistant_points_are_uniform() {
        let values = Array2::from_shape_fn((3, 3), |(i, j)| if i == j { 0.0 } else { 1.0 });
        let d = DistanceMatrix::new(DistanceSpec::l2(), values).unwrap();
        let model = affinities(&d, 2.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((model.joint()[[i, j]] - 1.0 / 6.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn conditional_perplexities_match_target() {
        let d = random_distance_matrix(12, 3);
        let target = 5.0;
        let model = affinities(&d, target).unwrap();
        let sigmas = model.bandwidths().unwrap();
        for i in 0..12 {
            // Recompute the conditional from sigma_i and check 2^entropy.
            let beta = 1.0 / (2.0 * sigmas[i] * sigmas[i]);
            let mut probs = Vec::new();
            for j in 0..12 {
                if j != i {
                    let dist = d.get(i, j);
                    probs.push((-dist * dist * beta).exp());
                }
            }
            let z: f64 = probs.iter().sum();
            let entropy: f64 = probs
                .iter()
                .map(|p| {
                    let p = p / z;
                    -p * p.ln()
                })
                .sum();
            let perp = entropy.exp();
            assert!((perp - target).abs() < 1e-3, "row {i}: {perp}");
        }
    }

    #[test]
    fn far_point_prefers_its_nearest_neighbor() {
        let d = matrix_from_points(&[0.0, 1.0, 2.0, 10.0]);
        let model = affinities(&d, 2.0).unwrap();
        let p = model.joint();
        // Point 3's nearest is point 2.
        assert!(p[[3, 2]] > p[[3, 1]]);
        assert!(p[[3, 2]] > p[[3, 0]]);
    }

    #[test]
    fn equal_distances_fail_bisection() {
        let values = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 0.0 } else { 1.0 });
        let d = DistanceMatrix::new(DistanceSpec::l2(), values).unwrap();
        // Uniform conditionals have perplexity 3 regardless of sigma.
        assert!(matches!(
            affinities(&d, 2.0),
            Err(Error::BisectionFailure { .. })
        ));
    }

    #[test]
    fn affinities_are_scale_invariant() {
        let d = random_distance_matrix(10, 7);
        let scaled = DistanceMatrix::new(
            DistanceSpec::l2(),
            d.values().mapv(|v| v * 37.5),
        )
        .unwrap();
        let a = affinities(&d, 4.0).unwrap();
        let b = affinities(&scaled, 4.0).unwrap();
        for (x, y) in a.joint().iter().zip(b.joint().iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn joint_sums_to_one_and_is_floored() {
        let d = random_distance_matrix(9, 11);
        let model = affinities(&d, 3.0).unwrap();
        let mut sum = 0.0;
        for i in 0..9 {
            assert_eq!(model.joint()[[i, i]], 0.0);
            for j in 0..9 {
                if i != j {
                    let p = model.joint()[[i, j]];
                    assert!(p >= PROBABILITY_FLOOR / 2.0);
                    assert_eq!(p, model.joint()[[j, i]]);
                    sum += p;
                }
            }
        }
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn divergence_of_identical_models_is_zero() {
        let d = random_distance_matrix(8, 5);
        let p = affinities(&d, 3.0).unwrap();
        let q = affinities(&d, 3.0).unwrap();
        assert_eq!(js_divergence(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn divergence_is_symmetric() {
        let p = affinities(&random_distance_matrix(8, 5), 3.0).unwrap();
        let q = affinities(&random_distance_matrix(8, 6), 3.0).unwrap();
        let a = js_divergence(&p, &q).unwrap();
        let b = js_divergence(&q, &p).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(a > 0.0);
    }

    #[test]
    fn divergence_matches_direct_summation() {
        // Two explicit 3-point joints, checked against a term-by-term loop
        // written independently of js_divergence.
        let p_half = [0.10, 0.25, 0.15];
        let q_half = [0.20, 0.12, 0.18];
        let build = |half: [f64; 3]| {
            let mut m = Array2::zeros((3, 3));
            m[[0, 1]] = half[0];
            m[[1, 0]] = half[0];
            m[[0, 2]] = half[1];
            m[[2, 0]] = half[1];
            m[[1, 2]] = half[2];
            m[[2, 1]] = half[2];
            AffinityModel::from_joint(m).unwrap()
        };
        let p = build(p_half);
        let q = build(q_half);
        let mut expected = 0.0;
        for (pv, qv) in p_half.iter().zip(&q_half) {
            // Each unordered pair appears twice in the ordered sum.
            expected += 2.0 * (pv * (pv / qv).ln() / 2.0 + qv * (qv / pv).ln() / 2.0);
        }
        let got = js_divergence(&p, &q).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn fidelity_is_one_for_identical_geometry() {
        let d = random_distance_matrix(10, 2);
        let (f, d_js) = fidelity(&d, &d, 4.0).unwrap();
        assert_eq!(d_js, 0.0);
        assert_eq!(f, 1.0);
    }

    #[test]
    fn fidelity_at_ln3_is_half() {
        let f = fidelity_from_divergence(3.0f64.ln());
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_decreases_in_divergence() {
        let mut prev = fidelity_from_divergence(0.0);
        assert_eq!(prev, 1.0);
        for d in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let f = fidelity_from_divergence(d);
            assert!(f < prev);
            assert!(f > 0.0);
            prev = f;
        }
    }

    fn worked_four_point_matrix() -> DistanceMatrix {
        // Two pairs at internal distance 1, all cross distances 10.
        let mut values = Array2::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let same = (i < 2) == (j < 2);
                values[[i, j]] = if same { 1.0 } else { 10.0 };
            }
        }
        DistanceMatrix::new(DistanceSpec::l2(), values).unwrap()
    }

    #[test]
    fn within_index_worked_example() {
        let d = worked_four_point_matrix();
        let c = ClusteringResult {
            labels: vec![0, 0, 1, 1],
            medoids: vec![0, 2],
            objective: 2.0,
            rng_seed: 0,
            n_iterations: 1,
            objective_trace: vec![],
        };
        let w = within_index(&d, &c).unwrap();
        // Numerator mean (0 + 1 + 0 + 1)/4 = 0.5; denominator
        // (4*1 + 8*100)/12 = 67.
        assert!((w - 0.5 / 67.0).abs() < 1e-12);
    }

    #[test]
    fn within_index_zero_when_every_point_is_a_medoid() {
        let d = random_distance_matrix(6, 9);
        let c = kmedoids(&d, 6, 1).unwrap();
        assert_eq!(within_index(&d, &c).unwrap(), 0.0);
    }

    #[test]
    fn random_labels_are_worse_than_fitted() {
        let mut values = Array2::zeros((10, 10));
        for i in 0..10 {
            for j in 0..10 {
                if i == j {
                    continue;
                }
                values[[i, j]] = if (i < 5) == (j < 5) { 0.1 } else { 10.0 };
            }
        }
        let d = DistanceMatrix::new(DistanceSpec::l2(), values).unwrap();
        let fitted = kmedoids(&d, 2, 0).unwrap();
        let w_fit = within_index(&d, &fitted).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worse = 0;
        for _ in 0..20 {
            let labels: Vec<usize> = (0..10).map(|_| rng.random_range(0..2)).collect();
            // Keep medoids fixed; random labels may detach medoids from
            // their clusters, which only increases the numerator.
            let random = ClusteringResult {
                labels,
                medoids: fitted.medoids.clone(),
                objective: 0.0,
                rng_seed: 0,
                n_iterations: 0,
                objective_trace: vec![],
            };
            if within_index(&d, &random).unwrap() >= w_fit {
                worse += 1;
            }
        }
        assert!(worse >= 10, "only {worse}/20 random labelings were worse");
    }

    #[test]
    fn degenerate_all_zero_distances() {
        let values = Array2::zeros((4, 4));
        let d = DistanceMatrix::new(DistanceSpec::l2(), values).unwrap();
        let c = ClusteringResult {
            labels: vec![0, 0, 1, 1],
            medoids: vec![0, 2],
            objective: 0.0,
            rng_seed: 0,
            n_iterations: 1,
            objective_trace: vec![],
        };
        assert!(matches!(
            within_index(&d, &c),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn combined_index_values() {
        assert_eq!(combined_index(1.0, 0.0), 1.0);
        assert!((combined_index(0.5, 0.2) - 0.4).abs() < 1e-15);
        // Bit-exact composition.
        let f = 0.73;
        let w = 0.31;
        assert_eq!(combined_index(f, w).to_bits(), (f * (1.0 - w)).to_bits());
        // W > 1 gives a negative index, reported as-is.
        assert!(combined_index(0.9, 1.5) < 0.0);
    }

    #[test]
    fn ari_checkerboard_is_minus_half() {
        let a = vec![0, 0, 1, 1];
        let b = vec![0, 1, 0, 1];
        let ari = adjusted_rand_index(&a, &b).unwrap();
        assert!((ari + 0.5).abs() < 1e-12, "{ari}");
    }

    #[test]
    fn ari_is_permutation_invariant() {
        let a = vec![0, 0, 1, 1, 2, 2];
        let b = vec![2, 2, 0, 0, 1, 1];
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ari_length_mismatch() {
        assert!(adjusted_rand_index(&[0, 1], &[0, 1, 2]).is_err());
    }

    #[test]
    fn consensus_of_identical_runs_is_exactly_one() {
        let run = ClusteringResult {
            labels: vec![0, 1, 0, 2, 1],
            medoids: vec![0, 1, 3],
            objective: 1.0,
            rng_seed: 0,
            n_iterations: 1,
            objective_trace: vec![],
        };
        let runs = vec![run.clone(), run.clone(), run.clone(), run.clone(), run];
        assert_eq!(consensus_index(&runs).unwrap(), 1.0);
    }

    #[test]
    fn consensus_invariant_to_relabeling() {
        let a = ClusteringResult {
            labels: vec![0, 0, 1, 1, 2, 2],
            medoids: vec![0, 2, 4],
            objective: 1.0,
            rng_seed: 0,
            n_iterations: 1,
            objective_trace: vec![],
        };
        let mut b = a.clone();
        b.labels = vec![1, 1, 2, 2, 0, 0];
        assert_eq!(consensus_index(&[a, b]).unwrap(), 1.0);
    }

    #[test]
    fn consensus_needs_two_runs() {
        let run = ClusteringResult {
            labels: vec![0, 1],
            medoids: vec![0, 1],
            objective: 0.0,
            rng_seed: 0,
            n_iterations: 1,
            objective_trace: vec![],
        };
        assert!(consensus_index(&[run]).is_err());
    }

    #[test]
    fn index_report_serializes_spec_field_names() {
        let report = IndexReport {
            pipeline: "mlpc".into(),
            representation: RepresentationKind::Zscore,
            representation_params: BTreeMap::new(),
            feature_distance: DistanceSpec::mlpc(16),
            reference_distance: DistanceSpec::mlpc(16),
            k: 3,
            n_runs: 5,
            seed: 7,
            perplexity: 10.0,
            within: 0.1,
            within_mean_runs: 0.12,
            d_js: 0.0,
            fidelity: 1.0,
            combined: 0.9,
            consensus: Some(1.0),
        };
        let json = serde_json::to_value(&report).unwrap();
        for field in ["W", "D_JS", "F", "I", "consensus", "pipeline", "k", "seed"] {
            assert!(json.get(field).is_some(), "missing {field}");
        }
    }
}
