//! K-medoids clustering over a precomputed distance matrix, with seeded
//! random restarts, plus lag-aligned cluster representatives.
//!
//! The algorithm is the plain alternating scheme: initialize medoids at k
//! distinct random records, assign every record to its nearest medoid, then
//! replace each cluster's medoid by the member minimizing the sum of
//! distances to the other members, until assignments stop changing. Ties are
//! always broken by the lowest index so runs are reproducible.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_sample, Dataset};
use crate::distances::{overlap_pearson, DistanceMatrix};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;

/// One clustering: labels in [0, k), the medoid record index per cluster,
/// and the sum of record-to-medoid distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub medoids: Vec<usize>,
    pub objective: f64,
    #[serde(rename = "seed")]
    pub rng_seed: u64,
    pub n_iterations: usize,
    /// Objective after every assignment pass; non-increasing.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl ClusteringResult {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    /// Record indices belonging to cluster `c`.
    pub fn members_of(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect()
    }
}

/// Runs k-medoids with medoids initialized at k distinct records drawn from
/// the seeded generator.
pub fn kmedoids(d: &DistanceMatrix, k: usize, seed: u64) -> Result<ClusteringResult> {
    let n = d.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = rand::seq::index::sample(&mut rng, n, k).into_vec();
    medoids.sort_unstable();
    kmedoids_from_init(d, medoids, seed)
}

/// K-medoids from explicit initial medoids (distinct record indices).
pub fn kmedoids_from_init(
    d: &DistanceMatrix,
    initial_medoids: Vec<usize>,
    seed: u64,
) -> Result<ClusteringResult> {
    let n = d.n();
    let k = initial_medoids.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    {
        let mut sorted = initial_medoids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k || *sorted.last().unwrap() >= n {
            return Err(Error::InvalidParam {
                name: "initial_medoids",
                reason: "must be distinct indices below n".into(),
            });
        }
    }

    let mut medoids = initial_medoids;
    let mut labels = assign(d, &medoids);
    repair_empty_clusters(d, &mut medoids, &mut labels);
    let mut trace = vec![objective_of(d, &medoids, &labels)];
    let mut n_iterations = 1;

    while n_iterations < MAX_ITERATIONS {
        update_medoids(d, &mut medoids, &labels);
        let new_labels = assign(d, &medoids);
        n_iterations += 1;
        trace.push(objective_of(d, &medoids, &new_labels));
        if new_labels == labels {
            break;
        }
        labels = new_labels;
    }

    let objective = *trace.last().unwrap();
    Ok(ClusteringResult {
        labels,
        medoids,
        objective,
        rng_seed: seed,
        n_iterations,
        objective_trace: trace,
    })
}

/// Nearest-medoid assignment. A medoid always belongs to its own cluster;
/// other records break distance ties by the lowest medoid record index.
fn assign(d: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    let n = d.n();
    let mut labels = vec![0usize; n];
    for i in 0..n {
        if let Some(c) = medoids.iter().position(|&m| m == i) {
            labels[i] = c;
            continue;
        }
        let mut best_c = 0;
        let mut best_dist = f64::INFINITY;
        let mut best_medoid = usize::MAX;
        for (c, &m) in medoids.iter().enumerate() {
            let dist = d.get(i, m);
            if dist < best_dist || (dist == best_dist && m < best_medoid) {
                best_dist = dist;
                best_medoid = m;
                best_c = c;
            }
        }
        labels[i] = best_c;
    }
    labels
}

/// With medoids pinned to their own clusters no cluster can empty out; this
/// guards the invariant anyway by promoting the point farthest from its
/// medoid to be the empty cluster's singleton medoid.
fn repair_empty_clusters(d: &DistanceMatrix, medoids: &mut [usize], labels: &mut [usize]) {
    for c in 0..medoids.len() {
        if labels.iter().any(|&l| l == c) {
            continue;
        }
        let farthest = (0..d.n())
            .filter(|i| !medoids.contains(i))
            .max_by(|&a, &b| {
                d.get(a, medoids[labels[a]])
                    .partial_cmp(&d.get(b, medoids[labels[b]]))
                    .unwrap()
                    .then(b.cmp(&a))
            });
        if let Some(point) = farthest {
            medoids[c] = point;
            labels[point] = c;
        }
    }
}

fn update_medoids(d: &DistanceMatrix, medoids: &mut [usize], labels: &[usize]) {
    for c in 0..medoids.len() {
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect();
        let mut best = medoids[c];
        let mut best_cost = f64::INFINITY;
        for &candidate in &members {
            let cost: f64 = members.iter().map(|&x| d.get(candidate, x)).sum();
            if cost < best_cost || (cost == best_cost && candidate < best) {
                best_cost = cost;
                best = candidate;
            }
        }
        medoids[c] = best;
    }
}

fn objective_of(d: &DistanceMatrix, medoids: &[usize], labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| d.get(i, medoids[c]))
        .sum()
}

/// Runs `n_runs` k-medoids instances with seeds `seed + run_index`, in
/// parallel. Returns the best run (lowest objective, ties by lowest run
/// index) along with every run for consensus computation.
pub fn kmedoids_restarts(
    d: &DistanceMatrix,
    k: usize,
    n_runs: usize,
    seed: u64,
) -> Result<(ClusteringResult, Vec<ClusteringResult>)> {
    if n_runs == 0 {
        return Err(Error::InvalidParam {
            name: "n_runs",
            reason: "must be >= 1".into(),
        });
    }
    let runs: Vec<ClusteringResult> = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| kmedoids(d, k, seed.wrapping_add(r)))
        .collect::<Result<_>>()?;
    let best_idx = runs
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap()
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .unwrap();
    Ok((runs[best_idx].clone(), runs))
}

/// A cluster's lag-aligned barycenter. `series` covers the absolute time
/// window `start .. start + series.len()` shared by every aligned member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Representative {
    pub cluster_id: usize,
    pub series: Vec<f64>,
    pub start: usize,
    /// (record index, applied lag) per member; a member's aligned value at
    /// absolute time t is its series at t - lag.
    pub member_lags: Vec<(usize, i64)>,
}

const MAX_ALIGN_ITERATIONS: usize = 20;

/// Extracts a cluster representative by alternating lag alignment against
/// the current barycenter with barycenter recomputation on the window
/// covered by all aligned members. `medoid` seeds the barycenter and must be
/// in `members`.
pub fn extract_representative(
    ds: &Dataset,
    members: &[usize],
    medoid: usize,
    k_max: usize,
) -> Result<Representative> {
    if members.is_empty() {
        return Err(Error::EmptyMembers);
    }
    if !members.contains(&medoid) {
        return Err(Error::InvalidParam {
            name: "medoid",
            reason: format!("medoid {medoid} is not in the member set"),
        });
    }
    let t = ds.t();
    if k_max >= t {
        return Err(Error::InvalidParam {
            name: "k_max",
            reason: format!("k_max {k_max} must be < T={t}"),
        });
    }
    for &i in members {
        let rec = &ds.records()[i];
        if rec.population_std() == 0.0 {
            return Err(Error::ConstantRecord {
                index: i,
                scenario: rec.scenario_id,
                location: rec.location_id,
            });
        }
    }

    let mut barycenter: Vec<f64> = ds.records()[medoid].values.clone();
    let mut start: usize = 0;
    let mut lags: Vec<i64> = vec![0; members.len()];

    for _ in 0..MAX_ALIGN_ITERATIONS {
        let mut new_lags = Vec::with_capacity(members.len());
        for &i in members {
            new_lags.push(best_lag(
                &barycenter,
                start,
                &ds.records()[i].values,
                k_max,
            )?);
        }

        // Window covered by every aligned member: member i covers
        // [lag_i, T + lag_i).
        let lo = new_lags.iter().copied().max().unwrap().max(0) as usize;
        let hi_signed = new_lags.iter().copied().min().unwrap().min(0) + t as i64;
        let hi = hi_signed as usize;
        if hi <= lo + 1 {
            return Err(Error::DegenerateData(
                "lag alignment left no common window".into(),
            ));
        }
        let mut mean = vec![0.0; hi - lo];
        for (&i, &lag) in members.iter().zip(&new_lags) {
            let values = &ds.records()[i].values;
            for (w, m) in mean.iter_mut().enumerate() {
                let src = (lo + w) as i64 - lag;
                *m += values[src as usize];
            }
        }
        let inv = 1.0 / members.len() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        barycenter = mean;
        start = lo;

        if new_lags == lags {
            break;
        }
        lags = new_lags;
    }

    Ok(Representative {
        cluster_id: 0,
        series: barycenter,
        start,
        member_lags: members.iter().copied().zip(lags).collect(),
    })
}

/// Lag in [-k_max, k_max] maximizing the overlap Pearson correlation between
/// the barycenter (living on absolute window `start..start+len`) and the
/// member shifted by the lag. Ties prefer the smaller |lag|, then the
/// smaller lag.
fn best_lag(barycenter: &[f64], start: usize, member: &[f64], k_max: usize) -> Result<i64> {
    let t = member.len() as i64;
    let w0 = start as i64;
    let w1 = start as i64 + barycenter.len() as i64;
    let mut best: Option<(f64, i64)> = None;
    for lag in -(k_max as i64)..=(k_max as i64) {
        // Member covers absolute times [lag, T + lag).
        let lo = w0.max(lag);
        let hi = w1.min(t + lag);
        if hi - lo < 3 {
            continue;
        }
        let bary_seg = &barycenter[(lo - w0) as usize..(hi - w0) as usize];
        let member_seg = &member[(lo - lag) as usize..(hi - lag) as usize];
        let Some(corr) = overlap_pearson(bary_seg, member_seg) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((best_corr, best_lag)) => {
                corr > best_corr
                    || (corr == best_corr
                        && (lag.abs() < best_lag.abs()
                            || (lag.abs() == best_lag.abs() && lag < best_lag)))
            }
        };
        if better {
            best = Some((corr, lag));
        }
    }
    best.map(|(_, lag)| lag).ok_or_else(|| {
        Error::DegenerateData("no lag with a well-defined correlation".into())
    })
}

/// Writes representatives as `cluster_id,t,value` rows (absolute time
/// indices), all clusters in one file.
pub fn write_representatives_csv<P: AsRef<Path>>(
    path: P,
    reps: &[Representative],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "cluster_id,t,value")?;
    for rep in reps {
        for (offset, v) in rep.series.iter().enumerate() {
            writeln!(w, "{},{},{}", rep.cluster_id, rep.start + offset, fmt_sample(*v))?;
        }
    }
    w.flush()?;
    Ok(())
}
