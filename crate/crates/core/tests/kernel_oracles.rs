//! Distance kernels against brute-force oracles on short series.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use scenclust_core::distances::{dist_dtw, dist_mlpc, DtwCost, MlpcNormalization};

/// Minimal accumulated cost over every monotone warping path, by explicit
/// depth-first enumeration with front-to-back accumulation (the same
/// association order the dynamic program uses, so results match bit-exactly).
fn dtw_brute_force(z: &[f64], w: &[f64], cost: DtwCost) -> f64 {
    fn cell(z: &[f64], w: &[f64], i: usize, j: usize, cost: DtwCost) -> f64 {
        let d = z[i] - w[j];
        match cost {
            DtwCost::Squared => d * d,
            DtwCost::Absolute => d.abs(),
        }
    }
    fn walk(z: &[f64], w: &[f64], i: usize, j: usize, acc: f64, cost: DtwCost, best: &mut f64) {
        let acc = acc + cell(z, w, i, j, cost);
        if i == z.len() - 1 && j == w.len() - 1 {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < z.len() {
            walk(z, w, i + 1, j, acc, cost, best);
        }
        if j + 1 < w.len() {
            walk(z, w, i, j + 1, acc, cost, best);
        }
        if i + 1 < z.len() && j + 1 < w.len() {
            walk(z, w, i + 1, j + 1, acc, cost, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(z, w, 0, 0, 0.0, cost, &mut best);
    match cost {
        DtwCost::Squared => best.sqrt(),
        DtwCost::Absolute => best,
    }
}

/// Lag-by-lag Pearson search with per-lag two-pass statistics, independent
/// of the fused-loop implementation.
fn mlpc_brute_force(z: &[f64], w: &[f64], k_max: usize) -> Option<f64> {
    let n = z.len();
    let mut best = f64::NEG_INFINITY;
    for k in -(k_max as i64)..=(k_max as i64) {
        let (a, b): (Vec<f64>, Vec<f64>) = if k >= 0 {
            (z[k as usize..].to_vec(), w[..n - k as usize].to_vec())
        } else {
            (w[(-k) as usize..].to_vec(), z[..n - (-k) as usize].to_vec())
        };
        let ma = scenclust_core::stats::mean(&a);
        let mb = scenclust_core::stats::mean(&b);
        let sa = scenclust_core::stats::population_std(&a);
        let sb = scenclust_core::stats::population_std(&b);
        if sa == 0.0 || sb == 0.0 {
            return None;
        }
        let cov = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / a.len() as f64;
        let corr = cov / (sa * sb);
        if corr > best {
            best = corr;
        }
    }
    Some(1.0 - best.clamp(-1.0, 1.0))
}

fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0..3) as f64).collect()
}

#[test]
fn dtw_matches_path_enumeration_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..2000 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=8);
        let z = random_series(&mut rng, n);
        let w = random_series(&mut rng, m);
        let cost = if case % 2 == 0 {
            DtwCost::Squared
        } else {
            DtwCost::Absolute
        };
        let got = dist_dtw(&z, &w, cost, None).unwrap();
        let expected = dtw_brute_force(&z, &w, cost);
        assert_eq!(
            got.to_bits(),
            expected.to_bits(),
            "case {case}: {z:?} vs {w:?}"
        );
    }
}

#[test]
fn banded_dtw_matches_enumeration_when_band_covers_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.random_range(2..=7);
        let z = random_series(&mut rng, n);
        let w = random_series(&mut rng, n);
        let got = dist_dtw(&z, &w, DtwCost::Squared, Some(n)).unwrap();
        let expected = dtw_brute_force(&z, &w, DtwCost::Squared);
        assert_eq!(got.to_bits(), expected.to_bits());
    }
}

#[test]
fn mlpc_matches_lag_search_within_1e10() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 1500 {
        let n = rng.random_range(4..=8);
        let z = random_series(&mut rng, n);
        let w = random_series(&mut rng, n);
        let k_max = rng.random_range(0..=(n - 3).min(2));
        let Some(expected) = mlpc_brute_force(&z, &w, k_max) else {
            continue; // constant segment somewhere: both sides must refuse
        };
        match dist_mlpc(&z, &w, k_max, MlpcNormalization::Overlap) {
            Ok(got) => {
                assert!(
                    (got - expected).abs() < 1e-10,
                    "{z:?} vs {w:?} k_max {k_max}: {got} vs {expected}"
                );
                checked += 1;
            }
            Err(e) => panic!("oracle defined but kernel failed: {e}"),
        }
    }
}

#[test]
fn mlpc_errors_exactly_when_oracle_is_undefined() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..800 {
        let n = rng.random_range(4..=8);
        let z = random_series(&mut rng, n);
        let w = random_series(&mut rng, n);
        let k_max = 1;
        let oracle = mlpc_brute_force(&z, &w, k_max);
        let got = dist_mlpc(&z, &w, k_max, MlpcNormalization::Overlap);
        assert_eq!(oracle.is_none(), got.is_err(), "{z:?} vs {w:?}");
    }
}
