//! Pairwise dissimilarities between series: L2, max lagged Pearson
//! correlation (MLPC) and dynamic time warping (DTW), plus symmetric
//! distance-matrix assembly.
//!
//! All kernels are pure functions; [`distance_matrix`] computes each of the
//! N(N-1)/2 pairs exactly once, so parallel and sequential runs produce
//! bit-identical matrices.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::fmt_sample;
use crate::error::{Error, Result};

/// Local cost for the DTW dynamic program. `Squared` accumulates squared
/// differences and takes a final square root, so DTW and L2 share units and
/// DTW <= L2 holds for equal-length series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DtwCost {
    #[default]
    Squared,
    Absolute,
}

/// How MLPC normalizes the correlation at nonzero lags.
///
/// `Overlap` re-standardizes both segments on the overlapping window (the
/// literal Pearson-correlation reading). `ZeroPadded` normalizes the
/// zero-padded cross-correlation by the full-series moments, as in the
/// k-shape SBD; the correlation then decays with the overlap length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MlpcNormalization {
    #[default]
    Overlap,
    ZeroPadded,
}

/// A named distance with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceSpec {
    L2,
    Mlpc {
        k_max: usize,
        #[serde(default)]
        normalization: MlpcNormalization,
    },
    Dtw {
        #[serde(default)]
        cost: DtwCost,
    },
    DtwBanded {
        band: usize,
        #[serde(default)]
        cost: DtwCost,
    },
}

impl DistanceSpec {
    pub fn l2() -> Self {
        DistanceSpec::L2
    }

    pub fn mlpc(k_max: usize) -> Self {
        DistanceSpec::Mlpc {
            k_max,
            normalization: MlpcNormalization::Overlap,
        }
    }

    pub fn dtw(cost: DtwCost) -> Self {
        DistanceSpec::Dtw { cost }
    }

    pub fn dtw_banded(band: usize, cost: DtwCost) -> Self {
        DistanceSpec::DtwBanded { band, cost }
    }

    /// Code stored in the binary distance-matrix header.
    pub fn kind_code(&self) -> u16 {
        match self {
            DistanceSpec::L2 => 1,
            DistanceSpec::Mlpc { .. } => 2,
            DistanceSpec::Dtw { .. } => 3,
            DistanceSpec::DtwBanded { .. } => 4,
        }
    }

    /// Checks the spec against the row length it will be applied to.
    pub fn validate_for_len(&self, len: usize) -> Result<()> {
        if len == 0 {
            return Err(Error::EmptySeries);
        }
        match *self {
            DistanceSpec::L2 | DistanceSpec::Dtw { .. } => Ok(()),
            DistanceSpec::Mlpc { k_max, .. } => {
                if k_max >= len || len - k_max < 3 {
                    Err(Error::InvalidParam {
                        name: "k_max",
                        reason: format!(
                            "k_max {k_max} leaves overlap {} < 3 for series length {len}",
                            len.saturating_sub(k_max)
                        ),
                    })
                } else {
                    Ok(())
                }
            }
            DistanceSpec::DtwBanded { band, .. } => {
                if band >= len {
                    Err(Error::InvalidParam {
                        name: "band",
                        reason: format!("band {band} must be < series length {len}"),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Applies the kernel to a pair of rows.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match *self {
            DistanceSpec::L2 => dist_l2(a, b),
            DistanceSpec::Mlpc {
                k_max,
                normalization,
            } => dist_mlpc(a, b, k_max, normalization),
            DistanceSpec::Dtw { cost } => dist_dtw(a, b, cost, None),
            DistanceSpec::DtwBanded { band, cost } => dist_dtw(a, b, cost, Some(band)),
        }
    }
}

impl fmt::Display for DistanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceSpec::L2 => write!(f, "l2"),
            DistanceSpec::Mlpc {
                k_max,
                normalization: MlpcNormalization::Overlap,
            } => write!(f, "mlpc(k_max={k_max})"),
            DistanceSpec::Mlpc { k_max, .. } => {
                write!(f, "mlpc(k_max={k_max}, zero_padded)")
            }
            DistanceSpec::Dtw { cost } => write!(f, "dtw(cost={cost:?})"),
            DistanceSpec::DtwBanded { band, cost } => {
                write!(f, "dtw_banded(band={band}, cost={cost:?})")
            }
        }
    }
}

/// Euclidean distance between equal-length vectors.
pub fn dist_l2(z: &[f64], w: &[f64]) -> Result<f64> {
    if z.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: w.len(),
        });
    }
    if z.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sum: f64 = z.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum.sqrt())
}

/// Max lagged Pearson correlation dissimilarity:
/// `1 - max over |k| <= k_max of corr_k(z, w)`, in [0, 2].
///
/// For lag k >= 0 the overlap pairs `z[k..]` with `w[..n-k]`; negative lags
/// swap the roles, so `corr_k(z, w) = corr_{-k}(w, z)` holds bit-exactly and
/// the distance is exactly symmetric.
pub fn dist_mlpc(
    z: &[f64],
    w: &[f64],
    k_max: usize,
    normalization: MlpcNormalization,
) -> Result<f64> {
    if z.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: w.len(),
        });
    }
    let n = z.len();
    if k_max >= n || n - k_max < 3 {
        return Err(Error::InvalidParam {
            name: "k_max",
            reason: format!(
                "k_max {k_max} leaves overlap {} < 3 for series length {n}",
                n.saturating_sub(k_max)
            ),
        });
    }

    // Full-series moments, only needed for the zero-padded normalization.
    let full_scale = match normalization {
        MlpcNormalization::Overlap => None,
        MlpcNormalization::ZeroPadded => {
            let mz = crate::stats::mean(z);
            let mw = crate::stats::mean(w);
            let sz = crate::stats::population_std(z);
            let sw = crate::stats::population_std(w);
            if sz == 0.0 || sw == 0.0 {
                return Err(Error::ZeroVarianceAtLag { lag: 0 });
            }
            Some((mz, mw, sz, sw))
        }
    };

    let mut best = f64::NEG_INFINITY;
    for k in -(k_max as i64)..=(k_max as i64) {
        // Segments for this lag; for k < 0 the series swap roles.
        let (a, b) = if k >= 0 {
            (&z[k as usize..], &w[..n - k as usize])
        } else {
            (&w[(-k) as usize..], &z[..n - (-k) as usize])
        };
        let corr = match full_scale {
            None => overlap_pearson(a, b).ok_or(Error::ZeroVarianceAtLag { lag: k })?,
            Some((mz, mw, sz, sw)) => {
                let (ma, mb, sa, sb) = if k >= 0 {
                    (mz, mw, sz, sw)
                } else {
                    (mw, mz, sw, sz)
                };
                let cross: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
                cross / (n as f64 * sa * sb)
            }
        };
        if corr > best {
            best = corr;
        }
    }
    // Guard against rounding pushing the correlation past +-1.
    Ok(1.0 - best.clamp(-1.0, 1.0))
}

/// Pearson correlation of two equal-length segments, re-standardized on the
/// segment. Returns None when either segment is constant.
pub(crate) fn overlap_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let len = a.len() as f64;
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        sum_a += x;
        sum_b += y;
    }
    let ma = sum_a / len;
    let mb = sum_b / len;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - ma;
        let db = y - mb;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Dynamic time warping over the |z| x |w| grid with steps (1,0), (0,1),
/// (1,1). With `band`, cells are restricted to |i - j| <= band (Sakoe-Chiba).
/// Squared cost returns the square root of the optimal path cost.
pub fn dist_dtw(z: &[f64], w: &[f64], cost: DtwCost, band: Option<usize>) -> Result<f64> {
    let n = z.len();
    let m = w.len();
    if n == 0 || m == 0 {
        return Err(Error::EmptySeries);
    }
    if let Some(b) = band {
        let diff = n.abs_diff(m);
        if diff > b {
            return Err(Error::BandTooSmall { band: b, diff });
        }
    }
    let band = band.unwrap_or(n.max(m));

    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        let j_lo = 1.max(i.saturating_sub(band));
        let j_hi = m.min(i + band);
        curr[j_lo - 1] = f64::INFINITY;
        let zi = z[i - 1];
        for j in j_lo..=j_hi {
            let d = zi - w[j - 1];
            let c = match cost {
                DtwCost::Squared => d * d,
                DtwCost::Absolute => d.abs(),
            };
            let best = prev[j].min(prev[j - 1]).min(curr[j - 1]);
            curr[j] = c + best;
        }
        // The next row may read one cell right of this window; make it inf.
        if j_hi + 1 <= m {
            curr[j_hi + 1] = f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let total = prev[m];
    debug_assert!(total.is_finite());
    Ok(match cost {
        DtwCost::Squared => total.sqrt(),
        DtwCost::Absolute => total,
    })
}

/// How [`distance_matrix_with_mode`] schedules the pair computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

/// Symmetric N x N dissimilarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    spec: DistanceSpec,
    values: Array2<f64>,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix, validating symmetry, zero diagonal and
    /// non-negative finite entries.
    pub fn new(spec: DistanceSpec, values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::SizeMismatch {
                left: n,
                right: values.ncols(),
            });
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(Error::Format(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Format(format!("invalid entry at ({i}, {j}): {v}")));
                }
                if v != values[[j, i]] {
                    return Err(Error::Format(format!("asymmetry at ({i}, {j})")));
                }
            }
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &DistanceSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Sum of a row, used by k-medoids and the within index.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.values.row(i).sum()
    }

    /// N header-less CSV rows with 17-significant-digit values.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        for i in 0..self.n() {
            let row: Vec<String> = self.values.row(i).iter().map(|&v| fmt_sample(v)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a matrix written by [`DistanceMatrix::write_csv`]; the CSV does
    /// not carry the distance kind, so the caller supplies the spec.
    pub fn read_csv<P: AsRef<Path>>(path: P, spec: DistanceSpec) -> Result<Self> {
        let reader = BufReader::new(File::open(path.as_ref())?);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .enumerate()
                .map(|(col, raw)| {
                    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path.as_ref().display().to_string(),
                        row: lineno + 1,
                        column: col + 1,
                        what: "value",
                        value: raw.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        let mut values = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedRow {
                    path: path.as_ref().display().to_string(),
                    row: i + 1,
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Self::new(spec, values)
    }

    /// Compact binary form: 16-byte header (8-byte magic `SCLDMX01`, N as
    /// u32 LE, kind code u16 LE, 2 reserved zero bytes) followed by the
    /// strict lower triangle in row order (i from 1, j < i) as f64 LE.
    pub fn write_binary<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n() as u32).to_le_bytes())?;
        w.write_all(&self.spec.kind_code().to_le_bytes())?;
        w.write_all(&[0u8; 2])?;
        for i in 1..self.n() {
            for j in 0..i {
                w.write_all(&self.values[[i, j]].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the binary form, returning the values and the stored kind code.
    pub fn read_binary<P: AsRef<Path>>(path: P) -> Result<(Array2<f64>, u16)> {
        let mut r = BufReader::new(File::open(path.as_ref())?);
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..8] != BINARY_MAGIC {
            return Err(Error::Format("bad magic in binary distance matrix".into()));
        }
        let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let kind_code = u16::from_le_bytes(header[12..14].try_into().unwrap());
        let mut values = Array2::zeros((n, n));
        let mut buf = [0u8; 8];
        for i in 1..n {
            for j in 0..i {
                r.read_exact(&mut buf)?;
                let v = f64::from_le_bytes(buf);
                values[[i, j]] = v;
                values[[j, i]] = v;
            }
        }
        Ok((values, kind_code))
    }
}

const BINARY_MAGIC: &[u8; 8] = b"SCLDMX01";

/// Computes all pairwise distances between the rows of `x` in parallel.
pub fn distance_matrix(x: &Array2<f64>, spec: &DistanceSpec) -> Result<DistanceMatrix> {
    distance_matrix_with_mode(x, spec, Parallelism::Rayon)
}

/// As [`distance_matrix`], with explicit scheduling. Both modes write every
/// pair exactly once and produce bit-identical results.
pub fn distance_matrix_with_mode(
    x: &Array2<f64>,
    spec: &DistanceSpec,
    mode: Parallelism,
) -> Result<DistanceMatrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DatasetTooSmall { n });
    }
    spec.validate_for_len(x.ncols())?;
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let kernel = |&(i, j): &(usize, usize)| -> Result<f64> {
        spec.distance(&rows[i], &rows[j])
            .map_err(|e| Error::PairFailure {
                i,
                j,
                source: Box::new(e),
            })
    };
    let flat: Vec<f64> = match mode {
        Parallelism::Sequential => pairs.iter().map(kernel).collect::<Result<_>>()?,
        Parallelism::Rayon => pairs.par_iter().map(kernel).collect::<Result<_>>()?,
    };
    let mut values = Array2::zeros((n, n));
    for (&(i, j), &d) in pairs.iter().zip(&flat) {
        values[[i, j]] = d;
        values[[j, i]] = d;
    }
    DistanceMatrix::new(spec.clone(), values)
}
