//! Feature-space representations: mean, Haar wavelet (level- and
//! energy-thresholded), Fourier (energy-thresholded), PCA, plus the trivial
//! identity and per-record z-score representations.
//!
//! Energy thresholding is dataset-global: one set of coefficient positions is
//! kept for every record, so all feature vectors live in a common space. Ties
//! between equal-energy positions keep the lower index.
//!
//! For Haar, series whose length is not a power of two are zero-padded after
//! per-record mean removal; the removed mean is stored, scaled by sqrt(T), in
//! coefficient slot 0 (whose cascade value is identically zero for a centered,
//! padded series). The map from samples to coefficients stays an isometry, so
//! Parseval holds, and slot 0 doubles as the approximation: at full retention
//! p equals the padded length.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_sample, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Mean,
    HaarLevel,
    HaarEnergy,
    FourierEnergy,
    Pca,
    Identity,
    Zscore,
}

/// Haar thresholding mode: keep everything down to a fixed level, or the
/// smallest global position set reaching an energy fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HaarMode {
    Level(usize),
    Energy(f64),
}

/// A dataset's feature matrix under one transform, with enough provenance to
/// reconstruct (when the transform keeps a basis).
#[derive(Debug, Clone)]
pub struct Representation {
    pub kind: RepresentationKind,
    /// N x p feature matrix.
    pub features: Array2<f64>,
    /// Transform parameters (level, energy fraction, component count, ...).
    pub params: BTreeMap<String, f64>,
    /// Kept coefficient positions; meaning is transform-specific
    /// (Haar: coefficient slots, Fourier: frequency indices, PCA: component
    /// ranks).
    pub kept_positions: Vec<usize>,
    /// p x T basis rows for reconstruction (Haar/Fourier atoms, PCA
    /// directions); absent for mean/identity/zscore.
    basis: Option<Array2<f64>>,
    /// Column means added back by PCA reconstruction.
    col_means: Option<Array1<f64>>,
}

impl Representation {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn basis(&self) -> Option<&Array2<f64>> {
        self.basis.as_ref()
    }

    /// Writes `record,f0,...,f{p-1}` rows with 17-significant-digit values.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        write!(w, "record")?;
        for j in 0..self.p() {
            write!(w, ",f{j}")?;
        }
        writeln!(w)?;
        for (i, row) in self.features.outer_iter().enumerate() {
            write!(w, "{i}")?;
            for v in row.iter() {
                write!(w, ",{}", fmt_sample(*v))?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar with kind, params and kept positions.
    pub fn write_sidecar<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            kind: RepresentationKind,
            params: &'a BTreeMap<String, f64>,
            kept_positions: &'a [usize],
            p: usize,
            n: usize,
        }
        let sidecar = Sidecar {
            kind: self.kind,
            params: &self.params,
            kept_positions: &self.kept_positions,
            p: self.p(),
            n: self.n(),
        };
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer_pretty(&mut w, &sidecar)
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Reads a feature matrix written by [`Representation::write_csv`].
pub fn read_features_csv<P: AsRef<Path>>(path: P) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .skip(1)
            .enumerate()
            .map(|(col, raw)| {
                raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.as_ref().display().to_string(),
                    row: lineno + 1,
                    column: col + 2,
                    what: "feature value",
                    value: raw.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let p = rows.first().map(Vec::len).unwrap_or(0);
    let mut m = Array2::zeros((n, p));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(Error::RaggedRow {
                path: path.as_ref().display().to_string(),
                row: i + 2,
                expected: p,
                found: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

/// One feature per record: its sample mean.
pub fn transform_mean(ds: &Dataset) -> Representation {
    let features =
        Array2::from_shape_fn((ds.n(), 1), |(i, _)| ds.records()[i].mean());
    Representation {
        kind: RepresentationKind::Mean,
        features,
        params: BTreeMap::new(),
        kept_positions: vec![0],
        basis: None,
        col_means: None,
    }
}

/// Raw series as features (p = T).
pub fn transform_identity(ds: &Dataset) -> Representation {
    Representation {
        kind: RepresentationKind::Identity,
        features: ds.values_matrix(),
        params: BTreeMap::new(),
        kept_positions: (0..ds.t()).collect(),
        basis: None,
        col_means: None,
    }
}

/// Per-record standardized series as features (population convention).
pub fn transform_zscore(ds: &Dataset) -> Result<Representation> {
    let z = ds.zscore()?;
    Ok(Representation {
        kind: RepresentationKind::Zscore,
        features: z.values_matrix(),
        params: BTreeMap::new(),
        kept_positions: (0..ds.t()).collect(),
        basis: None,
        col_means: None,
    })
}

fn log2_exact(n: usize) -> usize {
    n.trailing_zeros() as usize
}

/// In-place orthonormal Haar cascade. Output layout: slot 0 holds the final
/// approximation, slots 2^{j-1}..2^j the details at depth j (coarse to fine).
fn haar_forward(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut buf = vec![0.0; n];
    let mut len = n;
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let a = x[2 * i];
            let b = x[2 * i + 1];
            buf[i] = (a + b) * inv_sqrt2;
            buf[half + i] = (a - b) * inv_sqrt2;
        }
        x[..len].copy_from_slice(&buf[..len]);
        len = half;
    }
}

/// Inverse of [`haar_forward`].
fn haar_inverse(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut buf = vec![0.0; n];
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for i in 0..half {
            let a = x[i];
            let d = x[half + i];
            buf[2 * i] = (a + d) * inv_sqrt2;
            buf[2 * i + 1] = (a - d) * inv_sqrt2;
        }
        x[..len].copy_from_slice(&buf[..len]);
        len *= 2;
    }
}

/// Discrete Haar representation. See the module docs for the padding and
/// mean-slot conventions. `Level(L)` keeps slots 0..2^L (approximation plus
/// details down to level L); `Energy(alpha)` keeps the smallest global slot
/// set whose summed squared coefficients reach the fraction `alpha`.
pub fn transform_haar(ds: &Dataset, mode: HaarMode) -> Result<Representation> {
    let t = ds.t();
    let tpad = t.next_power_of_two();
    let j_max = log2_exact(tpad);
    match mode {
        HaarMode::Level(level) if level > j_max => {
            return Err(Error::InvalidParam {
                name: "level",
                reason: format!("level {level} exceeds max {j_max} for T={t}"),
            });
        }
        HaarMode::Energy(alpha) if !(alpha > 0.0 && alpha <= 1.0) => {
            return Err(Error::InvalidParam {
                name: "energy",
                reason: format!("energy fraction must be in (0, 1], got {alpha}"),
            });
        }
        _ => {}
    }

    let sqrt_t = (t as f64).sqrt();
    let coeff_rows: Vec<Vec<f64>> = ds
        .records()
        .par_iter()
        .map(|rec| {
            let mean = rec.mean();
            let mut padded = vec![0.0; tpad];
            for (dst, &v) in padded.iter_mut().zip(&rec.values) {
                *dst = v - mean;
            }
            haar_forward(&mut padded);
            padded[0] = sqrt_t * mean;
            padded
        })
        .collect();

    let (kept, achieved, mut params) = match mode {
        HaarMode::Level(level) => {
            let kept: Vec<usize> = (0..(1usize << level)).collect();
            let mut params = BTreeMap::new();
            params.insert("level".to_string(), level as f64);
            (kept, 1.0, params)
        }
        HaarMode::Energy(alpha) => {
            let (kept, achieved) = select_by_energy(&coeff_rows, tpad, alpha);
            let mut params = BTreeMap::new();
            params.insert("energy".to_string(), alpha);
            (kept, achieved, params)
        }
    };
    params.insert("achieved_energy".to_string(), achieved);
    params.insert("padded_length".to_string(), tpad as f64);

    let features = gather_columns(&coeff_rows, &kept);

    // Basis atom per kept slot: slot 0 restores the mean; other slots are
    // inverse-transformed unit coefficients truncated to T samples.
    let mut basis = Array2::zeros((kept.len(), t));
    for (row, &pos) in kept.iter().enumerate() {
        if pos == 0 {
            let v = 1.0 / sqrt_t;
            basis.row_mut(row).fill(v);
        } else {
            let mut unit = vec![0.0; tpad];
            unit[pos] = 1.0;
            haar_inverse(&mut unit);
            for (col, &v) in unit.iter().take(t).enumerate() {
                basis[[row, col]] = v;
            }
        }
    }

    Ok(Representation {
        kind: match mode {
            HaarMode::Level(_) => RepresentationKind::HaarLevel,
            HaarMode::Energy(_) => RepresentationKind::HaarEnergy,
        },
        features,
        params,
        kept_positions: kept,
        basis: Some(basis),
        col_means: None,
    })
}

/// Real DFT representation with global energy thresholding over frequency
/// positions 0..=T/2. DC and (for even T) Nyquist contribute one coordinate,
/// every other kept frequency a cosine/sine pair.
pub fn transform_fourier(ds: &Dataset, alpha: f64) -> Result<Representation> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParam {
            name: "energy",
            reason: format!("energy fraction must be in (0, 1], got {alpha}"),
        });
    }
    let t = ds.t();
    let n_freqs = t / 2 + 1;
    let sqrt_t = (t as f64).sqrt();
    let sqrt_2t = (2.0 / t as f64).sqrt();

    let fft = FftPlanner::new().plan_fft_forward(t);
    // Per record and frequency: (a, b) pair; b unused for DC/Nyquist.
    let spectra: Vec<Vec<(f64, f64)>> = ds
        .records()
        .par_iter()
        .map(|rec| {
            let mut buf: Vec<Complex<f64>> =
                rec.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            (0..n_freqs)
                .map(|f| {
                    if f == 0 || (t % 2 == 0 && f == t / 2) {
                        (buf[f].re / sqrt_t, 0.0)
                    } else {
                        (sqrt_2t * buf[f].re, -sqrt_2t * buf[f].im)
                    }
                })
                .collect()
        })
        .collect();

    let energies: Vec<f64> = (0..n_freqs)
        .map(|f| {
            spectra
                .iter()
                .map(|row| row[f].0 * row[f].0 + row[f].1 * row[f].1)
                .sum()
        })
        .collect();
    let (mut kept, achieved) = greedy_energy_selection(&energies, alpha);
    kept.sort_unstable();

    let coord_count = |f: usize| -> usize {
        if f == 0 || (t % 2 == 0 && f == t / 2) {
            1
        } else {
            2
        }
    };
    let p: usize = kept.iter().map(|&f| coord_count(f)).sum();
    let mut features = Array2::zeros((ds.n(), p));
    for (i, row) in spectra.iter().enumerate() {
        let mut col = 0;
        for &f in &kept {
            features[[i, col]] = row[f].0;
            col += 1;
            if coord_count(f) == 2 {
                features[[i, col]] = row[f].1;
                col += 1;
            }
        }
    }

    let mut basis = Array2::zeros((p, t));
    let mut row = 0;
    for &f in &kept {
        let w = std::f64::consts::TAU * f as f64 / t as f64;
        if f == 0 {
            basis.row_mut(row).fill(1.0 / sqrt_t);
            row += 1;
        } else if t % 2 == 0 && f == t / 2 {
            for col in 0..t {
                basis[[row, col]] = if col % 2 == 0 { 1.0 } else { -1.0 } / sqrt_t;
            }
            row += 1;
        } else {
            for col in 0..t {
                basis[[row, col]] = sqrt_2t * (w * col as f64).cos();
                basis[[row + 1, col]] = sqrt_2t * (w * col as f64).sin();
            }
            row += 2;
        }
    }

    let mut params = BTreeMap::new();
    params.insert("energy".to_string(), alpha);
    params.insert("achieved_energy".to_string(), achieved);
    params.insert("kept_frequencies".to_string(), kept.len() as f64);
    Ok(Representation {
        kind: RepresentationKind::FourierEnergy,
        features,
        params,
        kept_positions: kept,
        basis: Some(basis),
        col_means: None,
    })
}

/// PCA keeping the smallest number of components whose cumulative explained
/// variance ratio reaches `alpha`. Computed from the N x N Gram matrix when
/// N <= T, otherwise from the T x T scatter matrix. Eigenvalues use the
/// population convention (scatter / N).
pub fn transform_pca(ds: &Dataset, alpha: f64) -> Result<Representation> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParam {
            name: "energy",
            reason: format!("variance fraction must be in (0, 1], got {alpha}"),
        });
    }
    let n = ds.n();
    let t = ds.t();
    let x = ds.values_matrix();
    let col_means: Array1<f64> = (0..t)
        .map(|j| x.column(j).sum() / n as f64)
        .collect();
    let mut xc = x;
    for mut row in xc.outer_iter_mut() {
        row -= &col_means;
    }

    // Eigenvalues of scatter / N and unit score directions u (N-vectors) or
    // principal directions v (T-vectors), depending on the route.
    let (eigvals, scores_full, dirs_full) = if n <= t {
        let mut gram = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let dot = xc.row(i).dot(&xc.row(j));
                gram[(i, j)] = dot;
                gram[(j, i)] = dot;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut eigvals = Vec::with_capacity(n);
        let mut scores = Array2::zeros((n, n));
        let mut dirs: Vec<Option<Array1<f64>>> = vec![None; n];
        for (rank, &idx) in order.iter().enumerate() {
            let s2 = eig.eigenvalues[idx].max(0.0);
            eigvals.push(s2 / n as f64);
            let s = s2.sqrt();
            let u: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)]).collect();
            for i in 0..n {
                scores[[i, rank]] = s * u[i];
            }
            if s > 0.0 {
                // v = Xc^T u / s
                let mut v = Array1::zeros(t);
                for (i, &ui) in u.iter().enumerate() {
                    v.scaled_add(ui, &xc.row(i));
                }
                dirs[rank] = Some(v / s);
            }
        }
        (eigvals, scores, dirs)
    } else {
        let mut scatter = nalgebra::DMatrix::zeros(t, t);
        for a in 0..t {
            for b in 0..=a {
                let dot = xc.column(a).dot(&xc.column(b));
                scatter[(a, b)] = dot;
                scatter[(b, a)] = dot;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(scatter);
        let mut order: Vec<usize> = (0..t).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut eigvals = Vec::with_capacity(t);
        let mut scores = Array2::zeros((n, t));
        let mut dirs: Vec<Option<Array1<f64>>> = vec![None; t];
        for (rank, &idx) in order.iter().enumerate() {
            eigvals.push(eig.eigenvalues[idx].max(0.0) / n as f64);
            let v: Array1<f64> = (0..t).map(|j| eig.eigenvectors[(j, idx)]).collect();
            let s = xc.dot(&v);
            for i in 0..n {
                scores[[i, rank]] = s[i];
            }
            dirs[rank] = Some(v);
        }
        (eigvals, scores, dirs)
    };

    let total: f64 = eigvals.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateData(
            "zero total variance: all records identical".into(),
        ));
    }
    let mut p = eigvals.len();
    let mut cum = 0.0;
    for (i, &l) in eigvals.iter().enumerate() {
        cum += l;
        if cum >= alpha * total {
            p = i + 1;
            break;
        }
    }

    let mut features = Array2::zeros((n, p));
    let mut basis = Array2::zeros((p, t));
    for rank in 0..p {
        let dir = dirs_full[rank]
            .as_ref()
            .ok_or_else(|| Error::DegenerateData("component with zero variance kept".into()))?;
        // Sign convention: the largest-magnitude entry of each direction
        // (lowest index on ties) is non-negative.
        let mut pivot = 0;
        for (j, v) in dir.iter().enumerate() {
            if v.abs() > dir[pivot].abs() {
                pivot = j;
            }
        }
        let flip = if dir[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..t {
            basis[[p_row(rank), j]] = flip * dir[j];
        }
        for i in 0..n {
            features[[i, rank]] = flip * scores_full[[i, rank]];
        }
    }

    let explained: f64 = eigvals.iter().take(p).sum::<f64>() / total;
    let mut params = BTreeMap::new();
    params.insert("energy".to_string(), alpha);
    params.insert("achieved_energy".to_string(), explained);
    params.insert("components".to_string(), p as f64);
    params.insert("total_variance".to_string(), total);
    params.insert(
        "dropped_variance".to_string(),
        eigvals.iter().skip(p).sum::<f64>(),
    );
    Ok(Representation {
        kind: RepresentationKind::Pca,
        features,
        params,
        kept_positions: (0..p).collect(),
        basis: Some(basis),
        col_means: Some(col_means),
    })
}

// Basis rows are indexed by component rank.
fn p_row(rank: usize) -> usize {
    rank
}

/// Inverse transform from kept coefficients; PCA adds back column means.
/// Errors when the representation carries no basis (mean/identity/zscore).
pub fn reconstruct(rep: &Representation) -> Result<Array2<f64>> {
    let basis = rep.basis.as_ref().ok_or(Error::BasisAbsent)?;
    let mut out = rep.features.dot(basis);
    if let Some(col_means) = &rep.col_means {
        for mut row in out.outer_iter_mut() {
            row += col_means;
        }
    }
    Ok(out)
}

/// Greedy position selection: order by (energy desc, index asc), add until
/// the retained fraction reaches `alpha`. An all-zero energy vector keeps
/// only position 0.
fn greedy_energy_selection(energies: &[f64], alpha: f64) -> (Vec<usize>, f64) {
    let total: f64 = energies.iter().sum();
    if total <= 0.0 {
        return (vec![0], 1.0);
    }
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| {
        energies[b]
            .partial_cmp(&energies[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut kept = Vec::new();
    let mut cum = 0.0;
    for &pos in &order {
        kept.push(pos);
        cum += energies[pos];
        if cum >= alpha * total {
            break;
        }
    }
    (kept, cum / total)
}

fn select_by_energy(coeff_rows: &[Vec<f64>], width: usize, alpha: f64) -> (Vec<usize>, f64) {
    let energies: Vec<f64> = (0..width)
        .map(|pos| coeff_rows.iter().map(|row| row[pos] * row[pos]).sum())
        .collect();
    let (mut kept, achieved) = greedy_energy_selection(&energies, alpha);
    kept.sort_unstable();
    (kept, achieved)
}

fn gather_columns(rows: &[Vec<f64>], cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), cols.len()));
    for (i, row) in rows.iter().enumerate() {
        for (k, &c) in cols.iter().enumerate() {
            out[[i, k]] = row[c];
        }
    }
    out
}
