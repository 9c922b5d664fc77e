//! Top-k persistence landscapes over a fixed binning grid.
//!
//! Each diagram point `(b, d)` becomes the triangle function
//! `t -> max(0, y - |t - x|)` with `x = (b + d) / 2`, `y = (d - b) / 2`.
//! At each of `q` equispaced bin points the k largest triangle values are
//! kept (zero-padded when fewer points exist), laid out layer-major:
//! landscape 1 over all bins, then landscape 2, and so on.
//!
//! The bin range is fixed globally (default `[0, 1]`) rather than derived
//! per image, so feature vectors are comparable across a dataset.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::cubical::build_complex;
use crate::imageio::GrayImage;
use crate::persistence::{compute_diagram, PersistencePoint};

const FEATURE_MAGIC: &[u8; 4] = b"TPLF";
const FEATURE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LandscapeError {
    #[error("invalid landscape parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format {
        path: std::path::PathBuf,
        detail: String,
    },
}

/// Landscape depth `k`, bin count `q` and the bin range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeParams {
    k: usize,
    q: usize,
    t_min: f64,
    t_max: f64,
}

impl LandscapeParams {
    pub fn new(k: usize, q: usize, t_min: f64, t_max: f64) -> Result<Self, LandscapeError> {
        if k < 1 {
            return Err(LandscapeError::InvalidParams("k must be >= 1".into()));
        }
        if q < 2 {
            return Err(LandscapeError::InvalidParams("q must be >= 2".into()));
        }
        if t_min.is_nan() || t_max.is_nan() || t_min >= t_max {
            return Err(LandscapeError::InvalidParams(format!(
                "t_min {t_min} must be < t_max {t_max}"
            )));
        }
        Ok(LandscapeParams { k, q, t_min, t_max })
    }

    /// `k` landscapes, `q` bins over the full filtration range `[0, 1]`.
    pub fn over_unit_range(k: usize, q: usize) -> Result<Self, LandscapeError> {
        LandscapeParams::new(k, q, 0.0, 1.0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Output vector length per homology dimension (never zero).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.k * self.q
    }

    /// Position of bin `n`, for `n` in `[0, q)`; both endpoints included.
    pub fn bin(&self, n: usize) -> f64 {
        self.t_min + n as f64 * (self.t_max - self.t_min) / (self.q - 1) as f64
    }
}

/// Landscape vectors for both homology dimensions, each of length `k * q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeFeature {
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
}

/// The triangle value of one diagram point at position `t`.
pub fn triangle_transform(point: &PersistencePoint, t: f64) -> f64 {
    triangle(point.birth, point.death, t)
}

fn triangle(birth: f64, death: f64, t: f64) -> f64 {
    let x = (birth + death) / 2.0;
    let y = (death - birth) / 2.0;
    (y - (t - x).abs()).max(0.0)
}

/// Piecewise partials of the triangle value with respect to (birth, death).
/// At kinks (apex and support endpoints) the subgradient is the mean of the
/// one-sided limits.
fn triangle_grad(birth: f64, death: f64, t: f64) -> (f64, f64) {
    let x = (birth + death) / 2.0;
    let y = (death - birth) / 2.0;
    let v = y - (t - x).abs();
    if v > 0.0 {
        if t > x {
            (0.0, 1.0) // value is d - t
        } else if t < x {
            (-1.0, 0.0) // value is t - b
        } else {
            (-0.5, 0.5) // apex
        }
    } else if v == 0.0 && y > 0.0 {
        if t > x {
            (0.0, 0.5) // t at the death endpoint
        } else if t < x {
            (-0.5, 0.0) // t at the birth endpoint
        } else {
            (0.0, 0.0) // degenerate, unreachable for y > 0
        }
    } else {
        (0.0, 0.0)
    }
}

/// Per-bin descending values with the indices of the points that produced
/// them. Only strictly positive values are listed; zero padding carries no
/// point index.
fn ranked_bins(points: &[PersistencePoint], params: &LandscapeParams) -> Vec<Vec<(f64, usize)>> {
    let mut bins: Vec<Vec<(f64, usize)>> = vec![Vec::new(); params.q];
    for (idx, p) in points.iter().enumerate() {
        for (n, bin) in bins.iter_mut().enumerate() {
            let v = triangle_transform(p, params.bin(n));
            if v > 0.0 {
                bin.push((v, idx));
            }
        }
    }
    for bin in &mut bins {
        // descending value, ties by ascending point index
        bin.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        bin.truncate(params.k);
    }
    bins
}

/// The top-k landscape vector of a point multiset, layer-major
/// (`out[l * q + n]` is landscape `l + 1` at bin `n`). An empty multiset
/// gives the zero vector.
pub fn landscape(points: &[PersistencePoint], params: &LandscapeParams) -> Vec<f64> {
    let bins = ranked_bins(points, params);
    let mut out = vec![0.0; params.len()];
    for (n, bin) in bins.iter().enumerate() {
        for (l, &(v, _)) in bin.iter().enumerate() {
            out[l * params.q + n] = v;
        }
    }
    out
}

/// Backpropagates an upstream gradient (length `k * q`, layer-major)
/// through the landscape, returning `(d/d birth, d/d death)` per point.
/// Gradient flows to the point selected at each occupied (layer, bin)
/// slot; zero-padded slots contribute nothing. Ties in the top-k selection
/// are broken by ascending point index, and kinks take the mean of
/// one-sided limits, so the result matches central finite differences
/// wherever the landscape is differentiable.
pub fn landscape_gradient(
    points: &[PersistencePoint],
    params: &LandscapeParams,
    upstream: &[f64],
) -> Vec<(f64, f64)> {
    assert_eq!(upstream.len(), params.len(), "upstream length mismatch");
    let bins = ranked_bins(points, params);
    let mut grads = vec![(0.0, 0.0); points.len()];
    for (n, bin) in bins.iter().enumerate() {
        let t = params.bin(n);
        for (l, &(_, idx)) in bin.iter().enumerate() {
            let u = upstream[l * params.q + n];
            let p = &points[idx];
            let (db, dd) = triangle_grad(p.birth, p.death, t);
            grads[idx].0 += u * db;
            grads[idx].1 += u * dd;
        }
    }
    grads
}

/// Full image-to-feature pipeline: cubical complex, persistence diagram,
/// one landscape vector per homology dimension.
pub fn featurize(image: &GrayImage, params: &LandscapeParams) -> LandscapeFeature {
    let diagram = compute_diagram(&build_complex(image));
    LandscapeFeature {
        v0: landscape(&diagram.d0, params),
        v1: landscape(&diagram.d1, params),
    }
}

/// Featurizes a batch, optionally in parallel. Output order always matches
/// input order, regardless of scheduling.
pub fn featurize_batch(
    images: &[GrayImage],
    params: &LandscapeParams,
    workers: usize,
) -> Vec<LandscapeFeature> {
    if workers <= 1 {
        return images.iter().map(|img| featurize(img, params)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool");
    pool.install(|| {
        images
            .par_iter()
            .map(|img| featurize(img, params))
            .collect()
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> LandscapeError + '_ {
    move |source| LandscapeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes features in the binary format: little-endian header
/// `{magic "TPLF", version, count, k, q, dims=2}` (u32 each after the
/// magic), then per image `2*k*q` f32 values (v0 then v1) and one u32
/// label.
pub fn write_features_bin(
    path: &Path,
    features: &[LandscapeFeature],
    labels: &[usize],
    params: &LandscapeParams,
) -> Result<(), LandscapeError> {
    assert_eq!(features.len(), labels.len(), "feature/label count mismatch");
    let mut out = Vec::with_capacity(24 + features.len() * (8 * params.len() + 4));
    out.extend_from_slice(FEATURE_MAGIC);
    for v in [
        FEATURE_VERSION,
        features.len() as u32,
        params.k as u32,
        params.q as u32,
        2u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (f, &label) in features.iter().zip(labels) {
        debug_assert_eq!(f.v0.len(), params.len());
        debug_assert_eq!(f.v1.len(), params.len());
        for v in f.v0.iter().chain(f.v1.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out.extend_from_slice(&(label as u32).to_le_bytes());
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Reads the binary feature format back; returns features, labels and the
/// `(k, q)` the file was written with.
#[allow(clippy::type_complexity)]
pub fn read_features_bin(
    path: &Path,
) -> Result<(Vec<LandscapeFeature>, Vec<usize>, usize, usize), LandscapeError> {
    let fmt_err = |detail: &str| LandscapeError::Format {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    if bytes.len() < 24 || &bytes[0..4] != FEATURE_MAGIC {
        return Err(fmt_err("not a TPLF feature file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(4) != FEATURE_VERSION {
        return Err(fmt_err("unsupported version"));
    }
    let count = u32_at(8) as usize;
    let k = u32_at(12) as usize;
    let q = u32_at(16) as usize;
    if u32_at(20) != 2 {
        return Err(fmt_err("expected 2 homology dimensions"));
    }
    let len = k * q;
    let record = 2 * len * 4 + 4;
    if bytes.len() != 24 + count * record {
        return Err(fmt_err("payload size does not match header"));
    }
    let mut features = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let base = 24 + i * record;
        let read_vec = |offset: usize| -> Vec<f64> {
            (0..len)
                .map(|j| {
                    let o = offset + j * 4;
                    f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64
                })
                .collect()
        };
        features.push(LandscapeFeature {
            v0: read_vec(base),
            v1: read_vec(base + len * 4),
        });
        labels.push(u32_at(base + 2 * len * 4) as usize);
    }
    Ok((features, labels, k, q))
}

/// CSV alternative: one row per image, `label,v0...,v1...`.
pub fn write_features_csv(
    path: &Path,
    features: &[LandscapeFeature],
    labels: &[usize],
) -> Result<(), LandscapeError> {
    assert_eq!(features.len(), labels.len(), "feature/label count mismatch");
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut line = String::new();
    for (f, &label) in features.iter().zip(labels) {
        line.clear();
        line.push_str(&label.to_string());
        for v in f.v0.iter().chain(f.v1.iter()) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io_err(path))?;
    }
    Ok(())
}
