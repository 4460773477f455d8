//! "SRM-mini": a reduced spatial-rich-model feature extractor for
//! grayscale images.
//!
//! The pipeline is the classic residual → quantize/truncate →
//! co-occurrence → symmetrize architecture, cut down to three residual
//! types so desk-scale training stays fast:
//!
//! * `R1` — first-order differences, horizontal and vertical maps;
//! * `R2` — second-order differences, horizontal and vertical maps;
//! * `S3` — the 3×3 "square" residual
//!   `X[i−1,j] + X[i+1,j] + X[i,j−1] + X[i,j+1] − 4·X[i,j]`.
//!
//! Each residual is quantized with `d = clamp(round(r/q), −2, 2)`
//! (round half away from zero) for q ∈ {1, 2}, and fourth-order
//! co-occurrences of consecutive quantized values are accumulated along
//! both scan directions of every map. Counts are folded under the
//! symmetry group {identity, negation, reversal, negation∘reversal} —
//! 625 raw bins collapse into 169 orbit classes — and each block is
//! normalized to sum 1. Six blocks (3 residuals × 2 quantizers) of 169
//! give the fixed 1014-dim feature vector.
//!
//! This is a deliberately reduced subset of the full spatial rich
//! model, not a drop-in equivalent.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::imaging::{Channels, PixelImage};

/// Quantized residual values live in −2..=2, so an order-4 tuple has
/// 5^4 raw bins.
const TUPLE_BINS: usize = 625;
/// Orbit count of the symmetry group over the 625 tuples:
/// (625 + 1 + 25 + 25) / 4 by Burnside, verified by enumeration below.
const ORBITS: usize = 169;
/// 3 residual types × 2 quantizers × 169 orbit classes.
pub const SRM_MINI_DIM: usize = 6 * ORBITS;

/// A fixed-width feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// An integer residual map with its dimensions.
struct ResidualMap {
    rows: usize,
    cols: usize,
    values: Vec<i32>,
}

/// Bin index of a quantized tuple: base-5 digits of `d + 2`,
/// first element most significant.
fn encode(t: [i8; 4]) -> usize {
    t.iter()
        .fold(0usize, |acc, &d| acc * 5 + (d + 2) as usize)
}

fn decode(mut idx: usize) -> [i8; 4] {
    let mut t = [0i8; 4];
    for k in (0..4).rev() {
        t[k] = (idx % 5) as i8 - 2;
        idx /= 5;
    }
    t
}

/// Smallest encoded index in the tuple's symmetry orbit.
fn orbit_canonical(idx: usize) -> usize {
    let t = decode(idx);
    let neg = |t: [i8; 4]| [-t[0], -t[1], -t[2], -t[3]];
    let rev = |t: [i8; 4]| [t[3], t[2], t[1], t[0]];
    [t, neg(t), rev(t), neg(rev(t))]
        .into_iter()
        .map(encode)
        .min()
        .unwrap()
}

/// Maps every raw bin to its slot in the 169-wide folded block.
fn fold_table() -> &'static ([u16; TUPLE_BINS], usize) {
    static TABLE: OnceLock<([u16; TUPLE_BINS], usize)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let canon: Vec<usize> = (0..TUPLE_BINS).map(orbit_canonical).collect();
        let mut slots: Vec<usize> = canon.clone();
        slots.sort_unstable();
        slots.dedup();
        let mut table = [0u16; TUPLE_BINS];
        for (bin, &c) in canon.iter().enumerate() {
            table[bin] = slots.binary_search(&c).unwrap() as u16;
        }
        (table, slots.len())
    })
}

/// Round half away from zero of `r / q`, clamped to −2..=2.
fn quantize(r: i32, q: i32) -> i8 {
    let a = r.unsigned_abs() as i32;
    let v = (2 * a + q) / (2 * q);
    (if r < 0 { -v } else { v }).clamp(-2, 2) as i8
}

fn residual_maps(img: &PixelImage) -> [Vec<ResidualMap>; 3] {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let x = |i: usize, j: usize| img.samples()[i * w + j] as i32;

    let r1h = ResidualMap {
        rows: h,
        cols: w - 1,
        values: (0..h)
            .flat_map(|i| (0..w - 1).map(move |j| (i, j)))
            .map(|(i, j)| x(i, j + 1) - x(i, j))
            .collect(),
    };
    let r1v = ResidualMap {
        rows: h - 1,
        cols: w,
        values: (0..h - 1)
            .flat_map(|i| (0..w).map(move |j| (i, j)))
            .map(|(i, j)| x(i + 1, j) - x(i, j))
            .collect(),
    };
    let r2h = ResidualMap {
        rows: h,
        cols: w - 2,
        values: (0..h)
            .flat_map(|i| (0..w - 2).map(move |j| (i, j)))
            .map(|(i, j)| x(i, j) - 2 * x(i, j + 1) + x(i, j + 2))
            .collect(),
    };
    let r2v = ResidualMap {
        rows: h - 2,
        cols: w,
        values: (0..h - 2)
            .flat_map(|i| (0..w).map(move |j| (i, j)))
            .map(|(i, j)| x(i, j) - 2 * x(i + 1, j) + x(i + 2, j))
            .collect(),
    };
    let s3 = ResidualMap {
        rows: h - 2,
        cols: w - 2,
        values: (1..h - 1)
            .flat_map(|i| (1..w - 1).map(move |j| (i, j)))
            .map(|(i, j)| x(i - 1, j) + x(i + 1, j) + x(i, j - 1) + x(i, j + 1) - 4 * x(i, j))
            .collect(),
    };
    [vec![r1h, r1v], vec![r2h, r2v], vec![s3]]
}

/// Accumulates order-4 co-occurrences of `map`'s quantized values along
/// both scan directions into `hist`.
fn accumulate(map: &ResidualMap, q: i32, hist: &mut [u64; TUPLE_BINS]) {
    let quant: Vec<i8> = map.values.iter().map(|&r| quantize(r, q)).collect();
    let at = |i: usize, j: usize| quant[i * map.cols + j];
    // Horizontal scan.
    if map.cols >= 4 {
        for i in 0..map.rows {
            for j in 0..map.cols - 3 {
                hist[encode([at(i, j), at(i, j + 1), at(i, j + 2), at(i, j + 3)])] += 1;
            }
        }
    }
    // Vertical scan.
    if map.rows >= 4 {
        for j in 0..map.cols {
            for i in 0..map.rows - 3 {
                hist[encode([at(i, j), at(i + 1, j), at(i + 2, j), at(i + 3, j)])] += 1;
            }
        }
    }
}

/// Extracts the 1014-dim SRM-mini feature vector from a grayscale
/// image of at least 3×3. Blocks with no co-occurrence support (which
/// requires roughly a 6×6 image) are left all-zero instead of
/// normalized.
pub fn srm_mini(img: &PixelImage) -> Result<FeatureVector> {
    if img.channels() != Channels::Gray {
        return Err(Error::Argument(format!(
            "feature extraction needs a grayscale image, got {:?}",
            img.channels()
        )));
    }
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::Argument(format!(
            "feature extraction needs at least 3x3, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let (table, n_slots) = fold_table();
    debug_assert_eq!(*n_slots, ORBITS);

    let mut values = Vec::with_capacity(SRM_MINI_DIM);
    for maps in residual_maps(img) {
        for q in [1, 2] {
            let mut hist = [0u64; TUPLE_BINS];
            for map in &maps {
                accumulate(map, q, &mut hist);
            }
            let mut block = [0f64; ORBITS];
            for (bin, &count) in hist.iter().enumerate() {
                block[table[bin] as usize] += count as f64;
            }
            let total: f64 = block.iter().sum();
            if total > 0.0 {
                for v in &mut block {
                    *v /= total;
                }
            }
            values.extend_from_slice(&block);
        }
    }
    Ok(FeatureVector { values })
}

/// Writes feature rows as CSV with header `id,label,f0..f1013`.
pub fn write_features_csv(
    path: impl AsRef<std::path::Path>,
    rows: &[(String, u8, FeatureVector)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let dim = rows.first().map_or(SRM_MINI_DIM, |(_, _, f)| f.dim());
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (id, label, f) in rows {
        if f.dim() != dim {
            return Err(Error::Argument(format!(
                "feature row '{id}' has dim {}, expected {dim}",
                f.dim()
            )));
        }
        let mut rec = vec![id.clone(), label.to_string()];
        rec.extend(f.values.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature CSV written by [`write_features_csv`].
pub fn read_features_csv(
    path: impl AsRef<std::path::Path>,
) -> Result<Vec<(String, u8, FeatureVector)>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::Argument("feature CSV row too short".into()));
        }
        let id = rec[0].to_string();
        let label: u8 = rec[1]
            .parse()
            .map_err(|_| Error::Argument(format!("bad label {:?}", &rec[1])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Argument(format!("bad feature value {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push((id, label, FeatureVector { values }));
    }
    Ok(out)
}
