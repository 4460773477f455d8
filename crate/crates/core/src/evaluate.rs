//! Detection-error metrics and the two experiment runners: a
//! train-rate × test-rate error grid and a leave-one-source-out
//! mismatch study.
//!
//! Both runners work from generation manifests, split strictly at the
//! pair level — a cover and the stegos derived from it always land on
//! the same side, and train/test source ids never overlap — and reduce
//! each evaluation to a balanced [`ErrorReport`].

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{mix_seed, DatasetManifest, ManifestRecord, Role};
use crate::embedders::Prng;
use crate::ensemble::{predict, train, TrainParams};
use crate::error::{Error, Result};
use crate::features::srm_mini;
use crate::imaging::{load_png_file, to_grayscale, Channels, PixelImage};
use crate::payload::AppId;

/// Balanced detection-error summary of one evaluation.
///
/// `p_md` is the fraction of stegos missed, `p_fa` the fraction of
/// covers flagged, and `p_e` their mean — the usual equal-prior error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub p_md: f64,
    pub p_fa: f64,
    pub p_e: f64,
    pub n_cover: usize,
    pub n_stego: usize,
}

/// Computes the error report for binary labels (0 = cover, 1 = stego).
pub fn p_e(truth: &[u8], pred: &[u8]) -> Result<ErrorReport> {
    if truth.len() != pred.len() {
        return Err(Error::Argument(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.iter().chain(pred).any(|&l| l > 1) {
        return Err(Error::Argument("labels must be 0 or 1".into()));
    }
    let n_stego = truth.iter().filter(|&&t| t == 1).count();
    let n_cover = truth.len() - n_stego;
    if n_cover == 0 || n_stego == 0 {
        return Err(Error::Argument(
            "error rates need both classes present in the truth labels".into(),
        ));
    }
    let missed = truth
        .iter()
        .zip(pred)
        .filter(|&(&t, &p)| t == 1 && p == 0)
        .count();
    let alarms = truth
        .iter()
        .zip(pred)
        .filter(|&(&t, &p)| t == 0 && p == 1)
        .count();
    let p_md = missed as f64 / n_stego as f64;
    let p_fa = alarms as f64 / n_cover as f64;
    Ok(ErrorReport {
        p_md,
        p_fa,
        p_e: (p_md + p_fa) / 2.0,
        n_cover,
        n_stego,
    })
}

/// One cell of a rate grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub train_rate: f64,
    pub test_rate: f64,
    pub report: ErrorReport,
}

/// Errors of classifiers trained at one rate and tested at another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGrid {
    pub train_rates: Vec<f64>,
    pub test_rates: Vec<f64>,
    pub cells: Vec<RateCell>,
}

impl RateGrid {
    /// Looks a cell up by its exact rate pair.
    pub fn cell(&self, train_rate: f64, test_rate: f64) -> Option<&ErrorReport> {
        self.cells
            .iter()
            .find(|c| {
                c.train_rate.to_bits() == train_rate.to_bits()
                    && c.test_rate.to_bits() == test_rate.to_bits()
            })
            .map(|c| &c.report)
    }

    /// The grid as a CSV table: one row per training rate, one column
    /// per test rate, `p_e` in the cells.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("train_rate");
        for te in &self.test_rates {
            out.push_str(&format!(",test_{te}"));
        }
        out.push('\n');
        for &tr in &self.train_rates {
            out.push_str(&format!("{tr}"));
            for &te in &self.test_rates {
                match self.cell(tr, te) {
                    Some(rep) => out.push_str(&format!(",{}", rep.p_e)),
                    None => out.push_str(","),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// How a grid run divides sources between training and testing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Cover/stego pairs (i.e. sources) used for training.
    pub n_train_pairs: usize,
    /// Sources held out for testing; always disjoint from training.
    pub n_test_pairs: usize,
    pub seed: u64,
    /// Number of repetitions, each with a freshly drawn split; the
    /// reported rates are means over repetitions.
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_reps() -> usize {
    1
}

/// The single plane steganalysis features are computed on: the channel
/// the app embeds in. Blue-channel writers are analyzed on the blue
/// plane, the alpha writer on the alpha plane, and the multi-channel
/// writers on the luminance image; grayscale inputs pass through.
pub fn analysis_plane(app: AppId, img: &PixelImage) -> PixelImage {
    let plane = |c: usize| {
        let spp = img.channels().count();
        let samples: Vec<u8> = img.samples().iter().skip(c).step_by(spp).copied().collect();
        PixelImage::from_samples(img.width(), img.height(), Channels::Gray, samples)
            .expect("one sample per pixel")
    };
    match (app, img.channels()) {
        (_, Channels::Gray) => img.clone(),
        (AppId::DaVinci, Channels::Rgba) => plane(3),
        (AppId::PocketStego | AppId::StegM, _) => plane(2),
        _ => to_grayscale(img),
    }
}

/// Extracts features for every listed record in parallel, keyed by the
/// record's path.
fn features_for<'a>(
    manifest: &DatasetManifest,
    records: &[&'a ManifestRecord],
) -> Result<HashMap<&'a str, Vec<f64>>> {
    let rows: Vec<(&str, Vec<f64>)> = records
        .par_iter()
        .map(|rec| -> Result<(&str, Vec<f64>)> {
            let img = load_png_file(manifest.resolve(rec))?;
            let features = srm_mini(&analysis_plane(rec.app, &img))?;
            Ok((rec.path.as_str(), features.values))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().collect())
}

/// Per-source index of one app's records at a set of rates.
struct PairIndex<'a> {
    /// Source ids (sorted) whose cover and full rate coverage exist.
    sources: Vec<&'a str>,
    covers: HashMap<&'a str, &'a ManifestRecord>,
    stegos: HashMap<(&'a str, u64), &'a ManifestRecord>,
}

fn index_pairs<'a>(
    manifest: &'a DatasetManifest,
    app: AppId,
    rates: &[f64],
) -> Result<PairIndex<'a>> {
    let mut covers = HashMap::new();
    let mut stegos = HashMap::new();
    for rec in manifest.records() {
        if rec.app != app {
            continue;
        }
        match rec.role {
            Role::Cover => {
                covers.insert(rec.source_id.as_str(), rec);
            }
            Role::Stego => {
                if let Some(r) = rec.target_rate {
                    if rates.iter().any(|x| x.to_bits() == r.to_bits()) {
                        stegos.insert((rec.source_id.as_str(), r.to_bits()), rec);
                    }
                }
            }
        }
    }
    let mut sources: Vec<&str> = covers
        .keys()
        .copied()
        .filter(|s| rates.iter().all(|r| stegos.contains_key(&(*s, r.to_bits()))))
        .collect();
    sources.sort_unstable();
    Ok(PairIndex {
        sources,
        covers,
        stegos,
    })
}

fn grid_seed(base: u64, rep: usize, rate_bits: u64, tag: &[u8]) -> u64 {
    mix_seed(&[
        &base.to_be_bytes(),
        &(rep as u64).to_be_bytes(),
        &rate_bits.to_be_bytes(),
        tag,
    ])
}

/// Trains one classifier per training rate and scores it against every
/// test rate, over `split.reps` freshly drawn source-disjoint splits.
///
/// Pairs stay whole: a source contributes either its cover and all its
/// stegos to training, or all of them to testing. Features are
/// extracted once per file and shared across cells. Reported rates are
/// means over repetitions; counts are totals.
pub fn run_rate_grid(
    manifest: &DatasetManifest,
    app: AppId,
    train_rates: &[f64],
    test_rates: &[f64],
    split: SplitSpec,
) -> Result<RateGrid> {
    if train_rates.is_empty() || test_rates.is_empty() {
        return Err(Error::Argument("empty rate list for the grid".into()));
    }
    if split.n_train_pairs == 0 || split.n_test_pairs == 0 || split.reps == 0 {
        return Err(Error::Argument(
            "split needs nonzero train pairs, test pairs and repetitions".into(),
        ));
    }
    let mut all_rates: Vec<f64> = train_rates.iter().chain(test_rates).copied().collect();
    all_rates.sort_by(f64::total_cmp);
    all_rates.dedup_by(|a, b| a.to_bits() == b.to_bits());

    let index = index_pairs(manifest, app, &all_rates)?;
    let needed = split.n_train_pairs + split.n_test_pairs;
    if index.sources.len() < needed {
        let mut counts: Vec<String> = Vec::new();
        for &r in &all_rates {
            let n = index.stegos.keys().filter(|(_, rb)| *rb == r.to_bits()).count();
            counts.push(format!("rate {r}: {n} stegos"));
        }
        return Err(Error::InsufficientData(format!(
            "{app}: {} sources carry a cover and every requested rate, but the split \
             needs {needed} ({})",
            index.sources.len(),
            counts.join(", ")
        )));
    }

    // One feature pass over every file any repetition can touch.
    let mut involved: Vec<&ManifestRecord> = Vec::new();
    for &s in &index.sources {
        involved.push(index.covers[s]);
        for &r in &all_rates {
            involved.push(index.stegos[&(s, r.to_bits())]);
        }
    }
    let features = features_for(manifest, &involved)?;

    struct CellSums {
        md: f64,
        fa: f64,
        n_cover: usize,
        n_stego: usize,
    }
    let mut sums: HashMap<(u64, u64), CellSums> = HashMap::new();

    for rep in 0..split.reps {
        let mut order = index.sources.clone();
        let mut prng = Prng::from_seed(grid_seed(split.seed, rep, 0, b"split"));
        prng.shuffle(&mut order);
        let train_src = &order[..split.n_train_pairs];
        let test_src = &order[split.n_train_pairs..needed];
        debug_assert!(train_src
            .iter()
            .collect::<HashSet<_>>()
            .is_disjoint(&test_src.iter().collect()));

        for &tr in train_rates {
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * train_src.len());
            let mut labels: Vec<u8> = Vec::with_capacity(2 * train_src.len());
            for &s in train_src {
                rows.push(features[index.covers[s].path.as_str()].clone());
                labels.push(0);
                rows.push(features[index.stegos[&(s, tr.to_bits())].path.as_str()].clone());
                labels.push(1);
            }
            let params = TrainParams {
                l: None,
                d_sub: None,
                lambda: None,
                seed: grid_seed(split.seed, rep, tr.to_bits(), b"train"),
            };
            let model = train(&rows, &labels, &params)?;

            for &te in test_rates {
                let mut eval_rows: Vec<Vec<f64>> = Vec::with_capacity(2 * test_src.len());
                let mut truth: Vec<u8> = Vec::with_capacity(2 * test_src.len());
                for &s in test_src {
                    eval_rows.push(features[index.covers[s].path.as_str()].clone());
                    truth.push(0);
                    eval_rows
                        .push(features[index.stegos[&(s, te.to_bits())].path.as_str()].clone());
                    truth.push(1);
                }
                let pred = predict(&model, &eval_rows)?;
                let report = p_e(&truth, &pred)?;
                let cell = sums
                    .entry((tr.to_bits(), te.to_bits()))
                    .or_insert(CellSums {
                        md: 0.0,
                        fa: 0.0,
                        n_cover: 0,
                        n_stego: 0,
                    });
                cell.md += report.p_md;
                cell.fa += report.p_fa;
                cell.n_cover += report.n_cover;
                cell.n_stego += report.n_stego;
            }
        }
    }

    let reps = split.reps as f64;
    let mut cells = Vec::with_capacity(train_rates.len() * test_rates.len());
    for &tr in train_rates {
        for &te in test_rates {
            let s = &sums[&(tr.to_bits(), te.to_bits())];
            let (p_md, p_fa) = (s.md / reps, s.fa / reps);
            cells.push(RateCell {
                train_rate: tr,
                test_rate: te,
                report: ErrorReport {
                    p_md,
                    p_fa,
                    p_e: (p_md + p_fa) / 2.0,
                    n_cover: s.n_cover,
                    n_stego: s.n_stego,
                },
            });
        }
    }
    Ok(RateGrid {
        train_rates: train_rates.to_vec(),
        test_rates: test_rates.to_vec(),
        cells,
    })
}

/// Leave-one-source-out study at a fixed rate: for every named source
/// class, trains on all the others and reports the error on the one
/// held out. Results come back in input order.
pub fn run_source_mismatch(
    manifests_by_source: &[(String, DatasetManifest)],
    app: AppId,
    rate: f64,
    seed: u64,
) -> Result<Vec<(String, ErrorReport)>> {
    if manifests_by_source.len() < 2 {
        return Err(Error::Argument(format!(
            "source mismatch needs at least 2 source classes, got {}",
            manifests_by_source.len()
        )));
    }

    // Feature rows per source class, covers then stegos.
    struct ClassRows {
        x0: Vec<Vec<f64>>,
        x1: Vec<Vec<f64>>,
    }
    let mut classes: Vec<ClassRows> = Vec::with_capacity(manifests_by_source.len());
    for (name, manifest) in manifests_by_source {
        let index = index_pairs(manifest, app, &[rate])?;
        if index.sources.is_empty() {
            return Err(Error::InsufficientData(format!(
                "source class {name:?} has no complete cover/stego pair for {app} at \
                 rate {rate}"
            )));
        }
        let involved: Vec<&ManifestRecord> = index
            .sources
            .iter()
            .flat_map(|&s| [index.covers[s], index.stegos[&(s, rate.to_bits())]])
            .collect();
        let features = features_for(manifest, &involved)?;
        let mut rows = ClassRows {
            x0: Vec::new(),
            x1: Vec::new(),
        };
        for &s in &index.sources {
            rows.x0.push(features[index.covers[s].path.as_str()].clone());
            rows.x1
                .push(features[index.stegos[&(s, rate.to_bits())].path.as_str()].clone());
        }
        classes.push(rows);
    }

    let mut out = Vec::with_capacity(classes.len());
    for (held, (name, _)) in manifests_by_source.iter().enumerate() {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<u8> = Vec::new();
        for (i, class) in classes.iter().enumerate() {
            if i == held {
                continue;
            }
            for r in &class.x0 {
                rows.push(r.clone());
                labels.push(0);
            }
            for r in &class.x1 {
                rows.push(r.clone());
                labels.push(1);
            }
        }
        let params = TrainParams {
            l: None,
            d_sub: None,
            lambda: None,
            seed: grid_seed(seed, held, rate.to_bits(), b"mismatch"),
        };
        let model = train(&rows, &labels, &params)?;

        let held_class = &classes[held];
        let mut eval_rows: Vec<Vec<f64>> = Vec::new();
        let mut truth: Vec<u8> = Vec::new();
        for r in &held_class.x0 {
            eval_rows.push(r.clone());
            truth.push(0);
        }
        for r in &held_class.x1 {
            eval_rows.push(r.clone());
            truth.push(1);
        }
        let pred = predict(&model, &eval_rows)?;
        out.push((name.clone(), p_e(&truth, &pred)?));
    }
    Ok(out)
}
