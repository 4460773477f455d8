//! Acceptance gate: seven end-to-end criteria covering signature
//! detection, analytic false-positive behavior, embed/extract round
//! trips, rate control, the ML pipeline's structural properties,
//! feature correctness, and whole-pipeline determinism.
//!
//! Every criterion prints exactly one verdict line,
//! `[acceptance] criterion N (<name>): PASS — <measurements>` (or FAIL
//! with the first violated check, followed by a panic), so a log scrape
//! recovers the full scorecard. All tolerances are pinned here in code.
//!
//! The fixtures are shared via lazies; under the default single-threaded
//! test order criterion 1 pays for the signature datasets and criterion
//! 5 for the three 400-source evaluation datasets, and both include that
//! cost inside their runtime budgets.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::LazyLock;
use std::time::Instant;

use rayon::prelude::*;

use stegbench::datagen::{
    generate_dataset, make_cover, synth_covers, CoverSource, DatasetManifest, Dictionary,
    GenConfig, PasswordPolicy, Role, SynthSpec,
};
use stegbench::embedders::{capacity_bits, embed, extract_bits, Prng};
use stegbench::ensemble::{train, TrainParams};
use stegbench::evaluate::{analysis_plane, run_rate_grid, SplitSpec};
use stegbench::features::{srm_mini, SRM_MINI_DIM};
use stegbench::imaging::{load_png_file, Channels, PixelImage};
use stegbench::payload::{
    build_payload, message_len_for_target, parse_payload, payload_len_bits, xor_keystream, AppId,
    SignatureTable,
};
use stegbench::sigdetect::{detect, scan_all};

// ---------------------------------------------------------------- harness

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn criterion(n: u32, name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("[acceptance] criterion {n} ({name}): PASS — {detail}"),
        Err(why) => {
            println!("[acceptance] criterion {n} ({name}): FAIL — {why}");
            panic!("acceptance criterion {n} ({name}) failed: {why}");
        }
    }
}

fn sigs() -> &'static SignatureTable {
    static SIGS: LazyLock<SignatureTable> = LazyLock::new(SignatureTable::default);
    &SIGS
}

fn fix_dir() -> &'static Path {
    static DIR: LazyLock<tempfile::TempDir> =
        LazyLock::new(|| tempfile::tempdir().expect("temp dir"));
    DIR.path()
}

// ------------------------------------------------------- shared datasets

/// Mixed-rate signature-detection corpus: five 40-source smooth datasets
/// (one per rate), each embedding with all five apps — 200 covers per
/// app and 200 stegos per app overall, rates {2,5,10,15,20}% mixed.
const SIG_RATES: [f64; 5] = [0.02, 0.05, 0.10, 0.15, 0.20];

static SIG_DS: LazyLock<Vec<(f64, DatasetManifest)>> = LazyLock::new(|| {
    SIG_RATES
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let cfg = GenConfig {
                source: CoverSource::Synthetic(SynthSpec {
                    count: 40,
                    width: 128,
                    height: 128,
                    noise_sigma: 0.0,
                    smoothing_radius: 4,
                    seed: 9000 + i as u64,
                }),
                apps: AppId::ALL.to_vec(),
                rates: vec![rate],
                dictionary: Dictionary::Builtin,
                password_policy: PasswordPolicy::PerImageRandom { length: 10 },
                master_seed: 7100 + i as u64,
                output_dir: fix_dir().join(format!("sig_{i}")),
            };
            let manifest = generate_dataset(&cfg, sigs()).expect("sig dataset");
            (rate, manifest)
        })
        .collect()
});

fn big_cfg(dir: &str, spec: SynthSpec, rates: &[f64], master_seed: u64) -> GenConfig {
    GenConfig {
        source: CoverSource::Synthetic(spec),
        apps: vec![AppId::StegM],
        rates: rates.to_vec(),
        dictionary: Dictionary::Builtin,
        password_policy: PasswordPolicy::PerImageRandom { length: 10 },
        master_seed,
        output_dir: fix_dir().join(dir),
    }
}

fn smooth_spec(passes: u32) -> SynthSpec {
    SynthSpec {
        count: 400,
        width: 256,
        height: 256,
        noise_sigma: 0.0,
        smoothing_radius: passes,
        seed: 1001,
    }
}

/// 5a dataset: smooth class in its *hard* regime (2 blur passes leave
/// first differences around ±8, partially outside the quantizer window),
/// where a 2% payload is genuinely difficult. Calibration at these exact
/// seeds: matched-rate p_e = 0.4325 @ 2% and 0.0025 @ 20%.
static DS_A: LazyLock<DatasetManifest> = LazyLock::new(|| {
    generate_dataset(&big_cfg("eval_a", smooth_spec(2), &[0.02, 0.20], 4242), sigs())
        .expect("dataset A")
});

/// 5b/5c/5d dataset: smooth class in its *separable* regime (4 passes),
/// where matched-rate detection is near-perfect at every rate and the
/// train-high/test-low collapse is maximal. Calibration at these seeds:
/// diagonal p_e = 0 at 5/10/20%, cell(train 20%, test 5%) = 0.5.
static DS_B: LazyLock<DatasetManifest> = LazyLock::new(|| {
    generate_dataset(
        &big_cfg("eval_b", smooth_spec(4), &[0.05, 0.10, 0.20], 4242),
        sigs(),
    )
    .expect("dataset B")
});

/// 5c dataset: the noisy source class (σ=8, no blur) — near-max-entropy
/// covers on which the reduced features saturate, so detection hovers
/// near chance. Calibration: p_e ≈ 0.51 at 10%.
static DS_C: LazyLock<DatasetManifest> = LazyLock::new(|| {
    let spec = SynthSpec {
        count: 400,
        width: 256,
        height: 256,
        noise_sigma: 8.0,
        smoothing_radius: 0,
        seed: 2002,
    };
    generate_dataset(&big_cfg("eval_c", spec, &[0.10], 5353), sigs()).expect("dataset C")
});

fn all_manifests() -> Vec<&'static DatasetManifest> {
    let mut v: Vec<&'static DatasetManifest> = SIG_DS.iter().map(|(_, m)| m).collect();
    v.push(&DS_A);
    v.push(&DS_B);
    v.push(&DS_C);
    v
}

// -------------------------------------------------------------- helpers

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stegbench"))
}

fn run_bin(args: &[&str]) -> Result<String, String> {
    let out = bin()
        .args(args)
        .output()
        .map_err(|e| format!("spawning the binary: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "binary {:?} exited with {:?}: {}",
            args,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn random_gray(w: u32, h: u32, seed: u64) -> PixelImage {
    let mut samples = vec![0u8; (w * h) as usize];
    Prng::from_seed(seed).xor_into(&mut samples);
    PixelImage::from_samples(w, h, Channels::Gray, samples).unwrap()
}

// ------------------------------------------------------------ criterion 1

#[test]
fn criterion_1_signature_detection() {
    criterion(1, "signature detection", || {
        let t0 = Instant::now();
        let datasets = &*SIG_DS;

        // (owning app if stego, file path) for every image in the corpus.
        let mut items: Vec<(Option<AppId>, PathBuf)> = Vec::new();
        for (_, manifest) in datasets {
            for rec in manifest.records() {
                let owner = (rec.role == Role::Stego).then_some(rec.app);
                items.push((owner, manifest.resolve(rec)));
            }
        }
        let detectable = [
            AppId::StegMaster,
            AppId::DaVinci,
            AppId::MobiStego,
            AppId::PocketStego,
        ];
        let scans: Vec<(Option<AppId>, BTreeMap<&'static str, bool>)> = items
            .par_iter()
            .map(|(owner, path)| {
                let img = load_png_file(path).expect("corpus image");
                let flags = scan_all(&img, sigs())
                    .into_iter()
                    .map(|r| (r.matched_app.name(), r.verdict))
                    .collect();
                (*owner, flags)
            })
            .collect();

        let mut detail = String::new();
        for det in detectable {
            let own: Vec<bool> = scans
                .iter()
                .filter(|(o, _)| *o == Some(det))
                .map(|(_, f)| f[det.name()])
                .collect();
            let other: Vec<bool> = scans
                .iter()
                .filter(|(o, _)| *o != Some(det))
                .map(|(_, f)| f[det.name()])
                .collect();
            let tp = own.iter().filter(|&&v| v).count();
            let fp = other.iter().filter(|&&v| v).count();
            check!(
                own.len() == 200,
                "{}: expected 200 own stegos, found {}",
                det.name(),
                own.len()
            );
            check!(
                tp == own.len(),
                "{}: {tp}/{} true positives, expected all",
                det.name(),
                own.len()
            );
            if det == AppId::PocketStego {
                let frac = fp as f64 / other.len() as f64;
                check!(
                    frac >= 0.95,
                    "pocketstego: false-positive fraction {frac:.4} < 0.95"
                );
                detail.push_str(&format!(
                    "pocketstego TP {tp}/200, FP {fp}/{} ({:.1}%); ",
                    other.len(),
                    100.0 * frac
                ));
            } else {
                check!(
                    fp == 0,
                    "{}: {fp} false positives on {} other images, expected 0",
                    det.name(),
                    other.len()
                );
                detail.push_str(&format!(
                    "{} TP {tp}/200, FP 0/{}; ",
                    det.name(),
                    other.len()
                ));
            }
        }

        // The same verdicts must come out of the installed binary.
        let stego_dir = datasets[0].1.root().join("pocketstego/stego_0.02");
        let report = fix_dir().join("detect_report.jsonl");
        run_bin(&[
            "detect",
            "--all",
            "--in",
            stego_dir.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ])?;
        let mut lines = 0;
        for line in fs::read_to_string(&report).map_err(|e| e.to_string())?.lines() {
            let doc: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let results = doc["results"].as_array().ok_or("report without results")?;
            for r in results {
                let app = r["app"].as_str().unwrap_or("?");
                let verdict = r["verdict"].as_bool().unwrap_or(false);
                check!(
                    verdict == (app == "pocketstego"),
                    "binary detect: unexpected verdict {verdict} for {app} on {}",
                    doc["path"]
                );
            }
            lines += 1;
        }
        check!(lines == 40, "binary detect report has {lines} lines, expected 40");

        let elapsed = t0.elapsed();
        check!(
            elapsed.as_secs_f64() < 120.0,
            "runtime {elapsed:?} exceeds the 2-minute budget"
        );
        Ok(format!("{detail}binary report consistent; {elapsed:.1?}"))
    });
}

// ------------------------------------------------------------ criterion 2

#[test]
fn criterion_2_pocketstego_analytic_fp() {
    criterion(2, "terminator-scan analytic false-positive rate", || {
        let t0 = Instant::now();
        let n = 500usize;
        let flagged: usize = (0..n)
            .into_par_iter()
            .filter(|&i| {
                let mut samples = vec![0u8; 256 * 256 * 3];
                Prng::from_seed(0xF00D + i as u64).xor_into(&mut samples);
                let img =
                    PixelImage::from_samples(256, 256, Channels::Rgb, samples).unwrap();
                detect(AppId::PocketStego, &img, sigs()).unwrap().verdict
            })
            .count();
        let frac = flagged as f64 / n as f64;
        // P(some byte of 8192 uniform bytes equals the terminator).
        let analytic = 1.0 - (255.0f64 / 256.0).powi(8192);
        check!(
            (frac - analytic).abs() <= 0.02,
            "flagged fraction {frac:.4} not within ±0.02 of analytic {analytic:.6}"
        );
        let elapsed = t0.elapsed();
        check!(
            elapsed.as_secs_f64() < 60.0,
            "runtime {elapsed:?} exceeds the 1-minute budget"
        );
        Ok(format!(
            "{flagged}/{n} flagged ({frac:.4}) vs analytic {analytic:.6}; {elapsed:.1?}"
        ))
    });
}

// ------------------------------------------------------------ criterion 3

/// Messages an app would truncate on re-parse (marker collisions) are
/// redrawn, mirroring the dataset generator's screen — the apps
/// themselves cannot carry such messages.
fn draw_message(app: AppId, len: usize, password: &[u8], rng: &mut Prng) -> Vec<u8> {
    'redraw: for _ in 0..16 {
        let msg: Vec<u8> = match app {
            AppId::PocketStego => (0..len)
                .map(|_| {
                    let c = 32 + rng.next_below(95) as u8; // printable ASCII
                    if c == b'#' {
                        b'$'
                    } else {
                        c
                    }
                })
                .collect(),
            _ => {
                let mut buf = vec![0u8; len];
                rng.xor_into(&mut buf);
                buf
            }
        };
        match app {
            AppId::StegMaster => {
                let close2 = &sigs().close2;
                if msg.windows(close2.len()).any(|w| w == &close2[..]) {
                    continue 'redraw;
                }
            }
            AppId::MobiStego => {
                let end = &sigs().end;
                let ct = xor_keystream(&msg, password).expect("keystream");
                if ct.windows(end.len()).any(|w| w == &end[..]) {
                    continue 'redraw;
                }
            }
            _ => {}
        }
        return msg;
    }
    panic!("could not draw an unambiguous {len}-byte message for {}", app.name());
}

#[test]
fn criterion_3_round_trip() {
    criterion(3, "embed/extract round trip", || {
        const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
        let mut cases = 0usize;
        for (ai, &app) in AppId::ALL.iter().enumerate() {
            for k in 0..100u64 {
                let mut rng = Prng::from_seed(0xC3 * (ai as u64 + 1) * 1_000_003 + k);
                let w = 40 + rng.next_below(33) as u32;
                let h = 40 + rng.next_below(33) as u32;
                let (sigma, passes) = match k % 3 {
                    0 => (0.0, 4),
                    1 => (4.0, 2),
                    _ => (8.0, 0),
                };
                let raw = synth_covers(&SynthSpec {
                    count: 1,
                    width: w,
                    height: h,
                    noise_sigma: sigma,
                    smoothing_radius: passes,
                    seed: rng.next_u64(),
                })
                .map_err(|e| e.to_string())?
                .pop()
                .unwrap();
                let cover = make_cover(app, &raw).map_err(|e| e.to_string())?;
                let capacity = capacity_bits(app, &cover).map_err(|e| e.to_string())?;

                let pwd_min =
                    usize::from(matches!(app, AppId::StegMaster | AppId::MobiStego | AppId::StegM));
                let pwd_len = pwd_min + rng.next_below(12) as usize;
                let password: Vec<u8> = (0..pwd_len)
                    .map(|_| ALNUM[rng.next_below(ALNUM.len() as u64) as usize])
                    .collect();

                let rate = 0.05 + 0.75 * (rng.next_below(1000) as f64 / 1000.0);
                let spec = message_len_for_target(app, capacity, rate, pwd_len as u64, sigs())
                    .or_else(|_| {
                        // Tiny cover + low rate can leave no room even for
                        // an empty message; retry near full capacity.
                        message_len_for_target(app, capacity, 0.9, pwd_len as u64, sigs())
                    })
                    .map_err(|e| e.to_string())?;

                let msg = draw_message(app, spec.message_bytes as usize, &password, &mut rng);
                let payload =
                    build_payload(app, &msg, &password, sigs()).map_err(|e| e.to_string())?;
                let stego = embed(app, &cover, &payload, &password)
                    .map_err(|e| e.to_string())?
                    .stego;
                let bits = extract_bits(app, &stego, payload.len_bits() as u64, &password)
                    .map_err(|e| e.to_string())?;
                let got = parse_payload(app, &bits, &password, sigs())
                    .map_err(|e| e.to_string())?;
                check!(
                    got.as_deref() == Some(&msg[..]),
                    "{} case {k}: {}x{} rate {rate:.3} msg {} bytes — extraction mismatch",
                    app.name(),
                    w,
                    h,
                    msg.len()
                );
                cases += 1;
            }
        }
        Ok(format!("{cases} random cases across 5 apps, 0 failures"))
    });
}

// ------------------------------------------------------------ criterion 4

#[test]
fn criterion_4_rate_control() {
    criterion(4, "embedding-rate control", || {
        let mut stegos = 0usize;
        let mut worst_slack_bits = 0.0f64;
        for manifest in all_manifests() {
            manifest.validate(sigs()).map_err(|e| e.to_string())?;
            let checks: Vec<Result<(usize, f64), String>> = manifest
                .records()
                .par_iter()
                .filter(|r| r.role == Role::Stego)
                .map(|rec| {
                    let target = rec.target_rate.ok_or("stego without target_rate")?;
                    let achieved = rec.achieved_rate.ok_or("stego without achieved_rate")?;
                    let img = load_png_file(manifest.resolve(rec))
                        .map_err(|e| format!("{}: {e}", rec.path))?;
                    let capacity = capacity_bits(rec.app, &img).map_err(|e| e.to_string())?;
                    let pwd = rec.password.as_deref().unwrap_or("");
                    let payload = payload_len_bits(
                        rec.app,
                        rec.message_bytes.ok_or("stego without message_bytes")?,
                        pwd.len() as u64,
                        sigs(),
                    );
                    if achieved > target {
                        return Err(format!(
                            "{}: achieved {achieved} above target {target}",
                            rec.path
                        ));
                    }
                    if achieved != payload as f64 / capacity as f64 {
                        return Err(format!("{}: achieved rate is not payload/capacity", rec.path));
                    }
                    let slack_bits = target * capacity as f64 - payload as f64;
                    if slack_bits >= 8.0 {
                        return Err(format!(
                            "{}: {slack_bits:.2} bits of slack — one more message byte fits",
                            rec.path
                        ));
                    }
                    Ok((1, slack_bits))
                })
                .collect();
            for c in checks {
                let (n, slack) = c?;
                stegos += n;
                worst_slack_bits = worst_slack_bits.max(slack);
            }
        }
        Ok(format!(
            "{stegos} stegos across {} manifests; achieved ≤ target everywhere; \
             worst undershoot {worst_slack_bits:.2} bits < 8",
            all_manifests().len()
        ))
    });
}

// ------------------------------------------------------------ criterion 5

#[test]
fn criterion_5_ml_pipeline() {
    criterion(5, "steganalysis pipeline structure", || {
        let t0 = Instant::now();
        let split = SplitSpec {
            n_train_pairs: 200,
            n_test_pairs: 200,
            seed: 42,
            reps: 1,
        };

        // 5a — detection error falls as the rate rises (hard regime).
        let grid_a = run_rate_grid(&DS_A, AppId::StegM, &[0.02, 0.20], &[0.02, 0.20], split)
            .map_err(|e| e.to_string())?;
        let pe_02 = grid_a.cell(0.02, 0.02).unwrap().p_e;
        let pe_20 = grid_a.cell(0.20, 0.20).unwrap().p_e;
        check!(
            pe_20 < pe_02 - 0.05,
            "5a: p_e(20%)={pe_20:.4} not below p_e(2%)={pe_02:.4} − 0.05"
        );
        check!(pe_20 < 0.30, "5a: p_e(20%)={pe_20:.4} ≥ 0.30");

        // 5b — matched-rate training dominates its row; training high
        // and testing low is the expensive direction (separable regime).
        let grid_b = run_rate_grid(&DS_B, AppId::StegM, &[0.05, 0.20], &[0.05, 0.20], split)
            .map_err(|e| e.to_string())?;
        let c55 = grid_b.cell(0.05, 0.05).unwrap().p_e;
        let c52 = grid_b.cell(0.05, 0.20).unwrap().p_e;
        let c25 = grid_b.cell(0.20, 0.05).unwrap().p_e;
        let c22 = grid_b.cell(0.20, 0.20).unwrap().p_e;
        check!(c55 <= c52, "5b: diagonal {c55:.4} above off-diagonal {c52:.4} in the 5% row");
        check!(c22 <= c25, "5b: diagonal {c22:.4} above off-diagonal {c25:.4} in the 20% row");
        check!(
            c25 - c55 > 0.05,
            "5b: train-20/test-5 ({c25:.4}) minus train-5/test-5 ({c55:.4}) ≤ 0.05"
        );

        // 5c — noisy covers are harder, averaged over 5 repetitions.
        let split5 = SplitSpec {
            n_train_pairs: 200,
            n_test_pairs: 200,
            seed: 7,
            reps: 5,
        };
        let smooth = run_rate_grid(&DS_B, AppId::StegM, &[0.10], &[0.10], split5)
            .map_err(|e| e.to_string())?
            .cell(0.10, 0.10)
            .unwrap()
            .p_e;
        let noisy = run_rate_grid(&DS_C, AppId::StegM, &[0.10], &[0.10], split5)
            .map_err(|e| e.to_string())?
            .cell(0.10, 0.10)
            .unwrap()
            .p_e;
        check!(
            noisy > smooth,
            "5c: noisy-source p_e {noisy:.4} not above smooth-source p_e {smooth:.4}"
        );

        // 5d — the null experiment: covers against covers with shuffled
        // labels must be unlearnable.
        let covers: Vec<Vec<f64>> = DS_B
            .records()
            .par_iter()
            .filter(|r| r.role == Role::Cover)
            .map(|rec| {
                let img = load_png_file(DS_B.resolve(rec)).expect("cover");
                srm_mini(&analysis_plane(rec.app, &img)).expect("features").values
            })
            .collect();
        let mut labels: Vec<u8> = (0..covers.len()).map(|i| (i % 2) as u8).collect();
        let mut rng = Prng::from_seed(0xACCE55);
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.next_below(i as u64 + 1) as usize);
        }
        let null = train(
            &covers,
            &labels,
            &TrainParams {
                l: None,
                d_sub: None,
                lambda: None,
                seed: 7,
            },
        )
        .map_err(|e| e.to_string())?;
        check!(
            (0.45..=0.55).contains(&null.oob_error),
            "5d: shuffled-label OOB error {:.4} outside [0.45, 0.55]",
            null.oob_error
        );

        let elapsed = t0.elapsed();
        check!(
            elapsed.as_secs_f64() < 900.0,
            "runtime {elapsed:?} exceeds the 15-minute budget"
        );
        Ok(format!(
            "5a p_e 2%={pe_02:.4} → 20%={pe_20:.4}; \
             5b grid [{c55:.4} {c52:.4}; {c25:.4} {c22:.4}]; \
             5c smooth={smooth:.4} < noisy={noisy:.4}; \
             5d null OOB={:.4}; {elapsed:.1?}",
            null.oob_error
        ))
    });
}

// ------------------------------------------------------------ criterion 6

/// Independent reference extractor: explicit residual loops, canonical
/// tuples via direct group enumeration, histograms in a sorted map.
/// Shares no code with the library implementation.
mod reference {
    use std::collections::BTreeMap;

    type Tuple = [i8; 4];

    fn canonical(t: Tuple) -> Tuple {
        let neg: Tuple = [-t[0], -t[1], -t[2], -t[3]];
        let rev: Tuple = [t[3], t[2], t[1], t[0]];
        let negrev: Tuple = [-t[3], -t[2], -t[1], -t[0]];
        *[t, neg, rev, negrev].iter().min().unwrap()
    }

    /// All canonical tuples in ascending order: the slot layout.
    fn slots() -> Vec<Tuple> {
        let mut set = std::collections::BTreeSet::new();
        for a in -2i8..=2 {
            for b in -2i8..=2 {
                for c in -2i8..=2 {
                    for d in -2i8..=2 {
                        set.insert(canonical([a, b, c, d]));
                    }
                }
            }
        }
        set.into_iter().collect()
    }

    fn quantize(r: i64, q: i64) -> i8 {
        let v = (2 * r.abs() + q) / (2 * q);
        (v.min(2) as i8) * if r < 0 { -1 } else { 1 }
    }

    pub fn features(w: usize, h: usize, px: &[u8]) -> Vec<f64> {
        let x = |i: usize, j: usize| px[i * w + j] as i64;
        // Residual maps per type: (rows, cols, value fn).
        let maps_r1: Vec<(usize, usize, Box<dyn Fn(usize, usize) -> i64>)> = vec![
            (h, w - 1, Box::new(move |i, j| x(i, j + 1) - x(i, j))),
            (h - 1, w, Box::new(move |i, j| x(i + 1, j) - x(i, j))),
        ];
        let maps_r2: Vec<(usize, usize, Box<dyn Fn(usize, usize) -> i64>)> = vec![
            (h, w - 2, Box::new(move |i, j| x(i, j) - 2 * x(i, j + 1) + x(i, j + 2))),
            (h - 2, w, Box::new(move |i, j| x(i, j) - 2 * x(i + 1, j) + x(i + 2, j))),
        ];
        let maps_s3: Vec<(usize, usize, Box<dyn Fn(usize, usize) -> i64>)> = vec![(
            h - 2,
            w - 2,
            Box::new(move |i, j| {
                x(i, j + 1) + x(i + 2, j + 1) + x(i + 1, j) + x(i + 1, j + 2)
                    - 4 * x(i + 1, j + 1)
            }),
        )];

        let layout = slots();
        let mut out = Vec::new();
        for maps in [&maps_r1, &maps_r2, &maps_s3] {
            for q in [1i64, 2] {
                let mut hist: BTreeMap<Tuple, u64> = BTreeMap::new();
                for (rows, cols, f) in maps.iter() {
                    let d: Vec<i8> = (0..rows * cols)
                        .map(|n| quantize(f(n / cols, n % cols), q))
                        .collect();
                    let at = |i: usize, j: usize| d[i * cols + j];
                    for i in 0..*rows {
                        for j in 0..cols.saturating_sub(3) {
                            let t = [at(i, j), at(i, j + 1), at(i, j + 2), at(i, j + 3)];
                            *hist.entry(canonical(t)).or_default() += 1;
                        }
                    }
                    for j in 0..*cols {
                        for i in 0..rows.saturating_sub(3) {
                            let t = [at(i, j), at(i + 1, j), at(i + 2, j), at(i + 3, j)];
                            *hist.entry(canonical(t)).or_default() += 1;
                        }
                    }
                }
                let total: u64 = hist.values().sum();
                for slot in &layout {
                    let count = hist.get(slot).copied().unwrap_or(0);
                    out.push(if total > 0 {
                        count as f64 / total as f64
                    } else {
                        0.0
                    });
                }
            }
        }
        out
    }
}

#[test]
fn criterion_6_feature_correctness() {
    criterion(6, "feature extractor correctness", || {
        // Dimension.
        let sample = srm_mini(&random_gray(24, 24, 5)).map_err(|e| e.to_string())?;
        check!(
            SRM_MINI_DIM == 1014 && sample.dim() == 1014,
            "feature dimension {} / constant {SRM_MINI_DIM}, expected 1014",
            sample.dim()
        );

        // Constant images: per 169-wide block exactly one nonzero entry,
        // equal to 1, independent of the constant.
        let constant = |v: u8| {
            let img =
                PixelImage::from_samples(20, 20, Channels::Gray, vec![v; 400]).unwrap();
            srm_mini(&img).unwrap()
        };
        let f0 = constant(0);
        for block in f0.values.chunks_exact(169) {
            let nonzero: Vec<f64> = block.iter().copied().filter(|&v| v != 0.0).collect();
            check!(
                nonzero == [1.0],
                "constant image: block nonzero pattern {nonzero:?}, expected [1.0]"
            );
        }
        check!(
            f0 == constant(128) && f0 == constant(255),
            "constant-image features depend on the constant"
        );

        // Sign symmetry: negating the image about 255 is invisible.
        for seed in 0..5u64 {
            let img = random_gray(17, 23, 40 + seed);
            let neg = PixelImage::from_samples(
                17,
                23,
                Channels::Gray,
                img.samples().iter().map(|&v| 255 - v).collect(),
            )
            .unwrap();
            check!(
                srm_mini(&img).unwrap() == srm_mini(&neg).unwrap(),
                "sign symmetry violated at seed {seed}"
            );
        }

        // Bin-for-bin agreement with the independent reference extractor.
        for seed in 0..20u64 {
            let img = random_gray(32, 32, 1000 + seed);
            let fast = srm_mini(&img).unwrap();
            let slow = reference::features(32, 32, img.samples());
            check!(slow.len() == fast.dim(), "reference dim {} mismatch", slow.len());
            for (k, (a, b)) in fast.values.iter().zip(&slow).enumerate() {
                check!(
                    (a - b).abs() < 1e-12,
                    "seed {seed} bin {k}: library {a} vs reference {b}"
                );
            }
        }
        Ok("dim 1014; constant & negation invariants exact; \
            20/20 random images match the reference bin-for-bin"
            .into())
    });
}

// ------------------------------------------------------------ criterion 7

fn tree_files(root: &Path) -> Vec<(String, PathBuf)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.push((rel, path));
            }
        }
    }
    out.sort();
    out
}

fn identical_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let fa = tree_files(a);
    let fb = tree_files(b);
    let names_a: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    let names_b: Vec<&String> = fb.iter().map(|(n, _)| n).collect();
    if names_a != names_b {
        return Err(format!("trees differ in file sets: {names_a:?} vs {names_b:?}"));
    }
    for ((name, pa), (_, pb)) in fa.iter().zip(&fb) {
        let ba = fs::read(pa).map_err(|e| e.to_string())?;
        let bb = fs::read(pb).map_err(|e| e.to_string())?;
        if ba != bb {
            return Err(format!("{name} differs between the two runs"));
        }
    }
    Ok(fa.len())
}

#[test]
fn criterion_7_determinism() {
    criterion(7, "generation and training determinism", || {
        let dir = fix_dir().join("det");
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;

        let cfg = |out: &Path| {
            serde_json::json!({
                "source": {"synthetic": {"count": 6, "width": 48, "height": 48,
                            "noise_sigma": 0.0, "smoothing_radius": 4, "seed": 31}},
                "apps": ["stegmaster", "stegm"],
                "rates": [0.1],
                "password_policy": {"per_image_random": {"length": 8}},
                "master_seed": 77,
                "output_dir": out,
            })
            .to_string()
        };
        let gen_a = dir.join("gen_a");
        let gen_b = dir.join("gen_b");
        for (cfg_path, out) in [(dir.join("a.json"), &gen_a), (dir.join("b.json"), &gen_b)] {
            fs::write(&cfg_path, cfg(out)).map_err(|e| e.to_string())?;
            run_bin(&["gen-dataset", "--config", cfg_path.to_str().unwrap()])?;
        }
        let n_files = identical_trees(&gen_a, &gen_b)?;

        // Feature extraction and training re-runs must be byte-identical.
        let manifest = gen_a.join("manifest.jsonl");
        let f1 = dir.join("f1.csv");
        let f2 = dir.join("f2.csv");
        for f in [&f1, &f2] {
            run_bin(&[
                "features",
                "--manifest",
                manifest.to_str().unwrap(),
                "--out",
                f.to_str().unwrap(),
                "--app",
                "stegm",
            ])?;
        }
        let csv_1 = fs::read(&f1).map_err(|e| e.to_string())?;
        check!(
            csv_1 == fs::read(&f2).map_err(|e| e.to_string())?,
            "feature CSVs differ between identical runs"
        );

        let m1 = dir.join("m1.json");
        let m2 = dir.join("m2.json");
        for m in [&m1, &m2] {
            run_bin(&[
                "--seed",
                "5",
                "train",
                "--features",
                f1.to_str().unwrap(),
                "--model",
                m.to_str().unwrap(),
            ])?;
        }
        let model_1 = fs::read(&m1).map_err(|e| e.to_string())?;
        check!(
            model_1 == fs::read(&m2).map_err(|e| e.to_string())?,
            "model files differ between identical --seed runs"
        );
        Ok(format!(
            "gen-dataset trees identical ({n_files} files); feature CSV ({} bytes) and \
             model JSON ({} bytes) byte-identical across re-runs",
            csv_1.len(),
            model_1.len()
        ))
    });
}
