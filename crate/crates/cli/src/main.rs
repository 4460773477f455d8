//! Command-line workbench over the library crate: embedding,
//! extraction, signature detection, dataset generation, feature
//! extraction, classifier training and the evaluation experiments.
//!
//! Conventions shared by every subcommand: the first stdout line is the
//! resolved configuration as JSON (seeds included), further stdout is
//! machine-readable JSON, human-oriented logs go to stderr, and the
//! exit code is 0 on success, 1 for usage errors, 2 for data errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use stegbench::datagen::{generate_dataset, synth_covers, DatasetManifest, GenConfig, Role, SynthSpec};
use stegbench::embedders::{capacity_bits, embed, extract_bits};
use stegbench::ensemble::{load_model, predict, save_model, train, TrainParams};
use stegbench::evaluate::{analysis_plane, run_rate_grid, run_source_mismatch, SplitSpec};
use stegbench::features::{read_features_csv, srm_mini, write_features_csv, FeatureVector};
use stegbench::imaging::{load_png_file, save_png_file};
use stegbench::payload::{build_payload, parse_payload, AppId, SignatureTable};
use stegbench::sigdetect::{detect_with_options, scan_all, DetectOptions, DetectionResult};

#[derive(Parser)]
#[command(
    name = "stegbench",
    version,
    about = "Mobile-app LSB steganography: embedding, detection and steganalysis"
)]
struct Cli {
    /// Cap on worker threads (default: all available cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Signature override file with `app.field = "value"` lines.
    #[arg(long, global = true, value_name = "FILE")]
    sig_config: Option<PathBuf>,
    /// Seed for training and evaluation randomness. Generation commands
    /// take their seed from their config/spec file instead.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hide a message file in a cover image.
    Embed(EmbedArgs),
    /// Recover the message from a stego image.
    Extract(ExtractArgs),
    /// Run signature detectors over an image or a directory of images.
    Detect(DetectArgs),
    /// Generate a cover/stego dataset from a config file.
    GenDataset(GenDatasetArgs),
    /// Write synthetic cover images from a spec file.
    SynthCovers(SynthArgs),
    /// Extract steganalysis features for manifest records into a CSV.
    Features(FeaturesArgs),
    /// Train the detector ensemble on a feature CSV.
    Train(TrainArgs),
    /// Classify feature rows with a trained model.
    Predict(PredictArgs),
    /// Run the rate-grid or source-mismatch experiment.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    app: AppId,
    /// Cover image (PNG).
    #[arg(long = "in", value_name = "PNG")]
    input: PathBuf,
    /// File whose bytes become the message.
    #[arg(long, value_name = "FILE")]
    msg_file: PathBuf,
    #[arg(long, default_value = "")]
    password: String,
    /// Where to write the stego image.
    #[arg(long, value_name = "PNG")]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    app: AppId,
    /// Stego image (PNG).
    #[arg(long = "in", value_name = "PNG")]
    input: PathBuf,
    #[arg(long, default_value = "")]
    password: String,
    /// Write the recovered message bytes here instead of inlining them
    /// (base64) in the stdout JSON.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = ArgGroup::new("which").required(true).args(["app", "all"]))]
struct DetectArgs {
    /// Detector to run.
    #[arg(long)]
    app: Option<AppId>,
    /// Run every signature detector.
    #[arg(long)]
    all: bool,
    /// PNG file, or a directory whose `*.png` files are scanned.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Write one JSON line per image here; stdout then only carries the
    /// summary.
    #[arg(long, value_name = "JSONL")]
    report: Option<PathBuf>,
    /// PocketStego: accept only printable-ASCII candidate messages.
    #[arg(long)]
    printable_only: bool,
}

#[derive(Args)]
struct GenDatasetArgs {
    /// Generation config (JSON, the `GenConfig` schema).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis spec (JSON, the `SynthSpec` schema).
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Directory the PNGs are written into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Dataset manifest (JSONL).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Output CSV.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Keep only this app's records.
    #[arg(long)]
    app: Option<AppId>,
    /// Keep only stegos at these target rates (covers always stay).
    #[arg(long, value_delimiter = ',', value_name = "R,R,…")]
    rates: Option<Vec<f64>>,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature CSV with labels (0 = cover, 1 = stego).
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    /// Where the model JSON is written.
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Fix the number of base learners (odd; default: grown until the
    /// out-of-bag error stops improving).
    #[arg(long, value_name = "L")]
    learners: Option<usize>,
    /// Fix the random-subspace width (default: searched by OOB error).
    #[arg(long, value_name = "D")]
    d_sub: Option<usize>,
    /// Fix the scatter regularization (default: scale-derived).
    #[arg(long, value_name = "X")]
    lambda: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model JSON.
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Feature CSV to classify.
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    /// Write `id,predicted` CSV here; stdout then only carries the
    /// summary.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = ArgGroup::new("mode").required(true).args(["grid", "mismatch"]))]
struct EvaluateArgs {
    /// Train-rate × test-rate error grid over one manifest.
    #[arg(long)]
    grid: bool,
    /// Leave-one-source-out study over several manifests.
    #[arg(long)]
    mismatch: bool,
    #[arg(long)]
    app: AppId,
    /// Dataset manifest (grid mode).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_name = "R,R,…")]
    train_rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_name = "R,R,…")]
    test_rates: Option<Vec<f64>>,
    /// Cover/stego pairs trained on (grid mode).
    #[arg(long, value_name = "N")]
    n_train: Option<usize>,
    /// Pairs held out for testing (grid mode).
    #[arg(long, value_name = "N")]
    n_test: Option<usize>,
    /// Repetitions with re-drawn splits; reports are averaged.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Source class as NAME=MANIFEST, repeatable (mismatch mode).
    #[arg(long = "source", value_name = "NAME=FILE")]
    sources: Vec<String>,
    /// Embedding rate under test (mismatch mode).
    #[arg(long)]
    rate: Option<f64>,
    /// Also write the JSON report here.
    #[arg(long, value_name = "JSON")]
    out: Option<PathBuf>,
    /// Also write the grid as a CSV table (grid mode).
    #[arg(long, value_name = "CSV")]
    csv: Option<PathBuf>,
}

/// Usage problems exit 1, everything else that fails exits 2.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Settings shared by every subcommand, echoed in the config line.
struct Ctx {
    sigs: SignatureTable,
    threads: usize,
    sig_config: Option<PathBuf>,
    seed: u64,
}

impl Ctx {
    /// Prints the resolved-configuration line: always the first stdout
    /// output of a run.
    fn announce(&self, command: &str, params: serde_json::Value) {
        let line = json!({
            "command": command,
            "threads": self.threads,
            "sig_config": self.sig_config,
            "seed": self.seed,
            "params": params,
        });
        println!("{line}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let sigs = match &cli.sig_config {
        Some(path) => SignatureTable::from_config_file(path)
            .with_context(|| format!("loading signature config {}", path.display()))?,
        None => SignatureTable::default(),
    };
    let ctx = Ctx {
        sigs,
        threads: cli
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        sig_config: cli.sig_config.clone(),
        seed: cli.seed,
    };

    match &cli.command {
        Command::Embed(a) => cmd_embed(&ctx, a).map_err(Into::into),
        Command::Extract(a) => cmd_extract(&ctx, a).map_err(Into::into),
        Command::Detect(a) => cmd_detect(&ctx, a).map_err(Into::into),
        Command::GenDataset(a) => cmd_gen_dataset(&ctx, a).map_err(Into::into),
        Command::SynthCovers(a) => cmd_synth_covers(&ctx, a).map_err(Into::into),
        Command::Features(a) => cmd_features(&ctx, a).map_err(Into::into),
        Command::Train(a) => cmd_train(&ctx, a).map_err(Into::into),
        Command::Predict(a) => cmd_predict(&ctx, a).map_err(Into::into),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
    }
}

fn cmd_embed(ctx: &Ctx, a: &EmbedArgs) -> anyhow::Result<()> {
    ctx.announce(
        "embed",
        json!({
            "app": a.app.name(),
            "in": a.input,
            "msg_file": a.msg_file,
            "password_bytes": a.password.len(),
            "out": a.out,
        }),
    );
    let cover = load_png_file(&a.input)
        .with_context(|| format!("loading cover {}", a.input.display()))?;
    let message =
        fs::read(&a.msg_file).with_context(|| format!("reading {}", a.msg_file.display()))?;
    let payload = build_payload(a.app, &message, a.password.as_bytes(), &ctx.sigs)?;
    let result = embed(a.app, &cover, &payload, a.password.as_bytes())?;
    save_png_file(&result.stego, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let capacity = capacity_bits(a.app, &cover)?;
    println!(
        "{}",
        json!({
            "out": a.out,
            "message_bytes": message.len(),
            "payload_bits": payload.len_bits(),
            "capacity_bits": capacity,
            "achieved_rate": payload.len_bits() as f64 / capacity as f64,
            "change_rate": result.change_rate,
        })
    );
    Ok(())
}

/// How many payload bits to pull out of an image for extraction.
///
/// StegMaster needs care: pixels past the payload hold arbitrary cover
/// values whose digit triples may not decode, so the detector first
/// locates the closing signature and extraction stops there. The other
/// apps decode plain bits (or length-prefix their containers), so the
/// whole carrier is read and the parser finds the payload inside it.
fn extraction_bits(
    app: AppId,
    img: &stegbench::imaging::PixelImage,
    sigs: &SignatureTable,
) -> anyhow::Result<u64> {
    let capacity = capacity_bits(app, img)?;
    if app != AppId::StegMaster {
        return Ok(capacity);
    }
    let det = detect_with_options(app, img, sigs, &DetectOptions::default())?;
    match (det.verdict, det.matched_at_bit) {
        (true, Some(at)) => Ok(at + 8 * sigs.close2.len() as u64),
        _ => bail!("no {} payload found in the image", app.name()),
    }
}

fn cmd_extract(ctx: &Ctx, a: &ExtractArgs) -> anyhow::Result<()> {
    ctx.announce(
        "extract",
        json!({
            "app": a.app.name(),
            "in": a.input,
            "password_bytes": a.password.len(),
            "out": a.out,
        }),
    );
    let img = load_png_file(&a.input)
        .with_context(|| format!("loading {}", a.input.display()))?;
    let n_bits = extraction_bits(a.app, &img, &ctx.sigs)?;
    let bits = extract_bits(a.app, &img, n_bits, a.password.as_bytes())?;
    let message = parse_payload(a.app, &bits, a.password.as_bytes(), &ctx.sigs)?
        .ok_or_else(|| {
            anyhow!(
                "no {} payload recognized (clean image, other app, or wrong password)",
                a.app.name()
            )
        })?;
    let mut out = json!({ "message_bytes": message.len() });
    match &a.out {
        Some(path) => {
            fs::write(path, &message)
                .with_context(|| format!("writing {}", path.display()))?;
            out["out"] = json!(path);
        }
        None => {
            out["message_base64"] = json!(BASE64.encode(&message));
            if let Ok(text) = std::str::from_utf8(&message) {
                out["message_utf8"] = json!(text);
            }
        }
    }
    println!("{out}");
    Ok(())
}

fn detection_json(r: &DetectionResult) -> serde_json::Value {
    json!({
        "app": r.matched_app.name(),
        "verdict": r.verdict,
        "matched_at_bit": r.matched_at_bit,
        "message_base64": r.recovered_message.as_ref().map(|m| BASE64.encode(m)),
    })
}

fn cmd_detect(ctx: &Ctx, a: &DetectArgs) -> anyhow::Result<()> {
    ctx.announce(
        "detect",
        json!({
            "app": a.app.map(AppId::name),
            "all": a.all,
            "in": a.input,
            "report": a.report,
            "printable_only": a.printable_only,
        }),
    );
    let files: Vec<PathBuf> = if a.input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&a.input)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        v.sort();
        v
    } else {
        vec![a.input.clone()]
    };
    if files.is_empty() {
        bail!("no PNG files under {}", a.input.display());
    }
    let opts = DetectOptions {
        pocketstego_printable_only: a.printable_only,
    };
    let lines: Vec<(serde_json::Value, bool)> = files
        .par_iter()
        .map(|path| -> anyhow::Result<(serde_json::Value, bool)> {
            let img = load_png_file(path)
                .with_context(|| format!("loading {}", path.display()))?;
            let results = match a.app {
                Some(app) => vec![detect_with_options(app, &img, &ctx.sigs, &opts)?],
                None => scan_all(&img, &ctx.sigs),
            };
            let flagged = results.iter().any(|r| r.verdict);
            let line = json!({
                "path": path,
                "results": results.iter().map(detection_json).collect::<Vec<_>>(),
            });
            Ok((line, flagged))
        })
        .collect::<anyhow::Result<_>>()?;

    let flagged = lines.iter().filter(|(_, f)| *f).count();
    match &a.report {
        Some(path) => {
            let mut body = String::new();
            for (line, _) in &lines {
                body.push_str(&line.to_string());
                body.push('\n');
            }
            fs::write(path, body)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            for (line, _) in &lines {
                println!("{line}");
            }
        }
    }
    println!(
        "{}",
        json!({ "images": lines.len(), "flagged": flagged, "report": a.report })
    );
    Ok(())
}

fn cmd_gen_dataset(ctx: &Ctx, a: &GenDatasetArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))?;
    let cfg: GenConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", a.config.display()))?;
    ctx.announce("gen-dataset", serde_json::to_value(&cfg)?);
    let manifest = generate_dataset(&cfg, &ctx.sigs)?;
    let covers = manifest
        .records()
        .iter()
        .filter(|r| r.role == Role::Cover)
        .count();
    println!(
        "{}",
        json!({
            "manifest": cfg.output_dir.join("manifest.jsonl"),
            "records": manifest.records().len(),
            "covers": covers,
            "stegos": manifest.records().len() - covers,
        })
    );
    Ok(())
}

fn cmd_synth_covers(ctx: &Ctx, a: &SynthArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.spec)
        .with_context(|| format!("reading {}", a.spec.display()))?;
    let spec: SynthSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", a.spec.display()))?;
    ctx.announce(
        "synth-covers",
        json!({ "spec": serde_json::to_value(&spec)?, "out": a.out }),
    );
    fs::create_dir_all(&a.out)?;
    let images = synth_covers(&spec)?;
    for (i, img) in images.iter().enumerate() {
        save_png_file(img, a.out.join(format!("synth_{i:04}.png")))?;
    }
    println!("{}", json!({ "dir": a.out, "count": images.len() }));
    Ok(())
}

fn cmd_features(ctx: &Ctx, a: &FeaturesArgs) -> anyhow::Result<()> {
    ctx.announce(
        "features",
        json!({
            "manifest": a.manifest,
            "out": a.out,
            "app": a.app.map(AppId::name),
            "rates": a.rates,
        }),
    );
    let manifest = DatasetManifest::load(&a.manifest)?;
    let keep_rate = |r: Option<f64>| match (&a.rates, r) {
        (None, _) => true,
        (Some(list), Some(r)) => list.iter().any(|x| x.to_bits() == r.to_bits()),
        (Some(_), None) => false,
    };
    let selected: Vec<_> = manifest
        .records()
        .iter()
        .filter(|r| a.app.is_none_or(|app| r.app == app))
        .filter(|r| r.role == Role::Cover || keep_rate(r.target_rate))
        .collect();
    if selected.is_empty() {
        bail!("no manifest records match the filters");
    }
    let rows: Vec<(String, u8, FeatureVector)> = selected
        .par_iter()
        .map(|rec| -> anyhow::Result<(String, u8, FeatureVector)> {
            let img = load_png_file(manifest.resolve(rec))
                .with_context(|| format!("loading {}", rec.path))?;
            let features = srm_mini(&analysis_plane(rec.app, &img))?;
            let label = u8::from(rec.role == Role::Stego);
            Ok((rec.path.clone(), label, features))
        })
        .collect::<anyhow::Result<_>>()?;
    let dim = rows.first().map_or(0, |(_, _, f)| f.dim());
    write_features_csv(&a.out, &rows)?;
    println!(
        "{}",
        json!({ "out": a.out, "rows": rows.len(), "dim": dim })
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> anyhow::Result<()> {
    ctx.announce(
        "train",
        json!({
            "features": a.features,
            "model": a.model,
            "learners": a.learners,
            "d_sub": a.d_sub,
            "lambda": a.lambda,
        }),
    );
    let rows = read_features_csv(&a.features)?;
    if rows.is_empty() {
        bail!("feature CSV {} is empty", a.features.display());
    }
    let labels: Vec<u8> = rows.iter().map(|(_, l, _)| *l).collect();
    let data: Vec<Vec<f64>> = rows.into_iter().map(|(_, _, f)| f.values).collect();
    let params = TrainParams {
        l: a.learners,
        d_sub: a.d_sub,
        lambda: a.lambda,
        seed: ctx.seed,
    };
    let model = train(&data, &labels, &params)?;
    save_model(&model, &a.model)?;
    println!(
        "{}",
        json!({
            "model": a.model,
            "learners": model.learners.len(),
            "d_sub": model.d_sub,
            "oob_error": model.oob_error,
        })
    );
    Ok(())
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> anyhow::Result<()> {
    ctx.announce(
        "predict",
        json!({ "model": a.model, "features": a.features, "out": a.out }),
    );
    let model = load_model(&a.model)?;
    let rows = read_features_csv(&a.features)?;
    if rows.is_empty() {
        bail!("feature CSV {} is empty", a.features.display());
    }
    let data: Vec<Vec<f64>> = rows.iter().map(|(_, _, f)| f.values.clone()).collect();
    let pred = predict(&model, &data)?;
    let flagged = pred.iter().filter(|&&p| p == 1).count();
    match &a.out {
        Some(path) => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["id", "predicted"])?;
            for ((id, _, _), p) in rows.iter().zip(&pred) {
                w.write_record([id.as_str(), &p.to_string()])?;
            }
            w.flush()?;
        }
        None => {
            for ((id, _, _), p) in rows.iter().zip(&pred) {
                println!("{}", json!({ "id": id, "predicted": p }));
            }
        }
    }
    println!(
        "{}",
        json!({ "rows": pred.len(), "flagged": flagged, "out": a.out })
    );
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<(), Failure> {
    if a.grid {
        let manifest = a
            .manifest
            .as_ref()
            .ok_or_else(|| usage("--grid needs --manifest"))?;
        let train_rates = a
            .train_rates
            .as_ref()
            .ok_or_else(|| usage("--grid needs --train-rates"))?;
        let test_rates = a
            .test_rates
            .as_ref()
            .ok_or_else(|| usage("--grid needs --test-rates"))?;
        let n_train = a.n_train.ok_or_else(|| usage("--grid needs --n-train"))?;
        let n_test = a.n_test.ok_or_else(|| usage("--grid needs --n-test"))?;
        ctx.announce(
            "evaluate",
            json!({
                "mode": "grid",
                "app": a.app.name(),
                "manifest": manifest,
                "train_rates": train_rates,
                "test_rates": test_rates,
                "n_train": n_train,
                "n_test": n_test,
                "reps": a.reps,
                "out": a.out,
                "csv": a.csv,
            }),
        );
        let run = || -> anyhow::Result<()> {
            let manifest = DatasetManifest::load(manifest)?;
            let split = SplitSpec {
                n_train_pairs: n_train,
                n_test_pairs: n_test,
                seed: ctx.seed,
                reps: a.reps,
            };
            let grid = run_rate_grid(&manifest, a.app, train_rates, test_rates, split)?;
            let doc = json!({ "mode": "grid", "app": a.app.name(), "grid": grid });
            if let Some(path) = &a.out {
                fs::write(path, serde_json::to_string_pretty(&doc)?)?;
            }
            if let Some(path) = &a.csv {
                fs::write(path, grid.to_csv_string())?;
            }
            println!("{doc}");
            Ok(())
        };
        run().map_err(Into::into)
    } else {
        if a.sources.len() < 2 {
            return Err(usage("--mismatch needs at least two --source NAME=FILE entries"));
        }
        let rate = a.rate.ok_or_else(|| usage("--mismatch needs --rate"))?;
        let mut classes: Vec<(String, PathBuf)> = Vec::new();
        for s in &a.sources {
            let (name, path) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("--source {s:?} is not NAME=FILE")))?;
            classes.push((name.to_string(), PathBuf::from(path)));
        }
        ctx.announce(
            "evaluate",
            json!({
                "mode": "mismatch",
                "app": a.app.name(),
                "sources": classes.iter().map(|(n, p)| json!({"name": n, "manifest": p})).collect::<Vec<_>>(),
                "rate": rate,
                "out": a.out,
            }),
        );
        let run = || -> anyhow::Result<()> {
            let mut loaded = Vec::new();
            for (name, path) in &classes {
                loaded.push((name.clone(), DatasetManifest::load(path)?));
            }
            let reports = run_source_mismatch(&loaded, a.app, rate, ctx.seed)?;
            let doc = json!({
                "mode": "mismatch",
                "app": a.app.name(),
                "rate": rate,
                "reports": reports
                    .iter()
                    .map(|(name, rep)| json!({ "source": name, "report": rep }))
                    .collect::<Vec<_>>(),
            });
            if let Some(path) = &a.out {
                fs::write(path, serde_json::to_string_pretty(&doc)?)?;
            }
            println!("{doc}");
            Ok(())
        };
        run().map_err(Into::into)
    }
}
