//! Batch cover/stego dataset generation with manifest bookkeeping, plus
//! synthetic cover synthesis standing in for camera captures.
//!
//! A generation run turns a pool of clean images into, per app, one
//! saved cover and one stego per target embedding rate, every artifact
//! described by one [`ManifestRecord`]. Everything is deterministic
//! under the config's master seed: each (source, app, rate) job derives
//! its own PRNG seed, so input order, thread scheduling, and adding
//! more rates never change previously generated outputs.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedders::{bits_per_pixel, capacity_bits, embed, extract_bits, Prng};
use crate::error::{Error, Result};
use crate::imaging::{force_alpha, load_png_file, save_png_file, Channels, PixelImage};
use crate::payload::{
    build_payload, message_len_for_target, parse_payload, payload_len_bits, xor_keystream, AppId,
    SignatureTable,
};

/// Filler prose for the built-in message pool. Deliberately ordinary
/// text: generated messages should look like what people actually type,
/// not like random bytes. Contains no `#`, so the default PocketStego
/// terminator never collides with a message drawn from it.
const BUILTIN_PASSAGE: &str = "The quick brown fox jumps over the lazy dog while the harbor \
lights flicker across the bay. Every carrier pigeon of the old postal service knew the route \
by heart: north over the mill, east along the dry canal, then home before the lamps went out. \
Weather reports arrive hourly. Pressure falling, visibility fair, seas running two to four \
feet by nightfall. Nothing in this pool of text is secret; it exists so that generated \
messages carry the statistics of ordinary prose. ";

/// Size the built-in pool is padded to by repetition.
const BUILTIN_POOL_BYTES: usize = 1 << 18;

/// Where a generation run's message pool comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dictionary {
    /// The built-in prose pool (256 KiB, `#`-free).
    Builtin,
    /// Raw bytes of a file.
    File(PathBuf),
    /// Literal text given inline.
    Inline(String),
}

impl Default for Dictionary {
    fn default() -> Self {
        Dictionary::Builtin
    }
}

impl Dictionary {
    /// Materializes the pool bytes.
    pub fn load(&self) -> Result<Vec<u8>> {
        match self {
            Dictionary::Builtin => {
                let unit = BUILTIN_PASSAGE.as_bytes();
                let reps = BUILTIN_POOL_BYTES.div_ceil(unit.len());
                Ok(unit.repeat(reps))
            }
            Dictionary::File(path) => Ok(fs::read(path)?),
            Dictionary::Inline(text) => Ok(text.clone().into_bytes()),
        }
    }
}

/// How stego passwords are chosen.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PasswordPolicy {
    /// One password shared by every stego.
    Fixed(String),
    /// A fresh alphanumeric password per stego image, derived from the
    /// master seed so reruns agree.
    PerImageRandom { length: u32 },
}

/// Where the clean input images come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverSource {
    /// `*.png` files directly inside a directory, in sorted filename
    /// order; the file stem becomes the source id.
    Directory(PathBuf),
    /// Procedurally generated covers (source ids `synth_0000`, …).
    Synthetic(SynthSpec),
}

/// Parameters for synthetic cover generation.
///
/// Images are built as `clamp(blurᵖᵃˢˢᵉˢ(uniform field) + N(0, σ))`:
/// repeated 3×3 box blurring of a uniformly random RGB field gives the
/// low-frequency content, additive Gaussian noise the sensor-like
/// high-frequency content. A "smooth" class uses `noise_sigma = 0` with
/// several blur passes — four or more, so that neighboring samples
/// settle within a few gray levels of each other the way flat photo
/// regions do; a "noisy" class uses `noise_sigma ≥ 8` with none.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub count: u32,
    pub width: u32,
    pub height: u32,
    /// Standard deviation of the additive Gaussian noise, in sample
    /// units.
    pub noise_sigma: f64,
    /// Number of 3×3 box-blur passes applied before the noise.
    pub smoothing_radius: u32,
    pub seed: u64,
}

/// One generation run: inputs, apps, rates, message/password sourcing,
/// and the output location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub source: CoverSource,
    pub apps: Vec<AppId>,
    /// Target embedding rates, each in (0, 1].
    pub rates: Vec<f64>,
    #[serde(default)]
    pub dictionary: Dictionary,
    pub password_policy: PasswordPolicy,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl GenConfig {
    /// Checks the config invariants that don't need I/O.
    pub fn validate(&self) -> Result<()> {
        if self.apps.is_empty() {
            return Err(Error::Argument("no apps selected".into()));
        }
        if self.rates.is_empty() {
            return Err(Error::Argument("no target rates given".into()));
        }
        for &r in &self.rates {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Argument(format!(
                    "target rate {r} outside (0, 1]"
                )));
            }
        }
        let needs_password = self
            .apps
            .iter()
            .any(|a| matches!(a, AppId::StegMaster | AppId::MobiStego | AppId::StegM));
        let empty_password = match &self.password_policy {
            PasswordPolicy::Fixed(p) => p.is_empty(),
            PasswordPolicy::PerImageRandom { length } => *length == 0,
        };
        if needs_password && empty_password {
            return Err(Error::Argument(
                "password policy yields empty passwords, but at least one selected app \
                 requires a password"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Whether a manifest row describes a clean or an embedded image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Cover,
    Stego,
}

/// One generated file. Stego-only fields are absent on cover rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Path relative to the manifest's directory, with `/` separators.
    pub path: String,
    pub role: Role,
    pub app: AppId,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub password: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_rate: Option<f64>,
    /// Per-stego seed the message offset (and random password) were
    /// drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub width: u32,
    pub height: u32,
}

/// All records of one generation run plus the directory their paths
/// resolve against.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    records: Vec<ManifestRecord>,
    root: PathBuf,
}

impl DatasetManifest {
    pub fn new(records: Vec<ManifestRecord>, root: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            records,
            root: root.into(),
        }
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute (root-joined) path of a record's file.
    pub fn resolve(&self, rec: &ManifestRecord) -> PathBuf {
        self.root.join(&rec.path)
    }

    /// Writes JSON-lines, one record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
        for rec in &self.records {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a JSON-lines manifest; record paths resolve against the
    /// manifest file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let reader = BufReader::new(fs::File::open(path)?);
        let mut records = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Ok(DatasetManifest { records, root })
    }

    /// Full referential-integrity check: every stego row references an
    /// existing cover row, every file exists with the recorded
    /// dimensions, stego rates obey `achieved ≤ target`, and the stored
    /// achieved rate equals the one recomputed from the stored message
    /// and password lengths.
    pub fn validate(&self, sigs: &SignatureTable) -> Result<()> {
        let covers: HashSet<(&str, AppId)> = self
            .records
            .iter()
            .filter(|r| r.role == Role::Cover)
            .map(|r| (r.source_id.as_str(), r.app))
            .collect();
        for rec in &self.records {
            let file = self.resolve(rec);
            let (w, h) = png_dims(&file)
                .map_err(|e| Error::Manifest(format!("{}: {e}", rec.path)))?;
            if (w, h) != (rec.width, rec.height) {
                return Err(Error::Manifest(format!(
                    "{}: file is {w}x{h}, record says {}x{}",
                    rec.path, rec.width, rec.height
                )));
            }
            if rec.role == Role::Cover {
                continue;
            }
            if !covers.contains(&(rec.source_id.as_str(), rec.app)) {
                return Err(Error::Manifest(format!(
                    "{}: no cover row for source {} under {}",
                    rec.path, rec.source_id, rec.app
                )));
            }
            let (target, achieved, message_bytes, password) = match (
                rec.target_rate,
                rec.achieved_rate,
                rec.message_bytes,
                rec.password.as_ref(),
            ) {
                (Some(t), Some(a), Some(m), Some(p)) => (t, a, m, p),
                _ => {
                    return Err(Error::Manifest(format!(
                        "{}: stego row is missing embedding fields",
                        rec.path
                    )))
                }
            };
            if achieved > target {
                return Err(Error::Manifest(format!(
                    "{}: achieved rate {achieved} exceeds target {target}",
                    rec.path
                )));
            }
            let capacity = bits_per_pixel(rec.app) as u64 * u64::from(w) * u64::from(h);
            let payload =
                payload_len_bits(rec.app, message_bytes, password.len() as u64, sigs);
            let expected = payload as f64 / capacity as f64;
            if achieved != expected {
                return Err(Error::Manifest(format!(
                    "{}: achieved rate {achieved} does not match {expected} recomputed \
                     from {message_bytes} message bytes",
                    rec.path
                )));
            }
        }
        Ok(())
    }
}

/// Reads just the PNG header for its dimensions.
fn png_dims(path: &Path) -> Result<(u32, u32)> {
    let reader = png::Decoder::new(BufReader::new(fs::File::open(path)?))
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let info = reader.info();
    Ok((info.width, info.height))
}

/// FNV-1a over length-separated parts; the basis of all derived seeds.
pub(crate) fn mix_seed(parts: &[&[u8]]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let eat = |h: u64, bytes: &[u8]| {
        let mut h = h;
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    };
    for part in parts {
        h = eat(h, part);
        h = eat(h, &[0xff]);
    }
    h
}

/// Seed of the (source, app, rate) stego job, with a purpose tag so the
/// password and message draws can't collide.
fn job_seed(master: u64, source_id: &str, app: AppId, rate: f64, tag: &[u8]) -> u64 {
    mix_seed(&[
        &master.to_be_bytes(),
        source_id.as_bytes(),
        app.name().as_bytes(),
        &rate.to_bits().to_be_bytes(),
        tag,
    ])
}

/// Applies the pre-processing the app performs before embedding.
/// DaVinci flattens transparency by forcing alpha to 255; none of the
/// other supported apps touch the image (no resizing, no recoding).
pub fn make_cover(app: AppId, input: &PixelImage) -> Result<PixelImage> {
    capacity_bits(app, input)?; // channel-compatibility check
    Ok(match app {
        AppId::DaVinci => force_alpha(input, 255),
        _ => input.clone(),
    })
}

/// Generates `spec.count` synthetic covers. Each image depends only on
/// the spec and its index, so count changes never reshuffle earlier
/// images.
pub fn synth_covers(spec: &SynthSpec) -> Result<Vec<PixelImage>> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Argument("synthetic covers need nonzero dimensions".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Argument(format!(
            "noise sigma must be a nonnegative real, got {}",
            spec.noise_sigma
        )));
    }
    Ok((0..spec.count).map(|i| synth_one(spec, i)).collect())
}

fn synth_one(spec: &SynthSpec, index: u32) -> PixelImage {
    let seed = mix_seed(&[&spec.seed.to_be_bytes(), &index.to_be_bytes()]);
    let mut prng = Prng::from_seed(seed);
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut field: Vec<f64> = (0..w * h * 3)
        .map(|_| prng.next_below(256) as f64)
        .collect();
    for _ in 0..spec.smoothing_radius {
        field = box_blur3(&field, w, h, 3);
    }
    if spec.noise_sigma > 0.0 {
        let mut spare = None;
        for v in &mut field {
            let z = spare.take().unwrap_or_else(|| {
                let (a, b) = gaussian_pair(&mut prng);
                spare = Some(b);
                a
            });
            *v += spec.noise_sigma * z;
        }
    }
    let samples: Vec<u8> = field
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    PixelImage::from_samples(spec.width, spec.height, Channels::Rgb, samples)
        .expect("synthesized sample buffer matches its dimensions")
}

/// One 3×3 mean-filter pass per channel, borders clamped.
fn box_blur3(src: &[f64], w: usize, h: usize, spp: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..spp {
                let mut sum = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        sum += src[(yy * w + xx) * spp + c];
                    }
                }
                out[(y * w + x) * spp + c] = sum / 9.0;
            }
        }
    }
    out
}

/// Two independent standard normals via Box–Muller.
fn gaussian_pair(prng: &mut Prng) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    let u1 = ((prng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (prng.next_u64() >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Loads the clean inputs as (source id, image) pairs.
fn load_inputs(source: &CoverSource) -> Result<Vec<(String, PixelImage)>> {
    match source {
        CoverSource::Directory(dir) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| {
                    p.extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
                })
                .collect();
            paths.sort();
            let mut seen = HashSet::new();
            let mut inputs = Vec::with_capacity(paths.len());
            for path in paths {
                let id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| {
                        Error::Argument(format!("unusable input filename {}", path.display()))
                    })?
                    .to_string();
                if !seen.insert(id.clone()) {
                    return Err(Error::Argument(format!(
                        "two inputs share the source id {id:?}"
                    )));
                }
                inputs.push((id, load_png_file(&path)?));
            }
            Ok(inputs)
        }
        CoverSource::Synthetic(spec) => Ok(synth_covers(spec)?
            .into_iter()
            .enumerate()
            .map(|(i, img)| (format!("synth_{i:04}"), img))
            .collect()),
    }
}

/// Stable directory suffix for a rate (shortest f64 representation).
fn rate_dir(rate: f64) -> String {
    format!("stego_{rate}")
}

fn password_for(
    policy: &PasswordPolicy,
    master: u64,
    source_id: &str,
    app: AppId,
    rate: f64,
) -> String {
    match policy {
        PasswordPolicy::Fixed(p) => p.clone(),
        PasswordPolicy::PerImageRandom { length } => {
            const ALPHABET: &[u8] =
                b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
            let mut prng = Prng::from_seed(job_seed(master, source_id, app, rate, b"pwd"));
            (0..*length)
                .map(|_| ALPHABET[prng.next_below(ALPHABET.len() as u64) as usize] as char)
                .collect()
        }
    }
}

fn contains_subslice(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Draws a message slice that parses back unambiguously: scanners that
/// hunt for a closing mark (PocketStego's terminator, StegMaster's
/// closing signature, MobiStego's end mark over the *ciphertext*) would
/// truncate a message that happens to contain it, so such draws are
/// rejected and retried at a fresh offset.
fn pick_message(
    prng: &mut Prng,
    dict: &[u8],
    len: usize,
    app: AppId,
    password: &str,
    sigs: &SignatureTable,
) -> Result<Vec<u8>> {
    if len > dict.len() {
        return Err(Error::Argument(format!(
            "dictionary holds {} bytes but a {len}-byte message is needed; \
             supply a larger message pool",
            dict.len()
        )));
    }
    let span = (dict.len() - len) as u64;
    for _ in 0..16 {
        let off = prng.next_below(span + 1) as usize;
        let msg = &dict[off..off + len];
        let ambiguous = match app {
            AppId::PocketStego => msg.contains(&sigs.terminator),
            AppId::StegMaster => contains_subslice(msg, &sigs.close2),
            AppId::MobiStego => {
                contains_subslice(&xor_keystream(msg, password.as_bytes())?, &sigs.end)
            }
            AppId::DaVinci | AppId::StegM => false,
        };
        if !ambiguous {
            return Ok(msg.to_vec());
        }
    }
    Err(Error::Ambiguous(format!(
        "no unambiguous {len}-byte message found for {app} in 16 draws"
    )))
}

/// Crafts, saves and self-checks one stego; returns its record.
#[allow(clippy::too_many_arguments)]
fn craft_stego(
    cfg: &GenConfig,
    sigs: &SignatureTable,
    dict: &[u8],
    source_id: &str,
    cover: &PixelImage,
    app: AppId,
    rate: f64,
    capacity: u64,
) -> Result<ManifestRecord> {
    let password = password_for(&cfg.password_policy, cfg.master_seed, source_id, app, rate);
    let spec = message_len_for_target(app, capacity, rate, password.len() as u64, sigs)?;
    let seed = job_seed(cfg.master_seed, source_id, app, rate, b"msg");
    let mut prng = Prng::from_seed(seed);
    let message = pick_message(
        &mut prng,
        dict,
        spec.message_bytes as usize,
        app,
        &password,
        sigs,
    )?;
    let payload = build_payload(app, &message, password.as_bytes(), sigs)?;
    let result = embed(app, cover, &payload, password.as_bytes())?;

    // Self-check: the saved image must yield back exactly the message
    // recorded for it. A failure here is a generator bug, not bad data,
    // so it aborts the run.
    let back = extract_bits(app, &result.stego, payload.len_bits() as u64, password.as_bytes())?;
    let recovered = parse_payload(app, &back, password.as_bytes(), sigs)?;
    if recovered.as_deref() != Some(&message[..]) {
        return Err(Error::Manifest(format!(
            "self-check failed: {app} stego for {source_id} at rate {rate} did not \
             round-trip its message"
        )));
    }

    let rel = format!("{}/{}/{}.png", app.name(), rate_dir(rate), source_id);
    save_png_file(&result.stego, cfg.output_dir.join(&rel))?;
    Ok(ManifestRecord {
        path: rel,
        role: Role::Stego,
        app,
        source_id: source_id.to_string(),
        target_rate: Some(rate),
        achieved_rate: Some(spec.achieved),
        message_bytes: Some(spec.message_bytes),
        password: Some(password),
        change_rate: Some(result.change_rate),
        seed: Some(seed),
        width: cover.width(),
        height: cover.height(),
    })
}

/// Runs the whole generation batch described by `cfg`.
///
/// Per input image and app: the cover is pre-processed and saved, the
/// capacity computed, and for every target rate a message is drawn from
/// the dictionary, wrapped, embedded, saved and re-extracted as a
/// self-check. Images too small for a rate are skipped with a logged
/// reason. Records come back sorted by (source, app, rate) and are also
/// written to `<output_dir>/manifest.jsonl`.
pub fn generate_dataset(cfg: &GenConfig, sigs: &SignatureTable) -> Result<DatasetManifest> {
    cfg.validate()?;
    sigs.validate()?;
    let dict = cfg.dictionary.load()?;
    let inputs = load_inputs(&cfg.source)?;
    if inputs.is_empty() {
        return Err(Error::Argument("the input source holds no images".into()));
    }
    let mut rates = cfg.rates.clone();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let mut apps = cfg.apps.clone();
    apps.sort_by_key(|a| a.name());
    apps.dedup();

    for app in &apps {
        let base = cfg.output_dir.join(app.name());
        fs::create_dir_all(base.join("covers"))?;
        for &r in &rates {
            fs::create_dir_all(base.join(rate_dir(r)))?;
        }
    }

    let jobs: Vec<(usize, AppId)> = (0..inputs.len())
        .flat_map(|i| apps.iter().map(move |&a| (i, a)))
        .collect();
    let groups: Vec<Vec<ManifestRecord>> = jobs
        .par_iter()
        .map(|&(i, app)| -> Result<Vec<ManifestRecord>> {
            let (source_id, input) = &inputs[i];
            let cover = make_cover(app, input)?;
            let rel = format!("{}/covers/{}.png", app.name(), source_id);
            save_png_file(&cover, cfg.output_dir.join(&rel))?;
            let mut recs = vec![ManifestRecord {
                path: rel,
                role: Role::Cover,
                app,
                source_id: source_id.clone(),
                target_rate: None,
                achieved_rate: None,
                message_bytes: None,
                password: None,
                change_rate: None,
                seed: None,
                width: cover.width(),
                height: cover.height(),
            }];
            let capacity = capacity_bits(app, &cover)?;
            for &rate in &rates {
                match craft_stego(cfg, sigs, &dict, source_id, &cover, app, rate, capacity) {
                    Ok(rec) => recs.push(rec),
                    Err(e @ (Error::CapacityTooSmall(_) | Error::Ambiguous(_))) => {
                        log::warn!("skipping {source_id}/{app} at rate {rate}: {e}");
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(recs)
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<ManifestRecord> = groups.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.source_id.as_str(), a.app.name())
            .cmp(&(b.source_id.as_str(), b.app.name()))
            .then(
                a.target_rate
                    .unwrap_or(-1.0)
                    .total_cmp(&b.target_rate.unwrap_or(-1.0)),
            )
    });
    let manifest = DatasetManifest::new(records, cfg.output_dir.clone());
    manifest.save(cfg.output_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
