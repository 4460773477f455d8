//! Signature-based stego detection.
//!
//! Each detector replays its app's extraction pattern on an arbitrary
//! image and decides whether the recovered bits match the app's payload
//! container. Three of the four containers anchor multi-byte signatures
//! at fixed positions, which makes their detectors essentially
//! collision-free; PocketStego's single trailing byte can occur
//! anywhere, so its detector fires on nearly every sizable image — a
//! weakness this module reproduces deliberately.
//!
//! StegM has no detector: its embedding path is a password-seeded
//! permutation, so no signature sits at a predictable location.

use serde::Serialize;

use crate::embedders::{capacity_bits, decode_digit_triple, extract_bits};
use crate::error::{Error, Result};
use crate::imaging::{Channels, PixelImage};
use crate::payload::{find_bytes, AppId, PayloadBits, SignatureTable};

/// Outcome of one detector on one image.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionResult {
    /// Did the image carry this app's payload container?
    pub verdict: bool,
    pub matched_app: AppId,
    /// The recovered message (MobiStego: the raw ciphertext, since a
    /// detector has no password). Present only when `verdict` is true.
    pub recovered_message: Option<Vec<u8>>,
    /// Bit offset of the decisive signature match: the closing
    /// signature for the delimiter-scanning detectors, 0 for the
    /// header-anchored DaVinci container.
    pub matched_at_bit: Option<u64>,
}

impl DetectionResult {
    fn miss(app: AppId) -> Self {
        DetectionResult {
            verdict: false,
            matched_app: app,
            recovered_message: None,
            matched_at_bit: None,
        }
    }

    fn hit(app: AppId, message: Vec<u8>, at_bit: u64) -> Self {
        DetectionResult {
            verdict: true,
            matched_app: app,
            recovered_message: Some(message),
            matched_at_bit: Some(at_bit),
        }
    }
}

/// Detector tuning knobs.
#[derive(Debug, Clone, Copy, Default)]
pub struct DetectOptions {
    /// PocketStego only: additionally require every byte before the
    /// terminator to be printable ASCII (or tab/newline). Off by
    /// default — the plain detector deliberately keeps the naive
    /// "terminator anywhere" rule and its huge false-positive rate.
    pub pocketstego_printable_only: bool,
}

/// Runs one app's signature detector. Images that cannot carry the
/// app's stego at all (wrong channel layout) get a false verdict, not
/// an error. StegM is rejected outright: with a password-seeded path
/// there is no fixed signature location to test.
pub fn detect(app: AppId, img: &PixelImage, sigs: &SignatureTable) -> Result<DetectionResult> {
    detect_with_options(app, img, sigs, &DetectOptions::default())
}

/// [`detect`] with explicit [`DetectOptions`].
pub fn detect_with_options(
    app: AppId,
    img: &PixelImage,
    sigs: &SignatureTable,
    opts: &DetectOptions,
) -> Result<DetectionResult> {
    sigs.validate()?;
    match app {
        AppId::StegM => Err(Error::Argument(
            "stegm uses a password-seeded embedding path; signature detection is unsupported"
                .into(),
        )),
        AppId::StegMaster => Ok(detect_stegmaster(img, sigs)),
        AppId::DaVinci => Ok(detect_davinci(img, sigs)),
        AppId::MobiStego => Ok(detect_mobistego(img, sigs)),
        AppId::PocketStego => Ok(detect_pocketstego(img, sigs, opts)),
    }
}

/// Runs the four signature detectors in a fixed order.
pub fn scan_all(img: &PixelImage, sigs: &SignatureTable) -> Vec<DetectionResult> {
    [
        AppId::StegMaster,
        AppId::DaVinci,
        AppId::MobiStego,
        AppId::PocketStego,
    ]
    .into_iter()
    .map(|app| detect(app, img, sigs).expect("signature-capable app"))
    .collect()
}

/// StegMaster: decode one byte per pixel from the last decimal digits
/// of R, G, B, row-major. The leading 14 bytes must equal
/// `open1 ‖ close1`; the password then runs to the first `open2`, and
/// the message to the first `close2`. Scanning stops at the first
/// pixel whose digits name a value above 255 — embedding can never
/// produce one, so such a pixel proves the prefix is not a payload.
fn detect_stegmaster(img: &PixelImage, sigs: &SignatureTable) -> DetectionResult {
    let app = AppId::StegMaster;
    if !matches!(img.channels(), Channels::Rgb | Channels::Rgba) {
        return DetectionResult::miss(app);
    }
    let spp = img.channels().count();
    let s = img.samples();
    let total = img.pixel_count();
    let byte_at = |p: usize| decode_digit_triple(s[p * spp], s[p * spp + 1], s[p * spp + 2]);

    let mut lead = sigs.open1.clone();
    lead.extend_from_slice(&sigs.close1);
    if total < lead.len() {
        return DetectionResult::miss(app);
    }
    for (p, &want) in lead.iter().enumerate() {
        match byte_at(p) {
            Some(b) if b == want => {}
            _ => return DetectionResult::miss(app),
        }
    }

    // Scan forward byte by byte, switching targets once open2 is seen.
    // Success exits before any pixel past the payload is decoded, so
    // invalid triples in the untouched cover tail cannot matter.
    let mut buf: Vec<u8> = Vec::new();
    let mut open2_end: Option<usize> = None;
    for p in lead.len()..total {
        match byte_at(p) {
            Some(b) => buf.push(b),
            None => return DetectionResult::miss(app),
        }
        match open2_end {
            None => {
                if buf.ends_with(&sigs.open2) {
                    open2_end = Some(buf.len());
                }
            }
            Some(msg_from) => {
                if buf.ends_with(&sigs.close2) {
                    let message = buf[msg_from..buf.len() - sigs.close2.len()].to_vec();
                    let close2_at = (lead.len() + buf.len() - sigs.close2.len()) as u64 * 8;
                    return DetectionResult::hit(app, message, close2_at);
                }
            }
        }
    }
    DetectionResult::miss(app)
}

/// DaVinci: the alpha channel carries one bit per pixel (254 → 0,
/// 255 → 1). The container is anchored at bit 0: a 32-bit field naming
/// the 64-bit signature, the signature itself, then length-prefixed
/// password and message. Length fields must be byte counts (multiples
/// of 8 bits) and everything must fit the capacity. Any alpha outside
/// {254, 255} inside the claimed container disproves it.
fn detect_davinci(img: &PixelImage, sigs: &SignatureTable) -> DetectionResult {
    let app = AppId::DaVinci;
    if img.channels() != Channels::Rgba {
        return DetectionResult::miss(app);
    }
    let capacity = img.pixel_count() as u64;
    let s = img.samples();
    // Incremental alpha-bit reader over pixels [0, capacity).
    let bit_at = |p: u64| -> Option<u8> {
        match s[p as usize * 4 + 3] {
            255 => Some(1),
            254 => Some(0),
            _ => None,
        }
    };
    let read = |from: u64, n: u64| -> Option<PayloadBits> {
        if from + n > capacity {
            return None;
        }
        let mut out = PayloadBits::new();
        for p in from..from + n {
            out.push_bit(bit_at(p)?);
        }
        Some(out)
    };
    let read_u32 = |from: u64| read(from, 32).map(|b| b.read_u32_be(0).unwrap());

    let sig_bits = sigs.sig.len() as u64 * 8;
    let header = match read(0, 32 + sig_bits) {
        Some(h) => h,
        None => return DetectionResult::miss(app),
    };
    if header.read_u32_be(0).unwrap() as u64 != sig_bits
        || header.read_bytes(32, sigs.sig.len()).unwrap() != sigs.sig
    {
        return DetectionResult::miss(app);
    }
    let mut off = 32 + sig_bits;
    let pwd_bits = match read_u32(off) {
        Some(v) => v as u64,
        None => return DetectionResult::miss(app),
    };
    off += 32;
    if pwd_bits % 8 != 0 || off + pwd_bits + 32 > capacity {
        return DetectionResult::miss(app);
    }
    if read(off, pwd_bits).is_none() {
        return DetectionResult::miss(app);
    }
    off += pwd_bits;
    let msg_bits = match read_u32(off) {
        Some(v) => v as u64,
        None => return DetectionResult::miss(app),
    };
    off += 32;
    if msg_bits % 8 != 0 || off + msg_bits > capacity {
        return DetectionResult::miss(app);
    }
    match read(off, msg_bits) {
        Some(body) => {
            let message = body.read_bytes(0, msg_bits as usize / 8).unwrap();
            DetectionResult::hit(app, message, 0)
        }
        None => DetectionResult::miss(app),
    }
}

/// MobiStego: reassemble the 2-LSB stream of R, G, B into bytes; the
/// first 24 bits must equal the start delimiter and the end delimiter
/// must occur byte-aligned before capacity runs out. The bytes between
/// are reported as-is — the ciphertext — since a detector has no
/// password to decrypt with.
fn detect_mobistego(img: &PixelImage, sigs: &SignatureTable) -> DetectionResult {
    let app = AppId::MobiStego;
    if !matches!(img.channels(), Channels::Rgb | Channels::Rgba) {
        return DetectionResult::miss(app);
    }
    let capacity = capacity_bits(app, img).expect("channels checked");
    let bits = extract_bits(app, img, capacity, b"").expect("LSB read cannot fail");
    match bits.read_bytes(0, 3) {
        Some(lead) if lead == sigs.start => {}
        _ => return DetectionResult::miss(app),
    }
    match find_bytes(&bits, 3, &sigs.end) {
        Some(end_at) => {
            let cipher = bits.read_bytes(24, end_at - 3).unwrap();
            DetectionResult::hit(app, cipher, end_at as u64 * 8)
        }
        None => DetectionResult::miss(app),
    }
}

/// PocketStego: read the blue-LSB byte stream and fire on a terminator
/// byte at *any* byte-aligned offset — the app's real rule, and the
/// reason this detector is nearly useless: on a random-LSB image of n
/// bytes the terminator shows up with probability 1 − (255/256)^n,
/// which is ≈ 1 for any normal image size. The printable-only option
/// additionally rejects as soon as a non-text byte precedes every
/// later terminator.
fn detect_pocketstego(
    img: &PixelImage,
    sigs: &SignatureTable,
    opts: &DetectOptions,
) -> DetectionResult {
    let app = AppId::PocketStego;
    if !matches!(img.channels(), Channels::Rgb | Channels::Rgba) {
        return DetectionResult::miss(app);
    }
    let capacity = capacity_bits(app, img).expect("channels checked");
    let bits = extract_bits(app, img, capacity, b"").expect("LSB read cannot fail");
    let stream = bits.as_bytes();
    let total = bits.len_bits() / 8;
    for (i, &b) in stream[..total].iter().enumerate() {
        if b == sigs.terminator {
            return DetectionResult::hit(app, stream[..i].to_vec(), i as u64 * 8);
        }
        if opts.pocketstego_printable_only && !is_texty(b) {
            return DetectionResult::miss(app);
        }
    }
    DetectionResult::miss(app)
}

fn is_texty(b: u8) -> bool {
    (0x20..=0x7e).contains(&b) || b == b'\t' || b == b'\n' || b == b'\r'
}
