//! The five spatial-domain embedding techniques.
//!
//! Each app writes payload units along its own path through the pixels:
//!
//! | app         | units      | carrier                       | path                    |
//! |-------------|------------|-------------------------------|-------------------------|
//! | StegMaster  | 8 bits/px  | last decimal digit of R, G, B | lexicographic           |
//! | DaVinci     | 1 bit/px   | alpha = 254 or 255            | lexicographic           |
//! | MobiStego   | 6 bits/px  | two LSBs of R, G and B        | block-lexicographic     |
//! | PocketStego | 1 bit/px   | blue LSB                      | lexicographic           |
//! | StegM       | 1 bit/px   | gray or blue LSB              | password-seeded shuffle |
//!
//! Everything here is deterministic: the PRNG is xorshift64* seeded by
//! an FNV-1a hash of the password, and the shuffle and keystream
//! constructions are documented bit-exactly so paths are reproducible
//! across implementations.

use crate::error::{Error, Result};
use crate::imaging::{force_alpha, Channels, PixelImage};
use crate::payload::{AppId, PayloadBits};

/// Deterministic 64-bit generator: xorshift64* (shifts 12/25/27,
/// output multiplier `0x2545F4914F6CDD1D`). Identical seeds yield
/// identical streams on every platform.
#[derive(Debug, Clone)]
pub struct Prng {
    state: u64,
}

/// Replacement seed when the hash of a password is zero, which
/// xorshift64* cannot accept (zero is a fixed point).
const ZERO_SEED_REPLACEMENT: u64 = 0x9E37_79B9_7F4A_7C15;

impl Prng {
    pub fn from_seed(seed: u64) -> Self {
        Prng {
            state: if seed == 0 { ZERO_SEED_REPLACEMENT } else { seed },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state ^= self.state >> 12;
        self.state ^= self.state << 25;
        self.state ^= self.state >> 27;
        self.state.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform-ish draw in `0..bound` via modulo reduction. The modulo
    /// bias is negligible for image-sized bounds (≪ 2^64) and keeping
    /// the reduction plain makes the path trivially reproducible.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }

    /// XORs the keystream into `buf`. The keystream is the big-endian
    /// byte expansion of successive `next_u64` outputs.
    pub fn xor_into(&mut self, buf: &mut [u8]) {
        for chunk in buf.chunks_mut(8) {
            let ks = self.next_u64().to_be_bytes();
            for (b, k) in chunk.iter_mut().zip(ks) {
                *b ^= k;
            }
        }
    }

    /// Fisher–Yates shuffle: for `i` from `n−1` down to `1`, draw
    /// `j = next_below(i + 1)` and swap elements `i` and `j`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Seeds a [`Prng`] from a password: FNV-1a 64-bit over the password
/// bytes (offset `0xcbf29ce484222325`, prime `0x100000001b3`), with a
/// zero hash remapped to a fixed nonzero constant.
pub fn prng_from_password(password: &[u8]) -> Result<Prng> {
    if password.is_empty() {
        return Err(Error::Argument("password must not be empty".into()));
    }
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in password {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(Prng::from_seed(hash))
}

/// How an embedding path orders the pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Row-major, top-left to bottom-right.
    Lexicographic,
    /// Image split into `blocks` horizontal bands; the payload is
    /// divided across bands proportionally to their pixel counts and
    /// each band is written row-major from its start.
    BlockLexicographic { blocks: u32 },
    /// Fisher–Yates permutation driven by the password PRNG.
    SeededPermutation { seed: u64 },
}

/// A concrete pixel visiting order: `order` is a permutation of
/// `0..width·height` (row-major indices) and `bands` partitions it into
/// contiguous runs that each receive a proportional share of the
/// payload. Single-band paths consume a plain prefix of `order`.
#[derive(Debug, Clone)]
pub struct EmbedPath {
    pub kind: PathKind,
    order: Vec<u32>,
    bands: Vec<std::ops::Range<usize>>,
}

impl EmbedPath {
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Pixel indices that carry the first `k_units` payload units, in
    /// consumption order. Each band `j` with `n_j` of the `N` pixels
    /// takes `⌊k·n_j/N⌋` units, and the remainder goes one unit apiece
    /// to the earliest bands with room.
    pub fn placement(&self, k_units: usize) -> Vec<u32> {
        let n = self.order.len();
        assert!(k_units <= n, "{k_units} units exceed {n} pixels");
        if self.bands.len() == 1 {
            return self.order[..k_units].to_vec();
        }
        let mut take: Vec<usize> = self
            .bands
            .iter()
            .map(|b| k_units * b.len() / n)
            .collect();
        let mut leftover = k_units - take.iter().sum::<usize>();
        for (t, b) in take.iter_mut().zip(&self.bands) {
            if leftover == 0 {
                break;
            }
            if *t < b.len() {
                *t += 1;
                leftover -= 1;
            }
        }
        let mut out = Vec::with_capacity(k_units);
        for (t, b) in take.iter().zip(&self.bands) {
            out.extend_from_slice(&self.order[b.start..b.start + t]);
        }
        out
    }
}

/// Builds the visiting order for `kind` over an image of the given
/// dimensions. `SeededPermutation` requires the password that seeds it.
pub fn make_path(
    kind: PathKind,
    width: u32,
    height: u32,
    password: Option<&[u8]>,
) -> Result<EmbedPath> {
    let n = width as usize * height as usize;
    let identity = || (0..n as u32).collect::<Vec<u32>>();
    match kind {
        PathKind::Lexicographic => Ok(EmbedPath {
            kind,
            order: identity(),
            bands: vec![0..n],
        }),
        PathKind::BlockLexicographic { blocks } => {
            if blocks < 1 || blocks > height {
                return Err(Error::Argument(format!(
                    "block count {blocks} outside 1..={height} (image height)"
                )));
            }
            let rows_per = (height / blocks) as usize;
            let w = width as usize;
            let bands = (0..blocks as usize)
                .map(|j| {
                    let top = j * rows_per;
                    let bottom = if j + 1 == blocks as usize {
                        height as usize
                    } else {
                        top + rows_per
                    };
                    top * w..bottom * w
                })
                .collect();
            Ok(EmbedPath {
                kind,
                order: identity(),
                bands,
            })
        }
        PathKind::SeededPermutation { .. } => {
            let password = password.ok_or_else(|| {
                Error::Argument("seeded path requires a password".into())
            })?;
            let mut prng = prng_from_password(password)?;
            let mut order = identity();
            prng.shuffle(&mut order);
            Ok(EmbedPath {
                kind,
                order,
                bands: vec![0..n],
            })
        }
    }
}

/// The path each app uses.
pub fn default_path_kind(app: AppId) -> PathKind {
    match app {
        AppId::StegMaster | AppId::DaVinci | AppId::PocketStego => PathKind::Lexicographic,
        // Single block: the degenerate (and default) band split.
        AppId::MobiStego => PathKind::BlockLexicographic { blocks: 1 },
        AppId::StegM => PathKind::SeededPermutation { seed: 0 },
    }
}

/// Payload bits each app stores per pixel.
pub fn bits_per_pixel(app: AppId) -> u32 {
    match app {
        AppId::StegMaster => 8,
        AppId::DaVinci => 1,
        AppId::MobiStego => 6,
        AppId::PocketStego => 1,
        AppId::StegM => 1,
    }
}

fn check_channels(app: AppId, ch: Channels) -> Result<()> {
    let ok = match app {
        AppId::StegM => matches!(ch, Channels::Gray | Channels::Rgb),
        _ => matches!(ch, Channels::Rgb | Channels::Rgba),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "{app} cannot operate on {ch:?} images"
        )))
    }
}

/// Number of payload bits the app can hide in `img`.
pub fn capacity_bits(app: AppId, img: &PixelImage) -> Result<u64> {
    check_channels(app, img.channels())?;
    Ok(img.pixel_count() as u64 * bits_per_pixel(app) as u64)
}

/// Embedding outcome: the stego image and the fraction of visited
/// channel samples that were actually modified.
#[derive(Debug, Clone)]
pub struct EmbedResult {
    pub stego: PixelImage,
    pub change_rate: f64,
}

/// Replaces the last decimal digit of channel value `c` with `d`,
/// stepping down a ten when the result would leave 0..=255 (only
/// possible for c ≥ 250, where e.g. 252 with digit 9 gives 259 → 249).
fn set_last_digit(c: u8, d: u8) -> u8 {
    debug_assert!(d <= 9);
    let mut v = c as i32 - (c as i32 % 10) + d as i32;
    if v > 255 {
        v -= 10;
    }
    v as u8
}

/// Reads the byte encoded in a pixel's last decimal digits, or `None`
/// when the digits name a value above 255 — which embedding can never
/// produce, so the pixel is not StegMaster output.
pub fn decode_digit_triple(r: u8, g: u8, b: u8) -> Option<u8> {
    let v = (r % 10) as u32 * 100 + (g % 10) as u32 * 10 + (b % 10) as u32;
    u8::try_from(v).ok()
}

/// Per-pixel bit slots for the plain-LSB apps: (channel index, bit
/// position) pairs in the order payload bits fill them.
fn bit_slots(app: AppId, ch: Channels) -> &'static [(usize, u8)] {
    match app {
        // b5b4 → R's two LSBs, b3b2 → G, b1b0 → B; MSB of each pair first.
        AppId::MobiStego => &[(0, 1), (0, 0), (1, 1), (1, 0), (2, 1), (2, 0)],
        AppId::PocketStego => &[(2, 0)],
        AppId::StegM => {
            if ch == Channels::Gray {
                &[(0, 0)]
            } else {
                &[(2, 0)]
            }
        }
        AppId::StegMaster | AppId::DaVinci => unreachable!("not slot-based"),
    }
}

/// Embeds `payload` into `cover` along the app's default path.
///
/// The password seeds the StegM path and is otherwise unused here
/// (payload-level encryption happens in payload assembly). For DaVinci
/// the cover is first normalized to RGBA with alpha 255, so the stego
/// differs from that normalized cover only at embedded positions.
/// Unvisited pixels are byte-identical to the cover.
pub fn embed(
    app: AppId,
    cover: &PixelImage,
    payload: &PayloadBits,
    password: &[u8],
) -> Result<EmbedResult> {
    let needed = payload.len_bits() as u64;
    let available = capacity_bits(app, cover)?;
    if needed > available {
        return Err(Error::Capacity {
            needed,
            available,
        });
    }

    let mut stego = if app == AppId::DaVinci {
        force_alpha(cover, 255)
    } else {
        cover.clone()
    };
    let path = make_path(
        default_path_kind(app),
        cover.width(),
        cover.height(),
        Some(password).filter(|p| !p.is_empty()),
    )?;

    let bpp = bits_per_pixel(app) as usize;
    let k_units = payload.len_bits().div_ceil(bpp);
    let positions = path.placement(k_units);
    let spp = stego.channels().count();

    let mut visited = 0u64;
    let mut modified = 0u64;
    let mut bit_idx = 0usize;
    match app {
        AppId::StegMaster => {
            for &p in &positions {
                // Each pixel takes one payload byte as three decimal
                // digits; a final partial byte is zero-padded.
                let mut v = 0u8;
                for k in 0..8 {
                    let bit = if bit_idx + k < payload.len_bits() {
                        payload.bit(bit_idx + k)
                    } else {
                        0
                    };
                    v = (v << 1) | bit;
                }
                bit_idx += 8;
                let off = p as usize * spp;
                let digits = [v / 100, (v / 10) % 10, v % 10];
                for (c, d) in digits.into_iter().enumerate() {
                    let old = stego.samples()[off + c];
                    let new = set_last_digit(old, d);
                    stego.samples_mut()[off + c] = new;
                    visited += 1;
                    modified += (new != old) as u64;
                }
            }
        }
        AppId::DaVinci => {
            for &p in &positions {
                let off = p as usize * 4 + 3;
                let old = stego.samples()[off];
                let new = 254 + payload.bit(bit_idx);
                bit_idx += 1;
                stego.samples_mut()[off] = new;
                visited += 1;
                modified += (new != old) as u64;
            }
        }
        AppId::MobiStego | AppId::PocketStego | AppId::StegM => {
            let slots = bit_slots(app, stego.channels());
            for &p in &positions {
                let off = p as usize * spp;
                // Group the pixel's slots by channel so a sample counts
                // once however many of its bits the payload reaches.
                let mut c_prev = usize::MAX;
                let mut old = 0u8;
                for &(c, bitpos) in slots {
                    if bit_idx >= payload.len_bits() {
                        break;
                    }
                    if c != c_prev {
                        if c_prev != usize::MAX {
                            modified += (stego.samples()[off + c_prev] != old) as u64;
                        }
                        c_prev = c;
                        old = stego.samples()[off + c];
                        visited += 1;
                    }
                    let bit = payload.bit(bit_idx);
                    bit_idx += 1;
                    let s = &mut stego.samples_mut()[off + c];
                    *s = (*s & !(1 << bitpos)) | (bit << bitpos);
                }
                if c_prev != usize::MAX {
                    modified += (stego.samples()[off + c_prev] != old) as u64;
                }
            }
        }
    }

    Ok(EmbedResult {
        stego,
        change_rate: if visited == 0 {
            0.0
        } else {
            modified as f64 / visited as f64
        },
    })
}

/// Reads back the first `n_bits` payload bits from `img` along the
/// app's path — the exact inverse of [`embed`]'s placement.
///
/// Returns a not-stego-formatted error when the carrier values are
/// outside what embedding can produce: a StegMaster digit triple above
/// 255, or a DaVinci alpha that is neither 254 nor 255.
pub fn extract_bits(
    app: AppId,
    img: &PixelImage,
    n_bits: u64,
    password: &[u8],
) -> Result<PayloadBits> {
    if app == AppId::DaVinci && img.channels() != Channels::Rgba {
        return Err(Error::Argument(
            "davinci extraction needs an alpha channel".into(),
        ));
    }
    let available = capacity_bits(app, img)?;
    if n_bits > available {
        return Err(Error::Capacity {
            needed: n_bits,
            available,
        });
    }
    let path = make_path(
        default_path_kind(app),
        img.width(),
        img.height(),
        Some(password).filter(|p| !p.is_empty()),
    )?;
    let bpp = bits_per_pixel(app) as usize;
    let n_bits = n_bits as usize;
    let positions = path.placement(n_bits.div_ceil(bpp));
    let spp = img.channels().count();

    let mut out = PayloadBits::new();
    match app {
        AppId::StegMaster => {
            for &p in &positions {
                let off = p as usize * spp;
                let s = img.samples();
                let v = decode_digit_triple(s[off], s[off + 1], s[off + 2]).ok_or_else(|| {
                    Error::NotStegoFormatted {
                        app: "stegmaster",
                        reason: format!("digit triple above 255 at pixel {p}"),
                    }
                })?;
                out.push_byte(v);
            }
        }
        AppId::DaVinci => {
            for &p in &positions {
                match img.samples()[p as usize * 4 + 3] {
                    255 => out.push_bit(1),
                    254 => out.push_bit(0),
                    other => {
                        return Err(Error::NotStegoFormatted {
                            app: "davinci",
                            reason: format!("alpha {other} at pixel {p} is not 254/255"),
                        })
                    }
                }
            }
        }
        AppId::MobiStego | AppId::PocketStego | AppId::StegM => {
            let slots = bit_slots(app, img.channels());
            'pixels: for &p in &positions {
                let off = p as usize * spp;
                for &(c, bitpos) in slots {
                    if out.len_bits() >= n_bits {
                        break 'pixels;
                    }
                    out.push_bit((img.samples()[off + c] >> bitpos) & 1);
                }
            }
        }
    }
    // Unit-granular reads may overshoot the request; trim to size.
    Ok(PayloadBits::from_bits(
        &out.iter_bits().take(n_bits).collect::<Vec<u8>>(),
    ))
}
