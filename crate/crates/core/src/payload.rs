//! Payload assembly and parsing for the five supported apps.
//!
//! Each app wraps the user message in its own container — signature
//! strings, length fields, plaintext password, or a password-keyed XOR
//! stream — before the result is handed to the embedder as a flat bit
//! sequence. This module builds those containers, parses them back
//! (returning "no match" as a value, since format checks are how
//! detection works), and does the rate↔length arithmetic the dataset
//! generator needs.
//!
//! Bit order is MSB-first within each byte, everywhere. Length fields
//! are 32-bit big-endian counts of *bits*.

use serde::{Deserialize, Serialize};

use crate::embedders::prng_from_password;
use crate::error::{Error, Result};

/// The five supported apps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AppId {
    StegMaster,
    DaVinci,
    MobiStego,
    PocketStego,
    StegM,
}

impl AppId {
    pub const ALL: [AppId; 5] = [
        AppId::StegMaster,
        AppId::DaVinci,
        AppId::MobiStego,
        AppId::PocketStego,
        AppId::StegM,
    ];

    /// Stable lowercase name used in CLIs, manifests and directory names.
    pub fn name(self) -> &'static str {
        match self {
            AppId::StegMaster => "stegmaster",
            AppId::DaVinci => "davinci",
            AppId::MobiStego => "mobistego",
            AppId::PocketStego => "pocketstego",
            AppId::StegM => "stegm",
        }
    }
}

impl std::fmt::Display for AppId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AppId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stegmaster" => Ok(AppId::StegMaster),
            "davinci" => Ok(AppId::DaVinci),
            "mobistego" => Ok(AppId::MobiStego),
            "pocketstego" => Ok(AppId::PocketStego),
            "stegm" => Ok(AppId::StegM),
            other => Err(Error::Argument(format!(
                "unknown app '{other}' (expected one of stegmaster, davinci, mobistego, pocketstego, stegm)"
            ))),
        }
    }
}

/// Signature byte strings for every app.
///
/// The *lengths* are part of each app's wire format and are fixed: the
/// StegMaster strings are 7 bytes each, the DaVinci signature 8 bytes,
/// the MobiStego delimiters 3 bytes, and the PocketStego terminator a
/// single byte. The *values* are configuration — detection and parsing
/// depend only on lengths and positions — and can be overridden from a
/// config file (see [`SignatureTable::from_config_str`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureTable {
    /// StegMaster: leading pair, `open1 ‖ close1` anchors the payload.
    pub open1: Vec<u8>,
    pub close1: Vec<u8>,
    /// StegMaster: second pair surrounding the message.
    pub open2: Vec<u8>,
    pub close2: Vec<u8>,
    /// DaVinci: 8-byte signature carried as the first length-prefixed field.
    pub sig: Vec<u8>,
    /// MobiStego: delimiters surrounding the encrypted message.
    pub start: Vec<u8>,
    pub end: Vec<u8>,
    /// PocketStego: single byte appended after the plaintext message.
    pub terminator: u8,
}

impl Default for SignatureTable {
    fn default() -> Self {
        SignatureTable {
            open1: b"STGMST<".to_vec(),
            close1: b">STGMST".to_vec(),
            open2: b"MSGBEG<".to_vec(),
            close2: b">MSGEND".to_vec(),
            sig: b"DAVINCI1".to_vec(),
            start: b"@!#".to_vec(),
            end: b"#!@".to_vec(),
            terminator: b'#',
        }
    }
}

impl SignatureTable {
    /// Checks the fixed per-field lengths.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, usize, usize); 7] = [
            ("stegmaster.open1", self.open1.len(), 7),
            ("stegmaster.close1", self.close1.len(), 7),
            ("stegmaster.open2", self.open2.len(), 7),
            ("stegmaster.close2", self.close2.len(), 7),
            ("davinci.sig", self.sig.len(), 8),
            ("mobistego.start", self.start.len(), 3),
            ("mobistego.end", self.end.len(), 3),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::SignatureConfig(format!(
                    "{name} must be {want} bytes, got {got}"
                )));
            }
        }
        Ok(())
    }

    /// Parses a key-value signature config and applies it over the
    /// defaults. Format: one `app.field = "value"` per line, `#`
    /// comments, blank lines ignored. Values are quoted byte strings
    /// supporting `\xHH`, `\\` and `\"` escapes.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut table = SignatureTable::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::SignatureConfig(format!("line {}: expected key = \"value\"", lineno + 1))
            })?;
            let bytes = unquote(value.trim()).map_err(|e| {
                Error::SignatureConfig(format!("line {}: {e}", lineno + 1))
            })?;
            match key.trim() {
                "stegmaster.open1" => table.open1 = bytes,
                "stegmaster.close1" => table.close1 = bytes,
                "stegmaster.open2" => table.open2 = bytes,
                "stegmaster.close2" => table.close2 = bytes,
                "davinci.sig" => table.sig = bytes,
                "mobistego.start" => table.start = bytes,
                "mobistego.end" => table.end = bytes,
                "pocketstego.terminator" => {
                    if bytes.len() != 1 {
                        return Err(Error::SignatureConfig(format!(
                            "line {}: pocketstego.terminator must be 1 byte, got {}",
                            lineno + 1,
                            bytes.len()
                        )));
                    }
                    table.terminator = bytes[0];
                }
                other => {
                    return Err(Error::SignatureConfig(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )));
                }
            }
        }
        table.validate()?;
        Ok(table)
    }

    /// Loads a signature config file (see [`Self::from_config_str`]).
    pub fn from_config_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }
}

/// Decodes a double-quoted byte string with `\xHH`, `\\`, `\"` escapes.
fn unquote(s: &str) -> std::result::Result<Vec<u8>, String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| format!("value {s:?} is not double-quoted"))?;
    let mut out = Vec::new();
    let mut it = inner.bytes();
    while let Some(b) = it.next() {
        if b != b'\\' {
            out.push(b);
            continue;
        }
        match it.next() {
            Some(b'\\') => out.push(b'\\'),
            Some(b'"') => out.push(b'"'),
            Some(b'x') => {
                let hi = it.next().ok_or("truncated \\x escape")?;
                let lo = it.next().ok_or("truncated \\x escape")?;
                let hex = [hi, lo];
                let hex = std::str::from_utf8(&hex).map_err(|_| "bad \\x escape")?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| "bad \\x escape")?);
            }
            other => return Err(format!("unsupported escape {other:?}")),
        }
    }
    Ok(out)
}

/// An ordered bit sequence, MSB-first within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PayloadBits {
    bytes: Vec<u8>,
    len_bits: usize,
}

impl PayloadBits {
    pub fn new() -> Self {
        Self::default()
    }

    /// All bits of `bytes`, in order.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        PayloadBits {
            bytes: bytes.to_vec(),
            len_bits: bytes.len() * 8,
        }
    }

    /// Builds from individual bit values (each 0 or 1).
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut out = PayloadBits::new();
        for &b in bits {
            out.push_bit(b);
        }
        out
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    pub fn is_empty(&self) -> bool {
        self.len_bits == 0
    }

    /// Bit `i` as 0 or 1. Panics if out of range.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.len_bits, "bit index {i} out of range {}", self.len_bits);
        (self.bytes[i / 8] >> (7 - i % 8)) & 1
    }

    pub fn push_bit(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        if self.len_bits % 8 == 0 {
            self.bytes.push(0);
        }
        if bit != 0 {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 1 << (7 - self.len_bits % 8);
        }
        self.len_bits += 1;
    }

    pub fn push_byte(&mut self, value: u8) {
        if self.len_bits % 8 == 0 {
            self.bytes.push(value);
            self.len_bits += 8;
        } else {
            for i in (0..8).rev() {
                self.push_bit((value >> i) & 1);
            }
        }
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.push_byte(b);
        }
    }

    /// Appends a 32-bit big-endian value.
    pub fn push_u32_be(&mut self, value: u32) {
        self.push_bytes(&value.to_be_bytes());
    }

    /// Backing bytes; bits past `len_bits` in the final byte are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len_bits).map(move |i| self.bit(i))
    }

    /// Reads `n` bytes starting at bit offset `off` (any alignment).
    /// `None` if the range runs past the end.
    pub fn read_bytes(&self, off: usize, n: usize) -> Option<Vec<u8>> {
        if off + n * 8 > self.len_bits {
            return None;
        }
        if off % 8 == 0 {
            return Some(self.bytes[off / 8..off / 8 + n].to_vec());
        }
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut v = 0u8;
            for b in 0..8 {
                v = (v << 1) | self.bit(off + k * 8 + b);
            }
            out.push(v);
        }
        Some(out)
    }

    /// Reads a 32-bit big-endian value at bit offset `off`.
    pub fn read_u32_be(&self, off: usize) -> Option<u32> {
        let b = self.read_bytes(off, 4)?;
        Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// A fully resolved embedding-rate computation: the requested target,
/// the rate actually achieved with the chosen message length, and the
/// quantities they were derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub target: f64,
    pub achieved: f64,
    pub capacity_bits: u64,
    pub payload_bits: u64,
    pub message_bytes: u64,
}

/// Assembles the app's payload container around `message`.
///
/// Layouts (`len32` = 32-bit big-endian bit count of the next field):
///
/// * StegMaster — `open1 ‖ close1 ‖ password ‖ open2 ‖ message ‖ close2`,
///   all plaintext.
/// * DaVinci — `len32 ‖ sig ‖ len32 ‖ password ‖ len32 ‖ message`,
///   all plaintext; empty password encodes as a zero-length field.
/// * MobiStego — `start ‖ xor_keystream(message, password) ‖ end`.
/// * PocketStego — `message ‖ terminator`; the password is unused.
/// * StegM — `len32 ‖ message`, where the message is XOR-encrypted when
///   a password is given and plaintext otherwise.
pub fn build_payload(
    app: AppId,
    message: &[u8],
    password: &[u8],
    sigs: &SignatureTable,
) -> Result<PayloadBits> {
    sigs.validate()?;
    let mut out = PayloadBits::new();
    match app {
        AppId::StegMaster => {
            if password.is_empty() {
                return Err(Error::Argument("stegmaster requires a password".into()));
            }
            out.push_bytes(&sigs.open1);
            out.push_bytes(&sigs.close1);
            out.push_bytes(password);
            out.push_bytes(&sigs.open2);
            out.push_bytes(message);
            out.push_bytes(&sigs.close2);
        }
        AppId::DaVinci => {
            out.push_u32_be(sigs.sig.len() as u32 * 8);
            out.push_bytes(&sigs.sig);
            out.push_u32_be(password.len() as u32 * 8);
            out.push_bytes(password);
            out.push_u32_be(message.len() as u32 * 8);
            out.push_bytes(message);
        }
        AppId::MobiStego => {
            let encrypted = xor_keystream(message, password)?;
            out.push_bytes(&sigs.start);
            out.push_bytes(&encrypted);
            out.push_bytes(&sigs.end);
        }
        AppId::PocketStego => {
            if message.contains(&sigs.terminator) {
                return Err(Error::Ambiguous(format!(
                    "message contains the terminator byte 0x{:02x}; extraction would truncate",
                    sigs.terminator
                )));
            }
            out.push_bytes(message);
            out.push_byte(sigs.terminator);
        }
        AppId::StegM => {
            out.push_u32_be(message.len() as u32 * 8);
            if password.is_empty() {
                out.push_bytes(message);
            } else {
                out.push_bytes(&xor_keystream(message, password)?);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`build_payload`]: recovers the message, or `None` when
/// the bits do not match the app's container format. A format mismatch
/// is an ordinary outcome (it is the basis of signature detection), so
/// it is a value, not an error.
///
/// StegMaster and DaVinci carry the password in plaintext; when the
/// caller supplies a non-empty password it must equal the embedded one,
/// and an empty password skips the check. MobiStego requires the
/// password for decryption; a wrong one yields a format-level match
/// whose message decrypts to garbage, exactly as the real container
/// behaves.
pub fn parse_payload(
    app: AppId,
    bits: &PayloadBits,
    password: &[u8],
    sigs: &SignatureTable,
) -> Result<Option<Vec<u8>>> {
    sigs.validate()?;
    let outcome = match app {
        AppId::StegMaster => parse_stegmaster(bits, password, sigs),
        AppId::DaVinci => parse_davinci(bits, password, sigs),
        AppId::MobiStego => {
            match parse_mobistego(bits, sigs) {
                Some(cipher) => Some(xor_keystream(&cipher, password)?),
                None => None,
            }
        }
        AppId::PocketStego => parse_pocketstego(bits, sigs),
        AppId::StegM => parse_stegm(bits, password)?,
    };
    Ok(outcome)
}

fn parse_stegmaster(bits: &PayloadBits, password: &[u8], sigs: &SignatureTable) -> Option<Vec<u8>> {
    let lead = bits.read_bytes(0, 14)?;
    if lead[..7] != sigs.open1[..] || lead[7..] != sigs.close1[..] {
        return None;
    }
    // Password sits between close1 and the first occurrence of open2.
    let open2_at = find_bytes(bits, 14, &sigs.open2)?;
    let embedded_pwd = bits.read_bytes(14 * 8, open2_at - 14)?;
    if !password.is_empty() && password != embedded_pwd {
        return None;
    }
    let msg_start = open2_at + sigs.open2.len();
    let close2_at = find_bytes(bits, msg_start, &sigs.close2)?;
    bits.read_bytes(msg_start * 8, close2_at - msg_start)
}

fn parse_davinci(bits: &PayloadBits, password: &[u8], sigs: &SignatureTable) -> Option<Vec<u8>> {
    if bits.read_u32_be(0)? as usize != sigs.sig.len() * 8 {
        return None;
    }
    if bits.read_bytes(32, sigs.sig.len())? != sigs.sig {
        return None;
    }
    let mut off = 32 + sigs.sig.len() * 8;
    let pwd_bits = bits.read_u32_be(off)? as usize;
    off += 32;
    if pwd_bits % 8 != 0 {
        return None;
    }
    let embedded_pwd = bits.read_bytes(off, pwd_bits / 8)?;
    off += pwd_bits;
    if !password.is_empty() && password != embedded_pwd {
        return None;
    }
    let msg_bits = bits.read_u32_be(off)? as usize;
    off += 32;
    if msg_bits % 8 != 0 {
        return None;
    }
    bits.read_bytes(off, msg_bits / 8)
}

fn parse_mobistego(bits: &PayloadBits, sigs: &SignatureTable) -> Option<Vec<u8>> {
    if bits.read_bytes(0, 3)? != sigs.start {
        return None;
    }
    let end_at = find_bytes(bits, 3, &sigs.end)?;
    bits.read_bytes(24, end_at - 3)
}

fn parse_pocketstego(bits: &PayloadBits, sigs: &SignatureTable) -> Option<Vec<u8>> {
    let total = bits.len_bits() / 8;
    for i in 0..total {
        if bits.read_bytes(i * 8, 1)?[0] == sigs.terminator {
            return bits.read_bytes(0, i);
        }
    }
    None
}

fn parse_stegm(bits: &PayloadBits, password: &[u8]) -> Result<Option<Vec<u8>>> {
    let msg_bits = match bits.read_u32_be(0) {
        Some(v) => v as usize,
        None => return Ok(None),
    };
    if msg_bits % 8 != 0 {
        return Ok(None);
    }
    let body = match bits.read_bytes(32, msg_bits / 8) {
        Some(b) => b,
        None => return Ok(None),
    };
    if password.is_empty() {
        Ok(Some(body))
    } else {
        Ok(Some(xor_keystream(&body, password)?))
    }
}

/// First byte-aligned occurrence of `needle` at byte offset ≥ `from`;
/// returns the byte offset.
pub(crate) fn find_bytes(bits: &PayloadBits, from: usize, needle: &[u8]) -> Option<usize> {
    let total = bits.len_bits() / 8;
    if needle.is_empty() || total < needle.len() {
        return None;
    }
    for i in from..=total - needle.len() {
        if bits.read_bytes(i * 8, needle.len())? == needle {
            return Some(i);
        }
    }
    None
}

/// XORs `data` with the keystream derived from `password`. Applying it
/// twice with the same password restores the input.
pub fn xor_keystream(data: &[u8], password: &[u8]) -> Result<Vec<u8>> {
    let mut prng = prng_from_password(password)?;
    let mut out = data.to_vec();
    prng.xor_into(&mut out);
    Ok(out)
}

/// Closed-form bit length of [`build_payload`]'s output.
pub fn payload_len_bits(
    app: AppId,
    message_bytes: u64,
    password_bytes: u64,
    sigs: &SignatureTable,
) -> u64 {
    let sig_bytes = |v: &[u8]| v.len() as u64;
    match app {
        AppId::StegMaster => {
            8 * (sig_bytes(&sigs.open1)
                + sig_bytes(&sigs.close1)
                + password_bytes
                + sig_bytes(&sigs.open2)
                + message_bytes
                + sig_bytes(&sigs.close2))
        }
        AppId::DaVinci => 96 + 8 * (sig_bytes(&sigs.sig) + password_bytes + message_bytes),
        AppId::MobiStego => 8 * (sig_bytes(&sigs.start) + message_bytes + sig_bytes(&sigs.end)),
        AppId::PocketStego => 8 * message_bytes + 8,
        AppId::StegM => 32 + 8 * message_bytes,
    }
}

/// Picks the longest message that keeps the payload within
/// `target_rate` of the capacity: `lp_max = ⌊target · capacity⌋`,
/// `message_bytes` maximal with `payload_len_bits ≤ lp_max`. The
/// achieved rate therefore never exceeds the target.
pub fn message_len_for_target(
    app: AppId,
    capacity_bits: u64,
    target_rate: f64,
    password_bytes: u64,
    sigs: &SignatureTable,
) -> Result<RateSpec> {
    if !(target_rate > 0.0 && target_rate <= 1.0) {
        return Err(Error::Argument(format!(
            "target rate must be in (0, 1], got {target_rate}"
        )));
    }
    let lp_max = (target_rate * capacity_bits as f64).floor() as u64;
    let overhead = payload_len_bits(app, 0, password_bytes, sigs);
    if lp_max < overhead + 8 {
        return Err(Error::CapacityTooSmall(format!(
            "{app}: rate {target_rate} of {capacity_bits} bits allows {lp_max} payload bits, \
             but a 1-byte message needs {}",
            overhead + 8
        )));
    }
    let message_bytes = (lp_max - overhead) / 8;
    let payload_bits = payload_len_bits(app, message_bytes, password_bytes, sigs);
    debug_assert!(payload_bits <= lp_max);
    Ok(RateSpec {
        target: target_rate,
        achieved: payload_bits as f64 / capacity_bits as f64,
        capacity_bits,
        payload_bits,
        message_bytes,
    })
}
