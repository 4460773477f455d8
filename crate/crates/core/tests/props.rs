//! Cross-module property tests: container round trips, embedding
//! perturbation bounds, signature-detector recall, rate-control
//! granularity, and report-metric invariants.

use proptest::prelude::*;

use stegbench::datagen::make_cover;
use stegbench::embedders::{capacity_bits, embed, extract_bits, Prng};
use stegbench::evaluate::{p_e, ErrorReport};
use stegbench::imaging::{Channels, PixelImage};
use stegbench::payload::{
    build_payload, message_len_for_target, parse_payload, payload_len_bits, xor_keystream, AppId,
    SignatureTable,
};
use stegbench::sigdetect::detect;

fn sigs() -> SignatureTable {
    SignatureTable::default()
}

/// Per-sample change bound of each app's embedding operation, applied
/// to the channels it may touch at all.
fn max_sample_delta(app: AppId) -> i16 {
    match app {
        AppId::StegMaster => 9, // decimal-digit replacement, ±9 worst case
        AppId::MobiStego => 3,  // two low bits per color channel
        AppId::DaVinci | AppId::PocketStego | AppId::StegM => 1, // single LSB
    }
}

/// Channel indices (within a pixel) the app is allowed to modify.
fn writable_channels(app: AppId, channels: Channels) -> Vec<usize> {
    match (app, channels) {
        (AppId::StegMaster | AppId::MobiStego, _) => vec![0, 1, 2],
        (AppId::DaVinci, _) => vec![3],
        (AppId::PocketStego, _) => vec![2],
        (AppId::StegM, Channels::Gray) => vec![0],
        (AppId::StegM, _) => vec![2],
    }
}

fn app_strategy() -> impl Strategy<Value = AppId> {
    prop::sample::select(AppId::ALL.to_vec())
}

/// Random small cover imagery: raw bytes, app-appropriate channel
/// layout applied afterwards via `make_cover`.
fn cover_strategy() -> impl Strategy<Value = PixelImage> {
    (40u32..56, 40u32..56, any::<u64>()).prop_map(|(w, h, seed)| {
        let mut samples = vec![0u8; (w * h * 3) as usize];
        Prng::from_seed(seed).xor_into(&mut samples);
        PixelImage::from_samples(w, h, Channels::Rgb, samples).unwrap()
    })
}

proptest! {
    /// Containers survive a build → parse cycle without touching pixels.
    #[test]
    fn payload_container_round_trip(
        app in app_strategy(),
        raw_msg in prop::collection::vec(any::<u8>(), 0..64),
        pwd in prop::collection::vec(prop::sample::select(b"pw0rd$".to_vec()), 1..10),
    ) {
        let sigs = sigs();
        let msg = match app {
            AppId::PocketStego => raw_msg
                .iter()
                .map(|&b| 32 + b % 95)
                .map(|b| if b == b'#' { b'$' } else { b })
                .collect::<Vec<u8>>(),
            _ => raw_msg,
        };
        prop_assume!(!msg.windows(sigs.close2.len()).any(|w| w == &sigs.close2[..]));
        if app == AppId::MobiStego {
            let ct = xor_keystream(&msg, &pwd).unwrap();
            prop_assume!(!ct.windows(sigs.end.len()).any(|w| w == &sigs.end[..]));
        }
        let payload = build_payload(app, &msg, &pwd, &sigs).unwrap();
        prop_assert_eq!(
            payload.len_bits() as u64,
            payload_len_bits(app, msg.len() as u64, pwd.len() as u64, &sigs)
        );
        let back = parse_payload(app, &payload, &pwd, &sigs).unwrap();
        prop_assert_eq!(back.as_deref(), Some(&msg[..]));
    }

    /// Embedding touches only the app's carrier channels, moves no
    /// sample further than the technique's worst case, and preserves
    /// geometry; extraction then returns the exact message.
    #[test]
    fn embedding_is_bounded_and_reversible(
        app in app_strategy(),
        cover_rgb in cover_strategy(),
        seed in any::<u64>(),
    ) {
        let sigs = sigs();
        let mut rng = Prng::from_seed(seed);
        let pwd: Vec<u8> = (0..1 + rng.next_below(8))
            .map(|_| b'a' + rng.next_below(26) as u8)
            .collect();
        let mut msg = vec![0u8; rng.next_below(40) as usize];
        rng.xor_into(&mut msg);
        if app == AppId::PocketStego {
            for b in &mut msg {
                *b = 32 + *b % 95;
                if *b == b'#' {
                    *b = b'$';
                }
            }
        }
        prop_assume!(!msg.windows(sigs.close2.len()).any(|w| w == &sigs.close2[..]));
        if app == AppId::MobiStego {
            let ct = xor_keystream(&msg, &pwd).unwrap();
            prop_assume!(!ct.windows(sigs.end.len()).any(|w| w == &sigs.end[..]));
        }

        let cover = make_cover(app, &cover_rgb).unwrap();
        let payload = build_payload(app, &msg, &pwd, &sigs).unwrap();
        prop_assume!((payload.len_bits() as u64) <= capacity_bits(app, &cover).unwrap());
        let result = embed(app, &cover, &payload, &pwd).unwrap();
        let stego = &result.stego;

        prop_assert_eq!(stego.width(), cover.width());
        prop_assert_eq!(stego.height(), cover.height());
        prop_assert_eq!(stego.channels(), cover.channels());

        let n_ch = match cover.channels() {
            Channels::Gray => 1,
            Channels::Rgb => 3,
            Channels::Rgba => 4,
        };
        let writable = writable_channels(app, cover.channels());
        let bound = max_sample_delta(app);
        for (i, (&a, &b)) in cover.samples().iter().zip(stego.samples()).enumerate() {
            let delta = (i16::from(a) - i16::from(b)).abs();
            if writable.contains(&(i % n_ch)) {
                prop_assert!(
                    delta <= bound,
                    "sample {i}: |{a} − {b}| > {bound} for {}",
                    app.name()
                );
            } else {
                prop_assert_eq!(a, b, "sample {}: untouched channel modified", i);
            }
        }

        let bits = extract_bits(app, stego, payload.len_bits() as u64, &pwd).unwrap();
        let back = parse_payload(app, &bits, &pwd, &sigs).unwrap();
        prop_assert_eq!(back.as_deref(), Some(&msg[..]));
    }

    /// Every signature detector recognizes the stegos of its own app and
    /// recovers what the app would: the plaintext for StegMaster,
    /// DaVinci and PocketStego, the raw ciphertext for MobiStego.
    #[test]
    fn detectors_recall_planted_payloads(
        cover_rgb in cover_strategy(),
        seed in any::<u64>(),
    ) {
        let sigs = sigs();
        for app in [AppId::StegMaster, AppId::DaVinci, AppId::MobiStego, AppId::PocketStego] {
            let mut rng = Prng::from_seed(seed ^ app.name().len() as u64);
            let pwd: Vec<u8> = (0..1 + rng.next_below(6))
                .map(|_| b'a' + rng.next_below(26) as u8)
                .collect();
            let mut msg = vec![0u8; 1 + rng.next_below(24) as usize];
            rng.xor_into(&mut msg);
            for b in &mut msg {
                *b = 32 + *b % 95; // printable, also signature-collision free
                if *b == b'#' {
                    *b = b'$';
                }
            }
            let cover = make_cover(app, &cover_rgb).unwrap();
            let payload = build_payload(app, &msg, &pwd, &sigs).unwrap();
            let stego = embed(app, &cover, &payload, &pwd).unwrap().stego;
            let det = detect(app, &stego, &sigs).unwrap();
            prop_assert!(det.verdict, "{} missed its own stego", app.name());
            let expect = if app == AppId::MobiStego {
                xor_keystream(&msg, &pwd).unwrap()
            } else {
                msg.clone()
            };
            prop_assert_eq!(det.recovered_message.as_deref(), Some(&expect[..]));
        }
    }

    /// Rate control picks the largest message that still fits: the
    /// payload obeys the target, and one more byte would break it.
    #[test]
    fn rate_targeting_is_tight(
        app in app_strategy(),
        capacity in 2_048u64..200_000,
        rate_milli in 10u64..=1000,
        pwd_len in 0u64..16,
    ) {
        let sigs = sigs();
        let rate = rate_milli as f64 / 1000.0;
        match message_len_for_target(app, capacity, rate, pwd_len, &sigs) {
            Ok(spec) => {
                prop_assert_eq!(spec.capacity_bits, capacity);
                prop_assert_eq!(
                    spec.payload_bits,
                    payload_len_bits(app, spec.message_bytes, pwd_len, &sigs)
                );
                prop_assert!(spec.achieved <= spec.target);
                prop_assert!(spec.payload_bits as f64 <= rate * capacity as f64);
                // One more message byte would overshoot the target.
                let bumped = payload_len_bits(app, spec.message_bytes + 1, pwd_len, &sigs);
                prop_assert!(bumped as f64 > rate * capacity as f64);
            }
            // Legal outcome: the overhead alone exceeds the budget.
            Err(_) => {
                let floor = payload_len_bits(app, 0, pwd_len, &sigs);
                prop_assert!(floor as f64 > rate * capacity as f64);
            }
        }
    }

    /// p_e is symmetric under flipping truth and predictions together.
    #[test]
    fn error_rate_is_label_flip_symmetric(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 4..200),
    ) {
        let truth: Vec<u8> = pairs.iter().map(|(t, _)| u8::from(*t)).collect();
        let pred: Vec<u8> = pairs.iter().map(|(_, p)| u8::from(*p)).collect();
        prop_assume!(truth.iter().any(|&t| t == 0) && truth.iter().any(|&t| t == 1));
        let a = p_e(&truth, &pred).unwrap();
        let truth_f: Vec<u8> = truth.iter().map(|t| 1 - t).collect();
        let pred_f: Vec<u8> = pred.iter().map(|p| 1 - p).collect();
        let b = p_e(&truth_f, &pred_f).unwrap();
        prop_assert_eq!(a.p_e, b.p_e);
        prop_assert_eq!(a.p_md, b.p_fa);
        prop_assert_eq!(a.p_fa, b.p_md);
    }

    /// Error reports survive JSON with every float bit intact.
    #[test]
    fn reports_serialize_losslessly(
        md_bits in 0u64..(1u64 << 53),
        fa_bits in 0u64..(1u64 << 53),
        n_cover in 1usize..10_000,
        n_stego in 1usize..10_000,
    ) {
        let report = ErrorReport {
            p_md: md_bits as f64 / (1u64 << 53) as f64,
            p_fa: fa_bits as f64 / (1u64 << 53) as f64,
            p_e: (md_bits as f64 + fa_bits as f64) / 2.0 / (1u64 << 53) as f64,
            n_cover,
            n_stego,
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: ErrorReport = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(report, back);
    }
}
