//! Binary-level behavior: exit codes, the resolved-config contract on
//! stdout, byte-exact message extraction, and signature overrides.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stegbench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("stdout line is JSON"))
        .collect()
}

fn write_cover(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    let spec = dir.join(format!("{name}.spec.json"));
    fs::write(
        &spec,
        format!(
            r#"{{"count":1,"width":72,"height":72,"noise_sigma":0.0,"smoothing_radius":4,"seed":{seed}}}"#
        ),
    )
    .unwrap();
    let out_dir = dir.join(name);
    let out = run(&[
        "synth-covers",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    out_dir.join("synth_0000.png")
}

#[test]
fn exit_codes_follow_the_contract() {
    // Success and help/version paths exit 0.
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    // Usage problems exit 1: unknown subcommand, missing required flag,
    // and mode-specific validation.
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["embed", "--app", "stegm"]).status.code(), Some(1));
    assert_eq!(
        run(&["evaluate", "--grid", "--app", "stegm"]).status.code(),
        Some(1),
        "mode-specific missing flags are usage errors"
    );
    // Data problems exit 2: unreadable input file.
    let out = run(&[
        "extract",
        "--app",
        "stegm",
        "--in",
        "/nonexistent/image.png",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty(), "data errors are reported on stderr");
}

#[test]
fn first_stdout_line_is_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cover = write_cover(dir.path(), "cfg", 11);
    let msg = dir.path().join("m.txt");
    fs::write(&msg, "over the hills").unwrap();
    let stego = dir.path().join("s.png");
    let out = run(&[
        "--seed",
        "9",
        "embed",
        "--app",
        "pocketstego",
        "--in",
        cover.to_str().unwrap(),
        "--msg-file",
        msg.to_str().unwrap(),
        "--out",
        stego.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 2, "config line, then one result line");
    assert_eq!(lines[0]["command"], "embed");
    assert_eq!(lines[0]["seed"], 9);
    assert!(lines[0]["threads"].as_u64().unwrap() >= 1);
    assert_eq!(lines[0]["params"]["app"], "pocketstego");
    assert_eq!(lines[1]["message_bytes"], 14);
    assert!(lines[1]["achieved_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn extract_writes_message_bytes_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cover = write_cover(dir.path(), "bytes", 23);
    // A binary message with NULs and high bytes.
    let message: Vec<u8> = (0..=255u8).chain([0, 0, 7]).collect();
    let msg = dir.path().join("m.bin");
    fs::write(&msg, &message).unwrap();
    let stego = dir.path().join("s.png");
    let out = run(&[
        "embed",
        "--app",
        "stegm",
        "--in",
        cover.to_str().unwrap(),
        "--msg-file",
        msg.to_str().unwrap(),
        "--password",
        "orchard",
        "--out",
        stego.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let recovered = dir.path().join("out.bin");
    let out = run(&[
        "extract",
        "--app",
        "stegm",
        "--in",
        stego.to_str().unwrap(),
        "--password",
        "orchard",
        "--out",
        recovered.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&recovered).unwrap(), message);

    // The wrong password is a data error, not a silent wrong answer.
    let out = run(&[
        "extract",
        "--app",
        "stegm",
        "--in",
        stego.to_str().unwrap(),
        "--password",
        "meadow",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn signature_config_overrides_apply_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cover = write_cover(dir.path(), "sig", 37);
    let msg = dir.path().join("m.txt");
    fs::write(&msg, "wide river crossing").unwrap();
    let sig_cfg = dir.path().join("sigs.conf");
    fs::write(&sig_cfg, "davinci.sig = \"OTHERSIG\"\n").unwrap();

    let stego = dir.path().join("s.png");
    let out = run(&[
        "--sig-config",
        sig_cfg.to_str().unwrap(),
        "embed",
        "--app",
        "davinci",
        "--in",
        cover.to_str().unwrap(),
        "--msg-file",
        msg.to_str().unwrap(),
        "--out",
        stego.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    // The default table no longer recognizes the stego…
    let out = run(&["detect", "--app", "davinci", "--in", stego.to_str().unwrap()]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[1]["results"][0]["verdict"], false);

    // …while the overridden table does, and recovers the message.
    let out = run(&[
        "--sig-config",
        sig_cfg.to_str().unwrap(),
        "detect",
        "--app",
        "davinci",
        "--in",
        stego.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[1]["results"][0]["verdict"], true);
    let b64 = lines[1]["results"][0]["message_base64"].as_str().unwrap();
    assert_eq!(b64, {
        use base64::Engine as _;
        base64::engine::general_purpose::STANDARD.encode("wide river crossing")
    });
}

#[test]
fn predict_streams_rows_without_an_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    let ds = dir.path().join("ds");
    fs::write(
        &cfg,
        serde_json::json!({
            "source": {"synthetic": {"count": 8, "width": 48, "height": 48,
                        "noise_sigma": 0.0, "smoothing_radius": 4, "seed": 3}},
            "apps": ["stegm"],
            "rates": [0.2],
            "password_policy": {"fixed": "k3y"},
            "master_seed": 12,
            "output_dir": ds,
        })
        .to_string(),
    )
    .unwrap();
    assert!(run(&["gen-dataset", "--config", cfg.to_str().unwrap()]).status.success());

    let feats = dir.path().join("f.csv");
    assert!(run(&[
        "features",
        "--manifest",
        ds.join("manifest.jsonl").to_str().unwrap(),
        "--out",
        feats.to_str().unwrap(),
    ])
    .status
    .success());

    let model = dir.path().join("m.json");
    assert!(run(&[
        "train",
        "--features",
        feats.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
    ])
    .status
    .success());

    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--features",
        feats.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    // Config line + 16 row lines + summary.
    assert_eq!(lines.len(), 18);
    let flagged = lines[1..17]
        .iter()
        .filter(|l| l["predicted"] == 1)
        .count();
    assert_eq!(lines[17]["flagged"], flagged);
    assert_eq!(lines[17]["rows"], 16);
}
