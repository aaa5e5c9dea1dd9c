//! End-to-end tests of the `stegvoip` binary: exit codes, produced files
//! and the inspect/report cross-check.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stegvoip"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stegvoip-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const CLEAN: &str = r#"
[session]
seed = 11
duration_packets = 200
voice_auth_cadence = 5

[security]
user_id_a = "alice@example.net"
user_id_b = "bob@example.net"
"#;

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn simulate_writes_report_and_pcap() {
    let dir = tmp_dir("simulate");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let out = dir.join("out");
    let output = run(bin().arg("simulate").arg(&config).arg("--out").arg(&out));
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.starts_with("stegvoip-report v1"));
    assert!(report.contains("terminal side=a status=active"));
    assert!(out.join("trace.pcap").exists());
}

#[test]
fn dropped_session_still_exits_zero() {
    let dir = tmp_dir("dropped");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let out = dir.join("out");
    let output = run(bin()
        .arg("simulate")
        .arg(&config)
        .arg("--attacker")
        .arg("header_scrub")
        .arg("--out")
        .arg(&out));
    assert!(output.status.success());
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("status=dropped_timeout"));
}

#[test]
fn missing_config_is_io_error() {
    let output = run(bin().arg("simulate").arg("/nonexistent/steg.toml"));
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("config not found"), "stderr: {stderr}");
}

#[test]
fn invalid_config_is_config_error() {
    let dir = tmp_dir("badcfg");
    let config = write_config(
        &dir,
        "bad.toml",
        "[watermark]\ncapacity_bits_per_packet = 0\n",
    );
    let output = run(bin().arg("simulate").arg(&config));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn usage_error_is_exit_one() {
    let output = run(bin().arg("frobnicate"));
    assert_eq!(output.status.code(), Some(1));
    let output = run(&mut bin());
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn seed_override_changes_only_seeded_content() {
    let dir = tmp_dir("seed");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let out1 = dir.join("out1");
    let out2 = dir.join("out2");
    let out3 = dir.join("out3");
    assert!(
        run(bin().arg("simulate").arg(&config).arg("--out").arg(&out1))
            .status
            .success()
    );
    assert!(
        run(bin().arg("simulate").arg(&config).arg("--out").arg(&out2))
            .status
            .success()
    );
    assert!(run(bin()
        .arg("simulate")
        .arg(&config)
        .arg("--seed")
        .arg("999")
        .arg("--out")
        .arg(&out3))
    .status
    .success());
    let r1 = std::fs::read_to_string(out1.join("report.txt")).unwrap();
    let r2 = std::fs::read_to_string(out2.join("report.txt")).unwrap();
    let r3 = std::fs::read_to_string(out3.join("report.txt")).unwrap();
    assert_eq!(r1, r2, "same seed, same report");
    assert_ne!(r1, r3, "different seed, different voice and values");
    let p1 = std::fs::read(out1.join("trace.pcap")).unwrap();
    let p2 = std::fs::read(out2.join("trace.pcap")).unwrap();
    assert_eq!(p1, p2, "same seed, same capture");
    // Packet accounting does not depend on the seed on a clean channel.
    let packets = |r: &str| r.lines().filter(|l| l.starts_with("packet ")).count();
    assert_eq!(packets(&r1), packets(&r3));
}

#[test]
fn inspect_matches_simulation_report() {
    let dir = tmp_dir("inspect");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let out = dir.join("out");
    assert!(
        run(bin().arg("simulate").arg(&config).arg("--out").arg(&out))
            .status
            .success()
    );

    let output = run(bin()
        .arg("inspect")
        .arg(out.join("trace.pcap"))
        .arg("--map")
        .arg(&config));
    assert!(output.status.success());
    let listing = String::from_utf8_lossy(&output.stdout);

    // Every parameter the report saw as completed shows up in the
    // inspection, per direction, in order, with the same value.
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    let report_params: Vec<(String, String)> = report
        .lines()
        .filter(|l| l.starts_with("param-received "))
        .map(|l| {
            let get = |key: &str| {
                l.split_whitespace()
                    .find_map(|kv| kv.strip_prefix(key).map(str::to_string))
                    .unwrap()
            };
            (get("code="), get("value="))
        })
        .collect();
    let inspect_params: Vec<(String, String)> = listing
        .lines()
        .filter(|l| l.starts_with("param "))
        .map(|l| {
            let get = |key: &str| {
                l.split_whitespace()
                    .find_map(|kv| kv.strip_prefix(key).map(str::to_string))
                    .unwrap()
            };
            (get("code="), get("value="))
        })
        .collect();
    assert_eq!(report_params.len(), inspect_params.len());
    // Direction interleaving differs between the two listings; compare as
    // sorted multisets of (code, value).
    let mut a = report_params.clone();
    let mut b = inspect_params.clone();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn inspect_with_wrong_map_garbles() {
    let dir = tmp_dir("wrongmap");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let wrong = write_config(
        &dir,
        "wrong.toml",
        &format!("{CLEAN}\n[carrier_map]\npreset = \"scattered\"\n"),
    );
    let out = dir.join("out");
    assert!(
        run(bin().arg("simulate").arg(&config).arg("--out").arg(&out))
            .status
            .success()
    );
    let right_out = run(bin()
        .arg("inspect")
        .arg(out.join("trace.pcap"))
        .arg("--map")
        .arg(&config));
    let wrong_out = run(bin()
        .arg("inspect")
        .arg(out.join("trace.pcap"))
        .arg("--map")
        .arg(&wrong));
    assert!(wrong_out.status.success());
    let count = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .filter(|l| l.starts_with("param "))
            .count()
    };
    assert!(
        count(&wrong_out) < count(&right_out) / 2,
        "wrong map must garble"
    );
}

#[test]
fn inspect_empty_pcap_is_empty_and_ok() {
    let dir = tmp_dir("empty");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let pcap = dir.join("empty.pcap");
    stegvoip::pcap::pcap_write(&pcap, &[]).unwrap();
    let output = run(bin().arg("inspect").arg(&pcap).arg("--map").arg(&config));
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
}

#[test]
fn inspect_unreadable_pcap_fails() {
    let dir = tmp_dir("badpcap");
    let config = write_config(&dir, "clean.toml", CLEAN);
    let bogus = dir.join("bogus.pcap");
    std::fs::write(&bogus, b"not a capture").unwrap();
    let output = run(bin().arg("inspect").arg(&bogus).arg("--map").arg(&config));
    assert_eq!(output.status.code(), Some(3));
}
