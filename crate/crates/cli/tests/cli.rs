use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bbcreds_core::config::ProtocolConfig;
use bbcreds_core::credential::IssuerKeyPair;
use bbcreds_core::parties::{device_enroll_traced, AgePolicy, AttributeServiceProvider, Clock, EnrollmentInput, Evidence};
use bbcreds_core::store::save_record;
use bbcreds_core::synthbio::new_identity;
use chrono::NaiveDate;

const CLOCK: &str = "1760000000";

fn bbcreds(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbcreds"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn keygen(dir: &Path) {
    let out = bbcreds(dir, &["asp-keygen", "--out", "issuer", "--seed", "5"]);
    assert!(out.status.success(), "{}", text(&out));
}

fn enroll(dir: &Path, dob: &str, path: &str) -> Output {
    bbcreds(
        dir,
        &[
            "enroll", "--keys", "issuer", "--identity-seed", "9", "--dob", dob, "--out", path, "--seed", "21", "--clock", CLOCK,
        ],
    )
}

#[test]
fn keygen_writes_parseable_deterministic_keys() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    keygen(a.path());
    keygen(b.path());
    let public = fs::read_to_string(a.path().join("issuer.pub")).unwrap();
    assert_eq!(public.lines().count(), 1);
    assert_eq!(hex::decode(public.trim()).unwrap().len(), 32);
    let private = fs::read_to_string(a.path().join("issuer.key")).unwrap();
    assert_eq!(hex::decode(private.trim()).unwrap().len(), 32);
    assert_eq!(public, fs::read_to_string(b.path().join("issuer.pub")).unwrap());
    assert_eq!(private, fs::read_to_string(b.path().join("issuer.key")).unwrap());

    let expected = IssuerKeyPair::from_private(&hex::decode(private.trim()).unwrap().try_into().unwrap());
    assert_eq!(public.trim(), hex::encode(expected.public()));
}

#[test]
fn keygen_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path());
    let before = fs::read(dir.path().join("issuer.key")).unwrap();
    let out = bbcreds(dir.path(), &["asp-keygen", "--out", "issuer", "--seed", "6"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read(dir.path().join("issuer.key")).unwrap(), before);
    let out = bbcreds(dir.path(), &["asp-keygen", "--out", "issuer", "--seed", "6", "--force"]);
    assert!(out.status.success());
    assert_ne!(fs::read(dir.path().join("issuer.key")).unwrap(), before);
}

#[test]
fn keygen_without_seed_reports_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bbcreds(dir.path(), &["asp-keygen", "--out", "k"]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let seed: u64 = stderr.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let public = fs::read_to_string(dir.path().join("k.pub")).unwrap();
    assert_eq!(public.trim(), hex::encode(IssuerKeyPair::from_seed(seed).public()));
}

#[test]
fn enrollment_output_leaks_no_secrets() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path());
    let out = enroll(dir.path(), "1980-03-04", "r.bbc");
    assert!(out.status.success(), "{}", text(&out));

    // Replay the same enrollment in-process to learn the ephemeral values.
    let private = fs::read_to_string(dir.path().join("issuer.key")).unwrap();
    let keys = IssuerKeyPair::from_private(&hex::decode(private.trim()).unwrap().try_into().unwrap());
    let cfg = ProtocolConfig::default();
    let asp = AttributeServiceProvider::new(
        keys,
        AgePolicy::new(cfg.age_threshold, cfg.validity_seconds).unwrap(),
        Clock::Fixed(CLOCK.parse().unwrap()),
    );
    let profile = new_identity(9, cfg.dim).unwrap();
    let input = EnrollmentInput {
        profile: &profile,
        evidence: Evidence::MockDateOfBirth(NaiveDate::from_ymd_opt(1980, 3, 4).unwrap()),
        issuer_public: asp.public_key(),
    };
    let (record, secrets) = device_enroll_traced(&input, &asp, &cfg, 21).unwrap();
    let mut expected = vec![];
    save_record(&record, &mut expected).unwrap();
    assert_eq!(fs::read(dir.path().join("r.bbc")).unwrap(), expected);

    let inspect = bbcreds(dir.path(), &["inspect", "r.bbc"]);
    let all = format!("{}{}", text(&out), text(&inspect)).to_lowercase();
    for secret in [secrets.key.as_bytes(), secrets.secret.as_bytes()] {
        assert!(!all.contains(&hex::encode(secret)));
    }
}

#[test]
fn under_age_and_liveness_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path());
    let out = enroll(dir.path(), "2015-10-09", "young.bbc");
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out).contains("issuance denied"));
    assert!(!dir.path().join("young.bbc").exists());

    let out = bbcreds(
        dir.path(),
        &[
            "enroll", "--keys", "issuer", "--identity-seed", "1", "--approve", "--out", "x.bbc", "--seed", "1", "--liveness",
            "fail",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn auth_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path());
    assert!(enroll(dir.path(), "1980-03-04", "r.bbc").status.success());
    let auth = |extra: &[&str]| {
        let mut args = vec!["auth", "--record", "r.bbc", "--keys", "issuer", "--seed", "2"];
        args.extend_from_slice(extra);
        bbcreds(dir.path(), &args)
    };

    let out = auth(&["--identity-seed", "9", "--clock", "1760000500"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("GRANT age_over=18"));
    assert!(stdout.contains("age_over=18\n"));

    let out = auth(&["--impostor", "--clock", "1760000500"]);
    assert_eq!(out.status.code(), Some(5));
    let t = text(&out);
    assert!(t.contains("ExtractFailure") || t.contains("HashMismatch"), "{t}");

    let out = auth(&["--identity-seed", "9", "--clock", "1900000000"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8(out.stdout).unwrap().contains("DENY Expired"));

    let out = auth(&["--identity-seed", "9", "--clock", "1760000500", "--required-age", "21"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(text(&out).contains("ThresholdNotMet"));

    let out = auth(&["--identity-seed", "9", "--liveness", "fail"]);
    assert_eq!(out.status.code(), Some(4));

    let out = bbcreds(
        dir.path(),
        &["auth", "--record", "missing.bbc", "--keys", "issuer", "--identity-seed", "9", "--seed", "1"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inspect_reports_metadata_only() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path());
    assert!(enroll(dir.path(), "1980-03-04", "r.bbc").status.success());
    let out = bbcreds(dir.path(), &["inspect", "r.bbc"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("n=511 k=259 t=30"));
    assert!(stdout.contains("sketch_variant=xor"));
    assert!(stdout.contains("ciphertext_len=130"));
    for field in ["age_over", "subject_id", "issuer_id", "expires_at", "issued_at"] {
        assert!(!stdout.contains(field), "{field} printed");
    }

    let bytes = fs::read(dir.path().join("r.bbc")).unwrap();
    fs::write(dir.path().join("cut.bbc"), &bytes[..bytes.len() - 10]).unwrap();
    let out = bbcreds(dir.path(), &["inspect", "cut.bbc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("Truncated"));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    fs::write(dir.path().join("bad.bbc"), bad).unwrap();
    let out = bbcreds(dir.path(), &["inspect", "bad.bbc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("BadMagic"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path());
    fs::write(dir.path().join("proto.conf"), "# test\nvariant = encrypted\nage_threshold = 21\n").unwrap();
    let out = bbcreds(
        dir.path(),
        &[
            "enroll", "--keys", "issuer", "--identity-seed", "9", "--approve", "--out", "r.bbc", "--seed", "1", "--config",
            "proto.conf", "--age-threshold", "16",
        ],
    );
    assert!(out.status.success(), "{}", text(&out));
    let inspect = String::from_utf8(bbcreds(dir.path(), &["inspect", "r.bbc"]).stdout).unwrap();
    assert!(inspect.contains("sketch_variant=encrypted"));
    let out = bbcreds(
        dir.path(),
        &["auth", "--record", "r.bbc", "--keys", "issuer", "--identity-seed", "9", "--seed", "1", "--required-age", "16"],
    );
    assert!(String::from_utf8(out.stdout).unwrap().contains("GRANT age_over=16"));

    fs::write(dir.path().join("bad.conf"), "colour = blue\n").unwrap();
    let out = bbcreds(dir.path(), &["inspect", "r.bbc", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(0), "inspect ignores protocol config");
    let out = bbcreds(
        dir.path(),
        &["enroll", "--keys", "issuer", "--identity-seed", "9", "--approve", "--out", "s.bbc", "--seed", "1", "--config", "bad.conf"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        bbcreds(
            dir.path(),
            &["eval", "--sigmas", "0.006,0,0.004", "--trials", "1000", "--seed", "4", "--out", out],
        )
    };
    assert!(run("a.csv").status.success());
    assert!(run("b.csv").status.success());
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "sigma,trials,frr,frr_lo,frr_hi,far,far_lo,far_hi,seed");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.006,1000,"));
    assert!(lines[2].starts_with("0,1000,0.000000,"));
    assert!(lines[3].starts_with("0.004,"));

    let out = bbcreds(dir.path(), &["eval", "--sigmas", "-1", "--trials", "1000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bbcreds(dir.path(), &["eval", "--sigmas", "0.1", "--trials", "10", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
