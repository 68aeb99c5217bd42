use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bbcreds_core::config::parse_kv;
use bbcreds_core::credential::IssuerKeyPair;
use bbcreds_core::eval::{sweep, EvalError};
use bbcreds_core::parties::{
    device_authenticate, device_enroll, rp_check_access, AccessDecision, AgePolicy, AttributeServiceProvider,
    AuthError, Clock, EnrollError, EnrollmentInput, Evidence,
};
use bbcreds_core::store::{load_record, save_record, DeviceRecord, StoreError, FORMAT_VERSION};
use bbcreds_core::synthbio::{new_identity, sample_genuine, sample_impostor, NoiseModel};
use bbcreds_core::ProtocolConfig;
use chrono::NaiveDate;

use crate::{CliError, Common};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Uses `--seed` if given, otherwise draws one and reports it on stderr.
fn resolve_seed(common: &Common) -> u64 {
    common.seed.unwrap_or_else(|| {
        let seed = rand::random();
        eprintln!("seed: {seed}");
        seed
    })
}

fn clock(common: &Common) -> Clock {
    common.clock.map_or(Clock::System, Clock::Fixed)
}

/// Defaults, then the config file, then flags.
fn load_config(common: &Common) -> Result<ProtocolConfig, CliError> {
    let mut cfg = ProtocolConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let pairs = parse_kv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for (k, v) in pairs {
            let known = cfg
                .set(&k, &v)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            if !known {
                return Err(CliError::Usage(format!("{}: unknown key `{k}`", path.display())));
            }
        }
    }
    let flags = [
        ("liveness", common.liveness.clone()),
        ("variant", common.variant.clone()),
        ("age_threshold", common.age_threshold.map(|a| a.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v).map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn read_hex32(path: &Path) -> Result<[u8; 32], CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bytes = hex::decode(text.trim()).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    bytes.try_into().map_err(|_| CliError::Format {
        path: path.to_path_buf(),
        reason: "expected 32 bytes of hex".into(),
    })
}

fn write_new(path: &Path, contents: &[u8], force: bool, private: bool) -> Result<(), CliError> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = private;
    let mut f = opts.open(path).map_err(io_err(path))?;
    f.write_all(contents).map_err(io_err(path))
}

pub fn asp_keygen(common: &Common, out: &Path, force: bool) -> Result<(), CliError> {
    let keys = IssuerKeyPair::from_seed(resolve_seed(common));
    let public = with_ext(out, "pub");
    let private = with_ext(out, "key");
    if !force {
        for p in [&public, &private] {
            if p.exists() {
                return Err(CliError::Usage(format!(
                    "{} exists; pass --force to overwrite",
                    p.display()
                )));
            }
        }
    }
    let public_hex = hex::encode(keys.public());
    write_new(&private, format!("{}\n", hex::encode(keys.private())).as_bytes(), force, true)?;
    write_new(&public, format!("{public_hex}\n").as_bytes(), force, false)?;
    println!("{public_hex}");
    Ok(())
}

fn parse_dob(s: &str) -> Result<NaiveDate, CliError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| CliError::Usage(format!("--dob {s}: {e}")))
}

pub fn enroll(
    common: &Common,
    keys: &Path,
    identity_seed: u64,
    dob: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let evidence = match dob {
        Some(d) => Evidence::MockDateOfBirth(parse_dob(d)?),
        None => Evidence::AlwaysApprove,
    };
    let seed = resolve_seed(common);
    let issuer = IssuerKeyPair::from_private(&read_hex32(&with_ext(keys, "key"))?);
    let policy = AgePolicy::new(cfg.age_threshold, cfg.validity_seconds).map_err(|e| CliError::Usage(e.to_string()))?;
    let asp = AttributeServiceProvider::new(issuer, policy, clock(common));
    let profile = new_identity(identity_seed, cfg.dim).map_err(|e| CliError::Usage(e.to_string()))?;
    let input = EnrollmentInput {
        profile: &profile,
        evidence,
        issuer_public: asp.public_key(),
    };
    let record = device_enroll(&input, &asp, &cfg, seed).map_err(|e| match e {
        EnrollError::LivenessFailed(_) => CliError::Liveness,
        EnrollError::IssuanceDenied(reason) => CliError::IssuanceDenied(format!("{reason:?}")),
        other => CliError::Usage(other.to_string()),
    })?;
    let file = File::create(out).map_err(io_err(out))?;
    let mut w = BufWriter::new(file);
    let written = save_record(&record, &mut w)
        .and_then(|n| w.flush().map(|_| n).map_err(StoreError::from))
        .map_err(|e| CliError::Format {
            path: out.to_path_buf(),
            reason: e.to_string(),
        })?;
    println!("enrolled: {} ({written} bytes, sketch {})", out.display(), cfg.variant.name());
    Ok(())
}

fn read_record(path: &Path) -> Result<DeviceRecord, CliError> {
    let mut f = File::open(path).map_err(io_err(path))?;
    load_record(&mut f).map_err(|e| match e {
        StoreError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Format {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

pub struct AuthArgs {
    pub record: PathBuf,
    pub keys: PathBuf,
    pub identity_seed: Option<u64>,
    pub impostor: bool,
    pub sigma: Option<f64>,
    pub required_age: Option<u32>,
}

pub fn auth(common: &Common, args: &AuthArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let record = read_record(&args.record)?;
    let issuer_public = read_hex32(&with_ext(&args.keys, "pub"))?;
    let seed = resolve_seed(common);
    let dim = record.helper.quant.dim();

    let sample = if args.impostor {
        sample_impostor(seed, dim).map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        let identity_seed = args
            .identity_seed
            .ok_or_else(|| CliError::Usage("--identity-seed is required".into()))?;
        let sigma = args.sigma.unwrap_or(cfg.sigma_default);
        let noise = NoiseModel::new(sigma).map_err(|e| CliError::Usage(format!("--sigma {sigma}: {e}")))?;
        let profile = new_identity(identity_seed, dim).map_err(|e| CliError::Usage(e.to_string()))?;
        sample_genuine(&profile, noise, seed)
    };

    let cred = device_authenticate(&sample, &record, &cfg.liveness).map_err(|e| match e {
        AuthError::LivenessFailed => CliError::Liveness,
        other => CliError::Auth(other.reason().to_string()),
    })?;
    println!("issuer_id={}", hex::encode(cred.issuer_id));
    println!("subject_id={}", hex::encode(cred.subject_id));
    println!("age_over={}", cred.age_over);
    println!("issued_at={}", cred.issued_at);
    println!("expires_at={}", cred.expires_at);

    let required = args.required_age.unwrap_or(cfg.age_threshold);
    match rp_check_access(&cred, &issuer_public, clock(common).now(), required) {
        AccessDecision::Grant => {
            println!("GRANT age_over={}", cred.age_over);
            Ok(())
        }
        AccessDecision::Deny(reason) => Err(CliError::Deny(reason.as_str().to_string())),
    }
}

pub fn eval(common: &Common, sigmas: &[f64], trials: usize, out: Option<&Path>) -> Result<(), CliError> {
    if let Some(bad) = sigmas.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(CliError::Usage(format!("invalid sigma {bad}")));
    }
    let cfg = load_config(common)?;
    let seed = resolve_seed(common);
    let map_eval = |path: PathBuf| {
        move |e: EvalError| match e {
            EvalError::Io(source) => CliError::Io { path, source },
            other => CliError::Usage(other.to_string()),
        }
    };
    match out {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            sweep(&cfg, sigmas, trials, seed, &mut w).map_err(map_eval(path.to_path_buf()))?;
            eprintln!("wrote {} rows to {}", sigmas.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            sweep(&cfg, sigmas, trials, seed, &mut lock).map_err(map_eval(PathBuf::from("<stdout>")))?;
        }
    }
    Ok(())
}

pub fn inspect(path: &Path) -> Result<(), CliError> {
    let size = fs::metadata(path).map_err(io_err(path))?.len();
    let record = read_record(path)?;
    let h = &record.helper;
    println!("format_version={FORMAT_VERSION}");
    println!("size={size}");
    println!("helper_version={}", h.version);
    println!("n={} k={} t={}", h.code.n, h.code.k, h.code.t);
    println!("dim={}", h.quant.dim());
    println!("sketch_variant={}", record.sketch.variant().name());
    println!("sketch_len={}", record.sketch.payload().len());
    println!("digest={}", hex::encode(record.digest.0));
    println!("ciphertext_len={}", record.bound.ciphertext.len());
    Ok(())
}
