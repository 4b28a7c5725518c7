//! `faith`: command-line front end.
//!
//! Exit codes: 0 success, 1 error, 2 verification failed or ledger
//! inconsistent, 3 decryption or authentication failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::rngs::OsRng;
use serde_json::{json, Value};

use faith_core::bench::{self, BenchConfig, Scenario, MIB};
use faith_core::commitment::HashAlg;
use faith_core::envelope::EnvelopeError;
use faith_core::ledger::{audit_file, Ledger, BLOCK_LOG};
use faith_core::pre::{keygen, KeyPair, PublicKey};
use faith_core::proofs::{Reason, DEFAULT_MAX_DEPTH};
use faith_core::protocol::{
    do_grant, do_upload, du_fetch, du_request, du_retrieve, du_verify, key_digest, sp_process_grant, ta_setup,
    ProtocolError, SetupConfig, SpFault, StorageProvider, SystemParams,
};
use faith_core::{Bls12, GroupCtx};

#[derive(Parser)]
#[command(name = "faith", version, about = "Share large encrypted files with verifiable storage and re-encryption")]
struct Cli {
    /// Print one JSON object on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Dirs {
    /// Directory with published system parameters.
    #[arg(long, default_value = "params")]
    params: PathBuf,
    /// Directory holding the storage provider and ledger state.
    #[arg(long, default_value = "store")]
    store: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate and publish system parameters.
    Setup {
        #[arg(long, default_value = "params")]
        out: PathBuf,
        /// Envelope chunk size in bytes (power of two, 4 KiB to 4 MiB).
        #[arg(long, default_value_t = faith_core::envelope::DEFAULT_CHUNK_SIZE)]
        chunk_size: u32,
        /// Largest supported Merkle tree depth.
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: u32,
    },
    /// Generate a key pair: writes OUT (secret) and OUT with extension .pub.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt a file and store it at the storage provider.
    Upload {
        #[command(flatten)]
        dirs: Dirs,
        /// Owner secret key.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        file: PathBuf,
        /// File id; random when omitted.
        #[arg(long)]
        id: Option<String>,
    },
    /// Grant a user access to a stored file.
    Grant {
        #[command(flatten)]
        dirs: Dirs,
        /// Owner secret key.
        #[arg(long)]
        key: PathBuf,
        /// Grantee public key.
        #[arg(long)]
        to: PathBuf,
        #[arg(long)]
        file: String,
    },
    /// Storage provider: re-encrypt, prove and publish a grant.
    Process {
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        grant: String,
        /// Misbehave for testing: corrupt-data[:OFFSET], corrupt-reenc,
        /// statement-mismatch or stale-proof:FILE.
        #[arg(long)]
        fault: Option<String>,
    },
    /// Verify and decrypt a granted file.
    Retrieve {
        #[command(flatten)]
        dirs: Dirs,
        /// Grantee secret key.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        grant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the published proof for a grant without decrypting.
    Verify {
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        grant: String,
    },
    /// Check the ledger's digest chain.
    Audit {
        #[arg(long, default_value = "store")]
        store: PathBuf,
    },
    /// Run benchmarks and write CSV and SVG plots.
    Bench {
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Comma-separated scenario names; all when omitted.
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        /// Sizes in MiB for encryption and verification scenarios.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// Sizes in MiB proven from scratch per repetition.
        #[arg(long, value_delimiter = ',')]
        prove_sizes: Vec<u64>,
        #[arg(long, default_value_t = bench::MIN_REPS)]
        reps: u32,
        #[arg(long, default_value_t = 1000)]
        pre_iters: u32,
        #[arg(long)]
        threads: Option<usize>,
        /// Chunk size used for proven files.
        #[arg(long, default_value_t = faith_core::envelope::MAX_CHUNK_SIZE)]
        chunk_size: u32,
        #[arg(long, default_value_t = 12)]
        max_depth: u32,
        /// Add sizes up to 5 GiB.
        #[arg(long)]
        large: bool,
        /// Only re-render plots from an existing CSV.
        #[arg(long)]
        plots_from: Option<PathBuf>,
    },
}

/// An error with its exit code and, for verification, the reason.
struct Failure {
    code: u8,
    kind: &'static str,
    reason: Option<Reason>,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let (code, kind, reason) = match err.downcast_ref::<ProtocolError>() {
            Some(ProtocolError::VerificationFailed(r)) => (2, "verification_failed", Some(r.reason)),
            Some(ProtocolError::Decrypt(EnvelopeError::AuthFailure(_))) => (3, "auth_failure", None),
            Some(ProtocolError::Decrypt(_)) => (3, "decrypt_failure", None),
            _ => (1, "error", None),
        };
        Failure { code, kind, reason, err }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        anyhow::Error::new(e).into()
    }
}

type Outcome = Result<(Value, String), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit 1; 2 is reserved for failed verification.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let json = cli.json;
    match run(cli.cmd) {
        Ok((v, text)) => {
            if json {
                let mut v = v;
                v["ok"] = json!(true);
                println!("{v}");
            } else {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if json {
                let mut e = json!({ "kind": f.kind, "message": format!("{:#}", f.err) });
                if let Some(r) = f.reason {
                    e["reason"] = json!(r.as_str());
                }
                println!("{}", json!({ "ok": false, "error": e }));
            } else {
                eprintln!("faith: {:#}", f.err);
            }
            ExitCode::from(f.code)
        }
    }
}

fn ctx() -> GroupCtx<Bls12> {
    GroupCtx::bls12_381()
}

fn load_params(dir: &Path) -> anyhow::Result<Arc<SystemParams<Bls12>>> {
    let p = SystemParams::load(ctx(), dir).with_context(|| format!("loading parameters from {}", dir.display()))?;
    Ok(Arc::new(p))
}

struct Node {
    params: Arc<SystemParams<Bls12>>,
    sp: StorageProvider<Bls12>,
    ledger: Ledger,
}

fn open(dirs: &Dirs) -> anyhow::Result<Node> {
    let params = load_params(&dirs.params)?;
    let sp = StorageProvider::open(&dirs.store.join("sp"), params.clone())?;
    let ledger = Ledger::open(&dirs.store.join("ledger"))?;
    Ok(Node { params, sp, ledger })
}

fn read_keypair(path: &Path) -> anyhow::Result<KeyPair<Bls12>> {
    let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
    KeyPair::from_secret_bytes(&ctx(), &bytes).with_context(|| format!("{} is not a secret key", path.display()))
}

fn read_public(path: &Path) -> anyhow::Result<PublicKey<Bls12>> {
    let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
    PublicKey::from_bytes(&ctx().engine, &bytes).with_context(|| format!("{} is not a public key", path.display()))
}

fn parse_fault(s: &str) -> anyhow::Result<SpFault> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    Ok(match name {
        "corrupt-data" => SpFault::CorruptData { offset: arg.map(str::parse).transpose()?.unwrap_or(0), mask: 1 },
        "corrupt-reenc" => SpFault::CorruptReenc { delta: 1 },
        "statement-mismatch" => SpFault::StatementMismatch { delta: 1 },
        "stale-proof" => SpFault::StaleProof { source: arg.ok_or_else(|| anyhow!("stale-proof needs :FILE"))?.into() },
        _ => bail!("unknown fault {s:?}"),
    })
}

fn run(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Setup { out, chunk_size, max_depth } => {
            let cfg = SetupConfig { chunk_size, max_depth, alg: HashAlg::Poseidon };
            let params = ta_setup(ctx(), cfg)?;
            params.publish(&out)?;
            let digest = hex::encode(params.digest());
            Ok((
                json!({ "params_dir": out, "params_digest": digest, "chunk_size": chunk_size, "max_depth": max_depth }),
                format!("parameters written to {} (digest {digest})", out.display()),
            ))
        }
        Cmd::Keygen { out } => {
            let kp = keygen(&ctx(), &mut OsRng);
            let e = ctx().engine;
            let public = out.with_extension("pub");
            write_new(&out, &kp.sk.to_bytes(&e))?;
            write_new(&public, &kp.pk.to_bytes(&e))?;
            let id = hex::encode(key_digest(&e, &kp.pk));
            Ok((
                json!({ "secret": out, "public": public, "key_digest": id }),
                format!("wrote {} and {} (key {id})", out.display(), public.display()),
            ))
        }
        Cmd::Upload { dirs, key, file, id } => {
            let node = open(&dirs)?;
            let owner = read_keypair(&key)?;
            let r = do_upload(&node.params, &owner, &file, id.as_deref(), &node.sp, &node.ledger, &mut OsRng)?;
            let root = r.object.commitment.root.to_hex();
            Ok((
                json!({ "file_id": r.object.id, "root": root, "chunks": r.object.commitment.n, "height": r.height }),
                format!("stored {} as {} ({} chunks, ledger height {})", file.display(), r.object.id, r.object.commitment.n, r.height),
            ))
        }
        Cmd::Grant { dirs, key, to, file } => {
            let node = open(&dirs)?;
            let owner = read_keypair(&key)?;
            let grantee = read_public(&to)?;
            let g = do_grant(&node.params, &owner, &du_request(&grantee, &file), &node.sp, &mut OsRng)?;
            Ok((json!({ "grant_id": g.id, "file_id": g.file_id, "status": g.status.as_str() }), g.id))
        }
        Cmd::Process { dirs, grant, fault } => {
            let node = open(&dirs)?;
            node.sp.set_fault(fault.as_deref().map(parse_fault).transpose()?);
            let g = sp_process_grant(&node.sp, &grant, &node.ledger, &mut OsRng)?;
            let bytes = g.proof.as_ref().map_or(0, Vec::len);
            Ok((
                json!({ "grant_id": g.id, "status": g.status.as_str(), "proof_bytes": bytes }),
                format!("grant {} published ({bytes}-byte proof)", g.id),
            ))
        }
        Cmd::Retrieve { dirs, key, grant, out } => {
            let node = open(&dirs)?;
            let user = read_keypair(&key)?;
            let r = du_retrieve(&node.params, &user, &node.sp, &node.ledger, &grant, &out)?;
            let ms = r.verify.elapsed.as_secs_f64() * 1e3;
            Ok((
                json!({ "grant_id": grant, "out": out, "bytes": r.bytes, "verify_ms": ms }),
                format!("verified in {ms:.1} ms, wrote {} bytes to {}", r.bytes, out.display()),
            ))
        }
        Cmd::Verify { dirs, grant } => {
            let node = open(&dirs)?;
            let f = du_fetch(&node.sp, &node.ledger, &grant)?;
            match du_verify(&node.params, &f) {
                Ok(r) => {
                    node.sp.record_outcome(&grant, Ok(()))?;
                    let ms = r.elapsed.as_secs_f64() * 1e3;
                    Ok((
                        json!({
                            "grant_id": grant,
                            "verify_ms": ms,
                            "backend_verifications": r.stats.backend_verifications,
                            "pairings": r.stats.pairings,
                        }),
                        format!("grant {grant}: proof verified in {ms:.1} ms"),
                    ))
                }
                Err(rej) => {
                    node.sp.record_outcome(&grant, Err(&rej.to_string()))?;
                    Err(ProtocolError::VerificationFailed(rej).into())
                }
            }
        }
        Cmd::Audit { store } => {
            let path = store.join("ledger").join(BLOCK_LOG);
            let report = audit_file(&path).with_context(|| path.display().to_string())?;
            let v = serde_json::to_value(&report).map_err(anyhow::Error::from)?;
            if report.is_clean() {
                Ok((v, format!("ledger clean: {} blocks", report.blocks)))
            } else {
                Err(Failure {
                    code: 2,
                    kind: "ledger_inconsistent",
                    reason: None,
                    err: anyhow!(
                        "ledger inconsistent at height {}: {}",
                        report.first_bad.unwrap(),
                        report.detail.unwrap_or_default()
                    ),
                })
            }
        }
        Cmd::Bench {
            out,
            scenarios,
            sizes,
            prove_sizes,
            reps,
            pre_iters,
            threads,
            chunk_size,
            max_depth,
            large,
            plots_from,
        } => {
            std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
            if let Some(csv) = plots_from {
                let plots = bench::write_plots(&csv, &out)?;
                return Ok((json!({ "plots": plots }), format!("rendered {} plots into {}", plots.len(), out.display())));
            }
            let mut cfg = BenchConfig::new(out.join("work"));
            if !scenarios.is_empty() {
                cfg.scenarios = scenarios
                    .iter()
                    .map(|s| Scenario::parse(s).ok_or_else(|| anyhow!("unknown scenario {s:?}")))
                    .collect::<anyhow::Result<_>>()?;
            }
            if !sizes.is_empty() {
                cfg.se_sizes = sizes.iter().map(|m| m * MIB).collect();
                cfg.verify_sizes = cfg.se_sizes.clone();
            }
            if !prove_sizes.is_empty() {
                cfg.prove_sizes = prove_sizes.iter().map(|m| m * MIB).collect();
            }
            cfg.reps = reps;
            cfg.pre_iters = pre_iters;
            if let Some(t) = threads {
                cfg.threads = t;
            }
            cfg.setup.chunk_size = chunk_size;
            cfg.setup.max_depth = max_depth;
            if large {
                cfg = cfg.large();
            }
            let res = bench::bench_suite(&cfg)?;
            let csv = out.join("bench.csv");
            bench::write_csv(&csv, &res.results)?;
            let plots = bench::write_plots(&csv, &out)?;
            let failures: Vec<Value> =
                res.failures.iter().map(|(s, n, e)| json!({ "scenario": s, "size_bytes": n, "error": e })).collect();
            let mut text = format!("{} rows written to {}", res.results.len(), csv.display());
            for (s, n, e) in &res.failures {
                text += &format!("\nscenario {s} at {n} bytes failed: {e}");
            }
            Ok((json!({ "csv": csv, "plots": plots, "rows": res.results.len(), "failures": failures }), text))
        }
    }
}

fn write_new(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if path.exists() {
        bail!("{} already exists", path.display());
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes).with_context(|| path.display().to_string())
}
