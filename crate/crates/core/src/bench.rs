//! Benchmark harness: timed scenarios, CSV output and SVG line plots.
//!
//! The CSV starts with a `# faith-bench-csv v1` line followed by a header
//! row. Plots are rendered from the CSV alone, so rendering the same file
//! twice gives the same bytes.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commitment::{flat_hash_baseline, tree_depth, HashAlg};
use crate::envelope::{self, FileKey};
use crate::ledger::{HashRecord, Ledger, ProofRecord, Query};
use crate::pairing::{random_gt, Bls12, GroupCtx};
use crate::pre::{dec_user, enc, keygen, reenc, rekeygen, KeyPair};
use crate::proofs::{verify_aggregated, verify_integrity, AggregatedProof};
use crate::protocol::{
    do_grant, do_upload, du_fetch, du_request, sp_process_grant, ta_setup, Fetched, SetupConfig, StorageProvider,
    SystemParams,
};

pub const CSV_SCHEMA_LINE: &str = "# faith-bench-csv v1";
pub const MIB: u64 = 1 << 20;
pub const MIN_REPS: u32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub scenario: String,
    pub size_bytes: u64,
    pub reps: u32,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
    pub proof_bytes: Option<u64>,
    pub threads: usize,
    pub machine: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Mean, median and sample standard deviation in milliseconds.
pub fn summarize(samples: &[Duration]) -> Summary {
    assert!(!samples.is_empty());
    let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let n = ms.len() as f64;
    let mean = ms.iter().sum::<f64>() / n;
    let median = if ms.len() % 2 == 1 { ms[ms.len() / 2] } else { (ms[ms.len() / 2 - 1] + ms[ms.len() / 2]) / 2.0 };
    let var = if ms.len() > 1 { ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Summary { mean_ms: round4(mean), median_ms: round4(median), stddev_ms: round4(var.sqrt()) }
}

/// Least-squares fit `y = a + b x`; returns `(a, b, r2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (a, b, if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot })
}

pub fn machine_fingerprint() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let model = fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split(':').nth(1)).map(|m| m.trim().to_owned()))
        .unwrap_or_else(|| "unknown-cpu".into());
    let model: String = model.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
    format!("{}-{}-{cpus}cpu-{model}", std::env::consts::OS, std::env::consts::ARCH)
}

/// Times `reps` calls of `f`.
pub fn time_reps(reps: u32, mut f: impl FnMut() -> Result<()>) -> Result<Vec<Duration>> {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f()?;
            Ok(t.elapsed())
        })
        .collect()
}

/// Streams `size` pseudo-random bytes from `seed` into `path`.
pub fn write_random_file(path: &Path, size: u64, seed: u64) -> io::Result<()> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    let mut buf = vec![0u8; 1 << 20];
    let mut left = size;
    while left > 0 {
        let n = left.min(buf.len() as u64) as usize;
        rng.fill_bytes(&mut buf[..n]);
        w.write_all(&buf[..n])?;
        left -= n as u64;
    }
    w.into_inner().map_err(io::IntoInnerError::into_error)?.sync_all()
}

// ---------------------------------------------------------------------------
// Proven fixtures

/// A ledger, an SP and two parties sharing one parameter set, persisted under
/// a directory named after the parameter digest.
pub struct World {
    pub dir: PathBuf,
    pub params: Arc<SystemParams<Bls12>>,
    pub sp: StorageProvider<Bls12>,
    pub ledger: Ledger,
    pub owner: KeyPair<Bls12>,
    pub user: KeyPair<Bls12>,
}

/// A shared file with published proof.
pub struct Shared {
    pub file_id: String,
    pub grant_id: String,
    pub plaintext: PathBuf,
    /// `None` when the proof came from an earlier run.
    pub timings: Option<ShareTimings>,
}

#[derive(Clone, Copy, Debug)]
pub struct ShareTimings {
    pub upload: Duration,
    pub grant: Duration,
    pub process: Duration,
}

impl World {
    pub fn open(base: &Path, params: Arc<SystemParams<Bls12>>, seed: u64) -> Result<Self> {
        let dir = base.join(format!("world-{}-{seed}", hex::encode(&params.digest()[..6])));
        fs::create_dir_all(&dir)?;
        let sp = StorageProvider::open(&dir.join("sp"), params.clone())?;
        let ledger = Ledger::open(&dir.join("ledger"))?;
        let mut rng = StdRng::seed_from_u64(seed);
        let owner = keygen(params.ctx(), &mut rng);
        let user = keygen(params.ctx(), &mut rng);
        Ok(World { dir, params, sp, ledger, owner, user })
    }

    /// Upload, grant and process one file, timing each phase.
    ///
    /// Randomness comes from `seed` and `file_id` together, so grant ids
    /// differ between files shared with the same seed.
    pub fn share(&self, plaintext: &Path, file_id: &str, seed: u64) -> Result<Shared> {
        let seed = Sha256::new().chain_update(seed.to_be_bytes()).chain_update(file_id).finalize();
        let mut rng = StdRng::from_seed(seed.into());
        let t = Instant::now();
        do_upload(&self.params, &self.owner, plaintext, Some(file_id), &self.sp, &self.ledger, &mut rng)?;
        let upload = t.elapsed();
        let t = Instant::now();
        let g = do_grant(&self.params, &self.owner, &du_request(&self.user.pk, file_id), &self.sp, &mut rng)?;
        let grant = t.elapsed();
        let t = Instant::now();
        sp_process_grant(&self.sp, &g.id, &self.ledger, &mut rng)?;
        let process = t.elapsed();
        Ok(Shared {
            file_id: file_id.into(),
            grant_id: g.id,
            plaintext: plaintext.into(),
            timings: Some(ShareTimings { upload, grant, process }),
        })
    }

    /// A random file of `size` bytes shared with the user, reusing a
    /// published grant from an earlier run when one exists.
    pub fn fixture(&self, size: u64, seed: u64) -> Result<Shared> {
        let file_id = format!("fx-{size}-{seed}");
        let marker = self.dir.join(format!("{file_id}.grant"));
        let plaintext = self.dir.join(format!("{file_id}.plain"));
        if let Ok(grant_id) = fs::read_to_string(&marker) {
            let grant_id = grant_id.trim().to_owned();
            if self.ledger.proof_record(&grant_id).is_ok() {
                return Ok(Shared { file_id, grant_id, plaintext, timings: None });
            }
        }
        if self.sp.has(&file_id) {
            bail!("fixture {file_id} exists without a published grant; remove {}", self.dir.display());
        }
        write_random_file(&plaintext, size, seed)?;
        let shared = self.share(&plaintext, &file_id, seed)?;
        fs::write(&marker, &shared.grant_id)?;
        Ok(shared)
    }

    pub fn fetch(&self, grant_id: &str) -> Result<Fetched<Bls12>> {
        Ok(du_fetch(&self.sp, &self.ledger, grant_id)?)
    }
}

// ---------------------------------------------------------------------------
// Scenarios

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    SeEnc,
    SeDec,
    PreOps,
    ProveTime,
    VerifyTime,
    ProofSize,
    FlatHashRecompute,
    ZkpVerify,
    LedgerPut,
    LedgerGet,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::SeEnc,
        Scenario::SeDec,
        Scenario::PreOps,
        Scenario::ProveTime,
        Scenario::VerifyTime,
        Scenario::ProofSize,
        Scenario::FlatHashRecompute,
        Scenario::ZkpVerify,
        Scenario::LedgerPut,
        Scenario::LedgerGet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SeEnc => "se_enc",
            Scenario::SeDec => "se_dec",
            Scenario::PreOps => "pre_ops",
            Scenario::ProveTime => "prove_time",
            Scenario::VerifyTime => "verify_time",
            Scenario::ProofSize => "proof_size",
            Scenario::FlatHashRecompute => "flat_hash_recompute",
            Scenario::ZkpVerify => "zkp_verify",
            Scenario::LedgerPut => "ledger_put",
            Scenario::LedgerGet => "ledger_get",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub scenarios: Vec<Scenario>,
    /// Sizes for symmetric encryption.
    pub se_sizes: Vec<u64>,
    /// File sizes with proofs: verification, proof size and the flat-hash
    /// comparison.
    pub verify_sizes: Vec<u64>,
    /// Sizes proven from scratch on every repetition.
    pub prove_sizes: Vec<u64>,
    pub reps: u32,
    pub pre_iters: u32,
    pub threads: usize,
    pub setup: SetupConfig,
    pub work_dir: PathBuf,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(work_dir: PathBuf) -> Self {
        BenchConfig {
            scenarios: Scenario::ALL.to_vec(),
            se_sizes: vec![MIB, 16 * MIB, 64 * MIB, 256 * MIB],
            verify_sizes: vec![MIB, 16 * MIB, 64 * MIB, 256 * MIB],
            prove_sizes: vec![MIB],
            reps: MIN_REPS,
            pre_iters: 1000,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            setup: SetupConfig { chunk_size: envelope::MAX_CHUNK_SIZE, max_depth: 12, alg: HashAlg::Poseidon },
            work_dir,
            seed: 1,
        }
    }

    /// Adds 1 to 5 GiB to the symmetric-encryption sizes and 5 GiB to the
    /// proven sizes.
    pub fn large(mut self) -> Self {
        self.se_sizes.extend((1..=5).map(|g| g * 1024 * MIB));
        self.verify_sizes.push(5 * 1024 * MIB);
        self
    }
}

#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub results: Vec<BenchResult>,
    /// `(scenario, size, error)` for scenarios that failed.
    pub failures: Vec<(String, u64, String)>,
}

struct Ctx<'a> {
    cfg: &'a BenchConfig,
    machine: String,
}

impl Ctx<'_> {
    fn row(&self, scenario: &str, size: u64, samples: &[Duration], proof_bytes: Option<u64>, threads: usize) -> BenchResult {
        let s = summarize(samples);
        BenchResult {
            scenario: scenario.into(),
            size_bytes: size,
            reps: samples.len() as u32,
            mean_ms: s.mean_ms,
            median_ms: s.median_ms,
            stddev_ms: s.stddev_ms,
            proof_bytes,
            threads,
            machine: self.machine.clone(),
        }
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

/// Runs every configured scenario. A failing scenario is recorded and the
/// suite moves on.
pub fn bench_suite(cfg: &BenchConfig) -> Result<SuiteOutput> {
    if cfg.reps < MIN_REPS {
        bail!("at least {MIN_REPS} repetitions are required");
    }
    fs::create_dir_all(&cfg.work_dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let ctx = Ctx { cfg, machine: machine_fingerprint() };
    let mut out = SuiteOutput::default();
    let mut world: Option<World> = None;
    let record = |name: &str, size: u64, r: Result<Vec<BenchResult>>, out: &mut SuiteOutput| match r {
        Ok(rows) => out.results.extend(rows),
        Err(e) => {
            log::warn!("scenario {name} at {size} bytes failed: {e:#}");
            out.failures.push((name.into(), size, format!("{e:#}")));
        }
    };
    for &sc in &cfg.scenarios {
        let name = sc.name();
        log::info!("bench: {name}");
        match sc {
            Scenario::SeEnc | Scenario::SeDec => {
                for &size in &cfg.se_sizes {
                    let r = pool.install(|| bench_se(&ctx, sc, size));
                    record(name, size, r, &mut out);
                }
            }
            Scenario::PreOps => record(name, 0, bench_pre(&ctx), &mut out),
            Scenario::ProveTime => {
                for &size in &cfg.prove_sizes {
                    let r = pool.install(|| bench_prove(&ctx, size));
                    record(name, size, r, &mut out);
                }
            }
            _ => {
                if world.is_none() {
                    match pool.install(|| open_world(cfg)) {
                        Ok(w) => world = Some(w),
                        Err(e) => {
                            record(name, 0, Err(e), &mut out);
                            continue;
                        }
                    }
                }
                let w = world.as_ref().unwrap();
                if matches!(sc, Scenario::LedgerPut | Scenario::LedgerGet) {
                    record(name, 0, bench_ledger(&ctx, sc, w), &mut out);
                    continue;
                }
                for &size in &cfg.verify_sizes {
                    let r = pool.install(|| bench_proven(&ctx, sc, w, size));
                    record(name, size, r, &mut out);
                }
            }
        }
    }
    Ok(out)
}

fn open_world(cfg: &BenchConfig) -> Result<World> {
    let params = Arc::new(ta_setup(GroupCtx::bls12_381(), cfg.setup)?);
    World::open(&cfg.work_dir, params, cfg.seed)
}

fn bench_se(ctx: &Ctx<'_>, sc: Scenario, size: u64) -> Result<Vec<BenchResult>> {
    let dir = &ctx.cfg.work_dir;
    let plain = dir.join(format!("se-{size}.plain"));
    let sealed = dir.join(format!("se-{size}.env"));
    if fs::metadata(&plain).map(|m| m.len()).ok() != Some(size) {
        write_random_file(&plain, size, ctx.cfg.seed)?;
    }
    let key = FileKey([7u8; 32]);
    let cs = envelope::DEFAULT_CHUNK_SIZE;
    let mut rng = StdRng::seed_from_u64(ctx.cfg.seed);
    let mut seal_once = || -> Result<()> {
        let mut src = io::BufReader::with_capacity(1 << 20, File::open(&plain)?);
        let mut dst = BufWriter::with_capacity(1 << 20, File::create(&sealed)?);
        envelope::seal(&key, &mut src, size, &mut dst, cs, &mut rng, |_, _| {})?;
        Ok(())
    };
    let samples = match sc {
        Scenario::SeEnc => time_reps(ctx.cfg.reps, &mut seal_once)?,
        _ => {
            seal_once()?;
            time_reps(ctx.cfg.reps, || {
                let mut src = io::BufReader::with_capacity(1 << 20, File::open(&sealed)?);
                envelope::open(&key, &mut src, &mut io::sink())?;
                Ok(())
            })?
        }
    };
    let _ = fs::remove_file(&sealed);
    Ok(vec![ctx.row(sc.name(), size, &samples, None, ctx.cfg.threads)])
}

/// Five rows, one per PRE algorithm, each timed per call.
pub fn bench_pre_ops(iters: u32, seed: u64) -> Vec<(&'static str, Vec<Duration>)> {
    let ctx = GroupCtx::bls12_381();
    let mut rng = StdRng::seed_from_u64(seed);
    let owner = keygen(&ctx, &mut rng);
    let user = keygen(&ctx, &mut rng);
    let m = random_gt(&ctx, &mut rng);
    let c = enc(&ctx, &owner.pk, &m, &mut rng);
    let rk = rekeygen(&ctx, &owner.sk, &user.pk);
    let cp = reenc(&ctx, &rk, &c);
    let time = |f: &mut dyn FnMut()| {
        (0..iters)
            .map(|_| {
                let t = Instant::now();
                f();
                t.elapsed()
            })
            .collect::<Vec<_>>()
    };
    let mut r2 = StdRng::seed_from_u64(seed ^ 1);
    vec![
        ("keygen", time(&mut || {
            std::hint::black_box(keygen(&ctx, &mut r2));
        })),
        ("rekeygen", time(&mut || {
            std::hint::black_box(rekeygen(&ctx, &owner.sk, &user.pk));
        })),
        ("enc", time(&mut || {
            std::hint::black_box(enc(&ctx, &owner.pk, &m, &mut r2));
        })),
        ("reenc", time(&mut || {
            std::hint::black_box(reenc(&ctx, &rk, &c));
        })),
        ("dec", time(&mut || {
            let _ = std::hint::black_box(dec_user(&ctx, &user.sk, &cp).unwrap());
        })),
    ]
}

fn bench_pre(ctx: &Ctx<'_>) -> Result<Vec<BenchResult>> {
    let rows = single_thread(|| bench_pre_ops(ctx.cfg.pre_iters.max(MIN_REPS), ctx.cfg.seed));
    Ok(rows.into_iter().map(|(op, s)| ctx.row(&format!("pre_ops.{op}"), 0, &s, None, 1)).collect())
}

/// Full SP pipeline from a fresh object each repetition.
fn bench_prove(ctx: &Ctx<'_>, size: u64) -> Result<Vec<BenchResult>> {
    let cfg = ctx.cfg;
    let params = Arc::new(ta_setup(GroupCtx::bls12_381(), cfg.setup)?);
    let base = tempfile::Builder::new().prefix("prove-").tempdir_in(&cfg.work_dir)?;
    let plain = base.path().join("plain");
    write_random_file(&plain, size, cfg.seed)?;
    let mut proof_bytes = 0;
    let mut samples = Vec::new();
    for rep in 0..cfg.reps {
        let w = World::open(&base.path().join(format!("rep{rep}")), params.clone(), cfg.seed)?;
        let s = w.share(&plain, "bench", cfg.seed + u64::from(rep))?;
        let t = s.timings.unwrap();
        samples.push(t.upload + t.process);
        proof_bytes = w.ledger.proof_record(&s.grant_id)?.proof.len() as u64;
    }
    Ok(vec![ctx.row("prove_time", size, &samples, Some(proof_bytes), cfg.threads)])
}

fn bench_proven(ctx: &Ctx<'_>, sc: Scenario, w: &World, size: u64) -> Result<Vec<BenchResult>> {
    let reps = ctx.cfg.reps;
    let shared = w.fixture(size, ctx.cfg.seed)?;
    let f = w.fetch(&shared.grant_id)?;
    let keys = &w.params.keys;
    let proof = AggregatedProof::from_bytes(keys, &f.proof_bytes)?;
    let bytes = f.proof_bytes.len() as u64;
    let samples = match sc {
        Scenario::VerifyTime => single_thread(|| {
            time_reps(reps, || {
                let p = AggregatedProof::from_bytes(keys, &f.proof_bytes)?;
                verify_aggregated(keys, &[f.statement], &p)?;
                Ok(())
            })
        })?,
        Scenario::ZkpVerify => single_thread(|| {
            time_reps(reps, || {
                verify_integrity(&keys.int, &proof.root, &f.statement.h, tree_depth(proof.root.n))?;
                Ok(())
            })
        })?,
        Scenario::FlatHashRecompute => single_thread(|| {
            time_reps(reps, || {
                let mut r = io::BufReader::with_capacity(1 << 20, File::open(&f.served.envelope)?);
                std::hint::black_box(flat_hash_baseline(&mut r)?);
                Ok(())
            })
        })?,
        Scenario::ProofSize => time_reps(reps, || {
            std::hint::black_box(proof.to_bytes(&keys.ctx.engine, &keys.int));
            Ok(())
        })?,
        _ => unreachable!(),
    };
    let threads = if sc == Scenario::ProofSize { ctx.cfg.threads } else { 1 };
    let pb = matches!(sc, Scenario::VerifyTime | Scenario::ProofSize).then_some(bytes);
    Ok(vec![ctx.row(sc.name(), size, &samples, pb, threads)])
}

fn bench_ledger(ctx: &Ctx<'_>, sc: Scenario, w: &World) -> Result<Vec<BenchResult>> {
    let proof = w
        .fixture(ctx.cfg.verify_sizes.first().copied().unwrap_or(MIB), ctx.cfg.seed)
        .and_then(|s| Ok(w.ledger.proof_record(&s.grant_id)?.proof))?;
    let dir = tempfile::Builder::new().prefix("ledger-").tempdir_in(&ctx.cfg.work_dir)?;
    let l = Ledger::open(dir.path())?;
    let n = ctx.cfg.reps.max(100);
    let mut puts = Vec::new();
    for i in 0..n {
        let id = format!("f{i}");
        let t = Instant::now();
        l.put_hash(HashRecord { file_id: id.clone(), root: [1; 32], alg_id: 1, owner: [2; 32], height: 0, timestamp_ms: 0 })?;
        l.put_proof(ProofRecord {
            file_id: id,
            owner: [2; 32],
            grant_id: format!("g{i}"),
            binding: [3; 32],
            proof: proof.clone(),
            height: 0,
            timestamp_ms: 0,
        })?;
        puts.push(t.elapsed());
    }
    let samples = match sc {
        Scenario::LedgerPut => puts,
        _ => time_reps(n, || {
            std::hint::black_box(l.get(Query::Grant("g7"))?);
            std::hint::black_box(l.get(Query::File("f3"))?);
            Ok(())
        })?,
    };
    Ok(vec![ctx.row(sc.name(), proof.len() as u64, &samples, Some(proof.len() as u64), 1)])
}

// ---------------------------------------------------------------------------
// CSV and plots

pub fn write_csv(path: &Path, rows: &[BenchResult]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| path.display().to_string())?);
    writeln!(f, "{CSV_SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchResult>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    match text.lines().next() {
        Some(CSV_SCHEMA_LINE) => {}
        other => bail!("unsupported CSV schema line {other:?}"),
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<BenchResult>, _>>()?)
}

/// Which scenarios share a plot.
pub const PLOTS: [(&str, &str, &[&str]); 5] = [
    ("se", "Symmetric encryption", &["se_enc", "se_dec"]),
    ("prove", "Proof generation", &["prove_time"]),
    ("verify", "Integrity verification", &["verify_time", "zkp_verify", "flat_hash_recompute"]),
    ("proof_size", "Serialized proof size (bytes)", &["proof_size"]),
    ("ledger", "Ledger operations", &["ledger_put", "ledger_get"]),
];

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot of mean time (or proof bytes for `proof_size`) against size on
/// log-log axes.
pub fn render_svg(title: &str, rows: &[BenchResult], series: &[&str]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 70.0, 170.0, 40.0, 50.0);
    let by_bytes = series == ["proof_size"];
    let pts: Vec<(usize, f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let i = series.iter().position(|s| *s == r.scenario)?;
            let y = if by_bytes { r.proof_bytes? as f64 } else { r.mean_ms };
            (r.size_bytes > 0 && y > 0.0).then(|| (i, (r.size_bytes as f64).log2(), y.log10()))
        })
        .collect();
    let mut s = String::new();
    s += &format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n");
    s += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-size=\"15\">{title}</text>\n", ml);
    if pts.is_empty() {
        s += "<text x=\"70\" y=\"200\">no data</text>\n</svg>\n";
        return s;
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, g: fn(&(usize, f64, f64)) -> f64| pts.iter().map(g).fold(init, f);
    let (x0, x1) = (fold(f64::min, f64::MAX, |p| p.1).floor(), fold(f64::max, f64::MIN, |p| p.1).ceil());
    let (y0, y1) = (fold(f64::min, f64::MAX, |p| p.2).floor(), fold(f64::max, f64::MIN, |p| p.2).ceil());
    let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    s += &format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    for e in (x0 as i64)..=(x1 as i64) {
        let label = match e {
            e if e >= 30 => format!("{}G", 1u64 << (e - 30)),
            e if e >= 20 => format!("{}M", 1u64 << (e - 20)),
            e if e >= 10 => format!("{}K", 1u64 << (e - 10)),
            e => format!("{}", 1u64 << e.max(0)),
        };
        s += &format!("<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n", px(e as f64), h - mb + 18.0);
    }
    for e in (y0 as i64)..=(y1 as i64) {
        s += &format!("<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{e}</text>\n", ml - 6.0, py(e as f64) + 4.0);
    }
    let unit = if by_bytes { "bytes" } else { "ms" };
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">size (bytes)</text>\n", (ml + w - mr) / 2.0, h - 12.0);
    s += &format!("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{unit}</text>\n", h / 2.0, h / 2.0);
    for (i, name) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut line: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 == i).map(|p| (px(p.1), py(p.2))).collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !line.is_empty() {
            let d: Vec<String> = line.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            s += &format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n", d.join(" "));
            for (x, y) in &line {
                s += &format!("<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>\n");
            }
        }
        let ly = mt + 10.0 + 18.0 * i as f64;
        s += &format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{name}</text>\n",
            w - mr + 10.0,
            w - mr + 30.0,
            w - mr + 36.0,
            ly + 4.0
        );
    }
    s += "</svg>\n";
    s
}

/// Writes one SVG per entry of [`PLOTS`] from a CSV file. Returns the paths.
pub fn write_plots(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_csv(csv_path)?;
    fs::create_dir_all(out_dir)?;
    let mut out = Vec::new();
    for (file, title, series) in PLOTS {
        let p = out_dir.join(format!("{file}.svg"));
        fs::write(&p, render_svg(title, &rows, series))?;
        out.push(p);
    }
    Ok(out)
}
