//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Environment:
//! - `FAITH_ACCEPTANCE_STRICT=1` exits nonzero when any criterion fails.
//! - `FAITH_ACCEPTANCE_LARGE=1` adds the 5 GiB speedup run.
//! - `FAITH_ACCEPTANCE_ONLY=2,9` runs a subset.
//!
//! Proven fixtures are cached under the cargo target tmpdir, keyed by the
//! parameter digest, so only the first run pays for proving them. The
//! 64 MiB round trip is always run from scratch because its time is what
//! is measured.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};
use sha2::{Digest as _, Sha256};

use faith_core::bench::{self, BenchConfig, Scenario, World, MIB};
use faith_core::commitment::{flat_hash_baseline, tree_depth, HashAlg};
use faith_core::envelope::MAX_CHUNK_SIZE;
use faith_core::ledger::{audit_file, HashRecord, Ledger, BLOCK_LOG};
use faith_core::pairing::toy_oracle_ctx;
use faith_core::pre::{dec_user, enc, enc_with_r, keygen, keypair_from_secret, reenc, rekeygen};
use faith_core::proofs::reenc::Transcript;
use faith_core::proofs::{
    prove_reenc, simulate_transcript, verify_aggregated, verify_integrity, verify_reenc, verify_transcript,
    AggregatedProof, ReEncStatement, Reason,
};
use faith_core::protocol::*;
use faith_core::{Bls12, Engine, GroupCtx, ToyEngine};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn work_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn progress(msg: impl AsRef<str>) {
    static START: OnceLock<Instant> = OnceLock::new();
    let t = START.get_or_init(Instant::now).elapsed().as_secs();
    eprintln!("[{:>3}:{:02}] {}", t / 60, t % 60, msg.as_ref());
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

/// Parameters for large proven files: the largest chunk size proves fastest
/// per byte.
fn large_params() -> Result<Arc<SystemParams<Bls12>>> {
    static P: OnceLock<Arc<SystemParams<Bls12>>> = OnceLock::new();
    if let Some(p) = P.get() {
        return Ok(p.clone());
    }
    progress("setup with 4 MiB chunks");
    let cfg = SetupConfig { chunk_size: MAX_CHUNK_SIZE, max_depth: 12, alg: HashAlg::Poseidon };
    let p = Arc::new(ta_setup(GroupCtx::bls12_381(), cfg)?);
    Ok(P.get_or_init(|| p).clone())
}

fn small_params(max_depth: u32) -> Result<Arc<SystemParams<Bls12>>> {
    let cfg = SetupConfig { chunk_size: 4096, max_depth, alg: HashAlg::Poseidon };
    Ok(Arc::new(ta_setup(GroupCtx::bls12_381(), cfg)?))
}

fn sha_file(p: &Path) -> Result<[u8; 32]> {
    let mut r = std::io::BufReader::new(fs::File::open(p)?);
    let mut h = Sha256::new();
    std::io::copy(&mut r, &mut h)?;
    Ok(h.finalize().into())
}

// ---------------------------------------------------------------------------
// 1. End-to-end round trip on 64 MiB

fn c1_round_trip() -> Result<Verdict> {
    let params = large_params()?;
    let base = tempfile::tempdir_in(work_dir())?;
    let seed = rand::random::<u64>();
    let plain = base.path().join("input.bin");
    bench::write_random_file(&plain, 64 * MIB, seed)?;
    let world = World::open(base.path(), params, seed)?;

    progress("criterion 1: upload, grant and process 64 MiB");
    let t = Instant::now();
    let shared = world.share(&plain, "sixty-four", seed)?;
    let out = base.path().join("output.bin");
    let r = du_retrieve(&world.params, &world.user, &world.sp, &world.ledger, &shared.grant_id, &out)?;
    let total = t.elapsed();
    let same = sha_file(&plain)? == sha_file(&out)?;
    let tm = shared.timings.expect("fresh share is timed");
    let detail = format!(
        "identical={same} total={} (upload+leaf proofs {}, grant {:.1} ms, process {}, retrieve {}), limit 600 s",
        secs(total),
        secs(tm.upload),
        tm.grant.as_secs_f64() * 1e3,
        secs(tm.process),
        secs(total - tm.upload - tm.grant - tm.process),
    );
    ensure!(r.bytes == 64 * MIB, "retrieved {} bytes", r.bytes);
    verdict(same && total < Duration::from_secs(600), detail)
}

// ---------------------------------------------------------------------------
// 2. Exponent algebra over Z_101

fn modpow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// Runs the four algorithms on the toy engine and checks every intermediate
/// exponent against arithmetic done here.
fn toy_trial(ctx: &GroupCtx<ToyEngine>, o1: u64, o2: u64, u1: u64, u2: u64, r: u64, m: u64) -> Result<(u64, u64)> {
    use faith_core::pairing::{ToyGt, ToyScalar};
    const P: u64 = 101;
    let owner = keypair_from_secret(ctx, ToyScalar(o1), ToyScalar(o2))?;
    let user = keypair_from_secret(ctx, ToyScalar(u1), ToyScalar(u2))?;
    let c = enc_with_r(ctx, &owner.pk, &ToyGt(m), &ToyScalar(r));
    let mask = o1 * r % P;
    ensure!(c.c2 == ToyGt((m + mask) % P), "c2 exponent");
    let rk = rekeygen(ctx, &owner.sk, &user.pk);
    let cp = reenc(ctx, &rk, &c);
    ensure!(cp.c1p == ToyGt(o1 * u2 % P * r % P), "c1' exponent");
    let unmask = (P - o1 * u2 % P * r % P * modpow(u2, P - 2, P) % P) % P;
    ensure!((mask + unmask) % P == 0, "mask and unmask do not cancel");
    let back = dec_user(ctx, &user.sk, &cp)?;
    ensure!(back == ToyGt(m), "dec_user returned {back:?} for m = {m}");
    Ok((mask, unmask))
}

fn c2_toy_algebra() -> Result<Verdict> {
    let ctx = toy_oracle_ctx(101)?;
    let worked = toy_trial(&ctx, 3, 5, 7, 11, 13, 42)?;
    ensure!(worked == (39, 62), "worked trace gave {worked:?}");
    let mut rng = StdRng::seed_from_u64(2);
    let mut failures = 0;
    for _ in 0..10_000 {
        let nz = |rng: &mut StdRng| rng.gen_range(1..101u64);
        let (o1, o2, u1, u2) = (nz(&mut rng), nz(&mut rng), nz(&mut rng), nz(&mut rng));
        let (r, m) = (rng.gen_range(0..101), rng.gen_range(0..101));
        if toy_trial(&ctx, o1, o2, u1, u2, r, m).is_err() {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("10000 trials, {failures} failures; worked trace 39 + 62 = 0 mod 101"))
}

// ---------------------------------------------------------------------------
// 3. Tamper detection

fn c3_tamper() -> Result<Verdict> {
    const TRIALS: usize = 100;
    let params = small_params(2)?;
    let dir = tempfile::tempdir_in(work_dir())?;
    let sp = StorageProvider::open(&dir.path().join("sp"), params.clone())?;
    let ledger = Ledger::in_memory();
    let mut rng = StdRng::seed_from_u64(3);
    let owner = keygen(params.ctx(), &mut rng);
    let user = keygen(params.ctx(), &mut rng);
    let upload = |id: &str, data: &[u8], rng: &mut StdRng| -> Result<()> {
        let p = dir.path().join(format!("{id}.in"));
        fs::write(&p, data)?;
        do_upload(&params, &owner, &p, Some(id), &sp, &ledger, rng)?;
        Ok(())
    };

    // Pairs of an original and an edited version for the stale-proof case.
    for i in 0..4 {
        let mut data = vec![0u8; rng.gen_range(1..=3 * 4096)];
        rng.fill_bytes(&mut data);
        upload(&format!("orig-{i}"), &data, &mut rng)?;
        let at = rng.gen_range(0..data.len());
        data[at] ^= rng.gen_range(1..=255u8);
        upload(&format!("edit-{i}"), &data, &mut rng)?;
    }

    let kinds = ["corrupt-data", "corrupt-reenc", "statement-mismatch", "stale-proof"];
    let mut wrong = Vec::new();
    let mut leaked = 0;
    for (k, kind) in kinds.iter().enumerate() {
        progress(format!("criterion 3: {TRIALS} trials of {kind}"));
        for t in 0..TRIALS {
            let (file, fault, want) = match k {
                0 => {
                    // A fresh object per trial, since corruption persists.
                    let id = format!("victim-{t}");
                    let mut data = vec![0u8; rng.gen_range(1..=4096)];
                    rng.fill_bytes(&mut data);
                    upload(&id, &data, &mut rng)?;
                    let f = SpFault::CorruptData { offset: rng.gen(), mask: rng.gen_range(1..=255) };
                    (id, f, Reason::Integrity)
                }
                1 => (format!("edit-{}", t % 4), SpFault::CorruptReenc { delta: rng.gen_range(1..u64::MAX) }, Reason::Reenc),
                2 => (
                    format!("orig-{}", t % 4),
                    SpFault::StatementMismatch { delta: rng.gen_range(1..u64::MAX) },
                    Reason::Binding,
                ),
                _ => {
                    let i = rng.gen_range(0..4);
                    (format!("edit-{i}"), SpFault::StaleProof { source: format!("orig-{i}") }, Reason::Integrity)
                }
            };
            let g = do_grant(&params, &owner, &du_request(&user.pk, &file), &sp, &mut rng)?;
            sp.set_fault(Some(fault));
            sp_process_grant(&sp, &g.id, &ledger, &mut rng)?;
            sp.set_fault(None);
            let out = dir.path().join(format!("{}.out", g.id));
            match du_retrieve(&params, &user, &sp, &ledger, &g.id, &out) {
                Err(ProtocolError::VerificationFailed(r)) if r.reason == want => {}
                other => wrong.push(format!("{kind} trial {t}: {:?}", other.map(|_| ()))),
            }
            let part = dir.path().join(format!(".{}.out.part", g.id));
            if out.exists() || part.exists() {
                leaked += 1;
            }
        }
    }
    let n = kinds.len() * TRIALS;
    let detail = format!(
        "{} of {n} tampered grants rejected with the expected reason ({TRIALS} per fault), {leaked} emitted plaintext{}",
        n - wrong.len(),
        wrong.first().map(|w| format!("; first miss: {w}")).unwrap_or_default()
    );
    verdict(wrong.is_empty() && leaked == 0, detail)
}

// ---------------------------------------------------------------------------
// 4 and 5. Verification constancy and speedup

const VERIFY_SIZES: [u64; 4] = [MIB, 16 * MIB, 64 * MIB, 256 * MIB];
const REPS: u32 = 7;

fn world() -> Result<&'static World> {
    static W: OnceLock<World> = OnceLock::new();
    if let Some(w) = W.get() {
        return Ok(w);
    }
    let w = World::open(&work_dir(), large_params()?, 4)?;
    Ok(W.get_or_init(|| w))
}

fn fixture(size: u64) -> Result<bench::Shared> {
    let w = world()?;
    let t = Instant::now();
    let s = w.fixture(size, 4)?;
    if s.timings.is_some() {
        progress(format!("proved {} MiB fixture in {}", size / MIB, secs(t.elapsed())));
    }
    Ok(s)
}

fn median_ms(reps: u32, f: impl FnMut() -> Result<()> + Send) -> Result<f64> {
    let samples = rayon::ThreadPoolBuilder::new().num_threads(1).build()?.install(|| bench::time_reps(reps, f))?;
    Ok(bench::summarize(&samples).median_ms)
}

fn verify_ms(s: &bench::Shared) -> Result<(f64, u64)> {
    let w = world()?;
    let f = w.fetch(&s.grant_id)?;
    let keys = &w.params.keys;
    let ms = median_ms(REPS, || {
        let p = AggregatedProof::from_bytes(keys, &f.proof_bytes)?;
        verify_aggregated(keys, &[f.statement], &p)?;
        Ok(())
    })?;
    Ok((ms, f.proof_bytes.len() as u64))
}

fn c4_constancy() -> Result<Verdict> {
    let mut times = Vec::new();
    for size in VERIFY_SIZES {
        progress(format!("criterion 4: {} MiB fixture", size / MIB));
        let s = fixture(size)?;
        times.push((size, verify_ms(&s)?.0));
    }
    let max = times.iter().map(|t| t.1).fold(f64::MIN, f64::max);
    let min = times.iter().map(|t| t.1).fold(f64::MAX, f64::min);
    let list: Vec<String> = times.iter().map(|(s, ms)| format!("{} MiB {ms:.1} ms", s / MIB)).collect();
    verdict(max / min < 2.0, format!("median verify_aggregated: {}; max/min {:.2} (limit 2)", list.join(", "), max / min))
}

fn speedup_at(size: u64) -> Result<(f64, f64, f64)> {
    let w = world()?;
    let s = fixture(size)?;
    let f = w.fetch(&s.grant_id)?;
    let keys = &w.params.keys;
    let proof = AggregatedProof::from_bytes(keys, &f.proof_bytes)?;
    let zkp = median_ms(REPS, || {
        verify_integrity(&keys.int, &proof.root, &f.statement.h, tree_depth(proof.root.n))?;
        Ok(())
    })?;
    let flat = median_ms(REPS.min(5), || {
        let mut r = std::io::BufReader::with_capacity(1 << 20, fs::File::open(&f.served.envelope)?);
        std::hint::black_box(flat_hash_baseline(&mut r)?);
        Ok(())
    })?;
    let full = verify_ms(&s)?.0;
    Ok((zkp, flat, full))
}

fn c5_speedup() -> Result<Verdict> {
    let (zkp, flat, full) = speedup_at(256 * MIB)?;
    let ratio = zkp / flat;
    let mut detail = format!(
        "256 MiB: zkp_verify {zkp:.1} ms vs flat SHA-256 recompute {flat:.1} ms, ratio {:.2}% (limit 10%); full aggregated verify {full:.1} ms ({:.2}%)",
        ratio * 100.0,
        full / flat * 100.0
    );
    let mut pass = ratio <= 0.10;
    if std::env::var_os("FAITH_ACCEPTANCE_LARGE").is_some() {
        let (zkp5, flat5, _) = speedup_at(5 * 1024 * MIB)?;
        let r5 = zkp5 / flat5;
        detail += &format!("; 5 GiB: {zkp5:.1} ms vs {flat5:.1} ms, ratio {:.2}% (limit 2%)", r5 * 100.0);
        pass &= r5 <= 0.02;
    } else {
        detail += "; 5 GiB run not requested (FAITH_ACCEPTANCE_LARGE unset; proving 5 GiB takes about a day here)";
    }
    verdict(pass, detail)
}

// ---------------------------------------------------------------------------
// 6. PRE microbenchmarks

fn c6_pre_ops() -> Result<Verdict> {
    let rows = bench::bench_pre_ops(1000, 6);
    ensure!(rows.len() == 5, "{} rows", rows.len());
    let means: Vec<(&str, f64)> = rows.iter().map(|(n, s)| (*n, bench::summarize(s).mean_ms)).collect();
    let pass = means.iter().all(|m| m.1 < 50.0) && rows.iter().all(|r| r.1.len() == 1000);
    let list: Vec<String> = means.iter().map(|(n, m)| format!("{n} {m:.3} ms")).collect();
    verdict(pass, format!("mean per call over 1000 iterations: {} (limit 50 ms)", list.join(", ")))
}

// ---------------------------------------------------------------------------
// 7. Symmetric encryption scaling

fn c7_se_scaling() -> Result<Verdict> {
    let dir = work_dir().join("se");
    let mut cfg = BenchConfig::new(dir.clone());
    cfg.scenarios = vec![Scenario::SeEnc, Scenario::SeDec];
    cfg.se_sizes = vec![64 * MIB, 128 * MIB, 256 * MIB, 512 * MIB];
    cfg.threads = 1;
    let out = bench::bench_suite(&cfg)?;
    ensure!(out.failures.is_empty(), "{:?}", out.failures);
    let _ = fs::remove_dir_all(&dir);
    let pick = |sc: &str| -> Vec<(f64, f64)> {
        out.results.iter().filter(|r| r.scenario == sc).map(|r| (r.size_bytes as f64 / MIB as f64, r.mean_ms)).collect()
    };
    let enc = pick("se_enc");
    let dec = pick("se_dec");
    ensure!(enc.len() == 4 && dec.len() == 4, "missing rows");
    let xs: Vec<f64> = enc.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = enc.iter().map(|p| p.1).collect();
    let (a, b, r2) = bench::linear_fit(&xs, &ys);
    let worst = enc.iter().zip(&dec).map(|(e, d)| d.1 / e.1).fold(0.0, f64::max);
    let list: Vec<String> = enc.iter().zip(&dec).map(|(e, d)| format!("{} MiB {:.0}/{:.0} ms", e.0, e.1, d.1)).collect();
    verdict(
        r2 > 0.9 && worst <= 2.0,
        format!(
            "enc/dec means {}; enc fit {a:.1} + {b:.2} ms/MiB, R^2 {r2:.4} (limit 0.9); worst dec/enc {worst:.2} (limit 2)",
            list.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Proof shape

/// Pair and duplicate steps of a binary tree over `n` leaves, counted level
/// by level.
fn tree_oracle(n: u64) -> (u64, u64, u32) {
    let (mut len, mut pairs, mut dups, mut depth) = (n, 0, 0, 0);
    while len > 1 {
        pairs += len / 2;
        dups += len % 2;
        len = len.div_ceil(2);
        depth += 1;
    }
    (pairs, dups, depth)
}

fn c8_proof_shape() -> Result<Verdict> {
    let params = small_params(3)?;
    let dir = tempfile::tempdir_in(work_dir())?;
    let sp = StorageProvider::open(&dir.path().join("sp"), params.clone())?;
    let ledger = Ledger::in_memory();
    let mut rng = StdRng::seed_from_u64(8);
    let owner = keygen(params.ctx(), &mut rng);
    let user = keygen(params.ctx(), &mut rng);
    let mut ok = true;
    let mut sizes = Vec::new();
    let mut notes = Vec::new();
    for n in [1u64, 2, 3, 5, 8] {
        progress(format!("criterion 8: n = {n}"));
        let id = format!("n{n}");
        let p = dir.path().join(&id);
        let mut data = vec![0u8; (n as usize - 1) * 4096 + 100];
        rng.fill_bytes(&mut data);
        fs::write(&p, &data)?;
        do_upload(&params, &owner, &p, Some(&id), &sp, &ledger, &mut rng)?;
        let (root, stats) = sp.root_proof(&id)?;
        let stats = stats.context("root was already cached")?;
        let depth = u64::BITS - (n - 1).leading_zeros();
        let (pairs, dups, odepth) = tree_oracle(n);
        ok &= stats.pair_steps == n - 1 && pairs == n - 1 && stats.depth == depth && odepth == depth;
        ok &= stats.duplicate_steps == dups && root.n == n && root.level == depth;
        let g = do_grant(&params, &owner, &du_request(&user.pk, &id), &sp, &mut rng)?;
        let g = sp_process_grant(&sp, &g.id, &ledger, &mut rng)?;
        let bytes = g.proof.as_ref().map_or(0, Vec::len);
        sizes.push(bytes as f64);
        notes.push(format!("n={n}: {} pairs at depth {} ({} lifts), {bytes} B", stats.pair_steps, stats.depth, stats.duplicate_steps));
    }
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    let spread = sizes.iter().map(|s| (s / mean - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        ok && spread <= 0.10,
        format!("{}; proof size within {:.1}% of mean (limit 10%)", notes.join("; "), spread * 100.0),
    )
}

// ---------------------------------------------------------------------------
// 9. Sigma-proof soundness smoke

fn c9_sigma() -> Result<Verdict> {
    const N: usize = 1000;
    let ctx = GroupCtx::bls12_381();
    let e = ctx.engine;
    let mut rng = StdRng::seed_from_u64(9);
    let owner = keygen(&ctx, &mut rng);
    let users: Vec<_> = (0..4).map(|_| keygen(&ctx, &mut rng)).collect();
    let mut honest = Vec::with_capacity(N);
    let mut accepted = 0;
    progress("criterion 9: 1000 honest proofs");
    for i in 0..N {
        let m = ctx.gt_pow(&e.random_scalar(&mut rng));
        let c = enc(&ctx, &owner.pk, &m, &mut rng);
        let rk = rekeygen(&ctx, &owner.sk, &users[i % 4].pk);
        let stmt = ReEncStatement { c, cp: reenc(&ctx, &rk, &c) };
        let proof = prove_reenc(&ctx, &stmt, &rk, &mut rng)?;
        accepted += usize::from(verify_reenc(&ctx, &stmt, &proof).is_ok());
        honest.push((stmt, proof));
    }

    progress("criterion 9: 1000 forgeries");
    let mut forged_ok = 0;
    for i in 0..N {
        let (stmt, proof) = honest[i];
        let (other, other_proof) = honest[(i + 1 + rng.gen_range(0..N - 1)) % N];
        let accepted = match i % 5 {
            // Perturbed c1'.
            0 => {
                let mut s = stmt;
                s.cp.c1p = e.gt_mul(&s.cp.c1p, &ctx.gt_pow(&ctx.scalar(rng.gen_range(1..u64::MAX))));
                verify_reenc(&ctx, &s, &proof).is_ok()
            }
            // Replayed: a valid proof for one statement shown for another.
            1 => verify_reenc(&ctx, &other, &proof).is_ok(),
            // Swapped: c' taken from a different re-encryption.
            2 => verify_reenc(&ctx, &ReEncStatement { c: stmt.c, cp: other.cp }, &other_proof).is_ok()
                || verify_reenc(&ctx, &ReEncStatement { c: other.c, cp: stmt.cp }, &proof).is_ok(),
            // Replayed interactive transcript with a fresh challenge.
            3 => {
                let ch = e.random_scalar(&mut rng);
                let t = Transcript { a: proof.a, ch, z: proof.z };
                verify_transcript(&ctx, &stmt, &t)
            }
            // Simulated transcript presented as a proof.
            _ => {
                let t = simulate_transcript(&ctx, &stmt, &mut rng);
                verify_reenc(&ctx, &stmt, &faith_core::proofs::ReEncProof { a: t.a, z: t.z }).is_ok()
            }
        };
        forged_ok += usize::from(accepted);
    }
    verdict(
        accepted == N && forged_ok == 0,
        format!("{accepted}/{N} honest accepted; {forged_ok}/{N} forgeries accepted (perturbed c1', replayed proofs, swapped statements, replayed and simulated transcripts)"),
    )
}

// ---------------------------------------------------------------------------
// 10. Ledger tamper evidence

fn c10_ledger() -> Result<Verdict> {
    let dir = tempfile::tempdir_in(work_dir())?;
    let ledger = Ledger::open(dir.path())?;
    let mut rng = StdRng::seed_from_u64(10);
    progress("criterion 10: appending 10000 blocks");
    for i in 0..10_000u32 {
        let mut root = [0u8; 32];
        rng.fill_bytes(&mut root);
        ledger.put_hash(HashRecord {
            file_id: format!("f{i}"),
            root,
            alg_id: 1,
            owner: [(i % 7) as u8; 32],
            height: 0,
            timestamp_ms: 0,
        })?;
    }
    drop(ledger);
    let log = dir.path().join(BLOCK_LOG);
    let clean = fs::read(&log)?;
    ensure!(audit_file(&log)?.is_clean() && audit_file(&log)?.blocks == 10_000, "fresh log does not audit clean");
    let line_of = |pos: usize| clean[..pos].iter().filter(|&&b| b == b'\n').count() as u64 + 1;

    let mut detected = 0;
    let mut right_height = 0;
    let mut positions = BTreeSet::new();
    while positions.len() < 100 {
        positions.insert(rng.gen_range(0..clean.len()));
    }
    for &pos in &positions {
        let mut bytes = clean.clone();
        bytes[pos] ^= rng.gen_range(1..=255u8);
        fs::write(&log, &bytes)?;
        let rep = audit_file(&log)?;
        if let Some(h) = rep.first_bad {
            detected += 1;
            right_height += usize::from(h == line_of(pos));
        }
    }
    fs::write(&log, &clean)?;
    verdict(
        detected == 100,
        format!("10000-block log ({} bytes): {detected}/100 single-byte flips detected, {right_height} at the edited height", clean.len()),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

const CRITERIA: [Criterion; 10] = [
    (1, "end-to-end 64 MiB round trip under 10 min", c1_round_trip),
    (2, "re-encryption algebra on the Z_101 oracle", c2_toy_algebra),
    (3, "tamper detection for four SP faults", c3_tamper),
    (4, "verification time constant in file size", c4_constancy),
    (5, "proof verification vs flat hash recompute", c5_speedup),
    (6, "PRE operations under 50 ms", c6_pre_ops),
    (7, "symmetric encryption scales linearly", c7_se_scaling),
    (8, "aggregation tree shape and proof size", c8_proof_shape),
    (9, "re-encryption proof soundness smoke", c9_sigma),
    (10, "ledger tamper evidence", c10_ledger),
];

fn main() {
    let only: Option<BTreeSet<u32>> = std::env::var("FAITH_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    fs::create_dir_all(work_dir()).expect("work dir");
    let mut failed = 0;
    for (id, name, f) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        progress(format!("criterion {id}: {name}"));
        let t = Instant::now();
        let v = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict { pass: false, detail: format!("error: {e:#}") },
            Err(p) => {
                let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                Verdict { pass: false, detail: format!("panic: {}", msg.unwrap_or_default()) }
            }
        };
        failed += usize::from(!v.pass);
        println!(
            "{} criterion {id:>2} {name}: {} [{}]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            secs(t.elapsed())
        );
    }
    if failed > 0 && std::env::var("FAITH_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
