use std::fs;
use std::sync::Arc;

use faith_core::commitment::HashAlg;
use faith_core::envelope::{self, kem_derive, MAX_CHUNK_SIZE};
use faith_core::ledger::Ledger;
use faith_core::pre::{dec_owner, keygen};
use faith_core::protocol::*;
use faith_core::{Bls12, GroupCtx};
use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};

const MIB: usize = 1 << 20;

#[test]
fn round_trip_zero_one_kib_and_ten_mib() {
    let cfg = SetupConfig { chunk_size: MAX_CHUNK_SIZE, max_depth: 4, alg: HashAlg::Poseidon };
    let params = Arc::new(ta_setup(GroupCtx::bls12_381(), cfg).unwrap());
    let ctx = params.ctx().clone();
    let dir = tempfile::tempdir().unwrap();
    let sp = StorageProvider::open(&dir.path().join("sp"), params.clone()).unwrap();
    let ledger = Ledger::open(&dir.path().join("ledger")).unwrap();
    let mut rng = StdRng::seed_from_u64(0xe2e);
    let owner = keygen(&ctx, &mut rng);
    let user = keygen(&ctx, &mut rng);

    let mut stats = Vec::new();
    for (name, size) in [("zero", 0), ("one-kib", 1024), ("ten-mib", 10 * MIB)] {
        let mut data = vec![0u8; size];
        rng.fill_bytes(&mut data);
        let input = dir.path().join(name);
        fs::write(&input, &data).unwrap();

        let up = do_upload(&params, &owner, &input, Some(name), &sp, &ledger, &mut rng).unwrap();
        assert_eq!(up.object.commitment.n, (size as u64).div_ceil(u64::from(MAX_CHUNK_SIZE)).max(1));
        do_check_upload(&params, &sp, &ledger, &owner.pk, name).unwrap();

        let g = do_grant(&params, &owner, &du_request(&user.pk, name), &sp, &mut rng).unwrap();
        let g = sp_process_grant(&sp, &g.id, &ledger, &mut rng).unwrap();
        assert_eq!(g.status, GrantStatus::Published);

        let out = dir.path().join(format!("{name}.out"));
        let r = du_retrieve(&params, &user, &sp, &ledger, &g.id, &out).unwrap();
        assert_eq!(r.bytes, size as u64);
        assert!(fs::read(&out).unwrap() == data, "{name}: output differs");
        assert_eq!(sp.load_grant(&g.id).unwrap().status, GrantStatus::Verified);
        stats.push(r.verify.stats);
    }
    // Verifier work does not depend on file size.
    assert!(stats.windows(2).all(|w| w[0] == w[1]), "{stats:?}");

    let report = ledger.audit().unwrap();
    assert!(report.is_clean());
    assert_eq!(report.blocks, 6);
}

#[test]
fn ten_mib_at_default_chunk_size_has_160_chunks() {
    let params = Arc::new(ta_setup(GroupCtx::bls12_381(), SetupConfig::default()).unwrap());
    let ctx = params.ctx().clone();
    let dir = tempfile::tempdir().unwrap();
    let sp = StorageProvider::open(dir.path(), params.clone()).unwrap().lazy_leaves();
    let ledger = Ledger::in_memory();
    let mut rng = StdRng::seed_from_u64(160);
    let owner = keygen(&ctx, &mut rng);
    let mut data = vec![0u8; 10 * MIB];
    rng.fill_bytes(&mut data);
    let input = dir.path().join("in");
    fs::write(&input, &data).unwrap();

    let up = do_upload(&params, &owner, &input, None, &sp, &ledger, &mut rng).unwrap();
    assert_eq!(up.object.commitment.n, 160);
    assert_eq!(up.object.cached_leaves, 0);
    let rec = ledger.hash_record(&key_digest(&ctx.engine, &owner.pk), &up.object.id).unwrap();
    assert_eq!(rec.root, up.object.commitment.root.0);

    let k = kem_derive(&ctx.engine, &dec_owner(&ctx, &owner.sk, &up.object.c));
    let mut plain = Vec::new();
    envelope::open(&k, &mut fs::File::open(&up.object.envelope).unwrap(), &mut plain).unwrap();
    assert!(plain == data);
}

#[test]
fn unknown_file_and_bad_ids() {
    let cfg = SetupConfig { chunk_size: 4096, max_depth: 2, alg: HashAlg::Poseidon };
    let params = Arc::new(ta_setup(GroupCtx::bls12_381(), cfg).unwrap());
    let ctx = params.ctx().clone();
    let dir = tempfile::tempdir().unwrap();
    let sp = StorageProvider::<Bls12>::open(dir.path(), params.clone()).unwrap();
    let ledger = Ledger::in_memory();
    let mut rng = StdRng::seed_from_u64(1);
    let owner = keygen(&ctx, &mut rng);
    let err = do_grant(&params, &owner, &du_request(&owner.pk, "missing"), &sp, &mut rng).unwrap_err();
    assert!(matches!(err, ProtocolError::UnknownFile(_)), "{err}");
    let input = dir.path().join("x");
    fs::write(&input, b"x").unwrap();
    for bad in ["", "../etc", "a b", &"z".repeat(65)] {
        let err = do_upload(&params, &owner, &input, Some(bad), &sp, &ledger, &mut rng).unwrap_err();
        assert!(matches!(err, ProtocolError::BadId(_)), "{bad:?}: {err}");
    }
    assert!(matches!(sp_process_grant(&sp, "nope", &ledger, &mut rng), Err(ProtocolError::UnknownGrant(_))));
    let missing = dir.path().join("does-not-exist");
    assert!(matches!(
        do_upload(&params, &owner, &missing, None, &sp, &ledger, &mut rng),
        Err(ProtocolError::Io { .. })
    ));
}
