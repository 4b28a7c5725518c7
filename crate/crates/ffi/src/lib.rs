//! C ABI over `faith-core`.
//!
//! Objects are opaque handles created by the `_generate`, `_setup`, `_load`
//! and `_open` functions and released with the matching `_free`. Every
//! fallible call returns a [`FaithStatus`]; on failure a message for the
//! calling thread is available from [`faith_last_error`]. Strings and byte
//! buffers returned through out-parameters belong to the caller and are
//! released with [`faith_string_free`] and [`faith_bytes_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;
use std::sync::Arc;

use faith_core::commitment::HashAlg;
use faith_core::envelope::EnvelopeError;
use faith_core::ledger::{audit_file, Ledger, BLOCK_LOG};
use faith_core::pre::{keygen, KeyPair, PublicKey};
use faith_core::proofs::Reason;
use faith_core::protocol::{
    do_grant, do_upload, du_fetch, du_request, du_retrieve, du_verify, sp_process_grant, ta_setup, ProtocolError,
    SetupConfig, StorageProvider, SystemParams,
};
use faith_core::{Bls12, GroupCtx};
use rand::rngs::OsRng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaithStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    NotFound = 4,
    VerificationFailed = 5,
    AuthFailure = 6,
    LedgerCorrupt = 7,
    Internal = 8,
    Panic = 9,
}

/// Why a proof was rejected.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaithReason {
    None = 0,
    Malformed = 1,
    Integrity = 2,
    Binding = 3,
    Reenc = 4,
}

impl From<Reason> for FaithReason {
    fn from(r: Reason) -> Self {
        match r {
            Reason::Malformed => FaithReason::Malformed,
            Reason::Integrity => FaithReason::Integrity,
            Reason::Binding => FaithReason::Binding,
            Reason::Reenc => FaithReason::Reenc,
        }
    }
}

/// Owned byte buffer. Release with [`faith_bytes_free`].
#[repr(C)]
pub struct FaithBytes {
    pub ptr: *mut u8,
    pub len: usize,
}

/// Published system parameters.
pub struct FaithParams(Arc<SystemParams<Bls12>>);

/// A key pair.
pub struct FaithKeyPair(KeyPair<Bls12>);

/// Storage provider and ledger rooted at one store directory.
pub struct FaithNode {
    params: Arc<SystemParams<Bls12>>,
    sp: StorageProvider<Bls12>,
    ledger: Ledger,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(FaithStatus, String);

type R<T> = Result<T, Fail>;

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

impl From<ProtocolError> for Fail {
    fn from(e: ProtocolError) -> Self {
        let status = match &e {
            ProtocolError::VerificationFailed(_) => FaithStatus::VerificationFailed,
            ProtocolError::Decrypt(EnvelopeError::AuthFailure(_)) => FaithStatus::AuthFailure,
            ProtocolError::Decrypt(_) => FaithStatus::AuthFailure,
            ProtocolError::UnknownFile(_) | ProtocolError::UnknownGrant(_) => FaithStatus::NotFound,
            ProtocolError::Config(_) | ProtocolError::BadId(_) | ProtocolError::DuplicateFile(_) => {
                FaithStatus::InvalidArgument
            }
            ProtocolError::Io { .. } => FaithStatus::Io,
            _ => FaithStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> R<()>) -> FaithStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FaithStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("panic inside faith".into());
            FaithStatus::Panic
        }
    }
}

fn ctx() -> GroupCtx<Bls12> {
    GroupCtx::bls12_381()
}

unsafe fn obj<'a, T>(p: *const T) -> R<&'a T> {
    p.as_ref().ok_or_else(|| Fail(FaithStatus::NullArgument, "null handle".into()))
}

unsafe fn out<'a, T>(p: *mut T) -> R<&'a mut T> {
    p.as_mut().ok_or_else(|| Fail(FaithStatus::NullArgument, "null out-parameter".into()))
}

unsafe fn string(p: *const c_char) -> R<String> {
    if p.is_null() {
        return Err(Fail(FaithStatus::NullArgument, "null string".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(FaithStatus::InvalidArgument, "string is not UTF-8".into()))
}

unsafe fn path(p: *const c_char) -> R<PathBuf> {
    string(p).map(PathBuf::from)
}

unsafe fn bytes<'a>(p: *const u8, len: usize) -> R<&'a [u8]> {
    if p.is_null() {
        return if len == 0 { Ok(&[]) } else { Err(Fail(FaithStatus::NullArgument, "null buffer".into())) };
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

fn owned_bytes(v: Vec<u8>) -> FaithBytes {
    let b = Box::leak(v.into_boxed_slice());
    FaithBytes { ptr: b.as_mut_ptr(), len: b.len() }
}

fn invalid(msg: impl ToString) -> Fail {
    Fail(FaithStatus::InvalidArgument, msg.to_string())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn faith_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn faith_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn faith_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `b` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn faith_bytes_free(b: FaithBytes) {
    if !b.ptr.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.ptr, b.len)));
    }
}

/// Run setup. Proving circuits are built here, which takes seconds.
///
/// # Safety
/// `out_params` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn faith_params_setup(chunk_size: u32, max_depth: u32, out_params: *mut *mut FaithParams) -> FaithStatus {
    guard(|| {
        let slot = out(out_params)?;
        let cfg = SetupConfig { chunk_size, max_depth, alg: HashAlg::Poseidon };
        let p = ta_setup(ctx(), cfg)?;
        *slot = Box::into_raw(Box::new(FaithParams(Arc::new(p))));
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated path and `out_params` valid.
#[no_mangle]
pub unsafe extern "C" fn faith_params_load(dir: *const c_char, out_params: *mut *mut FaithParams) -> FaithStatus {
    guard(|| {
        let slot = out(out_params)?;
        let p = SystemParams::load(ctx(), &path(dir)?)?;
        *slot = Box::into_raw(Box::new(FaithParams(Arc::new(p))));
        Ok(())
    })
}

/// # Safety
/// `params` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn faith_params_publish(params: *const FaithParams, dir: *const c_char) -> FaithStatus {
    guard(|| Ok(obj(params)?.0.publish(&path(dir)?)?))
}

/// Copies the 32-byte parameter digest into `out32`.
///
/// # Safety
/// `params` must be live and `out32` point to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn faith_params_digest(params: *const FaithParams, out32: *mut u8) -> FaithStatus {
    guard(|| {
        let d = obj(params)?.0.digest();
        if out32.is_null() {
            return Err(Fail(FaithStatus::NullArgument, "null digest buffer".into()));
        }
        ptr::copy_nonoverlapping(d.as_ptr(), out32, 32);
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn faith_params_free(params: *mut FaithParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `out_key` must be valid.
#[no_mangle]
pub unsafe extern "C" fn faith_keypair_generate(out_key: *mut *mut FaithKeyPair) -> FaithStatus {
    guard(|| {
        let slot = out(out_key)?;
        *slot = Box::into_raw(Box::new(FaithKeyPair(keygen(&ctx(), &mut OsRng))));
        Ok(())
    })
}

/// Rebuild a key pair from its serialized secret key.
///
/// # Safety
/// `secret` must point to `len` readable bytes and `out_key` be valid.
#[no_mangle]
pub unsafe extern "C" fn faith_keypair_from_secret(
    secret: *const u8,
    len: usize,
    out_key: *mut *mut FaithKeyPair,
) -> FaithStatus {
    guard(|| {
        let slot = out(out_key)?;
        let kp = KeyPair::from_secret_bytes(&ctx(), bytes(secret, len)?).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(FaithKeyPair(kp)));
        Ok(())
    })
}

/// # Safety
/// `key` must be live and `out_bytes` valid.
#[no_mangle]
pub unsafe extern "C" fn faith_keypair_secret(key: *const FaithKeyPair, out_bytes: *mut FaithBytes) -> FaithStatus {
    guard(|| {
        let slot = out(out_bytes)?;
        *slot = owned_bytes(obj(key)?.0.sk.to_bytes(&ctx().engine));
        Ok(())
    })
}

/// # Safety
/// `key` must be live and `out_bytes` valid.
#[no_mangle]
pub unsafe extern "C" fn faith_keypair_public(key: *const FaithKeyPair, out_bytes: *mut FaithBytes) -> FaithStatus {
    guard(|| {
        let slot = out(out_bytes)?;
        *slot = owned_bytes(obj(key)?.0.pk.to_bytes(&ctx().engine));
        Ok(())
    })
}

/// # Safety
/// `key` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn faith_keypair_free(key: *mut FaithKeyPair) {
    if !key.is_null() {
        drop(Box::from_raw(key));
    }
}

/// Open (creating if needed) the store at `store_dir`, which holds `sp/`
/// and `ledger/`.
///
/// # Safety
/// `params` must be live, `store_dir` a NUL-terminated path, `out_node` valid.
#[no_mangle]
pub unsafe extern "C" fn faith_node_open(
    params: *const FaithParams,
    store_dir: *const c_char,
    out_node: *mut *mut FaithNode,
) -> FaithStatus {
    guard(|| {
        let slot = out(out_node)?;
        let params = obj(params)?.0.clone();
        let dir = path(store_dir)?;
        let sp = StorageProvider::open(&dir.join("sp"), params.clone())?;
        let ledger = Ledger::open(&dir.join("ledger")).map_err(ProtocolError::from)?;
        *slot = Box::into_raw(Box::new(FaithNode { params, sp, ledger }));
        Ok(())
    })
}

/// # Safety
/// `node` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn faith_node_free(node: *mut FaithNode) {
    if !node.is_null() {
        drop(Box::from_raw(node));
    }
}

/// Encrypt and store `file_path`. `file_id` may be null for a random id.
/// The id actually used is written to `out_id`.
///
/// # Safety
/// Handles must be live, strings NUL-terminated, `out_id` valid.
#[no_mangle]
pub unsafe extern "C" fn faith_upload(
    node: *const FaithNode,
    owner: *const FaithKeyPair,
    file_path: *const c_char,
    file_id: *const c_char,
    out_id: *mut *mut c_char,
) -> FaithStatus {
    guard(|| {
        let slot = out(out_id)?;
        let n = obj(node)?;
        let id = if file_id.is_null() { None } else { Some(string(file_id)?) };
        let r = do_upload(&n.params, &obj(owner)?.0, Path::new(&path(file_path)?), id.as_deref(), &n.sp, &n.ledger, &mut OsRng)?;
        *slot = c_string(r.object.id);
        Ok(())
    })
}

/// Grant the holder of `grantee_pub` access to `file_id`. Writes the grant id.
///
/// # Safety
/// Handles must be live, `grantee_pub` readable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn faith_grant(
    node: *const FaithNode,
    owner: *const FaithKeyPair,
    grantee_pub: *const u8,
    len: usize,
    file_id: *const c_char,
    out_grant: *mut *mut c_char,
) -> FaithStatus {
    guard(|| {
        let slot = out(out_grant)?;
        let n = obj(node)?;
        let pk = PublicKey::from_bytes(&ctx().engine, bytes(grantee_pub, len)?).map_err(invalid)?;
        let g = do_grant(&n.params, &obj(owner)?.0, &du_request(&pk, &string(file_id)?), &n.sp, &mut OsRng)?;
        *slot = c_string(g.id);
        Ok(())
    })
}

/// Storage provider side: re-encrypt, prove and publish a grant.
///
/// # Safety
/// `node` must be live and `grant_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn faith_process(node: *const FaithNode, grant_id: *const c_char) -> FaithStatus {
    guard(|| {
        let n = obj(node)?;
        sp_process_grant(&n.sp, &string(grant_id)?, &n.ledger, &mut OsRng)?;
        Ok(())
    })
}

/// Verify a published grant. On rejection returns
/// [`FaithStatus::VerificationFailed`] and sets `out_reason`, which may be null.
///
/// # Safety
/// `node` must be live and `grant_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn faith_verify(
    node: *const FaithNode,
    grant_id: *const c_char,
    out_reason: *mut FaithReason,
) -> FaithStatus {
    guard(|| {
        let n = obj(node)?;
        let f = du_fetch(&n.sp, &n.ledger, &string(grant_id)?)?;
        let res = du_verify(&n.params, &f);
        if let Some(r) = out_reason.as_mut() {
            *r = res.as_ref().err().map_or(FaithReason::None, |e| e.reason.into());
        }
        res.map(drop).map_err(|e| ProtocolError::VerificationFailed(e).into())
    })
}

/// Verify, then decrypt a granted file to `out_path`.
///
/// # Safety
/// Handles must be live, strings NUL-terminated; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn faith_retrieve(
    node: *const FaithNode,
    user: *const FaithKeyPair,
    grant_id: *const c_char,
    out_path: *const c_char,
    out_len: *mut u64,
) -> FaithStatus {
    guard(|| {
        let n = obj(node)?;
        let r = du_retrieve(&n.params, &obj(user)?.0, &n.sp, &n.ledger, &string(grant_id)?, &path(out_path)?)?;
        if let Some(l) = out_len.as_mut() {
            *l = r.bytes;
        }
        Ok(())
    })
}

/// Audit the ledger under `store_dir`. Returns
/// [`FaithStatus::LedgerCorrupt`] with `out_first_bad` set to the first bad
/// height when the chain does not check. Out-parameters may be null.
///
/// # Safety
/// `store_dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn faith_audit(store_dir: *const c_char, out_blocks: *mut u64, out_first_bad: *mut u64) -> FaithStatus {
    guard(|| {
        let log = path(store_dir)?.join("ledger").join(BLOCK_LOG);
        let rep = audit_file(&log).map_err(|e| Fail(FaithStatus::Io, e.to_string()))?;
        if let Some(b) = out_blocks.as_mut() {
            *b = rep.blocks;
        }
        if let Some(f) = out_first_bad.as_mut() {
            *f = rep.first_bad.unwrap_or(0);
        }
        match rep.first_bad {
            None => Ok(()),
            Some(h) => Err(Fail(
                FaithStatus::LedgerCorrupt,
                format!("ledger inconsistent at height {h}: {}", rep.detail.unwrap_or_default()),
            )),
        }
    })
}
