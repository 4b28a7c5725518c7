#ifndef FAITH_H
#define FAITH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum FaithStatus {
  FAITH_STATUS_OK = 0,
  FAITH_STATUS_NULL_ARGUMENT = 1,
  FAITH_STATUS_INVALID_ARGUMENT = 2,
  FAITH_STATUS_IO = 3,
  FAITH_STATUS_NOT_FOUND = 4,
  FAITH_STATUS_VERIFICATION_FAILED = 5,
  FAITH_STATUS_AUTH_FAILURE = 6,
  FAITH_STATUS_LEDGER_CORRUPT = 7,
  FAITH_STATUS_INTERNAL = 8,
  FAITH_STATUS_PANIC = 9,
} FaithStatus;

// Why a proof was rejected.
typedef enum FaithReason {
  FAITH_REASON_NONE = 0,
  FAITH_REASON_MALFORMED = 1,
  FAITH_REASON_INTEGRITY = 2,
  FAITH_REASON_BINDING = 3,
  FAITH_REASON_REENC = 4,
} FaithReason;

// A key pair.
typedef struct FaithKeyPair FaithKeyPair;

// Storage provider and ledger rooted at one store directory.
typedef struct FaithNode FaithNode;

// Published system parameters.
typedef struct FaithParams FaithParams;

// Owned byte buffer. Release with [`faith_bytes_free`].
typedef struct FaithBytes {
  uint8_t *ptr;
  size_t len;
} FaithBytes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call into this library from the same thread.
const char *faith_last_error(void);

// Library version as a static NUL-terminated string.
const char *faith_version(void);

// # Safety
// `s` must come from this library or be null.
void faith_string_free(char *s);

// # Safety
// `b` must come from this library.
void faith_bytes_free(struct FaithBytes b);

// Run setup. Proving circuits are built here, which takes seconds.
//
// # Safety
// `out_params` must be a valid pointer.
enum FaithStatus faith_params_setup(uint32_t chunk_size,
                                    uint32_t max_depth,
                                    struct FaithParams **out_params);

// # Safety
// `dir` must be a NUL-terminated path and `out_params` valid.
enum FaithStatus faith_params_load(const char *dir, struct FaithParams **out_params);

// # Safety
// `params` must be a live handle and `dir` a NUL-terminated path.
enum FaithStatus faith_params_publish(const struct FaithParams *params, const char *dir);

// Copies the 32-byte parameter digest into `out32`.
//
// # Safety
// `params` must be live and `out32` point to 32 writable bytes.
enum FaithStatus faith_params_digest(const struct FaithParams *params, uint8_t *out32);

// # Safety
// `params` must come from this library or be null.
void faith_params_free(struct FaithParams *params);

// # Safety
// `out_key` must be valid.
enum FaithStatus faith_keypair_generate(struct FaithKeyPair **out_key);

// Rebuild a key pair from its serialized secret key.
//
// # Safety
// `secret` must point to `len` readable bytes and `out_key` be valid.
enum FaithStatus faith_keypair_from_secret(const uint8_t *secret,
                                           size_t len,
                                           struct FaithKeyPair **out_key);

// # Safety
// `key` must be live and `out_bytes` valid.
enum FaithStatus faith_keypair_secret(const struct FaithKeyPair *key, struct FaithBytes *out_bytes);

// # Safety
// `key` must be live and `out_bytes` valid.
enum FaithStatus faith_keypair_public(const struct FaithKeyPair *key, struct FaithBytes *out_bytes);

// # Safety
// `key` must come from this library or be null.
void faith_keypair_free(struct FaithKeyPair *key);

// Open (creating if needed) the store at `store_dir`, which holds `sp/`
// and `ledger/`.
//
// # Safety
// `params` must be live, `store_dir` a NUL-terminated path, `out_node` valid.
enum FaithStatus faith_node_open(const struct FaithParams *params,
                                 const char *store_dir,
                                 struct FaithNode **out_node);

// # Safety
// `node` must come from this library or be null.
void faith_node_free(struct FaithNode *node);

// Encrypt and store `file_path`. `file_id` may be null for a random id.
// The id actually used is written to `out_id`.
//
// # Safety
// Handles must be live, strings NUL-terminated, `out_id` valid.
enum FaithStatus faith_upload(const struct FaithNode *node,
                              const struct FaithKeyPair *owner,
                              const char *file_path,
                              const char *file_id,
                              char **out_id);

// Grant the holder of `grantee_pub` access to `file_id`. Writes the grant id.
//
// # Safety
// Handles must be live, `grantee_pub` readable for `len` bytes.
enum FaithStatus faith_grant(const struct FaithNode *node,
                             const struct FaithKeyPair *owner,
                             const uint8_t *grantee_pub,
                             size_t len,
                             const char *file_id,
                             char **out_grant);

// Storage provider side: re-encrypt, prove and publish a grant.
//
// # Safety
// `node` must be live and `grant_id` NUL-terminated.
enum FaithStatus faith_process(const struct FaithNode *node, const char *grant_id);

// Verify a published grant. On rejection returns
// [`FaithStatus::VerificationFailed`] and sets `out_reason`, which may be null.
//
// # Safety
// `node` must be live and `grant_id` NUL-terminated.
enum FaithStatus faith_verify(const struct FaithNode *node,
                              const char *grant_id,
                              enum FaithReason *out_reason);

// Verify, then decrypt a granted file to `out_path`.
//
// # Safety
// Handles must be live, strings NUL-terminated; `out_len` may be null.
enum FaithStatus faith_retrieve(const struct FaithNode *node,
                                const struct FaithKeyPair *user,
                                const char *grant_id,
                                const char *out_path,
                                uint64_t *out_len);

// Audit the ledger under `store_dir`. Returns
// [`FaithStatus::LedgerCorrupt`] with `out_first_bad` set to the first bad
// height when the chain does not check. Out-parameters may be null.
//
// # Safety
// `store_dir` must be NUL-terminated.
enum FaithStatus faith_audit(const char *store_dir, uint64_t *out_blocks, uint64_t *out_first_bad);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAITH_H */
