/* C interface to the n2sky runtime and client.
 *
 * Conventions:
 *  - Every function returns n2sky_status; N2SKY_OK is 0.
 *  - Output strings are JSON documents allocated by the library and released
 *    with n2sky_free(). On failure *out is set to NULL.
 *  - After a failure, n2sky_last_error() returns a JSON error document
 *    {"error":{"code":..,"status":..,"message":..}} for the calling thread.
 *  - Handles are opaque; a client handle must not be shared between threads
 *    without external locking.
 */
#ifndef N2SKY_N2SKY_H
#define N2SKY_N2SKY_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define N2SKY_API __attribute__((visibility("default")))
#else
#define N2SKY_API
#endif

typedef enum n2sky_status {
  N2SKY_OK = 0,
  N2SKY_E_INVALID_ARGUMENT = 1,
  N2SKY_E_SYNTAX = 2,
  N2SKY_E_SCHEMA = 3,
  N2SKY_E_UNSUPPORTED = 4,
  N2SKY_E_DIMENSION = 5,
  N2SKY_E_FAILED_PRECONDITION = 6,
  N2SKY_E_NOT_FOUND = 7,
  N2SKY_E_ALREADY_EXISTS = 8,
  N2SKY_E_UNAUTHENTICATED = 9,
  N2SKY_E_PERMISSION_DENIED = 10,
  N2SKY_E_UNAVAILABLE = 11,
  N2SKY_E_IO = 12,
  N2SKY_E_INTERNAL = 13,
  N2SKY_E_TRANSPORT = 14, /* endpoint unreachable */
  N2SKY_E_TIMEOUT = 15
} n2sky_status;

typedef struct n2sky_client n2sky_client;
typedef struct n2sky_deployment n2sky_deployment;
typedef struct n2sky_worker n2sky_worker;

N2SKY_API const char* n2sky_version(void);
/* Stable lower-case name, e.g. "not_found". */
N2SKY_API const char* n2sky_status_name(n2sky_status status);
/* Valid until the next failing call on the same thread. Empty when none. */
N2SKY_API const char* n2sky_last_error(void);
N2SKY_API void n2sky_free(void* p);
/* "trace", "debug", "info", "warn", "error" or "off". */
N2SKY_API n2sky_status n2sky_set_log_level(const char* level);

/* ---- runtime ------------------------------------------------------------ */

/* Starts gateway, registry/monitor, archive and the configured workers from
 * a deployment config file. */
N2SKY_API n2sky_status n2sky_deployment_start(const char* config_path, n2sky_deployment** out);
/* Same, from a JSON document; relative paths resolve against base_dir. */
N2SKY_API n2sky_status n2sky_deployment_start_json(const char* config_json, const char* base_dir,
                                                   n2sky_deployment** out);
/* "http://host:port"; owned by the handle. */
N2SKY_API const char* n2sky_deployment_endpoint(const n2sky_deployment* d);
/* Stops everything and frees the handle. NULL is accepted. */
N2SKY_API void n2sky_deployment_stop(n2sky_deployment* d);

/* Starts a standalone simulation worker from a worker config document. */
N2SKY_API n2sky_status n2sky_worker_start(const char* worker_config_json, n2sky_worker** out);
N2SKY_API const char* n2sky_worker_endpoint(const n2sky_worker* w);
N2SKY_API void n2sky_worker_stop(n2sky_worker* w);

/* Adds a user to a users file, creating the file when absent. */
N2SKY_API n2sky_status n2sky_user_add(const char* users_file, const char* name,
                                      const char* password);

/* ---- client ------------------------------------------------------------- */

N2SKY_API n2sky_status n2sky_client_new(const char* endpoint, n2sky_client** out);
N2SKY_API void n2sky_client_free(n2sky_client* c);
/* Session id sent with every request; NULL clears it. */
N2SKY_API n2sky_status n2sky_client_set_session(n2sky_client* c, const char* session_id);
/* Current session id, "" when none; owned by the handle. */
N2SKY_API const char* n2sky_client_session(const n2sky_client* c);

/* Raw gateway call. body may be NULL. A non-2xx reply maps to its error
 * code and leaves the error document in n2sky_last_error(). */
N2SKY_API n2sky_status n2sky_request(n2sky_client* c, const char* method, const char* path,
                                     const char* body_json, char** out_json);

/* On success the client adopts the new session id. */
N2SKY_API n2sky_status n2sky_login(n2sky_client* c, const char* user, const char* credential,
                                   char** out_json);
N2SKY_API n2sky_status n2sky_logout(n2sky_client* c);

/* descriptor: descriptor text (JSON). policy_json may be NULL (public). */
N2SKY_API n2sky_status n2sky_publish(n2sky_client* c, const char* descriptor,
                                     const char* policy_json, char** out_json);
N2SKY_API n2sky_status n2sky_query_paradigms(n2sky_client* c, const char* query,
                                             char** out_json);
N2SKY_API n2sky_status n2sky_create_network(n2sky_client* c, const char* paradigm_id,
                                            const size_t* layer_sizes, size_t n_layers,
                                            const char* activation, uint64_t seed,
                                            char** out_json);

/* datastream_json follows the datastream wire format; params_json may be
 * NULL for defaults. */
N2SKY_API n2sky_status n2sky_submit_train(n2sky_client* c, const char* network_id,
                                          const char* datastream_json, const char* params_json,
                                          char** out_json);
N2SKY_API n2sky_status n2sky_submit_retrain(n2sky_client* c, const char* training_result,
                                            const char* datastream_json,
                                            const char* params_json, char** out_json);
/* Exactly one of training_result and network_id is non-NULL. */
N2SKY_API n2sky_status n2sky_submit_evaluate(n2sky_client* c, const char* training_result,
                                             const char* network_id,
                                             const char* datastream_json, char** out_json);

/* Error-series entries are returned from offset `since`. */
N2SKY_API n2sky_status n2sky_job_status(n2sky_client* c, const char* job_id, size_t since,
                                        char** out_json);
/* Polls until the job is done or failed. N2SKY_E_TIMEOUT after timeout_ms.
 * A failed job returns N2SKY_OK with phase "failed" in the document. */
N2SKY_API n2sky_status n2sky_wait_job(n2sky_client* c, const char* job_id, uint32_t timeout_ms,
                                      char** out_json);
/* key: "kind/id". */
N2SKY_API n2sky_status n2sky_get_result(n2sky_client* c, const char* key, char** out_json);
N2SKY_API n2sky_status n2sky_ledger(n2sky_client* c, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* N2SKY_N2SKY_H */
