/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef CWLEARN_H
#define CWLEARN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CwStatus {
  CW_STATUS_OK = 0,
  CW_STATUS_NULL_POINTER = 1,
  CW_STATUS_DOMAIN = 2,
  CW_STATUS_UNDEFINED = 3,
  CW_STATUS_PARSE = 4,
  CW_STATUS_REJECTED = 5,
  CW_STATUS_NOT_READY = 6,
  CW_STATUS_IO = 7,
  CW_STATUS_JSON = 8,
  CW_STATUS_INVALID_UTF8 = 9,
  CW_STATUS_PANIC = 10,
} CwStatus;

/*
 Online CW learner with its own exploration RNG.
 */
typedef struct CwLearner CwLearner;

/*
 Simulator of saturated stations sharing one channel.
 */
typedef struct CwSimulator CwSimulator;

/*
 Per-second, per-station traffic volumes.
 */
typedef struct CwTrace CwTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null after a
 success. Owned by the library; valid until the next call.
 */
const char *cw_last_error_message(void);

/*
 Release a string returned through an out pointer. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void cw_string_free(char *s);

/*
 ABA window for `actives` transmitters; 1 means no backoff.

 # Safety
 `out_cw` must be valid for writes.
 */
enum CwStatus cw_aba_cw(uint32_t cw_min, uint32_t actives, uint32_t *out_cw);

/*
 Jain fairness index of `n` throughputs.

 # Safety
 `xs` must point to `n` doubles; `out` must be valid for writes.
 */
enum CwStatus cw_jain_index(const double *xs, size_t n, double *out);

/*
 New simulator from a JSON `SimConfig` (null for defaults); every
 station starts active on BEB(15,63).

 # Safety
 `config_json` must be null or a nul-terminated string; `out` must be
 valid for writes.
 */
enum CwStatus cw_simulator_new(const char *config_json, struct CwSimulator **out);

/*
 # Safety
 `sim` must be null or a live handle from `cw_simulator_new`.
 */
void cw_simulator_free(struct CwSimulator *sim);

/*
 Fixed window `cw` on every station; 0 restores BEB(15,63).

 # Safety
 `sim` must be a live handle.
 */
enum CwStatus cw_simulator_set_cw_all(struct CwSimulator *sim, uint32_t cw);

/*
 # Safety
 `sim` must be a live handle.
 */
enum CwStatus cw_simulator_set_active(struct CwSimulator *sim, size_t station, bool active);

/*
 Simulate `seconds` and report the aggregate throughput in bit/s.
 With `metrics_json` non-null, the full period metrics are also
 returned as JSON (free with `cw_string_free`).

 # Safety
 `sim` must be a live handle; `out_tp_bps` valid for writes;
 `metrics_json` null or valid for writes.
 */
enum CwStatus cw_simulator_run(struct CwSimulator *sim,
                               double seconds,
                               double *out_tp_bps,
                               char **metrics_json);

/*
 New learner from a JSON `LearnerConfig` (null for defaults).

 # Safety
 `config_json` null or nul-terminated; `out` valid for writes.
 */
enum CwStatus cw_learner_new(const char *config_json, uint64_t seed, struct CwLearner **out);

/*
 # Safety
 `l` must be null or a live handle from `cw_learner_new`.
 */
void cw_learner_free(struct CwLearner *l);

/*
 CW for the next period given the last period's actives and throughput.

 # Safety
 `l` live; `out_cw` valid for writes.
 */
enum CwStatus cw_learner_next_cw(struct CwLearner *l,
                                 uint32_t actives,
                                 double tp_bps,
                                 uint32_t *out_cw);

/*
 Report the period that ran under the last `cw_learner_next_cw` choice.

 # Safety
 `l` live.
 */
enum CwStatus cw_learner_observe(struct CwLearner *l, uint32_t actives, double tp_bps);

/*
 Model prediction without side effects; `NOT_READY` before any fit.

 # Safety
 `l` live; `out_cw` valid for writes.
 */
enum CwStatus cw_learner_predict(const struct CwLearner *l,
                                 uint32_t actives,
                                 double tp_bps,
                                 uint32_t *out_cw);

/*
 Queue sizes, table and model snapshot as JSON.

 # Safety
 `l` live; `out_json` valid for writes.
 */
enum CwStatus cw_learner_status_json(const struct CwLearner *l, char **out_json);

/*
 Load a trace CSV (`t` column then one column per station).

 # Safety
 `path` nul-terminated; `out` valid for writes.
 */
enum CwStatus cw_trace_load(const char *path, struct CwTrace **out);

/*
 Generate a synthetic trace from JSON `GenParams` (null for defaults).

 # Safety
 `params_json` null or nul-terminated; `out` valid for writes.
 */
enum CwStatus cw_trace_generate(const char *params_json, struct CwTrace **out);

/*
 # Safety
 `t` must be null or a live trace handle.
 */
void cw_trace_free(struct CwTrace *t);

/*
 # Safety
 `t` live; out pointers valid for writes.
 */
enum CwStatus cw_trace_shape(const struct CwTrace *t, size_t *out_stations, size_t *out_seconds);

/*
 Number of stations with traffic in second `t_index`.

 # Safety
 `t` live; `out` valid for writes.
 */
enum CwStatus cw_trace_active_count(const struct CwTrace *t, size_t t_index, uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CWLEARN_H */
