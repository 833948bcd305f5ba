/* C ABI for the chbell Bell-test library.
 *
 * Keep in sync with chbell-ffi/src/lib.rs; regenerate with
 *   cbindgen --config cbindgen.toml --crate chbell-ffi --output include/chbell.h
 * when the cbindgen tool is available.
 */

#ifndef CHBELL_H
#define CHBELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/* Status codes returned by every fallible call. */
typedef enum ChbellStatus {
  CHBELL_STATUS_OK = 0,
  CHBELL_STATUS_NULL_POINTER = 1,
  CHBELL_STATUS_INVALID_ARGUMENT = 2,
  CHBELL_STATUS_INFEASIBLE = 3,
  CHBELL_STATUS_VALIDATION_FAILED = 4,
  CHBELL_STATUS_JSON_ERROR = 5,
  CHBELL_STATUS_COMPUTATION_FAILED = 6,
} ChbellStatus;

/* Condition codes: which structural assumptions the adversary respects. */
typedef enum ChbellCondition {
  CHBELL_CONDITION_GENERAL = 0,
  CHBELL_CONDITION_FACTORIZABLE = 1,
  CHBELL_CONDITION_NO_SIGNALING = 2,
  CHBELL_CONDITION_NS_FACTORIZABLE = 3,
} ChbellCondition;

/* Functional codes. */
typedef enum ChbellFunctional {
  CHBELL_FUNCTIONAL_CH = 0,
  CHBELL_FUNCTIONAL_CHSH = 1,
} ChbellFunctional;

/* Threshold kinds for chbell_critical_threshold. */
typedef enum ChbellThresholdKind {
  CHBELL_THRESHOLD_P_AT_SMALL_Q = 0,
  CHBELL_THRESHOLD_Q_AT_LARGE_P = 1,
  CHBELL_THRESHOLD_DELTA = 2,
} ChbellThresholdKind;

/* Opaque ensemble handle. */
typedef struct ChbellEnsemble ChbellEnsemble;

/* Closed-form bound: value, the bounds it was evaluated at, and the active
 * piecewise branch as a NUL-terminated label. */
typedef struct ChbellBound {
  double value;
  double p;
  double q;
  char branch[16];
} ChbellBound;

/* Monte-Carlo summary: CH estimate, its standard error, and the ensemble's
 * exact CH value. */
typedef struct ChbellSimResult {
  double j_estimate;
  double std_error;
  double j_exact;
} ChbellSimResult;

#ifdef __cplusplus
extern "C" {
#endif

/* Library version as a static NUL-terminated string. */
const char *chbell_version(void);

/* Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread. */
const char *chbell_last_error(void);

/* Optimal CH value for local models at bounds (p, q) under `condition`. */
ChbellStatus chbell_ch_bound(int condition, double p, double q, ChbellBound *out);

/* Optimal CHSH value; the no-signaling flag of `condition` is ignored. */
ChbellStatus chbell_chsh_bound(int condition, double p, double q, ChbellBound *out);

/* Optimal CH value at symmetric deviation delta (P = 1/4 + delta,
 * Q = 1/4 - delta). */
ChbellStatus chbell_ch_bound_delta(int condition, double delta, double *out_value);

/* Invert a closed form: the critical P, Q, or delta at which it reaches
 * j_target. */
ChbellStatus chbell_critical_threshold(int condition,
                                       int kind,
                                       double j_target,
                                       double *out_value);

/* Build the achieving ensemble for a condition at bounds (p, q).
 * Returns NULL on failure; see chbell_last_error. */
ChbellEnsemble *chbell_attack_build(int condition, double p, double q);

/* Parse an ensemble from its JSON interchange form.
 * Returns NULL on failure; see chbell_last_error. */
ChbellEnsemble *chbell_ensemble_from_json(const char *json);

/* Serialize an ensemble to JSON. Free the result with chbell_string_free. */
char *chbell_ensemble_to_json(const ChbellEnsemble *ensemble);

/* Release a string produced by this library. */
void chbell_string_free(char *s);

/* Release an ensemble handle. */
void chbell_ensemble_free(ChbellEnsemble *ensemble);

/* Number of atoms in an ensemble (0 for NULL). */
size_t chbell_ensemble_atom_count(const ChbellEnsemble *ensemble);

/* Exact Bell value of an ensemble (functional 0 = CH, 1 = CHSH). Fails with
 * CHBELL_STATUS_VALIDATION_FAILED if the averaging constraint is broken. */
ChbellStatus chbell_ensemble_bell_value(const ChbellEnsemble *ensemble,
                                        int functional,
                                        double *out_value);

/* Check an ensemble against bounds (p, q). CHBELL_STATUS_OK when every
 * constraint holds; otherwise CHBELL_STATUS_VALIDATION_FAILED with the
 * violation list in chbell_last_error. */
ChbellStatus chbell_ensemble_validate(const ChbellEnsemble *ensemble, double p, double q);

/* Run a seeded Monte-Carlo experiment on an ensemble. */
ChbellStatus chbell_simulate(const ChbellEnsemble *ensemble,
                             uint64_t n_trials,
                             uint64_t seed,
                             ChbellSimResult *out);

/* Exact oracle optimum over all ensembles feasible at (p, q). */
ChbellStatus chbell_oracle_general(int functional, double p, double q, double *out_value);

/* Grid-certified oracle optimum under the factorizable condition;
 * out_error_bound receives the certificate radius. */
ChbellStatus chbell_oracle_factorizable(int functional,
                                        double p,
                                        double q,
                                        size_t grid_n,
                                        double *out_value,
                                        double *out_error_bound);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CHBELL_H */
