#ifndef COCREG_H
#define COCREG_H

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; nonzero values double as CLI exit codes. */
typedef enum cocreg_status {
  COCREG_OK = 0,
  COCREG_INVALID_INPUT = 2,
  COCREG_COMPUTE_ERROR = 3
} cocreg_status;

/* Opaque handle owning one loaded cohort. */
typedef struct cocreg_cohort cocreg_cohort;

const char* cocreg_version(void);

/* Message from the most recent failing call on this thread, or "". */
const char* cocreg_last_error(void);

/* Loads a dataset directory (manifest.json + per-subject CSVs). */
cocreg_status cocreg_cohort_load(const char* dir, cocreg_cohort** out);
void cocreg_cohort_free(cocreg_cohort* cohort);

/* All of the functions below take a JSON configuration string and return a
 * heap-allocated JSON result in *out_json; release it with
 * cocreg_free_string. Unknown configuration keys are rejected. */

/* config: {"max_k", "threshold", "seed", "tol", "max_iter", "n_restarts",
 *          "constraint", "threads"}; result: fit sequence with DfD trace. */
cocreg_status cocreg_fit(const cocreg_cohort* cohort, const char* config_json,
                         char** out_json);

/* config: {"fit": <component fit>, "B", "level", "seed"};
 * result: percentile intervals plus the draws matrix. */
cocreg_status cocreg_bootstrap(const cocreg_cohort* cohort,
                               const char* config_json, char** out_json);

/* config: {"gamma": [...], "theta": [...]} (orthonormal loading columns
 * as row arrays); result: {"dfd": ...}. */
cocreg_status cocreg_dfd(const cocreg_cohort* cohort, const char* config_json,
                         char** out_json);

/* config: {"variance_fraction"}; result: CPCA-Reg model summary. */
cocreg_status cocreg_cpca_reg(const cocreg_cohort* cohort,
                              const char* config_json, char** out_json);

/* config: {"scenario": <scenario object or preset name>, "replicates",
 *          "seed", "baseline", "bootstrap", "bootstrap_B", ...};
 * result: Monte-Carlo metrics report. */
cocreg_status cocreg_simulate(const char* config_json, char** out_json);

void cocreg_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif /* COCREG_H */
