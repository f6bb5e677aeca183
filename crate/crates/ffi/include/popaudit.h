#ifndef POPAUDIT_H
#define POPAUDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PopauditStatus {
  POPAUDIT_STATUS_OK = 0,
  POPAUDIT_STATUS_NULL_POINTER = 1,
  POPAUDIT_STATUS_INVALID_UTF8 = 2,
  POPAUDIT_STATUS_CONFIG = 3,
  POPAUDIT_STATUS_IO = 4,
  POPAUDIT_STATUS_PARSE = 5,
  POPAUDIT_STATUS_INVALID_DATA = 6,
  POPAUDIT_STATUS_DIVERGED = 7,
  POPAUDIT_STATUS_NOT_FOUND = 8,
  POPAUDIT_STATUS_MODEL_FAILED = 9,
  POPAUDIT_STATUS_PANIC = 10,
} PopauditStatus;

typedef enum PopauditFormat {
  /**
   * `ratings.dat` and `movies.dat` of MovieLens 1M.
   */
  POPAUDIT_FORMAT_ML1M = 0,
  /**
   * `u.data` and `u.item` of MovieLens 100K.
   */
  POPAUDIT_FORMAT_ML100K = 1,
} PopauditFormat;

typedef enum PopauditBasis {
  POPAUDIT_BASIS_ITEM = 0,
  POPAUDIT_BASIS_GENRE = 1,
} PopauditBasis;

typedef enum PopauditGroup {
  POPAUDIT_GROUP_BLOCKBUSTER = 0,
  POPAUDIT_GROUP_DIVERSE = 1,
  POPAUDIT_GROUP_NICHE = 2,
} PopauditGroup;

/**
 * A loaded rating dataset with genres attached.
 */
typedef struct PopauditDataset PopauditDataset;

/**
 * The result of a full audit run.
 */
typedef struct PopauditReport PopauditReport;

typedef struct PopauditStats {
  size_t users;
  size_t items;
  size_t interactions;
  double density;
} PopauditStats;

typedef struct PopauditGroupMetrics {
  size_t members;
  double app;
  double arp;
  double pl;
  double mean_user_pl;
  double upd;
} PopauditGroupMetrics;

typedef struct PopauditAccuracy {
  double precision;
  double recall;
  double ndcg;
  size_t evaluated_users;
} PopauditAccuracy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *popaudit_version(void);

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next popaudit call on this thread.
 */
const char *popaudit_last_error_message(void);

/**
 * Load a rating file and its genre file.
 *
 * # Safety
 * `ratings_path` and `genres_path` must be NUL-terminated strings and `out`
 * a valid pointer. On success `*out` owns a handle to release with
 * `popaudit_dataset_free`.
 */
enum PopauditStatus popaudit_dataset_load(const char *ratings_path,
                                          const char *genres_path,
                                          enum PopauditFormat format,
                                          struct PopauditDataset **out);

/**
 * # Safety
 * `dataset` must be null or a handle from `popaudit_dataset_load` that has
 * not been freed yet.
 */
void popaudit_dataset_free(struct PopauditDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum PopauditStatus popaudit_dataset_stats(const struct PopauditDataset *dataset,
                                           struct PopauditStats *out);

/**
 * Run a full audit from a JSON config document. Relative paths inside the
 * config resolve against `base_dir`, which may be null for the current
 * directory.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string, `base_dir` null or a
 * NUL-terminated string and `out` a valid pointer. On success `*out` owns a
 * handle to release with `popaudit_report_free`.
 */
enum PopauditStatus popaudit_audit_run(const char *config_json,
                                       const char *base_dir,
                                       struct PopauditReport **out);

/**
 * # Safety
 * `report` must be null or a handle from `popaudit_audit_run` that has not
 * been freed yet.
 */
void popaudit_report_free(struct PopauditReport *report);

/**
 * Write every CSV table, `audit.json` and the text summary into `dir`.
 *
 * # Safety
 * `report` must be a live handle and `dir` a NUL-terminated string.
 */
enum PopauditStatus popaudit_report_emit(const struct PopauditReport *report, const char *dir);

/**
 * Number of algorithms in the report, including failed ones. Returns 0 for
 * a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t popaudit_report_algorithm_count(const struct PopauditReport *report);

/**
 * Group-level popularity metrics of one algorithm. `algorithm` is matched
 * case-insensitively.
 *
 * # Safety
 * `report` must be a live handle, `algorithm` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum PopauditStatus popaudit_report_group_metrics(const struct PopauditReport *report,
                                                  const char *algorithm,
                                                  enum PopauditBasis basis_kind,
                                                  enum PopauditGroup user_group,
                                                  struct PopauditGroupMetrics *out);

/**
 * Mean top-10 accuracy of one algorithm.
 *
 * # Safety
 * `report` must be a live handle, `algorithm` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum PopauditStatus popaudit_report_accuracy(const struct PopauditReport *report,
                                             const char *algorithm,
                                             struct PopauditAccuracy *out);

/**
 * Percentage of users in `item_group` (item basis) that fall into
 * `genre_group` (genre basis).
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum PopauditStatus popaudit_report_overlap(const struct PopauditReport *report,
                                            enum PopauditGroup item_group,
                                            enum PopauditGroup genre_group,
                                            double *out);

/**
 * Serialise the report as the JSON document written to `audit.json`. The
 * string must be released with `popaudit_string_free`.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum PopauditStatus popaudit_report_to_json(const struct PopauditReport *report, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library that has not been
 * freed yet.
 */
void popaudit_string_free(char *s);

/**
 * Jensen-Shannon divergence in bits between two Head/Mid/Tail ratio vectors.
 *
 * # Safety
 * `p` and `q` must each point to 3 readable doubles and `out` must be valid.
 */
enum PopauditStatus popaudit_jsd(const double *p, const double *q, double *out);

/**
 * `(arp - app) / app`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PopauditStatus popaudit_popularity_lift(double app, double arp, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POPAUDIT_H */
