#ifndef SMD_SCORECARD_H
#define SMD_SCORECARD_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmdVerdict {
  SMD_VERDICT_GOOD = 0,
  SMD_VERDICT_MODERATE = 1,
  SMD_VERDICT_LOW = 2,
  SMD_VERDICT_NOT_EVALUATED = 3,
} SmdVerdict;

typedef enum SmdStatus {
  SMD_STATUS_OK = 0,
  SMD_STATUS_NULL_ARGUMENT = 1,
  SMD_STATUS_INVALID_UTF8 = 2,
  // Bad config, inputs or arguments; the caller can fix these.
  SMD_STATUS_INVALID = 3,
  // The report no longer matches its digest.
  SMD_STATUS_REPORT_CHANGED = 4,
  SMD_STATUS_INTERNAL = 5,
  SMD_STATUS_PANIC = 6,
} SmdStatus;

typedef enum SmdCriterion {
  SMD_CRITERION_CONGRUENCE = 0,
  SMD_CRITERION_COVERAGE = 1,
  SMD_CRITERION_CONSTRAINT = 2,
  SMD_CRITERION_COMPLETENESS = 3,
  SMD_CRITERION_COMPLIANCE = 4,
  SMD_CRITERION_COMPREHENSION = 5,
  SMD_CRITERION_CONSISTENCY = 6,
} SmdCriterion;

typedef enum SmdCardFormat {
  SMD_CARD_FORMAT_STRUCTURED = 0,
  SMD_CARD_FORMAT_MARKDOWN = 1,
  SMD_CARD_FORMAT_HTML = 2,
} SmdCardFormat;

// Built card.
typedef struct SmdCard SmdCard;

// Parsed evaluation config.
typedef struct SmdConfig SmdConfig;

// Sealed quality report.
typedef struct SmdReport SmdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *smd_version(void);

// `E<code>` number of the last failure on this thread, or 0.
uint32_t smd_last_error_code(void);

// Message of the last failure on this thread, or NULL. Valid until the
// next call into this library on the same thread.
const char *smd_last_error_message(void);

// Verdict for a criterion score under the given thresholds.
enum SmdVerdict smd_verdict(double score, double good, double moderate);

// # Safety
// `s` must be NULL or a string returned by this library.
void smd_string_free(char *s);

// Parses a TOML config. Relative paths inside it resolve against
// `base_dir` (NULL for the working directory).
//
// # Safety
// String arguments must be NULL or NUL-terminated; `out` must be writable.
enum SmdStatus smd_config_from_toml(const char *toml_text,
                                    const char *base_dir,
                                    struct SmdConfig **out);

// # Safety
// `config` must be NULL or a handle from [`smd_config_from_toml`].
void smd_config_free(struct SmdConfig *config);

// Evaluates files on disk, as the `evaluate` command does. `real`, `table`
// and `images` may be NULL.
//
// # Safety
// `config` must be a live handle; strings NULL or NUL-terminated; `out`
// writable.
enum SmdStatus smd_evaluate_files(const struct SmdConfig *config,
                                  const char *real,
                                  const char *synthetic,
                                  const char *table,
                                  const char *images,
                                  struct SmdReport **out);

// Evaluates row-major embedding matrices of width `dim`. `real` may be
// NULL for metrics that need only the synthetic set.
//
// # Safety
// `real` (if not NULL) must hold `real_rows * dim` doubles and `synthetic`
// `synthetic_rows * dim`; `config` must be a live handle; `out` writable.
enum SmdStatus smd_evaluate_embeddings(const struct SmdConfig *config,
                                       const double *real,
                                       uintptr_t real_rows,
                                       const double *synthetic,
                                       uintptr_t synthetic_rows,
                                       uintptr_t dim,
                                       struct SmdReport **out);

// Parses a report serialized by [`smd_report_to_json`] or the CLI.
//
// # Safety
// `json` must be NUL-terminated; `out` writable.
enum SmdStatus smd_report_from_json(const char *json, struct SmdReport **out);

// # Safety
// `report` must be a live handle; `out` writable. Free the result with
// [`smd_string_free`].
enum SmdStatus smd_report_to_json(const struct SmdReport *report, char **out);

// Global score and verdict of one criterion. The score is NaN when the
// criterion was not evaluated.
//
// # Safety
// `report` must be a live handle; `score` and `verdict` writable.
enum SmdStatus smd_report_criterion(const struct SmdReport *report,
                                    enum SmdCriterion criterion,
                                    double *score,
                                    enum SmdVerdict *verdict);

// # Safety
// `report` must be NULL or a handle from this library.
void smd_report_free(struct SmdReport *report);

// Builds a card from a TOML manifest and an optional report.
//
// # Safety
// `manifest_toml` must be NUL-terminated; `report` NULL or a live handle;
// `out` writable.
enum SmdStatus smd_card_build(const char *manifest_toml,
                              const struct SmdReport *report,
                              struct SmdCard **out);

// # Safety
// `card` must be a live handle; `out` writable. Free the result with
// [`smd_string_free`].
enum SmdStatus smd_card_render(const struct SmdCard *card, enum SmdCardFormat format, char **out);

// # Safety
// `card` must be NULL or a handle from this library.
void smd_card_free(struct SmdCard *card);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMD_SCORECARD_H */
