#ifndef AFIE_H
#define AFIE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AfieStatus {
  AFIE_STATUS_OK = 0,
  AFIE_STATUS_NULL_ARGUMENT = 1,
  AFIE_STATUS_INVALID_UTF8 = 2,
  AFIE_STATUS_PARSE = 3,
  AFIE_STATUS_INVALID_ARGUMENT = 4,
  AFIE_STATUS_PIPELINE = 5,
  AFIE_STATUS_UNDEFINED = 6,
  AFIE_STATUS_PANIC = 99,
} AfieStatus;

/**
 * A parsed document.
 */
typedef struct AfieDocument AfieDocument;

/**
 * A configured extraction pipeline.
 */
typedef struct AfiePipeline AfiePipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next library call on the same thread; do not free.
 */
const char *afie_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void afie_string_free(char *s);

/**
 * Parses a document from its JSON element form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum AfieStatus afie_document_parse(const char *json, struct AfieDocument **out);

/**
 * # Safety
 * `doc` must come from [`afie_document_parse`] and not have been freed.
 */
void afie_document_free(struct AfieDocument *doc);

/**
 * Number of elements in `doc`, or 0 for null.
 *
 * # Safety
 * `doc` must be null or a live document.
 */
size_t afie_document_element_count(const struct AfieDocument *doc);

/**
 * Serializes a table given as a JSON array of rows. `format` is one of
 * `plain`, `csv`, `xml`, `html`; null means `plain`.
 *
 * # Safety
 * String arguments must be NUL-terminated or null where allowed.
 */
enum AfieStatus afie_table_serialize(const char *rows_json, const char *format, char **out);

/**
 * Parses a money string and renders it in millions at `precision` places,
 * e.g. `"$65.135 billion"` at 2 gives `"65,135.00"`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum AfieStatus afie_money_normalize(const char *text, uint32_t precision, char **out);

/**
 * Whether `prediction` is within `level` (e.g. `"5%"`) of `truth`. A null
 * prediction counts as absent and is never correct.
 *
 * # Safety
 * `truth` and `level` must be NUL-terminated; `prediction` may be null.
 */
enum AfieStatus afie_reta_correct(const char *truth,
                                  const char *prediction,
                                  const char *level,
                                  bool *out);

/**
 * Relative percentage difference of two accuracies given as decimal strings,
 * rendered as a fraction at `places` decimals.
 *
 * # Safety
 * Both inputs must be NUL-terminated; `out` must be writable.
 */
enum AfieStatus afie_rpd(const char *acc_x, const char *acc_y, uint32_t places, char **out);

/**
 * Builds a pipeline from TOML run configuration. Null means all defaults,
 * which selects the offline mock backend.
 *
 * # Safety
 * `config_toml` must be null or NUL-terminated; `out` must be writable.
 */
enum AfieStatus afie_pipeline_new(const char *config_toml, struct AfiePipeline **out);

/**
 * # Safety
 * `pipeline` must come from [`afie_pipeline_new`] and not have been freed.
 */
void afie_pipeline_free(struct AfiePipeline *pipeline);

/**
 * Segments `doc` under the pipeline's budget and format; writes a JSON array.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum AfieStatus afie_pipeline_segment(const struct AfiePipeline *pipeline,
                                      const struct AfieDocument *doc,
                                      char **out);

/**
 * Extracts one attribute; writes the extraction result as JSON. `company`
 * and `time` may be null; `completion` is `A`, `A_T`, `A_C` or `A_T_C`.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated or null where allowed.
 */
enum AfieStatus afie_pipeline_extract(const struct AfiePipeline *pipeline,
                                      const struct AfieDocument *doc,
                                      const char *attribute,
                                      const char *company,
                                      const char *time,
                                      const char *completion,
                                      char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFIE_H */
