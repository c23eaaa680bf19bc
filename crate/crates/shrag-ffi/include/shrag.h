/* C interface for the shrag retrieval pipeline. */

#ifndef SHRAG_H
#define SHRAG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible entry point.
typedef enum ShragStatus {
  SHRAG_STATUS_OK = 0,
  SHRAG_STATUS_NULL_ARGUMENT = 1,
  SHRAG_STATUS_INVALID_UTF8 = 2,
  SHRAG_STATUS_IO_ERROR = 3,
  SHRAG_STATUS_PARSE_ERROR = 4,
  SHRAG_STATUS_PIPELINE_ERROR = 5,
  SHRAG_STATUS_INTERNAL_ERROR = 6,
} ShragStatus;

// An opened corpus: documents, inverted index, and the deterministic
// offline pipeline (statistical keywords, hashing embedder, template
// generator) wired over them.
typedef struct ShragEngine ShragEngine;

// One Boolean search result list. Ids remain valid until the list is
// freed.
typedef struct ShragResults ShragResults;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. Borrowed; valid
// until the next shrag call on the same thread. Never NULL.
const char *shrag_last_error_message(void);

// Open an engine over a JSON-lines corpus file. `seed` drives every
// pseudo-random component, so equal (corpus, seed, query) give equal
// answers. On success `*out` owns the engine.
//
// # Safety
// `corpus_path` must be a NUL-terminated string and `out` a valid
// pointer; the returned engine must be released with
// [`shrag_engine_close`].
enum ShragStatus shrag_engine_open(const char *corpus_path,
                                   uint64_t seed,
                                   struct ShragEngine **out);

// Number of documents in the engine's corpus; 0 for NULL.
//
// # Safety
// `engine` must be NULL or a live pointer from [`shrag_engine_open`].
uint64_t shrag_engine_doc_count(const struct ShragEngine *engine);

// Release an engine. NULL is a no-op.
//
// # Safety
// `engine` must be NULL or a pointer from [`shrag_engine_open`] that has
// not been closed yet.
void shrag_engine_close(struct ShragEngine *engine);

// Boolean search: `query` uses the wire syntax (`|` OR, `+` AND,
// leading `-` NOT), `topk` bounds the result count. On success `*out`
// owns a result list.
//
// # Safety
// `engine` must be a live engine, `query` a NUL-terminated string, and
// `out` a valid pointer; release results with [`shrag_results_free`].
enum ShragStatus shrag_search(const struct ShragEngine *engine,
                              const char *query,
                              uint64_t topk,
                              struct ShragResults **out);

// Number of hits in a result list; 0 for NULL.
//
// # Safety
// `results` must be NULL or a live pointer from [`shrag_search`].
uint64_t shrag_results_len(const struct ShragResults *results);

// Document id of hit `i` (rank order), or NULL when out of range. The
// pointer stays valid until the result list is freed.
//
// # Safety
// `results` must be NULL or a live pointer from [`shrag_search`].
const char *shrag_results_id(const struct ShragResults *results, uint64_t i);

// BM25 score of hit `i`, or NaN when out of range.
//
// # Safety
// `results` must be NULL or a live pointer from [`shrag_search`].
double shrag_results_score(const struct ShragResults *results, uint64_t i);

// Release a result list. NULL is a no-op.
//
// # Safety
// `results` must be NULL or a pointer from [`shrag_search`] that has not
// been freed yet.
void shrag_results_free(struct ShragResults *results);

// Run the full pipeline (keywords, OR ladder, retrieval, re-rank,
// answer) for one query. On success `*out_json` owns a NUL-terminated
// JSON trace: query, keywords, ladder, per-level hits, collected ids,
// top5 scores, and the structured answer.
//
// # Safety
// `engine` must be a live engine, `query`/`lang` NUL-terminated strings,
// and `out_json` a valid pointer; release the string with
// [`shrag_string_free`].
enum ShragStatus shrag_ask(const struct ShragEngine *engine,
                           const char *query,
                           const char *lang,
                           char **out_json);

// Release a string returned through an out-pointer. NULL is a no-op.
//
// # Safety
// `s` must be NULL or a pointer produced by this library that has not
// been freed yet.
void shrag_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SHRAG_H */
