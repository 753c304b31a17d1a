#ifndef HANDMORPH_H
#define HANDMORPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_ARGUMENT = 1,
  HM_STATUS_INVALID_UTF8 = 2,
  // Input text is not valid JSON or TOML for the expected type.
  HM_STATUS_PARSE = 3,
  // Input parsed but breaks a structural rule.
  HM_STATUS_INVALID = 4,
  HM_STATUS_IO = 5,
  // The model provider (stub fixtures included) failed.
  HM_STATUS_PROVIDER = 6,
  HM_STATUS_CONFIG = 7,
  // The pipeline ran but produced no surviving design.
  HM_STATUS_RUN_FAILED = 8,
  HM_STATUS_PANIC = 9,
} HmStatus;

// Node kinds counted by [`hm_graph_count_kind`].
typedef enum HmNodeKind {
  HM_NODE_KIND_PALM = 0,
  HM_NODE_KIND_FINGER_ROOT = 1,
  HM_NODE_KIND_JOINT = 2,
  HM_NODE_KIND_LINK = 3,
  HM_NODE_KIND_MOUNT = 4,
  HM_NODE_KIND_TENDON = 5,
  HM_NODE_KIND_CONNECTOR = 6,
} HmNodeKind;

typedef struct HmConfig HmConfig;

typedef struct HmGrammar HmGrammar;

typedef struct HmGraph HmGraph;

typedef struct HmParams HmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *hm_last_error(void);

// Library version as a static NUL-terminated string.
const char *hm_version(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void hm_string_free(char *s);

// Default configuration.
struct HmConfig *hm_config_default(void);

// Loads and checks a TOML configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_config` must be writable.
enum HmStatus hm_config_load(const char *path, struct HmConfig **out_config);

// # Safety
// `config` must come from this library or be NULL.
void hm_config_free(struct HmConfig *config);

// Parses a grammar document.
//
// # Safety
// `json` must be NUL-terminated; `out_grammar` must be writable.
enum HmStatus hm_grammar_parse(const char *json, struct HmGrammar **out_grammar);

// # Safety
// `grammar` must come from this library or be NULL.
void hm_grammar_free(struct HmGrammar *grammar);

// Expands a grammar into its component graph.
//
// # Safety
// `grammar` must be a live handle; `out_graph` must be writable.
enum HmStatus hm_grammar_expand(const struct HmGrammar *grammar, struct HmGraph **out_graph);

// # Safety
// `graph` must come from this library or be NULL.
void hm_graph_free(struct HmGraph *graph);

// Number of nodes of `kind`; 0 for a NULL graph.
//
// # Safety
// `graph` must be a live handle or NULL.
size_t hm_graph_count_kind(const struct HmGraph *graph, enum HmNodeKind kind);

// Canonical JSON of the graph.
//
// # Safety
// `graph` must be a live handle; `out_json` must be writable.
enum HmStatus hm_graph_to_json(const struct HmGraph *graph, char **out_json);

// Runs the rule checks on a grammar document. `out_report_json` (optional)
// receives the findings as JSON. A grammar that fails to parse still yields
// a report with its R0 finding and `HM_STATUS_OK`.
//
// # Safety
// `json` must be NUL-terminated; out-pointers must be writable or NULL
// where marked optional.
enum HmStatus hm_validate_grammar(const char *json,
                                  double *out_rule_score,
                                  int *out_has_critical,
                                  char **out_report_json);

// Parses and checks a canonical parameter file.
//
// # Safety
// `json` must be NUL-terminated; `out_params` must be writable.
enum HmStatus hm_params_parse(const char *json, struct HmParams **out_params);

// # Safety
// `params` must come from this library or be NULL.
void hm_params_free(struct HmParams *params);

// Runs the constraint filter. `grasp_type` and `config` may be NULL (no
// prior multipliers, default config). `out_violations_json` (optional)
// receives the violated check ids as a JSON array.
//
// # Safety
// Pointers must be live handles, NUL-terminated strings or NULL as noted.
enum HmStatus hm_params_check(const struct HmParams *params,
                              const char *grasp_type,
                              const struct HmConfig *config,
                              int *out_passed,
                              char **out_violations_json);

// Grasp force level in [0, 1] for the parameters' derived geometry.
//
// # Safety
// As for [`hm_params_check`].
enum HmStatus hm_params_gfl(const struct HmParams *params,
                            const char *grasp_type,
                            const struct HmConfig *config,
                            double *out_gfl);

// OpenSCAD source for the parameters using the built-in template. Does not
// run the constraint filter.
//
// # Safety
// As for [`hm_params_check`]; `out_scad` must be writable.
enum HmStatus hm_params_emit_scad(const struct HmParams *params,
                                  const char *grasp_type,
                                  const struct HmConfig *config,
                                  char **out_scad);

// Runs the whole pipeline offline against a stub fixture directory and
// writes artifacts to `out_dir`. `out_summary_json` (optional) receives the
// run summary. Returns `HM_STATUS_RUN_FAILED` when no design survives.
//
// # Safety
// Strings must be NUL-terminated; `config` may be NULL.
enum HmStatus hm_run_stub(const char *task,
                          const char *fixtures_dir,
                          const char *out_dir,
                          const struct HmConfig *config,
                          char **out_summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HANDMORPH_H */
