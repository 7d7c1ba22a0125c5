/* Copyright 2026 The plugblend Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef PLUGBLEND_H_
#define PLUGBLEND_H_

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PB_API __declspec(dllexport)
#else
#define PB_API __attribute__((visibility("default")))
#endif

typedef enum pb_status {
  PB_OK = 0,
  PB_ERR_INVALID_ARGUMENT = 1,
  PB_ERR_INVALID_LOGITS = 2,
  PB_ERR_DEGENERATE_WEIGHTS = 3,
  PB_ERR_VOCAB_MISMATCH = 4,
  PB_ERR_PROVIDER_UNAVAILABLE = 5,
  PB_ERR_UNKNOWN_CONTROL_CODE = 6,
  PB_ERR_MODEL_FILE_INVALID = 7,
  PB_ERR_CONTRAST_SET_TOO_SMALL = 8,
  PB_ERR_SHAPE_MISMATCH = 9,
  PB_ERR_INVALID_PENALTY = 10,
  PB_ERR_INVALID_SKETCH = 11,
  PB_ERR_INVALID_LINE_INDEX = 12,
  PB_ERR_INSUFFICIENT_DATA = 13,
  PB_ERR_UNKNOWN_LABEL = 14,
  PB_ERR_NOT_FOUND = 15,
  PB_ERR_CONFLICT = 16,
  PB_ERR_INTERNAL = 100
} pb_status;

typedef struct pb_engine pb_engine;
typedef struct pb_server pb_server;

/* Message of the last failed call on this thread; never NULL. */
PB_API const char* pb_last_error(void);
PB_API const char* pb_status_name(pb_status status);
PB_API const char* pb_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
PB_API void pb_string_free(char* str);

/* Provider specs are a local JSON file or an http:// URL. The classifier spec
 * (lexicon file or URL) may be NULL when no subcommand needs it. */
PB_API pb_status pb_engine_create(const char* base_spec, const char* guide_spec, const char* classifier_spec,
                                  pb_engine** out);
PB_API void pb_engine_free(pb_engine* engine);

/* {"codes": [...]} as advertised by the guide. */
PB_API pb_status pb_engine_codes(pb_engine* engine, char** out_json);

/* sketch set JSON -> {"plan", "weights", "warnings"}. */
PB_API pb_status pb_plan_compile(const char* sketch_json, char** out_json);

/* sketch set JSON + pipeline params JSON (may be NULL) -> story JSON
 * {"lines", "plan", "params", "warnings"}. On a provider failure the lines
 * finished so far are still written to out_json together with "error". */
PB_API pb_status pb_generate_story(pb_engine* engine, const char* sketch_json, const char* params_json,
                                   char** out_json);

/* {"prompts" | "prompts_text", "pairs", "multipliers", "unit_strength", "jobs", "generation"}
 * -> {"cells", "sweeps", "failures", "warnings", "csv", "svg"}. */
PB_API pb_status pb_sweep(pb_engine* engine, const char* request_json, char** out_json);

/* Same request shape as pb_sweep -> {"rows": [{"multiplier", "mean_perplexity", "n"}]}. */
PB_API pb_status pb_eval_ppl(pb_engine* engine, const char* request_json, char** out_json);

/* {"corpus_text", "pair", "seed"} -> {"mean_tau_a", "stories"}. */
PB_API pb_status pb_shuffled_baseline(pb_engine* engine, const char* request_json, char** out_json);

/* Session server; options JSON may carry "persist_dir", "cors_origin" and
 * "params". Providers are attached on first use. */
PB_API pb_status pb_api_server_create(const char* base_spec, const char* guide_spec, const char* options_json,
                                      pb_server** out);
/* Serves the engine's providers over the /v1 protocol. */
PB_API pb_status pb_model_server_create(pb_engine* engine, pb_server** out);
/* Background serving; port 0 picks a free port, written to bound_port. */
PB_API pb_status pb_server_start(pb_server* server, const char* host, int port, int* bound_port);
/* Serves on the calling thread until pb_server_stop. */
PB_API pb_status pb_server_listen(pb_server* server, const char* host, int port);
PB_API pb_status pb_server_stop(pb_server* server);
PB_API void pb_server_free(pb_server* server);

#ifdef __cplusplus
}
#endif

#endif /* PLUGBLEND_H_ */
