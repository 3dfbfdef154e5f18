#ifndef DECOR_DECOR_H_
#define DECOR_DECOR_H_

#include <stddef.h>

#if defined(DECOR_BUILDING_LIBRARY)
#define DECOR_API __attribute__((visibility("default")))
#else
#define DECOR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum {
  DECOR_OK = 0,
  DECOR_E_ARGUMENT = 1,   /* null handle or bad call */
  DECOR_E_CONFIG = 2,     /* bad config, flag or option value */
  DECOR_E_IO = 3,         /* file missing or unwritable */
  DECOR_E_CONTRACT = 4,   /* precondition broken, e.g. more crosswalks than slots */
  DECOR_E_PARSE = 5,      /* malformed input file */
  DECOR_E_VALIDATION = 6, /* layout or scenario rejected */
  DECOR_E_NUMERICAL = 7,  /* training diverged */
  DECOR_E_INTERNAL = 8
} decor_status;

typedef struct decor_config decor_config;
typedef struct decor_checkpoint decor_checkpoint;

DECOR_API const char* decor_version(void);
DECOR_API const char* decor_status_name(decor_status status);
/* Message of the last failed call on this thread; empty after success. */
DECOR_API const char* decor_last_error(void);
/* Frees strings returned through char** out-parameters. */
DECOR_API void decor_string_free(char* s);

/* Run configuration. */
DECOR_API decor_status decor_config_default(decor_config** out);
DECOR_API decor_status decor_config_load(const char* path, decor_config** out);
DECOR_API decor_status decor_config_set(decor_config* cfg, const char* section, const char* key,
                                        const char* value);
DECOR_API decor_status decor_config_render(const decor_config* cfg, char** out_text);
DECOR_API decor_status decor_config_validate(const decor_config* cfg);
DECOR_API void decor_config_free(decor_config* cfg);

/* Trained controllers (and the design policy of co-optimization runs). */
DECOR_API decor_status decor_checkpoint_load(const char* path, decor_checkpoint** out);
/* Copy of the configuration the checkpoint was trained with. */
DECOR_API decor_status decor_checkpoint_config(const decor_checkpoint* ck, decor_config** out);
/* "location:width" pairs separated by spaces. */
DECOR_API decor_status decor_checkpoint_final_layout(const decor_checkpoint* ck, char** out_layout);
DECOR_API int decor_checkpoint_has_design(const decor_checkpoint* ck);
DECOR_API void decor_checkpoint_free(decor_checkpoint* ck);

typedef struct {
  long long rounds;
  long long sim_steps;
  long long control_records;
  long long design_tuples;
} decor_train_summary;

/* Writes config.ini, rounds.jsonl, checkpoint.json and metrics.json to
   out_dir. summary may be null. */
DECOR_API decor_status decor_train(const decor_config* cfg, const char* out_dir,
                                   decor_train_summary* summary);

typedef struct {
  const char* sweep;        /* null: "1.0"; "grid", "a:b:step" or "a,b,c" */
  const char* controllers;  /* null: "learned,fixed,unsignalized" */
  const char* layouts;      /* null: "baseline7,designed,designed+extra" */
  const char* scenario;     /* null: the config's scenario */
  int runs;                 /* <= 0: the config's eval runs */
  int has_seed;
  unsigned long long seed;
  double extra_location_m;  /* < 0: corridor length minus 50 m */
  double extra_width_m;     /* <= 0: 5 m */
} decor_eval_options;

DECOR_API void decor_eval_options_init(decor_eval_options* opt);

/* Report JSON goes to *out_json when out_json is not null; files go to
   out_dir when it is not null. ck may be null for fixed and unsignalized
   controllers. */
DECOR_API decor_status decor_eval(const decor_config* cfg, const decor_checkpoint* ck,
                                  const decor_eval_options* opt, const char* out_dir, char** out_json);

/* layout: null for the sequential checkpoint's layout, otherwise a layout
   name of the scenario or a layout-list file. */
DECOR_API decor_status decor_robustness(const decor_checkpoint* coopt, const decor_checkpoint* sequential,
                                        const char* layout, const decor_eval_options* opt,
                                        const char* out_dir, char** out_json);

/* seeds: comma list, null for "1,2,3". budget <= 0 keeps the config's. */
DECOR_API decor_status decor_ablate_reward(const decor_config* cfg, const char* seeds, long long budget,
                                           double alpha, const char* out_dir, char** out_json);

DECOR_API decor_status decor_inspect_design(const decor_checkpoint* ck, int resolution, const char* scenario,
                                            const char* out_dir, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* DECOR_DECOR_H_ */
