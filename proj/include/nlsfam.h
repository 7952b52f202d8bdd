#ifndef NLSFAM_H
#define NLSFAM_H

#ifdef __cplusplus
extern "C" {
#endif

/* Opaque experiment context holding a parsed configuration. */
typedef struct nlsfam_ctx nlsfam_ctx;

/* Error codes mirror the CLI exit codes. */
#define NLSFAM_OK 0
#define NLSFAM_ERR_VALIDATION 2
#define NLSFAM_ERR_NUMERIC 3

nlsfam_ctx* nlsfam_create(void);
void nlsfam_destroy(nlsfam_ctx* ctx);

/* Parses a JSON configuration (strict schema). NULL text selects the built-in
 * default configuration. Returns an error code. */
int nlsfam_load_config(nlsfam_ctx* ctx, const char* json_text);

/* Overrides the configured output directory (optional). */
int nlsfam_set_output_dir(nlsfam_ctx* ctx, const char* path);

/* Runs one subcommand: "ground-state", "spectrum", "evolve", "construct",
 * or "diagnose". threads <= 0 selects the default. Returns an error code. */
int nlsfam_run(nlsfam_ctx* ctx, const char* command, int threads, int verbose);

/* JSON description of the last error on this context, or NULL if none.
 * The pointer stays valid until the next call on the context. */
const char* nlsfam_last_error(const nlsfam_ctx* ctx);

const char* nlsfam_version(void);

#ifdef __cplusplus
}
#endif

#endif /* NLSFAM_H */
