#include "nlsfam.h"

#include <string>

#include "nlsfam/runner.hpp"

struct nlsfam_ctx {
    nlsfam::ExperimentConfig cfg;
    bool loaded = false;
    std::string last_error;
};

namespace {

int fail(nlsfam_ctx* ctx, int code, const std::string& what) {
    ctx->last_error = "{\"code\": " + std::to_string(code) + ", \"error\": \"" + what + "\"}";
    return code;
}

}  // namespace

extern "C" {

nlsfam_ctx* nlsfam_create(void) { return new (std::nothrow) nlsfam_ctx; }

void nlsfam_destroy(nlsfam_ctx* ctx) { delete ctx; }

int nlsfam_load_config(nlsfam_ctx* ctx, const char* json_text) {
    if (!ctx) return NLSFAM_ERR_VALIDATION;
    ctx->last_error.clear();
    try {
        ctx->cfg = json_text ? nlsfam::ExperimentConfig::from_json_text(json_text)
                             : nlsfam::ExperimentConfig{};
        ctx->cfg.validate();
        ctx->loaded = true;
        return NLSFAM_OK;
    } catch (const nlsfam::validation_error& e) {
        return fail(ctx, NLSFAM_ERR_VALIDATION, e.what());
    } catch (const std::exception& e) {
        return fail(ctx, NLSFAM_ERR_NUMERIC, e.what());
    }
}

int nlsfam_set_output_dir(nlsfam_ctx* ctx, const char* path) {
    if (!ctx || !path) return NLSFAM_ERR_VALIDATION;
    ctx->cfg.output_dir = path;
    return NLSFAM_OK;
}

int nlsfam_run(nlsfam_ctx* ctx, const char* command, int threads, int verbose) {
    if (!ctx) return NLSFAM_ERR_VALIDATION;
    ctx->last_error.clear();
    if (!command) return fail(ctx, NLSFAM_ERR_VALIDATION, "command is null");
    if (!ctx->loaded) return fail(ctx, NLSFAM_ERR_VALIDATION, "no configuration loaded");
    try {
        std::string err;
        const int code = nlsfam::run_command(command, ctx->cfg, threads, verbose != 0, err);
        if (code != 0) ctx->last_error = err;
        return code;
    } catch (const std::exception& e) {
        return fail(ctx, NLSFAM_ERR_NUMERIC, e.what());
    }
}

const char* nlsfam_last_error(const nlsfam_ctx* ctx) {
    if (!ctx || ctx->last_error.empty()) return nullptr;
    return ctx->last_error.c_str();
}

const char* nlsfam_version(void) { return "1.0.0"; }

}  // extern "C"
