#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nlsfam.h"

namespace {

int report(nlsfam_ctx* ctx, int code) {
    const char* err = nlsfam_last_error(ctx);
    if (code != 0)
        std::fprintf(stderr, "%s\n", err ? err : "{\"code\": 3, \"error\": \"unknown\"}");
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-soliton construction laboratory for supercritical NLS"};
    app.require_subcommand(1);

    std::string config_path, output_dir;
    int threads = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--output", output_dir, "output directory override");
    app.add_option("--threads", threads, "worker thread count");
    app.add_flag("--verbose", verbose, "verbose progress output");

    for (const char* name : {"ground-state", "spectrum", "evolve", "construct", "diagnose"})
        app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    if (threads <= 0) {
        if (const char* env = std::getenv("NLS_MSOL_THREADS")) threads = std::atoi(env);
    }

    nlsfam_ctx* ctx = nlsfam_create();
    if (!ctx) {
        std::fprintf(stderr, "{\"code\": 3, \"error\": \"context allocation failed\"}\n");
        return 3;
    }

    int code = 0;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::fprintf(stderr, "{\"code\": 2, \"error\": \"cannot open config: %s\"}\n",
                         config_path.c_str());
            nlsfam_destroy(ctx);
            return 2;
        }
        std::ostringstream text;
        text << in.rdbuf();
        code = nlsfam_load_config(ctx, text.str().c_str());
    } else {
        code = nlsfam_load_config(ctx, nullptr);
    }
    if (code != 0) {
        code = report(ctx, code);
        nlsfam_destroy(ctx);
        return code;
    }
    if (!output_dir.empty()) nlsfam_set_output_dir(ctx, output_dir.c_str());

    code = report(ctx, nlsfam_run(ctx, command.c_str(), threads, verbose ? 1 : 0));
    nlsfam_destroy(ctx);
    return code;
}
