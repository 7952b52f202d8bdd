#pragma once

#include <string>
#include <vector>

#include "nlsfam/construct.hpp"
#include "nlsfam/evolve.hpp"
#include "nlsfam/solitons.hpp"

namespace nlsfam {

struct ShootingOptions {
    double newton_tol = 1e-10;
    int max_iter = 5;
    double fd_increment = 1e-7;
};

struct ExperimentConfig {
    int version = 1;
    double p = 7.0;
    std::vector<SolitonParams> solitons{{1.0, 0.0, 0.0, 0.0}};
    std::vector<double> amplitudes{0.0};
    double L = 80.0;
    std::size_t M = 2048;
    double t0 = 5.0;
    double Sn = 13.0;
    std::vector<double> sn_schedule;
    IntegratorConfig integrator;
    ShootingOptions shooting;
    std::string output_dir = "out";
    long seed = 0;

    // Strict parse: unknown keys anywhere are rejected; throws validation_error.
    static ExperimentConfig from_json_text(const std::string& text);
    std::string canonical_json() const;  // stable key order, 17 significant digits
    std::string hash() const;            // FNV-1a of canonical_json()
    void validate() const;
};

// Runs one subcommand (ground-state | spectrum | evolve | construct | diagnose)
// writing its artifacts under output_dir. Returns the process exit code:
// 0 success, 2 validation error, 3 numerical failure; on failure error_json
// holds a machine-readable {"error": ..., "code": ...} object.
int run_command(const std::string& command, const ExperimentConfig& cfg, int threads,
                bool verbose, std::string& error_json);

}  // namespace nlsfam
