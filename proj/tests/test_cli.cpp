#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nlsfam/io.hpp"
#include "nlsfam/runner.hpp"

using namespace nlsfam;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    static fs::path d = [] {
        fs::path p = fs::temp_directory_path() /
                     ("nlsfam_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_cli(const std::string& args, std::string* err_out = nullptr) {
    const char* bin = std::getenv("NLSFAM_CLI");
    REQUIRE(bin != nullptr);
    const fs::path errfile = work_dir() / "stderr.txt";
    const std::string cmd =
        std::string(bin) + " " + args + " 2>" + errfile.string();
    const int status = std::system(cmd.c_str());
    if (err_out) *err_out = slurp(errfile);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("field files round-trip bit-identically") {
    const Grid g{60.0, 512};
    ComplexField f(g);
    for (std::size_t i = 0; i < g.points(); ++i)
        f[i] = cplx{std::sin(0.1 * i) * 1e-7, std::cos(0.2 * i) * 3.0};
    const fs::path p = work_dir() / "field.bin";
    save_field(p.string(), f, 2.5);
    double t = 0.0;
    const ComplexField back = load_field(p.string(), &t);
    CHECK(t == 2.5);
    REQUIRE(back.size() == f.size());
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == f[i]);
    CHECK(back.grid.length() == g.length());
    // sidecar exists
    CHECK(fs::exists(p.string() + ".json"));
}

TEST_CASE("csv writer format") {
    const fs::path p = work_dir() / "table.csv";
    write_csv(p.string(), {"t", "value"}, {{1.0, 0.1}, {2.0, 1e-17}});
    const std::string text = slurp(p);
    CHECK(text.rfind("t,value\n", 0) == 0);
    // values survive a text round trip exactly
    CHECK(std::strtod(format_g17(0.1).c_str(), nullptr) == 0.1);
    CHECK(std::strtod(format_g17(1e-17).c_str(), nullptr) == 1e-17);
}

TEST_CASE("fnv1a reference vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config parsing is strict and canonical") {
    const ExperimentConfig def;
    const ExperimentConfig round =
        ExperimentConfig::from_json_text(def.canonical_json());
    CHECK(round.canonical_json() == def.canonical_json());
    CHECK(round.hash() == def.hash());
    CHECK(round.hash().size() == 16);

    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"pp\": 7}"), validation_error);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"grid\": {\"L\": 80}}"),
                    validation_error);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), validation_error);
    // p <= 5 violates the supercritical requirement
    ExperimentConfig bad = def;
    bad.p = 3.0;
    CHECK_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("run_command rejects an over-cap window with guidance") {
    ExperimentConfig cfg;  // default t0=5, Sn=13, no schedule
    cfg.output_dir = (work_dir() / "overcap").string();
    std::string err;
    const int code = run_command("construct", cfg, 1, false, err);
    CHECK(code == 2);
    CHECK(err.find("schedule") != std::string::npos);
}

TEST_CASE("cli ground-state produces artifacts and exits 0") {
    const fs::path out = work_dir() / "gs";
    const int code = run_cli("ground-state --output " + out.string());
    CHECK(code == 0);
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "qc_00.bin"));
    const std::string summary = slurp(out / "ground_state.json");
    CHECK(summary.find("ode_residual_inf") != std::string::npos);
    // residual reported below threshold
    auto pos = summary.find("ode_residual_inf");
    const double res = std::strtod(summary.c_str() + summary.find(':', pos) + 1, nullptr);
    CHECK(res < 1e-10);
}

TEST_CASE("cli rejects invalid configs with a JSON error and exit 2") {
    const fs::path bad = work_dir() / "bad_p.json";
    spit(bad, "{\"p\": 3.0}");
    std::string err;
    CHECK(run_cli("ground-state --config " + bad.string(), &err) == 2);
    CHECK(err.find("\"code\"") != std::string::npos);
    CHECK(err.find("\"error\"") != std::string::npos);

    const fs::path unk = work_dir() / "unknown_key.json";
    spit(unk, "{\"solitons\": [{\"c\": 1.0, \"v\": 0.0, \"speed\": 2.0}]}");
    CHECK(run_cli("ground-state --config " + unk.string(), &err) == 2);
    CHECK(err.find("speed") != std::string::npos);

    CHECK(run_cli("ground-state --config /nonexistent/cfg.json", &err) == 2);
}

TEST_CASE("cli runs are deterministic") {
    const fs::path a = work_dir() / "det_a";
    const fs::path b = work_dir() / "det_b";
    REQUIRE(run_cli("ground-state --output " + a.string()) == 0);
    REQUIRE(run_cli("ground-state --output " + b.string()) == 0);
    CHECK(slurp(a / "ground_state.json") == slurp(b / "ground_state.json"));
    CHECK(slurp(a / "qc_00.bin") == slurp(b / "qc_00.bin"));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("cli construct on a small window succeeds") {
    const fs::path cfgp = work_dir() / "tiny.json";
    spit(cfgp, R"({
  "solitons": [{"c": 1.0, "v": 0.0}],
  "amplitudes": [0.0],
  "grid": {"L": 60.0, "M": 1024},
  "times": {"t0": 3.0, "Sn": 5.0}
})");
    const fs::path out = work_dir() / "tiny_out";
    std::string err;
    const int code = run_cli("construct --config " + cfgp.string() + " --output " +
                                 out.string(),
                             &err);
    CAPTURE(err);
    CHECK(code == 0);
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "residual_phi.csv"));
}
