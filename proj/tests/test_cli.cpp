// End-to-end checks of the piecewise binary: exit codes, CSV artifacts,
// overrides, and cross-invocation determinism. The binary path is injected
// by the build as PIECEWISE_CLI_PATH.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace {

namespace fs = std::filesystem;

const std::string kScratch = "cli_scratch";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PIECEWISE_CLI_PATH) + " " + args +
                            " > " + kScratch + "/last_output.txt 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string last_output() {
    std::ifstream in(kScratch + "/last_output.txt");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_config(const std::string& path) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << "{\n"
           "  \"problem\": {\"kind\": \"inpaint-random\", \"height\": 4, \"width\": 1,\n"
           "              \"drop_fraction\": 0.25, \"mask_seed\": 3, \"sigma_z\": 0.5},\n"
           "  \"prior\": {\"weights\": [1.0], \"means\": [[0, 0, 0, 0]], \"cov_scale\": 1.0},\n"
           "  \"schedule\": {\"T\": 40},\n"
           "  \"guidance\": {\"t0\": [0, 20]},\n"
           "  \"run\": {\"seeds\": [1, 2], \"out_dir\": \"cli_scratch/default_out\"}\n"
           "}\n";
}

std::string config_path() {
    fs::create_directories(kScratch);
    const std::string path = kScratch + "/exp.json";
    if (!fs::exists(path)) {
        std::ofstream probe(kScratch + "/last_output.txt");
    }
    write_config(path);
    return path;
}

}  // namespace

TEST_CASE("run produces a summary and succeeds") {
    const std::string cfg = config_path();
    CHECK(run_cli("run --config " + cfg + " --out " + kScratch + "/run1") == 0);
    auto lines = read_lines(kScratch + "/run1/summary.csv");
    REQUIRE(lines.size() == 5);  // header + 2 thresholds x 2 seeds
    CHECK(lines[0] == "problem,T0,seed,psnr,ssim,wall_clock_s,vjp_calls,denoise_calls,error");
    auto row = split_csv(lines[1]);
    REQUIRE(row.size() == 9);
    CHECK(row[0] == "inpaint-random");
    CHECK(row[1] == "0");
    CHECK(row[2] == "1");
    CHECK(row[8].empty());  // no error

    // A second invocation reproduces every quality column bit for bit.
    CHECK(run_cli("run --config " + cfg + " --out " + kScratch + "/run2") == 0);
    auto again = read_lines(kScratch + "/run2/summary.csv");
    REQUIRE(again.size() == lines.size());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto a = split_csv(lines[i]);
        auto b = split_csv(again[i]);
        CHECK(a[3] == b[3]);  // psnr
        CHECK(a[4] == b[4]);  // ssim
        CHECK(a[6] == b[6]);  // vjp_calls
    }
}

TEST_CASE("parallel and serial runs write identical reconstructions") {
    const std::string cfg = config_path();
    CHECK(run_cli("run --config " + cfg + " --jobs 1 --out " + kScratch + "/serial") == 0);
    CHECK(run_cli("run --config " + cfg + " --jobs 4 --out " + kScratch + "/parallel") == 0);

    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(kScratch + "/serial")) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("recon_", 0) != 0) continue;
        CHECK(read_file(kScratch + "/serial/" + name) ==
              read_file(kScratch + "/parallel/" + name));
        ++compared;
    }
    CHECK(compared == 4);
}

TEST_CASE("sweep-t0 adds the aggregated curve") {
    const std::string cfg = config_path();
    CHECK(run_cli("sweep-t0 --config " + cfg + " --out " + kScratch + "/sweep") == 0);
    CHECK(fs::exists(kScratch + "/sweep/summary.csv"));
    auto lines = read_lines(kScratch + "/sweep/t0_curves.csv");
    REQUIRE(lines.size() == 3);  // header + one row per threshold
    CHECK(lines[0] ==
          "problem,T0,runs,psnr_mean,psnr_se,ssim_mean,ssim_se,wall_clock_mean,wall_clock_se");
    CHECK(split_csv(lines[1])[1] == "0");
    CHECK(split_csv(lines[2])[1] == "20");
    CHECK(split_csv(lines[1])[2] == "2");  // two seeds per threshold
}

TEST_CASE("override flags reshape the grid") {
    const std::string cfg = config_path();
    CHECK(run_cli("run --config " + cfg + " --t0 5,9 --out " + kScratch + "/t0over") == 0);
    auto lines = read_lines(kScratch + "/t0over/summary.csv");
    REQUIRE(lines.size() == 5);
    CHECK(split_csv(lines[1])[1] == "5");
    CHECK(split_csv(lines[3])[1] == "9");

    // --seed rebuilds the seed list; same flag twice gives the same list.
    CHECK(run_cli("run --config " + cfg + " --seed 77 --out " + kScratch + "/seed_a") == 0);
    CHECK(run_cli("run --config " + cfg + " --seed 77 --out " + kScratch + "/seed_b") == 0);
    auto a = read_lines(kScratch + "/seed_a/summary.csv");
    auto b = read_lines(kScratch + "/seed_b/summary.csv");
    CHECK(a.size() == 5);
    for (std::size_t i = 1; i < a.size(); ++i)
        CHECK(split_csv(a[i])[3] == split_csv(b[i])[3]);
    CHECK(split_csv(a[1])[2] != "1");  // seed actually changed

    // An out-of-range threshold is a config error.
    CHECK(run_cli("run --config " + cfg + " --t0 41 --out " + kScratch + "/bad") == 2);
}

TEST_CASE("validate-theorems emits both csvs and a clean exit") {
    CHECK(run_cli("validate-theorems --out " + kScratch + "/theorems") == 0);
    auto rows = read_lines(kScratch + "/theorems/theorem_checks.csv");
    REQUIRE(rows.size() == 201);
    CHECK(rows[0] == "trial,t,closed_form,lemma1_value,mc_estimate,abs_err");
    auto curve = read_lines(kScratch + "/theorems/coefficient_curve.csv");
    CHECK(curve.size() == 1001);  // default schedule horizon + header
    CHECK(curve[0] == "t,coefficient");

    CHECK(run_cli("validate-theorems --inject-fault --out " + kScratch + "/fault") == 1);
    CHECK(last_output().find("check failed") != std::string::npos);
}

TEST_CASE("coefficient-curve respects the configured horizon") {
    const std::string cfg = config_path();
    CHECK(run_cli("coefficient-curve --config " + cfg + " --out " + kScratch + "/curve") == 0);
    auto lines = read_lines(kScratch + "/curve/coefficient_curve.csv");
    CHECK(lines.size() == 41);  // header + T rows
}

TEST_CASE("config and usage errors exit with code 2") {
    fs::create_directories(kScratch);
    CHECK(run_cli("run --config nonexistent.json") == 2);

    const std::string bad = kScratch + "/bad.json";
    {
        std::ofstream out(bad);
        out << "{ definitely not json";
    }
    CHECK(run_cli("run --config " + bad) == 2);
    CHECK(run_cli("run") == 2);            // missing required --config
    CHECK(run_cli("frobnicate") == 2);     // unknown subcommand
    CHECK(run_cli("run --config " + config_path() + " --eta 3") == 2);
    CHECK(run_cli("--help") == 0);
    CHECK(last_output().find("run") != std::string::npos);
}
