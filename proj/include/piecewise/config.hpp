// Experiment configuration for the benchmark driver. Configs live on disk as
// JSON with one section per concern (problem, prior, schedule, guidance,
// sampler, run); load_experiment_config parses and validates them into plain
// structs so the rest of the code never touches the parser.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "piecewise/common.hpp"
#include "piecewise/linalg.hpp"

namespace pw {

// Degradation setup plus how measurements are synthesized. `kind` selects the
// operator family: inpaint-center, inpaint-random, sr, or dense. The image
// geometry (height*width*channels) fixes the signal dimension for every kind;
// dense operators must match it.
struct ProblemSpec {
    std::string kind;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    // inpaint-center
    std::size_t box_height = 0;
    std::size_t box_width = 0;
    // inpaint-random
    double drop_fraction = 0.0;
    std::uint64_t mask_seed = 0;
    // sr
    std::size_t factor = 0;
    // dense
    std::string matrix_file;

    double sigma_z = 0.0;
    // Optional fixed inputs; when absent, x_true is drawn from the prior and
    // y = C x_true + sigma_z * noise using data_seed.
    std::string x0_file;
    std::string y_file;
    // "fixed": one y for the whole grid; "per-seed": fresh noise per run seed.
    std::string measurement_mode = "fixed";
    std::uint64_t data_seed = 1234;
};

// Mixture prior. Either full covariance matrices or the isotropic shorthand
// cov_scale (covariance = cov_scale * I per component).
struct PriorSpec {
    Vec weights;
    std::vector<Vec> means;
    std::vector<Matrix> covs;
};

struct ScheduleSpec {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

// T0 is a list: run/sweep grids execute every entry. Values must lie in
// [0, T]; 0 keeps every step on the high branch.
struct GuidanceSpec {
    std::vector<std::size_t> t0{0};
    double k1 = 1.0;
    double k2 = 1.0;
    double eta = 1.0;
    std::string rt_schedule = "one-minus-alphabar";  // or "constant:<value>"
};

struct SamplerSpec {
    std::string coupling = "guided-noise";  // or "additive"
    std::size_t snapshot_every = 0;
};

struct RunSpec {
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";
    bool save_reconstructions = true;
};

struct ExperimentConfig {
    ProblemSpec problem;
    PriorSpec prior;
    ScheduleSpec schedule;
    GuidanceSpec guidance;
    SamplerSpec sampler;
    RunSpec run;
    // Directory of the config file; referenced files resolve against it.
    std::string base_dir;
};

// Parses and validates; throws DomainError with a readable message on any
// structural problem (unknown kind, T0 out of range, missing referenced
// file, inconsistent prior shapes, ...).
ExperimentConfig load_experiment_config(const std::string& path);

// The validation half of loading, usable on programmatically built configs.
void validate_experiment_config(const ExperimentConfig& cfg);

// Resolves a file referenced by the config relative to its directory.
std::string resolve_config_path(const ExperimentConfig& cfg, const std::string& file);

}  // namespace pw
