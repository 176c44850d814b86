#include "piecewise/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "piecewise/rng.hpp"

namespace pw {

namespace {

using nlohmann::json;

// Typo guard: every section rejects keys it does not know about.
void check_keys(const json& j, const char* section, const std::set<std::string>& allowed) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw DomainError("config: unknown key '" + item.key() + "' in section '" +
                              section + "'");
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <typename T>
T require(const json& j, const char* section, const char* key) {
    const json* v = find(j, key);
    if (!v)
        throw DomainError(std::string("config: section '") + section + "' requires key '" +
                          key + "'");
    try {
        return v->get<T>();
    } catch (const json::exception&) {
        throw DomainError(std::string("config: key '") + key + "' in section '" + section +
                          "' has the wrong type");
    }
}

template <typename T>
T get_or(const json& j, const char* section, const char* key, T fallback) {
    if (!find(j, key)) return fallback;
    return require<T>(j, section, key);
}

ProblemSpec parse_problem(const json& j) {
    check_keys(j, "problem",
               {"kind", "height", "width", "channels", "box_height", "box_width",
                "drop_fraction", "mask_seed", "factor", "matrix_file", "sigma_z", "x0_file",
                "y_file", "measurement_mode", "data_seed"});
    ProblemSpec p;
    p.kind = require<std::string>(j, "problem", "kind");
    p.height = require<std::size_t>(j, "problem", "height");
    p.width = require<std::size_t>(j, "problem", "width");
    p.channels = get_or<std::size_t>(j, "problem", "channels", 1);
    p.box_height = get_or<std::size_t>(j, "problem", "box_height", 0);
    p.box_width = get_or<std::size_t>(j, "problem", "box_width", 0);
    p.drop_fraction = get_or<double>(j, "problem", "drop_fraction", 0.0);
    p.mask_seed = get_or<std::uint64_t>(j, "problem", "mask_seed", 0);
    p.factor = get_or<std::size_t>(j, "problem", "factor", 0);
    p.matrix_file = get_or<std::string>(j, "problem", "matrix_file", "");
    p.sigma_z = require<double>(j, "problem", "sigma_z");
    p.x0_file = get_or<std::string>(j, "problem", "x0_file", "");
    p.y_file = get_or<std::string>(j, "problem", "y_file", "");
    p.measurement_mode = get_or<std::string>(j, "problem", "measurement_mode", "fixed");
    p.data_seed = get_or<std::uint64_t>(j, "problem", "data_seed", 1234);
    return p;
}

PriorSpec parse_prior(const json& j) {
    check_keys(j, "prior", {"weights", "means", "covs", "cov_scale"});
    PriorSpec p;
    p.weights = require<Vec>(j, "prior", "weights");
    const auto means = require<std::vector<Vec>>(j, "prior", "means");
    p.means = means;
    if (p.means.empty()) throw DomainError("config: prior needs at least one component");
    const std::size_t dim = p.means.front().size();

    if (const json* covs = find(j, "covs")) {
        const auto raw = require<std::vector<std::vector<Vec>>>(j, "prior", "covs");
        for (const auto& rows : raw) {
            Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != m.cols)
                    throw DomainError("config: ragged covariance rows in prior");
                for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
            }
            p.covs.push_back(std::move(m));
        }
        (void)covs;
    } else {
        const double scale = get_or<double>(j, "prior", "cov_scale", 1.0);
        if (!(scale > 0.0)) throw DomainError("config: prior cov_scale must be positive");
        for (std::size_t i = 0; i < p.means.size(); ++i) {
            Matrix m = Matrix::identity(dim);
            for (std::size_t d = 0; d < dim; ++d) m.at(d, d) = scale;
            p.covs.push_back(std::move(m));
        }
    }
    return p;
}

ScheduleSpec parse_schedule(const json& j) {
    check_keys(j, "schedule", {"T", "beta_start", "beta_end"});
    ScheduleSpec s;
    s.T = get_or<int>(j, "schedule", "T", 1000);
    s.beta_start = get_or<double>(j, "schedule", "beta_start", 1e-4);
    s.beta_end = get_or<double>(j, "schedule", "beta_end", 0.02);
    return s;
}

GuidanceSpec parse_guidance(const json& j) {
    check_keys(j, "guidance", {"t0", "k1", "k2", "eta", "rt_schedule"});
    GuidanceSpec g;
    if (const json* t0 = find(j, "t0")) {
        if (t0->is_array())
            g.t0 = require<std::vector<std::size_t>>(j, "guidance", "t0");
        else
            g.t0 = {require<std::size_t>(j, "guidance", "t0")};
    }
    g.k1 = get_or<double>(j, "guidance", "k1", 1.0);
    g.k2 = get_or<double>(j, "guidance", "k2", 1.0);
    g.eta = get_or<double>(j, "guidance", "eta", 1.0);
    g.rt_schedule = get_or<std::string>(j, "guidance", "rt_schedule", "one-minus-alphabar");
    return g;
}

SamplerSpec parse_sampler(const json& j) {
    check_keys(j, "sampler", {"coupling", "snapshot_every"});
    SamplerSpec s;
    s.coupling = get_or<std::string>(j, "sampler", "coupling", "guided-noise");
    s.snapshot_every = get_or<std::size_t>(j, "sampler", "snapshot_every", 0);
    return s;
}

RunSpec parse_run(const json& j) {
    check_keys(j, "run", {"seeds", "seed_base", "seed_count", "out_dir",
                          "save_reconstructions"});
    RunSpec r;
    if (find(j, "seeds")) {
        r.seeds = require<std::vector<std::uint64_t>>(j, "run", "seeds");
    } else if (find(j, "seed_base")) {
        const auto base = require<std::uint64_t>(j, "run", "seed_base");
        const auto count = get_or<std::size_t>(j, "run", "seed_count", 1);
        r.seeds.clear();
        for (std::size_t i = 0; i < count; ++i)
            r.seeds.push_back(Xoshiro256pp::derived_seed(base, i));
    }
    r.out_dir = get_or<std::string>(j, "run", "out_dir", "out");
    r.save_reconstructions = get_or<bool>(j, "run", "save_reconstructions", true);
    return r;
}

void check_referenced_file(const ExperimentConfig& cfg, const std::string& file,
                           const char* what) {
    if (file.empty()) return;
    const std::string full = resolve_config_path(cfg, file);
    if (!std::filesystem::exists(full))
        throw DomainError(std::string("config: ") + what + " '" + full + "' does not exist");
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("config: cannot open '" + path + "'");

    json j;
    try {
        j = json::parse(in, nullptr, true, true);  // allow // and /* */ comments
    } catch (const json::exception& e) {
        throw DomainError("config: parse error in '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw DomainError("config: top level must be an object");
    check_keys(j, "top level", {"problem", "prior", "schedule", "guidance", "sampler", "run"});

    ExperimentConfig cfg;
    if (const json* p = find(j, "problem"))
        cfg.problem = parse_problem(*p);
    else
        throw DomainError("config: missing 'problem' section");
    if (const json* p = find(j, "prior"))
        cfg.prior = parse_prior(*p);
    else
        throw DomainError("config: missing 'prior' section");
    if (const json* p = find(j, "schedule")) cfg.schedule = parse_schedule(*p);
    if (const json* p = find(j, "guidance")) cfg.guidance = parse_guidance(*p);
    if (const json* p = find(j, "sampler")) cfg.sampler = parse_sampler(*p);
    if (const json* p = find(j, "run")) cfg.run = parse_run(*p);

    cfg.base_dir = std::filesystem::path(path).parent_path().string();
    validate_experiment_config(cfg);
    return cfg;
}

void validate_experiment_config(const ExperimentConfig& cfg) {
    const ProblemSpec& p = cfg.problem;
    const std::size_t n = p.height * p.width * p.channels;
    if (p.height == 0 || p.width == 0 || p.channels == 0)
        throw DomainError("config: problem dimensions must be positive");
    if (!(p.sigma_z >= 0.0)) throw DomainError("config: sigma_z must be non-negative");

    if (p.kind == "inpaint-center") {
        if (p.box_height == 0 || p.box_width == 0)
            throw DomainError("config: inpaint-center needs box_height and box_width");
        if (p.box_height > p.height || p.box_width > p.width)
            throw DomainError("config: center box exceeds the image");
    } else if (p.kind == "inpaint-random") {
        if (!(p.drop_fraction >= 0.0 && p.drop_fraction < 1.0))
            throw DomainError("config: drop_fraction must lie in [0, 1)");
    } else if (p.kind == "sr") {
        if (p.factor == 0 || p.height % p.factor != 0 || p.width % p.factor != 0)
            throw DomainError("config: sr factor must divide height and width");
    } else if (p.kind == "dense") {
        if (p.matrix_file.empty()) throw DomainError("config: dense problem needs matrix_file");
    } else {
        throw DomainError("config: unknown problem kind '" + p.kind + "'");
    }
    if (p.measurement_mode != "fixed" && p.measurement_mode != "per-seed")
        throw DomainError("config: measurement_mode must be 'fixed' or 'per-seed'");
    check_referenced_file(cfg, p.matrix_file, "matrix_file");
    check_referenced_file(cfg, p.x0_file, "x0_file");
    check_referenced_file(cfg, p.y_file, "y_file");

    const PriorSpec& pr = cfg.prior;
    if (pr.weights.empty() || pr.weights.size() != pr.means.size() ||
        pr.weights.size() != pr.covs.size())
        throw DomainError("config: prior weights/means/covs lengths disagree");
    const std::size_t dim = pr.means.front().size();
    if (dim != n)
        throw DomainError("config: prior dimension " + std::to_string(dim) +
                          " does not match height*width*channels = " + std::to_string(n));
    for (const auto& m : pr.means)
        if (m.size() != dim) throw DomainError("config: prior means have mixed dimensions");
    for (const auto& c : pr.covs)
        if (c.rows != dim || c.cols != dim)
            throw DomainError("config: prior covariance shape mismatch");

    const ScheduleSpec& s = cfg.schedule;
    if (s.T < 2) throw DomainError("config: schedule T must be >= 2");
    if (!(s.beta_start > 0.0) || !(s.beta_end < 1.0) || s.beta_start > s.beta_end)
        throw DomainError("config: betas must satisfy 0 < beta_start <= beta_end < 1");

    const GuidanceSpec& g = cfg.guidance;
    if (g.t0.empty()) throw DomainError("config: guidance t0 list is empty");
    for (std::size_t t0 : g.t0)
        if (t0 > static_cast<std::size_t>(s.T))
            throw DomainError("config: T0 = " + std::to_string(t0) + " outside [0, " +
                              std::to_string(s.T) + "]");
    if (g.k1 < 0.0 || g.k2 < 0.0) throw DomainError("config: gains must be non-negative");
    if (!(g.eta >= 0.0 && g.eta <= 1.0)) throw DomainError("config: eta must lie in [0, 1]");
    if (g.rt_schedule != "one-minus-alphabar") {
        const std::string prefix = "constant:";
        if (g.rt_schedule.rfind(prefix, 0) != 0)
            throw DomainError("config: unknown rt_schedule '" + g.rt_schedule + "'");
        try {
            if (std::stod(g.rt_schedule.substr(prefix.size())) < 0.0)
                throw DomainError("config: constant rt_schedule must be non-negative");
        } catch (const DomainError&) {
            throw;
        } catch (const std::exception&) {
            throw DomainError("config: malformed rt_schedule '" + g.rt_schedule + "'");
        }
    }

    if (cfg.sampler.coupling != "guided-noise" && cfg.sampler.coupling != "additive")
        throw DomainError("config: coupling must be 'guided-noise' or 'additive'");

    if (cfg.run.seeds.empty()) throw DomainError("config: run needs at least one seed");
    if (cfg.run.out_dir.empty()) throw DomainError("config: out_dir must not be empty");
}

std::string resolve_config_path(const ExperimentConfig& cfg, const std::string& file) {
    std::filesystem::path p(file);
    if (p.is_absolute() || cfg.base_dir.empty()) return file;
    return (std::filesystem::path(cfg.base_dir) / p).string();
}

}  // namespace pw
