#include "piecewise/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "piecewise/metrics.hpp"
#include "piecewise/rng.hpp"
#include "piecewise/textio.hpp"

namespace pw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17e", v);
    return buf;
}

// Atomic emission: write the full payload next to the target, then rename.
void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DomainError("cannot open '" + tmp + "' for writing");
        out << content;
        if (!out) throw NumericalError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

void save_vec_atomic(const std::string& path, const Vec& v) {
    const std::string tmp = path + ".tmp";
    save_vec_text(tmp, v);
    std::filesystem::rename(tmp, path);
}

ImageBuffer as_image(const ExperimentConfig& cfg, const Vec& v) {
    return ImageBuffer{cfg.problem.height, cfg.problem.width, cfg.problem.channels, v};
}

// Draw one sample from the mixture prior: pick a component by weight, then
// mean + L z with L the Cholesky factor of its covariance.
Vec sample_prior(const GmmPrior& prior, Xoshiro256pp& rng) {
    const double u = rng.uniform01();
    std::size_t comp = prior.weights.size() - 1;
    double cum = 0.0;
    for (std::size_t i = 0; i < prior.weights.size(); ++i) {
        cum += prior.weights[i];
        if (u < cum) {
            comp = i;
            break;
        }
    }
    const Cholesky chol = cholesky(prior.covs[comp]);
    const std::size_t n = prior.means[comp].size();
    Vec z(n), x(n);
    for (double& zi : z) zi = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = prior.means[comp][i];
        for (std::size_t j = 0; j <= i; ++j) acc += chol.L.at(i, j) * z[j];
        x[i] = acc;
    }
    return x;
}

Vec noisy_measurement(const LinearOperator& op, const Vec& x_true, double sigma_z,
                      Xoshiro256pp& rng) {
    Vec y = op.apply(x_true);
    for (double& yi : y) yi += sigma_z * rng.normal();
    return y;
}

struct Stats {
    double mean = kNaN;
    double se = kNaN;
};
Stats mean_se(const std::vector<double>& xs) {
    Stats st;
    if (xs.empty()) return st;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    st.mean = mean;
    st.se = xs.size() > 1
                ? std::sqrt(var / static_cast<double>(xs.size() - 1) /
                            static_cast<double>(xs.size()))
                : 0.0;
    return st;
}

}  // namespace

NoiseSchedule build_schedule(const ExperimentConfig& cfg) {
    return build_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start,
                                 cfg.schedule.beta_end);
}

LinearOperator build_operator(const ExperimentConfig& cfg) {
    const ProblemSpec& p = cfg.problem;
    if (p.kind == "inpaint-center")
        return make_center_mask(p.height, p.width, p.channels, p.box_height, p.box_width);
    if (p.kind == "inpaint-random")
        return make_random_mask(p.height, p.width, p.channels, p.drop_fraction, p.mask_seed);
    if (p.kind == "sr") return make_avgpool_sr(p.height, p.width, p.channels, p.factor);
    if (p.kind == "dense") {
        LinearOperator op = load_dense_operator(resolve_config_path(cfg, p.matrix_file));
        if (op.n() != p.height * p.width * p.channels)
            throw DomainError("config: dense matrix width " + std::to_string(op.n()) +
                              " does not match height*width*channels");
        return op;
    }
    throw DomainError("config: unknown problem kind '" + p.kind + "'");
}

GmmPrior build_prior(const ExperimentConfig& cfg) {
    return GmmPrior{cfg.prior.weights, cfg.prior.means, cfg.prior.covs};
}

RtSchedule parse_rt_schedule(const std::string& spec) {
    if (spec == "one-minus-alphabar") return rt_one_minus_alpha_bar();
    const std::string prefix = "constant:";
    if (spec.rfind(prefix, 0) == 0) {
        try {
            return rt_constant(std::stod(spec.substr(prefix.size())));
        } catch (const DomainError&) {
            throw;
        } catch (const std::exception&) {
            throw DomainError("malformed rt_schedule '" + spec + "'");
        }
    }
    throw DomainError("unknown rt_schedule '" + spec + "'");
}

ProblemData prepare_problem_data(const ExperimentConfig& cfg, const LinearOperator& op) {
    const ProblemSpec& p = cfg.problem;
    ProblemData data;

    if (!p.x0_file.empty()) {
        data.x_true = load_vec_text(resolve_config_path(cfg, p.x0_file));
        if (data.x_true.size() != op.n())
            throw DomainError("x0_file length does not match the operator width");
    } else {
        Xoshiro256pp rng(Xoshiro256pp::derived_seed(p.data_seed, 0));
        data.x_true = sample_prior(build_prior(cfg), rng);
    }

    if (!p.y_file.empty()) {
        data.y_fixed = load_vec_text(resolve_config_path(cfg, p.y_file));
        if (data.y_fixed.size() != op.m())
            throw DomainError("y_file length does not match the operator height");
    } else if (p.measurement_mode == "fixed") {
        Xoshiro256pp rng(Xoshiro256pp::derived_seed(p.data_seed, 1));
        data.y_fixed = noisy_measurement(op, data.x_true, p.sigma_z, rng);
    }
    return data;
}

Measurement measurement_for_seed(const ExperimentConfig& cfg, const ProblemData& data,
                                 const LinearOperator& op, std::uint64_t seed) {
    if (!data.y_fixed.empty()) return Measurement{data.y_fixed, cfg.problem.sigma_z};
    // Per-seed mode: fresh measurement noise, decorrelated from the sampler
    // stream by a distinct derivation constant.
    Xoshiro256pp rng(Xoshiro256pp::derived_seed(cfg.problem.data_seed ^ 0x5EED5EEDULL, seed));
    return Measurement{noisy_measurement(op, data.x_true, cfg.problem.sigma_z, rng),
                       cfg.problem.sigma_z};
}

std::vector<RunRow> run_grid(const ExperimentConfig& cfg, unsigned jobs) {
    const NoiseSchedule s = build_schedule(cfg);
    const GmmScoreModel model(build_prior(cfg), s);
    const LinearOperator op = build_operator(cfg);
    const ProblemData data = prepare_problem_data(cfg, op);
    const RtSchedule rt = parse_rt_schedule(cfg.guidance.rt_schedule);

    SamplerOptions opts;
    opts.snapshot_every = cfg.sampler.snapshot_every;
    opts.coupling = cfg.sampler.coupling == "additive" ? GuidanceCoupling::Additive
                                                       : GuidanceCoupling::GuidedNoise;

    std::vector<BatchItem> items;
    std::vector<RunRow> rows;
    for (std::size_t t0 : cfg.guidance.t0) {
        for (std::uint64_t seed : cfg.run.seeds) {
            GuidanceConfig g;
            g.T0 = t0;
            g.k1 = cfg.guidance.k1;
            g.k2 = cfg.guidance.k2;
            g.eta = cfg.guidance.eta;
            g.rt_schedule = rt;
            g.sigma_z = cfg.problem.sigma_z;

            BatchItem item;
            item.cfg = g;
            item.op = &op;
            item.meas = measurement_for_seed(cfg, data, op, seed);
            item.schedule = &s;
            item.model = &model;
            item.seed = seed;
            item.opts = opts;
            items.push_back(std::move(item));

            RunRow row;
            row.problem = cfg.problem.kind;
            row.t0 = t0;
            row.seed = seed;
            rows.push_back(std::move(row));
        }
    }

    const std::vector<BatchResult> results = run_batch(items, jobs > 0 ? jobs : 1);

    const bool save = cfg.run.save_reconstructions;
    if (save) {
        std::filesystem::create_directories(cfg.run.out_dir);
        save_vec_atomic(cfg.run.out_dir + "/x_true.txt", data.x_true);
    }

    const bool ssim_ok = cfg.problem.height >= 11 && cfg.problem.width >= 11;
    const ImageBuffer truth = as_image(cfg, data.x_true);
    for (std::size_t i = 0; i < results.size(); ++i) {
        RunRow& row = rows[i];
        if (!results[i].error.empty()) {
            row.error = results[i].error;
            row.psnr_db = kNaN;
            row.ssim_value = kNaN;
            row.wall_clock_s = kNaN;
            continue;
        }
        const RunRecord& rec = results[i].record;
        const ImageBuffer recon = as_image(cfg, rec.x_final);
        row.psnr_db = psnr(truth, recon);
        row.ssim_value = ssim_ok ? ssim(truth, recon) : kNaN;
        row.wall_clock_s = rec.wall_clock_total;
        row.vjp_calls = rec.vjp_calls;
        row.denoise_calls = rec.denoise_calls;
        if (save) {
            save_vec_atomic(cfg.run.out_dir + "/recon_" + row.problem + "_t0" +
                                std::to_string(row.t0) + "_seed" + std::to_string(row.seed) +
                                ".txt",
                            rec.x_final);
        }
    }
    return rows;
}

bool all_rows_ok(const std::vector<RunRow>& rows) {
    for (const auto& row : rows)
        if (!row.error.empty()) return false;
    return true;
}

std::vector<T0CurveRow> aggregate_t0_curves(const std::vector<RunRow>& rows) {
    std::vector<T0CurveRow> curves;
    for (const auto& row : rows) {
        if (!row.error.empty()) continue;
        T0CurveRow* slot = nullptr;
        for (auto& c : curves)
            if (c.t0 == row.t0 && c.problem == row.problem) slot = &c;
        if (!slot) {
            curves.push_back({});
            slot = &curves.back();
            slot->problem = row.problem;
            slot->t0 = row.t0;
        }
        ++slot->runs;
    }
    for (auto& c : curves) {
        std::vector<double> ps, ss, ws;
        for (const auto& row : rows) {
            if (!row.error.empty() || row.t0 != c.t0 || row.problem != c.problem) continue;
            ps.push_back(row.psnr_db);
            ss.push_back(row.ssim_value);
            ws.push_back(row.wall_clock_s);
        }
        const Stats p = mean_se(ps), s = mean_se(ss), w = mean_se(ws);
        c.psnr_mean = p.mean;
        c.psnr_se = p.se;
        c.ssim_mean = s.mean;
        c.ssim_se = s.se;
        c.wall_clock_mean = w.mean;
        c.wall_clock_se = w.se;
    }
    return curves;
}

std::vector<TheoremRow> run_theorem_checks(std::size_t mc_samples, double injected_fault) {
    const NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    const std::size_t ts[] = {1, 250, 500, 750, 1000};
    const double sigmas[] = {0.1, 1.0};

    Xoshiro256pp rng(20240816);
    std::vector<TheoremRow> rows;
    std::size_t trial = 0;
    for (int rep = 0; rep < 10; ++rep) {
        for (std::size_t t : ts) {
            for (double sigma : sigmas) {
                Matrix c(4, 6);
                for (double& v : c.a) v = rng.normal();
                const LinearOperator op = make_dense(c);
                Vec x(6), v(6), vh(6);
                for (double& e : x) e = rng.normal();
                for (double& e : v) e = rng.normal();
                for (double& e : vh) e = rng.normal();

                auto emit = [&](const TheoremPair& pair, double closed) {
                    TheoremRow row;
                    row.trial = trial++;
                    row.t = t;
                    row.closed_form = closed + injected_fault;
                    row.lemma1_value = gaussian_kl(pair.true_dist, pair.approx_dist);
                    row.mc_estimate = mc_gaussian_kl(pair.true_dist, pair.approx_dist,
                                                     mc_samples, 0xC0FFEE + trial);
                    row.abs_err = std::abs(row.closed_form - row.lemma1_value);
                    row.pass = row.abs_err <= 1e-10 * std::max(1.0, std::abs(row.closed_form));
                    rows.push_back(row);
                };
                emit(theorem1_pair(op, s, t, x, v, sigma), kl_theorem1(op, s, t, v, sigma));
                emit(theorem2_pair(op, s, t, x, v, vh, sigma),
                     kl_theorem2(op, s, t, v, vh, sigma));
            }
        }
    }
    return rows;
}

void write_summary_csv(const std::string& path, const std::vector<RunRow>& rows) {
    std::string out = "problem,T0,seed,psnr,ssim,wall_clock_s,vjp_calls,denoise_calls,error\n";
    for (const auto& r : rows) {
        out += r.problem + ',' + std::to_string(r.t0) + ',' + std::to_string(r.seed) + ',' +
               format_cell(r.psnr_db) + ',' + format_cell(r.ssim_value) + ',' +
               format_cell(r.wall_clock_s) + ',' + std::to_string(r.vjp_calls) + ',' +
               std::to_string(r.denoise_calls) + ',' + r.error + '\n';
    }
    write_text_atomic(path, out);
}

void write_t0_curves_csv(const std::string& path, const std::vector<T0CurveRow>& rows) {
    std::string out =
        "problem,T0,runs,psnr_mean,psnr_se,ssim_mean,ssim_se,wall_clock_mean,wall_clock_se\n";
    for (const auto& r : rows) {
        out += r.problem + ',' + std::to_string(r.t0) + ',' + std::to_string(r.runs) + ',' +
               format_cell(r.psnr_mean) + ',' + format_cell(r.psnr_se) + ',' +
               format_cell(r.ssim_mean) + ',' + format_cell(r.ssim_se) + ',' +
               format_cell(r.wall_clock_mean) + ',' + format_cell(r.wall_clock_se) + '\n';
    }
    write_text_atomic(path, out);
}

void write_theorem_csv(const std::string& path, const std::vector<TheoremRow>& rows) {
    std::string out = "trial,t,closed_form,lemma1_value,mc_estimate,abs_err\n";
    for (const auto& r : rows) {
        out += std::to_string(r.trial) + ',' + std::to_string(r.t) + ',' +
               format_cell(r.closed_form) + ',' + format_cell(r.lemma1_value) + ',' +
               format_cell(r.mc_estimate) + ',' + format_cell(r.abs_err) + '\n';
    }
    write_text_atomic(path, out);
}

void write_coefficient_csv(const std::string& path,
                           const std::vector<CoefficientPoint>& curve) {
    std::string out = "t,coefficient\n";
    for (const auto& p : curve)
        out += std::to_string(p.t) + ',' + format_cell(p.value) + '\n';
    write_text_atomic(path, out);
}

}  // namespace pw
