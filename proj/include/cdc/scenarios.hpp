#ifndef CDC_SCENARIOS_HPP
#define CDC_SCENARIOS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cdc/common.hpp"
#include "cdc/matrix.hpp"
#include "cdc/metrics.hpp"
#include "cdc/rng.hpp"

namespace cdc {

struct ScenarioConfig {
    std::string name;  // ood_proportion, matched_ood, mode_drop_simultaneous,
                       // translation, identical_null
    std::size_t n_real = 5000;
    std::size_t n_synth = 5000;
    std::size_t dim = 32;
    std::size_t k = 5;
    std::size_t steps = 6;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
    Backend backend = Backend::tree;
    unsigned threads = 1;
    GMode g_mode = GMode::interp;
    std::string cache_dir;

    void validate() const {
        if (steps < 2) throw InvalidArgument("scenario: steps must be >= 2");
        if (repeats < 1) throw InvalidArgument("scenario: repeats must be >= 1");
        if (n_real < 2 || n_synth < 2 || dim < 1)
            throw InvalidArgument("scenario: sizes too small");
    }
};

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {
        "ood_proportion", "matched_ood", "mode_drop_simultaneous",
        "translation", "identical_null"};
    return names;
}

struct SweepRow {
    std::size_t step;
    double step_param;
    std::size_t repeat;
    std::string metric;
    double value;
};

struct SweepSummary {
    std::size_t step;
    double step_param;
    std::string metric;
    double mean;
    double stddev;
};

struct SweepResult {
    std::string scenario;
    std::vector<SweepRow> rows;       // sorted by (step, repeat, metric)
    std::vector<SweepSummary> summary;

    double mean_of(std::size_t step, const std::string& metric) const {
        for (const auto& s : summary)
            if (s.step == step && s.metric == metric) return s.mean;
        throw InvalidArgument("no summary for step " + std::to_string(step) +
                              ", metric " + metric);
    }
};

inline FeatureMatrix gen_gaussian(std::size_t n, std::size_t dim,
                                  const std::vector<double>& mean,
                                  std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("gen_gaussian: n must be >= 1");
    if (!mean.empty() && mean.size() != dim)
        throw InvalidArgument("gen_gaussian: mean dimension mismatch");
    FeatureMatrix m(n, dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = m.row(i);
        for (std::size_t t = 0; t < dim; ++t) {
            row[t] = rng.next_gaussian();
            if (!mean.empty()) row[t] += mean[t];
        }
    }
    return m;
}

inline FeatureMatrix gen_gaussian(std::size_t n, std::size_t dim,
                                  std::uint64_t seed) {
    return gen_gaussian(n, dim, {}, seed);
}

// Wide out-of-distribution Gaussian: each sample gets its own variance
// max(4, (10+Z)^2) with Z standard normal, centered at the origin.
inline FeatureMatrix gen_ood(std::size_t n, std::size_t dim,
                             std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("gen_ood: n must be >= 1");
    FeatureMatrix m(n, dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        double z = rng.next_gaussian();
        double scale = std::sqrt(std::max(4.0, (10.0 + z) * (10.0 + z)));
        double* row = m.row(i);
        for (std::size_t t = 0; t < dim; ++t)
            row[t] = scale * rng.next_gaussian();
    }
    return m;
}

namespace detail {

inline std::map<std::string, double> score(const FeatureMatrix& real,
                                           const FeatureMatrix& synth,
                                           const ScenarioConfig& cfg,
                                           const std::vector<std::string>& metrics) {
    MetricEngine engine(real, synth,
                        {.k = cfg.k,
                         .backend = cfg.backend,
                         .threads = cfg.threads,
                         .seed = cfg.seed,
                         .g_mode = cfg.g_mode,
                         .cache_dir = cfg.cache_dir});
    std::map<std::string, double> out;
    for (const auto& name : metrics) out[name] = engine.value(name);
    return out;
}

inline FeatureMatrix concat(const FeatureMatrix& a, std::size_t na,
                            const FeatureMatrix& b, std::size_t nb) {
    FeatureMatrix out(na + nb, a.d);
    std::copy(a.data.begin(), a.data.begin() + na * a.d, out.data.begin());
    std::copy(b.data.begin(), b.data.begin() + nb * b.d,
              out.data.begin() + na * a.d);
    return out;
}

inline void finalize(SweepResult& result, std::size_t steps,
                     std::size_t repeats) {
    std::sort(result.rows.begin(), result.rows.end(),
              [](const SweepRow& a, const SweepRow& b) {
                  if (a.step != b.step) return a.step < b.step;
                  if (a.repeat != b.repeat) return a.repeat < b.repeat;
                  return a.metric < b.metric;
              });
    std::map<std::pair<std::size_t, std::string>, std::vector<double>> groups;
    std::map<std::size_t, double> params;
    for (const auto& row : result.rows) {
        groups[{row.step, row.metric}].push_back(row.value);
        params[row.step] = row.step_param;
    }
    for (const auto& [key, values] : groups) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= double(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var = values.size() > 1 ? var / double(values.size() - 1) : 0.0;
        result.summary.push_back(
            {key.first, params[key.first], key.second, mean, std::sqrt(var)});
    }
    (void)steps;
    (void)repeats;
}

}  // namespace detail

// Bad synthetic samples introduced at proportion x; real set fixed per
// repeat. good count = floor(M(1-x)).
inline SweepResult scenario_ood_proportion(const ScenarioConfig& cfg,
                                           const std::vector<std::string>& metrics) {
    cfg.validate();
    SweepResult result;
    result.scenario = "ood_proportion";
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        FeatureMatrix real = gen_gaussian(cfg.n_real, cfg.dim,
                                          derive_seed(cfg.seed, 1, rep, 0));
        FeatureMatrix good = gen_gaussian(cfg.n_synth, cfg.dim,
                                          derive_seed(cfg.seed, 1, rep, 1));
        FeatureMatrix bad = gen_ood(cfg.n_synth, cfg.dim,
                                    derive_seed(cfg.seed, 1, rep, 2));
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            double x = double(step) / double(cfg.steps - 1);
            std::size_t n_good =
                std::size_t(std::floor(double(cfg.n_synth) * (1.0 - x)));
            std::size_t n_bad = cfg.n_synth - n_good;
            FeatureMatrix synth = detail::concat(good, n_good, bad, n_bad);
            auto values = detail::score(real, synth, cfg, metrics);
            for (const auto& [name, v] : values)
                result.rows.push_back({step, x, rep, name, v});
        }
    }
    detail::finalize(result, cfg.steps, cfg.repeats);
    return result;
}

// Both sets contaminated at the same rate; the synthetic set remains a
// faithful model of the (contaminated) real set, so scores should hold.
inline SweepResult scenario_matched_ood(const ScenarioConfig& cfg,
                                        const std::vector<std::string>& metrics) {
    cfg.validate();
    SweepResult result;
    result.scenario = "matched_ood";
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        FeatureMatrix real_good = gen_gaussian(cfg.n_real, cfg.dim,
                                               derive_seed(cfg.seed, 2, rep, 0));
        FeatureMatrix synth_good = gen_gaussian(cfg.n_synth, cfg.dim,
                                                derive_seed(cfg.seed, 2, rep, 1));
        FeatureMatrix real_bad = gen_ood(cfg.n_real, cfg.dim,
                                         derive_seed(cfg.seed, 2, rep, 2));
        FeatureMatrix synth_bad = gen_ood(cfg.n_synth, cfg.dim,
                                          derive_seed(cfg.seed, 2, rep, 3));
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            double x = 0.25 * double(step) / double(cfg.steps - 1);
            std::size_t nr_good =
                std::size_t(std::floor(double(cfg.n_real) * (1.0 - x)));
            std::size_t ns_good =
                std::size_t(std::floor(double(cfg.n_synth) * (1.0 - x)));
            FeatureMatrix real = detail::concat(real_good, nr_good, real_bad,
                                                cfg.n_real - nr_good);
            FeatureMatrix synth = detail::concat(synth_good, ns_good, synth_bad,
                                                 cfg.n_synth - ns_good);
            auto values = detail::score(real, synth, cfg, metrics);
            for (const auto& [name, v] : values)
                result.rows.push_back({step, x, rep, name, v});
        }
    }
    detail::finalize(result, cfg.steps, cfg.repeats);
    return result;
}

namespace detail {

// Well-separated mode centers: distance 10 along coordinate axes, with a
// growing multiplier once the modes wrap past the dimension.
inline std::vector<double> mode_mean(std::size_t mode, std::size_t dim) {
    std::vector<double> mean(dim, 0.0);
    mean[mode % dim] = 10.0 * double(mode / dim + 1);
    return mean;
}

}  // namespace detail

// Real data: balanced 10-mode mixture, subsampled to 10% per class.
// Synthetic sweeps from balanced to a single retained mode.
inline SweepResult scenario_mode_drop(const ScenarioConfig& cfg,
                                      const std::vector<std::string>& metrics) {
    cfg.validate();
    if (cfg.dim < 2)
        throw InvalidArgument("mode_drop_simultaneous: dim must be >= 2");
    constexpr std::size_t kModes = 10;
    std::size_t real_total = std::max<std::size_t>(cfg.n_real / 10, kModes);
    std::size_t real_per_mode = std::max<std::size_t>(real_total / kModes, 1);
    std::size_t synth_per_mode = std::max<std::size_t>(cfg.n_synth / kModes, 1);
    if (cfg.k >= real_per_mode * kModes)
        throw InvalidArgument("mode_drop_simultaneous: real set too small for k");

    SweepResult result;
    result.scenario = "mode_drop_simultaneous";
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        // per-mode pools; the synthetic pool for mode 0 is large enough to
        // absorb all replaced samples
        std::vector<FeatureMatrix> real_pool, synth_pool;
        for (std::size_t c = 0; c < kModes; ++c) {
            auto mean = detail::mode_mean(c, cfg.dim);
            real_pool.push_back(gen_gaussian(real_per_mode, cfg.dim, mean,
                                             derive_seed(cfg.seed, 3, rep, c)));
            std::size_t pool = c == 0 ? synth_per_mode * kModes : synth_per_mode;
            synth_pool.push_back(gen_gaussian(pool, cfg.dim, mean,
                                              derive_seed(cfg.seed, 3, rep,
                                                          100 + c)));
        }
        FeatureMatrix real(real_per_mode * kModes, cfg.dim);
        for (std::size_t c = 0; c < kModes; ++c)
            std::copy(real_pool[c].data.begin(), real_pool[c].data.end(),
                      real.data.begin() + c * real_per_mode * cfg.dim);

        for (std::size_t step = 0; step < cfg.steps; ++step) {
            double x = double(step) / double(cfg.steps - 1);
            std::vector<std::size_t> kept(kModes);
            std::size_t dropped_total = 0;
            for (std::size_t c = 1; c < kModes; ++c) {
                kept[c] = std::size_t(
                    std::floor(double(synth_per_mode) * (1.0 - x)));
                dropped_total += synth_per_mode - kept[c];
            }
            kept[0] = synth_per_mode + dropped_total;
            FeatureMatrix synth(synth_per_mode * kModes, cfg.dim);
            std::size_t offset = 0;
            for (std::size_t c = 0; c < kModes; ++c) {
                std::copy(synth_pool[c].data.begin(),
                          synth_pool[c].data.begin() + kept[c] * cfg.dim,
                          synth.data.begin() + offset * cfg.dim);
                offset += kept[c];
            }
            auto values = detail::score(real, synth, cfg, metrics);
            for (const auto& [name, v] : values)
                result.rows.push_back({step, x, rep, name, v});
        }
    }
    detail::finalize(result, cfg.steps, cfg.repeats);
    return result;
}

// Synthetic Gaussian translated along the all-ones direction over
// mu in [-1, 1], with a planted real outlier at 3*1 and a planted bad
// synthetic sample at -3*1. The same per-repeat base draws serve every
// grid point.
inline SweepResult scenario_translation(const ScenarioConfig& cfg,
                                        const std::vector<std::string>& metrics) {
    cfg.validate();
    SweepResult result;
    result.scenario = "translation";
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        FeatureMatrix real = gen_gaussian(cfg.n_real, cfg.dim,
                                          derive_seed(cfg.seed, 4, rep, 0));
        FeatureMatrix base = gen_gaussian(cfg.n_synth, cfg.dim,
                                          derive_seed(cfg.seed, 4, rep, 1));
        for (std::size_t t = 0; t < cfg.dim; ++t) real.row(0)[t] = 3.0;
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            double mu = -1.0 + 2.0 * double(step) / double(cfg.steps - 1);
            FeatureMatrix synth = base;
            for (std::size_t j = 0; j < synth.n; ++j)
                for (std::size_t t = 0; t < cfg.dim; ++t) synth.row(j)[t] += mu;
            for (std::size_t t = 0; t < cfg.dim; ++t) synth.row(0)[t] = -3.0;
            auto values = detail::score(real, synth, cfg, metrics);
            for (const auto& [name, v] : values)
                result.rows.push_back({step, mu, rep, name, v});
        }
    }
    detail::finalize(result, cfg.steps, cfg.repeats);
    return result;
}

// Both sets i.i.d. from the same distribution at every step; baseline for
// calibration sanity.
inline SweepResult scenario_identical_null(const ScenarioConfig& cfg,
                                           const std::vector<std::string>& metrics) {
    cfg.validate();
    SweepResult result;
    result.scenario = "identical_null";
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            FeatureMatrix real =
                gen_gaussian(cfg.n_real, cfg.dim,
                             derive_seed(cfg.seed, 5, rep, 2 * step));
            FeatureMatrix synth =
                gen_gaussian(cfg.n_synth, cfg.dim,
                             derive_seed(cfg.seed, 5, rep, 2 * step + 1));
            auto values = detail::score(real, synth, cfg, metrics);
            for (const auto& [name, v] : values)
                result.rows.push_back({step, 0.0, rep, name, v});
        }
    }
    detail::finalize(result, cfg.steps, cfg.repeats);
    return result;
}

inline SweepResult run_sweep(const ScenarioConfig& cfg,
                             const std::vector<std::string>& metrics) {
    const auto& known = metric_names();
    for (const auto& name : metrics)
        if (std::find(known.begin(), known.end(), name) == known.end())
            throw InvalidArgument("unknown metric: " + name);
    if (cfg.name == "ood_proportion") return scenario_ood_proportion(cfg, metrics);
    if (cfg.name == "matched_ood") return scenario_matched_ood(cfg, metrics);
    if (cfg.name == "mode_drop_simultaneous") return scenario_mode_drop(cfg, metrics);
    if (cfg.name == "translation") return scenario_translation(cfg, metrics);
    if (cfg.name == "identical_null") return scenario_identical_null(cfg, metrics);
    std::string valid;
    for (const auto& s : scenario_names()) valid += (valid.empty() ? "" : ", ") + s;
    throw InvalidArgument("unknown scenario '" + cfg.name + "' (valid: " + valid + ")");
}

inline void save_sweep_csv(const std::string& path, const SweepResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out.precision(17);
    out << "scenario,step_param,repeat,metric,value\n";
    for (const auto& row : result.rows)
        out << result.scenario << "," << row.step_param << "," << row.repeat
            << "," << row.metric << "," << row.value << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace cdc

#endif  // CDC_SCENARIOS_HPP
