#ifndef CDC_METRICS_HPP
#define CDC_METRICS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdc/calibration.hpp"
#include "cdc/clipped.hpp"
#include "cdc/common.hpp"
#include "cdc/matrix.hpp"
#include "cdc/neighbors.hpp"
#include "cdc/parallel.hpp"

namespace cdc {

struct MetricConfig {
    std::size_t k = 5;
    Backend backend = Backend::tree;
    unsigned threads = 1;
    std::uint64_t seed = 0;
    GMode g_mode = GMode::interp;
    std::string cache_dir;  // calibration table cache; empty disables
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "iprecision",      "irecall",
        "density",         "coverage",
        "sym_precision",   "sym_recall",
        "clipped_density", "clipped_density_unnorm",
        "clipped_density_real",
        "clipped_coverage", "clipped_coverage_unnorm"};
    return names;
}

// Computes every metric from shared intermediates: one k-NN table and one
// ball-membership pass feed precision/recall/density/coverage; the
// clipped-ball pass feeds the clipped metrics and the leave-one-out
// calibration. All reductions are over integer counts or fixed-order
// sums, so results do not depend on the thread count.
class MetricEngine {
public:
    MetricEngine(const FeatureMatrix& real, const FeatureMatrix& synth,
                 MetricConfig cfg)
        : real_(real), synth_(synth), cfg_(cfg) {
        real_.validate("real");
        synth_.validate("synth");
        if (real_.d != synth_.d)
            throw InvalidArgument("real and synth dimension mismatch: " +
                                  std::to_string(real_.d) + " vs " +
                                  std::to_string(synth_.d));
        if (cfg_.threads == 0) cfg_.threads = 1;
    }

    std::size_t n() const { return real_.n; }
    std::size_t m() const { return synth_.n; }

    double value(const std::string& name) {
        if (name == "iprecision") return improved_precision();
        if (name == "irecall") return improved_recall();
        if (name == "density") return density();
        if (name == "coverage") return coverage();
        if (name == "sym_precision") return sym_precision();
        if (name == "sym_recall") return sym_recall();
        if (name == "clipped_density") return clipped_density();
        if (name == "clipped_density_unnorm") return clipped_density_unnorm();
        if (name == "clipped_density_real") return clipped_density_real();
        if (name == "clipped_coverage") return clipped_coverage();
        if (name == "clipped_coverage_unnorm") return clipped_coverage_unnorm();
        throw InvalidArgument("unknown metric: " + name);
    }

    double improved_precision() {
        require_k_real("iprecision");
        ensure_real_ball_pass();
        std::size_t hit = 0;
        for (std::size_t j = 0; j < m(); ++j)
            if (synth_in_real_balls_[j] > 0) ++hit;
        return double(hit) / double(m());
    }

    double improved_recall() {
        require_k_synth("irecall");
        ensure_synth_ball_pass();
        std::size_t hit = 0;
        for (std::size_t i = 0; i < n(); ++i)
            if (real_in_synth_balls_[i] > 0) ++hit;
        return double(hit) / double(n());
    }

    double density() {
        require_k_real("density");
        ensure_real_ball_pass();
        std::uint64_t total = 0;
        for (std::size_t j = 0; j < m(); ++j) total += synth_in_real_balls_[j];
        return double(total) / (double(cfg_.k) * double(m()));
    }

    double coverage() {
        require_k_real("coverage");
        ensure_real_ball_pass();
        std::size_t covered = 0;
        for (std::size_t i = 0; i < n(); ++i)
            if (real_ball_occupancy_[i] > 0) ++covered;
        return double(covered) / double(n());
    }

    // Coverage with real and synthetic roles swapped: the fraction of
    // synthetic samples whose own k-NN ball contains at least one real
    // sample.
    double complementary_precision() {
        require_k_synth("sym_precision");
        ensure_synth_ball_pass();
        std::size_t hit = 0;
        for (std::size_t j = 0; j < m(); ++j)
            if (synth_ball_occupancy_[j] > 0) ++hit;
        return double(hit) / double(m());
    }

    double sym_precision() {
        return std::min(improved_precision(), complementary_precision());
    }

    double sym_recall() { return std::min(improved_recall(), coverage()); }

    double clipped_density_unnorm() {
        require_k_real("clipped_density_unnorm");
        ensure_clipped_ball_pass();
        double acc = 0.0;
        for (std::size_t j = 0; j < m(); ++j)
            acc += std::min(double(synth_in_clipped_balls_[j]) / double(cfg_.k),
                            1.0);
        return acc / double(m());
    }

    double clipped_density_real() {
        require_k_real("clipped_density_real");
        ensure_clipped_ball_pass();
        double acc = 0.0;
        for (std::size_t i = 0; i < n(); ++i)
            acc += std::min(double(real_in_clipped_balls_[i]) / double(cfg_.k),
                            1.0);
        return acc / double(n());
    }

    double clipped_density() {
        double unnorm = clipped_density_unnorm();
        double real_cal = clipped_density_real();
        if (real_cal == 0.0)
            throw DegenerateCalibration(
                "clipped_density: degenerate reference calibration "
                "(clipped_density_real = 0)");
        return std::min(unnorm / real_cal, 1.0);
    }

    // Appendix-style fast path: for each real sample, its k nearest
    // synthetic samples are found and those within the ball counted.
    double clipped_coverage_unnorm() {
        require_k_real("clipped_coverage_unnorm");
        ensure_clipped_coverage_pass();
        // per-term division in index order, matching the radius path exactly
        double acc = 0.0;
        for (std::size_t i = 0; i < n(); ++i)
            acc += std::min(double(clipped_coverage_counts_[i]) / double(cfg_.k),
                            1.0);
        return acc / double(n());
    }

    // Reference path by direct ball occupancy; must agree exactly with
    // the fast path.
    double clipped_coverage_unnorm_by_radius() {
        require_k_real("clipped_coverage_unnorm");
        ensure_real_ball_pass();
        double acc = 0.0;
        for (std::size_t i = 0; i < n(); ++i)
            acc += std::min(double(real_ball_occupancy_[i]) / double(cfg_.k), 1.0);
        return acc / double(n());
    }

    double clipped_coverage() {
        double unnorm = clipped_coverage_unnorm();
        const CalibrationTable& table = calibration_table();
        return table.apply_g(unnorm, cfg_.g_mode);
    }

    const CalibrationTable& calibration_table() {
        if (!calib_) {
            CalibrationTable table;
            bool loaded = false;
            std::string cache_path;
            if (!cfg_.cache_dir.empty()) {
                cache_path = cfg_.cache_dir + "/" +
                             calibration_cache_name(n(), m(), cfg_.k);
                loaded = load_calibration_csv(cache_path, n(), m(), cfg_.k, table);
            }
            if (!loaded) {
                table = build_calibration_table(n(), m(), cfg_.k, cfg_.threads);
                if (!cache_path.empty()) {
                    try {
                        save_calibration_csv(cache_path, table);
                    } catch (const IoError&) {
                        // cache is best-effort
                    }
                }
            }
            calib_ = std::move(table);
        }
        return *calib_;
    }

    const KnnTable& real_knn() {
        ensure_real_knn();
        return *real_knn_;
    }

private:
    // Held by reference: the engine never outlives its inputs.
    const FeatureMatrix& real_;
    const FeatureMatrix& synth_;
    MetricConfig cfg_;

    std::unique_ptr<NeighborIndex> real_index_, synth_index_;
    std::unique_ptr<KnnTable> real_knn_, synth_knn_;
    std::optional<CalibrationTable> calib_;

    // pass outputs
    bool real_ball_pass_done_ = false;
    std::vector<std::uint32_t> synth_in_real_balls_;   // per synth j
    std::vector<std::uint32_t> real_ball_occupancy_;   // per real i

    bool synth_ball_pass_done_ = false;
    std::vector<std::uint32_t> real_in_synth_balls_;   // per real i
    std::vector<std::uint32_t> synth_ball_occupancy_;  // per synth j

    bool clipped_ball_pass_done_ = false;
    std::vector<std::uint32_t> synth_in_clipped_balls_;  // per synth j
    std::vector<std::uint32_t> real_in_clipped_balls_;   // per real i (LOO)

    bool clipped_coverage_pass_done_ = false;
    std::vector<std::uint32_t> clipped_coverage_counts_;  // per real i, <= k

    void require_k_real(const std::string& metric) const {
        if (cfg_.k < 1 || cfg_.k >= real_.n)
            throw InvalidArgument(metric + ": k=" + std::to_string(cfg_.k) +
                                  " out of range (need 1 <= k < N=" +
                                  std::to_string(real_.n) + ")");
    }

    void require_k_synth(const std::string& metric) const {
        if (cfg_.k < 1 || cfg_.k >= synth_.n)
            throw InvalidArgument(metric + ": k=" + std::to_string(cfg_.k) +
                                  " out of range (need 1 <= k < M=" +
                                  std::to_string(synth_.n) + ")");
    }

    void ensure_real_index() {
        if (!real_index_)
            real_index_ = std::make_unique<NeighborIndex>(real_, cfg_.backend);
    }
    void ensure_synth_index() {
        if (!synth_index_)
            synth_index_ = std::make_unique<NeighborIndex>(synth_, cfg_.backend);
    }
    void ensure_real_knn() {
        if (!real_knn_) {
            ensure_real_index();
            real_knn_ = std::make_unique<KnnTable>(knn_distances(
                *real_index_, real_, cfg_.k, /*exclude_self=*/true,
                cfg_.threads));
        }
    }
    void ensure_synth_knn() {
        if (!synth_knn_) {
            ensure_synth_index();
            synth_knn_ = std::make_unique<KnnTable>(knn_distances(
                *synth_index_, synth_, cfg_.k, /*exclude_self=*/true,
                cfg_.threads));
        }
    }

    // For each real ball (unclipped radius), count synthetic members.
    // Integer increments commute exactly, so atomic accumulation keeps
    // results independent of scheduling.
    void ensure_real_ball_pass() {
        if (real_ball_pass_done_) return;
        ensure_real_knn();
        ensure_synth_index();
        std::vector<std::atomic<std::uint32_t>> per_synth(m());
        real_ball_occupancy_.assign(n(), 0);
        parallel_for(n(), cfg_.threads, [&](std::size_t i) {
            thread_local std::vector<std::uint32_t> buf;
            synth_index_->radius(real_.row(i), real_knn_->kth_sq(i), buf);
            real_ball_occupancy_[i] = std::uint32_t(buf.size());
            for (std::uint32_t j : buf)
                per_synth[j].fetch_add(1, std::memory_order_relaxed);
        });
        synth_in_real_balls_.resize(m());
        for (std::size_t j = 0; j < m(); ++j)
            synth_in_real_balls_[j] = per_synth[j].load();
        real_ball_pass_done_ = true;
    }

    void ensure_synth_ball_pass() {
        if (synth_ball_pass_done_) return;
        ensure_synth_knn();
        ensure_real_index();
        std::vector<std::atomic<std::uint32_t>> per_real(n());
        synth_ball_occupancy_.assign(m(), 0);
        parallel_for(m(), cfg_.threads, [&](std::size_t j) {
            thread_local std::vector<std::uint32_t> buf;
            real_index_->radius(synth_.row(j), synth_knn_->kth_sq(j), buf);
            synth_ball_occupancy_[j] = std::uint32_t(buf.size());
            for (std::uint32_t i : buf)
                per_real[i].fetch_add(1, std::memory_order_relaxed);
        });
        real_in_synth_balls_.resize(n());
        for (std::size_t i = 0; i < n(); ++i)
            real_in_synth_balls_[i] = per_real[i].load();
        synth_ball_pass_done_ = true;
    }

    // Clipped real balls against both the synthetic set and (leave-one-out)
    // the real set itself.
    void ensure_clipped_ball_pass() {
        if (clipped_ball_pass_done_) return;
        ensure_real_knn();
        ensure_real_index();
        ensure_synth_index();
        std::vector<double> nnd(n());
        for (std::size_t i = 0; i < n(); ++i)
            nnd[i] = std::sqrt(real_knn_->kth_sq(i));
        double median = median_of(nnd);
        double median_sq = median * median;

        std::vector<std::atomic<std::uint32_t>> per_synth(m());
        std::vector<std::atomic<std::uint32_t>> per_real(n());
        parallel_for(n(), cfg_.threads, [&](std::size_t i) {
            thread_local std::vector<std::uint32_t> buf;
            double r_sq = std::min(real_knn_->kth_sq(i), median_sq);
            synth_index_->radius(real_.row(i), r_sq, buf);
            for (std::uint32_t j : buf)
                per_synth[j].fetch_add(1, std::memory_order_relaxed);
            real_index_->radius(real_.row(i), r_sq, buf, std::uint32_t(i));
            for (std::uint32_t l : buf)
                per_real[l].fetch_add(1, std::memory_order_relaxed);
        });
        synth_in_clipped_balls_.resize(m());
        for (std::size_t j = 0; j < m(); ++j)
            synth_in_clipped_balls_[j] = per_synth[j].load();
        real_in_clipped_balls_.resize(n());
        for (std::size_t i = 0; i < n(); ++i)
            real_in_clipped_balls_[i] = per_real[i].load();
        clipped_ball_pass_done_ = true;
    }

    void ensure_clipped_coverage_pass() {
        if (clipped_coverage_pass_done_) return;
        ensure_real_knn();
        ensure_synth_index();
        std::size_t kq = std::min(cfg_.k, m());
        clipped_coverage_counts_.assign(n(), 0);
        parallel_for(n(), cfg_.threads, [&](std::size_t i) {
            thread_local std::vector<Neighbor> buf;
            buf.resize(kq);
            synth_index_->knn(real_.row(i), kq, buf.data());
            double bound = real_knn_->kth_sq(i);
            std::uint32_t count = 0;
            for (std::size_t t = 0; t < kq; ++t)
                if (buf[t].dist_sq <= bound) ++count;
            clipped_coverage_counts_[i] = count;
        });
        clipped_coverage_pass_done_ = true;
    }
};

// Free-function entry points mirroring the metric definitions.
inline double improved_precision(const FeatureMatrix& real,
                                 const FeatureMatrix& synth, std::size_t k,
                                 Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.improved_precision();
}

inline double improved_recall(const FeatureMatrix& real,
                              const FeatureMatrix& synth, std::size_t k,
                              Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.improved_recall();
}

inline double density(const FeatureMatrix& real, const FeatureMatrix& synth,
                      std::size_t k, Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.density();
}

inline double coverage(const FeatureMatrix& real, const FeatureMatrix& synth,
                       std::size_t k, Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.coverage();
}

inline double sym_precision(const FeatureMatrix& real,
                            const FeatureMatrix& synth, std::size_t k,
                            Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.sym_precision();
}

inline double sym_recall(const FeatureMatrix& real, const FeatureMatrix& synth,
                         std::size_t k, Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.sym_recall();
}

inline double clipped_density_unnorm(const FeatureMatrix& real,
                                     const FeatureMatrix& synth, std::size_t k,
                                     Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.clipped_density_unnorm();
}

inline double clipped_density_real(const FeatureMatrix& real, std::size_t k,
                                   Backend backend = Backend::brute) {
    MetricEngine e(real, real, {.k = k, .backend = backend});
    return e.clipped_density_real();
}

inline double clipped_density(const FeatureMatrix& real,
                              const FeatureMatrix& synth, std::size_t k,
                              Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.clipped_density();
}

inline double clipped_coverage_unnorm(const FeatureMatrix& real,
                                      const FeatureMatrix& synth, std::size_t k,
                                      Backend backend = Backend::brute) {
    MetricEngine e(real, synth, {.k = k, .backend = backend});
    return e.clipped_coverage_unnorm();
}

inline double clipped_coverage(const FeatureMatrix& real,
                               const FeatureMatrix& synth, std::size_t k,
                               Backend backend = Backend::brute,
                               GMode g_mode = GMode::interp) {
    MetricEngine e(real, synth,
                   {.k = k, .backend = backend, .g_mode = g_mode});
    return e.clipped_coverage();
}

}  // namespace cdc

#endif  // CDC_METRICS_HPP
