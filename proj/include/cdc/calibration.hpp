#ifndef CDC_CALIBRATION_HPP
#define CDC_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cdc/common.hpp"
#include "cdc/parallel.hpp"

namespace cdc {

// Precomputed log-Gamma(l) for integer l in [1, N+M+1]. Log-beta values
// and log binomial coefficients are differences of three table entries.
class LogGammaTable {
public:
    LogGammaTable(std::size_t n, std::size_t m) : n_(n), m_(m) {
        values_.resize(n + m + 2, 0.0);
        for (std::size_t l = 1; l < values_.size(); ++l)
            values_[l] = std::lgamma(double(l));
    }

    double lgamma_int(std::size_t l) const { return values_.at(l); }

    double log_beta(std::size_t a, std::size_t b) const {
        return values_.at(a) + values_.at(b) - values_.at(a + b);
    }

    double log_choose(std::size_t n, std::size_t k) const {
        return values_.at(n + 1) - values_.at(k + 1) - values_.at(n - k + 1);
    }

    std::size_t n() const { return n_; }
    std::size_t m() const { return m_; }

private:
    std::size_t n_, m_;
    std::vector<double> values_;
};

namespace detail {

inline void check_calibration_args(std::size_t n, std::size_t m_total,
                                   std::size_t k, std::size_t m) {
    if (k < 1 || k >= n)
        throw InvalidArgument("calibration: need 1 <= k < N, got k=" +
                              std::to_string(k) + ", N=" + std::to_string(n));
    if (m > m_total)
        throw InvalidArgument("calibration: m exceeds M");
}

}  // namespace detail

// Expected unnormalized clipped coverage under identical distributions
// when m of the M synthetic samples are in-distribution, by direct
// evaluation of the full sum over ball occupancies j = 1..m:
//   sum_j min(j/k, 1) C(m,j) beta(k+j, m-j+N-k) / beta(k, N-k)
inline double expected_clipped_coverage(std::size_t n, std::size_t m_total,
                                        std::size_t k, std::size_t m,
                                        const LogGammaTable& table) {
    detail::check_calibration_args(n, m_total, k, m);
    if (m == 0) return 0.0;
    double log_beta_kn = table.log_beta(k, n - k);
    double acc = 0.0;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= m; ++j) {
        double log_term = table.log_choose(m, j) +
                          table.log_beta(k + j, m - j + n - k) - log_beta_kn;
        if (log_term > peak) peak = log_term;
        // mass concentrates; once terms decay far below the running sum
        // the remaining tail cannot move the result at 1e-10
        if (log_term < peak - 60.0 && log_term < std::log(acc + 1e-300) - 40.0)
            break;
        if (log_term < -745.0) continue;
        double weight = j < k ? double(j) / double(k) : 1.0;
        acc += weight * std::exp(log_term);
    }
    return acc;
}

inline double expected_clipped_coverage(std::size_t n, std::size_t m_total,
                                        std::size_t k, std::size_t m) {
    LogGammaTable table(n, m_total);
    return expected_clipped_coverage(n, m_total, k, m, table);
}

// Same expectation via the Beta-Binomial survival form:
//   (1/k) sum_{k'=1..k} P(k' <= C),  C ~ BetaBinomial(m, k, N-k)
// Needs only the pmf at t = 0..k-1, so a full table over m costs O(Mk).
inline double expected_clipped_coverage_survival(std::size_t n,
                                                 std::size_t m_total,
                                                 std::size_t k, std::size_t m,
                                                 const LogGammaTable& table) {
    detail::check_calibration_args(n, m_total, k, m);
    if (m == 0) return 0.0;
    double log_beta_kn = table.log_beta(k, n - k);
    double cdf = 0.0;
    double acc = 0.0;
    for (std::size_t kp = 1; kp <= k; ++kp) {
        std::size_t t = kp - 1;  // pmf(t) completes the cdf below k'
        if (t <= m) {
            double log_pmf = table.log_choose(m, t) +
                             table.log_beta(k + t, m - t + n - k) - log_beta_kn;
            if (log_pmf >= -745.0) cdf += std::exp(log_pmf);
        }
        double survival = 1.0 - cdf;
        if (survival < 0.0) survival = 0.0;
        if (kp > m) survival = 0.0;  // at most m synthetic points exist
        acc += survival;
    }
    return acc / double(k);
}

inline double expected_clipped_coverage_survival(std::size_t n,
                                                 std::size_t m_total,
                                                 std::size_t k, std::size_t m) {
    LogGammaTable table(n, m_total);
    return expected_clipped_coverage_survival(n, m_total, k, m, table);
}

enum class GMode { interp, step };

// Expectation curve f[m] for m = 0..M and its numerical inverse g.
// Depends only on (N, M, k), never on data.
struct CalibrationTable {
    std::size_t n = 0, m = 0, k = 0;
    std::vector<double> f;  // size m+1, strictly increasing, f[0] = 0

    // g maps an observed unnormalized score to the equivalent
    // in-distribution sample proportion: g(f[m]) = m/M at every knot.
    double apply_g(double s, GMode mode = GMode::interp) const {
        if (s < -1e-9 || s > 1.0 + 1e-9)
            throw InvalidArgument("apply_g: score " + std::to_string(s) +
                                  " outside [0, 1]");
        s = std::clamp(s, 0.0, 1.0);
        if (s <= f.front()) return 0.0;
        if (s >= f.back()) return 1.0;
        auto it = std::upper_bound(f.begin(), f.end(), s);
        std::size_t hi = std::size_t(it - f.begin());  // f[hi-1] <= s < f[hi]
        if (mode == GMode::step) return double(hi - 1) / double(m);
        double lo_v = f[hi - 1], hi_v = f[hi];
        double frac = (s - lo_v) / (hi_v - lo_v);
        return (double(hi - 1) + frac) / double(m);
    }
};

inline CalibrationTable build_calibration_table(std::size_t n, std::size_t m,
                                                std::size_t k,
                                                unsigned threads = 1) {
    if (m < 1) throw InvalidArgument("calibration: need M >= 1");
    detail::check_calibration_args(n, m, k, 0);
    LogGammaTable lg(n, m);
    CalibrationTable table;
    table.n = n;
    table.m = m;
    table.k = k;
    table.f.resize(m + 1);
    parallel_for(m + 1, threads, [&](std::size_t i) {
        table.f[i] = expected_clipped_coverage_survival(n, m, k, i, lg);
    });
    return table;
}

inline void save_calibration_csv(const std::string& path,
                                 const CalibrationTable& table) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << "m,f_expected\n";
    out.precision(17);
    for (std::size_t i = 0; i < table.f.size(); ++i)
        out << i << "," << table.f[i] << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline bool load_calibration_csv(const std::string& path, std::size_t n,
                                 std::size_t m, std::size_t k,
                                 CalibrationTable& table) {
    std::ifstream in(path);
    if (!in) return false;
    std::string line;
    if (!std::getline(in, line) || line != "m,f_expected") return false;
    std::vector<double> f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) return false;
        try {
            std::size_t idx = std::stoull(line.substr(0, comma));
            if (idx != f.size()) return false;
            f.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            return false;
        }
    }
    if (f.size() != m + 1 || f.front() != 0.0) return false;
    for (std::size_t i = 1; i < f.size(); ++i)
        if (!(f[i] > f[i - 1])) return false;
    table.n = n;
    table.m = m;
    table.k = k;
    table.f = std::move(f);
    return true;
}

inline std::string calibration_cache_name(std::size_t n, std::size_t m,
                                          std::size_t k) {
    return "calibration_N" + std::to_string(n) + "_M" + std::to_string(m) +
           "_k" + std::to_string(k) + ".csv";
}

}  // namespace cdc

#endif  // CDC_CALIBRATION_HPP
