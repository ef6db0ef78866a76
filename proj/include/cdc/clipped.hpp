#ifndef CDC_CLIPPED_HPP
#define CDC_CLIPPED_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cdc/matrix.hpp"
#include "cdc/neighbors.hpp"

namespace cdc {

// Per-real-sample clipped ball radii: R_k(i) = min(NND_k(i), median NND_k).
// The member lists record which other real samples fall inside each
// clipped ball; the leave-one-out calibration reuses them directly.
struct ClippedRadii {
    std::vector<double> nnd;        // raw k-th neighbor distances
    std::vector<double> nnd_sq;
    std::vector<double> radius;     // clipped
    std::vector<double> radius_sq;
    double median_nnd = 0.0;
    std::vector<std::vector<std::uint32_t>> members;  // real points in ball i, center excluded
};

// Median of the k-th neighbor distances; for even N, the midpoint of the
// two central order statistics.
inline double median_of(std::vector<double> values) {
    std::size_t n = values.size();
    std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double upper = values[mid];
    if (n % 2 == 1) return upper;
    double lower = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
}

inline ClippedRadii clipped_radii(const FeatureMatrix& real, std::size_t k,
                                  Backend backend = Backend::brute,
                                  unsigned threads = 1) {
    NeighborIndex index(real, backend);
    KnnTable knn = knn_distances(index, real, k, /*exclude_self=*/true, threads);
    ClippedRadii out;
    out.nnd.resize(real.n);
    out.nnd_sq.resize(real.n);
    for (std::size_t i = 0; i < real.n; ++i) {
        out.nnd_sq[i] = knn.kth_sq(i);
        out.nnd[i] = std::sqrt(out.nnd_sq[i]);
    }
    out.median_nnd = median_of(out.nnd);
    double median_sq = out.median_nnd * out.median_nnd;
    out.radius.resize(real.n);
    out.radius_sq.resize(real.n);
    out.members.resize(real.n);
    for (std::size_t i = 0; i < real.n; ++i) {
        out.radius[i] = std::min(out.nnd[i], out.median_nnd);
        out.radius_sq[i] = std::min(out.nnd_sq[i], median_sq);
    }
    parallel_for(real.n, threads, [&](std::size_t i) {
        index.radius(real.row(i), out.radius_sq[i], out.members[i],
                     std::uint32_t(i));
    });
    return out;
}

}  // namespace cdc

#endif  // CDC_CLIPPED_HPP
