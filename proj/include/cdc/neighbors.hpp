#ifndef CDC_NEIGHBORS_HPP
#define CDC_NEIGHBORS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cdc/common.hpp"
#include "cdc/matrix.hpp"
#include "cdc/parallel.hpp"

namespace cdc {

enum class Backend { tree, brute };

inline const char* backend_name(Backend b) {
    return b == Backend::tree ? "tree" : "brute";
}

// One neighbor hit. Comparisons are lexicographic on (dist_sq, index) so
// that ties at equal distance always resolve to the smallest index,
// identically in both backends.
struct Neighbor {
    double dist_sq;
    std::uint32_t index;
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        return a.dist_sq < b.dist_sq ||
               (a.dist_sq == b.dist_sq && a.index < b.index);
    }
};

// Per-query k nearest neighbors, distances non-decreasing within a row.
struct KnnTable {
    std::size_t rows = 0;
    std::size_t k = 0;
    std::vector<Neighbor> entries;  // rows * k, row-major

    const Neighbor* row(std::size_t q) const { return entries.data() + q * k; }
    double dist(std::size_t q, std::size_t j) const {
        return std::sqrt(entries[q * k + j].dist_sq);
    }
    // k-th nearest-neighbor squared distance of query q.
    double kth_sq(std::size_t q) const { return entries[q * k + k - 1].dist_sq; }
    double kth(std::size_t q) const { return std::sqrt(kth_sq(q)); }
};

namespace detail {

// Bounded insertion sort buffer holding the current k best neighbors.
// k is small (typically 5), so linear insertion beats a heap.
class KBest {
public:
    KBest(Neighbor* slots, std::size_t k) : slots_(slots), k_(k) {}

    double bound_sq() const {
        return size_ == k_ ? slots_[k_ - 1].dist_sq
                           : std::numeric_limits<double>::infinity();
    }

    void offer(double dist_sq, std::uint32_t index) {
        Neighbor cand{dist_sq, index};
        if (size_ == k_ && !(cand < slots_[k_ - 1])) return;
        std::size_t pos = size_ < k_ ? size_ : k_ - 1;
        while (pos > 0 && cand < slots_[pos - 1]) {
            slots_[pos] = slots_[pos - 1];
            --pos;
        }
        slots_[pos] = cand;
        if (size_ < k_) ++size_;
    }

    std::size_t size() const { return size_; }

private:
    Neighbor* slots_;
    std::size_t k_;
    std::size_t size_ = 0;
};

// Squared distance with early exit once the partial sum exceeds the
// current pruning bound. Exact for all accepted candidates.
inline double squared_distance_bounded(const double* a, const double* b,
                                       std::size_t d, double bound) {
    double acc = 0.0;
    std::size_t t = 0;
    for (; t + 8 <= d; t += 8) {
        double s0 = a[t] - b[t], s1 = a[t + 1] - b[t + 1];
        double s2 = a[t + 2] - b[t + 2], s3 = a[t + 3] - b[t + 3];
        double s4 = a[t + 4] - b[t + 4], s5 = a[t + 5] - b[t + 5];
        double s6 = a[t + 6] - b[t + 6], s7 = a[t + 7] - b[t + 7];
        acc += s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4 + s5 * s5 +
               s6 * s6 + s7 * s7;
        if (acc > bound) return acc;
    }
    for (; t < d; ++t) {
        double diff = a[t] - b[t];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace detail

// Exact nearest-neighbor index over one immutable point set. The tree
// backend is a ball tree (O(nd) memory); the brute backend scans every
// point and serves as the oracle the tree must match exactly.
class NeighborIndex {
public:
    static constexpr std::size_t kLeafSize = 32;

    NeighborIndex(const FeatureMatrix& points, Backend backend)
        : backend_(backend), n_(points.n), d_(points.d) {
        points.validate("NeighborIndex");
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = std::uint32_t(i);
        storage_ = points.data;
        if (backend_ == Backend::tree) build_tree(points);
    }

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }
    Backend backend() const { return backend_; }

    static constexpr std::uint32_t kNoExclude =
        std::numeric_limits<std::uint32_t>::max();

    // k nearest points to `query`, ascending (dist_sq, index).
    void knn(const double* query, std::size_t k, Neighbor* out,
             std::uint32_t exclude = kNoExclude) const {
        std::size_t avail = n_ - (exclude != kNoExclude ? 1 : 0);
        if (k < 1 || k > avail)
            throw InvalidArgument("knn: k=" + std::to_string(k) +
                                  " out of range for " + std::to_string(avail) +
                                  " candidate points");
        detail::KBest best(out, k);
        if (backend_ == Backend::brute) {
            for (std::size_t i = 0; i < n_; ++i) {
                std::uint32_t idx = order_[i];
                if (idx == exclude) continue;
                double sq = detail::squared_distance_bounded(
                    query, point(i), d_, best.bound_sq());
                if (sq <= best.bound_sq()) best.offer(sq, idx);
            }
        } else {
            knn_node(0, query, best, exclude);
        }
    }

    // Indices of points within the CLOSED ball of squared radius
    // `radius_sq` around `query`, ascending by index.
    void radius(const double* query, double radius_sq,
                std::vector<std::uint32_t>& out,
                std::uint32_t exclude = kNoExclude) const {
        out.clear();
        if (backend_ == Backend::brute) {
            for (std::size_t i = 0; i < n_; ++i) {
                std::uint32_t idx = order_[i];
                if (idx == exclude) continue;
                double sq = detail::squared_distance_bounded(query, point(i), d_,
                                                             radius_sq);
                if (sq <= radius_sq) out.push_back(idx);
            }
        } else {
            radius_node(0, query, radius_sq, out, exclude);
        }
        std::sort(out.begin(), out.end());
    }

    std::size_t radius_count(const double* query, double radius_sq,
                             std::uint32_t exclude = kNoExclude) const {
        std::size_t count = 0;
        if (backend_ == Backend::brute) {
            for (std::size_t i = 0; i < n_; ++i) {
                std::uint32_t idx = order_[i];
                if (idx == exclude) continue;
                double sq = detail::squared_distance_bounded(query, point(i), d_,
                                                             radius_sq);
                if (sq <= radius_sq) ++count;
            }
        } else {
            radius_count_node(0, query, radius_sq, count, exclude);
        }
        return count;
    }

private:
    struct Node {
        std::uint32_t begin, end;       // range into order_/storage_
        std::int32_t left = -1, right = -1;
        double radius = 0.0;            // covering radius around centroid
        std::uint32_t centroid;         // offset into centroids_ / d_
    };

    Backend backend_;
    std::size_t n_, d_;
    std::vector<double> storage_;          // points, reordered for the tree
    std::vector<std::uint32_t> order_;     // storage position -> original index
    std::vector<Node> nodes_;
    std::vector<double> centroids_;

    const double* point(std::size_t pos) const {
        return storage_.data() + pos * d_;
    }

    void build_tree(const FeatureMatrix& points) {
        nodes_.reserve(2 * (n_ / kLeafSize + 1));
        build_node(points, 0, std::uint32_t(n_));
    }

    std::int32_t build_node(const FeatureMatrix& points, std::uint32_t begin,
                            std::uint32_t end) {
        std::int32_t id = std::int32_t(nodes_.size());
        nodes_.emplace_back();
        std::uint32_t cen = std::uint32_t(centroids_.size() / d_);
        centroids_.resize(centroids_.size() + d_, 0.0);
        {
            Node& node = nodes_[id];
            node.begin = begin;
            node.end = end;
            node.centroid = cen;
        }
        double* c = centroids_.data() + std::size_t(cen) * d_;
        for (std::uint32_t i = begin; i < end; ++i) {
            const double* p = points.row(order_[i]);
            for (std::size_t t = 0; t < d_; ++t) c[t] += p[t];
        }
        double inv = 1.0 / double(end - begin);
        for (std::size_t t = 0; t < d_; ++t) c[t] *= inv;
        double max_sq = 0.0;
        for (std::uint32_t i = begin; i < end; ++i) {
            double sq = squared_distance(points.row(order_[i]), c, d_);
            if (sq > max_sq) max_sq = sq;
        }
        nodes_[id].radius = std::sqrt(max_sq);

        if (end - begin > kLeafSize) {
            // split along the dimension of maximal spread, at the median
            std::size_t split_dim = 0;
            double best_spread = -1.0;
            for (std::size_t t = 0; t < d_; ++t) {
                double lo = points.row(order_[begin])[t], hi = lo;
                for (std::uint32_t i = begin + 1; i < end; ++i) {
                    double v = points.row(order_[i])[t];
                    if (v < lo) lo = v;
                    if (v > hi) hi = v;
                }
                if (hi - lo > best_spread) {
                    best_spread = hi - lo;
                    split_dim = t;
                }
            }
            std::uint32_t mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid,
                             order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 double va = points.row(a)[split_dim];
                                 double vb = points.row(b)[split_dim];
                                 return va < vb || (va == vb && a < b);
                             });
            if (mid > begin && mid < end) {
                std::int32_t left = build_node(points, begin, mid);
                std::int32_t right = build_node(points, mid, end);
                nodes_[id].left = left;
                nodes_[id].right = right;
            }
        }
        if (nodes_[id].left < 0) {
            // leaf: copy points into contiguous storage slots
            for (std::uint32_t i = begin; i < end; ++i) {
                const double* p = points.row(order_[i]);
                std::copy(p, p + d_, storage_.data() + std::size_t(i) * d_);
            }
        }
        return id;
    }

    // Squared lower bound on the distance from q to any point of node.
    double node_bound_sq(const Node& node, const double* query) const {
        double dc = std::sqrt(
            squared_distance(query, centroids_.data() + std::size_t(node.centroid) * d_, d_));
        double lb = dc - node.radius;
        return lb > 0.0 ? lb * lb : 0.0;
    }

    void knn_node(std::int32_t id, const double* query, detail::KBest& best,
                  std::uint32_t exclude) const {
        const Node& node = nodes_[id];
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                std::uint32_t idx = order_[i];
                if (idx == exclude) continue;
                double sq = detail::squared_distance_bounded(
                    query, point(i), d_, best.bound_sq());
                if (sq <= best.bound_sq()) best.offer(sq, idx);
            }
            return;
        }
        double lb_left = node_bound_sq(nodes_[node.left], query);
        double lb_right = node_bound_sq(nodes_[node.right], query);
        std::int32_t first = node.left, second = node.right;
        double lb_first = lb_left, lb_second = lb_right;
        if (lb_right < lb_left) {
            std::swap(first, second);
            std::swap(lb_first, lb_second);
        }
        if (lb_first <= best.bound_sq()) knn_node(first, query, best, exclude);
        if (lb_second <= best.bound_sq()) knn_node(second, query, best, exclude);
    }

    void radius_node(std::int32_t id, const double* query, double radius_sq,
                     std::vector<std::uint32_t>& out,
                     std::uint32_t exclude) const {
        const Node& node = nodes_[id];
        if (node_bound_sq(node, query) > radius_sq) return;
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                std::uint32_t idx = order_[i];
                if (idx == exclude) continue;
                double sq = detail::squared_distance_bounded(query, point(i), d_,
                                                             radius_sq);
                if (sq <= radius_sq) out.push_back(idx);
            }
            return;
        }
        radius_node(node.left, query, radius_sq, out, exclude);
        radius_node(node.right, query, radius_sq, out, exclude);
    }

    void radius_count_node(std::int32_t id, const double* query,
                           double radius_sq, std::size_t& count,
                           std::uint32_t exclude) const {
        const Node& node = nodes_[id];
        if (node_bound_sq(node, query) > radius_sq) return;
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                std::uint32_t idx = order_[i];
                if (idx == exclude) continue;
                double sq = detail::squared_distance_bounded(query, point(i), d_,
                                                             radius_sq);
                if (sq <= radius_sq) ++count;
            }
            return;
        }
        radius_count_node(node.left, query, radius_sq, count, exclude);
        radius_count_node(node.right, query, radius_sq, count, exclude);
    }
};

inline NeighborIndex build_index(const FeatureMatrix& points, Backend backend) {
    return NeighborIndex(points, backend);
}

// Batch k-NN. When exclude_self is set, `queries` must be the indexed set
// itself and query q never reports itself as a neighbor.
inline KnnTable knn_distances(const NeighborIndex& index,
                              const FeatureMatrix& queries, std::size_t k,
                              bool exclude_self, unsigned threads = 1) {
    if (queries.d != index.dim())
        throw InvalidArgument("knn_distances: dimension mismatch");
    if (exclude_self && queries.n != index.size())
        throw InvalidArgument(
            "knn_distances: exclude_self requires queries == indexed set");
    std::size_t avail = index.size() - (exclude_self ? 1 : 0);
    if (k < 1 || k > avail)
        throw InvalidArgument("knn_distances: k=" + std::to_string(k) +
                              " out of range (must be in [1, " +
                              std::to_string(avail) + "])");
    KnnTable table;
    table.rows = queries.n;
    table.k = k;
    table.entries.resize(queries.n * k);
    parallel_for(queries.n, threads, [&](std::size_t q) {
        index.knn(queries.row(q), k, table.entries.data() + q * k,
                  exclude_self ? std::uint32_t(q) : NeighborIndex::kNoExclude);
    });
    return table;
}

// Closed-ball membership: count and identities of indexed points with
// distance(p, center) <= radius.
inline std::vector<std::uint32_t> count_within(const NeighborIndex& index,
                                               const std::vector<double>& center,
                                               double radius) {
    if (center.size() != index.dim())
        throw InvalidArgument("count_within: dimension mismatch");
    if (radius < 0.0)
        throw InvalidArgument("count_within: radius must be nonnegative");
    std::vector<std::uint32_t> out;
    index.radius(center.data(), radius * radius, out);
    return out;
}

}  // namespace cdc

#endif  // CDC_NEIGHBORS_HPP
