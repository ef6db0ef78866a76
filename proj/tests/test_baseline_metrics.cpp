#include <catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "cdc/metrics.hpp"
#include "cdc/rng.hpp"
#include "cdc/scenarios.hpp"

namespace {

cdc::FeatureMatrix points_1d(std::initializer_list<double> xs) {
    cdc::FeatureMatrix m(xs.size(), 1);
    std::size_t i = 0;
    for (double x : xs) m.row(i++)[0] = x;
    return m;
}

cdc::FeatureMatrix points_2d(std::initializer_list<std::pair<double, double>> ps) {
    cdc::FeatureMatrix m(ps.size(), 2);
    std::size_t i = 0;
    for (auto [x, y] : ps) {
        m.row(i)[0] = x;
        m.row(i)[1] = y;
        ++i;
    }
    return m;
}

// Independent oracle: everything from the full pairwise-distance matrix.
struct PairwiseOracle {
    std::vector<std::vector<double>> rr, ss, rs;  // squared distances
    std::size_t n, m, k;

    PairwiseOracle(const cdc::FeatureMatrix& real, const cdc::FeatureMatrix& synth,
                   std::size_t k_)
        : n(real.n), m(synth.n), k(k_) {
        rr.assign(n, std::vector<double>(n));
        ss.assign(m, std::vector<double>(m));
        rs.assign(n, std::vector<double>(m));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l)
                rr[i][l] = cdc::squared_distance(real.row(i), real.row(l), real.d);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                ss[a][b] = cdc::squared_distance(synth.row(a), synth.row(b), synth.d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                rs[i][j] = cdc::squared_distance(real.row(i), synth.row(j), real.d);
    }

    static double kth_excluding(const std::vector<double>& row, std::size_t self,
                                std::size_t k) {
        std::vector<double> d;
        for (std::size_t i = 0; i < row.size(); ++i)
            if (i != self) d.push_back(row[i]);
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        return d[k - 1];
    }

    std::vector<double> real_radii_sq() const {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = kth_excluding(rr[i], i, k);
        return r;
    }

    std::vector<double> synth_radii_sq() const {
        std::vector<double> r(m);
        for (std::size_t j = 0; j < m; ++j) r[j] = kth_excluding(ss[j], j, k);
        return r;
    }

    double iprecision() const {
        auto radii = real_radii_sq();
        std::size_t hit = 0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t i = 0; i < n; ++i)
                if (rs[i][j] <= radii[i]) { ++hit; break; }
        return double(hit) / double(m);
    }

    double irecall() const {
        auto radii = synth_radii_sq();
        std::size_t hit = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (rs[i][j] <= radii[j]) { ++hit; break; }
        return double(hit) / double(n);
    }

    double density() const {
        auto radii = real_radii_sq();
        std::size_t total = 0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t i = 0; i < n; ++i)
                if (rs[i][j] <= radii[i]) ++total;
        return double(total) / (double(k) * double(m));
    }

    double coverage() const {
        auto radii = real_radii_sq();
        std::size_t covered = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (rs[i][j] <= radii[i]) { ++covered; break; }
        return double(covered) / double(n);
    }

    double complementary_precision() const {
        auto radii = synth_radii_sq();
        std::size_t hit = 0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t i = 0; i < n; ++i)
                if (rs[i][j] <= radii[j]) { ++hit; break; }
        return double(hit) / double(m);
    }
};

}  // namespace

TEST_CASE("identical sets score 1 on all baselines") {
    cdc::FeatureMatrix real = cdc::gen_gaussian(40, 3, 11);
    cdc::FeatureMatrix synth = real;
    for (auto backend : {cdc::Backend::tree, cdc::Backend::brute}) {
        REQUIRE(cdc::improved_precision(real, synth, 1, backend) == 1.0);
        REQUIRE(cdc::improved_recall(real, synth, 1, backend) == 1.0);
        REQUIRE(cdc::coverage(real, synth, 1, backend) == 1.0);
        REQUIRE(cdc::sym_precision(real, synth, 1, backend) == 1.0);
        REQUIRE(cdc::sym_recall(real, synth, 1, backend) == 1.0);
    }
}

TEST_CASE("distant synthetic set scores 0") {
    cdc::FeatureMatrix real = cdc::gen_gaussian(30, 2, 5);
    cdc::FeatureMatrix synth = cdc::gen_gaussian(30, 2, 6);
    for (std::size_t j = 0; j < synth.n; ++j) {
        synth.row(j)[0] += 1e6;
        synth.row(j)[1] += 1e6;
    }
    REQUIRE(cdc::improved_precision(real, synth, 2) == 0.0);
    REQUIRE(cdc::improved_recall(real, synth, 2) == 0.0);
    REQUIRE(cdc::density(real, synth, 2) == 0.0);
    REQUIRE(cdc::coverage(real, synth, 2) == 0.0);
}

TEST_CASE("hand-enumerated iprecision on the line") {
    // real {0,1,2,10}, synth {0.1, 1.1, 5}, k=1: radii [1,1,1,8]
    cdc::FeatureMatrix real = points_1d({0, 1, 2, 10});
    cdc::FeatureMatrix synth = points_1d({0.1, 1.1, 5});
    REQUIRE(cdc::improved_precision(real, synth, 1) == 1.0);
}

TEST_CASE("Fig. 2 configuration: Density 1, clipped 2/3") {
    // k=2. Two synthetic points coincide with the two central real points
    // and each sits inside 3 real balls; the third synthetic point is far
    // from everything.
    // real balls all have radius sqrt(5); (0.4, 0) falls in the two
    // vertical balls and the right one only, mirrored for (-0.4, 0)
    cdc::FeatureMatrix real = points_2d({{0, 1}, {0, -1}, {2, 0}, {-2, 0}});
    cdc::FeatureMatrix synth = points_2d({{0.4, 0}, {-0.4, 0}, {50, 50}});
    std::size_t k = 2;

    // check the construction: each good synthetic sample is inside 3
    // unclipped real balls, the bad one inside none
    PairwiseOracle oracle(real, synth, k);
    auto radii = oracle.real_radii_sq();
    for (std::size_t j = 0; j < 2; ++j) {
        int balls = 0;
        for (std::size_t i = 0; i < real.n; ++i)
            if (oracle.rs[i][j] <= radii[i]) ++balls;
        REQUIRE(balls == 3);
    }
    for (std::size_t i = 0; i < real.n; ++i)
        REQUIRE(oracle.rs[i][2] > radii[i]);

    REQUIRE(cdc::density(real, synth, k) == 1.0);
    REQUIRE(cdc::clipped_density_unnorm(real, synth, k) ==
            Catch::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("baselines equal the pairwise oracle on random instances") {
    cdc::Rng seeder(909);
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t n = 80 + seeder.next_u64() % 70;
        std::size_t m = 80 + seeder.next_u64() % 70;
        std::size_t d = 2 + seeder.next_u64() % 4;
        std::size_t k = std::vector<std::size_t>{1, 2, 5}[trial % 3];
        cdc::FeatureMatrix real = cdc::gen_gaussian(n, d, seeder.next_u64());
        cdc::FeatureMatrix synth = cdc::gen_gaussian(m, d, seeder.next_u64());
        PairwiseOracle oracle(real, synth, k);
        for (auto backend : {cdc::Backend::tree, cdc::Backend::brute}) {
            REQUIRE(cdc::improved_precision(real, synth, k, backend) ==
                    oracle.iprecision());
            REQUIRE(cdc::improved_recall(real, synth, k, backend) ==
                    oracle.irecall());
            REQUIRE(cdc::density(real, synth, k, backend) == oracle.density());
            REQUIRE(cdc::coverage(real, synth, k, backend) == oracle.coverage());
            REQUIRE(cdc::sym_precision(real, synth, k, backend) ==
                    std::min(oracle.iprecision(), oracle.complementary_precision()));
            REQUIRE(cdc::sym_recall(real, synth, k, backend) ==
                    std::min(oracle.irecall(), oracle.coverage()));
        }
    }
}

TEST_CASE("sym metrics are minima of their components") {
    cdc::Rng seeder(4242);
    for (int trial = 0; trial < 10; ++trial) {
        cdc::FeatureMatrix real = cdc::gen_gaussian(60, 3, seeder.next_u64());
        cdc::FeatureMatrix synth = cdc::gen_gaussian(60, 3, seeder.next_u64());
        double sr = cdc::sym_recall(real, synth, 2);
        REQUIRE(sr <= cdc::improved_recall(real, synth, 2));
        REQUIRE(sr <= cdc::coverage(real, synth, 2));
    }
}

TEST_CASE("metrics invariant under permutation and rigid translation") {
    cdc::FeatureMatrix real = cdc::gen_gaussian(50, 4, 1);
    cdc::FeatureMatrix synth = cdc::gen_gaussian(55, 4, 2);
    std::size_t k = 3;
    double base_density = cdc::density(real, synth, k);
    double base_cov = cdc::coverage(real, synth, k);

    // reverse sample order in both sets
    cdc::FeatureMatrix real_p(real.n, real.d), synth_p(synth.n, synth.d);
    for (std::size_t i = 0; i < real.n; ++i)
        std::copy(real.row(real.n - 1 - i), real.row(real.n - 1 - i) + real.d,
                  real_p.row(i));
    for (std::size_t j = 0; j < synth.n; ++j)
        std::copy(synth.row(synth.n - 1 - j), synth.row(synth.n - 1 - j) + synth.d,
                  synth_p.row(j));
    REQUIRE(cdc::density(real_p, synth_p, k) == base_density);
    REQUIRE(cdc::coverage(real_p, synth_p, k) == base_cov);

    // shift both sets by the same vector
    cdc::FeatureMatrix real_t = real, synth_t = synth;
    for (std::size_t i = 0; i < real.n; ++i)
        for (std::size_t t = 0; t < real.d; ++t) real_t.row(i)[t] += 7.5;
    for (std::size_t j = 0; j < synth.n; ++j)
        for (std::size_t t = 0; t < synth.d; ++t) synth_t.row(j)[t] += 7.5;
    REQUIRE(cdc::density(real_t, synth_t, k) ==
            Catch::Approx(base_density).epsilon(1e-12));
    REQUIRE(cdc::coverage(real_t, synth_t, k) ==
            Catch::Approx(base_cov).epsilon(1e-12));
}

TEST_CASE("k out of range names the metric") {
    cdc::FeatureMatrix real = cdc::gen_gaussian(5, 2, 3);
    cdc::FeatureMatrix synth = cdc::gen_gaussian(20, 2, 4);
    try {
        cdc::density(real, synth, 5);
        FAIL("expected an error");
    } catch (const cdc::InvalidArgument& e) {
        REQUIRE(std::string(e.what()).find("density") != std::string::npos);
    }
    // irecall bounds by M, not N
    REQUIRE_NOTHROW(cdc::improved_recall(real, synth, 5));
}
