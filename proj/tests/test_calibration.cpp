#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cdc/calibration.hpp"
#include "cdc/metrics.hpp"
#include "cdc/scenarios.hpp"

TEST_CASE("log-gamma table satisfies the integer recurrence") {
    cdc::LogGammaTable table(100, 100);
    REQUIRE(table.lgamma_int(1) == 0.0);
    REQUIRE(table.lgamma_int(2) == 0.0);
    for (std::size_t l = 1; l <= 200; ++l) {
        double lhs = table.lgamma_int(l + 1) - table.lgamma_int(l);
        REQUIRE(lhs == Catch::Approx(std::log(double(l)))
                           .epsilon(1e-12)
                           .margin(1e-12));
    }
}

TEST_CASE("expectation at m=0 is zero") {
    REQUIRE(cdc::expected_clipped_coverage(10, 10, 3, 0) == 0.0);
    REQUIRE(cdc::expected_clipped_coverage_survival(10, 10, 3, 0) == 0.0);
}

TEST_CASE("N=2, M=2, k=1 exchangeability anchors") {
    // m=2: among the 3 other i.i.d. points, P(nearest is synthetic) = 2/3
    REQUIRE(cdc::expected_clipped_coverage(2, 2, 1, 2) ==
            Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(cdc::expected_clipped_coverage_survival(2, 2, 1, 2) ==
            Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    // m=1: one synthetic point vs one other real point, rank tie
    REQUIRE(cdc::expected_clipped_coverage(2, 2, 1, 1) ==
            Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(cdc::expected_clipped_coverage_survival(2, 2, 1, 1) ==
            Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("direct sum and survival form agree over the full grid") {
    for (std::size_t n : {2u, 5u, 10u, 50u, 200u}) {
        for (std::size_t m : {2u, 5u, 10u, 50u, 200u}) {
            for (std::size_t k : {1u, 2u, 5u}) {
                if (k >= n) continue;
                cdc::LogGammaTable table(n, m);
                for (std::size_t i = 0; i <= m; ++i) {
                    double direct =
                        cdc::expected_clipped_coverage(n, m, k, i, table);
                    double survival = cdc::expected_clipped_coverage_survival(
                        n, m, k, i, table);
                    REQUIRE(std::abs(direct - survival) <= 1e-10);
                }
            }
        }
    }
}

TEST_CASE("calibration table shape and monotonicity") {
    cdc::CalibrationTable table = cdc::build_calibration_table(50, 80, 5);
    REQUIRE(table.f.size() == 81);
    REQUIRE(table.f[0] == 0.0);
    for (std::size_t i = 1; i < table.f.size(); ++i)
        REQUIRE(table.f[i] > table.f[i - 1]);
}

TEST_CASE("calibration knots for N=M=2, k=1") {
    cdc::CalibrationTable table = cdc::build_calibration_table(2, 2, 1);
    REQUIRE(table.f[0] == 0.0);
    REQUIRE(table.f[1] == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(table.f[2] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("g inverts f exactly at the knots") {
    cdc::CalibrationTable table = cdc::build_calibration_table(40, 60, 3);
    for (std::size_t m = 0; m <= table.m; ++m) {
        double g = table.apply_g(table.f[m]);
        REQUIRE(g == Catch::Approx(double(m) / double(table.m))
                         .epsilon(1e-12)
                         .margin(1e-12));
    }
}

TEST_CASE("g interpolation between knots") {
    cdc::CalibrationTable table = cdc::build_calibration_table(2, 2, 1);
    // knots [0, 1/2, 2/3]
    REQUIRE(table.apply_g(0.0) == 0.0);
    REQUIRE(table.apply_g(0.5) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(table.apply_g(2.0 / 3.0) == 1.0);
    double mid = (0.5 + 2.0 / 3.0) / 2.0;  // 7/12
    REQUIRE(table.apply_g(mid) == Catch::Approx(0.75).epsilon(1e-12));
    // above the top knot clamps to 1
    REQUIRE(table.apply_g(0.9) == 1.0);
}

TEST_CASE("g step mode is a right-continuous staircase through the knots") {
    cdc::CalibrationTable table = cdc::build_calibration_table(2, 2, 1);
    REQUIRE(table.apply_g(0.5, cdc::GMode::step) == 0.5);
    REQUIRE(table.apply_g(0.55, cdc::GMode::step) == 0.5);
    REQUIRE(table.apply_g(2.0 / 3.0, cdc::GMode::step) == 1.0);
}

TEST_CASE("g is monotone") {
    cdc::CalibrationTable table = cdc::build_calibration_table(30, 30, 2);
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        double s = double(i) / 1000.0;
        double g = table.apply_g(s);
        REQUIRE(g >= prev);
        prev = g;
    }
}

TEST_CASE("table depends only on sizes, and the cache round-trips") {
    cdc::CalibrationTable a = cdc::build_calibration_table(64, 64, 5);
    cdc::CalibrationTable b = cdc::build_calibration_table(64, 64, 5, 4);
    REQUIRE(a.f == b.f);

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cdc_calib_cache_test";
    fs::create_directories(dir);
    std::string path = (dir / cdc::calibration_cache_name(64, 64, 5)).string();
    cdc::save_calibration_csv(path, a);
    cdc::CalibrationTable loaded;
    REQUIRE(cdc::load_calibration_csv(path, 64, 64, 5, loaded));
    REQUIRE(loaded.f == a.f);
    // corrupted file is rejected
    {
        std::ofstream out(path);
        out << "garbage\n";
    }
    REQUIRE_FALSE(cdc::load_calibration_csv(path, 64, 64, 5, loaded));
    fs::remove_all(dir);
}

TEST_CASE("no overflow for large populations") {
    double v = cdc::expected_clipped_coverage_survival(100000, 100000, 5, 100000);
    REQUIRE(std::isfinite(v));
    REQUIRE(v > 0.0);
    REQUIRE(v <= 1.0);
}

TEST_CASE("Monte Carlo agreement at N=M=64, k=5, d=4") {
    const std::size_t n = 64, m = 64, k = 5, d = 4;
    const int trials = 600;
    double expected = cdc::expected_clipped_coverage(n, m, k, m);
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < trials; ++t) {
        cdc::FeatureMatrix real =
            cdc::gen_gaussian(n, d, cdc::derive_seed(12345, 10, t, 0));
        cdc::FeatureMatrix synth =
            cdc::gen_gaussian(m, d, cdc::derive_seed(12345, 10, t, 1));
        double v = cdc::clipped_coverage_unnorm(real, synth, k);
        sum += v;
        sum_sq += v * v;
    }
    double mean = sum / trials;
    double var = (sum_sq - sum * sum / trials) / (trials - 1);
    double stderr_mean = std::sqrt(var / trials);
    REQUIRE(std::abs(mean - expected) <= 4.0 * stderr_mean);
}

TEST_CASE("clipped coverage end to end") {
    // identical distributions score near 1, far OOD scores 0
    cdc::FeatureMatrix real = cdc::gen_gaussian(800, 8, 41);
    cdc::FeatureMatrix synth = cdc::gen_gaussian(800, 8, 42);
    double v = cdc::clipped_coverage(real, synth, 5);
    REQUIRE(v >= 0.85);
    REQUIRE(v <= 1.05);

    cdc::FeatureMatrix far = synth;
    for (auto& x : far.data) x += 1e5;
    REQUIRE(cdc::clipped_coverage(real, far, 5) == 0.0);
}

TEST_CASE("apply_g rejects scores far outside the unit interval") {
    cdc::CalibrationTable table = cdc::build_calibration_table(10, 10, 2);
    REQUIRE_THROWS_AS(table.apply_g(1.5), cdc::InvalidArgument);
    REQUIRE_THROWS_AS(table.apply_g(-0.5), cdc::InvalidArgument);
    REQUIRE(table.apply_g(1.0) == 1.0);
    REQUIRE(table.apply_g(0.0) == 0.0);
}
