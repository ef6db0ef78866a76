// Command-line driver: compute metrics over feature files, run scenario
// sweeps, dump calibration tables, and self-test the numerical core.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdc/calibration.hpp"
#include "cdc/matrix.hpp"
#include "cdc/metrics.hpp"
#include "cdc/report.hpp"
#include "cdc/scenarios.hpp"
#include "cdc/sha256.hpp"

namespace {

struct CommonOpts {
    std::size_t k = 5;
    std::string backend = "tree";
    unsigned threads = cdc::default_thread_count();
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "json";
    std::string cache_dir;
    std::string g_mode = "interp";
};

cdc::Backend parse_backend(const std::string& name, std::size_t n) {
    if (name == "tree") {
        // brute wins on small sets; stays exact either way
        return n < 512 ? cdc::Backend::brute : cdc::Backend::tree;
    }
    if (name == "brute") return cdc::Backend::brute;
    throw cdc::InvalidArgument("unknown backend: " + name);
}

cdc::GMode parse_g_mode(const std::string& name) {
    if (name == "interp") return cdc::GMode::interp;
    if (name == "step") return cdc::GMode::step;
    throw cdc::InvalidArgument("unknown g-mode: " + name);
}

cdc::FileFormat detect_format(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".npy")
        return cdc::FileFormat::npy;
    return cdc::FileFormat::csv;
}

std::vector<std::string> parse_metric_list(const std::string& spec) {
    if (spec == "all") return cdc::metric_names();
    std::vector<std::string> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto& known = cdc::metric_names();
        if (std::find(known.begin(), known.end(), item) == known.end()) {
            std::string valid;
            for (const auto& name : known)
                valid += (valid.empty() ? "" : ", ") + name;
            throw cdc::InvalidArgument("unknown metric '" + item +
                                       "' (valid: " + valid + ")");
        }
        out.push_back(item);
    }
    if (out.empty()) throw cdc::InvalidArgument("empty metric list");
    return out;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
    } else {
        std::ofstream out(out_path);
        if (!out) throw cdc::IoError("cannot write file: " + out_path);
        out << text;
    }
}

int cmd_compute(const CommonOpts& opts, const std::string& real_path,
                const std::string& synth_path, const std::string& metrics_spec,
                bool csv_header) {
    auto t0 = std::chrono::steady_clock::now();
    cdc::FeatureMatrix real =
        cdc::load_matrix(real_path, detect_format(real_path), csv_header);
    cdc::FeatureMatrix synth =
        cdc::load_matrix(synth_path, detect_format(synth_path), csv_header);
    cdc::MetricConfig cfg{.k = opts.k,
                          .backend = parse_backend(opts.backend, real.n),
                          .threads = opts.threads,
                          .seed = opts.seed,
                          .g_mode = parse_g_mode(opts.g_mode),
                          .cache_dir = opts.cache_dir};
    auto metrics = parse_metric_list(metrics_spec);
    cdc::MetricReport report = cdc::compute_report(real, synth, cfg, metrics);

    cdc::RunManifest manifest;
    manifest.command = "compute";
    manifest.flags = {{"real", real_path},   {"synth", synth_path},
                      {"k", std::to_string(opts.k)},
                      {"metrics", metrics_spec},
                      {"backend", opts.backend},
                      {"g_mode", opts.g_mode},
                      {"format", opts.format}};
    manifest.input_digests = {{real_path, cdc::sha256_file(real_path)},
                              {synth_path, cdc::sha256_file(synth_path)}};
    manifest.seed = opts.seed;
    manifest.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();

    if (opts.format == "csv") {
        emit(opts.out, cdc::report_to_csv(report));
    } else if (opts.format == "json") {
        emit(opts.out, cdc::report_to_json(report, manifest).dump(2) + "\n");
    } else {
        throw cdc::InvalidArgument("unknown format: " + opts.format);
    }
    return 0;
}

int cmd_bench(const CommonOpts& opts, const std::string& scenario,
              std::size_t n_real, std::size_t n_synth, std::size_t dim,
              std::size_t steps, std::size_t repeats,
              const std::string& metrics_spec) {
    cdc::ScenarioConfig cfg;
    cfg.name = scenario;
    cfg.n_real = n_real;
    cfg.n_synth = n_synth;
    cfg.dim = dim;
    cfg.k = opts.k;
    cfg.steps = steps;
    cfg.repeats = repeats;
    cfg.seed = opts.seed;
    cfg.backend = parse_backend(opts.backend, n_real);
    cfg.threads = opts.threads;
    cfg.g_mode = parse_g_mode(opts.g_mode);
    cfg.cache_dir = opts.cache_dir;

    cdc::SweepResult result = cdc::run_sweep(cfg, parse_metric_list(metrics_spec));

    std::ostringstream csv;
    csv.precision(17);
    csv << "scenario,step_param,repeat,metric,value\n";
    for (const auto& row : result.rows)
        csv << result.scenario << "," << row.step_param << "," << row.repeat
            << "," << row.metric << "," << row.value << "\n";

    if (opts.format == "json") {
        nlohmann::ordered_json j;
        j["schema"] = cdc::kReportSchemaVersion;
        j["scenario"] = result.scenario;
        j["config"] = {{"n_real", cfg.n_real}, {"n_synth", cfg.n_synth},
                       {"dim", cfg.dim},       {"k", cfg.k},
                       {"steps", cfg.steps},   {"repeats", cfg.repeats},
                       {"seed", cfg.seed}};
        auto rows = nlohmann::ordered_json::array();
        for (const auto& row : result.rows)
            rows.push_back({{"step_param", row.step_param},
                            {"repeat", row.repeat},
                            {"metric", row.metric},
                            {"value", row.value}});
        j["rows"] = rows;
        auto summary = nlohmann::ordered_json::array();
        for (const auto& s : result.summary)
            summary.push_back({{"step_param", s.step_param},
                               {"metric", s.metric},
                               {"mean", s.mean},
                               {"std", s.stddev}});
        j["summary"] = summary;
        emit(opts.out, j.dump(2) + "\n");
    } else if (opts.format == "csv") {
        emit(opts.out, csv.str());
    } else {
        throw cdc::InvalidArgument("unknown format: " + opts.format);
    }
    return 0;
}

int cmd_calibrate(const CommonOpts& opts, std::size_t n, std::size_t m) {
    cdc::CalibrationTable table =
        cdc::build_calibration_table(n, m, opts.k, opts.threads);
    std::ostringstream out;
    out.precision(17);
    out << "m,f_expected\n";
    for (std::size_t i = 0; i < table.f.size(); ++i)
        out << i << "," << table.f[i] << "\n";
    emit(opts.out, out.str());
    return 0;
}

int run_selftest_suite(bool quick, const std::string& cache_dir);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fidelity and coverage metrics for sets of feature vectors"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--k", opts.k, "neighbor count (default 5)");
        cmd->add_option("--backend", opts.backend, "tree or brute")
            ->check(CLI::IsMember({"tree", "brute"}));
        cmd->add_option("--threads", opts.threads, "worker thread count");
        cmd->add_option("--seed", opts.seed, "RNG seed");
        cmd->add_option("--out", opts.out, "output path (default stdout)");
        cmd->add_option("--format", opts.format, "json or csv")
            ->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--cache-dir", opts.cache_dir,
                        "directory for calibration table cache");
        cmd->add_option("--g-mode", opts.g_mode,
                        "coverage inverse-map mode: interp or step")
            ->check(CLI::IsMember({"interp", "step"}));
    };

    // compute
    std::string real_path, synth_path, metrics_spec = "all";
    bool csv_header = false;
    auto* compute = app.add_subcommand("compute", "compute metrics over two files");
    compute->add_option("--real", real_path, "real feature file (.npy or .csv)")
        ->required();
    compute->add_option("--synth", synth_path, "synthetic feature file")
        ->required();
    compute->add_option("--metrics", metrics_spec,
                        "comma-separated metric names, or 'all'");
    compute->add_flag("--csv-header", csv_header, "skip the first CSV line");
    add_common(compute);

    // bench
    std::string scenario;
    std::size_t n_real = 5000, n_synth = 5000, dim = 32, steps = 6, repeats = 5;
    auto* bench = app.add_subcommand("bench", "run a synthetic scenario sweep");
    bench->add_option("--scenario", scenario, "scenario name")->required();
    bench->add_option("--n-real", n_real, "real sample count");
    bench->add_option("--n-synth", n_synth, "synthetic sample count");
    bench->add_option("--dim", dim, "feature dimension");
    bench->add_option("--steps", steps, "sweep grid size");
    bench->add_option("--repeats", repeats, "repeats per grid point");
    bench->add_option("--metrics", metrics_spec,
                      "comma-separated metric names, or 'all'");
    add_common(bench);

    // calibrate
    std::size_t cal_n = 0, cal_m = 0;
    auto* calibrate =
        app.add_subcommand("calibrate", "dump the expectation curve f(m)");
    calibrate->add_option("--n", cal_n, "real sample count N")->required();
    calibrate->add_option("--m", cal_m, "synthetic sample count M")->required();
    add_common(calibrate);

    // selftest
    bool quick = false;
    auto* selftest =
        app.add_subcommand("selftest", "run built-in consistency checks");
    selftest->add_flag("--quick", quick, "run only the fast subset");
    add_common(selftest);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*compute)
            return cmd_compute(opts, real_path, synth_path, metrics_spec,
                               csv_header);
        if (*bench)
            return cmd_bench(opts, scenario, n_real, n_synth, dim, steps,
                             repeats, metrics_spec);
        if (*calibrate) return cmd_calibrate(opts, cal_n, cal_m);
        if (*selftest) return run_selftest_suite(quick, opts.cache_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

namespace {

struct SelftestReporter {
    int failures = 0;
    void check(bool ok, const std::string& name) {
        std::cerr << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    }
};

int run_selftest_suite(bool quick, const std::string& cache_dir) {
    SelftestReporter rep;

    // backend equivalence on a random instance
    {
        cdc::FeatureMatrix pts = cdc::gen_gaussian(400, 8, 12345);
        cdc::NeighborIndex tree(pts, cdc::Backend::tree);
        cdc::NeighborIndex brute(pts, cdc::Backend::brute);
        cdc::KnnTable a = cdc::knn_distances(tree, pts, 5, true);
        cdc::KnnTable b = cdc::knn_distances(brute, pts, 5, true);
        bool ok = true;
        for (std::size_t i = 0; i < pts.n * 5 && ok; ++i)
            ok = a.entries[i].index == b.entries[i].index &&
                 a.entries[i].dist_sq == b.entries[i].dist_sq;
        rep.check(ok, "backend equivalence (400 Gaussian points, d=8, k=5)");
    }

    // formula equivalence, direct sum vs survival form
    {
        bool ok = true;
        for (std::size_t n : {2u, 5u, 20u, 50u}) {
            for (std::size_t k : {1u, 2u, 5u}) {
                if (k >= n) continue;
                std::size_t m = n;
                for (std::size_t i = 0; i <= m && ok; ++i) {
                    double direct = cdc::expected_clipped_coverage(n, m, k, i);
                    double surv =
                        cdc::expected_clipped_coverage_survival(n, m, k, i);
                    ok = std::abs(direct - surv) <= 1e-10;
                }
            }
        }
        rep.check(ok, "expectation formula equivalence (direct vs survival)");
    }

    // small-instance oracles
    {
        cdc::CalibrationTable t = cdc::build_calibration_table(2, 2, 1);
        bool ok = t.f[0] == 0.0 && std::abs(t.f[1] - 0.5) < 1e-12 &&
                  std::abs(t.f[2] - 2.0 / 3.0) < 1e-12;
        rep.check(ok, "calibration knots N=M=2, k=1 -> [0, 1/2, 2/3]");
    }

    // cache round-trip: a corrupted cache entry is ignored and rebuilt
    if (!cache_dir.empty()) {
        std::filesystem::create_directories(cache_dir);
        std::string path =
            cache_dir + "/" + cdc::calibration_cache_name(50, 50, 5);
        {
            std::ofstream out(path);
            out << "garbage\n";
        }
        cdc::MetricConfig cfg{.k = 5, .backend = cdc::Backend::brute,
                              .cache_dir = cache_dir};
        cdc::FeatureMatrix real = cdc::gen_gaussian(50, 4, 7);
        cdc::FeatureMatrix synth = cdc::gen_gaussian(50, 4, 8);
        cdc::MetricEngine engine(real, synth, cfg);
        double v = engine.value("clipped_coverage");
        rep.check(v >= 0.0 && v <= 1.0, "corrupted calibration cache rebuilt");
    }

    if (!quick) {
        // metric values against a direct O(NM) membership evaluation
        cdc::FeatureMatrix real = cdc::gen_gaussian(200, 4, 99);
        cdc::FeatureMatrix synth = cdc::gen_gaussian(200, 4, 100);
        std::size_t k = 5;
        double tree_density =
            cdc::density(real, synth, k, cdc::Backend::tree);
        double brute_density =
            cdc::density(real, synth, k, cdc::Backend::brute);
        rep.check(tree_density == brute_density,
                  "density identical across backends (random instance)");

        double fast = cdc::clipped_coverage_unnorm(real, synth, k);
        cdc::MetricEngine engine(real, synth,
                                 {.k = k, .backend = cdc::Backend::brute});
        double slow = engine.clipped_coverage_unnorm_by_radius();
        rep.check(fast == slow,
                  "clipped coverage fast path equals radius path");
    }

    std::cerr << (rep.failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return rep.failures == 0 ? 0 : 1;
}

}  // namespace
