#ifndef CDC_REPORT_HPP
#define CDC_REPORT_HPP

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdc/common.hpp"
#include "cdc/metrics.hpp"

namespace cdc {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kLibraryVersion = "0.1.0";

struct MetricReport {
    std::map<std::string, double> values;
    std::map<std::string, double> timings_ms;
    std::size_t n = 0, m = 0, k = 0;
    std::string backend;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

// Compute the requested metrics over one shared engine, timing each call.
inline MetricReport compute_report(const FeatureMatrix& real,
                                   const FeatureMatrix& synth,
                                   const MetricConfig& cfg,
                                   const std::vector<std::string>& metrics) {
    MetricEngine engine(real, synth, cfg);
    MetricReport report;
    report.n = real.n;
    report.m = synth.n;
    report.k = cfg.k;
    report.backend = backend_name(cfg.backend);
    report.seed = cfg.seed;
    report.threads = cfg.threads;
    for (const auto& name : metrics) {
        auto start = std::chrono::steady_clock::now();
        report.values[name] = engine.value(name);
        auto stop = std::chrono::steady_clock::now();
        report.timings_ms[name] =
            std::chrono::duration<double, std::milli>(stop - start).count();
    }
    return report;
}

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> flags;
    std::map<std::string, std::string> input_digests;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
};

inline nlohmann::ordered_json report_to_json(const MetricReport& report,
                                             const RunManifest& manifest) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchemaVersion;
    j["values"] = report.values;
    j["config"] = {{"N", report.n},     {"M", report.m},
                   {"k", report.k},     {"backend", report.backend},
                   {"seed", report.seed}, {"threads", report.threads}};
    j["timings_ms"] = report.timings_ms;
    j["manifest"] = {{"command", manifest.command},
                     {"flags", manifest.flags},
                     {"input_digests", manifest.input_digests},
                     {"library_version", kLibraryVersion},
                     {"seed", manifest.seed},
                     {"wall_ms", manifest.wall_ms}};
    return j;
}

inline std::string report_to_csv(const MetricReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "metric,value\n";
    for (const auto& [name, value] : report.values)
        out << name << "," << value << "\n";
    return out.str();
}

}  // namespace cdc

#endif  // CDC_REPORT_HPP
