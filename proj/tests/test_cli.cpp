#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cdc/matrix.hpp"
#include "cdc/scenarios.hpp"

namespace fs = std::filesystem;

namespace {

struct CliFixture {
    fs::path dir;

    CliFixture() {
        dir = fs::temp_directory_path() /
              ("cdc_cli_" + std::to_string(std::rand()));
        fs::create_directories(dir);
    }
    ~CliFixture() { fs::remove_all(dir); }

    std::string file(const std::string& name) const {
        return (dir / name).string();
    }

    // returns the exit status; stdout and stderr captured to files
    int run(const std::string& args) const {
        std::string cmd = std::string(CDC_CLI_PATH) + " " + args + " > " +
                          file("stdout.txt") + " 2> " + file("stderr.txt");
        int rc = std::system(cmd.c_str());
        return rc == -1 ? -1 : WEXITSTATUS(rc);
    }

    std::string slurp(const std::string& name) const {
        std::ifstream in(file(name));
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

}  // namespace

TEST_CASE("compute emits every registered metric") {
    CliFixture cli;
    cdc::save_npy(cli.file("real.npy"), cdc::gen_gaussian(300, 4, 1));
    cdc::save_npy(cli.file("synth.npy"), cdc::gen_gaussian(300, 4, 2));

    int rc = cli.run("compute --real " + cli.file("real.npy") + " --synth " +
                     cli.file("synth.npy") + " --k 3 --metrics all");
    REQUIRE(rc == 0);
    auto j = nlohmann::json::parse(cli.slurp("stdout.txt"));
    for (const auto& name : cdc::metric_names()) {
        REQUIRE(j["values"].contains(name));
        double v = j["values"][name];
        REQUIRE(std::isfinite(v));
    }
    REQUIRE(j["config"]["k"] == 3);
    REQUIRE(j["manifest"]["input_digests"].size() == 2);
}

TEST_CASE("compute with a metric subset emits exactly those") {
    CliFixture cli;
    cdc::save_npy(cli.file("real.npy"), cdc::gen_gaussian(200, 3, 5));
    cdc::save_npy(cli.file("synth.npy"), cdc::gen_gaussian(200, 3, 6));

    int rc = cli.run("compute --real " + cli.file("real.npy") + " --synth " +
                     cli.file("synth.npy") +
                     " --metrics density,clipped_coverage");
    REQUIRE(rc == 0);
    auto j = nlohmann::json::parse(cli.slurp("stdout.txt"));
    REQUIRE(j["values"].size() == 2);
    REQUIRE(j["values"].contains("density"));
    REQUIRE(j["values"].contains("clipped_coverage"));
}

TEST_CASE("compute output is deterministic across runs and backends") {
    CliFixture cli;
    cdc::save_npy(cli.file("real.npy"), cdc::gen_gaussian(400, 4, 11));
    cdc::save_npy(cli.file("synth.npy"), cdc::gen_gaussian(400, 4, 12));
    std::string base = "compute --real " + cli.file("real.npy") + " --synth " +
                       cli.file("synth.npy") + " --metrics all --format csv";

    REQUIRE(cli.run(base + " --out " + cli.file("a.csv")) == 0);
    REQUIRE(cli.run(base + " --out " + cli.file("b.csv")) == 0);
    REQUIRE(cli.run(base + " --backend brute --out " + cli.file("c.csv")) == 0);
    REQUIRE(cli.slurp("a.csv") == cli.slurp("b.csv"));
    REQUIRE(cli.slurp("a.csv") == cli.slurp("c.csv"));
    REQUIRE(!cli.slurp("a.csv").empty());
}

TEST_CASE("compute accepts csv input with a header") {
    CliFixture cli;
    {
        std::ofstream out(cli.file("real.csv"));
        out << "x,y\n";
        cdc::FeatureMatrix m = cdc::gen_gaussian(100, 2, 21);
        for (std::size_t i = 0; i < m.n; ++i)
            out << m.row(i)[0] << "," << m.row(i)[1] << "\n";
    }
    {
        std::ofstream out(cli.file("synth.csv"));
        out << "x,y\n";
        cdc::FeatureMatrix m = cdc::gen_gaussian(100, 2, 22);
        for (std::size_t i = 0; i < m.n; ++i)
            out << m.row(i)[0] << "," << m.row(i)[1] << "\n";
    }
    int rc = cli.run("compute --real " + cli.file("real.csv") + " --synth " +
                     cli.file("synth.csv") +
                     " --csv-header --k 2 --metrics density");
    REQUIRE(rc == 0);
    // without the flag the header row must be rejected
    rc = cli.run("compute --real " + cli.file("real.csv") + " --synth " +
                 cli.file("synth.csv") + " --k 2 --metrics density");
    REQUIRE(rc == 1);
}

TEST_CASE("unknown metric fails with the valid names listed") {
    CliFixture cli;
    cdc::save_npy(cli.file("real.npy"), cdc::gen_gaussian(50, 2, 31));
    cdc::save_npy(cli.file("synth.npy"), cdc::gen_gaussian(50, 2, 32));
    int rc = cli.run("compute --real " + cli.file("real.npy") + " --synth " +
                     cli.file("synth.npy") + " --metrics nonsense");
    REQUIRE(rc == 1);
    std::string err = cli.slurp("stderr.txt");
    REQUIRE(err.find("nonsense") != std::string::npos);
    REQUIRE(err.find("clipped_density") != std::string::npos);
}

TEST_CASE("calibrate emits the expectation curve") {
    CliFixture cli;
    int rc = cli.run("calibrate --n 2 --m 2 --k 1");
    REQUIRE(rc == 0);
    std::istringstream in(cli.slurp("stdout.txt"));
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "m,f_expected");
    std::vector<std::string> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].substr(0, 2) == "0,");
    REQUIRE(std::stod(rows[1].substr(2)) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(std::stod(rows[2].substr(2)) ==
            Catch::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("bench produces the expected row count") {
    CliFixture cli;
    int rc = cli.run(
        "bench --scenario identical_null --n-real 200 --n-synth 200 --dim 3 "
        "--k 2 --steps 2 --repeats 2 --metrics density,coverage --format csv");
    REQUIRE(rc == 0);
    std::istringstream in(cli.slurp("stdout.txt"));
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "scenario,step_param,repeat,metric,value");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 2 * 2 * 2);
}

TEST_CASE("bench rejects unknown scenarios") {
    CliFixture cli;
    int rc = cli.run("bench --scenario bogus --n-real 50 --n-synth 50");
    REQUIRE(rc == 1);
    REQUIRE(cli.slurp("stderr.txt").find("bogus") != std::string::npos);
}

TEST_CASE("missing input file is a clean error") {
    CliFixture cli;
    int rc = cli.run("compute --real /no/such/file.npy --synth " +
                     cli.file("also_missing.npy"));
    REQUIRE(rc == 1);
    REQUIRE(!cli.slurp("stderr.txt").empty());
}

TEST_CASE("selftest --quick passes") {
    CliFixture cli;
    int rc = cli.run("selftest --quick --cache-dir " + cli.file("cache"));
    REQUIRE(rc == 0);
    REQUIRE(cli.slurp("stderr.txt").find("selftest passed") !=
            std::string::npos);
}
