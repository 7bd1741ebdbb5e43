#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qpgl/sweep.hpp"

using namespace qpgl;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

Json base_config(const std::string& out) {
    Json doc;
    doc["blocks"] = {2};
    doc["potential"] = {{"model", "separable-cosine"}, {"rho", 0.5}, {"k_cut", 1}};
    doc["schedule"] = {{"c1", 0.2}, {"c2", 0.3}, {"c3", 0.6}, {"c4", 0.9}, {"C", 4.0},
                       {"N0", 3},   {"eps", 1e-8}, {"n1_override", 2}};
    doc["seed"] = 424242;
    doc["workers"] = 1;
    doc["out"] = out;
    return doc;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("qpgl_sweep_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config loading reports parse location and missing keys") {
    const fs::path dir = temp_dir("cfg");
    const fs::path bad = dir / "bad.json";
    {
        std::ofstream f(bad);
        f << "{\n  \"blocks\": [2],\n  oops\n}\n";
    }
    try {
        load_config_file(bad.string());
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    Json doc = base_config((dir / "out").string());
    doc.erase("seed");
    CHECK_THROWS_WITH_AS(parse_config(doc), "config: missing key 'seed'", std::invalid_argument);

    Json bad_rho = base_config((dir / "out").string());
    bad_rho["potential"]["rho"] = 1.5;
    const SweepConfig cfg = parse_config(bad_rho);
    CHECK_THROWS_AS(run_sweep("selftest", cfg), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("override assignments") {
    Json doc = base_config("x");
    apply_override(doc, "potential.rho=0.4");
    CHECK(doc["potential"]["rho"].get<double>() == 0.4);
    apply_override(doc, "green.N=[2,3]");
    CHECK(doc["green"]["N"].size() == 2);
    apply_override(doc, "potential.model=random-analytic");
    CHECK(doc["potential"]["model"] == "random-analytic");
    CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"), std::invalid_argument);
}

TEST_CASE("green sweep over a diagonal grid matches hand computation") {
    const fs::path dir = temp_dir("green");
    Json doc = base_config(dir.string());
    doc["green"] = {{"N", {1}},
                    {"theta", {{0.1}, {0.4}, {0.9}}},
                    {"omega", {{0.7, 0.5}}},
                    {"E", {0.05}},
                    {"eps", {0.0}}};
    const SweepConfig cfg = parse_config(doc);
    const SweepResult res = run_sweep("green", cfg);
    REQUIRE(res.records.size() == 3);
    CHECK(res.ok());
    for (const auto& r : res.records) {
        double theta = 0, op_norm = 0;
        for (const auto& [k, v] : r.fields) {
            if (k == "theta_0") theta = std::stod(v);
            if (k == "op_norm") op_norm = std::stod(v);
        }
        // diagonal case: 1 / min_k |(theta + k.w)^2 - E|
        double gap = 1e300;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b) {
                const double u = theta + 0.7 * a + 0.5 * b;
                gap = std::min(gap, std::abs(u * u - 0.05));
            }
        CHECK(op_norm == doctest::Approx(1.0 / gap).epsilon(1e-12));
    }
    fs::remove_all(dir);
}

TEST_CASE("determinism: byte-identical outputs at worker counts 1 and 8") {
    const fs::path d1 = temp_dir("det1");
    const fs::path d8 = temp_dir("det8");

    for (const std::string sub : {std::string("resonance-measure"), std::string("green")}) {
        Json doc = base_config(d1.string());
        doc["resonance-measure"] = {{"count", 24}};
        doc["green"] = {{"N", {1, 2}},
                        {"theta", {{0.1}, {0.7}}},
                        {"omega", {{0.7, 0.5}, {1.1, 2.3}}},
                        {"E", {0.3, 1.7}},
                        {"eps", {0.0, 1e-3}}};
        run_sweep(sub, parse_config(doc));
        doc["workers"] = 8;
        doc["out"] = d8.string();
        run_sweep(sub, parse_config(doc));
        CHECK(slurp(d1 / (sub + ".csv")) == slurp(d8 / (sub + ".csv")));
        CHECK(slurp(d1 / (sub + ".json")) == slurp(d8 / (sub + ".json")));
    }
    fs::remove_all(d1);
    fs::remove_all(d8);
}

TEST_CASE("resonance-measure CSV schema and provenance header") {
    const fs::path dir = temp_dir("schema");
    Json doc = base_config(dir.string());
    doc["blocks"] = {1, 1};  // d = 2, so one section coordinate column
    doc["resonance-measure"] = {{"count", 5}};
    const SweepConfig cfg = parse_config(doc);
    const SweepResult res = run_sweep("resonance-measure", cfg);
    CHECK(res.ok());
    const std::string csv = slurp(dir / "resonance-measure.csv");
    CHECK(csv.rfind("# qpgl ", 0) == 0);
    CHECK(csv.find("digest=" + cfg.digest) != std::string::npos);
    CHECK(csv.find("seed=424242") != std::string::npos);
    const auto header_start = csv.find("\r\n") + 2;
    const std::string header = csv.substr(header_start, csv.find("\r\n", header_start) - header_start);
    CHECK(header.rfind("j,theta_section", 0) == 0);
    CHECK(header.find(",N,delta,E,measure,bound4") != std::string::npos);
    CHECK(res.summary.at("bound_violations").get<long>() == 0);

    // d = 1 drops the section columns entirely
    Json doc1 = base_config(dir.string());
    doc1["resonance-measure"] = {{"count", 3}};
    const SweepResult res1 = run_sweep("resonance-measure", parse_config(doc1));
    CHECK(res1.ok());
    const std::string csv1 = slurp(dir / "resonance-measure.csv");
    const auto h1 = csv1.find("\r\n") + 2;
    CHECK(csv1.substr(h1, csv1.find("\r\n", h1) - h1) == "j,N,delta,E,measure,bound4,status");
    fs::remove_all(dir);
}

TEST_CASE("failed tasks are recorded, not fatal") {
    const fs::path dir = temp_dir("fail");
    Json doc = base_config(dir.string());
    doc["coupling-verify"] = {{"lemma", "no-such-lemma"}, {"instances", 3}};
    const SweepResult res = run_sweep("coupling-verify", parse_config(doc));
    REQUIRE(res.records.size() == 3);
    CHECK_FALSE(res.ok());
    for (const auto& r : res.records) CHECK(!r.status.empty());
    // the CSV carries the status column
    const std::string csv = slurp(dir / "coupling-verify.csv");
    CHECK(csv.find("no-such-lemma") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("double-resonance sweep emits scan details and a success rate") {
    const fs::path dir = temp_dir("dr");
    Json doc = base_config(dir.string());
    doc["double-resonance"] = {{"omega_count", 6}, {"divisions", 2}, {"N", 6},
                               {"theta", {0.3}},   {"E", 0.7},       {"delta0", 0.15}};
    const SweepResult res = run_sweep("double-resonance", parse_config(doc));
    CHECK(res.ok());
    REQUIRE(res.summary.contains("success_rate"));
    const auto rates = res.summary.at("success_rate");
    REQUIRE(rates.size() == 2);
    for (const auto& r : rates) {
        CHECK(r.get<double>() >= 0.0);
        CHECK(r.get<double>() <= 1.0);
    }
    CHECK(res.summary.at("non_decreasing").get<bool>());
    const std::string detail = slurp(dir / "double-resonance-detail.csv");
    CHECK(detail.find("task,M,annulus_size,failures,first_failure_k") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("selftest runs clean") {
    const fs::path dir = temp_dir("selftest");
    Json doc = base_config(dir.string());
    const SweepResult res = run_sweep("selftest", parse_config(doc));
    for (const auto& r : res.records) {
        std::string name, pass;
        for (const auto& [k, v] : r.fields) {
            if (k == "check") name = v;
            if (k == "pass") pass = v;
        }
        INFO(name);
        CHECK(pass == "true");
    }
    fs::remove_all(dir);
}

TEST_CASE("unknown subcommand") {
    Json doc = base_config("x");
    CHECK_THROWS_AS(run_sweep("not-a-subcommand", parse_config(doc)), std::invalid_argument);
}
