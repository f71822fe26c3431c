#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbm/counterexample.hpp"
#include "bbm/harness.hpp"

using namespace bbm;
using namespace bbm::harness;
namespace ce = bbm::counterexample;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("harness_cli") {

TEST_CASE("config defaults and overrides") {
    ExperimentConfig empty = config_from_json(nlohmann::json::object());
    CHECK(empty.seed == 1);
    CHECK_FALSE(empty.replicates.has_value());
    CHECK(empty.model.r == 1.0);
    CHECK(empty.reps(empty.section("pgf"), "replicates", 123) == 123);

    auto j = nlohmann::json::parse(R"({
        "seed": 9, "replicates": 17, "bridge_correction": true,
        "model": {"r": 2.0, "offspring": {"2": 0.5, "3": 0.5}},
        "pgf": {"replicates": 400}
    })");
    ExperimentConfig c = config_from_json(j);
    CHECK(c.seed == 9);
    CHECK(c.bridge_correction);
    CHECK(c.model.r == 2.0);
    CHECK(c.model.offspring.mean() == doctest::Approx(2.5));
    // The global override beats the section value.
    CHECK(c.reps(c.section("pgf"), "replicates", 5) == 17);
    CHECK(c.echo()["seed"] == 9);

    CHECK_THROWS(model_from_json(nlohmann::json::parse(R"({"r": -1})")));
    CHECK_THROWS(model_from_json(nlohmann::json::parse(R"({"offspring": {"1": 1.0}})")));
}

TEST_CASE("config file accepts comments") {
    auto dir = std::filesystem::temp_directory_path() / "bbm_harness_cfg";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "c.json");
        out << "{\n  // comment\n  \"seed\": 4\n}\n";
    }
    CHECK(load_config(dir / "c.json").seed == 4);
    CHECK_THROWS(load_config(dir / "missing.json"));
}

TEST_CASE("path specs") {
    PathSpec zero;
    Path p = zero.build();
    CHECK(eval_path(p, 0.7) == 0.0);

    PathSpec poly;
    poly.polynomial = {0.0, 0.0, 0.8};
    CHECK(eval_path(poly.build(), 0.5) == doctest::Approx(0.2).epsilon(1e-4));

    PathSpec grid = path_spec_from_json(nlohmann::json::parse(R"({"kind": "grid", "values": [0, 0.5, 0.5]})"));
    Path g = grid.build();
    CHECK(std::holds_alternative<GridPath>(g));
    CHECK(eval_path(g, 0.25) == doctest::Approx(0.25));
    CHECK_FALSE(grid.describe().empty());

    PathSpec natural = path_spec_from_json(nlohmann::json::parse(R"({"boundary": "natural", "polynomial": [0, 1]})"));
    CHECK(natural.boundary == SplineBoundary::natural);
    CHECK_THROWS(path_spec_from_json(nlohmann::json::parse(R"({"kind": "wiggly"})")).build());
}

TEST_CASE("number formatting round-trips") {
    CHECK(fmt(0.1) == "0.10000000000000001");
    CHECK(std::stod(fmt(M_PI)) == M_PI);
    CHECK(fmt(INFINITY) == "inf");
    CHECK(fmt(-INFINITY) == "-inf");
    CHECK(fmt(ExtendedReal::minus_infinity()) == "-inf");
    CHECK(fmt(ExtendedReal(2.0)) == "2");
}

TEST_CASE("run report bookkeeping") {
    RunReport a;
    a.checks.push_back({"x", Status::pass});
    a.checks.push_back({"y", Status::skipped});
    CHECK(a.passed());
    RunReport b;
    b.checks.push_back({"z", Status::fail});
    b.capped = 3;
    a.absorb(b);
    CHECK_FALSE(a.passed());
    CHECK(a.capped == 3);
    REQUIRE(a.find("z"));
    CHECK(a.find("z")->status == Status::fail);
    CHECK(a.find("nope") == nullptr);
    CHECK(std::string(to_string(Status::skipped)) == "skipped");
}

TEST_CASE("counterexample worked examples") {
    // T = 20 with omega = 0: T - 20 = 0 hits the window around 0.
    CHECK(ce::eval_x(20.0, 0.0).high);
    CHECK(ce::eval_x(20.0, 0.0).log_x() == 40.0);
    CHECK_FALSE(ce::eval_x(20.0, 0.5).high);
    CHECK(ce::eval_x(20.0, 0.5).log_x() == 20.0);
    // T = 20.5: omega = 0.5 hits, the window is far narrower than any offset.
    CHECK(ce::eval_x(ce::Horizon{20, 0.5}, 0.5).high);
    CHECK_FALSE(ce::eval_x(ce::Horizon{20, 0.5}, 0.5 + 1e-6).high);
    // n = 0 counts: T in [0, 1) hits omega = T.
    CHECK(ce::eval_x(ce::Horizon{0, 0.25}, 0.25).high);

    ce::Horizon h{20, 0.0};
    CHECK(ce::high_measure(h) == doctest::Approx(2.0 * std::exp(-80.0)).epsilon(1e-12));
    CHECK(ce::log_mean(h) / 20.0 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(ce::log_mean(h) >= 20.0);

    std::vector<double> om{0.0, 0.3, 0.77};
    std::vector<double> Ts{1.0, 20.0};
    ce::Report r = ce::report(om, 10, Ts);
    CHECK(r.rows.size() == 30);
    for (double m : r.max_rate) CHECK(m == 2.0);
    REQUIRE(r.mean_rate.size() == 2);
    CHECK(r.mean_rate[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("reports are written deterministically") {
    ExperimentConfig c = config_from_json(nlohmann::json::parse(R"({"seed": 3, "replicates": 30})"));
    auto base = std::filesystem::temp_directory_path() / "bbm_harness_det";
    std::filesystem::remove_all(base);
    for (const char* sub : {"a", "b"}) write_report(run_pgf_bound(c), c, base / sub);
    for (const char* file : {"pgf.csv", "checks.csv"}) {
        std::string a = slurp(base / "a" / file), b = slurp(base / "b" / file);
        CHECK_FALSE(a.empty());
        CHECK(a == b);
    }
    auto summary = nlohmann::json::parse(slurp(base / "a" / "summary.json"));
    CHECK(summary.contains("checks"));
    CHECK(summary["config"]["seed"] == 3);
}

}  // TEST_SUITE
