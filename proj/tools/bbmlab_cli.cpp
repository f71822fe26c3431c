// bbmlab: command-line front end for the branching Brownian motion lab.
//
//   bbmlab <subcommand> [--config FILE] [--seed N] [--out DIR] [--replicates N] [--bridge-correction]
//
// Every experiment writes its CSV tables, checks.csv and summary.json to --out
// and exits 0 iff no non-skipped check failed.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbm/count.hpp"
#include "bbm/forest.hpp"
#include "bbm/harness.hpp"
#include "bbm/rate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bbm;
using namespace bbm::harness;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "bbmlab_out";
    std::optional<std::size_t> replicates;
    bool bridge = false;
};

ExperimentConfig make_config(const Globals& g, const std::string& name) {
    ExperimentConfig c = g.config.empty() ? config_from_json(json::object()) : load_config(g.config);
    c.name = name;
    if (g.seed) c.seed = *g.seed;
    if (g.replicates) {
        if (*g.replicates < 1) throw std::invalid_argument("--replicates must be >= 1");
        c.replicates = *g.replicates;
    }
    if (g.bridge) c.bridge_correction = true;
    return c;
}

int finish(const RunReport& report, const ExperimentConfig& config, const fs::path& out) {
    write_report(report, config, out);
    std::size_t pass = 0, fail = 0, skip = 0;
    for (const Check& c : report.checks) {
        std::printf("%-8s %-44s value=%-14s target=%-14s %s\n", to_string(c.status), c.name.c_str(),
                    fmt(c.value).c_str(), fmt(c.target).c_str(), c.note.c_str());
        pass += c.status == Status::pass;
        fail += c.status == Status::fail;
        skip += c.status == Status::skipped;
    }
    std::printf("%zu passed, %zu failed, %zu skipped; %zu capped replicates; output in %s\n", pass, fail, skip,
                report.capped, out.string().c_str());
    return report.passed() ? 0 : 1;
}

int run_simulate(const ExperimentConfig& config, const fs::path& out) {
    json sec = config.section("simulate");
    double T = sec.value("T", 5.0);
    double horizon = sec.value("horizon", T);
    auto steps = static_cast<std::size_t>(std::max(1.0, std::round(sec.value("steps_per_unit_time", 10.0) * T)));
    TimeGrid grid(T, steps);
    RngStream rng(config.seed, sec.value("replicate", std::uint64_t{0}), 0);
    Forest forest = simulate_forest(config.model, grid, horizon, rng, sec.value("cap", kDefaultPopulationCap));

    fs::create_directories(out);
    std::ofstream jl(out / "forest.jsonl", std::ios::binary);
    write_forest_jsonl(forest, jl);
    std::ofstream pop(out / "population.csv", std::ios::binary);
    pop << "t,count\n";
    std::vector<std::size_t> counts = population_counts(forest);
    for (std::size_t k = 0; k < counts.size(); ++k) pop << fmt(grid.time(k)) << ',' << counts[k] << '\n';

    json summary{{"experiment", "simulate"},
                 {"records", forest.records.size()},
                 {"alive_at_horizon", counts.empty() ? 0 : counts.back()},
                 {"capped", forest.capped},
                 {"config", config.echo()}};
    std::ofstream(out / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
    std::printf("%zu records, %zu alive at t=%s%s\n", forest.records.size(), counts.empty() ? 0 : counts.back(),
                fmt(horizon).c_str(), forest.capped ? " (capped)" : "");
    return forest.capped ? 1 : 0;
}

int run_rate(const std::string& query_file, const fs::path& out) {
    std::ifstream in(query_file);
    if (!in) throw std::runtime_error("cannot open query " + query_file);
    json q = json::parse(in);
    ModelParams params = model_from_json(q);
    GridPath center(q.at("center").get<std::vector<double>>());
    double eps = q.at("epsilon").get<double>();
    double theta = q.value("theta", 1.0);
    double growth = params.rm();

    rate::RateReport center_report = rate::rate_report(center, theta, growth);
    rate::BallQuery ball(center, eps, theta);
    rate::BallOptimum best = rate::sup_k_over_ball(ball, growth);
    rate::SchilderResult sch = rate::schilder_inf(ball);

    auto status = [](const rate::OptimizerStatus& s) {
        return json{{"converged", s.converged},   {"iterations", s.iterations},     {"residual", s.residual},
                    {"active_lower", s.active_lower}, {"active_upper", s.active_upper}, {"phase", s.phase},
                    {"max_violation", s.max_violation}};
    };
    json report{{"center",
                 {{"J", center_report.j},
                  {"K", fmt(center_report.k)},
                  {"theta0", fmt(center_report.theta0)},
                  {"energy_profile", center_report.energy_profile}}},
                {"ball", {{"epsilon", eps}, {"theta", theta}, {"resolution", ball.resolution()}}},
                {"growth", growth},
                {"sup_K", fmt(best.value)},
                {"argmax_energy", best.energy},
                {"optimizer", status(best.status)},
                {"schilder_inf", sch.value},
                {"schilder_status", status(sch.status)}};
    fs::create_directories(out);
    std::ofstream(out / "rate_report.json", std::ios::binary) << report.dump(2) << '\n';
    std::ofstream csv(out / "argmax.csv", std::ios::binary);
    csv << "s,argmax,center\n";
    std::size_t n = best.argmax.resolution();
    for (std::size_t k = 0; k <= n; ++k)
        csv << fmt(static_cast<double>(k) / static_cast<double>(n)) << ',' << fmt(best.argmax.knot(k)) << ','
            << fmt(center.knot(k)) << '\n';
    std::printf("sup K = %s, theta0(center) = %s, schilder inf = %s\n", fmt(best.value).c_str(),
                fmt(center_report.theta0).c_str(), fmt(sch.value).c_str());
    return best.status.converged && sch.status.converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branching Brownian motion tube-counting laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--replicates", g.replicates, "override every Monte Carlo replicate count");
    app.add_flag("--bridge-correction", g.bridge, "Brownian-bridge rejection between recorded times");

    using Runner = RunReport (*)(const ExperimentConfig&);
    struct Entry {
        const char* name;
        const char* help;
        Runner run;
    };
    const Entry experiments[] = {
        {"growth", "growth-rate curves against optimizer benchmarks", run_growth},
        {"many-to-one", "forest sums against the single-path oracle", run_many_to_one},
        {"pgf", "generating function of the population size", run_pgf_bound},
        {"counterexample", "exact evaluation of the limsup/mean counterexample", run_counterexample},
        {"diagnose-paths", "extreme-path diagnostic on simulated lineages", run_diagnose_paths},
        {"all", "every experiment with one seed", run_all},
    };
    for (const Entry& e : experiments) {
        app.add_subcommand(e.name, e.help)->callback([&g, e] {
            ExperimentConfig c = make_config(g, e.name);
            throw CLI::RuntimeError(finish(e.run(c), c, g.out));
        });
    }
    app.add_subcommand("martingale", "mean-one, spine-law, pathwise bounds and change of measure")->callback([&g] {
        ExperimentConfig c = make_config(g, "martingale");
        RunReport rep;
        rep.experiment = "martingale";
        rep.absorb(run_martingale_suite(c));
        rep.absorb(run_cross_measure(c));
        throw CLI::RuntimeError(finish(rep, c, g.out));
    });
    app.add_subcommand("simulate", "simulate one forest and dump it")->callback([&g] {
        ExperimentConfig c = make_config(g, "simulate");
        throw CLI::RuntimeError(run_simulate(c, g.out));
    });
    std::string query;
    auto* rate_cmd = app.add_subcommand("rate", "rate function and sup K over a ball");
    rate_cmd->add_option("--query", query, "JSON query: center, epsilon, theta, r, offspring (default: worked examples)")
        ->check(CLI::ExistingFile);
    rate_cmd->callback([&] {
        if (!query.empty()) throw CLI::RuntimeError(run_rate(query, g.out));
        ExperimentConfig c = make_config(g, "rate");
        throw CLI::RuntimeError(finish(run_rate_examples(c), c, g.out));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::RuntimeError& e) {
        return e.get_exit_code();
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
