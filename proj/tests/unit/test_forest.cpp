#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <sstream>

#include <json.hpp>

#include "bbm/forest.hpp"
#include "bbm/stats.hpp"

using namespace bbm;

namespace {

ModelParams dyadic() { return ModelParams(1.0, OffspringLaw::dyadic()); }

}  // namespace

TEST_SUITE("bbm_sim") {

TEST_CASE("zero horizon gives the root alone") {
    TimeGrid grid(1.0, 10);
    RngStream rng(1, 0);
    Forest f = simulate_forest(dyadic(), grid, 0.0, rng);
    REQUIRE(f.records.size() == 1);
    auto pop = population_at(f, 0.0);
    REQUIRE(pop.size() == 1);
    CHECK(pop[0].second == 0.0);
    std::vector<Sample> s = f.records[0].samples(grid);
    REQUIRE(s.size() == 1);
    CHECK(s[0].t == 0.0);
    CHECK(s[0].x == 0.0);
}

TEST_CASE("genealogy is consistent") {
    TimeGrid grid(4.0, 40);
    OffspringLaw law({{2, 0.5}, {3, 0.3}, {5, 0.2}});
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        RngStream rng(3, rep);
        Forest f = simulate_forest(ModelParams(1.0, law), grid, 4.0, rng);
        CHECK_FALSE(f.capped);
        CHECK(f.records[0].parent == kNoParent);
        for (const ParticleRecord& rec : f.records) {
            CHECK(rec.birth < rec.death + 1e-15);
            CHECK(rec.death <= 4.0);
            if (rec.parent != kNoParent) {
                const ParticleRecord& p = f.records[rec.parent];
                CHECK(rec.parent < rec.id);
                CHECK(rec.birth == p.death);
                CHECK(rec.birth_x == p.death_x);
            }
            if (rec.censored) {
                CHECK(rec.death == 4.0);
                CHECK(rec.offspring == 0);
            } else {
                CHECK(rec.offspring >= 2);
                for (int c = 0; c < rec.offspring; ++c)
                    CHECK(f.records[rec.first_child + static_cast<std::size_t>(c)].parent == rec.id);
            }
            std::vector<Sample> s = rec.samples(grid);
            CHECK(s.front().t == rec.birth);
            CHECK(s.back().t == rec.death);
            for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i].t > s[i - 1].t);
        }
    }
}

TEST_CASE("dyadic counting identity") {
    TimeGrid grid(3.0, 30);
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        RngStream rng(4, rep);
        Forest f = simulate_forest(dyadic(), grid, 3.0, rng);
        std::vector<std::size_t> counts = population_counts(f);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            double t = grid.time(k);
            std::size_t branches = 0;
            for (const ParticleRecord& rec : f.records) branches += !rec.censored && rec.death <= t;
            CHECK(counts[k] == branches + 1);
            CHECK(population_at(f, t).size() == counts[k]);
        }
    }
}

TEST_CASE("population is one until the first branch") {
    TimeGrid grid(2.0, 2000);
    RngStream rng(8, 0);
    Forest f = simulate_forest(dyadic(), grid, 2.0, rng);
    double first = f.records[0].death;
    std::size_t k = grid.last_index_at_or_before(first);
    if (grid.time(k) == first && k > 0) --k;
    CHECK(population_at(f, grid.time(k)).size() == 1);
}

TEST_CASE("population_at rejects unrecorded times") {
    TimeGrid grid(2.0, 4);
    RngStream rng(1, 0);
    Forest f = simulate_forest(dyadic(), grid, 1.0, rng);
    CHECK_THROWS_AS(population_at(f, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(population_at(f, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(simulate_forest(dyadic(), grid, 3.0, rng), std::invalid_argument);
}

TEST_CASE("lifetimes are exponential") {
    TimeGrid grid(8.0, 8);
    std::vector<double> life;
    for (std::uint64_t rep = 0; rep < 40 && life.size() < 5000; ++rep) {
        RngStream rng(9, rep);
        Forest f = simulate_forest(ModelParams(1.5, OffspringLaw::dyadic()), grid, 5.0, rng);
        for (const ParticleRecord& rec : f.records)
            if (!rec.censored && rec.parent == kNoParent) life.push_back(rec.death - rec.birth);
        // Uncensored lifetimes of particles born early are unbiased once the
        // horizon is far beyond them; use particles born before t = 1.
        for (const ParticleRecord& rec : f.records)
            if (rec.parent != kNoParent && rec.birth < 1.0 && !rec.censored) life.push_back(rec.death - rec.birth);
    }
    REQUIRE(life.size() > 100);
    CHECK(ks_test_exponential(life, 1.5).p_value > 1e-3);
}

TEST_CASE("mean population grows like e^{rmt}") {
    TimeGrid grid(5.0, 1);
    std::vector<double> n;
    for (std::uint64_t rep = 0; rep < 2000; ++rep) {
        RngStream rng(10, rep);
        Forest f = simulate_forest(dyadic(), grid, 5.0, rng);
        n.push_back(static_cast<double>(population_counts(f).back()));
    }
    CHECK(estimate(n).within(std::exp(5.0)));
}

TEST_CASE("count martingale is flat in time") {
    TimeGrid grid(3.0, 3);
    std::vector<std::vector<double>> w(3);
    for (std::uint64_t rep = 0; rep < 3000; ++rep) {
        RngStream rng(12, rep);
        Forest f = simulate_forest(dyadic(), grid, 3.0, rng);
        auto counts = population_counts(f);
        for (int t = 1; t <= 3; ++t) w[t - 1].push_back(counts[t] * std::exp(-double(t)));
    }
    for (const auto& col : w) CHECK(estimate(col).within(1.0));
}

TEST_CASE("dyadic generating function identity") {
    TimeGrid grid(2.0, 1);
    std::vector<double> v;
    for (std::uint64_t rep = 0; rep < 10000; ++rep) {
        RngStream rng(13, rep);
        Forest f = simulate_forest(dyadic(), grid, 2.0, rng);
        v.push_back(std::pow(0.5, double(population_counts(f).back())));
    }
    CHECK(estimate(v).within(1.0 / (1.0 + std::exp(2.0))));
}

TEST_CASE("Brownian increments are standard normal") {
    TimeGrid grid(3.0, 30);
    std::vector<double> z;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        RngStream rng(14, rep);
        Forest f = simulate_forest(dyadic(), grid, 3.0, rng);
        for (const ParticleRecord& rec : f.records) {
            std::vector<Sample> s = rec.samples(grid);
            for (std::size_t i = 1; i < s.size(); ++i) {
                double dt = s[i].t - s[i - 1].t;
                if (dt > 1e-9) z.push_back((s[i].x - s[i - 1].x) / std::sqrt(dt));
            }
        }
    }
    Estimate m = estimate(z);
    CHECK(m.within(0.0));
    std::vector<double> sq;
    for (double x : z) sq.push_back(x * x);
    CHECK(estimate(sq).within(1.0));
}

TEST_CASE("population cap marks the forest") {
    TimeGrid grid(10.0, 10);
    RngStream rng(15, 0);
    Forest f = simulate_forest(dyadic(), grid, 10.0, rng, 50);
    CHECK(f.capped);
    CHECK(f.records.size() <= 50);
}

TEST_CASE("same stream reproduces the same forest") {
    TimeGrid grid(3.0, 30);
    RngStream a(16, 2), b(16, 2);
    Forest fa = simulate_forest(dyadic(), grid, 3.0, a);
    Forest fb = simulate_forest(dyadic(), grid, 3.0, b);
    std::ostringstream sa, sb;
    write_forest_jsonl(fa, sa);
    write_forest_jsonl(fb, sb);
    CHECK(sa.str() == sb.str());
}

TEST_CASE("forest dump format") {
    TimeGrid grid(1.0, 4);
    RngStream rng(17, 0);
    Forest f = simulate_forest(dyadic(), grid, 1.0, rng);
    std::ostringstream out;
    write_forest_jsonl(f, out);
    std::istringstream in(out.str());
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("positions"));
        if (rows == 0) CHECK(j["parent"].is_null());
        CHECK(j["positions"][0][0].get<double>() == doctest::Approx(f.records[rows].birth));
        ++rows;
    }
    CHECK(rows == f.records.size());
}

}  // TEST_SUITE
