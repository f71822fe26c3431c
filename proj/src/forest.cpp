#include "bbm/forest.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace bbm {

namespace detail {

std::size_t first_grid_at_or_after(const TimeGrid& grid, double t) {
    std::size_t k = grid.last_index_at_or_before(t);
    if (grid.time(k) < t) ++k;
    return k;
}

void simulate_plain_life(ParticleRecord& rec, const ModelParams& params, const TimeGrid& grid,
                         double horizon, RngStream& rng) {
    double death = rec.birth + rng.exponential(params.r);
    rec.censored = death >= horizon;
    rec.death = rec.censored ? horizon : death;

    double t = rec.birth;
    double x = rec.birth_x;
    std::size_t last = grid.last_index_at_or_before(horizon);
    rec.grid_first = first_grid_at_or_after(grid, rec.birth);
    rec.grid_x.clear();
    for (std::size_t k = rec.grid_first; k <= last; ++k) {
        double tk = grid.time(k);
        if (!(tk < rec.death || (rec.censored && tk <= rec.death))) break;
        if (tk > t) {
            x += std::sqrt(tk - t) * rng.normal();
            t = tk;
        }
        rec.grid_x.push_back(x);
    }
    if (rec.death > t) x += std::sqrt(rec.death - t) * rng.normal();
    rec.death_x = x;
}

bool grow_subtree(Forest& forest, std::size_t root, RngStream& rng, std::size_t cap) {
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
        std::size_t idx = stack.back();
        stack.pop_back();
        simulate_plain_life(forest.records[idx], forest.params, forest.grid, forest.horizon, rng);
        if (forest.records[idx].censored) continue;

        int children = forest.params.offspring.sample(rng);
        if (forest.records.size() + static_cast<std::size_t>(children) > cap) return false;
        std::size_t first = forest.records.size();
        {
            ParticleRecord& parent = forest.records[idx];
            parent.offspring = children;
            parent.first_child = first;
        }
        double birth = forest.records[idx].death;
        double birth_x = forest.records[idx].death_x;
        for (int c = 0; c < children; ++c) {
            ParticleRecord child;
            child.id = forest.records.size();
            child.parent = idx;
            child.birth = birth;
            child.birth_x = birth_x;
            forest.records.push_back(std::move(child));
        }
        for (int c = children; c-- > 0;) stack.push_back(first + static_cast<std::size_t>(c));
    }
    return true;
}

}  // namespace detail

std::vector<Sample> ParticleRecord::samples(const TimeGrid& grid) const {
    std::vector<Sample> out;
    out.reserve(grid_x.size() + 2);
    out.push_back({birth, birth_x});
    for (std::size_t i = 0; i < grid_x.size(); ++i) {
        double t = grid.time(grid_first + i);
        if (t > out.back().t) out.push_back({t, grid_x[i]});
    }
    if (death > out.back().t) out.push_back({death, death_x});
    return out;
}

Forest simulate_forest(const ModelParams& params, const TimeGrid& grid, double horizon,
                       RngStream& rng, std::size_t cap) {
    if (!(horizon >= 0.0) || horizon > grid.T * (1.0 + 1e-12))
        throw std::invalid_argument("forest horizon must lie in [0, grid.T]");
    if (cap < 1) throw std::invalid_argument("population cap must be >= 1");

    Forest forest{params, grid, horizon, rng.id(), false, {}};
    ParticleRecord root;
    root.id = 0;
    forest.records.push_back(std::move(root));
    forest.capped = !detail::grow_subtree(forest, 0, rng, cap);
    return forest;
}

std::vector<std::pair<std::size_t, double>> population_at(const Forest& forest, double t) {
    std::size_t k = forest.grid.index_of(t);
    if (k > forest.last_grid_index())
        throw std::invalid_argument("time " + std::to_string(t) + " is beyond the forest horizon");
    std::vector<std::pair<std::size_t, double>> out;
    for (const ParticleRecord& rec : forest.records)
        if (rec.has_grid(k)) out.emplace_back(rec.id, rec.grid_position(k));
    return out;
}

std::vector<std::size_t> population_counts(const Forest& forest) {
    std::vector<std::size_t> counts(forest.last_grid_index() + 1, 0);
    for (const ParticleRecord& rec : forest.records)
        for (std::size_t i = 0; i < rec.grid_x.size(); ++i) ++counts[rec.grid_first + i];
    return counts;
}

void write_forest_jsonl(const Forest& forest, std::ostream& out) {
    for (const ParticleRecord& rec : forest.records) {
        nlohmann::json row;
        row["id"] = rec.id;
        row["parent"] = rec.parent == kNoParent ? nlohmann::json(nullptr) : nlohmann::json(rec.parent);
        row["birth"] = rec.birth;
        row["death"] = rec.death;
        row["offspring"] = rec.offspring;
        row["censored"] = rec.censored;
        row["spine"] = rec.spine;
        nlohmann::json pos = nlohmann::json::array();
        for (const Sample& s : rec.samples(forest.grid)) pos.push_back({s.t, s.x});
        row["positions"] = std::move(pos);
        out << row.dump() << '\n';
    }
}

}  // namespace bbm
