#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

#include "bbm/offspring.hpp"
#include "bbm/path.hpp"
#include "bbm/rng.hpp"

namespace bbm {

inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kDefaultPopulationCap = 5'000'000;

struct Sample {
    double t;
    double x;
};

/// One particle: life [birth, death), positions at its birth, at every grid
/// time inside its life, and at its death (or the horizon when censored).
struct ParticleRecord {
    std::size_t id = 0;
    std::size_t parent = kNoParent;
    double birth = 0.0;
    double death = 0.0;
    int offspring = 0;        // 0 while alive at the horizon
    bool censored = false;
    bool spine = false;
    double birth_x = 0.0;
    double death_x = 0.0;
    std::size_t first_child = 0;  // children are contiguous ids [first_child, first_child + offspring)

    std::size_t grid_first = 0;   // grid index of grid_x[0]
    std::vector<double> grid_x;

    bool has_grid(std::size_t k) const { return k >= grid_first && k < grid_first + grid_x.size(); }
    std::size_t grid_last() const { return grid_first + grid_x.size() - 1; }
    double grid_position(std::size_t k) const { return grid_x[k - grid_first]; }

    /// Sorted union of birth, in-life grid times and death (duplicates merged).
    std::vector<Sample> samples(const TimeGrid& grid) const;
};

/// Genealogy rooted at a single particle started at (0, 0). Parents always
/// precede their children in `records`.
struct Forest {
    ModelParams params;
    TimeGrid grid;
    double horizon = 0.0;
    StreamId stream;
    bool capped = false;
    std::vector<ParticleRecord> records;

    /// Grid indices 0..last_grid_index() are recorded.
    std::size_t last_grid_index() const { return grid.last_index_at_or_before(horizon); }
    std::size_t root_count() const { return records.empty() ? 0 : 1; }
};

/// Exact event-driven simulation of branching Brownian motion up to `horizon`.
/// Stops early and sets `capped` when more than `cap` records are created.
Forest simulate_forest(const ModelParams& params, const TimeGrid& grid, double horizon,
                       RngStream& rng, std::size_t cap = kDefaultPopulationCap);

/// Particles alive at recorded time t: (id, position). Throws
/// std::invalid_argument if t is not a recorded grid time <= horizon.
std::vector<std::pair<std::size_t, double>> population_at(const Forest& forest, double t);

/// |N(t_k)| for every recorded grid index k.
std::vector<std::size_t> population_counts(const Forest& forest);

/// One JSON object per particle: id, parent, birth, death, offspring, censored,
/// spine, positions as [[t, x], ...].
void write_forest_jsonl(const Forest& forest, std::ostream& out);

namespace detail {

/// Simulates the Brownian life of `rec` (birth fields already set) under the
/// natural law: Exp(r) lifetime, exact Gaussian increments.
void simulate_plain_life(ParticleRecord& rec, const ModelParams& params, const TimeGrid& grid,
                         double horizon, RngStream& rng);

/// Grows the P-law subtree below records[root] (root's birth fields set)
/// depth-first. Returns false if the cap was hit.
bool grow_subtree(Forest& forest, std::size_t root, RngStream& rng, std::size_t cap);

/// First grid index with t_k >= t.
std::size_t first_grid_at_or_after(const TimeGrid& grid, double t);

}  // namespace detail

}  // namespace bbm
