#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbm/forest.hpp"
#include "bbm/path.hpp"
#include "bbm/stats.hpp"

namespace bbm {

/// The distinguished line of descent of a Q_T simulation.
struct SpineRecord {
    std::vector<std::size_t> particles;  // spine particle per generation, root first
    std::vector<double> split_times;     // S_u for every spine particle that split
    std::vector<int> split_offspring;    // A_u at those splits (size-biased)
    std::vector<Sample> trajectory;      // spine position at every recorded grid time
    std::size_t euler_steps = 0;
    std::size_t clamp_count = 0;
    std::size_t refined_steps = 0;

    double clamp_rate() const {
        return euler_steps == 0 ? 0.0 : static_cast<double>(clamp_count) / static_cast<double>(euler_steps);
    }
};

/// A forest together with the per-particle stochastic integrals
/// I_u(t_k) = sum_{j<k} f'(t_j/T) (X_u(t_{j+1}) - X_u(t_j)) along the lineage's
/// grid samples, the first grid index at which each lineage left the tube, and
/// the lineage's bridge survival: the probability, given every recorded point
/// (grid samples, births, deaths), that the continuous path never touched the
/// tube wall. Weighting by it makes Z the conditional expectation of the
/// continuously killed martingale given the recorded data.
struct WeightedForest {
    Forest forest;
    Tube tube;
    std::optional<SpineRecord> spine;

    std::vector<std::vector<double>> integral;  // aligned with records[i].grid_x
    std::vector<std::size_t> first_exit;        // see lineage_first_exit
    // Lineage's last grid sample at or before each record's death.
    std::vector<std::size_t> last_k;
    std::vector<double> last_x;
    std::vector<double> last_integral;
    std::vector<std::vector<double>> survival;  // aligned with records[i].grid_x
    std::vector<double> death_survival;         // at each record's death point

    double growth() const { return forest.params.rm(); }
};

/// Computes integrals and tube exits for a simulated forest (P or Q).
WeightedForest weigh(Forest forest, const Tube& tube);

struct SpineOptions {
    double boundary_band = 0.05;     // refine when within this fraction of eps T of the wall
    double clamp_fraction = 1e-6;    // reflect at (1 - clamp_fraction) eps T
    double max_drift_move = 0.1;     // |drift| dt must stay below this fraction of eps T
};

class SpineIntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Simulates under Q_T up to grid.T (<= tube.T). The spine follows
/// dX = [f'(t/T) - (pi / 2 eps T) tan(pi (X - T f(t/T)) / 2 eps T)] dt + dB,
/// integrated by Euler steps of grid.dt()/grid.spine_substeps, refined near
/// the wall, branches at rate (m+1) r with size-biased offspring and continues
/// through a uniformly chosen child. Other children grow P-law sub-forests.
WeightedForest simulate_under_q(const ModelParams& params, const Tube& tube, const TimeGrid& grid,
                                RngStream& rng, std::size_t cap = kDefaultPopulationCap,
                                const SpineOptions& options = {});

/// V_T^{(u)}(t) at a recorded grid time t; 0 when u is not strictly inside the
/// tube at t. Throws std::invalid_argument if u is not alive at t.
double v_weight(const WeightedForest& wf, std::size_t u, double t);

/// Z_T(t) = sum over u in N_T(t) of V_T^{(u)}(t) S_u(t) e^{-rmt}, S_u the
/// lineage's bridge survival up to t. Mean one under P at any grid spacing.
double z_martingale(const WeightedForest& wf, double t);
double z_martingale(const Forest& forest, const Tube& tube, double t);

/// Sum over spine splits S_u <= t of (A_u - 1) W(S_u) e^{-rm S_u}, plus W(t) e^{-rmt}
/// for the spine particle at t, where W = V_T times the spine's bridge
/// survival (see spine_weight_at). Requires a Q_T forest.
double spine_decomposition_value(const WeightedForest& wf, double t);

/// V_T of the spine at a grid time or a split time (grid integral plus a
/// left-point increment to the split).
double spine_v_at(const WeightedForest& wf, double t);

/// spine_v_at times the spine lineage's bridge survival up to t.
double spine_weight_at(const WeightedForest& wf, double t);

/// |sum_k a_k (g(s_{k+1}) - g(s_k)) - int_0^t g'^2| for g(s) = T f(s/T), a_k = g'(s_k),
/// over the sample times 0 = s_0 < ... < s_K = t. This is the exact gap
/// between the discrete and continuous versions of the integration-by-parts bound.
double discretisation_slack(const Tube& tube, std::span<const double> times);

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool holds = false;
};

/// |I_u(t) - int_0^t f'(s/T)^2 ds| <= 2 eps T int_0^{t/T} |f''| + eps T |f'(0)| + slack.
/// Requires a SmoothPath tube and u inside the tube up to t.
BoundCheck integral_bound_check(const WeightedForest& wf, std::size_t u, double t);

/// Z_T(theta T) <= |N_T| exp(pi^2 theta / 8 eps^2 T - rm theta T + T E(theta) + delta T),
/// delta T = 2 eps T int_0^theta |f''| + eps T |f'(0)| + slack.
BoundCheck count_bound_check(const WeightedForest& wf);

/// Hypotheses of the spine-domination envelope and the eta they admit.
struct EnvelopeHypothesis {
    bool holds = false;
    double eta = 0.0;
    std::string reason;
};
EnvelopeHypothesis envelope_hypothesis(const Tube& tube, double growth);

/// Spine decomposition at t against
/// sum_{u<xi_T} (A_u-1) e^{pi^2/8 eps^2 T - eta S_u} + e^{pi^2/8 eps^2 T - eta t}, scaled by
/// e^{slack}.
BoundCheck envelope_check(const WeightedForest& wf, double t, double eta);

/// Sum of bridge survivals S_u(t) over lineages still inside at grid time t:
/// the expected size of the continuously monitored N_T(t) given the recorded
/// data. Its ratio to Z_T has finite variance under Q_T, unlike the raw count.
double expected_survivors(const WeightedForest& wf, double t);

/// P-expectation of a functional of the recorded forest at t <= theta T
/// estimated under Q_T as the average of F / Z_T(t) (0/0 := 0). The estimate
/// is of E_P[F; Z_T(t) > 0].
using ForestFunctional = std::function<double(const WeightedForest&)>;

struct ImportanceOptions {
    std::size_t replicates = 1000;
    std::uint64_t seed = 1;
    std::size_t cap = kDefaultPopulationCap;
    SpineOptions spine;
};

Estimate importance_estimate(const ForestFunctional& functional, const ModelParams& params, const Tube& tube,
                             const TimeGrid& grid, double t, const ImportanceOptions& options);

/// Several functionals from the same Q_T replicates; `capped` receives the
/// number of replicates dropped at the population cap.
std::vector<Estimate> importance_estimates(std::span<const ForestFunctional> functionals, const ModelParams& params,
                                           const Tube& tube, const TimeGrid& grid, double t,
                                           const ImportanceOptions& options, std::size_t* capped = nullptr);

}  // namespace bbm
