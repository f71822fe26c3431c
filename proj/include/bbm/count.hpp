#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bbm/extended.hpp"
#include "bbm/forest.hpp"
#include "bbm/path.hpp"
#include "bbm/stats.hpp"

namespace bbm {

struct MembershipOptions {
    /// Reject a lineage on each grid interval with the Brownian-bridge
    /// probability of crossing the (linearised) tube boundary. Off by default
    /// so membership is a pure function of the recorded positions.
    bool bridge_correction = false;
};

/// Probability that a Brownian bridge from x1 (centre c1) to x2 (centre c2)
/// over dt stays inside the band centre +- w, the centre interpolated linearly.
/// Exact (image series) for a straight centre; 0 if an endpoint is outside.
double bridge_survival(double x1, double c1, double x2, double c2, double w, double dt);

/// For every record: did its whole ancestral lineage stay strictly inside the
/// tube at every recorded grid time t_k <= theta T that the lineage reached?
/// Parents precede children, so one forward pass suffices.
std::vector<char> lineage_in_tube(const Forest& forest, const Tube& tube,
                                  const MembershipOptions& options = {});

inline constexpr std::size_t kNeverExits = static_cast<std::size_t>(-1);

/// For every record: the first grid index at which its lineage was not strictly
/// inside the tube (kNeverExits if none), over all recorded grid times. A
/// particle alive at grid index k is in N_T(t_k) iff first_exit > k.
std::vector<std::size_t> lineage_first_exit(const Forest& forest, const Tube& tube);

/// Membership of a single particle's lineage. Throws std::invalid_argument when
/// the forest was not recorded up to theta T.
bool in_tube(const Forest& forest, std::size_t id, const Tube& tube, const MembershipOptions& options = {});

/// Positions of the lineage of `id` at grid indices 0..last (last = the
/// particle's last grid index, or `upto` if smaller).
std::vector<double> lineage_grid_positions(const Forest& forest, std::size_t id,
                                           std::size_t upto = static_cast<std::size_t>(-1));

/// Tubes sharing theta and T; the union stands for a finite union of balls.
class TubeFamily {
public:
    explicit TubeFamily(std::vector<Tube> tubes);
    std::span<const Tube> tubes() const { return tubes_; }
    double theta() const { return tubes_.front().theta; }
    double T() const { return tubes_.front().T; }

private:
    std::vector<Tube> tubes_;
};

struct CountReport {
    std::size_t count = 0;
    ExtendedReal growth_rate;  // (1/T) log count, -inf for an empty count
    std::vector<std::size_t> per_tube;
    bool capped = false;
};

/// Particles alive at theta T whose lineage stayed in the tube.
CountReport count_tube(const Forest& forest, const Tube& tube, const MembershipOptions& options = {});
/// Union semantics: a particle counts once if any tube of the family holds it.
CountReport count_family(const Forest& forest, const TubeFamily& family,
                         const MembershipOptions& options = {});

ExtendedReal growth_rate_of(std::size_t count, double T);

/// Tube specified at the rescaled level; the physical tube is built per T.
struct TubeSpec {
    Path path;
    double epsilon;
    double theta;
};

struct GrowthRow {
    double T = 0.0;
    Estimate growth;          // over replicates with a nonempty count
    double empty_fraction = 0.0;
    std::size_t capped = 0;
    std::size_t replicates = 0;
};

struct GrowthReplicate {
    double T;
    std::size_t replicate;
    std::size_t count;
    ExtendedReal growth_rate;
    bool capped;
};

struct GrowthCurve {
    std::vector<GrowthRow> rows;
    std::vector<GrowthReplicate> replicates;
    ExtendedReal benchmark;  // sup K over the ball from the optimizer
};

struct GrowthOptions {
    std::size_t replicates = 200;
    std::uint64_t seed = 1;
    double steps_per_unit_time = 10.0;
    std::size_t cap = kDefaultPopulationCap;
    std::size_t benchmark_resolution = 64;
    MembershipOptions membership;
};

/// Simulates `replicates` forests for each T and tabulates (1/T) log |N_T|.
GrowthCurve growth_curve(const ModelParams& params, const TubeSpec& spec, std::span<const double> Ts,
                         const GrowthOptions& options);

/// The benchmark sup K over the ball around `spec.path` (knots of a GridPath
/// at `resolution`).
ExtendedReal growth_benchmark(const ModelParams& params, const TubeSpec& spec, std::size_t resolution);

enum class FnMembership { outside, inside, indeterminate };

/// Is the path (sampled on a uniform grid of [0,1]) in F_N, i.e. is there
/// n >= N and grid points u, s with |u - s| <= 1/n^2 and |f(u) - f(s)| > 1/sqrt(n)?
/// Only n <= ceil(1/sqrt(h)) are decidable at grid spacing h; if N exceeds that
/// the result is indeterminate.
FnMembership f_n_diagnostic(std::span<const double> values, std::size_t N);

}  // namespace bbm
