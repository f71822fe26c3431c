#include "bbm/count.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "bbm/parallel.hpp"
#include "bbm/rate.hpp"

namespace bbm {

namespace {

constexpr std::uint64_t kBridgeStream = 0xb71d9e00ull;

void require_recorded(const Forest& forest, const Tube& tube) {
    if (forest.horizon < tube.stop_time() * (1.0 - 1e-12))
        throw std::invalid_argument("forest is not recorded up to theta*T");
}

bool alive_at(const ParticleRecord& rec, double t) {
    return rec.birth <= t && (t < rec.death || (rec.censored && t <= rec.death));
}

}  // namespace

double bridge_survival(double x1, double c1, double x2, double c2, double w, double dt) {
    double y1 = x1 - c1, y2 = x2 - c2;
    if (!(std::abs(y1) < w && std::abs(y2) < w)) return 0.0;
    if (!(dt > 0.0)) return 1.0;
    // Method of images for the strip (-w, w): the killed transition density
    // is sum_k [phi(d + 2kL) - phi(2w - y1 - y2 + 2kL)], L = 2w, divided by
    // the free density phi(d). Terms decay like exp(-2 k^2 L^2 / dt).
    const double L = 2.0 * w, d = y2 - y1, e0 = 2.0 * w - y1 - y2;
    auto term = [&](double k) {
        double direct = std::exp(-2.0 * k * L * (d + k * L) / dt);
        double e = e0 + 2.0 * k * L;
        double image = std::exp(-(e * e - d * d) / (2.0 * dt));
        return direct - image;
    };
    double sum = term(0.0);
    const auto kmax = static_cast<long>(std::ceil(std::sqrt(20.0 * dt) / L)) + 2;
    for (long k = 1; k <= kmax; ++k) sum += term(static_cast<double>(k)) + term(-static_cast<double>(k));
    return std::clamp(sum, 0.0, 1.0);
}

std::vector<char> lineage_in_tube(const Forest& forest, const Tube& tube, const MembershipOptions& options) {
    require_recorded(forest, tube);
    const TimeGrid& grid = forest.grid;
    std::size_t kstop = grid.last_index_at_or_before(tube.stop_time() * (1.0 + 1e-12));
    std::size_t n = forest.records.size();
    std::vector<char> flags(n, 0);
    // Last grid sample (index, position) reached by each lineage, for bridging.
    std::vector<std::size_t> last_k(n, 0);
    std::vector<double> last_x(n, 0.0);
    std::vector<char> has_last(n, 0);

    std::optional<RngStream> bridge_rng;
    if (options.bridge_correction)
        bridge_rng.emplace(forest.stream.seed, forest.stream.replicate, kBridgeStream + forest.stream.stream);

    for (std::size_t i = 0; i < n; ++i) {
        const ParticleRecord& rec = forest.records[i];
        bool ok = rec.parent == kNoParent ? true : flags[rec.parent] != 0;
        bool have_prev = rec.parent != kNoParent && has_last[rec.parent];
        std::size_t prev_k = have_prev ? last_k[rec.parent] : 0;
        double prev_x = have_prev ? last_x[rec.parent] : 0.0;
        for (std::size_t j = 0; j < rec.grid_x.size() && ok; ++j) {
            std::size_t k = rec.grid_first + j;
            if (k > kstop) break;
            double t = grid.time(k);
            double x = rec.grid_x[j];
            if (!tube.strictly_inside(x, t)) {
                ok = false;
                break;
            }
            if (bridge_rng && have_prev && k > prev_k) {
                double tp = grid.time(prev_k);
                double surv = bridge_survival(prev_x, tube.center(tp), x, tube.center(t), tube.half_width(), t - tp);
                if (bridge_rng->uniform() >= surv) {
                    ok = false;
                    break;
                }
            }
            have_prev = true;
            prev_k = k;
            prev_x = x;
        }
        flags[i] = ok ? 1 : 0;
        has_last[i] = have_prev;
        last_k[i] = prev_k;
        last_x[i] = prev_x;
    }
    return flags;
}

std::vector<std::size_t> lineage_first_exit(const Forest& forest, const Tube& tube) {
    std::vector<std::size_t> exit(forest.records.size(), kNeverExits);
    for (std::size_t i = 0; i < forest.records.size(); ++i) {
        const ParticleRecord& rec = forest.records[i];
        std::size_t inherited = rec.parent == kNoParent ? kNeverExits : exit[rec.parent];
        if (inherited != kNeverExits) {
            exit[i] = inherited;
            continue;
        }
        for (std::size_t j = 0; j < rec.grid_x.size(); ++j) {
            std::size_t k = rec.grid_first + j;
            if (!tube.strictly_inside(rec.grid_x[j], forest.grid.time(k))) {
                exit[i] = k;
                break;
            }
        }
    }
    return exit;
}

bool in_tube(const Forest& forest, std::size_t id, const Tube& tube, const MembershipOptions& options) {
    if (id >= forest.records.size()) throw std::out_of_range("no such particle");
    return lineage_in_tube(forest, tube, options)[id] != 0;
}

std::vector<double> lineage_grid_positions(const Forest& forest, std::size_t id, std::size_t upto) {
    std::vector<std::size_t> chain;
    for (std::size_t cur = id; cur != kNoParent; cur = forest.records[cur].parent) chain.push_back(cur);
    std::vector<double> out;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        const ParticleRecord& rec = forest.records[*it];
        for (std::size_t j = 0; j < rec.grid_x.size(); ++j) {
            if (rec.grid_first + j > upto) return out;
            out.push_back(rec.grid_x[j]);
        }
    }
    return out;
}

TubeFamily::TubeFamily(std::vector<Tube> tubes) : tubes_(std::move(tubes)) {
    if (tubes_.empty()) throw std::invalid_argument("tube family is empty");
    for (const Tube& t : tubes_)
        if (t.theta != tubes_.front().theta || t.T != tubes_.front().T)
            throw std::invalid_argument("tubes in a family must share theta and T");
}

ExtendedReal growth_rate_of(std::size_t count, double T) {
    if (count == 0) return ExtendedReal::minus_infinity();
    return ExtendedReal(std::log(static_cast<double>(count)) / T);
}

CountReport count_family(const Forest& forest, const TubeFamily& family, const MembershipOptions& options) {
    double stop = family.theta() * family.T();
    std::vector<std::vector<char>> flags;
    for (const Tube& tube : family.tubes()) flags.push_back(lineage_in_tube(forest, tube, options));

    CountReport report;
    report.per_tube.assign(flags.size(), 0);
    report.capped = forest.capped;
    for (std::size_t i = 0; i < forest.records.size(); ++i) {
        if (!alive_at(forest.records[i], stop)) continue;
        bool any = false;
        for (std::size_t j = 0; j < flags.size(); ++j)
            if (flags[j][i]) {
                ++report.per_tube[j];
                any = true;
            }
        if (any) ++report.count;
    }
    report.growth_rate = growth_rate_of(report.count, family.T());
    return report;
}

CountReport count_tube(const Forest& forest, const Tube& tube, const MembershipOptions& options) {
    return count_family(forest, TubeFamily({tube}), options);
}

ExtendedReal growth_benchmark(const ModelParams& params, const TubeSpec& spec, std::size_t resolution) {
    GridPath center = std::holds_alternative<GridPath>(spec.path)
                          ? std::get<GridPath>(spec.path)
                          : GridPath::from_function([&](double s) { return eval_path(spec.path, s); }, resolution);
    return rate::sup_k_over_ball(rate::BallQuery(center, spec.epsilon, spec.theta), params.rm()).value;
}

GrowthCurve growth_curve(const ModelParams& params, const TubeSpec& spec, std::span<const double> Ts,
                         const GrowthOptions& options) {
    for (std::size_t i = 1; i < Ts.size(); ++i)
        if (!(Ts[i] > Ts[i - 1])) throw std::invalid_argument("T list must be ascending");
    GrowthCurve curve;
    curve.benchmark = growth_benchmark(params, spec, options.benchmark_resolution);
    for (std::size_t ti = 0; ti < Ts.size(); ++ti) {
        double T = Ts[ti];
        auto steps = static_cast<std::size_t>(std::max(1.0, std::round(options.steps_per_unit_time * T)));
        TimeGrid grid(T, steps);
        Tube tube(spec.path, spec.epsilon, spec.theta, T);
        std::vector<GrowthReplicate> reps(options.replicates);
        parallel_for(options.replicates, [&](std::size_t r) {
            RngStream rng(options.seed, r, ti);
            Forest forest = simulate_forest(params, grid, tube.stop_time(), rng, options.cap);
            CountReport c = count_tube(forest, tube, options.membership);
            reps[r] = {T, r, c.count, c.growth_rate, forest.capped};
        });
        GrowthRow row;
        row.T = T;
        row.replicates = options.replicates;
        MeanAccumulator acc;
        std::size_t empty = 0, used = 0;
        for (const GrowthReplicate& g : reps) {
            if (g.capped) {
                ++row.capped;
                continue;
            }
            ++used;
            if (g.growth_rate.is_minus_infinity()) ++empty;
            else acc.add(g.growth_rate.value());
        }
        if (used == 0) throw std::runtime_error("every replicate hit the population cap at T=" + std::to_string(T));
        row.growth = {acc.mean(), acc.standard_error(), acc.count()};
        row.empty_fraction = static_cast<double>(empty) / static_cast<double>(used);
        curve.rows.push_back(row);
        curve.replicates.insert(curve.replicates.end(), reps.begin(), reps.end());
    }
    return curve;
}

FnMembership f_n_diagnostic(std::span<const double> values, std::size_t N) {
    if (values.size() < 2) throw std::invalid_argument("path needs at least two samples");
    if (N < 1) throw std::invalid_argument("N must be >= 1");
    std::size_t M = values.size() - 1;  // h = 1/M
    auto nmax = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(M)) - 1e-12));
    if (N > nmax) return FnMembership::indeterminate;
    for (std::size_t n = N; n <= nmax; ++n) {
        std::size_t w = M / (n * n);  // largest index gap with gap*h <= 1/n^2
        if (w == 0) continue;
        double bound = 1.0 / std::sqrt(static_cast<double>(n));
        std::deque<std::size_t> maxq, minq;
        for (std::size_t i = 0; i <= M; ++i) {
            while (!maxq.empty() && values[maxq.back()] <= values[i]) maxq.pop_back();
            while (!minq.empty() && values[minq.back()] >= values[i]) minq.pop_back();
            maxq.push_back(i);
            minq.push_back(i);
            if (maxq.front() + w < i) maxq.pop_front();
            if (minq.front() + w < i) minq.pop_front();
            if (values[maxq.front()] - values[minq.front()] > bound) return FnMembership::inside;
        }
    }
    return FnMembership::outside;
}

}  // namespace bbm
