#include "bbm/spine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bbm/count.hpp"
#include "bbm/parallel.hpp"
#include "bbm/rate.hpp"

namespace bbm {

namespace {

double rescaled(const Tube& tube, double t) { return std::clamp(t / tube.T, 0.0, 1.0); }

double slope_at(const Tube& tube, double t) { return eval_derivative(tube.path, rescaled(tube, t)); }

/// int_0^t f'(s/T)^2 ds.
double drift_energy(const Tube& tube, double t) {
    return tube.T * integral_derivative_sq(tube.path, rescaled(tube, t));
}

/// V_T at (x, t) given the stochastic integral I up to t.
double v_formula(const Tube& tube, double x, double t, double integral) {
    double w = tube.half_width();
    double y = x - tube.center(t);
    if (!(std::abs(y) < w)) return 0.0;
    double growth = std::numbers::pi * std::numbers::pi * t / (8.0 * w * w);
    return std::exp(growth + integral - 0.5 * drift_energy(tube, t)) * std::cos(std::numbers::pi * y / (2.0 * w));
}

const SmoothPath& smooth_path(const Tube& tube) {
    const auto* p = std::get_if<SmoothPath>(&tube.path);
    if (!p) throw std::invalid_argument("this operation needs a SmoothPath tube");
    return *p;
}

struct EulerState {
    double t = 0.0;
    double x = 0.0;
};

class SpineIntegrator {
public:
    SpineIntegrator(const Tube& tube, double substep, const SpineOptions& opt, SpineRecord& record, RngStream& rng)
        : tube_(tube), h_(substep), opt_(opt), rec_(record), rng_(rng), w_(tube.half_width()) {}

    void advance(EulerState& s, double target) {
        const double wall = (1.0 - opt_.clamp_fraction) * w_;
        const double floor = h_ * 1e-12;
        while (s.t < target) {
            double dt = std::min(h_, target - s.t);
            double y = s.x - tube_.center(s.t);
            double dist = w_ - std::abs(y);
            bool refined = false;
            if (dist < opt_.boundary_band * w_) {
                double local = 0.25 * dist;
                dt = std::min(dt, std::max(floor, local * local));
                refined = true;
            }
            double drift = slope_at(tube_, s.t) -
                           std::numbers::pi / (2.0 * w_) * std::tan(std::numbers::pi * y / (2.0 * w_));
            if (std::abs(drift) * dt > opt_.max_drift_move * w_) {
                double wanted = opt_.max_drift_move * w_ / std::abs(drift);
                if (wanted < floor)
                    throw SpineIntegrationError("spine drift step cannot be stabilised above the refinement floor");
                dt = wanted;
                refined = true;
            }
            if (refined) ++rec_.refined_steps;
            double next_t = (target - s.t <= dt) ? target : s.t + dt;
            dt = next_t - s.t;
            s.x += drift * dt + std::sqrt(dt) * rng_.normal();
            s.t = next_t;
            ++rec_.euler_steps;

            double ny = s.x - tube_.center(s.t);
            if (std::abs(ny) > wall) {
                ++rec_.clamp_count;
                double reflected = 2.0 * wall - std::abs(ny);
                reflected = std::clamp(reflected, 0.0, wall);
                s.x = tube_.center(s.t) + std::copysign(reflected, ny);
            }
        }
    }

private:
    const Tube& tube_;
    double h_;
    const SpineOptions& opt_;
    SpineRecord& rec_;
    RngStream& rng_;
    double w_;
};

std::size_t spine_particle_at(const WeightedForest& wf, double t) {
    for (std::size_t id : wf.spine->particles) {
        const ParticleRecord& rec = wf.forest.records[id];
        if (rec.birth <= t && (t < rec.death || (rec.censored && t <= rec.death))) return id;
    }
    throw std::invalid_argument("no spine particle alive at t=" + std::to_string(t));
}

double rounding_allowance(double scale) { return 1e-9 * (1.0 + std::abs(scale)); }

}  // namespace

WeightedForest weigh(Forest forest, const Tube& tube) {
    std::size_t n = forest.records.size();
    std::vector<std::size_t> exits = lineage_first_exit(forest, tube);
    WeightedForest wf{std::move(forest), tube, std::nullopt, {}, std::move(exits), {}, {}, {}, {}, {}};
    const Forest& f = wf.forest;
    const double w = tube.half_width();
    wf.integral.resize(n);
    wf.survival.resize(n);
    wf.last_k.assign(n, 0);
    wf.last_x.assign(n, 0.0);
    wf.last_integral.assign(n, 0.0);
    wf.death_survival.assign(n, 0.0);
    std::vector<char> has_last(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const ParticleRecord& rec = f.records[i];
        bool have_prev = rec.parent != kNoParent && has_last[rec.parent];
        std::size_t prev_k = have_prev ? wf.last_k[rec.parent] : 0;
        double prev_x = have_prev ? wf.last_x[rec.parent] : 0.0;
        double integral = have_prev ? wf.last_integral[rec.parent] : 0.0;
        // Survival runs over every recorded point, starting from the birth point.
        double surv = rec.parent != kNoParent ? wf.death_survival[rec.parent] : 1.0;
        double pt = rec.birth, px = rec.birth_x;
        auto step_to = [&](double t, double x) {
            if (surv > 0.0) surv *= bridge_survival(px, tube.center(pt), x, tube.center(t), w, t - pt);
            pt = t;
            px = x;
        };
        auto& out = wf.integral[i];
        auto& sout = wf.survival[i];
        out.resize(rec.grid_x.size());
        sout.resize(rec.grid_x.size());
        for (std::size_t j = 0; j < rec.grid_x.size(); ++j) {
            std::size_t k = rec.grid_first + j;
            double x = rec.grid_x[j];
            if (have_prev && k > prev_k) integral += slope_at(tube, f.grid.time(prev_k)) * (x - prev_x);
            out[j] = integral;
            step_to(f.grid.time(k), x);
            sout[j] = surv;
            have_prev = true;
            prev_k = k;
            prev_x = x;
        }
        step_to(rec.death, rec.death_x);
        wf.death_survival[i] = surv;
        has_last[i] = have_prev;
        wf.last_k[i] = prev_k;
        wf.last_x[i] = prev_x;
        wf.last_integral[i] = integral;
    }
    return wf;
}

WeightedForest simulate_under_q(const ModelParams& params, const Tube& tube, const TimeGrid& grid, RngStream& rng,
                                std::size_t cap, const SpineOptions& options) {
    smooth_path(tube);
    if (grid.T > tube.T * (1.0 + 1e-12)) throw std::invalid_argument("spine grid runs past the tube horizon");
    if (cap < 1) throw std::invalid_argument("population cap must be >= 1");

    const double horizon = grid.T;
    Forest forest{params, grid, horizon, rng.id(), false, {}};
    forest.records.emplace_back();
    forest.records[0].spine = true;

    OffspringLaw biased = size_biased(params.offspring);
    const double spine_rate = params.offspring.mean() * params.r;
    SpineRecord spine;
    double substep = grid.steps > 0 ? grid.dt() / static_cast<double>(grid.spine_substeps) : 0.0;
    SpineIntegrator integrator(tube, std::max(substep, 1e-300), options, spine, rng);
    EulerState state;
    std::uint64_t sibling_stream = (rng.id().stream << 32) + 1;
    const std::size_t last_grid = grid.last_index_at_or_before(horizon);

    std::size_t cur = 0;
    for (;;) {
        spine.particles.push_back(cur);
        double birth = forest.records[cur].birth;
        double death = birth + rng.exponential(spine_rate);
        bool censored = death >= horizon;
        if (censored) death = horizon;
        {
            ParticleRecord& rec = forest.records[cur];
            rec.spine = true;
            rec.death = death;
            rec.censored = censored;
            rec.grid_first = detail::first_grid_at_or_after(grid, birth);
            for (std::size_t k = rec.grid_first; k <= last_grid; ++k) {
                double tk = grid.time(k);
                if (!(tk < death || (censored && tk <= death))) break;
                integrator.advance(state, tk);
                rec.grid_x.push_back(state.x);
            }
            integrator.advance(state, death);
            rec.death_x = state.x;
        }
        if (censored) break;

        int children = biased.sample(rng);
        auto chosen = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(children)));
        if (forest.records.size() + static_cast<std::size_t>(children) > cap) {
            forest.capped = true;
            break;
        }
        std::size_t first = forest.records.size();
        forest.records[cur].offspring = children;
        forest.records[cur].first_child = first;
        spine.split_times.push_back(death);
        spine.split_offspring.push_back(children);
        for (int c = 0; c < children; ++c) {
            ParticleRecord child;
            child.id = forest.records.size();
            child.parent = cur;
            child.birth = death;
            child.birth_x = state.x;
            forest.records.push_back(std::move(child));
        }
        for (int c = 0; c < children && !forest.capped; ++c) {
            if (c == chosen) continue;
            RngStream sibling_rng = rng.derive(sibling_stream++);
            if (!detail::grow_subtree(forest, first + static_cast<std::size_t>(c), sibling_rng, cap))
                forest.capped = true;
        }
        if (forest.capped) break;
        cur = first + static_cast<std::size_t>(chosen);
    }

    for (std::size_t id : spine.particles) {
        const ParticleRecord& rec = forest.records[id];
        for (std::size_t j = 0; j < rec.grid_x.size(); ++j)
            spine.trajectory.push_back({grid.time(rec.grid_first + j), rec.grid_x[j]});
    }
    WeightedForest wf = weigh(std::move(forest), tube);
    wf.spine = std::move(spine);
    return wf;
}

double v_weight(const WeightedForest& wf, std::size_t u, double t) {
    const Forest& f = wf.forest;
    if (u >= f.records.size()) throw std::out_of_range("no such particle");
    std::size_t k = f.grid.index_of(t);
    const ParticleRecord& rec = f.records[u];
    if (!rec.has_grid(k)) throw std::invalid_argument("particle is not alive at t=" + std::to_string(t));
    return v_formula(wf.tube, rec.grid_position(k), f.grid.time(k), wf.integral[u][k - rec.grid_first]);
}

double z_martingale(const WeightedForest& wf, double t) {
    const Forest& f = wf.forest;
    std::size_t k = f.grid.index_of(t);
    if (k > f.last_grid_index()) throw std::invalid_argument("time is beyond the forest horizon");
    double tk = f.grid.time(k);
    double total = 0.0;
    for (std::size_t i = 0; i < f.records.size(); ++i) {
        const ParticleRecord& rec = f.records[i];
        if (!rec.has_grid(k) || wf.first_exit[i] <= k) continue;
        std::size_t j = k - rec.grid_first;
        total += v_formula(wf.tube, rec.grid_position(k), tk, wf.integral[i][j]) * wf.survival[i][j];
    }
    return total * std::exp(-wf.growth() * tk);
}

double expected_survivors(const WeightedForest& wf, double t) {
    const Forest& f = wf.forest;
    std::size_t k = f.grid.index_of(t);
    if (k > f.last_grid_index()) throw std::invalid_argument("time is beyond the forest horizon");
    double total = 0.0;
    for (std::size_t i = 0; i < f.records.size(); ++i) {
        const ParticleRecord& rec = f.records[i];
        if (rec.has_grid(k) && wf.first_exit[i] > k) total += wf.survival[i][k - rec.grid_first];
    }
    return total;
}

double z_martingale(const Forest& forest, const Tube& tube, double t) { return z_martingale(weigh(forest, tube), t); }

double spine_v_at(const WeightedForest& wf, double t) {
    if (!wf.spine) throw std::invalid_argument("forest has no spine");
    const Forest& f = wf.forest;
    // Split times: use the dying spine particle's death sample.
    for (std::size_t i = 0; i < wf.spine->split_times.size(); ++i) {
        if (wf.spine->split_times[i] != t) continue;
        std::size_t u = wf.spine->particles[i];
        const ParticleRecord& rec = f.records[u];
        double tl = f.grid.time(wf.last_k[u]);
        double integral = wf.last_integral[u] + slope_at(wf.tube, tl) * (rec.death_x - wf.last_x[u]);
        return v_formula(wf.tube, rec.death_x, t, integral);
    }
    std::size_t u = spine_particle_at(wf, t);
    return v_weight(wf, u, t);
}

double spine_weight_at(const WeightedForest& wf, double t) {
    if (!wf.spine) throw std::invalid_argument("forest has no spine");
    const Forest& f = wf.forest;
    for (std::size_t i = 0; i < wf.spine->split_times.size(); ++i)
        if (wf.spine->split_times[i] == t) return spine_v_at(wf, t) * wf.death_survival[wf.spine->particles[i]];
    std::size_t u = spine_particle_at(wf, t);
    const ParticleRecord& rec = f.records[u];
    return spine_v_at(wf, t) * wf.survival[u][f.grid.index_of(t) - rec.grid_first];
}

double spine_decomposition_value(const WeightedForest& wf, double t) {
    if (!wf.spine) throw std::invalid_argument("spine decomposition needs a Q_T forest");
    double growth = wf.growth();
    double total = 0.0;
    for (std::size_t i = 0; i < wf.spine->split_times.size(); ++i) {
        double s = wf.spine->split_times[i];
        if (s > t) break;
        total += static_cast<double>(wf.spine->split_offspring[i] - 1) * spine_weight_at(wf, s) * std::exp(-growth * s);
    }
    std::size_t k = wf.forest.grid.index_of(t);
    double tk = wf.forest.grid.time(k);
    return total + spine_weight_at(wf, tk) * std::exp(-growth * tk);
}

double discretisation_slack(const Tube& tube, std::span<const double> times) {
    if (times.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
        sum += slope_at(tube, times[k]) * (tube.center(times[k + 1]) - tube.center(times[k]));
    return std::abs(sum - drift_energy(tube, times.back()));
}

namespace {

std::vector<double> grid_times_upto(const TimeGrid& grid, std::size_t k) {
    std::vector<double> times(k + 1);
    for (std::size_t j = 0; j <= k; ++j) times[j] = grid.time(j);
    return times;
}

double bound_rhs(const Tube& tube, double t) {
    const SmoothPath& p = smooth_path(tube);
    double w = tube.half_width();
    return 2.0 * w * p.integral_abs_second_derivative(rescaled(tube, t)) + w * std::abs(p.derivative(0.0));
}

}  // namespace

BoundCheck integral_bound_check(const WeightedForest& wf, std::size_t u, double t) {
    const Forest& f = wf.forest;
    if (u >= f.records.size()) throw std::out_of_range("no such particle");
    std::size_t k = f.grid.index_of(t);
    const ParticleRecord& rec = f.records[u];
    if (!rec.has_grid(k)) throw std::invalid_argument("particle is not alive at t");
    if (wf.first_exit[u] <= k) throw std::invalid_argument("particle left the tube before t");
    double tk = f.grid.time(k);
    BoundCheck out;
    double energy = drift_energy(wf.tube, tk);
    out.lhs = std::abs(wf.integral[u][k - rec.grid_first] - energy);
    out.rhs = bound_rhs(wf.tube, tk);
    std::vector<double> times = grid_times_upto(f.grid, k);
    out.slack = discretisation_slack(wf.tube, times) + rounding_allowance(out.rhs + energy);
    out.holds = out.lhs <= out.rhs + out.slack;
    return out;
}

BoundCheck count_bound_check(const WeightedForest& wf) {
    const Forest& f = wf.forest;
    const Tube& tube = wf.tube;
    const SmoothPath& p = smooth_path(tube);
    double t = tube.stop_time();
    std::size_t k = f.grid.index_of(t);
    double tk = f.grid.time(k);
    std::size_t count = 0;
    for (std::size_t i = 0; i < f.records.size(); ++i)
        if (f.records[i].has_grid(k) && wf.first_exit[i] > k) ++count;

    BoundCheck out;
    out.lhs = z_martingale(wf, tk);
    std::vector<double> times = grid_times_upto(f.grid, k);
    out.slack = discretisation_slack(tube, times);
    double eps = tube.epsilon, T = tube.T, theta = tube.theta;
    double delta_T = 2.0 * eps * T * p.integral_abs_second_derivative(theta) + eps * T * std::abs(p.derivative(0.0)) +
                     out.slack;
    double exponent = std::numbers::pi * std::numbers::pi * theta / (8.0 * eps * eps * T) - wf.growth() * theta * T +
                      0.5 * T * p.integral_derivative_sq(theta) + delta_T;
    out.rhs = static_cast<double>(count) * std::exp(exponent);
    out.holds = out.lhs <= out.rhs * (1.0 + 1e-9);
    return out;
}

EnvelopeHypothesis envelope_hypothesis(const Tube& tube, double growth) {
    EnvelopeHypothesis h;
    const auto* p = std::get_if<SmoothPath>(&tube.path);
    if (!p) {
        h.reason = "path is not C^2";
        return h;
    }
    if (std::abs(p->derivative(0.0)) > 1e-12) {
        h.reason = "f'(0) != 0";
        return h;
    }
    const std::size_t scan = 4096;
    double inf_ratio = growth;
    for (std::size_t i = 1; i <= scan; ++i) {
        double phi = tube.theta * static_cast<double>(i) / static_cast<double>(scan);
        if (phi <= 0.0) break;
        inf_ratio = std::min(inf_ratio, growth - 0.5 * p->integral_derivative_sq(phi) / phi);
    }
    if (!(inf_ratio > 0.0)) {
        h.reason = "r m phi <= E(f, phi) for some phi in (0, theta]";
        return h;
    }
    // Any eta with 2 eta phi <= r m phi - E(f, phi) works; back off from the scanned infimum.
    h.eta = 0.5 * 0.99 * inf_ratio;
    for (std::size_t i = 1; i <= scan; ++i) {
        double phi = tube.theta * static_cast<double>(i) / static_cast<double>(scan);
        if (phi <= 0.0) break;
        if (2.0 * tube.epsilon * p->integral_abs_second_derivative(phi) > h.eta * phi) {
            h.reason = "epsilon too large: 2 eps int|f''| > eta phi";
            return h;
        }
    }
    h.holds = true;
    return h;
}

BoundCheck envelope_check(const WeightedForest& wf, double t, double eta) {
    if (!wf.spine) throw std::invalid_argument("envelope check needs a Q_T forest");
    const Forest& f = wf.forest;
    const Tube& tube = wf.tube;
    double eps = tube.epsilon, T = tube.T;
    double base = std::numbers::pi * std::numbers::pi / (8.0 * eps * eps * T);
    std::size_t k = f.grid.index_of(t);
    double tk = f.grid.time(k);

    BoundCheck out;
    out.lhs = spine_decomposition_value(wf, tk);
    double rhs = std::exp(base - eta * tk);
    std::vector<double> times = grid_times_upto(f.grid, k);
    double slack = discretisation_slack(tube, times);
    for (std::size_t i = 0; i < wf.spine->split_times.size(); ++i) {
        double s = wf.spine->split_times[i];
        rhs += static_cast<double>(wf.spine->split_offspring[i] - 1) * std::exp(base - eta * s);
        if (s <= tk) {
            std::vector<double> st = grid_times_upto(f.grid, f.grid.last_index_at_or_before(s));
            if (st.back() < s) st.push_back(s);
            slack = std::max(slack, discretisation_slack(tube, st));
        }
    }
    out.slack = slack;
    out.rhs = rhs;
    out.holds = out.lhs <= rhs * std::exp(slack) * (1.0 + 1e-9);
    return out;
}

std::vector<Estimate> importance_estimates(std::span<const ForestFunctional> functionals, const ModelParams& params,
                                           const Tube& tube, const TimeGrid& grid, double t,
                                           const ImportanceOptions& options, std::size_t* capped) {
    if (t > tube.stop_time() * (1.0 + 1e-12)) throw std::invalid_argument("functional time must be <= theta T");
    const std::size_t nf = functionals.size();
    std::vector<double> values(options.replicates * nf, 0.0);
    std::vector<char> used(options.replicates, 0);
    std::vector<char> positive(options.replicates, 0);
    parallel_for(options.replicates, [&](std::size_t r) {
        RngStream rng(options.seed, r, 0);
        WeightedForest wf = simulate_under_q(params, tube, grid, rng, options.cap, options.spine);
        if (wf.forest.capped) return;
        used[r] = 1;
        double z = z_martingale(wf, t);
        if (z > 0.0) positive[r] = 1;
        for (std::size_t j = 0; j < nf; ++j) {
            double value = functionals[j](wf);
            if (z > 0.0) values[r * nf + j] = value / z;
            else if (value != 0.0) throw std::runtime_error("functional is nonzero on a replicate with Z_T = 0");
        }
    });
    bool any_positive = false;
    std::size_t dropped = 0;
    std::vector<MeanAccumulator> acc(nf);
    for (std::size_t r = 0; r < options.replicates; ++r) {
        if (!used[r]) {
            ++dropped;
            continue;
        }
        any_positive = any_positive || positive[r];
        for (std::size_t j = 0; j < nf; ++j) acc[j].add(values[r * nf + j]);
    }
    if (capped) *capped = dropped;
    if (!any_positive) throw std::runtime_error("every Q_T replicate has Z_T = 0; the spine integrator is broken");
    std::vector<Estimate> out;
    for (const MeanAccumulator& a : acc) out.push_back({a.mean(), a.standard_error(), a.count()});
    return out;
}

Estimate importance_estimate(const ForestFunctional& functional, const ModelParams& params, const Tube& tube,
                             const TimeGrid& grid, double t, const ImportanceOptions& options) {
    return importance_estimates(std::span(&functional, 1), params, tube, grid, t, options).front();
}

}  // namespace bbm
