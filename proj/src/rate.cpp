#include "bbm/rate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bbm::rate {

double energy(const Path& path, double phi) { return 0.5 * integral_derivative_sq(path, phi); }

double j_value(const Path& path, double theta, double growth) {
    return growth * theta - energy(path, theta);
}

namespace {

ExtendedReal theta0_grid(const GridPath& path, double growth) {
    std::size_t n = path.resolution();
    double h = 1.0 / static_cast<double>(n);
    double level = 0.0;  // growth*phi - E(phi) at the segment start
    for (std::size_t k = 0; k < n; ++k) {
        double s = path.slope(k);
        double rate = growth - 0.5 * s * s;
        double end = level + rate * h;
        if (end < 0.0) {
            // The level is >= 0 at the start, so the root lies in [s_k, s_{k+1}).
            double root = static_cast<double>(k) * h + level / (-rate);
            return ExtendedReal(std::min(root, static_cast<double>(k + 1) * h));
        }
        level = end;
    }
    return ExtendedReal::plus_infinity();
}

ExtendedReal theta0_smooth(const SmoothPath& path, double growth) {
    auto level = [&](double phi) { return growth * phi - 0.5 * path.integral_derivative_sq(phi); };
    double d0 = path.derivative(0.0);
    if (growth - 0.5 * d0 * d0 < 0.0) return ExtendedReal(0.0);
    std::size_t scan = 64 * path.resolution();
    double prev = 0.0;
    for (std::size_t i = 1; i <= scan; ++i) {
        double phi = static_cast<double>(i) / static_cast<double>(scan);
        if (level(phi) < 0.0) {
            double lo = prev, hi = phi;
            while (hi - lo > 1e-14) {
                double mid = 0.5 * (lo + hi);
                (level(mid) < 0.0 ? hi : lo) = mid;
            }
            return ExtendedReal(hi);
        }
        prev = phi;
    }
    return ExtendedReal::plus_infinity();
}

}  // namespace

ExtendedReal theta0(const Path& path, double growth) {
    if (const auto* g = std::get_if<GridPath>(&path)) return theta0_grid(*g, growth);
    return theta0_smooth(std::get<SmoothPath>(path), growth);
}

ExtendedReal k_value(const Path& path, double theta, double growth) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::out_of_range("theta must lie in [0,1]");
    ExtendedReal ext = theta0(path, growth);
    if (ext.is_finite() && theta > ext.value()) return ExtendedReal::minus_infinity();
    return ExtendedReal(j_value(path, theta, growth));
}

RateReport rate_report(const GridPath& path, double theta, double growth) {
    RateReport report;
    Path p = path;
    report.j = j_value(p, theta, growth);
    report.k = k_value(p, theta, growth);
    report.theta0 = theta0(p, growth);
    std::size_t n = path.resolution();
    report.energy_profile.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        report.energy_profile[k] = energy(p, static_cast<double>(k) / static_cast<double>(n));
    return report;
}

BallQuery::BallQuery(GridPath g, double eps, double theta_) : center(std::move(g)), epsilon(eps), theta(theta_) {
    if (!(eps > 0.0)) throw std::invalid_argument("ball radius must be positive");
    if (!(theta_ >= 0.0 && theta_ <= 1.0)) throw std::invalid_argument("theta must lie in [0,1]");
}

// ----------------------------------------------------------------------------
// Box-constrained minimisation over knot values f_1..f_n (f_0 = 0 fixed).

namespace {

using Vec = std::vector<double>;

/// Segment weights n^2 * |[s_k, s_{k+1}] cap [0, phi]| so that
/// E(f, phi) = 1/2 sum_k w_k (f_{k+1} - f_k)^2.
Vec prefix_weights(std::size_t n, double phi) {
    Vec w(n, 0.0);
    double nn = static_cast<double>(n);
    double h = 1.0 / nn;
    for (std::size_t k = 0; k < n; ++k) {
        double overlap = std::clamp(phi - static_cast<double>(k) * h, 0.0, h);
        w[k] = nn * nn * overlap;
    }
    return w;
}

double quad_energy(const Vec& w, const Vec& f) {
    double e = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        double d = f[k + 1] - f[k];
        e += w[k] * d * d;
    }
    return 0.5 * e;
}

void add_quad_gradient(const Vec& w, const Vec& f, double scale, Vec& grad) {
    for (std::size_t k = 0; k < w.size(); ++k) {
        double d = scale * w[k] * (f[k + 1] - f[k]);
        grad[k + 1] += d;
        grad[k] -= d;
    }
}

struct Problem {
    std::size_t n;
    double theta;
    double growth;
    Vec lo, hi;          // box, index 0 pinned at 0
    std::vector<char> free_var;  // variables touched by [0, theta]
    Vec w_theta;
    std::vector<double> phis;  // constraint times in (0, theta]
    std::vector<Vec> w_phi;
};

Problem make_problem(const BallQuery& q, double growth) {
    Problem p;
    p.n = q.resolution();
    p.theta = q.theta;
    p.growth = growth;
    p.lo.resize(p.n + 1);
    p.hi.resize(p.n + 1);
    for (std::size_t k = 0; k <= p.n; ++k) {
        p.lo[k] = q.center.knot(k) - q.epsilon;
        p.hi[k] = q.center.knot(k) + q.epsilon;
    }
    p.lo[0] = p.hi[0] = 0.0;
    p.w_theta = prefix_weights(p.n, q.theta);
    p.free_var.assign(p.n + 1, 0);
    for (std::size_t k = 1; k <= p.n; ++k)
        p.free_var[k] = (p.w_theta[k - 1] > 0.0) || (k < p.n && p.w_theta[k] > 0.0);
    double nn = static_cast<double>(p.n);
    for (std::size_t j = 1; j <= p.n; ++j) {
        double phi = std::min(static_cast<double>(j) / nn, q.theta);
        if (phi <= (static_cast<double>(j) - 1.0) / nn) break;
        p.phis.push_back(phi);
        p.w_phi.push_back(prefix_weights(p.n, phi));
        if (phi >= q.theta) break;
    }
    return p;
}

Vec initial_point(const Problem& p, const BallQuery& q) {
    Vec f(p.n + 1);
    for (std::size_t k = 0; k <= p.n; ++k)
        f[k] = p.free_var[k] ? std::clamp(0.0, p.lo[k], p.hi[k]) : std::clamp(q.center.knot(k), p.lo[k], p.hi[k]);
    f[0] = 0.0;
    return f;
}

double project(const Problem& p, std::size_t k, double v) {
    return p.free_var[k] ? std::clamp(v, p.lo[k], p.hi[k]) : v;
}

double projected_gradient_norm(const Problem& p, const Vec& f, const Vec& g) {
    double worst = 0.0;
    for (std::size_t k = 1; k <= p.n; ++k) {
        if (!p.free_var[k]) continue;
        double gk = g[k];
        if (f[k] <= p.lo[k] && gk > 0.0) gk = 0.0;
        if (f[k] >= p.hi[k] && gk < 0.0) gk = 0.0;
        worst = std::max(worst, std::abs(gk));
    }
    return worst;
}

double max_violation(const Problem& p, const Vec& f) {
    double worst = -INFINITY;
    for (std::size_t j = 0; j < p.phis.size(); ++j)
        worst = std::max(worst, quad_energy(p.w_phi[j], f) - p.growth * p.phis[j]);
    return p.phis.empty() ? 0.0 : worst;
}

void count_active(const Problem& p, const Vec& f, OptimizerStatus& st) {
    st.active_lower = st.active_upper = 0;
    for (std::size_t k = 1; k <= p.n; ++k) {
        if (!p.free_var[k]) continue;
        if (f[k] <= p.lo[k]) ++st.active_lower;
        else if (f[k] >= p.hi[k]) ++st.active_upper;
    }
}

/// Solves the tridiagonal system H_FF d = -g_F on the free set F.
Vec newton_direction(const Problem& p, const Vec& f, const Vec& g) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 1; k <= p.n; ++k) {
        if (!p.free_var[k]) continue;
        if (f[k] <= p.lo[k] && g[k] >= 0.0) continue;
        if (f[k] >= p.hi[k] && g[k] <= 0.0) continue;
        idx.push_back(k);
    }
    Vec d(p.n + 1, 0.0);
    if (idx.empty()) return d;
    std::size_t m = idx.size();
    Vec diag(m), off(m, 0.0), rhs(m);  // off[i] couples i and i+1
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t k = idx[i];
        diag[i] = p.w_theta[k - 1] + (k < p.n ? p.w_theta[k] : 0.0);
        rhs[i] = -g[k];
        if (i + 1 < m && idx[i + 1] == k + 1) off[i] = -p.w_theta[k];
    }
    for (std::size_t i = 1; i < m; ++i) {
        double factor = off[i - 1] / diag[i - 1];
        diag[i] -= factor * off[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    Vec sol(m);
    sol[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) sol[i] = (rhs[i] - off[i] * sol[i + 1]) / diag[i];
    for (std::size_t i = 0; i < m; ++i) d[idx[i]] = sol[i];
    return d;
}

/// Phase 1: minimise E(f, theta) over the box. Projected gradient with an
/// exact line search, each step followed by an active-set Newton step.
Vec minimise_energy(const Problem& p, Vec f, const OptimizerOptions& opt, OptimizerStatus& st) {
    st.phase = "energy";
    double lipschitz = 0.0;
    for (std::size_t k = 1; k <= p.n; ++k)
        lipschitz = std::max(lipschitz, 2.0 * (p.w_theta[k - 1] + (k < p.n ? p.w_theta[k] : 0.0)));
    Vec g(p.n + 1), d(p.n + 1), trial(p.n + 1);
    auto gradient = [&](const Vec& x) {
        std::fill(g.begin(), g.end(), 0.0);
        add_quad_gradient(p.w_theta, x, 1.0, g);
        g[0] = 0.0;
    };
    st.converged = false;
    for (st.iterations = 0; st.iterations < opt.max_iterations; ++st.iterations) {
        gradient(f);
        st.residual = projected_gradient_norm(p, f, g);
        if (st.residual < opt.gradient_tolerance || lipschitz == 0.0) {
            st.converged = true;
            break;
        }
        // Projected gradient step, exact line search on the quadratic.
        double gd = 0.0;
        for (std::size_t k = 0; k <= p.n; ++k) {
            d[k] = k == 0 ? 0.0 : project(p, k, f[k] - g[k] / lipschitz) - f[k];
            gd += g[k] * d[k];
        }
        double dhd = 2.0 * quad_energy(p.w_theta, d);
        double alpha = dhd > 0.0 ? std::min(1.0, -gd / dhd) : 1.0;
        if (alpha > 0.0)
            for (std::size_t k = 1; k <= p.n; ++k) f[k] += alpha * d[k];

        // Newton step on the current free set with projected backtracking.
        gradient(f);
        Vec dir = newton_direction(p, f, g);
        double e0 = quad_energy(p.w_theta, f);
        for (double step = 1.0; step > 1e-12; step *= 0.5) {
            double decrease = 0.0;
            for (std::size_t k = 0; k <= p.n; ++k) {
                trial[k] = k == 0 ? 0.0 : project(p, k, f[k] + step * dir[k]);
                decrease += g[k] * (trial[k] - f[k]);
            }
            if (quad_energy(p.w_theta, trial) <= e0 + 1e-4 * decrease) {
                f.swap(trial);
                break;
            }
        }
    }
    count_active(p, f, st);
    return f;
}

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking for
/// a smooth convex objective. `done` may stop the iteration early.
template <class Objective, class Done>
Vec projected_descent(const Problem& p, Vec f, Objective&& objective, Done&& done, double tol,
                      std::size_t max_iter, OptimizerStatus& st) {
    Vec g(p.n + 1), g_prev(p.n + 1), f_prev(p.n + 1), trial(p.n + 1), g_trial(p.n + 1);
    double value = objective(f, g);
    double step = 1e-3;
    st.converged = false;
    for (std::size_t it = 0; it < max_iter; ++it, ++st.iterations) {
        st.residual = projected_gradient_norm(p, f, g);
        if (st.residual < tol || done(f)) {
            st.converged = true;
            return f;
        }
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            double decrease = 0.0;
            for (std::size_t k = 0; k <= p.n; ++k) {
                trial[k] = k == 0 ? 0.0 : project(p, k, f[k] - step * g[k]);
                decrease += g[k] * (trial[k] - f[k]);
            }
            double tv = objective(trial, g_trial);
            if (tv <= value + 1e-4 * decrease) {
                f_prev.swap(f);
                g_prev.swap(g);
                f.swap(trial);
                g.swap(g_trial);
                value = tv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        double ss = 0.0, sy = 0.0;
        for (std::size_t k = 1; k <= p.n; ++k) {
            double s = f[k] - f_prev[k];
            ss += s * s;
            sy += s * (g[k] - g_prev[k]);
        }
        step = (sy > 0.0) ? std::clamp(ss / sy, 1e-12, 1e6) : step * 2.0;
    }
    st.residual = projected_gradient_norm(p, f, g);
    st.converged = st.residual < tol || done(f);
    return f;
}

GridPath to_path(Vec f) {
    f[0] = 0.0;
    return GridPath(std::move(f));
}

}  // namespace

SchilderResult schilder_inf(const BallQuery& query, const OptimizerOptions& options) {
    Problem p = make_problem(query, 0.0);
    OptimizerStatus st;
    Vec f = minimise_energy(p, initial_point(p, query), options, st);
    SchilderResult out{quad_energy(p.w_theta, f), to_path(f), st};
    return out;
}

BallOptimum sup_k_over_ball(const BallQuery& query, double growth, const OptimizerOptions& options) {
    Problem p = make_problem(query, growth);
    OptimizerStatus st;
    Vec f = minimise_energy(p, initial_point(p, query), options, st);
    st.max_violation = max_violation(p, f);
    if (st.max_violation <= options.feasibility_tolerance) {
        double e = quad_energy(p.w_theta, f);
        return {ExtendedReal(growth * query.theta - e), to_path(f), e, st};
    }

    // Phase 2: is any path in the ball alive up to theta? Minimise the squared
    // violation sum_j max(0, E(f,phi_j) - growth*phi_j)^2.
    st.phase = "feasibility";
    auto violation_objective = [&](const Vec& x, Vec& g) {
        std::fill(g.begin(), g.end(), 0.0);
        double total = 0.0;
        for (std::size_t j = 0; j < p.phis.size(); ++j) {
            double c = quad_energy(p.w_phi[j], x) - growth * p.phis[j];
            if (c > 0.0) {
                total += 0.5 * c * c;
                add_quad_gradient(p.w_phi[j], x, c, g);
            }
        }
        g[0] = 0.0;
        return total;
    };
    auto feasible = [&](const Vec& x) { return max_violation(p, x) <= 0.5 * options.feasibility_tolerance; };
    f = projected_descent(p, f, violation_objective, feasible, 1e-14, options.max_iterations, st);
    st.max_violation = max_violation(p, f);
    if (st.max_violation > options.feasibility_tolerance) {
        count_active(p, f, st);
        return {ExtendedReal::minus_infinity(), to_path(f), quad_energy(p.w_theta, f), st};
    }

    // Phase 3: augmented Lagrangian for min E(f,theta) s.t. E(f,phi_j) <= growth*phi_j.
    st.phase = "constrained";
    Vec lambda(p.phis.size(), 0.0);
    double mu = 10.0;
    for (int outer = 0; outer < 60; ++outer) {
        auto lagrangian = [&](const Vec& x, Vec& g) {
            std::fill(g.begin(), g.end(), 0.0);
            double total = quad_energy(p.w_theta, x);
            add_quad_gradient(p.w_theta, x, 1.0, g);
            for (std::size_t j = 0; j < p.phis.size(); ++j) {
                double c = quad_energy(p.w_phi[j], x) - growth * p.phis[j];
                double shifted = std::max(0.0, lambda[j] + mu * c);
                total += (shifted * shifted - lambda[j] * lambda[j]) / (2.0 * mu);
                if (shifted > 0.0) add_quad_gradient(p.w_phi[j], x, shifted, g);
            }
            g[0] = 0.0;
            return total;
        };
        auto never = [](const Vec&) { return false; };
        f = projected_descent(p, f, lagrangian, never, options.gradient_tolerance, options.max_iterations, st);
        double viol = max_violation(p, f);
        for (std::size_t j = 0; j < p.phis.size(); ++j) {
            double c = quad_energy(p.w_phi[j], f) - growth * p.phis[j];
            lambda[j] = std::max(0.0, lambda[j] + mu * c);
        }
        if (viol <= 0.1 * options.feasibility_tolerance && st.converged) break;
        if (viol > 0.1 * options.feasibility_tolerance) mu = std::min(mu * 4.0, 1e10);
    }
    st.max_violation = max_violation(p, f);
    count_active(p, f, st);
    double e = quad_energy(p.w_theta, f);
    if (st.max_violation > options.feasibility_tolerance) st.converged = false;
    return {ExtendedReal(growth * query.theta - e), to_path(f), e, st};
}

}  // namespace bbm::rate
