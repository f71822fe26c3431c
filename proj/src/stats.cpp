#include "bbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace bbm {

void MeanAccumulator::add(double x) {
    ++n_;
    double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void MeanAccumulator::merge(const MeanAccumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    double n = static_cast<double>(n_ + other.n_);
    double delta = other.mean_ - mean_;
    mean_ += delta * static_cast<double>(other.n_) / n;
    m2_ += other.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(other.n_) / n;
    n_ += other.n_;
}

double MeanAccumulator::variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double MeanAccumulator::standard_error() const {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

bool Estimate::within(double target, double k) const { return std::abs(mean - target) <= k * se; }

double Estimate::z_score(double target) const {
    if (se == 0.0) return mean == target ? 0.0 : std::copysign(INFINITY, mean - target);
    return (mean - target) / se;
}

Estimate estimate(std::span<const double> xs) {
    MeanAccumulator acc;
    for (double x : xs) acc.add(x);
    return {acc.mean(), acc.standard_error(), acc.count()};
}

double difference_z(const Estimate& a, const Estimate& b) {
    double se = std::sqrt(a.se * a.se + b.se * b.se);
    if (se == 0.0) return a.mean == b.mean ? 0.0 : std::copysign(INFINITY, a.mean - b.mean);
    return (a.mean - b.mean) / se;
}

double kolmogorov_survival(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_exponential(std::vector<double> samples, double rate) {
    if (samples.empty()) throw std::invalid_argument("KS test needs samples");
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double cdf = 1.0 - std::exp(-rate * samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    double sqrt_n = std::sqrt(n);
    // Stephens' small-sample correction.
    double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    return {d, kolmogorov_survival(lambda)};
}

ChiSquareResult chi_square_test(std::span<const std::size_t> observed,
                                std::span<const double> probabilities) {
    if (observed.size() != probabilities.size() || observed.empty())
        throw std::invalid_argument("chi-square test needs matching nonempty cells");
    double total = 0.0;
    for (std::size_t o : observed) total += static_cast<double>(o);

    std::vector<double> obs, expct;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o_acc += static_cast<double>(observed[i]);
        e_acc += probabilities[i] * total;
        if (e_acc >= 5.0) {
            obs.push_back(o_acc);
            expct.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (obs.empty()) {
            obs.push_back(o_acc);
            expct.push_back(e_acc);
        } else {
            obs.back() += o_acc;
            expct.back() += e_acc;
        }
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        double diff = obs[i] - expct[i];
        stat += diff * diff / expct[i];
    }
    std::size_t dof = obs.size() - 1;
    if (dof == 0) return {stat, 0, 1.0};
    boost::math::chi_squared dist(static_cast<double>(dof));
    return {stat, dof, boost::math::cdf(boost::math::complement(dist, stat))};
}

}  // namespace bbm
