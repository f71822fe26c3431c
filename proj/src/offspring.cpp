#include "bbm/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbm {

OffspringLaw::OffspringLaw(const std::map<int, double>& pmf) {
    if (pmf.empty()) throw std::invalid_argument("offspring pmf is empty");
    int kmax = pmf.rbegin()->first;
    if (pmf.begin()->first < 2)
        throw std::invalid_argument("offspring support must lie in {2,3,...}, got k=" +
                                    std::to_string(pmf.begin()->first));
    probs_.assign(static_cast<std::size_t>(kmax) + 1, 0.0);
    double total = 0.0;
    for (auto [k, p] : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument("offspring probability for k=" + std::to_string(k) +
                                        " is negative or not finite");
        probs_[static_cast<std::size_t>(k)] = p;
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("offspring pmf sums to " + std::to_string(total) +
                                    ", expected 1");
    // Drop trailing zero mass so max_support() is the true support edge.
    while (probs_.size() > 3 && probs_.back() == 0.0) probs_.pop_back();
    min_k_ = 2;
    while (probs_[static_cast<std::size_t>(min_k_)] == 0.0) ++min_k_;

    cdf_.resize(probs_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
        acc += probs_[k];
        cdf_[k] = acc;
        mean_ += static_cast<double>(k) * probs_[k];
        if (probs_[k] > 0.0)
            a_log_a_ += static_cast<double>(k) * std::log(static_cast<double>(k)) * probs_[k];
    }
}

double OffspringLaw::probability(int k) const {
    if (k < 0 || k >= static_cast<int>(probs_.size())) return 0.0;
    return probs_[static_cast<std::size_t>(k)];
}

std::map<int, double> OffspringLaw::pmf() const {
    std::map<int, double> out;
    for (std::size_t k = 2; k < probs_.size(); ++k)
        if (probs_[k] > 0.0) out.emplace(static_cast<int>(k), probs_[k]);
    return out;
}

bool OffspringLaw::is_point_mass() const { return probs_[static_cast<std::size_t>(min_k_)] == 1.0; }

int OffspringLaw::sample(RngStream& rng) const {
    if (is_point_mass()) return min_k_;
    double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin() + min_k_, cdf_.end(), u);
    if (it == cdf_.end()) return max_support();
    return static_cast<int>(it - cdf_.begin());
}

OffspringLaw size_biased(const OffspringLaw& law) {
    std::map<int, double> q;
    double mean = law.mean();
    for (auto [k, p] : law.pmf()) q.emplace(k, static_cast<double>(k) * p / mean);
    // Renormalise away rounding so the invariant check sees an exact pmf.
    double total = 0.0;
    for (auto& kv : q) total += kv.second;
    for (auto& kv : q) kv.second /= total;
    return OffspringLaw(q);
}

ModelParams::ModelParams(double rate, OffspringLaw law) : r(rate), offspring(std::move(law)) {
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw std::invalid_argument("branching rate r must be positive");
}

}  // namespace bbm
