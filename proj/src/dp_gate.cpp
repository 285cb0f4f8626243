#include "pixiu/dp_gate.hpp"

#include <cmath>
#include <memory>

namespace pixiu::dp {

NoiseSource seeded_noise(std::shared_ptr<DetRng> rng) {
    return [rng = std::move(rng)] { return rng->uniform_open(); };
}

double laplace_sample(double scale, double u) {
    if (!(scale > 0)) throw InvalidScale("laplace scale must be positive");
    if (!(u > -0.5 && u < 0.5)) throw std::invalid_argument("u must be in (-1/2, 1/2)");
    if (u == 0.0) return 0.0;
    double s = u > 0 ? 1.0 : -1.0;
    return -scale * s * std::log(1.0 - 2.0 * std::abs(u));
}

double dp_count(int64_t count, const PrivacyParams& params, const NoiseSource& noise) {
    if (params.sensitivity != 1.0)
        throw SensitivityMismatch("counting queries have sensitivity 1");
    double u = noise();
    double delta = u == 0.0 ? 0.0 : laplace_sample(params.scale(), u);
    return static_cast<double>(count) + delta;
}

double dp_sum(double clipped_sum, double clip_lo, double clip_hi, const PrivacyParams& params,
              const NoiseSource& noise) {
    if (params.sensitivity != clip_hi - clip_lo)
        throw SensitivityMismatch("declared sensitivity does not match clip bounds");
    double u = noise();
    double delta = u == 0.0 ? 0.0 : laplace_sample(params.scale(), u);
    return clipped_sum + delta;
}

void BudgetLedger::set_initial(const std::string& pod_id, double epsilon) {
    std::lock_guard lock(mu_);
    remaining_[pod_id] = epsilon;
    total_initial_ += epsilon;
}

double BudgetLedger::remaining(const std::string& pod_id) const {
    std::lock_guard lock(mu_);
    auto it = remaining_.find(pod_id);
    return it == remaining_.end() ? 0.0 : it->second;
}

std::optional<BudgetExhausted> BudgetLedger::charge(const std::vector<std::string>& pods,
                                                    double epsilon) {
    if (!(epsilon > 0)) throw std::invalid_argument("charge epsilon must be positive");
    std::lock_guard lock(mu_);
    BudgetExhausted shortfall;
    for (const auto& pod : pods) {
        auto it = remaining_.find(pod);
        double rem = it == remaining_.end() ? 0.0 : it->second;
        if (rem < epsilon) shortfall.pod_ids.push_back(pod);
    }
    if (!shortfall.pod_ids.empty()) return shortfall;
    for (const auto& pod : pods) remaining_[pod] -= epsilon;
    return std::nullopt;
}

}  // namespace pixiu::dp
