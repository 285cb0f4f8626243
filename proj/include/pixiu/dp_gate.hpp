#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pixiu/crypto.hpp"

namespace pixiu::dp {

struct InvalidScale : std::invalid_argument {
    explicit InvalidScale(const std::string& what) : std::invalid_argument(what) {}
};

struct SensitivityMismatch : std::invalid_argument {
    explicit SensitivityMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct PrivacyParams {
    double epsilon = 1.0;      // privacy loss per release
    double sensitivity = 1.0;  // max change from one record

    double scale() const { return sensitivity / epsilon; }
};

// Supplies u ~ Uniform(-1/2, 1/2). Injectable so tests can force zero noise or
// replay a seeded stream.
using NoiseSource = std::function<double()>;

inline NoiseSource zero_noise() {
    return [] { return 0.0; };
}

NoiseSource seeded_noise(std::shared_ptr<DetRng> rng);

// Inverse-CDF Laplace: -b * sign(u) * ln(1 - 2|u|).
double laplace_sample(double scale, double u);

double dp_count(int64_t count, const PrivacyParams& params, const NoiseSource& noise);

double dp_sum(double clipped_sum, double clip_lo, double clip_hi, const PrivacyParams& params,
              const NoiseSource& noise);

struct BudgetExhausted {
    std::vector<std::string> pod_ids;  // every POD with remaining < epsilon
};

// Per-POD epsilon budgets with atomic all-or-nothing charges. Remaining
// budgets never increase.
class BudgetLedger {
public:
    BudgetLedger() = default;

    void set_initial(const std::string& pod_id, double epsilon);

    double remaining(const std::string& pod_id) const;
    double total_initial() const { return total_initial_; }

    // Debits every listed POD by epsilon, or none of them. Returns the list of
    // short PODs on failure.
    std::optional<BudgetExhausted> charge(const std::vector<std::string>& pods, double epsilon);

private:
    mutable std::mutex mu_;
    std::map<std::string, double> remaining_;
    double total_initial_ = 0;
};

}  // namespace pixiu::dp
