#pragma once

#include "mhm/infer.hpp"
#include "mhm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mhm {

// A fitted model together with everything needed to predict: the point
// estimate, the variational state, the identifier maps, and the training
// log the precursor histories are drawn from.
struct FittedModel {
    ModelSpec spec;
    FitConfig config;
    ModelParams params;
    VariationalState q;
    std::vector<std::pair<int, double>> trace;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    EventLog train;
};

void save_checkpoint(const std::string& path, const FittedModel& model);
FittedModel load_checkpoint(const std::string& path);

struct ReturnTimePrediction {
    int user = 0;
    int item = 0;
    int deadline = 0;
    double expected_days = 0.0;
    std::vector<double> survival_curve; // S(tau) for tau = 0..deadline
};

// Point-estimate intensity at absolute time t, with precursors from the
// training log only.
double predict_hazard(const FittedModel& model, int user, int item, double t);

// E(T) = sum_{tau=0..t_d} S(tau) on the daily grid anchored at the user's
// last training event (or an explicit anchor for teacher forcing).
ReturnTimePrediction expected_return_time(const FittedModel& model, int user, int item, int deadline,
                                          std::optional<double> anchor = std::nullopt);

// Posterior draws of a user's total spend: per draw, the user's training
// purchase count worth of Gamma(N_u, kappa_u) bids, summed.
std::vector<double> sample_spend_posterior(const FittedModel& model, int user, int n_samples,
                                           std::uint64_t seed);

} // namespace mhm
