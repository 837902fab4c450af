#pragma once

#include "mhm/infer.hpp"
#include "mhm/types.hpp"

#include <cstdint>
#include <string>

namespace mhm {

// Thinning sampler for the model intensities. Users run in a
// day-synchronized loop: events of day d become visible precursors on day
// d+1, matching the daily hazard grid. Deterministic given the seed.
EventLog simulate_events(const ModelSpec& spec, const ModelParams& params, int n_users, int n_items,
                         double horizon_days, std::uint64_t seed);

// Ground-truth parameter draw for recovery experiments: user rates,
// price perceptions and influence rates spread enough to rank.
ModelParams draw_recovery_params(const ModelSpec& spec, int n_users, int n_items, double horizon_days,
                                 std::uint64_t seed);

struct RecoveryResult {
    double spearman_kappa = 0.0;   // NaN when undefined
    double spearman_theta_u = 0.0;
    double spearman_alpha = 0.0;
    double spearman_beta = 0.0;
    std::size_t n_events = 0;
    ModelParams truth;
    ModelParams recovered;
};

// simulate -> fit -> rank-correlate true vs. recovered parameters.
RecoveryResult recovery_experiment(const ModelSpec& spec, int n_users, int n_items,
                                   double horizon_days, std::uint64_t seed, const FitConfig& config);

// Ground-truth parameter file emitted next to simulated CSVs.
void save_params_json(const std::string& path, const ModelSpec& spec, const ModelParams& params);
ModelParams load_params_json(const std::string& path, ModelSpec* spec_out = nullptr);

} // namespace mhm
