// SPDX-License-Identifier: MIT
//
// Cost of feedback policies for the ε-system, in the weak formulation
// (uncontrolled paths reweighted by the Girsanov density Θ) and in the strong
// formulation (controlled paths), plus a brute-force value over finite
// policy families.
#pragma once

#include "twoscale/forward.hpp"

#include <iosfwd>

namespace twoscale {

/// (t, x, q) ↦ index into the control grid.
using FeedbackPolicy = std::function<std::size_t(double t, const Vec& x, const Vec& q)>;

struct CostEvaluation {
    Estimate weak;          ///< E[Θ (∫ l dt + h(X_1))]
    Estimate strong;        ///< E[∫ l dt + h(X_1)] on controlled paths
    Estimate density_mean;  ///< E Θ
    double max_abs_log_density = 0.0;
};

constexpr double kMaxLogDensity = 50.0;

/// log Θ = Σ θ1·ΔW1 + θ2·ΔW2 − ½(|θ1|² + |θ2|²) dt, θ1 = R^{-1}b, θ2 = ρ/√ε.
/// Throws NumericalError("density blow-up") when |log Θ| > 50 on some path.
CostEvaluation evaluate_cost(const ModelSpec& spec, double eps, const FeedbackPolicy& policy, const TimeGrid& grid,
                             std::size_t n_paths, std::uint64_t seed, bool with_strong = true);

/// Weak-formulation cost on a prepared uncontrolled two-scale bundle.
CostEvaluation evaluate_weak_cost(const ModelSpec& spec, double eps, const FeedbackPolicy& policy,
                                  const PathBundle& bundle);

/// Strong formulation only.
Estimate evaluate_strong_cost(const ModelSpec& spec, double eps, const FeedbackPolicy& policy, const TimeGrid& grid,
                              std::size_t n_paths, std::uint64_t seed);

struct BruteForceResult {
    Estimate value;        ///< weak cost of the best policy
    std::size_t best = 0;
    std::vector<Estimate> per_policy;
};

constexpr std::size_t kMaxPolicies = 4096;

/// Minimum of the weak cost over the family, all policies on one bundle.
BruteForceResult brute_force_value(const ModelSpec& spec, double eps, const std::vector<FeedbackPolicy>& family,
                                   const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed);

/// Every map from (time bin × sign bin of q[q_component]) cells to the given
/// action indices: actions^(time_bins·2) policies.
std::vector<FeedbackPolicy> binned_policy_family(std::size_t time_bins, std::size_t q_component,
                                                 const std::vector<std::size_t>& actions, double t0 = 0.0,
                                                 double t1 = 1.0);

void write_brute_force_csv(std::ostream& os, const BruteForceResult& r);

}  // namespace twoscale
