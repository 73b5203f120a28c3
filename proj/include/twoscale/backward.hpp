// SPDX-License-Identifier: MIT
//
// Backward least-squares Monte Carlo induction shared by the ergodic, the
// ε-scaled and the limit solvers.
//
// At step i, with Ŷ_{i+1} the fitted value at the next state:
//   gradient  Ẑ_i ≈ E_i[(Ŷ_{i+1} − E_i Ŷ_{i+1}) ΔW_i] / dt      (regression)
//   driver    ψ_i = driver(i, path, state_i, Ẑ_i)
//   target    S_i = e^{−δ dt} S_{i+1} + ψ_i dt                  (realized, S_N = terminal)
//   value     Ŷ_i ≈ E_i[S_i]                                      (regression)
// y0 is the path average of S_0 with its 95% half-width.
#pragma once

#include "twoscale/forward.hpp"
#include "twoscale/regression.hpp"

#include <span>
#include <vector>

namespace twoscale {

using BackwardDriver =
    std::function<double(std::size_t step, std::size_t path, std::span<const double> state,
                         std::span<const double> gradient)>;
using SampleAccessor = std::function<void(std::size_t path, std::size_t step, double* out)>;

struct BackwardInputs {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    double dt = 0.0;
    std::size_t state_dim = 0;
    std::size_t noise_dim = 0;
    SampleAccessor state;  ///< steps 0..n_steps
    SampleAccessor noise;  ///< increments 0..n_steps−1, concatenated channels
    std::vector<double> terminal;
    double discount = 0.0;
    int degree = 2;
    BackwardDriver driver;
};

/// State = selected blocks of (X, Q); noise = selected blocks of (dW1, dW2).
BackwardInputs inputs_from_bundle(const PathBundle& b, bool use_x, bool use_q, bool use_dw1, bool use_dw2);

struct BackwardResult {
    Estimate y0;
    std::vector<double> realized0;            ///< S_0 per path
    std::vector<RegressionFit> y_fits;        ///< steps 0..n_steps−1
    std::vector<RegressionFit> gradient_fits; ///< steps 0..n_steps−1, one output per noise component
    std::vector<double> residuals;            ///< martingale-orthogonality defect per step
    double max_condition = 1.0;
};

BackwardResult run_backward(const BackwardInputs& in);

/// E Σ_i |Ẑ_i(S_i) − Ẑ_{c(i)}(S_{c(i)})|² dt with c(i) the left end of the
/// coarse cell of width `coarsening` steps: distance of the gradient process
/// to its piecewise-constant step version.
double step_process_gap(const BackwardInputs& in, const BackwardResult& r, std::size_t coarsening);

}  // namespace twoscale
