// SPDX-License-Identifier: MIT
//
// Finite-horizon BSDE solvers: the ε-scaled system on (X, Q^ε) with driver
// ψ(X, Q, Z, Ξ/√ε), and the limit system on X alone with driver λ(X, Z̄).
#pragma once

#include "twoscale/ergodic.hpp"

#include <iosfwd>
#include <variant>

namespace twoscale {

struct BsdeSolution {
    double y0 = 0.0;
    double ci = 0.0;        ///< 95% Monte Carlo half-width
    double table_ci = 0.0;  ///< largest λ-table node half-width (limit solver with a table)
    std::vector<RegressionFit> y_fits, z_fits, xi_fits;
    std::vector<double> residuals;
    std::vector<double> realized0;
    double max_condition = 1.0;
    std::size_t lambda_evals = 0, lambda_clamped = 0;
    double xi_median_scaled = 0.0;  ///< median |Ξ|/√ε over sampled (path, step)
    std::size_t n_steps() const { return y_fits.size(); }
};

BsdeSolution solve_epsilon_bsde(const ModelSpec& spec, double eps, const TimeGrid& grid, std::size_t n_paths,
                                int degree, std::uint64_t seed);
/// Same solver on a prepared two-scale bundle (grid.dt <= ε/10 still enforced).
BsdeSolution solve_epsilon_bsde(const ModelSpec& spec, double eps, const PathBundle& bundle, int degree);

using LambdaFn = std::function<double(const Vec& x, const Vec& z)>;
using LambdaSource = std::variant<const EffectiveHamiltonianTable*, LambdaFn>;

/// Throws NumericalError("lambda out of range") when more than 1% of table
/// evaluations were clamped to the grid box.
BsdeSolution solve_limit_bsde(const ModelSpec& spec, const LambdaSource& lambda, const TimeGrid& grid,
                              std::size_t n_paths, int degree, std::uint64_t seed);
BsdeSolution solve_limit_bsde(const ModelSpec& spec, const LambdaSource& lambda, const PathBundle& slow_bundle,
                              int degree);

/// Y_0 of the BSDE with driver a·⟨z, d⟩ and terminal ⟨c, X_T⟩ on [t0, t1]:
/// ⟨c, e^{AT} x0⟩ + a Σ_k c_k (R d)_k (e^{a_k T} − 1)/a_k.
double linear_reference_solution(const SpectralOperator& A, const Mat& R, double a, const Vec& c, const Vec& d,
                                 const Vec& x0, double horizon = 1.0);

/// Distance of the Z process to its step version on cells of `coarsening` steps.
double limit_step_process_gap(const ModelSpec& spec, const LambdaSource& lambda, const PathBundle& slow_bundle,
                              int degree, std::size_t coarsening);

void write_solution_json(std::ostream& os, const BsdeSolution& s);
/// step, kind (y|z|xi), basis, condition, coefficients...
void write_fits_csv(std::ostream& os, const BsdeSolution& s);

}  // namespace twoscale
