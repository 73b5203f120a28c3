// SPDX-License-Identifier: MIT
//
// Least-squares regression on a total-degree polynomial basis of
// standardized state coordinates. Normal equations with a small ridge on the
// non-intercept columns; the condition number is always recorded.
#pragma once

#include "twoscale/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace twoscale {

constexpr double kRidge = 1e-10;
constexpr double kMaxCondition = 1e9;

struct RegressionFit {
    int degree = 0;
    std::size_t state_dim = 0;
    std::vector<Eigen::Index> active;           ///< coordinates with nonzero sample variance
    Vec center, scale;                          ///< standardization of the active coordinates
    std::vector<std::vector<int>> monomials;    ///< exponents over `active`, total degree 1..degree
    Mat coef;                                   ///< (1 + monomials) × outputs, row 0 = intercept
    double condition = 1.0;                     ///< of the ridged, centered Gram matrix

    std::size_t basis_size() const { return 1 + monomials.size(); }
    std::size_t outputs() const { return static_cast<std::size_t>(coef.cols()); }
    /// Non-intercept features of one state.
    void features(const double* state, double* out) const;
    Vec predict(std::span<const double> state) const;
    double predict(std::span<const double> state, std::size_t output) const;
    /// Sub-fit on a contiguous block of outputs.
    RegressionFit select_outputs(std::size_t first, std::size_t count) const;
    std::string describe() const;
};

/// Fits targets (rows = samples) on states (rows = samples).
/// Throws NumericalError("regression rank-deficient at step <step>") when the
/// condition number exceeds kMaxCondition.
RegressionFit fit_regression(const Mat& states, const Mat& targets, int degree, std::size_t step);

/// Row-wise predictions for a whole sample.
Mat predict_all(const RegressionFit& fit, const Mat& states);

}  // namespace twoscale
