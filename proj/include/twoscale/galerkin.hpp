// SPDX-License-Identifier: MIT
//
// Spectral Galerkin truncation of the controlled reaction-diffusion pair
//   u_t = u_xx + b(u, v, α) + σ(ξ) Ẇ¹,
//   ε v_t = (∂_ξξ − m) v + f(u, v) + ρ(ξ) r(α) + √ε ρ(ξ) Ẇ²,
// on (0, 1) with Dirichlet conditions, in the sine basis e_k = √2 sin(kπξ).
// Controls are spatially constant scalars from a finite grid. All spatial
// integrals use one fixed composite Gauss-Legendre rule, independent of the
// number of modes, so refining the truncation leaves the leading
// coefficients unchanged.
#pragma once

#include "twoscale/model.hpp"

#include <cmath>

namespace twoscale {

struct ReactionDiffusionParams {
    double m = 1.0;
    std::function<double(double)> sigma = [](double) { return 1.0; };
    std::function<double(double)> rho = [](double) { return 1.0; };
    double c_sigma = 0.5;
    std::function<double(double u, double v)> f = [](double, double v) { return 0.4 * std::tanh(v); };
    double f_lipschitz = 0.4;
    double f_bound = 0.4;
    std::function<double(double u, double v, double a)> b = [](double, double, double a) { return 0.3 * a; };
    std::function<double(double a)> r = [](double a) { return 0.5 * a; };
    std::function<double(double u, double v, double a)> ell = [](double, double v, double a) {
        return 0.25 * a * a + 0.5 * a * std::tanh(v);
    };
    std::function<double(double u)> h = [](double u) { return std::tanh(u); };
    std::function<double(double)> u0 = [](double xi) { return std::sin(M_PI * xi); };
    std::function<double(double)> v0 = [](double xi) { return 2.0 * std::sin(M_PI * xi); };
    std::vector<double> controls{-1.0, 1.0};
    double bound_M = 1.0;
    double lipschitz_L = 1.0;
    ProbeConfig probes;
};

/// Fixed composite Gauss-Legendre rule on (0, 1).
struct SpatialQuadrature {
    std::vector<double> nodes, weights;
    static const SpatialQuadrature& instance();
};

/// ⟨g, e_k⟩ for k = 1..n_modes.
Vec sine_coefficients(const std::function<double(double)>& g, std::size_t n_modes);

/// The truncated model before validation (throws on |σ| < c_σ at a node).
RawModel galerkin_raw(const ReactionDiffusionParams& params, std::size_t n_modes);

/// galerkin_raw followed by build_model.
ModelSpec galerkin_truncate(const ReactionDiffusionParams& params, std::size_t n_modes);

/// ⟨1, e_k⟩ = √2 (1 − (−1)^k)/(kπ): the direction along which spatially
/// constant controls act.
Vec constant_profile(std::size_t n_modes);

}  // namespace twoscale
