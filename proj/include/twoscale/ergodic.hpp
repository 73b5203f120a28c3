// SPDX-License-Identifier: MIT
//
// Effective Hamiltonian λ(x, z) of the ergodic BSDE on the frozen-x fast
// equation, by vanishing discount and by plain time averaging, plus λ tables
// with regularity certificates and an ergodic-control upper bound.
#pragma once

#include "twoscale/backward.hpp"
#include "twoscale/driver.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace twoscale {

struct ErgodicConfig {
    std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};
    double horizon = 0.0;  ///< 0 selects 20/μ
    double dt = 0.02;
    std::size_t n_paths = 1000;
    int degree = 2;
    double cauchy_tol = 5e-2;
    double growth_c = 10.0;          ///< c in |v̌(q)| <= c (1+|z|)|q|
    std::size_t growth_probes = 1000;
    Vec q0;                          ///< empty = origin
    bool stationary_start = true;    ///< Q̂_0 = q0 + OU stationary draw
    double warmup = -1.0;            ///< discarded lead-in before t = 0; < 0 selects 5/μ
};

struct ErgodicSolution {
    Estimate lambda;
    RegressionFit v_fit;       ///< q ↦ Y^{δ_min}(q), evaluated through v()
    RegressionFit zeta_fit;    ///< q ↦ ζ̌(q)
    double v_offset = 0.0;     ///< Y^{δ_min}(0), subtracted by v()
    std::vector<std::pair<double, double>> discount_trace;  ///< (δ, λ_δ)
    std::vector<double> trace_ci;
    std::vector<double> residuals;  ///< per-step defects of the δ_min solve
    double v_sup = 0.0;             ///< max |v̌| over growth probes
    double growth_ratio = 0.0;      ///< max |v̌(q)| / ((1+|z|)|q|) over growth probes
    bool growth_ok = true;

    double v(const Vec& q) const;
    Vec zeta(const Vec& q) const;
};

/// Vanishing-discount solve. With terminal value 0 on [0, T] the discounted
/// value is renormalized by the truncated weight ∫_0^T e^{−δt} dt (discrete
/// sum), i.e. the horizon is closed with the self-consistent stationary value;
/// the last two schedule entries are Richardson-extrapolated path by path.
/// Throws NumericalError("no discount convergence") when the last two trace
/// entries differ by more than cauchy_tol.
ErgodicSolution solve_ergodic_bsde(const ModelSpec& spec, const Vec& x, const Vec& z, const ErgodicConfig& cfg,
                                   std::uint64_t seed);

/// (1/(T−T₀)) E ∫_{T₀}^T ψ(x, Q̂_s, z, 0) ds with T₀ = T/4.
/// Requires L_ξ = 0 and T >= 20/μ.
Estimate estimate_lambda_time_average(const ModelSpec& spec, const Vec& x, const Vec& z, double horizon, double dt,
                                      std::size_t n_paths, std::uint64_t seed, const Vec& q0 = {});

/// Feedback q ↦ control index into the control grid.
using FastFeedback = std::function<std::size_t(const Vec& q)>;

struct ErgodicControlResult {
    Estimate value;             ///< of the best policy
    std::size_t best_policy = 0;
    std::vector<Estimate> per_policy;
};

/// Minimum over the policy family of the long-run average of
/// l + z·R^{-1}b along the controlled frozen fast equation (extra drift Gρ).
ErgodicControlResult ergodic_control_cross_check(const ModelSpec& spec, const Vec& x, const Vec& z,
                                                 const std::vector<FastFeedback>& policies, double horizon,
                                                 double dt, std::size_t n_paths, std::uint64_t seed);

/// Constant policies, one per control-grid point.
std::vector<FastFeedback> constant_fast_policies(const ModelSpec& spec);

enum class LambdaMethod { TimeAverage, ErgodicBsde };

/// λ sampled on a scalar x-axis x_ref + s·x_dir and scalar z-axis t·z_dir.
/// Lookups project onto these axes, so the table represents λ exactly only
/// when λ depends on (x, z) through those projections.
class EffectiveHamiltonianTable {
public:
    std::vector<double> x_grid, z_grid;
    Vec x_ref, x_dir, z_dir;
    Mat values, ci;                    ///< x × z
    std::vector<std::vector<char>> valid;
    std::vector<std::vector<std::vector<std::pair<double, double>>>> traces;
    std::vector<std::string> node_errors;
    double L1x = 0.0, L1z = 0.0;
    bool concave_ok = true, lipschitz_ok = true;
    std::vector<std::string> certificate_failures;
    std::string method;

    Vec x_node(std::size_t i) const { return x_ref + x_grid[i] * x_dir; }
    Vec z_node(std::size_t j) const { return z_grid[j] * z_dir; }
    double x_coord(const Vec& x) const;
    double z_coord(const Vec& z) const;

    struct Lookup {
        double value = 0.0;
        bool clamped = false;
    };
    /// Bilinear interpolation, clamped to the grid box.
    Lookup lookup(const Vec& x, const Vec& z) const;
    Lookup lookup_coords(double s, double t) const;
    double max_ci() const;
    bool all_valid() const;

    /// Concavity in z (weighted midpoints of aligned triples, 3σ) and the
    /// Lipschitz estimate on all node pairs (3σ of the difference allowed).
    void certify();

    void write_csv(std::ostream& os) const;
    static EffectiveHamiltonianTable read_csv(std::istream& is);
};

struct LambdaTableConfig {
    std::vector<double> x_grid, z_grid;
    Vec x_ref, x_dir, z_dir;
    LambdaMethod method = LambdaMethod::ErgodicBsde;
    ErgodicConfig ergodic;
    double L1x = 1.0, L1z = 1.0;
    std::uint64_t seed = 2024;
};

EffectiveHamiltonianTable build_lambda_table(const ModelSpec& spec, const LambdaTableConfig& cfg);

/// Table from a known λ(x, z) (zero CI).
EffectiveHamiltonianTable tabulate_lambda(const std::function<double(const Vec& x, const Vec& z)>& lambda,
                                          const LambdaTableConfig& cfg);

}  // namespace twoscale
