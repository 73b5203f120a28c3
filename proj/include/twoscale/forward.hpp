// SPDX-License-Identifier: MIT
//
// Time integration of the slow/fast system.
//
// Slow component: exact Ornstein-Uhlenbeck transition. The Brownian
// increment dW^1 and the stochastic-convolution increment are drawn jointly,
// so the stored dW^1 is the increment that actually drove X (needed by the
// BSDE Z-estimators and by Girsanov weights).
//
// Fast component: resolvent (semi-implicit) Euler in the linear part,
// explicit in F. Non-expansive for F = 0 at any dt/ε.
#pragma once

#include "twoscale/model.hpp"
#include "twoscale/rng.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace twoscale {

struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    std::size_t n_steps = 1;

    double dt() const { return (t1 - t0) / static_cast<double>(n_steps); }
    double time(std::size_t i) const { return t0 + dt() * static_cast<double>(i); }
    void validate() const;
};

/// Seeded ensemble of trajectories. Arrays are row-major
/// [path][step][component]; X/Q hold n_steps+1 states, dW1/dW2 n_steps increments.
struct PathBundle {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::size_t slow_dim = 0;  ///< 0 for frozen-x fast bundles
    std::size_t fast_dim = 0;  ///< 0 for slow-only bundles
    std::size_t noise1_dim = 0;
    std::size_t noise2_dim = 0;
    std::vector<double> X, Q, dW1, dW2;

    std::span<const double> x(std::size_t path, std::size_t step) const {
        return {X.data() + (path * (grid.n_steps + 1) + step) * slow_dim, slow_dim};
    }
    std::span<const double> q(std::size_t path, std::size_t step) const {
        return {Q.data() + (path * (grid.n_steps + 1) + step) * fast_dim, fast_dim};
    }
    std::span<const double> dw1(std::size_t path, std::size_t step) const {
        return {dW1.data() + (path * grid.n_steps + step) * noise1_dim, noise1_dim};
    }
    std::span<const double> dw2(std::size_t path, std::size_t step) const {
        return {dW2.data() + (path * grid.n_steps + step) * noise2_dim, noise2_dim};
    }
    Vec x_vec(std::size_t path, std::size_t step) const;
    Vec q_vec(std::size_t path, std::size_t step) const;
};

inline Eigen::Map<const Vec> as_vec(std::span<const double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
}

/// Exact transition of dX = (AX + drift) dt + R dW^1 over one step, with the
/// drift frozen over the step.
class SlowStepper {
public:
    SlowStepper(const SpectralOperator& A, const Mat& R, double dt);

    /// Draws (dW^1, stochastic-convolution increment) jointly for one step.
    void draw(const NormalStream& brownian, const NormalStream& residual, std::uint64_t step, Vec& dW,
              Vec& eta) const;
    /// e^{A dt} x + φ(A dt) drift + eta, φ(a) = (e^{a dt} − 1)/a.
    Vec advance(const Vec& x, const Vec& eta, const Vec* drift = nullptr) const;
    /// Marginal exact step from a standard normal vector (no dW^1 bookkeeping).
    Vec marginal_step(const Vec& x, const Vec& gaussian_draw) const;

    const Vec& decay() const { return decay_; }
    const Vec& phi() const { return phi_; }
    double dt() const { return dt_; }

private:
    double dt_;
    Vec decay_, phi_;
    Mat marginal_sqrt_;     ///< square root of Cov(eta)
    Mat regression_;        ///< Cov(eta, dW) / dt
    Mat conditional_sqrt_;  ///< square root of Cov(eta | dW)
};

/// Per-mode variance r²(1 − e^{2a dt})/(−2a) of the exact increment for diagonal R.
Vec slow_step_variance(const SpectralOperator& A, const Vec& r_diag, double dt);

Vec step_slow_exact(const SpectralOperator& A, const Mat& R, const Vec& x, double dt, const Vec& gaussian_draw);

/// One resolvent-Euler step of ε dQ = (BQ + F(x,Q) + extra) dt + √ε G dW^2.
Vec step_fast_semi_implicit(const ModelSpec& spec, const Vec& q, const Vec& x, double dt, double eps,
                            const Vec& gaussian_draw, const Vec* extra_drift = nullptr);
Vec step_fast_semi_implicit(const SpectralOperator& B, const FastDrift& F, const Mat& G, const Vec& q,
                            const Vec& x, double dt, double eps, const Vec& gaussian_draw,
                            const Vec* extra_drift = nullptr);

/// Optional extra fast drift, evaluated per (step, path) with the current state.
using FastDriftHook = std::function<Vec(std::size_t step, std::size_t path, const Vec& x, const Vec& q)>;

/// Throws NumericalError("fast scale unresolved") when dt > ε/10.
void require_fast_resolution(const TimeGrid& grid, double eps);

PathBundle simulate_two_scale_paths(const ModelSpec& spec, double eps, const TimeGrid& grid, std::size_t n_paths,
                                    std::uint64_t seed, const FastDriftHook& extra_fast_drift = {});

/// Slow component only; identical X to simulate_two_scale_paths with the same seed and grid.
PathBundle simulate_slow_paths(const ModelSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                               std::uint64_t seed);

struct FrozenFastOptions {
    bool stationary_start = false;  ///< draw Q̂_0 from the OU stationary law of B, G (F ignored)
    bool enforce_mixing = true;     ///< require horizon >= 10/μ
    double warmup = 0.0;            ///< rescaled time simulated and discarded before t = 0
};

/// dQ̂ = (BQ̂ + F(x,Q̂) + extra) ds + G dŴ^2 in rescaled time.
PathBundle simulate_frozen_fast(const ModelSpec& spec, const Vec& x, const Vec& q0, double horizon, double dt,
                                std::size_t n_paths, std::uint64_t seed, const FastDriftHook& extra = {},
                                const FrozenFastOptions& opts = {});

/// Coupled fast solutions driven by two slow inputs with identical noise.
/// gamma(t) and gamma_prime(t) are the slow inputs at grid times.
struct ContractionReport {
    double max_ratio = 0.0;      ///< max over paths and t of |Q_t − Q'_t| / (L_F ∫ e^{−μ(t−l)} |Γ−Γ'| dl)
    double empirical_K = 0.0;    ///< max over paths of |Q_T − Q'_T| / ∫_0^T e^{−μ(T−l)} |Γ−Γ'| dl
    bool holds = true;           ///< max_ratio <= tolerance
};
ContractionReport check_contraction(const ModelSpec& spec, const std::function<Vec(double)>& gamma,
                                    const std::function<Vec(double)>& gamma_prime, const TimeGrid& grid,
                                    double eps, std::size_t n_paths, std::uint64_t seed, double tolerance = 1.05);

/// Flat binary persistence: header (magic, dims, grid, seed) then arrays.
void write_bundle(const PathBundle& b, const std::string& path);
PathBundle read_bundle(const std::string& path);
/// Per-step ensemble mean and variance of every component.
void write_bundle_stats_csv(const PathBundle& b, std::ostream& os);

}  // namespace twoscale
