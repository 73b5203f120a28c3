// SPDX-License-Identifier: MIT
//
// Finite-dimensional two-scale model: diagonal generators for the slow and
// fast components, bounded Lipschitz fast nonlinearity, additive noise maps
// and either control data (from which the Hamiltonian is built) or a direct
// BSDE driver. build_model() probes every standing hypothesis and refuses to
// hand out a ModelSpec that fails one.
#pragma once

#include "twoscale/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace twoscale {

/// Diagonal operator on a truncated basis.
struct SpectralOperator {
    Vec eigenvalues;

    std::size_t dimension() const { return static_cast<std::size_t>(eigenvalues.size()); }
    Vec apply(const Vec& v) const { return eigenvalues.cwiseProduct(v); }
    /// Diagonal of e^{t·op}.
    Vec semigroup(double t) const { return (t * eigenvalues).array().exp().matrix(); }
    /// min_k (−a_k); positive iff the operator is strongly dissipative.
    double dissipativity() const { return -eigenvalues.maxCoeff(); }
};

struct NoiseMap {
    Mat matrix;
    std::optional<Mat> right_inverse;
};

using ControlPoint = Vec;
using SlowControlDrift = std::function<Vec(const Vec& x, const Vec& q, const ControlPoint& a)>;
using FastControlDrift = std::function<Vec(const ControlPoint& a)>;
using RunningCost = std::function<double(const Vec& x, const Vec& q, const ControlPoint& a)>;
using TerminalCost = std::function<double(const Vec& x)>;
using FastDrift = std::function<Vec(const Vec& x, const Vec& q)>;
using DriverFn = std::function<double(const Vec& x, const Vec& q, const Vec& z, const Vec& xi)>;

struct ControlData {
    std::vector<ControlPoint> control_grid;
    SlowControlDrift b;
    FastControlDrift rho;
    RunningCost l;
    double bound_M = 0.0;      ///< uniform bound on |b|, |l|, |rho|, |h|
    double lipschitz_L = 0.0;  ///< Lipschitz constant of b, l in (x,q) and of h in x
};

/// Constants of the driver regularity estimate
/// |ψ(x,q,z,ξ) − ψ(x',q',z',ξ')| ≤ L_x(1+|z|)|x−x'| + L_z|z−z'| + L_q(1+|z|)|q−q'| + L_ξ|ξ−ξ'|.
struct DriverConstants {
    double Lx = 0.0;
    double Lq = 0.0;
    double Lz = 0.0;
    double Lxi = 0.0;
};

struct ProbeConfig {
    std::size_t n_probes = 1000;
    std::uint64_t seed = 12345;
    double scale = 3.0;             ///< standard deviation of probe points
    double lipschitz_slack = 1e-6;  ///< ε_probe in the empirical Lipschitz checks
};

struct HypothesisCheck {
    std::string hypothesis;  ///< "A.1" ... "C.1"
    bool passed = true;
    double statistic = 0.0;  ///< worst probe value of the checked quantity
    double threshold = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;
    bool all_passed() const;
    std::string to_string() const;
};

/// Unvalidated model parameters as read from a config or assembled in code.
struct RawModel {
    SpectralOperator A;
    SpectralOperator B;
    FastDrift F;
    double F_lipschitz = 0.0;  ///< L_F
    double F_bound = 0.0;      ///< sup |F|; 0 means "not declared, only check finiteness"
    NoiseMap R;
    NoiseMap G;
    std::optional<ControlData> control;
    DriverFn driver;  ///< used when `control` is empty
    TerminalCost h;
    double h_lipschitz = 0.0;  ///< B.4 constant; 0 = not declared
    DriverConstants driver_constants;
    Vec x0;
    Vec q0;
};

/// Validated, immutable model instance.
struct ModelSpec {
    SpectralOperator A;
    SpectralOperator B;
    FastDrift F;
    double F_lipschitz = 0.0;
    NoiseMap R;  ///< right_inverse always populated
    NoiseMap G;
    std::optional<ControlData> control;
    DriverFn driver;
    TerminalCost h;
    DriverConstants driver_constants;
    double mu = 0.0;  ///< dissipativity constant of B + F
    Vec x0;
    Vec q0;
    ValidationReport report;

    std::size_t slow_dim() const { return A.dimension(); }
    std::size_t fast_dim() const { return B.dimension(); }
    const Mat& R_inverse() const { return *R.right_inverse; }

    /// ψ(x,q,z,ξ): the Hamiltonian when control data is present, otherwise
    /// the direct driver.
    double psi(const Vec& x, const Vec& q, const Vec& z, const Vec& xi) const;
};

/// Validates every standing hypothesis by randomized probing.
/// Throws ValidationError tagged with the failed hypothesis.
ModelSpec build_model(const RawModel& raw, const ProbeConfig& probes = {});

/// Largest ⟨Bq + F(x,q) − Bq' − F(x,q'), q − q'⟩ / |q − q'|² found by random
/// search; a non-negative value is a concrete counterexample to dissipativity.
struct DissipativityWitness {
    double ratio = 0.0;
    Vec x, q, q_prime;
};
DissipativityWitness search_dissipativity_witness(const SpectralOperator& B, const FastDrift& F,
                                                  std::size_t slow_dim, const ProbeConfig& probes);

/// Right inverse R^T (R R^T)^{-1}; nullopt when R R^T is singular.
std::optional<Mat> right_inverse(const Mat& R);

}  // namespace twoscale
