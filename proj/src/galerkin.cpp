// SPDX-License-Identifier: MIT
#include "twoscale/galerkin.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <memory>
#include <sstream>

namespace twoscale {

namespace {

constexpr std::size_t kPanels = 4;
constexpr unsigned kPoints = 16;

/// Basis values at the quadrature nodes, nodes × modes, and the weighted
/// transpose used for projections.
struct Basis {
    Mat E;   ///< E(i, k) = e_{k+1}(ξ_i)
    Mat WE;  ///< diag(w) E
    Vec w;
};

Basis make_basis(std::size_t n_modes) {
    const auto& q = SpatialQuadrature::instance();
    Basis b;
    const auto nn = Eigen::Index(q.nodes.size());
    b.E.resize(nn, Eigen::Index(n_modes));
    b.w = Eigen::Map<const Vec>(q.weights.data(), nn);
    for (Eigen::Index i = 0; i < nn; ++i)
        for (Eigen::Index k = 0; k < Eigen::Index(n_modes); ++k)
            b.E(i, k) = std::sqrt(2.0) * std::sin(double(k + 1) * M_PI * q.nodes[std::size_t(i)]);
    b.WE = b.w.asDiagonal() * b.E;
    return b;
}

}  // namespace

const SpatialQuadrature& SpatialQuadrature::instance() {
    static const SpatialQuadrature rule = [] {
        using GL = boost::math::quadrature::gauss<double, kPoints>;
        SpatialQuadrature r;
        const auto& abs = GL::abscissa();
        const auto& wts = GL::weights();
        for (std::size_t p = 0; p < kPanels; ++p) {
            const double lo = double(p) / kPanels, half = 0.5 / kPanels, mid = lo + half;
            for (std::size_t k = 0; k < abs.size(); ++k) {
                // abscissae are the non-negative half of a symmetric rule
                r.nodes.push_back(mid + half * abs[k]);
                r.weights.push_back(half * wts[k]);
                if (abs[k] != 0.0) {
                    r.nodes.push_back(mid - half * abs[k]);
                    r.weights.push_back(half * wts[k]);
                }
            }
        }
        return r;
    }();
    return rule;
}

Vec sine_coefficients(const std::function<double(double)>& g, std::size_t n_modes) {
    const auto& q = SpatialQuadrature::instance();
    const Basis b = make_basis(n_modes);
    Vec vals(Eigen::Index(q.nodes.size()));
    for (std::size_t i = 0; i < q.nodes.size(); ++i) vals[Eigen::Index(i)] = g(q.nodes[i]);
    return b.WE.transpose() * vals;
}

Vec constant_profile(std::size_t n_modes) {
    Vec c{Eigen::Index(n_modes)};
    for (std::size_t k = 1; k <= n_modes; ++k)
        c[Eigen::Index(k - 1)] = std::sqrt(2.0) * (1.0 - std::pow(-1.0, double(k))) / (double(k) * M_PI);
    return c;
}

RawModel galerkin_raw(const ReactionDiffusionParams& P, std::size_t n_modes) {
    if (n_modes < 1) throw ValidationError("pre", "n_modes must be >= 1");
    if (!(P.m > 0.0)) throw ValidationError("pre", "reaction-diffusion needs m > 0");
    if (!(P.f_lipschitz < P.m)) throw ValidationError("pre", "f must be Lipschitz with constant < m");
    if (P.controls.empty()) throw ValidationError("pre", "control grid is empty");
    const auto& quad = SpatialQuadrature::instance();
    for (double xi : quad.nodes)
        if (std::abs(P.sigma(xi)) < P.c_sigma) {
            std::ostringstream os;
            os << "|sigma(" << xi << ")| = " << std::abs(P.sigma(xi)) << " < c_sigma = " << P.c_sigma;
            throw ValidationError("example", os.str());
        }

    auto basis = std::make_shared<const Basis>(make_basis(n_modes));
    const auto n = Eigen::Index(n_modes);
    const std::size_t nodes = quad.nodes.size();
    RawModel raw;
    raw.A.eigenvalues.resize(n);
    raw.B.eigenvalues.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double lap = -M_PI * M_PI * double((k + 1) * (k + 1));
        raw.A.eigenvalues[k] = lap;
        raw.B.eigenvalues[k] = lap - P.m;
    }
    Vec sig{Eigen::Index(nodes)}, rh{Eigen::Index(nodes)};
    for (std::size_t i = 0; i < nodes; ++i) {
        sig[Eigen::Index(i)] = P.sigma(quad.nodes[i]);
        rh[Eigen::Index(i)] = P.rho(quad.nodes[i]);
    }
    raw.R.matrix = basis->WE.transpose() * sig.asDiagonal() * basis->E;
    raw.G.matrix = basis->WE.transpose() * rh.asDiagonal() * basis->E;

    const auto f = P.f;
    raw.F = [basis, f](const Vec& x, const Vec& q) -> Vec {
        const Vec u = basis->E * x, v = basis->E * q;
        Vec vals(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) vals[i] = f(u[i], v[i]);
        return basis->WE.transpose() * vals;
    };
    raw.F_lipschitz = P.f_lipschitz;
    raw.F_bound = P.f_bound;

    ControlData c;
    for (double a : P.controls) c.control_grid.push_back(Vec::Constant(1, a));
    const auto bfun = P.b;
    c.b = [basis, bfun](const Vec& x, const Vec& q, const Vec& a) -> Vec {
        const Vec u = basis->E * x, v = basis->E * q;
        Vec vals(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) vals[i] = bfun(u[i], v[i], a[0]);
        return basis->WE.transpose() * vals;
    };
    const Vec profile = constant_profile(n_modes);
    const auto rfun = P.r;
    c.rho = [profile, rfun](const Vec& a) -> Vec { return rfun(a[0]) * profile; };
    const auto ell = P.ell;
    c.l = [basis, ell](const Vec& x, const Vec& q, const Vec& a) {
        const Vec u = basis->E * x, v = basis->E * q;
        double s = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) s += basis->w[i] * ell(u[i], v[i], a[0]);
        return s;
    };
    c.bound_M = P.bound_M;
    c.lipschitz_L = P.lipschitz_L;
    const auto hfun = P.h;
    raw.h = [basis, hfun](const Vec& x) {
        const Vec u = basis->E * x;
        double s = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) s += basis->w[i] * hfun(u[i]);
        return s;
    };

    const auto rinv = right_inverse(raw.R.matrix);
    if (!rinv) throw ValidationError("A.4", "R not right-invertible");
    const double rinv_norm = Eigen::JacobiSVD<Mat>(*rinv).singularValues()(0);
    double max_rho = 0.0;
    for (const auto& a : c.control_grid) max_rho = std::max(max_rho, c.rho(a).norm());
    raw.driver_constants.Lx = P.lipschitz_L * std::max(1.0, rinv_norm);
    raw.driver_constants.Lq = raw.driver_constants.Lx;
    raw.driver_constants.Lz = P.bound_M * rinv_norm;
    raw.driver_constants.Lxi = max_rho;
    raw.control = std::move(c);
    raw.x0 = sine_coefficients(P.u0, n_modes);
    raw.q0 = sine_coefficients(P.v0, n_modes);
    return raw;
}

ModelSpec galerkin_truncate(const ReactionDiffusionParams& params, std::size_t n_modes) {
    return build_model(galerkin_raw(params, n_modes), params.probes);
}

}  // namespace twoscale
