// SPDX-License-Identifier: MIT
#include "twoscale/driver.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace twoscale {

HamiltonianEval hamiltonian_psi(const ModelSpec& spec, const Vec& x, const Vec& q, const Vec& z, const Vec& xi) {
    if (!spec.control) throw ValidationError("pre", "hamiltonian_psi needs control data");
    const auto& c = *spec.control;
    const Mat& Rinv = spec.R_inverse();
    HamiltonianEval best;
    best.value = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.control_grid.size(); ++k) {
        const auto& a = c.control_grid[k];
        const double v = c.l(x, q, a) + z.dot(Rinv * c.b(x, q, a)) + xi.dot(c.rho(a));
        if (v < best.value) {
            second = best.value;
            best.value = v;
            best.minimizer = k;
        } else if (v < second) {
            second = v;
        }
    }
    best.gap = second - best.value;
    return best;
}

double ModelSpec::psi(const Vec& x, const Vec& q, const Vec& z, const Vec& xi) const {
    if (control) return hamiltonian_psi(*this, x, q, z, xi).value;
    return driver(x, q, z, xi);
}

namespace {

struct ProbeGen {
    std::mt19937_64 gen;
    std::normal_distribution<double> nd{0.0, 1.0};
    std::uniform_real_distribution<double> ud{0.0, 1.0};
    double scale;

    Vec point(Eigen::Index d) {
        Vec v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = scale * nd(gen);
        return v;
    }
    Vec step(Eigen::Index d) {
        Vec v = point(d);
        const double n = v.norm();
        return n > 0 ? Vec(v * (scale * std::pow(10.0, -3.0 * ud(gen)) / n)) : v;
    }
};

std::string describe(const char* what, double ratio, const Vec& x, const Vec& q, const Vec& z, const Vec& xi) {
    std::ostringstream os;
    os << what << " quotient " << ratio << " at x=" << x.transpose() << " q=" << q.transpose()
       << " z=" << z.transpose() << " xi=" << xi.transpose();
    return os.str();
}

}  // namespace

DriverCertificate certify_driver_constants(const ModelSpec& spec, std::size_t probe_budget, std::uint64_t seed,
                                           double scale) {
    if (probe_budget < 1000) throw ValidationError("pre", "driver certification needs >= 1000 probes");
    ProbeGen g{std::mt19937_64(seed), {}, {}, scale};
    const auto n = static_cast<Eigen::Index>(spec.slow_dim());
    const auto m = static_cast<Eigen::Index>(spec.fast_dim());
    const auto nz = spec.R.matrix.cols();
    const auto nxi = spec.G.matrix.cols();
    DriverCertificate cert;
    const auto& cfg = spec.driver_constants;
    std::string worst_witness[4];
    double worst_excess[4] = {0, 0, 0, 0};

    for (std::size_t i = 0; i < probe_budget; ++i) {
        const Vec x = g.point(n), q = g.point(m), z = g.point(nz), xi = g.point(nxi);
        const double base = spec.psi(x, q, z, xi);
        const Vec dx = g.step(n), dq = g.step(m), dz = g.step(nz), dxi = g.step(nxi);
        const double w = 1.0 + z.norm();
        const double qx = std::abs(spec.psi(x + dx, q, z, xi) - base) / (w * dx.norm());
        const double qq = std::abs(spec.psi(x, q + dq, z, xi) - base) / (w * dq.norm());
        const double qz = std::abs(spec.psi(x, q, z + dz, xi) - base) / dz.norm();
        const double qxi = std::abs(spec.psi(x, q, z, xi + dxi) - base) / dxi.norm();
        const double quotients[4] = {qx, qq, qz, qxi};
        const double limits[4] = {cfg.Lx, cfg.Lq, cfg.Lz, cfg.Lxi};
        const char* names[4] = {"L_x", "L_q", "L_z", "L_xi"};
        double* est[4] = {&cert.estimate.Lx, &cert.estimate.Lq, &cert.estimate.Lz, &cert.estimate.Lxi};
        for (int k = 0; k < 4; ++k) {
            *est[k] = std::max(*est[k], quotients[k]);
            const double excess = quotients[k] - limits[k] * 1.01;
            if (excess > worst_excess[k]) {
                worst_excess[k] = excess;
                worst_witness[k] = describe(names[k], quotients[k], x, q, z, xi);
            }
        }
    }
    for (int k = 0; k < 4; ++k) {
        if (worst_excess[k] > 0.0) {
            cert.ok = false;
            cert.witness = worst_witness[k];
            throw ValidationError("B.3", "violated: " + cert.witness);
        }
    }
    return cert;
}

double control_drift_envelope(const ModelSpec& spec, std::size_t probe_budget, std::uint64_t seed) {
    if (!spec.control) return 0.0;
    ProbeGen g{std::mt19937_64(seed), {}, {}, 2.0};
    double env = 0.0;
    for (std::size_t i = 0; i < probe_budget; ++i) {
        const Vec x = g.point(spec.slow_dim()), q = g.point(spec.fast_dim());
        for (const auto& a : spec.control->control_grid)
            env = std::max(env, (spec.R_inverse() * spec.control->b(x, q, a)).norm());
    }
    return env;
}

void write_hamiltonian_row(std::ostream& os, const Vec& x, const Vec& q, const Vec& z, const Vec& xi,
                           const HamiltonianEval& e) {
    auto dump = [&](const Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) os << v[i] << ',';
    };
    dump(x);
    dump(q);
    dump(z);
    dump(xi);
    os << e.value << ',' << e.minimizer << ',' << e.gap << '\n';
}

}  // namespace twoscale
