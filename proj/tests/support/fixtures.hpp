// SPDX-License-Identifier: MIT
//
// Small models assembled in code, shared by unit and acceptance tests.
#pragma once

#include "twoscale/model.hpp"
#include "twoscale/model_io.hpp"

#include <string>

namespace fixtures {

using twoscale::Mat;
using twoscale::Vec;

inline std::string config_path(const std::string& name) { return std::string(TWOSCALE_CONFIG_DIR) + "/" + name; }

inline twoscale::ModelSpec load_config(const std::string& name) {
    return twoscale::load_model_file(config_path(name)).build();
}

inline Vec vec(std::initializer_list<double> v) {
    Vec out(Eigen::Index(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

/// Diagonal model with a direct driver, F = 0, R = G = I unless overridden.
inline twoscale::RawModel driver_model(const Vec& a, const Vec& b, twoscale::DriverFn driver,
                                       twoscale::TerminalCost h, const Vec& x0, const Vec& q0) {
    twoscale::RawModel raw;
    raw.A.eigenvalues = a;
    raw.B.eigenvalues = b;
    const auto n = a.size();
    raw.R.matrix = Mat::Identity(n, n);
    raw.G.matrix = Mat::Identity(n, n);
    raw.F = [n](const Vec&, const Vec&) { return Vec(Vec::Zero(n)); };
    raw.driver = std::move(driver);
    raw.h = std::move(h);
    raw.x0 = x0;
    raw.q0 = q0;
    return raw;
}

inline twoscale::TerminalCost linear_terminal(const Vec& c) {
    return [c](const Vec& x) { return c.dot(x); };
}

/// Scalar pair with driver a·z_1, terminal x_1.
inline twoscale::ModelSpec scalar_linear_model(double a_eig, double drift_a, double x0) {
    auto raw = driver_model(vec({a_eig}), vec({-1.0}),
                            [drift_a](const Vec&, const Vec&, const Vec& z, const Vec&) { return drift_a * z[0]; },
                            linear_terminal(vec({1.0})), vec({x0}), vec({0.0}));
    raw.driver_constants.Lz = std::abs(drift_a);
    return twoscale::build_model(raw);
}

}  // namespace fixtures
