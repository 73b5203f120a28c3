// SPDX-License-Identifier: MIT
#include "fixtures.hpp"
#include "twoscale/backward.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace twoscale;
using fixtures::vec;

TEST_CASE("quadratic targets are reproduced exactly by a degree-2 fit") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    Mat s(500, 2), t(500, 1);
    for (Eigen::Index i = 0; i < 500; ++i) {
        s(i, 0) = nd(gen);
        s(i, 1) = 3.0 + 2.0 * nd(gen);
        t(i, 0) = 1.0 + 2.0 * s(i, 0) - s(i, 1) + 0.5 * s(i, 0) * s(i, 1) + 0.1 * s(i, 1) * s(i, 1);
    }
    const auto fit = fit_regression(s, t, 2, 0);
    CHECK(fit.basis_size() == 6);
    const Vec probe = vec({0.7, -1.2});
    const double expect = 1.0 + 1.4 + 1.2 - 0.42 + 0.144;
    CHECK(fit.predict(std::span<const double>(probe.data(), 2), 0) == Catch::Approx(expect).epsilon(1e-7));
    CHECK((predict_all(fit, s) - t).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("constant coordinates are dropped from the basis") {
    Mat s(100, 2), t(100, 1);
    for (Eigen::Index i = 0; i < 100; ++i) {
        s(i, 0) = double(i) / 10.0;
        s(i, 1) = 4.0;
        t(i, 0) = s(i, 0);
    }
    const auto fit = fit_regression(s, t, 2, 0);
    CHECK(fit.active.size() == 1);
    CHECK(fit.basis_size() == 3);
    CHECK(fit.describe().find(',') == std::string::npos);
}

TEST_CASE("collinear coordinates raise rank deficiency") {
    Mat s(100, 2), t = Mat::Zero(100, 1);
    for (Eigen::Index i = 0; i < 100; ++i) {
        s(i, 0) = double(i);
        s(i, 1) = 2.0 * double(i) + 1.0;
    }
    try {
        fit_regression(s, t, 1, 7);
        FAIL("expected rank deficiency");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("step 7") != std::string::npos);
    }
}

TEST_CASE("select_outputs keeps the chosen columns") {
    Mat s(50, 1), t(50, 3);
    for (Eigen::Index i = 0; i < 50; ++i) {
        s(i, 0) = double(i);
        t.row(i) << 1.0, s(i, 0), 2.0 * s(i, 0);
    }
    const auto fit = fit_regression(s, t, 1, 0).select_outputs(1, 2);
    CHECK(fit.outputs() == 2);
    const double x = 3.0;
    CHECK(fit.predict(std::span<const double>(&x, 1))[1] == Catch::Approx(6.0));
}

TEST_CASE("driverless backward induction returns the terminal mean on the same paths") {
    const auto spec = fixtures::scalar_linear_model(-1.0, 0.0, 1.0);
    const auto b = simulate_slow_paths(spec, {0.0, 1.0, 20}, 2000, 5);
    auto in = inputs_from_bundle(b, true, false, true, false);
    in.terminal.resize(b.n_paths);
    double direct = 0;
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        in.terminal[p] = b.x(p, 20)[0];
        direct += in.terminal[p];
    }
    direct /= double(b.n_paths);
    in.driver = [](std::size_t, std::size_t, std::span<const double>, std::span<const double>) { return 0.0; };
    const auto r = run_backward(in);
    CHECK(std::abs(r.y0.value - direct) < 1e-12);
    CHECK(r.y_fits.size() == 20);
    CHECK(r.gradient_fits.size() == 20);
}

TEST_CASE("gradient of a linear terminal equals the diffusion loading") {
    // Y_t = e^{-(1-t)} X_t; the one-step estimator sees e^{-(1-t_{i+1})} Cov(eta, dW)/dt
    const auto spec = fixtures::scalar_linear_model(-1.0, 0.0, 1.0);
    const auto b = simulate_slow_paths(spec, {0.0, 1.0, 20}, 20000, 6);
    auto in = inputs_from_bundle(b, true, false, true, false);
    in.terminal.resize(b.n_paths);
    for (std::size_t p = 0; p < b.n_paths; ++p) in.terminal[p] = b.x(p, 20)[0];
    in.driver = [](std::size_t, std::size_t, std::span<const double>, std::span<const double>) { return 0.0; };
    const auto r = run_backward(in);
    const double x = 0.3;
    const double z10 = r.gradient_fits[10].predict(std::span<const double>(&x, 1), 0);
    CHECK(z10 == Catch::Approx(std::exp(-0.45) * -std::expm1(-0.05) / 0.05).epsilon(0.03));
}

TEST_CASE("step process gap vanishes for cells of one step") {
    const auto spec = fixtures::scalar_linear_model(-1.0, 0.0, 1.0);
    const auto b = simulate_slow_paths(spec, {0.0, 1.0, 20}, 1000, 6);
    auto in = inputs_from_bundle(b, true, false, true, false);
    in.terminal.resize(b.n_paths);
    for (std::size_t p = 0; p < b.n_paths; ++p) in.terminal[p] = std::tanh(b.x(p, 20)[0]);
    in.driver = [](std::size_t, std::size_t, std::span<const double>, std::span<const double>) { return 0.0; };
    const auto r = run_backward(in);
    CHECK(step_process_gap(in, r, 1) == Catch::Approx(0.0).margin(1e-15));
    CHECK(step_process_gap(in, r, 10) > 0.0);
}
