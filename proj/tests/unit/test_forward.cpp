// SPDX-License-Identifier: MIT
#include "fixtures.hpp"
#include "twoscale/forward.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <random>

using namespace twoscale;
using fixtures::vec;

namespace {

ModelSpec ou_pair(double a, double b, double g = 1.0, Vec x0 = vec({0.0}), Vec q0 = vec({0.0})) {
    auto raw = fixtures::driver_model(vec({a}), vec({b}), [](const Vec&, const Vec&, const Vec&, const Vec&) { return 0.0; },
                                      fixtures::linear_terminal(vec({1.0})), x0, q0);
    raw.G.matrix *= g;
    return build_model(raw);
}

double sample_var(const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= double(v.size());
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

}  // namespace

TEST_CASE("flat generator gives a Brownian step") {
    SpectralOperator A{vec({0.0, 0.0})};
    const Vec x = vec({1.0, -2.0}), g = vec({0.3, -1.1});
    const Vec y = step_slow_exact(A, Mat::Identity(2, 2), x, 0.04, g);
    CHECK((y - (x + 0.2 * g)).norm() < 1e-14);
}

TEST_CASE("zero draw decays deterministically") {
    SpectralOperator A{vec({-1.0})};
    const Vec y = step_slow_exact(A, Mat::Identity(1, 1), vec({2.0}), 0.1, vec({0.0}));
    CHECK(y[0] == Catch::Approx(2.0 * std::exp(-0.1)).epsilon(1e-15));
}

TEST_CASE("exact slow step has the OU variance") {
    SpectralOperator A{vec({-1.0})};
    const double dt = 0.3;
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    std::vector<double> s(100000);
    for (auto& v : s) v = step_slow_exact(A, Mat::Identity(1, 1), vec({0.0}), dt, vec({nd(gen)}))[0];
    const double target = (1.0 - std::exp(-2.0 * dt)) / 2.0;
    const double se = target * std::sqrt(2.0 / double(s.size()));
    CHECK(std::abs(sample_var(s) - target) < 3.0 * se);
    CHECK(slow_step_variance(A, vec({1.0}), dt)[0] == Catch::Approx(target));
}

TEST_CASE("joint slow draw reproduces Cov(eta, dW)") {
    // Cov(eta, dW) = R phi(a) with phi(a) = (e^{a dt} - 1)/a
    SpectralOperator A{vec({-2.0})};
    const double dt = 0.2;
    SlowStepper st(A, Mat::Identity(1, 1), dt);
    double c = 0, vw = 0;
    const std::size_t n = 200000;
    for (std::size_t p = 0; p < n; ++p) {
        Vec dW, eta;
        st.draw(NormalStream(3, p, Channel::SlowBrownian), NormalStream(3, p, Channel::SlowResidual), 0, dW, eta);
        c += eta[0] * dW[0];
        vw += dW[0] * dW[0];
    }
    const double phi = std::expm1(-2.0 * dt) / -2.0;
    CHECK(c / n == Catch::Approx(phi).epsilon(0.02));
    CHECK(vw / n == Catch::Approx(dt).epsilon(0.02));
}

TEST_CASE("noiseless fast step is the scalar resolvent") {
    SpectralOperator B{vec({-3.0})};
    FastDrift F = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
    const Vec q = step_fast_semi_implicit(B, F, Mat::Zero(1, 1), vec({2.0}), vec({0.0}), 0.01, 0.1, vec({0.7}));
    CHECK(q[0] == Catch::Approx(2.0 / (1.0 + 3.0 * 0.1)).epsilon(1e-15));
}

TEST_CASE("fast step contracts differences by the resolvent factor") {
    SpectralOperator B{vec({-2.0})};
    FastDrift F = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
    const Vec g = vec({0.4});
    const Vec a = step_fast_semi_implicit(B, F, Mat::Identity(1, 1), vec({1.5}), vec({0.0}), 0.01, 0.05, g);
    const Vec b = step_fast_semi_implicit(B, F, Mat::Identity(1, 1), vec({-0.5}), vec({0.0}), 0.01, 0.05, g);
    CHECK(std::abs(a[0] - b[0]) == Catch::Approx(2.0 / (1.0 + 2.0 * 0.2)).epsilon(1e-14));
}

TEST_CASE("semi-implicit and explicit Euler differ at second order") {
    SpectralOperator B{vec({-2.0})};
    FastDrift F = [](const Vec&, const Vec& q) { return Vec(Vec::Constant(1, 0.5 * std::tanh(q[0]))); };
    auto diff = [&](double h) {
        const double q0 = 1.3;
        const Vec imp = step_fast_semi_implicit(B, F, Mat::Identity(1, 1), vec({q0}), vec({0.0}), h, 1.0, vec({0.0}));
        const double expl = q0 + h * (-2.0 * q0 + 0.5 * std::tanh(q0));
        return std::abs(imp[0] - expl);
    };
    const double ratio = diff(1e-2) / diff(1e-3);
    CHECK(ratio >= 80.0);
    CHECK(ratio <= 120.0);
}

TEST_CASE("second moment of the slow state grows at most linearly in |x0|^2") {
    auto sup2 = [](double x0) {
        const auto spec = ou_pair(-1.0, -2.0, 1.0, vec({x0}));
        const auto b = simulate_slow_paths(spec, {0.0, 1.0, 100}, 1000, 9);
        double s = 0;
        for (std::size_t p = 0; p < b.n_paths; ++p) {
            double m = 0;
            for (std::size_t i = 0; i <= 100; ++i) m = std::max(m, b.x(p, i)[0] * b.x(p, i)[0]);
            s += m;
        }
        return s / double(b.n_paths);
    };
    const double e0 = sup2(0.0), e1 = sup2(1.0), e10 = sup2(10.0);
    const double c2 = std::max(e0, e1 / 2.0);
    CHECK(e10 <= 1.1 * c2 * 101.0);
}

TEST_CASE("fast second moment is uniform in eps") {
    std::vector<double> m, se;
    for (double eps : {0.4, 0.1, 0.02}) {
        const auto spec = ou_pair(-1.0, -2.0);
        const std::size_t N = std::size_t(std::lround(10.0 / eps));
        const auto b = simulate_two_scale_paths(spec, eps, {0.0, 1.0, N}, 4000, 21);
        std::vector<double> v(b.n_paths);
        for (std::size_t p = 0; p < b.n_paths; ++p) v[p] = b.q(p, N)[0] * b.q(p, N)[0];
        const auto e = mean_ci(v);
        m.push_back(e.value);
        se.push_back(e.ci / 1.96);
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) CHECK(std::abs(m[i] - m[j]) <= 3.0 * std::hypot(se[i], se[j]));
}

TEST_CASE("same seed gives identical bundles, independent of threads") {
    const auto spec = fixtures::load_config("desk_model.json");
    set_worker_threads(1);
    const auto a = simulate_two_scale_paths(spec, 0.1, {0.0, 1.0, 100}, 50, 4);
    set_worker_threads(3);
    const auto b = simulate_two_scale_paths(spec, 0.1, {0.0, 1.0, 100}, 50, 4);
    set_worker_threads(0);
    CHECK(a.X == b.X);
    CHECK(a.Q == b.Q);
    CHECK(a.dW1 == b.dW1);
    CHECK(a.dW2 == b.dW2);
}

TEST_CASE("slow-only simulation shares the slow paths") {
    const auto spec = fixtures::load_config("desk_model.json");
    const auto a = simulate_two_scale_paths(spec, 0.1, {0.0, 1.0, 100}, 20, 4);
    const auto b = simulate_slow_paths(spec, {0.0, 1.0, 100}, 20, 4);
    CHECK(a.X == b.X);
    CHECK(a.dW1 == b.dW1);
}

TEST_CASE("unresolved fast scale is a numerical error") {
    const auto spec = ou_pair(-1.0, -2.0);
    CHECK_THROWS_AS(simulate_two_scale_paths(spec, 0.05, {0.0, 1.0, 100}, 10, 1), NumericalError);
}

TEST_CASE("frozen fast OU reaches its stationary variance") {
    const double b = 1.5;
    const auto spec = ou_pair(-1.0, -b);
    const double horizon = 10.0, dt = 0.01;
    const auto bun = simulate_frozen_fast(spec, vec({0.0}), vec({0.0}), horizon, dt, 10000, 17);
    const std::size_t N = bun.grid.n_steps;
    std::vector<double> v(bun.n_paths);
    for (std::size_t p = 0; p < bun.n_paths; ++p) v[p] = bun.q(p, N)[0];
    const double target = 1.0 / (2.0 * b);
    CHECK(std::abs(sample_var(v) - target) < 3.0 * target * std::sqrt(2.0 / double(v.size())));
}

TEST_CASE("frozen fast paths are Lipschitz in the frozen slow state") {
    const auto spec = fixtures::load_config("desk_model.json");
    const Vec x = vec({0.3, 0.0}), xp = vec({-0.9, 0.4});
    const auto a = simulate_frozen_fast(spec, x, spec.q0, 10.0, 0.02, 200, 5);
    const auto b = simulate_frozen_fast(spec, xp, spec.q0, 10.0, 0.02, 200, 5);
    double worst = 0;
    for (std::size_t p = 0; p < a.n_paths; ++p)
        for (std::size_t i = 0; i <= a.grid.n_steps; ++i)
            worst = std::max(worst, (a.q_vec(p, i) - b.q_vec(p, i)).norm());
    CHECK(worst <= spec.F_lipschitz / spec.mu * (x - xp).norm() * (1 + 1e-9));
}

TEST_CASE("stationary start: time average matches ensemble average") {
    const auto spec = ou_pair(-1.0, -1.0);
    FrozenFastOptions opts;
    opts.stationary_start = true;
    const auto bun = simulate_frozen_fast(spec, vec({0.0}), vec({0.0}), 20.0, 0.01, 2000, 8, {}, opts);
    const std::size_t N = bun.grid.n_steps;
    std::vector<double> ta(bun.n_paths), end(bun.n_paths);
    for (std::size_t p = 0; p < bun.n_paths; ++p) {
        double s = 0;
        for (std::size_t i = 0; i < N; ++i) s += bun.q(p, i)[0] * bun.q(p, i)[0];
        ta[p] = s / double(N);
        end[p] = bun.q(p, N)[0] * bun.q(p, N)[0];
    }
    const auto a = mean_ci(ta), e = mean_ci(end);
    CHECK(std::abs(a.value - e.value) <= 3.0 / 1.96 * joint_ci(a.ci, e.ci));
}

TEST_CASE("frozen horizon below the mixing time is rejected") {
    const auto spec = ou_pair(-1.0, -1.0);
    CHECK_THROWS_AS(simulate_frozen_fast(spec, vec({0.0}), vec({0.0}), 5.0, 0.01, 10, 8), ValidationError);
}

TEST_CASE("bundle files round-trip") {
    const auto spec = fixtures::load_config("desk_model.json");
    const auto a = simulate_two_scale_paths(spec, 0.2, {0.0, 1.0, 50}, 7, 3);
    const std::string path = "bundle_roundtrip.bin";
    write_bundle(a, path);
    const auto b = read_bundle(path);
    std::remove(path.c_str());
    CHECK(b.n_paths == a.n_paths);
    CHECK(b.seed == a.seed);
    CHECK(b.grid.n_steps == a.grid.n_steps);
    CHECK(a.X == b.X);
    CHECK(a.Q == b.Q);
    CHECK(a.dW2 == b.dW2);
}

TEST_CASE("contraction inequality holds on coupled fast paths") {
    const auto spec = fixtures::load_config("desk_model.json");
    auto g1 = [](double t) { return Vec(vec({std::sin(3 * t), 0.5})); };
    auto g2 = [](double t) { return Vec(vec({std::cos(2 * t), -0.5})); };
    const auto r = check_contraction(spec, g1, g2, {0.0, 1.0, 200}, 0.05, 200, 3);
    CHECK(r.holds);
    CHECK(r.max_ratio <= 1.05);
}
