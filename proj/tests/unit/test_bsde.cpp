// SPDX-License-Identifier: MIT
#include "fixtures.hpp"
#include "twoscale/bsde.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace twoscale;
using fixtures::vec;

namespace {

ModelSpec constant_driver_model(double c) {
    auto raw = fixtures::driver_model(vec({-1.0, -2.0}), vec({-1.0, -2.0}),
                                      [c](const Vec&, const Vec&, const Vec&, const Vec&) { return c; },
                                      [](const Vec& x) { return std::tanh(x[0]) + 0.5 * x[1]; }, vec({0.5, -0.5}),
                                      vec({1.0, 0.0}));
    return build_model(raw);
}

double terminal_mean(const ModelSpec& spec, const PathBundle& b) {
    double s = 0;
    for (std::size_t p = 0; p < b.n_paths; ++p) s += spec.h(b.x_vec(p, b.grid.n_steps));
    return s / double(b.n_paths);
}

}  // namespace

TEST_CASE("reference solution: zero drift is the OU mean") {
    SpectralOperator A{vec({-1.0, -2.0})};
    const Vec x0 = vec({2.0, 1.0}), c = vec({1.0, 0.0}), d = vec({1.0, 0.0});
    CHECK(linear_reference_solution(A, Mat::Identity(2, 2), 0.0, c, d, x0) == Catch::Approx(2.0 * std::exp(-1.0)));
}

TEST_CASE("reference solution: flat generator shifts by a") {
    SpectralOperator A{vec({0.0})};
    CHECK(linear_reference_solution(A, Mat::Identity(1, 1), 0.7, vec({1}), vec({1}), vec({1.5})) ==
          Catch::Approx(2.2));
}

TEST_CASE("reference solution: unit decay") {
    SpectralOperator A{vec({-1.0})};
    const double a = 0.4, x0 = 1.3;
    CHECK(linear_reference_solution(A, Mat::Identity(1, 1), a, vec({1}), vec({1}), vec({x0})) ==
          Catch::Approx(std::exp(-1.0) * x0 + a * (1.0 - std::exp(-1.0))));
}

TEST_CASE("zero driver: eps solver returns the terminal mean of its bundle") {
    const auto spec = constant_driver_model(0.0);
    const auto b = simulate_two_scale_paths(spec, 0.2, {0.0, 1.0, 50}, 2000, 3);
    const auto s = solve_epsilon_bsde(spec, 0.2, b, 2);
    CHECK(std::abs(s.y0 - terminal_mean(spec, b)) < 1e-12);
}

TEST_CASE("constant driver shifts Y0 by c") {
    const auto spec = constant_driver_model(0.3);
    const auto b = simulate_two_scale_paths(spec, 0.2, {0.0, 1.0, 50}, 2000, 3);
    const auto s = solve_epsilon_bsde(spec, 0.2, b, 2);
    CHECK(std::abs(s.y0 - (terminal_mean(spec, b) + 0.3)) < 1e-12);
    CHECK(s.n_steps() == 50);
    CHECK(s.realized0.size() == 2000);
}

TEST_CASE("zero lambda: limit solver returns the terminal mean") {
    const auto spec = constant_driver_model(0.0);
    const auto b = simulate_slow_paths(spec, {0.0, 1.0, 50}, 2000, 3);
    const auto s = solve_limit_bsde(spec, LambdaFn([](const Vec&, const Vec&) { return 0.0; }), b, 2);
    CHECK(std::abs(s.y0 - terminal_mean(spec, b)) < 1e-12);
}

TEST_CASE("linear driver matches the Girsanov closed form") {
    const auto spec = fixtures::load_config("linear_model.json");
    const double ref = linear_reference_solution(spec.A, spec.R.matrix, 0.5, vec({1, 0}), vec({1, 0}), spec.x0);
    SECTION("eps solver") {
        const auto s = solve_epsilon_bsde(spec, 0.2, {0.0, 1.0, 50}, 4000, 2, 7);
        CHECK(std::abs(s.y0 - ref) <= 0.02 * std::abs(ref));
    }
    SECTION("limit solver with lambda = a z1") {
        const auto s = solve_limit_bsde(spec, LambdaFn([](const Vec&, const Vec& z) { return 0.5 * z[0]; }),
                                        {0.0, 1.0, 50}, 4000, 2, 7);
        CHECK(std::abs(s.y0 - ref) <= 0.02 * std::abs(ref));
    }
}

TEST_CASE("eps solver enforces dt <= eps/10") {
    const auto spec = constant_driver_model(0.0);
    CHECK_THROWS_AS(solve_epsilon_bsde(spec, 0.1, {0.0, 1.0, 50}, 100, 2, 1), NumericalError);
}

TEST_CASE("lambda table out of range is a numerical error") {
    const auto spec = fixtures::load_config("linear_model.json");
    LambdaTableConfig cfg;
    cfg.x_grid = {0.0};
    cfg.z_grid = {5.0, 6.0};
    cfg.x_ref = vec({0, 0});
    cfg.x_dir = vec({1, 0});
    cfg.z_dir = vec({1, 0});
    const auto t = tabulate_lambda([](const Vec&, const Vec& z) { return 0.5 * z[0]; }, cfg);
    try {
        solve_limit_bsde(spec, LambdaSource(&t), {0.0, 1.0, 20}, 500, 2, 1);
        FAIL("expected clamping failure");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("lambda out of range") != std::string::npos);
    }
}

TEST_CASE("decoupled systems: limit and eps solvers agree") {
    const auto spec = fixtures::load_config("decoupled_model.json");
    LambdaTableConfig cfg;
    cfg.x_grid = {0.0};
    cfg.z_grid = {-3, -1.5, 0, 1.5, 3};
    cfg.x_ref = vec({0, 0});
    cfg.x_dir = vec({1, 0});
    cfg.z_dir = vec({1, 0});
    cfg.ergodic.n_paths = 200;
    const auto t = build_lambda_table(spec, cfg);
    REQUIRE(t.all_valid());
    const TimeGrid grid{0.0, 1.0, 50};
    const auto lim = solve_limit_bsde(spec, LambdaSource(&t), grid, 3000, 2, 5);
    const auto eps = solve_epsilon_bsde(spec, 0.2, grid, 3000, 2, 5);
    CHECK(std::abs(lim.y0 - eps.y0) <= joint_ci(joint_ci(lim.ci, lim.table_ci), eps.ci));
}

TEST_CASE("solution JSON and fit CSV are written") {
    const auto spec = constant_driver_model(0.1);
    const auto s = solve_epsilon_bsde(spec, 0.2, {0.0, 1.0, 50}, 300, 1, 2);
    std::ostringstream js, cs;
    write_solution_json(js, s);
    write_fits_csv(cs, s);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j.at("y0").get<double>() == s.y0);
    CHECK(cs.str().find("xi") != std::string::npos);
}
