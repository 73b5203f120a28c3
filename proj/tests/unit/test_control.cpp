// SPDX-License-Identifier: MIT
#include "fixtures.hpp"
#include "twoscale/bsde.hpp"
#include "twoscale/control.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace twoscale;
using fixtures::vec;

namespace {

nlohmann::json desk_doc() {
    std::ifstream is(fixtures::config_path("desk_model.json"));
    return nlohmann::json::parse(is);
}

ModelSpec build(const nlohmann::json& doc) { return parse_model(doc).build(); }

FeedbackPolicy constant_policy(std::size_t k) {
    return [k](double, const Vec&, const Vec&) { return k; };
}

double terminal_mean(const ModelSpec& spec, const PathBundle& b) {
    double s = 0;
    for (std::size_t p = 0; p < b.n_paths; ++p) s += spec.h(b.x_vec(p, b.grid.n_steps));
    return s / double(b.n_paths);
}

}  // namespace

TEST_CASE("no control drift means unit density") {
    auto doc = desk_doc();
    doc["control"]["slow_drift"]["matrix"] = {{0.0}, {0.0}};
    doc["control"]["fast_drift"]["matrix"] = {{0.0}, {0.0}};
    doc["constants"]["L_xi"] = 0.0;
    const auto spec = build(doc);
    const auto e = evaluate_cost(spec, 0.2, constant_policy(1), {0.0, 1.0, 50}, 500, 3, false);
    CHECK(e.max_abs_log_density == 0.0);
    CHECK(e.density_mean.value == 1.0);
    CHECK(e.density_mean.ci == 0.0);
}

TEST_CASE("weak and strong formulations agree") {
    const auto spec = build(desk_doc());
    const auto e = evaluate_cost(spec, 0.2, constant_policy(1), {0.0, 1.0, 100}, 4000, 5);
    CHECK(std::abs(e.weak.value - e.strong.value) <= 3.0 / 1.96 * joint_ci(e.weak.ci, e.strong.ci));
}

TEST_CASE("density has unit mean at eps = 0.1") {
    const auto spec = build(desk_doc());
    const auto e = evaluate_cost(spec, 0.1, constant_policy(0), {0.0, 1.0, 200}, 4000, 6, false);
    CHECK(std::abs(e.density_mean.value - 1.0) <= 3.0 / 1.96 * e.density_mean.ci);
    CHECK(e.max_abs_log_density < kMaxLogDensity);
}

TEST_CASE("singleton control grid reproduces the eps BSDE") {
    auto doc = desk_doc();
    doc["control_grid"] = {{1.0}};
    const auto spec = build(doc);
    const TimeGrid grid{0.0, 1.0, 100};
    const auto bf = brute_force_value(spec, 0.2, {constant_policy(0)}, grid, 4000, 7);
    const auto y = solve_epsilon_bsde(spec, 0.2, grid, 4000, 2, 7);
    CHECK(std::abs(bf.value.value - y.y0) <= 3.0 / 1.96 * joint_ci(bf.value.ci, y.ci));
}

TEST_CASE("state-free costs without drift give min l plus the terminal mean") {
    auto doc = desk_doc();
    doc["control_grid"] = {{-1.0}, {0.5}};
    doc["control"]["slow_drift"]["matrix"] = {{0.0}, {0.0}};
    doc["control"]["fast_drift"]["matrix"] = {{0.0}, {0.0}};
    doc["control"]["running_cost"] = {{"quadratic", 0.25}, {"q_tanh", {0.0, 0.0}}, {"x_tanh", {0.0, 0.0}}};
    doc["constants"]["L_xi"] = 0.0;
    const auto spec = build(doc);
    const TimeGrid grid{0.0, 1.0, 50};
    const auto bf = brute_force_value(spec, 0.2, binned_policy_family(1, 0, {0, 1}), grid, 1000, 8);
    const auto b = simulate_two_scale_paths(spec, 0.2, grid, 1000, 8);
    CHECK(bf.value.value == Catch::Approx(0.0625 + terminal_mean(spec, b)).epsilon(1e-12));
    CHECK(bf.per_policy.size() == 4);
}

TEST_CASE("policy family sizes and limits") {
    CHECK(binned_policy_family(3, 0, {0, 1}).size() == 64);
    CHECK_THROWS_AS(binned_policy_family(7, 0, {0, 1}), ValidationError);
    CHECK_THROWS_AS(brute_force_value(build(desk_doc()), 0.2, {}, {0.0, 1.0, 50}, 10, 1), ValidationError);
    const auto fam = binned_policy_family(2, 1, {0, 1});
    // code 6 = 0b0110: (bin0, q<0) -> 0, (bin0, q>=0) -> 1, (bin1, q<0) -> 1, (bin1, q>=0) -> 0
    CHECK(fam[6](0.1, vec({0, 0}), vec({0, 1})) == 1);
    CHECK(fam[6](0.9, vec({0, 0}), vec({0, -1})) == 1);
    CHECK(fam[6](0.9, vec({0, 0}), vec({0, 1})) == 0);
}

TEST_CASE("coarse steps at small eps raise a density blow-up") {
    auto doc = desk_doc();
    doc["control"]["fast_drift"]["matrix"] = {{40.0}, {40.0}};
    doc["constants"]["L_xi"] = 40.0 * std::sqrt(2.0);
    doc["constants"]["M"] = 60.0;
    const auto spec = build(doc);
    CHECK_THROWS_WITH(evaluate_cost(spec, 0.01, constant_policy(1), {0.0, 1.0, 1000}, 200, 2, false),
                      Catch::Matchers::ContainsSubstring("density blow-up"));
}

TEST_CASE("brute force over 64 binned policies bounds the eps value") {
    const auto spec = build(desk_doc());
    const TimeGrid grid{0.0, 1.0, 100};
    const auto fam = binned_policy_family(3, 0, {0, 1});
    const auto bf = brute_force_value(spec, 0.2, fam, grid, 2000, 9);
    const auto y = solve_epsilon_bsde(spec, 0.2, grid, 4000, 2, 9);
    const double ci = joint_ci(bf.value.ci, y.ci);
    CHECK(bf.value.value >= y.y0 - ci);
    CHECK(bf.value.value - y.y0 < 0.1);
    std::ostringstream os;
    write_brute_force_csv(os, bf);
    CHECK(os.str().find('\n') != std::string::npos);
}
