// SPDX-License-Identifier: MIT
#include "twoscale/control.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace twoscale {

namespace {

const ControlData& need_control(const ModelSpec& spec) {
    if (!spec.control) throw ValidationError("pre", "policy evaluation needs control data");
    return *spec.control;
}

}  // namespace

CostEvaluation evaluate_weak_cost(const ModelSpec& spec, double eps, const FeedbackPolicy& policy,
                                  const PathBundle& b) {
    const auto& c = need_control(spec);
    require_fast_resolution(b.grid, eps);
    const Mat& Rinv = spec.R_inverse();
    const double dt = b.grid.dt(), inv_sqrt_eps = 1.0 / std::sqrt(eps);
    const std::size_t N = b.grid.n_steps;
    std::vector<double> weighted(b.n_paths), density(b.n_paths), logs(b.n_paths);
    parallel_for(b.n_paths, [&](std::size_t p) {
        double log_theta = 0.0, running = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const Vec x = b.x_vec(p, i), q = b.q_vec(p, i);
            const auto& a = c.control_grid.at(policy(b.grid.time(i), x, q));
            const Vec th1 = Rinv * c.b(x, q, a);
            const Vec th2 = c.rho(a) * inv_sqrt_eps;
            log_theta += th1.dot(as_vec(b.dw1(p, i))) + th2.dot(as_vec(b.dw2(p, i))) -
                         0.5 * (th1.squaredNorm() + th2.squaredNorm()) * dt;
            running += c.l(x, q, a) * dt;
        }
        logs[p] = log_theta;
        const double theta = std::exp(log_theta);
        density[p] = theta;
        weighted[p] = theta * (running + spec.h(b.x_vec(p, N)));
    });
    CostEvaluation e;
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        e.max_abs_log_density = std::max(e.max_abs_log_density, std::abs(logs[p]));
        if (std::abs(logs[p]) > kMaxLogDensity) {
            std::ostringstream os;
            os << "density blow-up: |log Theta| = " << std::abs(logs[p]) << " on path " << p
               << " (dt too coarse for the 1/sqrt(eps) drift)";
            throw NumericalError(os.str());
        }
    }
    e.weak = mean_ci(weighted);
    e.density_mean = mean_ci(density);
    return e;
}

Estimate evaluate_strong_cost(const ModelSpec& spec, double eps, const FeedbackPolicy& policy, const TimeGrid& grid,
                              std::size_t n_paths, std::uint64_t seed) {
    const auto& c = need_control(spec);
    grid.validate();
    require_fast_resolution(grid, eps);
    const SlowStepper slow(spec.A, spec.R.matrix, grid.dt());
    const double dt = grid.dt();
    const std::size_t d2 = std::size_t(spec.G.matrix.cols());
    std::vector<double> cost(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        const NormalStream w1(seed, p, Channel::SlowBrownian);
        const NormalStream r1(seed, p, Channel::SlowResidual);
        const NormalStream w2(seed, p, Channel::FastBrownian);
        Vec x = spec.x0, q = spec.q0, dW, eta, xi(d2);
        double running = 0.0;
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            const auto& a = c.control_grid.at(policy(grid.time(i), x, q));
            running += c.l(x, q, a) * dt;
            const Vec drift = c.b(x, q, a);
            const Vec extra = spec.G.matrix * c.rho(a);
            slow.draw(w1, r1, i, dW, eta);
            w2.fill(i, {xi.data(), d2});
            Vec x_next = slow.advance(x, eta, &drift);
            q = step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, q, x, dt, eps, xi, &extra);
            x = std::move(x_next);
        }
        cost[p] = running + spec.h(x);
    });
    return mean_ci(cost);
}

CostEvaluation evaluate_cost(const ModelSpec& spec, double eps, const FeedbackPolicy& policy, const TimeGrid& grid,
                             std::size_t n_paths, std::uint64_t seed, bool with_strong) {
    CostEvaluation e =
        evaluate_weak_cost(spec, eps, policy, simulate_two_scale_paths(spec, eps, grid, n_paths, seed));
    if (with_strong) e.strong = evaluate_strong_cost(spec, eps, policy, grid, n_paths, seed);
    return e;
}

BruteForceResult brute_force_value(const ModelSpec& spec, double eps, const std::vector<FeedbackPolicy>& family,
                                   const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) {
    if (family.empty()) throw ValidationError("pre", "policy family is empty");
    if (family.size() > kMaxPolicies) throw ValidationError("pre", "policy family exceeds 4096 policies");
    const PathBundle b = simulate_two_scale_paths(spec, eps, grid, n_paths, seed);
    BruteForceResult r;
    for (const auto& policy : family) r.per_policy.push_back(evaluate_weak_cost(spec, eps, policy, b).weak);
    for (std::size_t k = 1; k < r.per_policy.size(); ++k)
        if (r.per_policy[k].value < r.per_policy[r.best].value) r.best = k;
    r.value = r.per_policy[r.best];
    return r;
}

std::vector<FeedbackPolicy> binned_policy_family(std::size_t time_bins, std::size_t q_component,
                                                 const std::vector<std::size_t>& actions, double t0, double t1) {
    if (time_bins == 0 || actions.empty()) throw ValidationError("pre", "policy family needs bins and actions");
    const std::size_t cells = time_bins * 2;
    double count = std::pow(double(actions.size()), double(cells));
    if (count > double(kMaxPolicies)) throw ValidationError("pre", "policy family exceeds 4096 policies");
    std::vector<FeedbackPolicy> out;
    for (std::size_t code = 0; code < std::size_t(count); ++code) {
        std::vector<std::size_t> table(cells);
        std::size_t rest = code;
        for (std::size_t k = 0; k < cells; ++k) {
            table[k] = actions[rest % actions.size()];
            rest /= actions.size();
        }
        out.push_back([=](double t, const Vec&, const Vec& q) {
            const double u = (t - t0) / (t1 - t0);
            const std::size_t tb = std::min(time_bins - 1, std::size_t(std::max(0.0, u) * double(time_bins)));
            const std::size_t sb = q[Eigen::Index(q_component)] >= 0.0 ? 1 : 0;
            return table[tb * 2 + sb];
        });
    }
    return out;
}

void write_brute_force_csv(std::ostream& os, const BruteForceResult& r) {
    os << std::setprecision(17) << "policy,value,ci,best\n";
    for (std::size_t k = 0; k < r.per_policy.size(); ++k)
        os << k << ',' << r.per_policy[k].value << ',' << r.per_policy[k].ci << ',' << (k == r.best) << '\n';
}

}  // namespace twoscale
