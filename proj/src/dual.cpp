// SPDX-License-Identifier: MIT
#include "twoscale/dual.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace twoscale {

namespace {

double max_spacing(const std::vector<double>& g) {
    double d = 0.0;
    for (std::size_t k = 1; k < g.size(); ++k) d = std::max(d, g[k] - g[k - 1]);
    return d;
}

/// Interval and weight along a sorted grid, clamped.
std::pair<std::size_t, double> bracket(const std::vector<double>& g, double s) {
    if (g.size() == 1 || s <= g.front()) return {0, 0.0};
    if (s >= g.back()) return {g.size() - 2, 1.0};
    const auto it = std::upper_bound(g.begin(), g.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
    return {i, (s - g[i]) / (g[i + 1] - g[i])};
}

}  // namespace

double ConjugateTable::value_coords(double s, std::size_t k) const {
    const auto [i, w] = bracket(x_grid, s);
    const auto ke = Eigen::Index(k);
    const double a = values(Eigen::Index(i), ke);
    if (w == 0.0) return a;
    const double b = values(Eigen::Index(i + 1), ke);
    if (!finite(a) || !finite(b)) return sentinel;
    return (1.0 - w) * a + w * b;
}

double ConjugateTable::value(const Vec& x, double pi) const {
    const double s = (x - x_ref).dot(x_dir) / x_dir.squaredNorm();
    const auto [k, w] = bracket(p_grid, pi);
    const double a = value_coords(s, k);
    if (w == 0.0 || p_grid.size() == 1) return a;
    const double b = value_coords(s, k + 1);
    if (!finite(a) || !finite(b)) return sentinel;
    return (1.0 - w) * a + w * b;
}

void ConjugateTable::write_csv(std::ostream& os) const {
    os << std::setprecision(17) << "# twoscale conjugate table v1\n# L," << L << "\n# sentinel," << sentinel
       << "\nx_index,p_index,x,p,lambda_star,finite\n";
    for (std::size_t i = 0; i < x_grid.size(); ++i)
        for (std::size_t k = 0; k < p_grid.size(); ++k) {
            const double v = values(Eigen::Index(i), Eigen::Index(k));
            os << i << ',' << k << ',' << x_grid[i] << ',' << p_grid[k] << ',' << v << ',' << finite(v) << '\n';
        }
}

ConjugateTable fenchel_conjugate_table(const EffectiveHamiltonianTable& lambda, const std::vector<double>& p_grid,
                                       double L) {
    if (p_grid.empty() || std::adjacent_find(p_grid.begin(), p_grid.end(), std::greater_equal<double>()) != p_grid.end())
        throw ValidationError("pre", "p grid must be nonempty and strictly increasing");
    if (!lambda.all_valid()) throw ValidationError("pre", "conjugation needs a fully valid lambda table");
    if (!lambda.concave_ok) throw ValidationError("pre", "conjugation needs a lambda table certified concave in z");
    const auto nx = Eigen::Index(lambda.x_grid.size()), nz = Eigen::Index(lambda.z_grid.size());
    ConjugateTable c;
    c.x_grid = lambda.x_grid;
    c.p_grid = p_grid;
    c.x_ref = lambda.x_ref;
    c.x_dir = lambda.x_dir;
    c.z_dir = lambda.z_dir;
    if (L < 0.0) {
        L = 0.0;
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 1; j < nz; ++j)
                L = std::max(L, std::abs(lambda.values(i, j) - lambda.values(i, j - 1)) /
                                    (lambda.z_grid[std::size_t(j)] - lambda.z_grid[std::size_t(j - 1)]));
    }
    c.L = L;
    c.p_lo = std::numeric_limits<double>::infinity();
    c.p_hi = -c.p_lo;
    for (double p : p_grid)
        if (std::abs(p) <= L * (1.0 + 1e-12) + 1e-15) c.p_lo = std::min(c.p_lo, p), c.p_hi = std::max(c.p_hi, p);
    if (c.p_lo > c.p_hi) throw ValidationError("pre", "no dual grid point lies within the Lipschitz bound");
    c.sentinel = -1e6 * (1.0 + lambda.values.cwiseAbs().maxCoeff()) - 1.0;
    c.values = Mat::Constant(nx, Eigen::Index(p_grid.size()), c.sentinel);
    parallel_for(std::size_t(nx), [&](std::size_t i) {
        for (std::size_t k = 0; k < p_grid.size(); ++k) {
            const double p = p_grid[k];
            if (std::abs(p) > L * (1.0 + 1e-12) + 1e-15) continue;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < nz; ++j)
                best = std::min(best, -lambda.z_grid[std::size_t(j)] * p - lambda.values(Eigen::Index(i), j));
            c.values(Eigen::Index(i), Eigen::Index(k)) = best;
        }
    });
    return c;
}

double reconstruct_biconjugate_coords(const ConjugateTable& conj, double s, double t) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < conj.p_grid.size(); ++k) {
        const double v = conj.value_coords(s, k);
        if (!conj.finite(v)) continue;
        best = std::min(best, -t * conj.p_grid[k] - v);
    }
    if (!std::isfinite(best)) throw NumericalError("conjugate table has no finite entries");
    return best;
}

double reconstruct_biconjugate(const ConjugateTable& conj, const Vec& x, const Vec& z) {
    const double s = (x - conj.x_ref).dot(conj.x_dir) / conj.x_dir.squaredNorm();
    return reconstruct_biconjugate_coords(conj, s, z.dot(conj.z_dir) / conj.z_dir.squaredNorm());
}

double grid_resolution(const EffectiveHamiltonianTable& lambda, const ConjugateTable& conj) {
    return std::max(max_spacing(lambda.z_grid), max_spacing(conj.p_grid));
}

double biconjugate_node_error(const EffectiveHamiltonianTable& lambda, const ConjugateTable& conj) {
    double err = 0.0;
    for (std::size_t i = 0; i < lambda.x_grid.size(); ++i)
        for (std::size_t j = 0; j < lambda.z_grid.size(); ++j)
            err = std::max(err, std::abs(reconstruct_biconjugate_coords(conj, lambda.x_grid[i], lambda.z_grid[j]) -
                                         lambda.values(Eigen::Index(i), Eigen::Index(j))));
    return err;
}

std::vector<DualFeedback> default_feedback_family(const ConjugateTable& conj, std::size_t n_constants,
                                                  const std::vector<double>& slopes,
                                                  const std::vector<double>& intercepts) {
    std::vector<DualFeedback> out;
    for (std::size_t k = 0; k < n_constants; ++k) {
        const double pi = n_constants == 1 ? std::clamp(0.0, conj.p_lo, conj.p_hi)
                                           : conj.p_lo + (conj.p_hi - conj.p_lo) * double(k) / double(n_constants - 1);
        out.push_back([pi](double, const Vec&) { return pi; });
    }
    const Vec x_ref = conj.x_ref, x_dir = conj.x_dir;
    for (double beta : slopes)
        for (double alpha : intercepts)
            out.push_back([=](double, const Vec& x) {
                return alpha + beta * (x - x_ref).dot(x_dir) / x_dir.squaredNorm();
            });
    return out;
}

ReducedControlResult solve_reduced_control(const ModelSpec& spec, const ConjugateTable& conj, const TimeGrid& grid,
                                           std::size_t n_paths, const std::vector<DualFeedback>& family,
                                           std::uint64_t seed) {
    grid.validate();
    if (family.empty()) throw ValidationError("pre", "feedback family is empty");
    if (conj.z_dir.size() != spec.R.matrix.cols()) throw ValidationError("pre", "conjugate table z axis mismatch");
    const SlowStepper slow(spec.A, spec.R.matrix, grid.dt());
    const double dt = grid.dt();
    const Vec p_unit = conj.z_dir / conj.z_dir.squaredNorm();
    ReducedControlResult res;
    for (const auto& fb : family) {
        std::vector<double> cost(n_paths);
        parallel_for(n_paths, [&](std::size_t p) {
            const NormalStream w1(seed, p, Channel::SlowBrownian);
            const NormalStream r1(seed, p, Channel::SlowResidual);
            Vec x = spec.x0, dW, eta;
            double running = 0.0;
            for (std::size_t i = 0; i < grid.n_steps; ++i) {
                const double pi = std::clamp(fb(grid.time(i), x), conj.p_lo, conj.p_hi);
                const double ls = conj.value(x, pi);
                if (!conj.finite(ls)) throw NumericalError("reduced control left the finite domain of lambda_*");
                running -= ls * dt;
                const Vec drift = -(spec.R.matrix * (pi * p_unit));
                slow.draw(w1, r1, i, dW, eta);
                x = slow.advance(x, eta, &drift);
            }
            cost[p] = spec.h(x) + running;
        });
        res.per_feedback.push_back(mean_ci(cost));
    }
    for (std::size_t k = 1; k < res.per_feedback.size(); ++k)
        if (res.per_feedback[k].value < res.per_feedback[res.best].value) res.best = k;
    res.value = res.per_feedback[res.best];
    return res;
}

void write_reduced_control_json(std::ostream& os, const ReducedControlResult& r) {
    nlohmann::ordered_json j;
    j["value"] = r.value.value;
    j["ci"] = r.value.ci;
    j["best_feedback"] = r.best;
    auto& arr = j["per_feedback"] = nlohmann::ordered_json::array();
    for (const auto& e : r.per_feedback) arr.push_back({{"value", e.value}, {"ci", e.ci}});
    os << std::setw(2) << j << '\n';
}

}  // namespace twoscale
