// SPDX-License-Identifier: MIT
#include "twoscale/bsde.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace twoscale {

namespace {

std::vector<double> terminal_values(const ModelSpec& spec, const PathBundle& b) {
    std::vector<double> t(b.n_paths);
    parallel_for(b.n_paths, [&](std::size_t p) { t[p] = spec.h(b.x_vec(p, b.grid.n_steps)); });
    return t;
}

BsdeSolution package(BackwardResult&& r, std::size_t n_z, std::size_t n_xi) {
    BsdeSolution s;
    s.y0 = r.y0.value;
    s.ci = r.y0.ci;
    s.residuals = std::move(r.residuals);
    s.realized0 = std::move(r.realized0);
    s.max_condition = r.max_condition;
    s.y_fits = std::move(r.y_fits);
    for (const auto& g : r.gradient_fits) {
        s.z_fits.push_back(g.select_outputs(0, n_z));
        if (n_xi) s.xi_fits.push_back(g.select_outputs(n_z, n_xi));
    }
    return s;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace

BsdeSolution solve_epsilon_bsde(const ModelSpec& spec, double eps, const PathBundle& b, int degree) {
    require_fast_resolution(b.grid, eps);
    BackwardInputs in = inputs_from_bundle(b, true, true, true, true);
    in.terminal = terminal_values(spec, b);
    in.degree = degree;
    const std::size_t n = b.slow_dim, nz = b.noise1_dim, nxi = b.noise2_dim;
    const double scale = 1.0 / std::sqrt(eps);
    in.driver = [&](std::size_t, std::size_t, std::span<const double> s, std::span<const double> g) {
        const Vec x = as_vec(s.first(n)), q = as_vec(s.subspan(n));
        const Vec z = as_vec(g.first(nz)), xi = as_vec(g.subspan(nz)) * scale;
        return spec.psi(x, q, z, xi);
    };
    BsdeSolution sol = package(run_backward(in), nz, nxi);

    const std::size_t sample = std::min<std::size_t>(b.n_paths, 200);
    std::vector<double> mags;
    std::vector<double> st(in.state_dim);
    for (std::size_t i = 1; i < b.grid.n_steps; ++i)
        for (std::size_t p = 0; p < sample; ++p) {
            in.state(p, i, st.data());
            mags.push_back(sol.xi_fits[i].predict(st).norm() * scale);
        }
    sol.xi_median_scaled = median(std::move(mags));
    return sol;
}

BsdeSolution solve_epsilon_bsde(const ModelSpec& spec, double eps, const TimeGrid& grid, std::size_t n_paths,
                                int degree, std::uint64_t seed) {
    require_fast_resolution(grid, eps);
    return solve_epsilon_bsde(spec, eps, simulate_two_scale_paths(spec, eps, grid, n_paths, seed), degree);
}

namespace {

BackwardInputs limit_inputs(const ModelSpec& spec, const LambdaSource& lambda, const PathBundle& b, int degree,
                            std::atomic<std::size_t>& evals, std::atomic<std::size_t>& clamped) {
    BackwardInputs in = inputs_from_bundle(b, true, false, true, false);
    in.terminal = terminal_values(spec, b);
    in.degree = degree;
    in.driver = [&lambda, &evals, &clamped](std::size_t, std::size_t, std::span<const double> s,
                                            std::span<const double> g) {
        const Vec x = as_vec(s), z = as_vec(g);
        if (const auto* table = std::get_if<const EffectiveHamiltonianTable*>(&lambda)) {
            const auto r = (*table)->lookup(x, z);
            evals.fetch_add(1, std::memory_order_relaxed);
            if (r.clamped) clamped.fetch_add(1, std::memory_order_relaxed);
            return r.value;
        }
        return std::get<LambdaFn>(lambda)(x, z);
    };
    return in;
}

}  // namespace

BsdeSolution solve_limit_bsde(const ModelSpec& spec, const LambdaSource& lambda, const PathBundle& b, int degree) {
    if (b.slow_dim == 0) throw ValidationError("pre", "limit solver needs slow paths");
    if (const auto* table = std::get_if<const EffectiveHamiltonianTable*>(&lambda); table && !*table)
        throw ValidationError("pre", "null lambda table");
    std::atomic<std::size_t> evals{0}, clamped{0};
    BackwardInputs in = limit_inputs(spec, lambda, b, degree, evals, clamped);
    BsdeSolution sol = package(run_backward(in), b.noise1_dim, 0);
    sol.lambda_evals = evals.load();
    sol.lambda_clamped = clamped.load();
    if (const auto* table = std::get_if<const EffectiveHamiltonianTable*>(&lambda)) {
        sol.table_ci = (*table)->max_ci();
        if (sol.lambda_clamped * 100 > sol.lambda_evals)
            throw NumericalError("lambda out of range: " + std::to_string(sol.lambda_clamped) + " of " +
                                 std::to_string(sol.lambda_evals) + " evaluations clamped to the table box");
    }
    return sol;
}

BsdeSolution solve_limit_bsde(const ModelSpec& spec, const LambdaSource& lambda, const TimeGrid& grid,
                              std::size_t n_paths, int degree, std::uint64_t seed) {
    return solve_limit_bsde(spec, lambda, simulate_slow_paths(spec, grid, n_paths, seed), degree);
}

double limit_step_process_gap(const ModelSpec& spec, const LambdaSource& lambda, const PathBundle& b, int degree,
                              std::size_t coarsening) {
    std::atomic<std::size_t> evals{0}, clamped{0};
    BackwardInputs in = limit_inputs(spec, lambda, b, degree, evals, clamped);
    const BackwardResult r = run_backward(in);
    return step_process_gap(in, r, coarsening);
}

double linear_reference_solution(const SpectralOperator& A, const Mat& R, double a, const Vec& c, const Vec& d,
                                 const Vec& x0, double horizon) {
    if (c.size() != A.eigenvalues.size() || x0.size() != c.size() || d.size() != R.cols())
        throw ValidationError("pre", "linear reference: dimension mismatch");
    const Vec shift = R * d;
    double y = c.dot(A.semigroup(horizon).cwiseProduct(x0));
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        const double ak = A.eigenvalues[k];
        const double phi = std::abs(ak * horizon) < 1e-14 ? horizon : std::expm1(ak * horizon) / ak;
        y += a * c[k] * phi * shift[k];
    }
    return y;
}

void write_solution_json(std::ostream& os, const BsdeSolution& s) {
    nlohmann::ordered_json j;
    j["y0"] = s.y0;
    j["ci"] = s.ci;
    j["table_ci"] = s.table_ci;
    j["n_steps"] = s.n_steps();
    j["basis"] = s.y_fits.empty() ? "" : s.y_fits.back().describe();
    j["max_condition"] = s.max_condition;
    j["lambda_evals"] = s.lambda_evals;
    j["lambda_clamped"] = s.lambda_clamped;
    j["residuals"] = s.residuals;
    os << std::setw(2) << j << '\n';
}

void write_fits_csv(std::ostream& os, const BsdeSolution& s) {
    os << std::setprecision(17) << "step,kind,output,basis,condition,coefficients\n";
    auto emit = [&](std::size_t i, const char* kind, const RegressionFit& f) {
        for (std::size_t o = 0; o < f.outputs(); ++o) {
            os << i << ',' << kind << ',' << o << ',' << f.describe() << ',' << f.condition;
            for (Eigen::Index r = 0; r < f.coef.rows(); ++r) os << ',' << f.coef(r, Eigen::Index(o));
            os << '\n';
        }
    };
    for (std::size_t i = 0; i < s.y_fits.size(); ++i) {
        emit(i, "y", s.y_fits[i]);
        if (i < s.z_fits.size()) emit(i, "z", s.z_fits[i]);
        if (i < s.xi_fits.size()) emit(i, "xi", s.xi_fits[i]);
    }
}

}  // namespace twoscale
