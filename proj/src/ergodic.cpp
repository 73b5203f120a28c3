// SPDX-License-Identifier: MIT
#include "twoscale/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace twoscale {

double ErgodicSolution::v(const Vec& q) const { return v_fit.predict(std::span<const double>(q.data(), q.size()), 0) - v_offset; }

Vec ErgodicSolution::zeta(const Vec& q) const { return zeta_fit.predict(std::span<const double>(q.data(), q.size())); }

namespace {

double discount_weight(double delta, double dt, std::size_t n) {
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k) w += std::exp(-delta * dt * static_cast<double>(k));
    return w * dt;
}

Vec origin_or(const Vec& q0, std::size_t m) { return q0.size() ? q0 : Vec(Vec::Zero(static_cast<Eigen::Index>(m))); }

}  // namespace

ErgodicSolution solve_ergodic_bsde(const ModelSpec& spec, const Vec& x, const Vec& z, const ErgodicConfig& cfg,
                                   std::uint64_t seed) {
    const auto& ds = cfg.deltas;
    if (ds.empty()) throw ValidationError("pre", "discount schedule is empty");
    for (std::size_t k = 0; k < ds.size(); ++k) {
        if (!(ds[k] > 0.0)) throw ValidationError("pre", "discounts must be positive");
        if (k && !(ds[k] < ds[k - 1])) throw ValidationError("pre", "discount schedule must be strictly decreasing");
    }
    if (ds.back() < 1e-3) throw ValidationError("pre", "smallest discount must be >= 1e-3");
    if (cfg.degree < 1) throw ValidationError("pre", "ergodic basis must span constants and linear functions of q");

    const double horizon = cfg.horizon > 0.0 ? cfg.horizon : 20.0 / spec.mu;
    const Vec q0 = origin_or(cfg.q0, spec.fast_dim());
    FrozenFastOptions opts;
    opts.stationary_start = cfg.stationary_start;
    opts.warmup = cfg.warmup >= 0.0 ? cfg.warmup : 5.0 / spec.mu;
    const PathBundle bundle = simulate_frozen_fast(spec, x, q0, horizon, cfg.dt, cfg.n_paths, seed, {}, opts);

    BackwardInputs in = inputs_from_bundle(bundle, false, true, false, true);
    in.terminal.assign(bundle.n_paths, 0.0);
    in.degree = cfg.degree;
    in.driver = [&](std::size_t, std::size_t, std::span<const double> q, std::span<const double> xi) {
        return spec.psi(x, as_vec(q), z, as_vec(xi));
    };

    ErgodicSolution sol;
    const std::size_t N = bundle.grid.n_steps;
    const std::size_t fit_step = cfg.stationary_start ? 0 : N / 4;
    std::vector<std::vector<double>> per_path;
    BackwardResult last;
    for (double delta : ds) {
        in.discount = delta;
        BackwardResult r = run_backward(in);
        const double w = discount_weight(delta, bundle.grid.dt(), N);
        std::vector<double> lam(r.realized0.size());
        for (std::size_t p = 0; p < lam.size(); ++p) lam[p] = r.realized0[p] / w;
        const Estimate e = mean_ci(lam);
        sol.discount_trace.emplace_back(delta, e.value);
        sol.trace_ci.push_back(e.ci);
        per_path.push_back(std::move(lam));
        last = std::move(r);
    }

    if (ds.size() >= 2) {
        const std::size_t a = ds.size() - 2, b = ds.size() - 1;
        const double gap = std::abs(sol.discount_trace[b].second - sol.discount_trace[a].second);
        if (gap > cfg.cauchy_tol) {
            std::ostringstream os;
            os << "no discount convergence: |λ_" << ds[b] << " − λ_" << ds[a] << "| = " << gap << " > "
               << cfg.cauchy_tol;
            throw NumericalError(os.str());
        }
        std::vector<double> rich(per_path[b].size());
        for (std::size_t p = 0; p < rich.size(); ++p)
            rich[p] = (ds[a] * per_path[b][p] - ds[b] * per_path[a][p]) / (ds[a] - ds[b]);
        sol.lambda = mean_ci(rich);
    } else {
        sol.lambda = mean_ci(per_path.back());
    }

    sol.v_fit = last.y_fits[fit_step];
    sol.zeta_fit = last.gradient_fits[fit_step];
    const Vec origin = Vec::Zero(static_cast<Eigen::Index>(spec.fast_dim()));
    sol.v_offset = sol.v_fit.predict(std::span<const double>(origin.data(), origin.size()), 0);
    sol.residuals = last.residuals;

    const std::size_t probes = std::min(cfg.growth_probes, bundle.n_paths);
    const double zfac = 1.0 + z.norm();
    for (std::size_t p = 0; p < probes; ++p) {
        const Vec q = bundle.q_vec(p, fit_step);
        const double v = std::abs(sol.v(q));
        sol.v_sup = std::max(sol.v_sup, v);
        if (q.norm() > 1e-8) sol.growth_ratio = std::max(sol.growth_ratio, v / (zfac * q.norm()));
    }
    sol.growth_ok = sol.growth_ratio <= cfg.growth_c;
    return sol;
}

Estimate estimate_lambda_time_average(const ModelSpec& spec, const Vec& x, const Vec& z, double horizon, double dt,
                                      std::size_t n_paths, std::uint64_t seed, const Vec& q0) {
    if (spec.driver_constants.Lxi > 0.0)
        throw ValidationError("pre", "requires ξ-independent driver (declared L_xi > 0)");
    if (horizon < 20.0 / spec.mu * (1.0 - 1e-12)) throw ValidationError("pre", "time average needs horizon >= 20/mu");
    FrozenFastOptions opts;
    opts.enforce_mixing = false;
    const PathBundle b =
        simulate_frozen_fast(spec, x, origin_or(q0, spec.fast_dim()), horizon, dt, n_paths, seed, {}, opts);
    const std::size_t N = b.grid.n_steps, burn = N / 4;
    const Vec xi0 = Vec::Zero(spec.G.matrix.cols());
    std::vector<double> avg(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        double s = 0.0;
        for (std::size_t i = burn; i < N; ++i) s += spec.psi(x, b.q_vec(p, i), z, xi0);
        avg[p] = s / static_cast<double>(N - burn);
    });
    return mean_ci(avg);
}

std::vector<FastFeedback> constant_fast_policies(const ModelSpec& spec) {
    if (!spec.control) throw ValidationError("pre", "constant policies need control data");
    std::vector<FastFeedback> out;
    for (std::size_t k = 0; k < spec.control->control_grid.size(); ++k)
        out.push_back([k](const Vec&) { return k; });
    return out;
}

ErgodicControlResult ergodic_control_cross_check(const ModelSpec& spec, const Vec& x, const Vec& z,
                                                 const std::vector<FastFeedback>& policies, double horizon,
                                                 double dt, std::size_t n_paths, std::uint64_t seed) {
    if (!spec.control) throw ValidationError("pre", "ergodic control needs control data");
    if (policies.empty()) throw ValidationError("pre", "policy family is empty");
    const auto& c = *spec.control;
    const Mat& Rinv = spec.R_inverse();
    ErgodicControlResult res;
    const Vec q0 = Vec::Zero(static_cast<Eigen::Index>(spec.fast_dim()));
    for (const auto& policy : policies) {
        const FastDriftHook hook = [&](std::size_t, std::size_t, const Vec&, const Vec& q) -> Vec {
            return spec.G.matrix * c.rho(c.control_grid.at(policy(q)));
        };
        const PathBundle b = simulate_frozen_fast(spec, x, q0, horizon, dt, n_paths, seed, hook);
        const std::size_t N = b.grid.n_steps, burn = N / 4;
        std::vector<double> avg(n_paths);
        parallel_for(n_paths, [&](std::size_t p) {
            double s = 0.0;
            for (std::size_t i = burn; i < N; ++i) {
                const Vec q = b.q_vec(p, i);
                const auto& a = c.control_grid.at(policy(q));
                s += c.l(x, q, a) + z.dot(Rinv * c.b(x, q, a));
            }
            avg[p] = s / static_cast<double>(N - burn);
        });
        res.per_policy.push_back(mean_ci(avg));
    }
    for (std::size_t k = 1; k < res.per_policy.size(); ++k)
        if (res.per_policy[k].value < res.per_policy[res.best_policy].value) res.best_policy = k;
    res.value = res.per_policy[res.best_policy];
    return res;
}

double EffectiveHamiltonianTable::x_coord(const Vec& x) const {
    return (x - x_ref).dot(x_dir) / x_dir.squaredNorm();
}

double EffectiveHamiltonianTable::z_coord(const Vec& z) const { return z.dot(z_dir) / z_dir.squaredNorm(); }

namespace {

/// Interval index and weight of s on a sorted grid; clamps outside.
std::pair<std::size_t, double> locate(const std::vector<double>& g, double s, bool& clamped) {
    if (g.size() == 1) return {0, 0.0};  // constant along this axis
    const double tol = 1e-12 * (1.0 + std::abs(g.front()) + std::abs(g.back()));
    if (s < g.front() - tol || s > g.back() + tol) clamped = true;
    s = std::clamp(s, g.front(), g.back());
    auto it = std::upper_bound(g.begin(), g.end(), s);
    std::size_t i = static_cast<std::size_t>(it - g.begin());
    i = std::min(std::max<std::size_t>(i, 1), g.size() - 1) - 1;
    return {i, (s - g[i]) / (g[i + 1] - g[i])};
}

}  // namespace

EffectiveHamiltonianTable::Lookup EffectiveHamiltonianTable::lookup_coords(double s, double t) const {
    Lookup out;
    const auto [i, wx] = locate(x_grid, s, out.clamped);
    const auto [j, wz] = locate(z_grid, t, out.clamped);
    const std::size_t i1 = std::min(i + 1, x_grid.size() - 1), j1 = std::min(j + 1, z_grid.size() - 1);
    auto node = [&](std::size_t a, std::size_t b) {
        if (!valid[a][b]) throw NumericalError("lambda table node invalid");
        return values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };
    double v = (1.0 - wx) * (1.0 - wz) * node(i, j);
    if (wz > 0.0) v += (1.0 - wx) * wz * node(i, j1);
    if (wx > 0.0) v += wx * (1.0 - wz) * node(i1, j);
    if (wx > 0.0 && wz > 0.0) v += wx * wz * node(i1, j1);
    out.value = v;
    return out;
}

EffectiveHamiltonianTable::Lookup EffectiveHamiltonianTable::lookup(const Vec& x, const Vec& z) const {
    return lookup_coords(x_coord(x), z_coord(z));
}

double EffectiveHamiltonianTable::max_ci() const { return ci.size() ? ci.maxCoeff() : 0.0; }

bool EffectiveHamiltonianTable::all_valid() const {
    for (const auto& row : valid)
        for (char v : row)
            if (!v) return false;
    return true;
}

void EffectiveHamiltonianTable::certify() {
    concave_ok = lipschitz_ok = true;
    certificate_failures.clear();
    const std::size_t nx = x_grid.size(), nz = z_grid.size();
    auto sd = [&](std::size_t i, std::size_t j) { return ci(Eigen::Index(i), Eigen::Index(j)) / 1.96; };
    auto val = [&](std::size_t i, std::size_t j) { return values(Eigen::Index(i), Eigen::Index(j)); };
    std::ostringstream os;
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t a = 0; a < nz; ++a)
            for (std::size_t k = a + 1; k < nz; ++k)
                for (std::size_t b = k + 1; b < nz; ++b) {
                    if (!valid[i][a] || !valid[i][k] || !valid[i][b]) continue;
                    const double w = (z_grid[b] - z_grid[k]) / (z_grid[b] - z_grid[a]);
                    const double chord = w * val(i, a) + (1.0 - w) * val(i, b);
                    const double sigma = std::sqrt(sd(i, k) * sd(i, k) + w * w * sd(i, a) * sd(i, a) +
                                                   (1 - w) * (1 - w) * sd(i, b) * sd(i, b));
                    if (val(i, k) < chord - 3.0 * sigma - 1e-12) {
                        concave_ok = false;
                        os.str("");
                        os << "concavity at x=" << x_grid[i] << " z=(" << z_grid[a] << "," << z_grid[k] << ","
                           << z_grid[b] << "): " << val(i, k) << " < " << chord << " - 3*" << sigma;
                        certificate_failures.push_back(os.str());
                    }
                }
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < nz; ++j)
            for (std::size_t i2 = 0; i2 < nx; ++i2)
                for (std::size_t j2 = 0; j2 < nz; ++j2) {
                    if (i2 * nz + j2 <= i * nz + j || !valid[i][j] || !valid[i2][j2]) continue;
                    const double dx = (x_node(i) - x_node(i2)).norm();
                    const double dz = (z_node(j) - z_node(j2)).norm();
                    const double zmin = std::min(z_node(j).norm(), z_node(j2).norm());
                    const double bound = L1x * (1.0 + zmin) * dx + L1z * dz;
                    const double allowance = 3.0 * std::hypot(sd(i, j), sd(i2, j2));
                    const double diff = std::abs(val(i, j) - val(i2, j2));
                    if (diff > bound + allowance + 1e-12) {
                        lipschitz_ok = false;
                        os.str("");
                        os << "lipschitz at (" << x_grid[i] << "," << z_grid[j] << ")-(" << x_grid[i2] << ","
                           << z_grid[j2] << "): " << diff << " > " << bound << " + " << allowance;
                        certificate_failures.push_back(os.str());
                    }
                }
}

namespace {

void write_vec(std::ostream& os, const char* key, const Vec& v) {
    os << "# " << key;
    for (Eigen::Index k = 0; k < v.size(); ++k) os << ',' << v[k];
    os << '\n';
}

Vec parse_vec(const std::string& rest) {
    std::vector<double> vals;
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) vals.push_back(std::stod(tok));
    return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

void EffectiveHamiltonianTable::write_csv(std::ostream& os) const {
    os << std::setprecision(17);
    os << "# twoscale lambda table v1\n";
    os << "# method," << method << '\n';
    write_vec(os, "x_ref", x_ref);
    write_vec(os, "x_dir", x_dir);
    write_vec(os, "z_dir", z_dir);
    os << "# L1x," << L1x << "\n# L1z," << L1z << '\n';
    os << "# concave_ok," << concave_ok << "\n# lipschitz_ok," << lipschitz_ok << '\n';
    for (const auto& f : certificate_failures) os << "# failure," << f << '\n';
    os << "i,j,x,z,lambda,ci,valid\n";
    for (std::size_t i = 0; i < x_grid.size(); ++i)
        for (std::size_t j = 0; j < z_grid.size(); ++j)
            os << i << ',' << j << ',' << x_grid[i] << ',' << z_grid[j] << ','
               << values(Eigen::Index(i), Eigen::Index(j)) << ',' << ci(Eigen::Index(i), Eigen::Index(j)) << ','
               << int(valid[i][j]) << '\n';
}

EffectiveHamiltonianTable EffectiveHamiltonianTable::read_csv(std::istream& is) {
    EffectiveHamiltonianTable t;
    std::string line;
    struct Row {
        std::size_t i, j;
        double x, z, v, c;
        int ok;
    };
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            const std::string key = line.substr(2, comma - 2), rest = line.substr(comma + 1);
            if (key == "method") t.method = rest;
            else if (key == "x_ref") t.x_ref = parse_vec(rest);
            else if (key == "x_dir") t.x_dir = parse_vec(rest);
            else if (key == "z_dir") t.z_dir = parse_vec(rest);
            else if (key == "L1x") t.L1x = std::stod(rest);
            else if (key == "L1z") t.L1z = std::stod(rest);
            else if (key == "concave_ok") t.concave_ok = rest == "1";
            else if (key == "lipschitz_ok") t.lipschitz_ok = rest == "1";
            else if (key == "failure") t.certificate_failures.push_back(rest);
            continue;
        }
        if (line.rfind("i,", 0) == 0) continue;
        std::stringstream ss(line);
        Row r{};
        char c;
        ss >> r.i >> c >> r.j >> c >> r.x >> c >> r.z >> c >> r.v >> c >> r.c >> c >> r.ok;
        if (!ss) throw ValidationError("config", "malformed lambda table row: " + line);
        rows.push_back(r);
    }
    if (rows.empty()) throw ValidationError("config", "lambda table has no rows");
    std::size_t nx = 0, nz = 0;
    for (const auto& r : rows) {
        nx = std::max(nx, r.i + 1);
        nz = std::max(nz, r.j + 1);
    }
    if (rows.size() != nx * nz) throw ValidationError("config", "lambda table is not a full grid");
    t.x_grid.assign(nx, 0.0);
    t.z_grid.assign(nz, 0.0);
    t.values = Mat::Zero(Eigen::Index(nx), Eigen::Index(nz));
    t.ci = t.values;
    t.valid.assign(nx, std::vector<char>(nz, 0));
    t.traces.assign(nx, std::vector<std::vector<std::pair<double, double>>>(nz));
    for (const auto& r : rows) {
        t.x_grid[r.i] = r.x;
        t.z_grid[r.j] = r.z;
        t.values(Eigen::Index(r.i), Eigen::Index(r.j)) = r.v;
        t.ci(Eigen::Index(r.i), Eigen::Index(r.j)) = r.c;
        t.valid[r.i][r.j] = static_cast<char>(r.ok);
    }
    if (t.x_dir.size() == 0 || t.z_dir.size() == 0 || t.x_ref.size() != t.x_dir.size())
        throw ValidationError("config", "lambda table metadata incomplete");
    return t;
}

namespace {

EffectiveHamiltonianTable empty_table(const LambdaTableConfig& cfg) {
    auto sorted = [](const std::vector<double>& g) {
        return !g.empty() && std::adjacent_find(g.begin(), g.end(), std::greater_equal<double>()) == g.end();
    };
    if (!sorted(cfg.x_grid) || !sorted(cfg.z_grid))
        throw ValidationError("pre", "lambda grids must be nonempty and strictly increasing");
    if (cfg.x_dir.size() == 0 || cfg.z_dir.size() == 0 || cfg.x_ref.size() != cfg.x_dir.size() ||
        cfg.x_dir.norm() == 0.0 || cfg.z_dir.norm() == 0.0)
        throw ValidationError("pre", "lambda table axes (x_ref, x_dir, z_dir) must be set and nonzero");
    EffectiveHamiltonianTable t;
    t.x_grid = cfg.x_grid;
    t.z_grid = cfg.z_grid;
    t.x_ref = cfg.x_ref;
    t.x_dir = cfg.x_dir;
    t.z_dir = cfg.z_dir;
    t.L1x = cfg.L1x;
    t.L1z = cfg.L1z;
    const auto nx = Eigen::Index(cfg.x_grid.size()), nz = Eigen::Index(cfg.z_grid.size());
    t.values = Mat::Constant(nx, nz, std::numeric_limits<double>::quiet_NaN());
    t.ci = Mat::Zero(nx, nz);
    t.valid.assign(cfg.x_grid.size(), std::vector<char>(cfg.z_grid.size(), 0));
    t.traces.assign(cfg.x_grid.size(), std::vector<std::vector<std::pair<double, double>>>(cfg.z_grid.size()));
    return t;
}

}  // namespace

EffectiveHamiltonianTable build_lambda_table(const ModelSpec& spec, const LambdaTableConfig& cfg) {
    EffectiveHamiltonianTable t = empty_table(cfg);
    t.method = cfg.method == LambdaMethod::TimeAverage ? "time_average" : "ergodic_bsde";
    const double horizon = cfg.ergodic.horizon > 0.0 ? cfg.ergodic.horizon : 20.0 / spec.mu;
    for (std::size_t i = 0; i < t.x_grid.size(); ++i)
        for (std::size_t j = 0; j < t.z_grid.size(); ++j) {
            const std::uint64_t node_seed = mix_seed(cfg.seed, i * t.z_grid.size() + j);
            const Vec x = t.x_node(i), z = t.z_node(j);
            try {
                Estimate e;
                if (cfg.method == LambdaMethod::TimeAverage) {
                    e = estimate_lambda_time_average(spec, x, z, horizon, cfg.ergodic.dt, cfg.ergodic.n_paths,
                                                     node_seed, cfg.ergodic.q0);
                } else {
                    const ErgodicSolution s = solve_ergodic_bsde(spec, x, z, cfg.ergodic, node_seed);
                    e = s.lambda;
                    t.traces[i][j] = s.discount_trace;
                }
                t.values(Eigen::Index(i), Eigen::Index(j)) = e.value;
                t.ci(Eigen::Index(i), Eigen::Index(j)) = e.ci;
                t.valid[i][j] = 1;
            } catch (const std::exception& ex) {
                std::ostringstream os;
                os << "node (" << i << "," << j << "): " << ex.what();
                t.node_errors.push_back(os.str());
            }
        }
    t.certify();
    return t;
}

EffectiveHamiltonianTable tabulate_lambda(const std::function<double(const Vec& x, const Vec& z)>& lambda,
                                          const LambdaTableConfig& cfg) {
    EffectiveHamiltonianTable t = empty_table(cfg);
    t.method = "analytic";
    for (std::size_t i = 0; i < t.x_grid.size(); ++i)
        for (std::size_t j = 0; j < t.z_grid.size(); ++j) {
            t.values(Eigen::Index(i), Eigen::Index(j)) = lambda(t.x_node(i), t.z_node(j));
            t.valid[i][j] = 1;
        }
    t.certify();
    return t;
}

}  // namespace twoscale
