// SPDX-License-Identifier: MIT
#include "twoscale/forward.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

namespace twoscale {

namespace {

Mat symmetric_sqrt(const Mat& cov) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov + cov.transpose()));
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// (e^{s dt} − 1)/s with the s → 0 limit.
double phi_weight(double s, double dt) {
    if (std::abs(s * dt) < 1e-14) return dt;
    return std::expm1(s * dt) / s;
}

}  // namespace

void TimeGrid::validate() const {
    if (n_steps == 0 || !(t1 > t0)) throw ValidationError("pre", "time grid needs t1 > t0 and n_steps >= 1");
}

Vec PathBundle::x_vec(std::size_t path, std::size_t step) const { return as_vec(x(path, step)); }
Vec PathBundle::q_vec(std::size_t path, std::size_t step) const { return as_vec(q(path, step)); }

SlowStepper::SlowStepper(const SpectralOperator& A, const Mat& R, double dt) : dt_(dt) {
    const Eigen::Index n = A.eigenvalues.size();
    const Eigen::Index d = R.cols();
    const Vec& a = A.eigenvalues;
    decay_ = A.semigroup(dt);
    phi_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) phi_[i] = phi_weight(a[i], dt);

    const Mat RRt = R * R.transpose();
    Mat cov_eta(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) cov_eta(i, j) = RRt(i, j) * phi_weight(a[i] + a[j], dt);
    Mat cov_cross(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index l = 0; l < d; ++l) cov_cross(i, l) = R(i, l) * phi_[i];

    marginal_sqrt_ = symmetric_sqrt(cov_eta);
    regression_ = cov_cross / dt;
    conditional_sqrt_ = symmetric_sqrt(cov_eta - cov_cross * cov_cross.transpose() / dt);
}

void SlowStepper::draw(const NormalStream& brownian, const NormalStream& residual, std::uint64_t step, Vec& dW,
                       Vec& eta) const {
    dW.resize(regression_.cols());
    Vec xi2(conditional_sqrt_.cols());
    brownian.fill(step, {dW.data(), static_cast<std::size_t>(dW.size())});
    residual.fill(step, {xi2.data(), static_cast<std::size_t>(xi2.size())});
    dW *= std::sqrt(dt_);
    eta = regression_ * dW + conditional_sqrt_ * xi2;
}

Vec SlowStepper::advance(const Vec& x, const Vec& eta, const Vec* drift) const {
    Vec out = decay_.cwiseProduct(x) + eta;
    if (drift) out += phi_.cwiseProduct(*drift);
    return out;
}

Vec SlowStepper::marginal_step(const Vec& x, const Vec& gaussian_draw) const {
    return decay_.cwiseProduct(x) + marginal_sqrt_ * gaussian_draw;
}

Vec slow_step_variance(const SpectralOperator& A, const Vec& r_diag, double dt) {
    Vec v(A.eigenvalues.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = r_diag[k] * r_diag[k] * phi_weight(2.0 * A.eigenvalues[k], dt);
    return v;
}

Vec step_slow_exact(const SpectralOperator& A, const Mat& R, const Vec& x, double dt, const Vec& gaussian_draw) {
    if (!(dt > 0.0)) throw ValidationError("pre", "dt must be positive");
    return SlowStepper(A, R, dt).marginal_step(x, gaussian_draw);
}

Vec step_fast_semi_implicit(const SpectralOperator& B, const FastDrift& F, const Mat& G, const Vec& q,
                            const Vec& x, double dt, double eps, const Vec& gaussian_draw, const Vec* extra_drift) {
    const double h = dt / eps;
    Vec rhs = q + std::sqrt(h) * (G * gaussian_draw);
    if (F) rhs += h * F(x, q);
    if (extra_drift) rhs += h * *extra_drift;
    return rhs.cwiseQuotient((1.0 - h * B.eigenvalues.array()).matrix());
}

Vec step_fast_semi_implicit(const ModelSpec& spec, const Vec& q, const Vec& x, double dt, double eps,
                            const Vec& gaussian_draw, const Vec* extra_drift) {
    if (!(dt > 0.0) || !(eps > 0.0)) throw ValidationError("pre", "dt and eps must be positive");
    return step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, q, x, dt, eps, gaussian_draw, extra_drift);
}

void require_fast_resolution(const TimeGrid& grid, double eps) {
    if (!(eps > 0.0) || eps > 1.0) throw ValidationError("pre", "eps must lie in (0, 1]");
    if (grid.dt() > eps / 10.0 * (1.0 + 1e-12))
        throw NumericalError("fast scale unresolved: dt=" + std::to_string(grid.dt()) +
                             " > eps/10=" + std::to_string(eps / 10.0));
}

namespace {

PathBundle allocate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed, std::size_t slow_dim,
                    std::size_t fast_dim, std::size_t noise1, std::size_t noise2) {
    PathBundle b;
    b.grid = grid;
    b.n_paths = n_paths;
    b.seed = seed;
    b.slow_dim = slow_dim;
    b.fast_dim = fast_dim;
    b.noise1_dim = noise1;
    b.noise2_dim = noise2;
    const std::size_t states = n_paths * (grid.n_steps + 1);
    const std::size_t incs = n_paths * grid.n_steps;
    b.X.assign(states * slow_dim, 0.0);
    b.Q.assign(states * fast_dim, 0.0);
    b.dW1.assign(incs * noise1, 0.0);
    b.dW2.assign(incs * noise2, 0.0);
    return b;
}

void store(std::vector<double>& arr, std::size_t offset, const Vec& v) {
    std::memcpy(arr.data() + offset, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

PathBundle simulate_impl(const ModelSpec& spec, double eps, const TimeGrid& grid, std::size_t n_paths,
                         std::uint64_t seed, const FastDriftHook& hook, bool with_fast) {
    grid.validate();
    if (n_paths == 0) throw ValidationError("pre", "n_paths must be positive");
    const std::size_t n = spec.slow_dim(), m = with_fast ? spec.fast_dim() : 0;
    const std::size_t d1 = static_cast<std::size_t>(spec.R.matrix.cols());
    const std::size_t d2 = with_fast ? static_cast<std::size_t>(spec.G.matrix.cols()) : 0;
    PathBundle b = allocate(grid, n_paths, seed, n, m, d1, d2);
    const SlowStepper slow(spec.A, spec.R.matrix, grid.dt());
    const double dt = grid.dt();
    const std::size_t N = grid.n_steps;

    parallel_for(n_paths, [&](std::size_t p) {
        const NormalStream w1(seed, p, Channel::SlowBrownian);
        const NormalStream res(seed, p, Channel::SlowResidual);
        const NormalStream w2(seed, p, Channel::FastBrownian);
        Vec x = spec.x0, q = spec.q0, dW, eta, xi(d2);
        store(b.X, p * (N + 1) * n, x);
        if (with_fast) store(b.Q, p * (N + 1) * m, q);
        for (std::size_t i = 0; i < N; ++i) {
            slow.draw(w1, res, i, dW, eta);
            store(b.dW1, (p * N + i) * d1, dW);
            Vec x_next = slow.advance(x, eta);
            if (with_fast) {
                w2.fill(i, {xi.data(), d2});
                store(b.dW2, (p * N + i) * d2, Vec(xi * std::sqrt(dt)));
                Vec extra;
                if (hook) extra = hook(i, p, x, q);
                q = step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, q, x, dt, eps, xi,
                                            hook ? &extra : nullptr);
                store(b.Q, (p * (N + 1) + i + 1) * m, q);
            }
            x = std::move(x_next);
            store(b.X, (p * (N + 1) + i + 1) * n, x);
        }
    });
    return b;
}

}  // namespace

PathBundle simulate_two_scale_paths(const ModelSpec& spec, double eps, const TimeGrid& grid, std::size_t n_paths,
                                    std::uint64_t seed, const FastDriftHook& extra_fast_drift) {
    require_fast_resolution(grid, eps);
    return simulate_impl(spec, eps, grid, n_paths, seed, extra_fast_drift, true);
}

PathBundle simulate_slow_paths(const ModelSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                               std::uint64_t seed) {
    return simulate_impl(spec, 1.0, grid, n_paths, seed, {}, false);
}

PathBundle simulate_frozen_fast(const ModelSpec& spec, const Vec& x, const Vec& q0, double horizon, double dt,
                                std::size_t n_paths, std::uint64_t seed, const FastDriftHook& extra,
                                const FrozenFastOptions& opts) {
    if (!(dt > 0.0) || !(horizon > 0.0)) throw ValidationError("pre", "horizon and dt must be positive");
    if (opts.enforce_mixing && horizon < 10.0 / spec.mu * (1.0 - 1e-12))
        throw ValidationError("pre", "horizon must be >= 10/mu for the frozen fast equation to mix");
    TimeGrid grid{0.0, 0.0, static_cast<std::size_t>(std::llround(horizon / dt))};
    if (grid.n_steps == 0) grid.n_steps = 1;
    grid.t1 = dt * static_cast<double>(grid.n_steps);
    const std::size_t m = spec.fast_dim();
    const std::size_t d2 = static_cast<std::size_t>(spec.G.matrix.cols());
    PathBundle b = allocate(grid, n_paths, seed, 0, m, 0, d2);
    const std::size_t N = grid.n_steps;

    Mat stationary_sqrt;
    if (opts.stationary_start) {
        const Vec& bb = spec.B.eigenvalues;
        const Mat GGt = spec.G.matrix * spec.G.matrix.transpose();
        Mat cov(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) cov(i, j) = GGt(i, j) / (-(bb[i] + bb[j]));
        stationary_sqrt = symmetric_sqrt(cov);
    }

    if (opts.warmup < 0.0) throw ValidationError("pre", "warmup must be non-negative");
    const auto warm_steps = static_cast<std::size_t>(std::llround(opts.warmup / dt));

    parallel_for(n_paths, [&](std::size_t p) {
        const NormalStream w2(seed, p, Channel::FastBrownian);
        Vec q = q0, xi(d2);
        if (opts.stationary_start) {
            Vec g(m);
            NormalStream(seed, p, Channel::Initial).fill(0, {g.data(), m});
            q = q0 + stationary_sqrt * g;
        }
        if (warm_steps) {
            const NormalStream wi(seed, p, Channel::Initial);
            for (std::size_t k = 0; k < warm_steps; ++k) {
                wi.fill(k + 1, {xi.data(), d2});
                Vec e;
                if (extra) e = extra(0, p, x, q);
                q = step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, q, x, dt, 1.0, xi, extra ? &e : nullptr);
            }
        }
        store(b.Q, p * (N + 1) * m, q);
        for (std::size_t i = 0; i < N; ++i) {
            w2.fill(i, {xi.data(), d2});
            store(b.dW2, (p * N + i) * d2, Vec(xi * std::sqrt(dt)));
            Vec e;
            if (extra) e = extra(i, p, x, q);
            q = step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, q, x, dt, 1.0, xi, extra ? &e : nullptr);
            store(b.Q, (p * (N + 1) + i + 1) * m, q);
        }
    });
    return b;
}

ContractionReport check_contraction(const ModelSpec& spec, const std::function<Vec(double)>& gamma,
                                    const std::function<Vec(double)>& gamma_prime, const TimeGrid& grid,
                                    double eps, std::size_t n_paths, std::uint64_t seed, double tolerance) {
    grid.validate();
    const double dt = grid.dt();
    const std::size_t N = grid.n_steps;
    const double rate = spec.mu / eps;
    // forcing integral I_i = ∫_0^{t_i} e^{−rate (t_i − l)} |Γ_l − Γ'_l| dl for piecewise-constant inputs
    std::vector<Vec> g(N), gp(N);
    std::vector<double> integral(N + 1, 0.0);
    const double step_weight = -std::expm1(-rate * dt) / rate;
    for (std::size_t i = 0; i < N; ++i) {
        g[i] = gamma(grid.time(i));
        gp[i] = gamma_prime(grid.time(i));
        integral[i + 1] = std::exp(-rate * dt) * integral[i] + step_weight * (g[i] - gp[i]).norm();
    }
    const std::size_t d2 = static_cast<std::size_t>(spec.G.matrix.cols());
    std::vector<double> path_ratio(n_paths, 0.0), path_K(n_paths, 0.0);
    parallel_for(n_paths, [&](std::size_t p) {
        const NormalStream w2(seed, p, Channel::FastBrownian);
        Vec q = spec.q0, qp = spec.q0, xi(d2);
        for (std::size_t i = 0; i < N; ++i) {
            w2.fill(i, {xi.data(), d2});
            q = step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, q, g[i], dt, eps, xi);
            qp = step_fast_semi_implicit(spec.B, spec.F, spec.G.matrix, qp, gp[i], dt, eps, xi);
            const double bound = spec.F_lipschitz / eps * integral[i + 1];
            if (bound > 0.0) path_ratio[p] = std::max(path_ratio[p], (q - qp).norm() / bound);
        }
        if (integral[N] > 0.0) path_K[p] = (q - qp).norm() / (integral[N] / eps);
    });
    ContractionReport r;
    for (std::size_t p = 0; p < n_paths; ++p) {
        r.max_ratio = std::max(r.max_ratio, path_ratio[p]);
        r.empirical_K = std::max(r.empirical_K, path_K[p]);
    }
    r.holds = r.max_ratio <= tolerance;
    return r;
}

namespace {
constexpr char kMagic[8] = {'T', 'S', 'P', 'B', '0', '0', '0', '1'};

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
void put_array(std::ofstream& os, const std::vector<double>& a) {
    os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
}
void get_array(std::ifstream& is, std::vector<double>& a, std::size_t n) {
    a.resize(n);
    is.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(double)));
}
}  // namespace

void write_bundle(const PathBundle& b, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    for (std::uint64_t v : {std::uint64_t(b.n_paths), std::uint64_t(b.grid.n_steps), std::uint64_t(b.slow_dim),
                            std::uint64_t(b.fast_dim), std::uint64_t(b.noise1_dim), std::uint64_t(b.noise2_dim),
                            b.seed})
        put(os, v);
    put(os, b.grid.t0);
    put(os, b.grid.t1);
    put_array(os, b.X);
    put_array(os, b.Q);
    put_array(os, b.dW1);
    put_array(os, b.dW2);
    if (!os) throw std::runtime_error("write failed: " + path);
}

PathBundle read_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a path bundle: " + path);
    PathBundle b;
    b.n_paths = get<std::uint64_t>(is);
    b.grid.n_steps = get<std::uint64_t>(is);
    b.slow_dim = get<std::uint64_t>(is);
    b.fast_dim = get<std::uint64_t>(is);
    b.noise1_dim = get<std::uint64_t>(is);
    b.noise2_dim = get<std::uint64_t>(is);
    b.seed = get<std::uint64_t>(is);
    b.grid.t0 = get<double>(is);
    b.grid.t1 = get<double>(is);
    const std::size_t states = b.n_paths * (b.grid.n_steps + 1);
    const std::size_t incs = b.n_paths * b.grid.n_steps;
    get_array(is, b.X, states * b.slow_dim);
    get_array(is, b.Q, states * b.fast_dim);
    get_array(is, b.dW1, incs * b.noise1_dim);
    get_array(is, b.dW2, incs * b.noise2_dim);
    if (!is) throw std::runtime_error("truncated bundle: " + path);
    return b;
}

void write_bundle_stats_csv(const PathBundle& b, std::ostream& os) {
    os << "step,t";
    for (std::size_t k = 0; k < b.slow_dim; ++k) os << ",mean_x" << k << ",var_x" << k;
    for (std::size_t k = 0; k < b.fast_dim; ++k) os << ",mean_q" << k << ",var_q" << k;
    os << '\n';
    const double np = static_cast<double>(b.n_paths);
    for (std::size_t i = 0; i <= b.grid.n_steps; ++i) {
        os << i << ',' << b.grid.time(i);
        auto emit = [&](auto accessor, std::size_t dim) {
            for (std::size_t k = 0; k < dim; ++k) {
                double s = 0, ss = 0;
                for (std::size_t p = 0; p < b.n_paths; ++p) {
                    const double v = accessor(p, i)[k];
                    s += v;
                    ss += v * v;
                }
                const double mean = s / np;
                os << ',' << mean << ',' << (ss / np - mean * mean);
            }
        };
        emit([&](std::size_t p, std::size_t s) { return b.x(p, s); }, b.slow_dim);
        emit([&](std::size_t p, std::size_t s) { return b.q(p, s); }, b.fast_dim);
        os << '\n';
    }
}

}  // namespace twoscale
