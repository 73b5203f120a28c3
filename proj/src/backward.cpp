// SPDX-License-Identifier: MIT
#include "twoscale/backward.hpp"

#include <algorithm>
#include <cmath>

namespace twoscale {

BackwardInputs inputs_from_bundle(const PathBundle& b, bool use_x, bool use_q, bool use_dw1, bool use_dw2) {
    BackwardInputs in;
    in.n_paths = b.n_paths;
    in.n_steps = b.grid.n_steps;
    in.dt = b.grid.dt();
    const std::size_t nx = use_x ? b.slow_dim : 0, nq = use_q ? b.fast_dim : 0;
    const std::size_t n1 = use_dw1 ? b.noise1_dim : 0, n2 = use_dw2 ? b.noise2_dim : 0;
    in.state_dim = nx + nq;
    in.noise_dim = n1 + n2;
    const PathBundle* pb = &b;
    in.state = [pb, nx, nq](std::size_t p, std::size_t i, double* out) {
        if (nx) std::copy_n(pb->x(p, i).data(), nx, out);
        if (nq) std::copy_n(pb->q(p, i).data(), nq, out + nx);
    };
    in.noise = [pb, n1, n2](std::size_t p, std::size_t i, double* out) {
        if (n1) std::copy_n(pb->dw1(p, i).data(), n1, out);
        if (n2) std::copy_n(pb->dw2(p, i).data(), n2, out + n1);
    };
    return in;
}

namespace {

Mat gather(const BackwardInputs& in, const SampleAccessor& acc, std::size_t dim, std::size_t step) {
    Mat m(in.n_paths, dim);
    parallel_for(in.n_paths, [&](std::size_t p) {
        double buf[128];
        acc(p, step, buf);
        for (std::size_t k = 0; k < dim; ++k) m(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = buf[k];
    });
    return m;
}

}  // namespace

BackwardResult run_backward(const BackwardInputs& in) {
    if (in.n_paths < 2 || in.n_steps < 1 || !(in.dt > 0.0))
        throw ValidationError("pre", "backward induction needs >= 2 paths, >= 1 step and dt > 0");
    if (in.terminal.size() != in.n_paths) throw ValidationError("pre", "terminal values must match n_paths");
    if (in.state_dim > 128 || in.noise_dim > 128) throw ValidationError("pre", "state/noise dimension above 128");
    if (!in.driver) throw ValidationError("pre", "backward induction needs a driver");

    const std::size_t N = in.n_steps, P = in.n_paths;
    const double dt = in.dt;
    const double disc = std::exp(-in.discount * dt);
    BackwardResult r;
    r.y_fits.resize(N);
    r.gradient_fits.resize(N);
    r.residuals.assign(N, 0.0);

    Vec s_next = Eigen::Map<const Vec>(in.terminal.data(), static_cast<Eigen::Index>(P));
    Vec y_next = s_next;
    Vec psi(static_cast<Eigen::Index>(P));
    for (std::size_t ii = N; ii-- > 0;) {
        const Mat states = gather(in, in.state, in.state_dim, ii);
        const Mat noise = gather(in, in.noise, in.noise_dim, ii);

        Mat grad;
        if (in.noise_dim > 0) {
            const RegressionFit cond_mean = fit_regression(states, y_next, in.degree, ii);
            const Vec centered = y_next - predict_all(cond_mean, states).col(0);
            const Mat target = (noise.array().colwise() * centered.array()).matrix() / dt;
            r.gradient_fits[ii] = fit_regression(states, target, in.degree, ii);
            grad = predict_all(r.gradient_fits[ii], states);
            r.max_condition = std::max({r.max_condition, cond_mean.condition, r.gradient_fits[ii].condition});
        } else {
            grad = Mat::Zero(static_cast<Eigen::Index>(P), 0);
        }

        parallel_for(P, [&](std::size_t p) {
            const auto pe = static_cast<Eigen::Index>(p);
            double sbuf[128], gbuf[128];
            for (std::size_t k = 0; k < in.state_dim; ++k) sbuf[k] = states(pe, static_cast<Eigen::Index>(k));
            for (std::size_t k = 0; k < in.noise_dim; ++k) gbuf[k] = grad(pe, static_cast<Eigen::Index>(k));
            psi[pe] = in.driver(ii, p, {sbuf, in.state_dim}, {gbuf, in.noise_dim});
        });
        if (!psi.allFinite()) throw NumericalError("non-finite driver value at step " + std::to_string(ii));

        const Vec s_cur = disc * s_next + dt * psi;
        r.y_fits[ii] = fit_regression(states, s_cur, in.degree, ii);
        r.max_condition = std::max(r.max_condition, r.y_fits[ii].condition);
        const Vec y_cur = predict_all(r.y_fits[ii], states).col(0);

        if (in.noise_dim > 0) {
            Vec defect = disc * y_next + dt * psi - y_cur;
            defect -= (noise.array() * grad.array()).rowwise().sum().matrix();
            r.residuals[ii] = (noise.transpose() * defect).norm() / (static_cast<double>(P) * dt);
        }
        s_next = s_cur;
        y_next = y_cur;
    }
    r.realized0.assign(s_next.data(), s_next.data() + P);
    r.y0 = mean_ci(r.realized0);
    return r;
}

double step_process_gap(const BackwardInputs& in, const BackwardResult& r, std::size_t coarsening) {
    if (coarsening == 0) throw ValidationError("pre", "coarsening must be positive");
    if (in.noise_dim == 0) return 0.0;
    std::vector<double> per_path(in.n_paths, 0.0);
    parallel_for(in.n_paths, [&](std::size_t p) {
        std::vector<double> s(in.state_dim), sc(in.state_dim);
        double acc = 0.0;
        for (std::size_t i = 0; i < in.n_steps; ++i) {
            const std::size_t c = i - i % coarsening;
            in.state(p, i, s.data());
            in.state(p, c, sc.data());
            const Vec zi = r.gradient_fits[i].predict(s);
            const Vec zc = r.gradient_fits[c].predict(sc);
            acc += (zi - zc).squaredNorm() * in.dt;
        }
        per_path[p] = acc;
    });
    return mean_ci(per_path).value;
}

}  // namespace twoscale
