// SPDX-License-Identifier: MIT
#include "twoscale/regression.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace twoscale {

namespace {

void enumerate(std::size_t d, int degree, std::vector<int>& cur, std::size_t pos, int remaining,
               std::vector<std::vector<int>>& out) {
    if (pos == d) {
        if (remaining == 0) out.push_back(cur);
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        cur[pos] = e;
        enumerate(d, degree, cur, pos + 1, remaining - e, out);
    }
    cur[pos] = 0;
}

std::vector<std::vector<int>> monomials_up_to(std::size_t d, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(d, 0);
    for (int k = 1; k <= degree; ++k) enumerate(d, k, cur, 0, k, out);
    return out;
}

}  // namespace

void RegressionFit::features(const double* state, double* out) const {
    double z[64];
    for (std::size_t j = 0; j < active.size(); ++j) z[j] = (state[active[j]] - center[j]) / scale[j];
    for (std::size_t k = 0; k < monomials.size(); ++k) {
        double v = 1.0;
        const auto& m = monomials[k];
        for (std::size_t j = 0; j < m.size(); ++j)
            for (int e = 0; e < m[j]; ++e) v *= z[j];
        out[k] = v;
    }
}

Vec RegressionFit::predict(std::span<const double> state) const {
    Vec f(monomials.size());
    features(state.data(), f.data());
    return coef.row(0).transpose() + coef.bottomRows(monomials.size()).transpose() * f;
}

double RegressionFit::predict(std::span<const double> state, std::size_t output) const {
    Vec f(monomials.size());
    features(state.data(), f.data());
    const auto col = static_cast<Eigen::Index>(output);
    return coef(0, col) + coef.col(col).tail(monomials.size()).dot(f);
}

RegressionFit RegressionFit::select_outputs(std::size_t first, std::size_t count) const {
    RegressionFit r = *this;
    r.coef = coef.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
    return r;
}

std::string RegressionFit::describe() const {
    std::ostringstream os;
    os << "poly(total_degree=" << degree << ";active=" << active.size() << "/" << state_dim
       << ";basis=" << basis_size() << ")";
    return os.str();
}

RegressionFit fit_regression(const Mat& states, const Mat& targets, int degree, std::size_t step) {
    const Eigen::Index n = states.rows();
    if (n < 1 || targets.rows() != n) throw ValidationError("pre", "regression needs matching nonempty samples");
    RegressionFit fit;
    fit.degree = degree;
    fit.state_dim = static_cast<std::size_t>(states.cols());

    std::vector<double> c, s;
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
        const double mean = states.col(j).mean();
        const double sd = std::sqrt((states.col(j).array() - mean).square().mean());
        if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
            fit.active.push_back(j);
            c.push_back(mean);
            s.push_back(sd);
        }
    }
    if (fit.active.size() > 64) throw ValidationError("pre", "regression supports at most 64 state coordinates");
    fit.center = Eigen::Map<Vec>(c.data(), static_cast<Eigen::Index>(c.size()));
    fit.scale = Eigen::Map<Vec>(s.data(), static_cast<Eigen::Index>(s.size()));
    fit.monomials = monomials_up_to(fit.active.size(), degree);

    const auto nf = static_cast<Eigen::Index>(fit.monomials.size());
    const Eigen::RowVectorXd tmean = targets.colwise().mean();
    fit.coef = Mat::Zero(1 + nf, targets.cols());
    fit.coef.row(0) = tmean;
    if (nf == 0) return fit;

    Mat phi(n, nf);
    Vec row(nf);
    for (Eigen::Index p = 0; p < n; ++p) {
        const Vec st = states.row(p).transpose();
        fit.features(st.data(), row.data());
        phi.row(p) = row.transpose();
    }
    const Eigen::RowVectorXd fmean = phi.colwise().mean();
    phi.rowwise() -= fmean;
    Mat gram = (phi.transpose() * phi) / static_cast<double>(n);
    gram.diagonal().array() += kRidge;
    const Mat rhs = phi.transpose() * (targets.rowwise() - tmean) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    fit.condition = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(fit.condition <= kMaxCondition)) {
        std::ostringstream os;
        os << "regression rank-deficient at step " << step << " (condition " << fit.condition << ")";
        throw NumericalError(os.str());
    }
    const Mat beta = gram.ldlt().solve(rhs);
    fit.coef.bottomRows(nf) = beta;
    fit.coef.row(0) = tmean - fmean * beta;
    return fit;
}

Mat predict_all(const RegressionFit& fit, const Mat& states) {
    const auto nf = static_cast<Eigen::Index>(fit.monomials.size());
    Mat out(states.rows(), fit.coef.cols());
    Vec f(nf);
    for (Eigen::Index p = 0; p < states.rows(); ++p) {
        const Vec st = states.row(p).transpose();
        fit.features(st.data(), f.data());
        out.row(p) = fit.coef.row(0) + (fit.coef.bottomRows(nf).transpose() * f).transpose();
    }
    return out;
}

}  // namespace twoscale
