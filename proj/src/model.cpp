// SPDX-License-Identifier: MIT
#include "twoscale/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace twoscale {

namespace {

class Prober {
public:
    explicit Prober(const ProbeConfig& cfg) : cfg_(cfg), gen_(cfg.seed) {}

    Vec point(std::size_t dim) {
        Vec v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = cfg_.scale * normal_(gen_);
        return v;
    }

    /// A perturbation whose size spans several decades, so that both local
    /// slopes and global differences get probed.
    Vec perturbation(std::size_t dim) {
        const double size = cfg_.scale * std::pow(10.0, -3.0 * unit_(gen_));
        Vec v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = normal_(gen_);
        const double n = v.norm();
        return n > 0 ? Vec(v * (size / n)) : v;
    }

    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }

private:
    const ProbeConfig& cfg_;
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

[[noreturn]] void reject(const HypothesisCheck& c) { throw ValidationError(c.hypothesis, c.detail); }

}  // namespace

bool ValidationReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.passed ? "[ok]   " : "[FAIL] ") << c.hypothesis << "  stat=" << fmt(c.statistic)
           << "  threshold=" << fmt(c.threshold) << "  " << c.detail << '\n';
    }
    return os.str();
}

std::optional<Mat> right_inverse(const Mat& R) {
    const Mat gram = R * R.transpose();
    Eigen::FullPivLU<Mat> lu(gram);
    if (!lu.isInvertible()) return std::nullopt;
    return Mat(R.transpose() * lu.inverse());
}

DissipativityWitness search_dissipativity_witness(const SpectralOperator& B, const FastDrift& F,
                                                  std::size_t slow_dim, const ProbeConfig& probes) {
    Prober pr(probes);
    const std::size_t m = B.dimension();
    DissipativityWitness best;
    best.ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < probes.n_probes; ++i) {
        Vec x = pr.point(slow_dim);
        // bias half of the probes towards the origin where nonlinearities are steepest
        Vec q = (i % 2 == 0) ? pr.point(m) : Vec(pr.point(m) * 0.05);
        Vec qp = q + pr.perturbation(m);
        const Vec d = q - qp;
        const double dd = d.squaredNorm();
        if (dd == 0.0) continue;
        const double r = (B.apply(d) + F(x, q) - F(x, qp)).dot(d) / dd;
        if (r > best.ratio) best = {r, x, q, qp};
    }
    return best;
}

ModelSpec build_model(const RawModel& raw, const ProbeConfig& probes) {
    if (probes.n_probes < 100) throw ValidationError("pre", "probe budget must be >= 100");
    const std::size_t n = raw.A.dimension();
    const std::size_t m = raw.B.dimension();
    if (n == 0 || m == 0) throw ValidationError("pre", "operators must have dimension >= 1");
    if (n != m) throw ValidationError("pre", "eigenvalue vectors of A and B must have equal dimension");
    if (!raw.F) throw ValidationError("pre", "fast drift F missing");
    if (!raw.h) throw ValidationError("pre", "terminal cost h missing");
    if (!raw.control && !raw.driver) throw ValidationError("pre", "either control data or a driver is required");
    if (raw.R.matrix.rows() != static_cast<Eigen::Index>(n))
        throw ValidationError("pre", "R must map the noise space into the slow space");
    if (raw.G.matrix.rows() != static_cast<Eigen::Index>(m))
        throw ValidationError("pre", "G must map the noise space into the fast space");
    if (raw.x0.size() != static_cast<Eigen::Index>(n) || raw.q0.size() != static_cast<Eigen::Index>(m))
        throw ValidationError("pre", "initial state has wrong dimension");

    ValidationReport report;
    auto record = [&](HypothesisCheck c) {
        report.checks.push_back(c);
        if (!c.passed) reject(c);
    };

    // A.1: generators with finite spectrum
    {
        HypothesisCheck c{"A.1", raw.A.eigenvalues.allFinite() && raw.B.eigenvalues.allFinite(),
                          std::max(raw.A.eigenvalues.cwiseAbs().maxCoeff(), raw.B.eigenvalues.cwiseAbs().maxCoeff()),
                          0.0, "diagonal generators with finite eigenvalues"};
        if (!c.passed) c.detail = "non-finite eigenvalue";
        record(c);
    }

    // A.5 (enforced as strong dissipativity of B)
    const double m_B = raw.B.dissipativity();
    record({"A.5", m_B > 0.0, m_B, 0.0,
            m_B > 0.0 ? "B strongly dissipative" : "B is not strongly dissipative (max eigenvalue >= 0)"});

    // A.2: F bounded and Lipschitz
    {
        ProbeConfig pc = probes;
        pc.seed = mix_seed(probes.seed, 2);
        Prober pr(pc);
        double sup_f = 0.0, worst = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < probes.n_probes; ++i) {
            const Vec x = pr.point(n), q = pr.point(m);
            const Vec dx = pr.perturbation(n), dq = pr.perturbation(m);
            const Vec f1 = raw.F(x, q), f2 = raw.F(x + dx, q + dq);
            if (!f1.allFinite() || !f2.allFinite()) finite = false;
            sup_f = std::max({sup_f, f1.norm(), f2.norm()});
            worst = std::max(worst, (f1 - f2).norm() / (dx.norm() + dq.norm()));
        }
        const bool lip_ok = worst <= raw.F_lipschitz * (1.0 + probes.lipschitz_slack);
        const bool bound_ok = finite && (raw.F_bound <= 0.0 || sup_f <= raw.F_bound * (1.0 + probes.lipschitz_slack));
        std::string detail = "sup|F|=" + fmt(sup_f) + ", empirical L_F=" + fmt(worst);
        if (!finite) detail = "F not finite on probes";
        else if (!bound_ok) detail = "F exceeds declared bound: " + detail;
        else if (!lip_ok) detail = "empirical Lipschitz ratio " + fmt(worst) + " exceeds L_F=" + fmt(raw.F_lipschitz);
        record({"A.2", lip_ok && bound_ok, worst, raw.F_lipschitz, detail});
    }

    // A.3: dissipativity of B + F with μ = m_B − L_F
    const double mu = m_B - raw.F_lipschitz;
    {
        ProbeConfig pc = probes;
        pc.seed = mix_seed(probes.seed, 3);
        const auto w = search_dissipativity_witness(raw.B, raw.F, n, pc);
        if (mu <= 0.0) {
            std::string detail = "dissipativity margin <= 0 (m_B=" + fmt(m_B) + ", L_F=" + fmt(raw.F_lipschitz) + ")";
            if (w.ratio >= 0.0) {
                std::ostringstream os;
                os << "; witness x=" << w.x.transpose() << " q=" << w.q.transpose() << " q'=" << w.q_prime.transpose()
                   << " ratio=" << fmt(w.ratio);
                detail += os.str();
            }
            record({"A.3", false, w.ratio, 0.0, detail});
        }
        const bool ok = w.ratio <= -mu * (1.0 - 1e-9);
        record({"A.3", ok, w.ratio, -mu,
                ok ? "mu=" + fmt(mu) : "probe pair violates the inner-product inequality with mu=" + fmt(mu)});
    }

    // A.4: R admits a bounded right inverse
    NoiseMap R = raw.R;
    {
        if (!R.right_inverse) R.right_inverse = right_inverse(R.matrix);
        double defect = std::numeric_limits<double>::infinity();
        if (R.right_inverse && R.right_inverse->rows() == R.matrix.cols() &&
            R.right_inverse->cols() == R.matrix.rows()) {
            defect = (R.matrix * *R.right_inverse - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
        }
        record({"A.4", defect <= 1e-12, defect, 1e-12,
                defect <= 1e-12 ? "R right-invertible" : "R not right-invertible"});
    }

    // B.3 (boundedness part) and B.4 / C.1
    {
        ProbeConfig pc = probes;
        pc.seed = mix_seed(probes.seed, 4);
        Prober pr(pc);
        const Vec zero_z = Vec::Zero(R.matrix.cols());
        const Vec zero_xi = Vec::Zero(raw.G.matrix.cols());
        ModelSpec tmp;  // only to reuse psi dispatch
        tmp.A = raw.A;
        tmp.B = raw.B;
        tmp.R = R;
        tmp.G = raw.G;
        tmp.control = raw.control;
        tmp.driver = raw.driver;
        double sup_psi = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < probes.n_probes; ++i) {
            const double v = tmp.psi(pr.point(n), pr.point(m), zero_z, zero_xi);
            if (!std::isfinite(v)) finite = false;
            sup_psi = std::max(sup_psi, std::abs(v));
        }
        record({"B.3", finite, sup_psi, 0.0, finite ? "sup|psi(x,q,0,0)|=" + fmt(sup_psi) : "psi(x,q,0,0) not finite"});

        if (raw.h_lipschitz > 0.0 && !raw.control) {
            double worst = 0.0;
            for (std::size_t i = 0; i < probes.n_probes; ++i) {
                const Vec x = pr.point(n), dx = pr.perturbation(n);
                worst = std::max(worst, std::abs(raw.h(x + dx) - raw.h(x)) / dx.norm());
            }
            record({"B.4", worst <= raw.h_lipschitz * (1.0 + probes.lipschitz_slack), worst, raw.h_lipschitz,
                    "empirical Lipschitz constant of h=" + fmt(worst)});
        }

        if (raw.control) {
            const auto& c = *raw.control;
            if (c.control_grid.empty()) record({"C.1", false, 0.0, 0.0, "empty control grid"});
            const double M = c.bound_M * (1.0 + probes.lipschitz_slack);
            const double L = c.lipschitz_L * (1.0 + probes.lipschitz_slack);
            double sup_b = 0, sup_l = 0, sup_rho = 0, sup_h = 0, lip_b = 0, lip_l = 0, lip_h = 0;
            for (const auto& a : c.control_grid) sup_rho = std::max(sup_rho, c.rho(a).norm());
            for (std::size_t i = 0; i < probes.n_probes; ++i) {
                const auto& a = c.control_grid[pr.index(c.control_grid.size())];
                const Vec x = pr.point(n), q = pr.point(m);
                const Vec dx = pr.perturbation(n), dq = pr.perturbation(m);
                const Vec b1 = c.b(x, q, a), b2 = c.b(x + dx, q + dq, a);
                const double l1 = c.l(x, q, a), l2 = c.l(x + dx, q + dq, a);
                const double h1 = raw.h(x), h2 = raw.h(x + dx);
                sup_b = std::max({sup_b, b1.norm(), b2.norm()});
                sup_l = std::max({sup_l, std::abs(l1), std::abs(l2)});
                sup_h = std::max({sup_h, std::abs(h1), std::abs(h2)});
                lip_b = std::max(lip_b, (b1 - b2).norm() / (dx.norm() + dq.norm()));
                lip_l = std::max(lip_l, std::abs(l1 - l2) / (dx.norm() + dq.norm()));
                lip_h = std::max(lip_h, std::abs(h1 - h2) / dx.norm());
            }
            const double sup_all = std::max({sup_b, sup_l, sup_rho, sup_h});
            const double lip_all = std::max({lip_b, lip_l, lip_h});
            record({"C.1", sup_all <= M, sup_all, c.bound_M,
                    sup_all <= M ? "bounds |b|,|l|,|rho|,|h| <= M"
                                 : "bound violated: |b|=" + fmt(sup_b) + " |l|=" + fmt(sup_l) + " |rho|=" +
                                       fmt(sup_rho) + " |h|=" + fmt(sup_h)});
            record({"C.1", lip_all <= L, lip_all, c.lipschitz_L,
                    lip_all <= L ? "Lipschitz ratios of b, l, h <= L"
                                 : "Lipschitz violated: b=" + fmt(lip_b) + " l=" + fmt(lip_l) + " h=" + fmt(lip_h)});
        }
    }

    ModelSpec spec;
    spec.A = raw.A;
    spec.B = raw.B;
    spec.F = raw.F;
    spec.F_lipschitz = raw.F_lipschitz;
    spec.R = std::move(R);
    spec.G = raw.G;
    spec.control = raw.control;
    spec.driver = raw.driver;
    spec.h = raw.h;
    spec.driver_constants = raw.driver_constants;
    spec.mu = mu;
    spec.x0 = raw.x0;
    spec.q0 = raw.q0;
    spec.report = std::move(report);
    return spec;
}

}  // namespace twoscale
