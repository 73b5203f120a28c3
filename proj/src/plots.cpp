// SPDX-License-Identifier: MIT
#include "twoscale/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace twoscale {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 30, kB = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

struct Series {
    std::string label;
    std::vector<double> x, y, err;
};

class Canvas {
public:
    Canvas(std::string title, std::string xl, std::string yl, bool logx, bool logy)
        : title_(std::move(title)), xl_(std::move(xl)), yl_(std::move(yl)), logx_(logx), logy_(logy) {}

    void add(Series s) { series_.push_back(std::move(s)); }
    void reference_slope(double slope) { slope_ = slope; }

    std::string render() {
        bounds();
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
           << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title_ << "</text>\n"
           << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\""
           << kH - kT - kB << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double fx = x0_ + (x1_ - x0_) * k / 4, fy = y0_ + (y1_ - y0_) * k / 4;
            os << "<text x=\"" << px(fx) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">"
               << tick(fx, logx_) << "</text>\n"
               << "<text x=\"" << kL - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << tick(fy, logy_)
               << "</text>\n";
        }
        os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">" << xl_ << "</text>\n"
           << "<text x=\"14\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 14 " << kH / 2
           << ")\" text-anchor=\"middle\">" << yl_ << "</text>\n";
        for (std::size_t s = 0; s < series_.size(); ++s) {
            const auto& S = series_[s];
            const char* col = kColors[s % std::size(kColors)];
            std::ostringstream pts;
            for (std::size_t i = 0; i < S.x.size(); ++i) {
                if (!usable(S.x[i], S.y[i])) continue;
                pts << px(tx(S.x[i])) << ',' << py(ty(S.y[i])) << ' ';
                os << "<circle cx=\"" << px(tx(S.x[i])) << "\" cy=\"" << py(ty(S.y[i])) << "\" r=\"3\" fill=\""
                   << col << "\"/>\n";
                if (i < S.err.size() && S.err[i] > 0.0) {
                    const double lo = S.y[i] - S.err[i], hi = S.y[i] + S.err[i];
                    const double ylo = logy_ && lo <= 0.0 ? y0_ : ty(lo);
                    os << "<line x1=\"" << px(tx(S.x[i])) << "\" x2=\"" << px(tx(S.x[i])) << "\" y1=\"" << py(ylo)
                       << "\" y2=\"" << py(ty(hi)) << "\" stroke=\"" << col << "\"/>\n";
                }
            }
            os << "<polyline fill=\"none\" stroke=\"" << col << "\" points=\"" << pts.str() << "\"/>\n"
               << "<text x=\"" << kW - kR - 150 << "\" y=\"" << kT + 16 + 14 * double(s) << "\" fill=\"" << col
               << "\">" << S.label << "</text>\n";
        }
        if (slope_ && !series_.empty()) {
            // reference line through the last point of the first series
            const auto& S = series_.front();
            for (std::size_t i = S.x.size(); i-- > 0;)
                if (usable(S.x[i], S.y[i])) {
                    const double ax = tx(S.x[i]), ay = ty(S.y[i]);
                    const double bx = x1_, by = ay + *slope_ * (bx - ax);
                    os << "<line x1=\"" << px(ax) << "\" y1=\"" << py(ay) << "\" x2=\"" << px(bx) << "\" y2=\""
                       << py(by) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n"
                       << "<text x=\"" << kL + 8 << "\" y=\"" << kH - kB - 8 << "\" fill=\"gray\">slope "
                       << *slope_ << " reference</text>\n";
                    break;
                }
        }
        os << "</svg>\n";
        return os.str();
    }

private:
    bool usable(double x, double y) const {
        return std::isfinite(x) && std::isfinite(y) && (!logx_ || x > 0) && (!logy_ || y > 0);
    }
    double tx(double v) const { return logx_ ? std::log10(v) : v; }
    double ty(double v) const { return logy_ ? std::log10(v) : v; }
    double px(double v) const { return kL + (v - x0_) / (x1_ - x0_) * (kW - kL - kR); }
    double py(double v) const { return kH - kB - (v - y0_) / (y1_ - y0_) * (kH - kT - kB); }
    static std::string tick(double v, bool log) {
        std::ostringstream os;
        os.precision(3);
        os << (log ? std::pow(10.0, v) : v);
        return os.str();
    }
    void bounds() {
        x0_ = y0_ = 1e300;
        x1_ = y1_ = -1e300;
        for (const auto& S : series_)
            for (std::size_t i = 0; i < S.x.size(); ++i) {
                if (!usable(S.x[i], S.y[i])) continue;
                const double e = i < S.err.size() ? S.err[i] : 0.0;
                x0_ = std::min(x0_, tx(S.x[i]));
                x1_ = std::max(x1_, tx(S.x[i]));
                y0_ = std::min(y0_, logy_ ? ty(S.y[i]) : S.y[i] - e);
                y1_ = std::max(y1_, ty(S.y[i] + e));
            }
        if (x0_ > x1_) x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
        const double dx = std::max(x1_ - x0_, 1e-9), dy = std::max(y1_ - y0_, 1e-9);
        x0_ -= 0.05 * dx, x1_ += 0.05 * dx, y0_ -= 0.08 * dy, y1_ += 0.08 * dy;
    }

    std::string title_, xl_, yl_;
    bool logx_, logy_;
    std::vector<Series> series_;
    std::optional<double> slope_;
    double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
};

}  // namespace

std::vector<std::string> emit_plots(const ConvergenceReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::string base = (std::filesystem::path(dir) / report_prefix(r)).string();
    std::vector<std::string> files;
    auto save = [&](const std::string& suffix, const std::string& svg) {
        const std::string path = base + suffix;
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path);
        os << svg;
        files.push_back(path);
    };

    Canvas err(r.name + ": |Y^eps_0 - Ybar_0|", "eps", "abs error", true, true);
    Series e{"error", {}, {}, {}};
    for (const auto& row : r.rows) {
        if (row.status != "ok") continue;
        e.x.push_back(row.eps);
        e.y.push_back(row.error);
        e.err.push_back(row.error_ci);
    }
    err.add(e);
    err.reference_slope(0.5);
    save("_error.svg", err.render());

    const auto& t = r.table;
    Canvas lam(r.name + ": effective Hamiltonian", "z coordinate", "lambda", false, false);
    for (std::size_t i = 0; i < t.x_grid.size(); ++i) {
        Series s;
        std::ostringstream label;
        label << "x = " << t.x_grid[i];
        s.label = label.str();
        for (std::size_t k = 0; k < t.z_grid.size(); ++k) {
            if (!t.valid[i][k]) continue;
            s.x.push_back(t.z_grid[k]);
            s.y.push_back(t.values(Eigen::Index(i), Eigen::Index(k)));
            s.err.push_back(t.ci(Eigen::Index(i), Eigen::Index(k)));
        }
        lam.add(std::move(s));
    }
    save("_lambda.svg", lam.render());

    Canvas tr(r.name + ": discount traces", "delta", "lambda_delta", true, false);
    std::size_t shown = 0;
    for (std::size_t i = 0; i < t.traces.size() && shown < 7; ++i)
        for (std::size_t k = 0; k < t.traces[i].size() && shown < 7; ++k) {
            if (t.traces[i][k].empty()) continue;
            Series s;
            std::ostringstream label;
            label << "(" << t.x_grid[i] << ", " << t.z_grid[k] << ")";
            s.label = label.str();
            for (const auto& [d, l] : t.traces[i][k]) {
                s.x.push_back(d);
                s.y.push_back(l);
            }
            tr.add(std::move(s));
            ++shown;
        }
    save("_trace.svg", tr.render());
    return files;
}

}  // namespace twoscale
