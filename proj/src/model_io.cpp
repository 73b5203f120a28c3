// SPDX-License-Identifier: MIT
#include "twoscale/model_io.hpp"

#include <cmath>
#include <fstream>

namespace twoscale {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw ValidationError("config", what); }

Vec to_vec(const json& j, const std::string& key) {
    if (!j.is_array()) bad(key + " must be an array of numbers");
    Vec v(Eigen::Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) bad(key + " must be an array of numbers");
        v[Eigen::Index(i)] = j[i].get<double>();
    }
    return v;
}

Mat to_mat(const json& j, const std::string& key) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) bad(key + " must be a nested array");
    const std::size_t rows = j.size(), cols = j[0].size();
    Mat m{Eigen::Index(rows), Eigen::Index(cols)};
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) bad(key + " rows must have equal length");
        m.row(Eigen::Index(r)) = to_vec(j[r], key).transpose();
    }
    return m;
}

/// "identity", a scalar multiple of I, {"diagonal": [...]} or a full matrix.
Mat noise_matrix(const json& j, std::size_t n, const std::string& key) {
    const auto N = Eigen::Index(n);
    if (j.is_string()) {
        if (j.get<std::string>() != "identity") bad(key + ": unknown noise map " + j.get<std::string>());
        return Mat::Identity(N, N);
    }
    if (j.is_number()) return j.get<double>() * Mat::Identity(N, N);
    if (j.is_object()) {
        if (!j.contains("diagonal")) bad(key + ": object form needs \"diagonal\"");
        const Vec d = to_vec(j["diagonal"], key);
        if (d.size() != N) bad(key + ": diagonal has wrong length");
        return d.asDiagonal();
    }
    return to_mat(j, key);
}

double num(const json& j, const char* key, double def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_number()) bad(std::string(key) + " must be a number");
    return j[key].get<double>();
}

Vec vec_or_zero(const json& j, const char* key, std::size_t n) {
    if (!j.contains(key)) return Vec::Zero(Eigen::Index(n));
    Vec v = to_vec(j[key], key);
    if (v.size() != Eigen::Index(n)) bad(std::string(key) + " has wrong length");
    return v;
}

FastDrift parse_fast_drift(const json& j, std::size_t n, std::size_t m) {
    const std::string type = j.value("type", "zero");
    if (type == "zero") return [m](const Vec&, const Vec&) { return Vec(Vec::Zero(Eigen::Index(m))); };
    const Mat Kx = j.contains("Kx") ? to_mat(j["Kx"], "fast_drift.Kx") : Mat::Zero(Eigen::Index(m), Eigen::Index(n));
    const Mat Kq = j.contains("Kq") ? to_mat(j["Kq"], "fast_drift.Kq") : Mat::Zero(Eigen::Index(m), Eigen::Index(m));
    if (Kx.rows() != Eigen::Index(m) || Kx.cols() != Eigen::Index(n) || Kq.rows() != Eigen::Index(m) ||
        Kq.cols() != Eigen::Index(m))
        bad("fast_drift: Kx must be fast×slow and Kq fast×fast");
    if (type == "linear") return [Kx, Kq](const Vec& x, const Vec& q) { return Vec(Kx * x + Kq * q); };
    if (type == "tanh") {
        const Vec amp = vec_or_zero(j, "amplitude", m);
        return [amp, Kx, Kq](const Vec& x, const Vec& q) {
            return Vec(amp.cwiseProduct((Kx * x + Kq * q).array().tanh().matrix()));
        };
    }
    bad("fast_drift: unknown type " + type);
}

TerminalCost parse_terminal(const json& j, std::size_t n) {
    const std::string type = j.value("type", "zero");
    if (type == "zero") return [](const Vec&) { return 0.0; };
    const Vec w = vec_or_zero(j, "weights", n);
    if (type == "linear") return [w](const Vec& x) { return w.dot(x); };
    if (type == "tanh") return [w](const Vec& x) { return w.dot(x.array().tanh().matrix()); };
    bad("terminal: unknown type " + type);
}

DriverFn parse_driver(const json& j, std::size_t n, std::size_t m, std::size_t dz) {
    const std::string type = j.value("type", "");
    if (type == "constant") {
        const double c = num(j, "value", 0.0);
        return [c](const Vec&, const Vec&, const Vec&, const Vec&) { return c; };
    }
    if (type == "linear_z") {
        const double a = num(j, "a", 0.0);
        const Vec d = vec_or_zero(j, "direction", dz);
        return [a, d](const Vec&, const Vec&, const Vec& z, const Vec&) { return a * z.dot(d); };
    }
    if (type == "quadratic_z") {
        const double k = num(j, "coefficient", 1.0);
        const Vec d = vec_or_zero(j, "direction", dz);
        return [k, d](const Vec&, const Vec&, const Vec& z, const Vec&) {
            const double t = z.dot(d);
            return -0.5 * k * t * t;
        };
    }
    if (type == "q_linear") {
        const Vec e = vec_or_zero(j, "direction", m);
        return [e](const Vec&, const Vec& q, const Vec&, const Vec&) { return e.dot(q); };
    }
    if (type == "q_square") {
        const double s = num(j, "scale", 1.0);
        return [s](const Vec&, const Vec& q, const Vec&, const Vec&) { return s * q.squaredNorm(); };
    }
    if (type == "sum") {
        if (!j.contains("terms") || !j["terms"].is_array()) bad("driver sum needs \"terms\"");
        std::vector<DriverFn> terms;
        for (const auto& t : j["terms"]) terms.push_back(parse_driver(t, n, m, dz));
        return [terms](const Vec& x, const Vec& q, const Vec& z, const Vec& xi) {
            double s = 0.0;
            for (const auto& t : terms) s += t(x, q, z, xi);
            return s;
        };
    }
    bad("driver: unknown type " + type);
}

ControlData parse_control(const json& doc, std::size_t n, std::size_t m) {
    ControlData c;
    const json& grid = doc["control_grid"];
    if (!grid.is_array() || grid.empty()) bad("control_grid must be a nonempty array");
    for (const auto& a : grid) c.control_grid.push_back(a.is_array() ? to_vec(a, "control_grid") : Vec::Constant(1, a.get<double>()));
    const auto da = c.control_grid.front().size();
    for (const auto& a : c.control_grid)
        if (a.size() != da) bad("control points must share one dimension");
    const json cj = doc.value("control", json::object());

    auto action_map = [&](const char* key, std::size_t rows) -> Mat {
        if (!cj.contains(key)) return Mat::Zero(Eigen::Index(rows), da);
        const json& s = cj[key];
        const std::string type = s.value("type", "linear");
        if (type == "zero") return Mat::Zero(Eigen::Index(rows), da);
        if (type != "linear") bad(std::string("control.") + key + ": unknown type " + type);
        Mat M = to_mat(s["matrix"], key);
        if (M.rows() != Eigen::Index(rows) || M.cols() != da) bad(std::string("control.") + key + ": wrong shape");
        return M;
    };
    const Mat Mb = action_map("slow_drift", n), Mr = action_map("fast_drift", m);
    c.b = [Mb](const Vec&, const Vec&, const Vec& a) { return Vec(Mb * a); };
    c.rho = [Mr](const Vec& a) { return Vec(Mr * a); };

    const json rc = cj.value("running_cost", json::object());
    const double quad = num(rc, "quadratic", 0.0), constant = num(rc, "constant", 0.0);
    const Vec kappa = vec_or_zero(rc, "q_tanh", m), cx = vec_or_zero(rc, "x_tanh", n);
    c.l = [=](const Vec& x, const Vec& q, const Vec& a) {
        return constant + quad * a.squaredNorm() + a[0] * kappa.dot(q.array().tanh().matrix()) +
               cx.dot(x.array().tanh().matrix());
    };
    const json k = doc.value("constants", json::object());
    c.bound_M = num(k, "M", 0.0);
    c.lipschitz_L = num(k, "L", 0.0);
    return c;
}

}  // namespace

std::string canonical_dump(const json& doc) { return doc.dump(); }

LoadedModel parse_model(const json& doc) {
    if (!doc.is_object()) bad("model file must be a JSON object");
    for (const char* key : {"eigenvalues_A", "eigenvalues_B"})
        if (!doc.contains(key)) bad(std::string("missing key ") + key);
    LoadedModel out;
    out.source = doc;
    out.name = doc.value("name", "model");
    RawModel& raw = out.raw;
    raw.A.eigenvalues = to_vec(doc["eigenvalues_A"], "eigenvalues_A");
    raw.B.eigenvalues = to_vec(doc["eigenvalues_B"], "eigenvalues_B");
    const std::size_t n = std::size_t(raw.A.eigenvalues.size()), m = std::size_t(raw.B.eigenvalues.size());
    raw.R.matrix = noise_matrix(doc.value("noise_R", json("identity")), n, "noise_R");
    raw.G.matrix = noise_matrix(doc.value("noise_G", json("identity")), m, "noise_G");
    raw.x0 = vec_or_zero(doc, "x0", n);
    raw.q0 = vec_or_zero(doc, "q0", m);
    raw.F = parse_fast_drift(doc.value("fast_drift", json::object()), n, m);
    raw.h = parse_terminal(doc.value("terminal", json::object()), n);

    const json k = doc.value("constants", json::object());
    raw.F_lipschitz = num(k, "L_F", 0.0);
    raw.F_bound = num(k, "F_bound", 0.0);
    raw.h_lipschitz = num(k, "h_lipschitz", 0.0);
    raw.driver_constants.Lx = num(k, "L_x", 0.0);
    raw.driver_constants.Lq = num(k, "L_q", 0.0);
    raw.driver_constants.Lz = num(k, "L_z", 0.0);
    raw.driver_constants.Lxi = num(k, "L_xi", 0.0);

    if (doc.contains("control_grid")) {
        raw.control = parse_control(doc, n, m);
    } else if (doc.contains("driver")) {
        raw.driver = parse_driver(doc["driver"], n, m, std::size_t(raw.R.matrix.cols()));
    } else {
        bad("model needs either control_grid or driver");
    }

    const json seeds = doc.value("seeds", json::object());
    out.probes.seed = seeds.value("probe", out.probes.seed);
    out.path_seed = seeds.value("paths", out.path_seed);
    const json pr = doc.value("probes", json::object());
    out.probes.n_probes = pr.value("count", out.probes.n_probes);
    out.probes.scale = pr.value("scale", out.probes.scale);
    return out;
}

LoadedModel load_model_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) bad("cannot open model file " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        bad(path + ": " + e.what());
    }
    return parse_model(doc);
}

}  // namespace twoscale
