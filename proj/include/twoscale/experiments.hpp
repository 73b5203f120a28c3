// SPDX-License-Identifier: MIT
//
// Convergence studies Y^ε_0 → Ȳ_0: λ table, one limit solve, one ε-solve per
// ε on shared slow paths, then CSV/JSON reports and SVG plots. Reports carry
// no wall-clock data; timings go to a separate file so that reports are
// byte-identical across runs and thread counts.
#pragma once

#include "twoscale/bsde.hpp"
#include "twoscale/galerkin.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace twoscale {

struct StudyConfig {
    std::string name = "study";
    nlohmann::json model;          ///< model document, or {"type":"reaction_diffusion", ...}
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    std::size_t n_steps = 200;     ///< shared grid on [0, 1]
    std::size_t n_paths = 10000;
    int degree = 2;
    std::uint64_t path_seed = 11;
    LambdaTableConfig lambda;
    std::string lambda_table_file;  ///< reuse a persisted table instead of building one
    std::string output_dir;
    nlohmann::json source;          ///< canonical config document (after defaults and overrides)

    void validate() const;
    std::string hash() const;       ///< 16 hex digits of FNV-1a over the canonical document
};

/// base_dir resolves a relative "model" path.
StudyConfig parse_study(const nlohmann::json& doc, const std::string& base_dir = ".");
StudyConfig load_study_file(const std::string& path);

struct ConvergenceRow {
    double eps = 0.0;
    double y = std::numeric_limits<double>::quiet_NaN();
    double ci = 0.0;
    double error = std::numeric_limits<double>::quiet_NaN();
    double error_ci = 0.0;   ///< joint half-width of Y^ε_0 and Ȳ_0 (including λ-table uncertainty)
    double paired_ci = 0.0;  ///< half-width of the path-paired difference
    double xi_median_scaled = 0.0;
    std::string status = "ok";
};

struct ConvergenceReport {
    std::string name, config_hash;
    std::vector<ConvergenceRow> rows;
    double ybar = 0.0, ybar_ci = 0.0, table_ci = 0.0;
    bool partial = false;
    double empirical_slope = std::numeric_limits<double>::quiet_NaN();
    EffectiveHamiltonianTable table;
    std::vector<std::pair<std::string, double>> timings;  ///< seconds per stage, not serialized in the report

    nlohmann::ordered_json to_json() const;
    static ConvergenceReport from_json(const nlohmann::json& j);
};

/// Builds the model from config.model and runs the study.
ConvergenceReport run_convergence_study(const StudyConfig& cfg);
ConvergenceReport run_study_on_spec(const ModelSpec& spec, const StudyConfig& cfg);

/// Reaction-diffusion defaults with λ tabulated along ⟨1, e_k⟩.
StudyConfig reaction_diffusion_study(std::size_t n_modes);
ConvergenceReport run_reaction_diffusion_example(const StudyConfig& cfg);
/// Builds the truncated model described by a {"type":"reaction_diffusion"} document.
ModelSpec reaction_diffusion_model(const nlohmann::json& doc);

/// Writes <prefix>.csv, <prefix>.json, <prefix>_lambda.csv and <prefix>_timing.json.
std::vector<std::string> write_report(const ConvergenceReport& r, const std::string& dir);
/// Writes <prefix>_error.svg, <prefix>_lambda.svg and <prefix>_trace.svg.
std::vector<std::string> emit_plots(const ConvergenceReport& r, const std::string& dir);
std::string report_prefix(const ConvergenceReport& r);

/// Output directory: explicit value, else $TWOSCALE_OUTPUT_DIR, else "twoscale_out".
std::string resolve_output_dir(const std::string& explicit_dir);

}  // namespace twoscale
