// SPDX-License-Identifier: MIT
//
// Concave conjugate of λ in z, its biconjugate, and the reduced control
// problem dX = AX dt − R p dt + R dW with cost E[h(X_1) − ∫ λ_*(X, p) ds].
//
// Tables are scalar along the λ table's axes: z = t·z_dir and p is the dual
// scalar π with z·p = t·π, i.e. p = π z_dir/|z_dir|².
#pragma once

#include "twoscale/ergodic.hpp"

#include <iosfwd>

namespace twoscale {

struct ConjugateTable {
    std::vector<double> x_grid;  ///< aligned with the λ table
    std::vector<double> p_grid;
    Vec x_ref, x_dir, z_dir;
    Mat values;              ///< x × p; sentinel marks −∞
    double L = 0.0;          ///< Lipschitz constant of λ in t
    double p_lo = 0.0, p_hi = 0.0;  ///< extreme grid points with |π| <= L
    double sentinel = -1e6;

    bool finite(double v) const { return v > sentinel * 0.5; }
    /// λ_*(x, π) interpolated linearly between x slices (sentinel if either side is).
    double value(const Vec& x, double pi) const;
    double value_coords(double s, std::size_t p_index) const;
    void write_csv(std::ostream& os) const;
};

/// Per x slice: λ_*(x, π) = min_t (−t π − λ(x, t)) for |π| <= L, sentinel beyond.
/// L defaults to the largest slope of λ in t over the table (L <= 0).
ConjugateTable fenchel_conjugate_table(const EffectiveHamiltonianTable& lambda, const std::vector<double>& p_grid,
                                       double L = -1.0);

/// min over finite entries of (−t π − λ_*(x, π)) with t = z_coord(z).
double reconstruct_biconjugate(const ConjugateTable& conj, const Vec& x, const Vec& z);
double reconstruct_biconjugate_coords(const ConjugateTable& conj, double s, double t);

/// max(Δz, Δp) over both grids.
double grid_resolution(const EffectiveHamiltonianTable& lambda, const ConjugateTable& conj);
/// Largest |λ** − λ| over table nodes.
double biconjugate_node_error(const EffectiveHamiltonianTable& lambda, const ConjugateTable& conj);

/// Feedback (t, x) ↦ π, clipped to [p_lo, p_hi] by the solver.
using DualFeedback = std::function<double(double t, const Vec& x)>;

/// Constants on `n_constants` evenly spaced points of [p_lo, p_hi] plus clipped
/// linear maps π = α + β·s(x) for the given slopes and intercepts.
std::vector<DualFeedback> default_feedback_family(const ConjugateTable& conj, std::size_t n_constants,
                                                  const std::vector<double>& slopes,
                                                  const std::vector<double>& intercepts);

struct ReducedControlResult {
    Estimate value;  ///< best feedback
    std::size_t best = 0;
    std::vector<Estimate> per_feedback;
};

ReducedControlResult solve_reduced_control(const ModelSpec& spec, const ConjugateTable& conj, const TimeGrid& grid,
                                           std::size_t n_paths, const std::vector<DualFeedback>& family,
                                           std::uint64_t seed);

void write_reduced_control_json(std::ostream& os, const ReducedControlResult& r);

}  // namespace twoscale
