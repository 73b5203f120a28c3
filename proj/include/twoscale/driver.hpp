// SPDX-License-Identifier: MIT
#pragma once

#include "twoscale/model.hpp"

#include <iosfwd>

namespace twoscale {

struct HamiltonianEval {
    double value = 0.0;
    std::size_t minimizer = 0;  ///< index into the control grid
    double gap = 0.0;           ///< second-best minus best; +inf for a singleton grid
};

/// Exact minimization of l + z·R^{-1}b + ξ·ρ over the finite control grid.
/// Ties go to the lowest index.
HamiltonianEval hamiltonian_psi(const ModelSpec& spec, const Vec& x, const Vec& q, const Vec& z, const Vec& xi);

struct DriverCertificate {
    DriverConstants estimate;
    bool ok = true;
    std::string witness;  ///< description of the worst probe pair when !ok
};

/// Empirical maxima of the four difference quotients of the driver regularity
/// estimate. Throws ValidationError("B.3", ...) when an estimate exceeds the
/// configured constant by more than 1%.
DriverCertificate certify_driver_constants(const ModelSpec& spec, std::size_t probe_budget,
                                           std::uint64_t seed = 777, double scale = 2.0);

/// Upper bound max over the grid of |R^{-1} b| on the probes; envelope bound for L_z.
double control_drift_envelope(const ModelSpec& spec, std::size_t probe_budget, std::uint64_t seed = 778);

/// CSV debugging log: x..., q..., z..., xi..., value, minimizer, gap.
void write_hamiltonian_row(std::ostream& os, const Vec& x, const Vec& q, const Vec& z, const Vec& xi,
                           const HamiltonianEval& e);

}  // namespace twoscale
