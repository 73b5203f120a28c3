// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twoscale {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Rejected input: a violated standing hypothesis, a bad config or a failed
/// precondition. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string tag, const std::string& detail)
        : std::runtime_error(tag + ": " + detail), tag_(std::move(tag)) {}
    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

/// A solver could not produce a trustworthy number (rank-deficient
/// regression, unresolved fast scale, density blow-up...). Exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Monte Carlo estimate with the half-width of its 95% interval.
struct Estimate {
    double value = 0.0;
    double ci = 0.0;
};

/// sqrt(a^2 + b^2): half-width for the difference of two independent estimates.
double joint_ci(double a, double b);

/// Mean and 95% half-width of a sample.
Estimate mean_ci(const std::vector<double>& samples);

/// Number of worker threads used by path-parallel loops. Reads
/// TWOSCALE_THREADS on first use; defaults to hardware concurrency.
std::size_t worker_threads();
void set_worker_threads(std::size_t n);

/// Runs body(i) for i in [0, n) split in contiguous chunks over the worker
/// threads. Results must be written to per-index slots so that the outcome
/// does not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// 64-bit FNV-1a, used for config hashes and per-node seed derivation.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace twoscale
