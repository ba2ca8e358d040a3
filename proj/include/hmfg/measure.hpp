#pragma once

#include <cstdint>
#include <vector>

#include "hmfg/types.hpp"

namespace hmfg {

/// Weighted particle cloud standing in for one time slice of the population
/// distribution. Immutable after construction; the mean is cached because
/// model callbacks read it in every inner loop.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    /// Weights must be nonnegative and sum to 1 within 1e-9; they are
    /// renormalized exactly.
    EmpiricalMeasure(std::vector<Point> particles, std::vector<double> weights);

    static EmpiricalMeasure uniform(std::vector<Point> particles);
    static EmpiricalMeasure dirac(const Point& x);

    std::size_t size() const { return particles_.size(); }
    std::size_t dim() const { return particles_.empty() ? 0 : particles_.front().size(); }
    bool empty() const { return particles_.empty(); }
    const std::vector<Point>& particles() const { return particles_; }
    const std::vector<double>& weights() const { return weights_; }
    const Point& mean() const { return mean_; }
    double second_moment() const;
    /// Per-axis variance.
    Point variance() const;
    bool has_uniform_weights() const;

private:
    std::vector<Point> particles_;
    std::vector<double> weights_;
    Point mean_;
};

/// One measure per time index 0..n_time.
using MeasurePath = std::vector<EmpiricalMeasure>;

/// Merges atoms at identical positions, summing their weights. Output atoms
/// are sorted lexicographically. The represented measure is unchanged.
EmpiricalMeasure compact(const EmpiricalMeasure& m);

/// Systematic resampling to n equal-weight atoms using the single offset
/// `u` in [0, 1).
EmpiricalMeasure systematic_resample(const EmpiricalMeasure& m, std::size_t n, double u);

struct AverageOptions {
    /// Resample a slice back to this many atoms when its merged support
    /// exceeds it. Zero disables resampling.
    std::size_t max_atoms = 0;
    std::uint64_t seed = 0;
};

/// Running average of measure paths: ((k-1)/k) * previous + (1/k) * latest,
/// slice by slice. Coincident atoms are merged before any resampling.
MeasurePath average_update(const MeasurePath& previous, const MeasurePath& latest,
                           std::size_t k, const AverageOptions& options = {});

/// Wasserstein-2 distance between two clouds. Equal-weight clouds whose
/// sizes have a common multiple of at most `atoms` are replicated to that
/// multiple and solved exactly; anything else is first resampled to `atoms`
/// equal-weight atoms. One dimension uses sorted matching, higher dimensions
/// an exact linear assignment.
double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    std::size_t atoms = 256);

/// max over time of W2^2 between matching slices.
double fixed_point_gap(const MeasurePath& a, const MeasurePath& b, std::size_t atoms = 256);

/// Stopping threshold 2q/(1-q) * h1^2 for the fixed-point gap.
double fixed_point_threshold(double q, double h1);

/// Per-slice mean vectors of a path.
std::vector<Point> path_means(const MeasurePath& path);

}  // namespace hmfg
