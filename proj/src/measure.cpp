#include "hmfg/measure.hpp"

#include <algorithm>
#include <numeric>

#include "hmfg/assignment.hpp"
#include "hmfg/error.hpp"
#include "hmfg/rng.hpp"

namespace hmfg {

EmpiricalMeasure::EmpiricalMeasure(std::vector<Point> particles, std::vector<double> weights)
    : particles_(std::move(particles)), weights_(std::move(weights)) {
    if (particles_.empty()) throw Error(ErrorCode::InvalidParams, "empirical measure needs at least one particle");
    if (particles_.size() != weights_.size())
        throw Error(ErrorCode::LengthMismatch, "particle and weight counts differ");
    const std::size_t d = particles_.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        if (particles_[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "particles of mixed dimension");
        if (!particles_[i].finite()) throw Error(ErrorCode::InvalidParams, "non-finite particle");
        if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i]))
            throw Error(ErrorCode::InvalidParams, "negative or non-finite weight");
        total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidParams, "weights do not sum to one");
    // Totals already within rounding of one are kept as given, so a measure
    // written with full precision reads back bit for bit.
    if (std::abs(total - 1.0) > 1e-12)
        for (double& w : weights_) w /= total;

    mean_ = Point(d);
    for (std::size_t i = 0; i < particles_.size(); ++i) mean_ += particles_[i] * weights_[i];
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<Point> particles) {
    const std::size_t n = particles.size();
    return EmpiricalMeasure(std::move(particles), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

EmpiricalMeasure EmpiricalMeasure::dirac(const Point& x) { return EmpiricalMeasure({x}, {1.0}); }

double EmpiricalMeasure::second_moment() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * particles_[i].squared_norm();
    return s;
}

Point EmpiricalMeasure::variance() const {
    Point var(dim());
    for (std::size_t i = 0; i < size(); ++i) {
        const Point d = particles_[i] - mean_;
        for (std::size_t j = 0; j < dim(); ++j) var[j] += weights_[i] * d[j] * d[j];
    }
    return var;
}

bool EmpiricalMeasure::has_uniform_weights() const {
    const double w0 = 1.0 / static_cast<double>(size());
    return std::all_of(weights_.begin(), weights_.end(), [w0](double w) { return std::abs(w - w0) <= 1e-14; });
}

EmpiricalMeasure compact(const EmpiricalMeasure& m) {
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    const auto& xs = m.particles();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

    std::vector<Point> particles;
    std::vector<double> weights;
    for (std::size_t idx : order) {
        const double w = m.weights()[idx];
        if (w == 0.0) continue;
        if (!particles.empty() && particles.back() == xs[idx]) {
            weights.back() += w;
        } else {
            particles.push_back(xs[idx]);
            weights.push_back(w);
        }
    }
    return EmpiricalMeasure(std::move(particles), std::move(weights));
}

EmpiricalMeasure systematic_resample(const EmpiricalMeasure& m, std::size_t n, double u) {
    std::vector<Point> out;
    out.reserve(n);
    const auto& w = m.weights();
    double cumulative = w[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double position = (static_cast<double>(i) + u) / static_cast<double>(n);
        while (position > cumulative && j + 1 < m.size()) cumulative += w[++j];
        out.push_back(m.particles()[j]);
    }
    return EmpiricalMeasure::uniform(std::move(out));
}

MeasurePath average_update(const MeasurePath& previous, const MeasurePath& latest, std::size_t k,
                           const AverageOptions& options) {
    if (k == 0) throw Error(ErrorCode::InvalidParams, "averaging index k must be at least 1");
    if (previous.size() != latest.size() && k > 1)
        throw Error(ErrorCode::LengthMismatch, "measure paths differ in length");

    const double keep = static_cast<double>(k - 1) / static_cast<double>(k);
    const double take = 1.0 / static_cast<double>(k);
    MeasurePath out;
    out.reserve(latest.size());
    for (std::size_t n = 0; n < latest.size(); ++n) {
        std::vector<Point> particles;
        std::vector<double> weights;
        if (k > 1) {
            const auto& p = previous[n];
            particles.insert(particles.end(), p.particles().begin(), p.particles().end());
            for (double w : p.weights()) weights.push_back(w * keep);
        }
        const auto& q = latest[n];
        particles.insert(particles.end(), q.particles().begin(), q.particles().end());
        for (double w : q.weights()) weights.push_back(w * take);

        EmpiricalMeasure mixed = compact(EmpiricalMeasure(std::move(particles), std::move(weights)));
        if (options.max_atoms > 0 && mixed.size() > options.max_atoms) {
            Rng rng(stream_seed(options.seed, k, n));
            mixed = systematic_resample(mixed, options.max_atoms, rng.uniform());
        }
        out.push_back(std::move(mixed));
    }
    return out;
}

namespace {

std::vector<Point> replicate(const EmpiricalMeasure& m, std::size_t copies) {
    std::vector<Point> out;
    out.reserve(m.size() * copies);
    for (const auto& x : m.particles())
        for (std::size_t c = 0; c < copies; ++c) out.push_back(x);
    return out;
}

double assignment_mean_cost(const std::vector<Point>& a, const std::vector<Point>& b) {
    const std::size_t n = a.size();
    if (a.front().size() == 1) {
        std::vector<double> xa(n), xb(n);
        for (std::size_t i = 0; i < n; ++i) {
            xa[i] = a[i][0];
            xb[i] = b[i][0];
        }
        std::sort(xa.begin(), xa.end());
        std::sort(xb.begin(), xb.end());
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (xa[i] - xb[i]) * (xa[i] - xb[i]);
        return s / static_cast<double>(n);
    }
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = squared_distance(a[i], b[j]);
    return solve_assignment(cost, n) / static_cast<double>(n);
}

}  // namespace

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::size_t atoms) {
    if (mu.empty() || nu.empty()) throw Error(ErrorCode::InvalidParams, "wasserstein2 needs nonempty measures");
    if (mu.dim() != nu.dim()) throw Error(ErrorCode::DimensionMismatch, "wasserstein2 dimension mismatch");

    std::vector<Point> a, b;
    if (mu.has_uniform_weights() && nu.has_uniform_weights() && std::lcm(mu.size(), nu.size()) <= atoms) {
        const std::size_t common = std::lcm(mu.size(), nu.size());
        a = replicate(mu, common / mu.size());
        b = replicate(nu, common / nu.size());
    } else {
        a = systematic_resample(mu, atoms, 0.5).particles();
        b = systematic_resample(nu, atoms, 0.5).particles();
    }
    return std::sqrt(std::max(0.0, assignment_mean_cost(a, b)));
}

double fixed_point_gap(const MeasurePath& a, const MeasurePath& b, std::size_t atoms) {
    if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "measure paths differ in length");
    double gap = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const double w = wasserstein2(a[n], b[n], atoms);
        gap = std::max(gap, w * w);
    }
    return gap;
}

double fixed_point_threshold(double q, double h1) {
    if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidParams, "threshold parameter q must lie in (0, 1)");
    return 2.0 * q / (1.0 - q) * h1 * h1;
}

std::vector<Point> path_means(const MeasurePath& path) {
    std::vector<Point> out;
    out.reserve(path.size());
    for (const auto& m : path) out.push_back(m.mean());
    return out;
}

}  // namespace hmfg
