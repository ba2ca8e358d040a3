#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hmfg {

// Upper bound on state and control dimension. Keeps points on the stack in
// the inner loops of the dynamic-programming and simulation kernels.
inline constexpr std::size_t kMaxDim = 3;

/// Small fixed-capacity real vector used for states and controls.
class Point {
public:
    Point() = default;
    explicit Point(std::size_t n, double fill = 0.0) : size_(n) {
        assert(n <= kMaxDim);
        std::fill_n(data_.begin(), n, fill);
    }
    Point(std::initializer_list<double> values) : size_(values.size()) {
        assert(values.size() <= kMaxDim);
        std::copy(values.begin(), values.end(), data_.begin());
    }
    explicit Point(std::span<const double> values) : size_(values.size()) {
        assert(values.size() <= kMaxDim);
        std::copy(values.begin(), values.end(), data_.begin());
    }

    std::size_t size() const { return size_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double* begin() { return data_.data(); }
    double* end() { return data_.data() + size_; }
    const double* begin() const { return data_.data(); }
    const double* end() const { return data_.data() + size_; }
    std::span<const double> span() const { return {data_.data(), size_}; }

    Point& operator+=(const Point& o) {
        for (std::size_t i = 0; i < size_; ++i) data_[i] += o.data_[i];
        return *this;
    }
    Point& operator-=(const Point& o) {
        for (std::size_t i = 0; i < size_; ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Point& operator*=(double s) {
        for (std::size_t i = 0; i < size_; ++i) data_[i] *= s;
        return *this;
    }
    friend Point operator+(Point a, const Point& b) { return a += b; }
    friend Point operator-(Point a, const Point& b) { return a -= b; }
    friend Point operator*(Point a, double s) { return a *= s; }
    friend Point operator*(double s, Point a) { return a *= s; }

    friend bool operator==(const Point& a, const Point& b) {
        return a.size_ == b.size_ && std::equal(a.begin(), a.end(), b.begin());
    }
    /// Lexicographic order.
    friend bool operator<(const Point& a, const Point& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }

    double squared_norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size_; ++i) s += data_[i] * data_[i];
        return s;
    }
    double norm() const { return std::sqrt(squared_norm()); }
    bool finite() const {
        return std::all_of(begin(), end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::array<double, kMaxDim> data_{};
    std::size_t size_ = 0;
};

inline double squared_distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Dense square matrix of size at most kMaxDim, row-major.
class SmallMatrix {
public:
    SmallMatrix() = default;
    explicit SmallMatrix(std::size_t n) : n_(n) { assert(n <= kMaxDim); }

    static SmallMatrix diagonal(std::size_t n, double v) {
        SmallMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = v;
        return m;
    }

    std::size_t size() const { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * kMaxDim + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * kMaxDim + j]; }

    /// Returns M Mᵀ.
    SmallMatrix outer_self() const {
        SmallMatrix out(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < n_; ++l) s += (*this)(i, l) * (*this)(j, l);
                out(i, j) = s;
            }
        return out;
    }

    Point apply(const Point& v) const {
        Point out(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j) * v[j];
            out[i] = s;
        }
        return out;
    }

private:
    std::array<double, kMaxDim * kMaxDim> data_{};
    std::size_t n_ = 0;
};

/// Axis-aligned closed box.
struct Box {
    Point lower;
    Point upper;

    std::size_t dim() const { return lower.size(); }
    bool contains(const Point& x, double tol = 0.0) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
        return true;
    }
    Point clamp(Point x) const {
        for (std::size_t i = 0; i < dim(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
        return x;
    }
    Point midpoint() const { return (lower + upper) * 0.5; }

    friend bool operator==(const Box&, const Box&) = default;
};

using ParameterVector = std::vector<double>;

}  // namespace hmfg
