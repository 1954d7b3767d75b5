#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "recipro/errors.hpp"

namespace recipro {

using Vec = std::vector<double>;

/// Small dense row-major matrix. Agent counts here are tiny (n <= 16 for the
/// exhaustive certifiers), so plain loops beat any external linear algebra.
class Mat {
  public:
    Mat() = default;

    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    const std::vector<double>& data() const { return a_; }

    bool operator==(const Mat&) const = default;

    Mat& operator+=(const Mat& other) {
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += other.a_[k];
        return *this;
    }

    Mat& operator*=(double s) {
        for (double& v : a_) v *= s;
        return *this;
    }

    bool all_finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// max_i sum_j |a_ij|
    double inf_norm() const {
        double worst = 0.0;
        for (int i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
            if (s > worst) worst = s;
        }
        return worst;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

inline Mat operator*(const Mat& a, const Mat& b) {
    Mat c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

inline Vec operator*(const Mat& a, const Vec& x) {
    Vec y(static_cast<std::size_t>(a.rows()), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

namespace detail {

/// Smallest Taylor order whose remainder bound drops below tol for ||A|| = theta.
inline int taylor_order(double theta, double tol) {
    double term = theta; // theta^(m+1)/(m+1)! for m starting at 0
    int m = 0;
    while (m < 40) {
        const double tail_factor = 1.0 / (1.0 - theta / (m + 2));
        if (term * tail_factor <= tol) break;
        ++m;
        term *= theta / (m + 1);
    }
    return m;
}

} // namespace detail

/// Matrix exponential by scaling-and-squaring over a truncated Taylor series.
///
/// The input is first shifted by its smallest diagonal entry. For the
/// consensus generators used throughout (-L*h with L a Laplacian) the shifted
/// matrix is entrywise non-negative, so every series term is non-negative and
/// the result is non-negative with no cancellation. The shift is re-applied
/// as a scalar factor at each squaring level to avoid under/overflow.
inline Mat expm(const Mat& a, double tol = 1e-13) {
    const int n = a.rows();
    if (n == 0) return a;
    if (!a.all_finite()) throw NonFiniteError("expm: non-finite input matrix");

    double mu = a(0, 0);
    for (int i = 1; i < n; ++i) mu = std::min(mu, a(i, i));

    Mat b = a;
    for (int i = 0; i < n; ++i) b(i, i) -= mu;

    int squarings = 0;
    double norm = b.inf_norm();
    while (norm > 0.5 && squarings < 60) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    b *= scale;

    const int order = detail::taylor_order(std::max(norm, 1e-300), std::max(tol, 1e-17));
    Mat sum = Mat::identity(n);
    sum += b;
    Mat term = b;
    for (int k = 2; k <= order + 1; ++k) {
        term = term * b;
        term *= 1.0 / k;
        sum += term;
    }

    sum *= std::exp(mu * scale);
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

} // namespace recipro
