#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace trendmap {

/// Dense row-major 2-D array of doubles.
struct Dense2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Dense2() = default;
    Dense2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline std::vector<double> mean_rows(const Dense2& m) {
    std::vector<double> mu(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) mu[c] += row[c];
    }
    for (double& v : mu) v /= static_cast<double>(m.rows);
    return mu;
}

/// Population covariance (divides by n) of the rows of m.
inline Dense2 covariance(const Dense2& m) {
    if (m.rows == 0) throw std::invalid_argument("covariance of empty matrix");
    const std::vector<double> mu = mean_rows(m);
    Dense2 cov(m.cols, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        for (std::size_t i = 0; i < m.cols; ++i) {
            const double di = row[i] - mu[i];
            for (std::size_t j = i; j < m.cols; ++j)
                cov.at(i, j) += di * (row[j] - mu[j]);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(m.rows);
    for (std::size_t i = 0; i < m.cols; ++i)
        for (std::size_t j = i; j < m.cols; ++j) {
            cov.at(i, j) *= inv_n;
            cov.at(j, i) = cov.at(i, j);
        }
    return cov;
}

struct EigenPair {
    double value = 0.0;
    std::vector<double> vector;
};

namespace detail {

// Deterministic start: a normalized all-positive vector with a small ramp so
// it is never exactly orthogonal to an axis-aligned eigenvector.
inline std::vector<double> power_start(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = 1.0 + 1e-3 * static_cast<double>(i + 1);
    double nn = norm2(v);
    for (double& x : v) x /= nn;
    return v;
}

inline std::vector<double> mat_vec(const Dense2& a, const std::vector<double>& v) {
    std::vector<double> out(a.rows, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) out[r] = dot(a.row(r), v);
    return out;
}

}  // namespace detail

/// Power iteration for the dominant eigenpair of a symmetric PSD matrix.
/// Returns nullopt when the iteration fails to settle within the cap or the
/// matrix is effectively zero.
inline std::optional<EigenPair> power_iteration(const Dense2& a, int max_iter = 500,
                                                double tol = 1e-10) {
    const std::size_t n = a.rows;
    std::vector<double> v = detail::power_start(n);
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> w = detail::mat_vec(a, v);
        double wn = norm2(w);
        if (wn <= 0.0) return std::nullopt;  // start landed in the null space
        for (double& x : w) x /= wn;
        lambda = dot(std::span<const double>(w), detail::mat_vec(a, w));
        // residual ||Av - lambda v||
        std::vector<double> av = detail::mat_vec(a, w);
        double resid = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = av[i] - lambda * w[i];
            resid += d * d;
        }
        v = std::move(w);
        if (std::sqrt(resid) <= tol * std::max(1.0, std::abs(lambda)))
            return EigenPair{lambda, std::move(v)};
    }
    return std::nullopt;
}

struct Eigen2 {
    EigenPair first;
    EigenPair second;
};

/// Top two eigenpairs via power iteration plus deflation. Fails (nullopt)
/// when the iteration does not converge or the matrix has rank < 2 -- the
/// callers fall back to non-eigen behavior in that case.
inline std::optional<Eigen2> top_two_eigen(const Dense2& a) {
    if (a.rows < 2) return std::nullopt;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) scale += a.at(i, i);
    auto e1 = power_iteration(a);
    if (!e1 || e1->value <= 1e-12 * std::max(1.0, scale)) return std::nullopt;

    Dense2 deflated = a;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            deflated.at(i, j) -= e1->value * e1->vector[i] * e1->vector[j];
    auto e2 = power_iteration(deflated);
    if (!e2 || e2->value <= 1e-12 * std::max(1.0, scale)) return std::nullopt;

    // Re-orthogonalize against the first direction; deflation leaves residue.
    double proj = dot(std::span<const double>(e2->vector),
                      std::span<const double>(e1->vector));
    for (std::size_t i = 0; i < a.rows; ++i) e2->vector[i] -= proj * e1->vector[i];
    double nn = norm2(e2->vector);
    if (nn <= 0.0) return std::nullopt;
    for (double& x : e2->vector) x /= nn;

    if (e2->value > e1->value) std::swap(*e1, *e2);
    return Eigen2{std::move(*e1), std::move(*e2)};
}

/// Lower-triangular Cholesky factor; nullopt when not positive definite.
inline std::optional<Dense2> cholesky(const Dense2& a) {
    const std::size_t n = a.rows;
    Dense2 l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0) return std::nullopt;
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

}  // namespace trendmap
