#pragma once

// Small fixed-size linear algebra: 2x2 / 4x4 dense matrices, closed-form
// 2x2 solves, Kronecker products, and compensated summation.  Everything
// the estimators and limit-matrix code need lives here; there is no
// general-purpose solver on purpose (4x4 inverses come from the
// I2 (x) S structure).

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace rcbar {

// Neumaier-compensated accumulator.  Sums over a tree can reach ~10^6
// terms with mixed magnitudes; plain doubles lose the small residual
// identities the tests rely on.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct Vec2 {
    std::array<double, 2> v{};

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    Vec2 operator-(const Vec2& o) const { return {{v[0] - o.v[0], v[1] - o.v[1]}}; }
    Vec2 operator+(const Vec2& o) const { return {{v[0] + o.v[0], v[1] + o.v[1]}}; }
    double norm2() const { return v[0] * v[0] + v[1] * v[1]; }
    double norm() const { return std::sqrt(norm2()); }
};

struct Vec4 {
    std::array<double, 4> v{};

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    Vec4 operator-(const Vec4& o) const {
        return {{v[0] - o.v[0], v[1] - o.v[1], v[2] - o.v[2], v[3] - o.v[3]}};
    }
    Vec4 operator+(const Vec4& o) const {
        return {{v[0] + o.v[0], v[1] + o.v[1], v[2] + o.v[2], v[3] + o.v[3]}};
    }
    double norm2() const {
        return v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
    }
    double norm() const { return std::sqrt(norm2()); }
};

struct Mat2 {
    // row-major
    std::array<std::array<double, 2>, 2> m{};

    static Mat2 of(double a00, double a01, double a10, double a11) {
        Mat2 r;
        r.m[0][0] = a00;
        r.m[0][1] = a01;
        r.m[1][0] = a10;
        r.m[1][1] = a11;
        return r;
    }
    static Mat2 identity() { return of(1.0, 0.0, 0.0, 1.0); }

    double& operator()(std::size_t r, std::size_t c) { return m[r][c]; }
    double operator()(std::size_t r, std::size_t c) const { return m[r][c]; }

    double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
    double trace() const { return m[0][0] + m[1][1]; }

    Mat2 operator+(const Mat2& o) const {
        Mat2 r;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat2 operator-(const Mat2& o) const {
        Mat2 r;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
        return r;
    }
    Mat2 operator*(double s) const {
        Mat2 r;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
    Mat2 operator*(const Mat2& o) const {
        Mat2 r;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j];
        return r;
    }
    Vec2 operator*(const Vec2& x) const {
        return {{m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]}};
    }

    double frobenius() const {
        double s = 0.0;
        for (const auto& row : m)
            for (double x : row) s += x * x;
        return std::sqrt(s);
    }
};

struct Mat4 {
    std::array<std::array<double, 4>, 4> m{};

    static Mat4 identity() {
        Mat4 r;
        for (std::size_t i = 0; i < 4; ++i) r.m[i][i] = 1.0;
        return r;
    }

    double& operator()(std::size_t r, std::size_t c) { return m[r][c]; }
    double operator()(std::size_t r, std::size_t c) const { return m[r][c]; }

    double trace() const { return m[0][0] + m[1][1] + m[2][2] + m[3][3]; }

    Mat4 operator+(const Mat4& o) const {
        Mat4 r;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat4 operator-(const Mat4& o) const {
        Mat4 r;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
        return r;
    }
    Mat4 operator*(double s) const {
        Mat4 r;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
    Mat4 operator*(const Mat4& o) const {
        Mat4 r;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < 4; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }
    Vec4 operator*(const Vec4& x) const {
        Vec4 r;
        for (std::size_t i = 0; i < 4; ++i)
            r[i] = m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2] + m[i][3] * x[3];
        return r;
    }

    double frobenius() const {
        double s = 0.0;
        for (const auto& row : m)
            for (double x : row) s += x * x;
        return std::sqrt(s);
    }
};

// x^t A x
inline double quad_form(const Mat4& a, const Vec4& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) s += x[i] * a(i, j) * x[j];
    return s;
}

// Standard Kronecker product of two 2x2 blocks.
inline Mat4 kron2(const Mat2& a, const Mat2& b) {
    Mat4 r;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 2; ++k)
                for (std::size_t l = 0; l < 2; ++l)
                    r(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
    return r;
}

// Closed-form adjugate inverse.  Throws on a zero determinant; callers
// that can meet a singular matrix must check conditioning first.
inline Mat2 inverse(const Mat2& a) {
    const double d = a.det();
    if (d == 0.0) throw std::domain_error("mat2: singular matrix");
    const double inv = 1.0 / d;
    return Mat2::of(a(1, 1) * inv, -a(0, 1) * inv, -a(1, 0) * inv, a(0, 0) * inv);
}

inline Vec2 solve(const Mat2& a, const Vec2& b) {
    const double d = a.det();
    if (d == 0.0) throw std::domain_error("mat2: singular system");
    return {{(b[0] * a(1, 1) - b[1] * a(0, 1)) / d,
             (b[1] * a(0, 0) - b[0] * a(1, 0)) / d}};
}

// Eigenvalues of a symmetric 2x2, ascending.
inline std::array<double, 2> sym_eigenvalues(const Mat2& a) {
    const double tr = a.trace();
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * a.det()));
    return {(tr - disc) / 2.0, (tr + disc) / 2.0};
}

// Condition-number gate used for the design-matrix regularization rule.
inline bool is_well_conditioned(const Mat2& a, double max_condition = 1e12) {
    const auto [lo, hi] = sym_eigenvalues(a);
    if (!(lo > 0.0) || !(hi > 0.0)) return false;
    return hi <= max_condition * lo;
}

// Cholesky-style positive definiteness probes (tolerance relative to the
// largest diagonal entry).
inline bool is_positive_definite(const Mat2& a, double rel_tol = 1e-12) {
    const double scale = std::max(std::abs(a(0, 0)), std::abs(a(1, 1)));
    const double tol = rel_tol * std::max(scale, 1e-300);
    if (a(0, 0) <= tol) return false;
    const double s = a(1, 1) - a(0, 1) * a(0, 1) / a(0, 0);
    return s > tol;
}

inline bool is_positive_definite(const Mat4& a, double rel_tol = 1e-12) {
    double scale = 0.0;
    for (std::size_t i = 0; i < 4; ++i) scale = std::max(scale, std::abs(a(i, i)));
    const double tol = rel_tol * std::max(scale, 1e-300);
    Mat4 l{};
    for (std::size_t j = 0; j < 4; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= tol) return false;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < 4; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return true;
}

}  // namespace rcbar
