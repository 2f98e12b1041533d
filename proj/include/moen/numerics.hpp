#pragma once

// Small dense linear algebra, fixed-grid Runge-Kutta integration (forward and
// backward in time), piecewise-linear interpolation and trapezoidal
// quadrature. Everything downstream (simulation, filters, network training,
// observers) runs on the shared uniform grid defined here so that state,
// adjoint, observation and quadrature all use identical nodes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "moen/errors.hpp"

namespace moen {

// Pivots below this magnitude count as singular when no ridge is supplied.
inline constexpr double kPivotTol = 1e-12;

// Slack allowed when evaluating a trajectory just outside its grid range.
inline constexpr double kGridSlack = 1e-9;

// =============================================================================
// Vec
// =============================================================================

/// Dense real vector with dimension-checked arithmetic.
class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t n, double fill = 0.0) : v_(n, fill) {}
    Vec(std::initializer_list<double> xs) : v_(xs) {}

    static Vec zeros(std::size_t n) { return Vec(n); }

    std::size_t size() const { return v_.size(); }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    auto begin() { return v_.begin(); }
    auto end() { return v_.end(); }
    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

    bool finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Vec& operator+=(const Vec& o) {
        check_same_size(o, "Vec::operator+=");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        check_same_size(o, "Vec::operator-=");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (double& x : v_) x *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator-(Vec a) { return a *= -1.0; }

    double dot(const Vec& o) const {
        check_same_size(o, "Vec::dot");
        double s = 0.0;
        for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
        return s;
    }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }

private:
    void check_same_size(const Vec& o, const char* where) const {
        if (v_.size() != o.v_.size())
            throw DimensionError(std::string(where) + ": " + std::to_string(v_.size()) +
                                 " vs " + std::to_string(o.v_.size()));
    }

    std::vector<double> v_;
};

// =============================================================================
// Mat
// =============================================================================

/// Dense row-major matrix. Dimensions are fixed at construction.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}
    Mat(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        a_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionError("Mat: ragged initializer");
            a_.insert(a_.end(), r.begin(), r.end());
        }
    }

    static Mat zeros(std::size_t r, std::size_t c) { return Mat(r, c); }
    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    bool finite() const {
        for (double x : a_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Mat transpose() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Mat& operator+=(const Mat& o) {
        check_same_shape(o, "Mat::operator+=");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        check_same_shape(o, "Mat::operator-=");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (double& x : a_) x *= s;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(double s, Mat a) { return a *= s; }
    friend Mat operator*(Mat a, double s) { return a *= s; }

    friend Vec operator*(const Mat& m, const Vec& v) {
        if (m.cols_ != v.size())
            throw DimensionError("Mat*Vec: " + std::to_string(m.cols_) + " cols vs " +
                                 std::to_string(v.size()));
        Vec out(m.rows_);
        for (std::size_t i = 0; i < m.rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m.cols_; ++j) s += m(i, j) * v[j];
            out[i] = s;
        }
        return out;
    }

    friend Mat operator*(const Mat& a, const Mat& b) {
        if (a.cols_ != b.rows_)
            throw DimensionError("Mat*Mat: " + std::to_string(a.cols_) + " vs " +
                                 std::to_string(b.rows_));
        Mat out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
            }
        return out;
    }

    /// Row-major flattening, used to carry matrix trajectories as vectors.
    Vec to_flat() const {
        Vec f(a_.size());
        std::copy(a_.begin(), a_.end(), f.begin());
        return f;
    }
    static Mat from_flat(const Vec& f, std::size_t rows, std::size_t cols) {
        if (f.size() != rows * cols) throw DimensionError("Mat::from_flat: size mismatch");
        Mat m(rows, cols);
        std::copy(f.begin(), f.end(), m.a_.begin());
        return m;
    }

private:
    void check_same_shape(const Mat& o, const char* where) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionError(std::string(where) + ": shape mismatch");
    }

    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

// =============================================================================
// Dense solves
// =============================================================================

/// Solves (M + ridge*I) x = b by Gaussian elimination with partial pivoting.
/// With ridge == 0 a pivot below kPivotTol raises SingularError; callers that
/// must not fail pass an explicit ridge.
inline Vec solve_dense(const Mat& m, const Vec& b, double ridge = 0.0) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw DimensionError("solve_dense: matrix not square");
    if (b.size() != n) throw DimensionError("solve_dense: rhs size mismatch");

    Mat a = m;
    if (ridge != 0.0)
        for (std::size_t i = 0; i < n; ++i) a(i, i) += ridge;
    Vec x = b;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best < kPivotTol)
            throw SingularError("solve_dense: pivot " + std::to_string(best) +
                                " below threshold at column " + std::to_string(col));
        if (piv != col) {
            for (std::size_t j = col; j < n; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(x[col], x[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a(r, col) / a(col, col);
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= factor * a(col, j);
            x[r] -= factor * x[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// Inverse via column-wise solves. Same singularity semantics as solve_dense.
inline Mat invert(const Mat& m, double ridge = 0.0) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw DimensionError("invert: matrix not square");
    Mat inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vec e(n);
        e[j] = 1.0;
        const Vec col = solve_dense(m, e, ridge);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

/// Determinant by LU with partial pivoting; returns 0 on rank loss.
inline double determinant(const Mat& m) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw DimensionError("determinant: matrix not square");
    Mat a = m;
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > best) {
                best = std::abs(a(r, col));
                piv = r;
            }
        if (best == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t j = col; j < n; ++j) std::swap(a(col, j), a(piv, j));
            det = -det;
        }
        det *= a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a(r, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) a(r, j) -= factor * a(col, j);
        }
    }
    return det;
}

/// True when m is symmetric positive definite (Cholesky succeeds).
inline bool is_spd(const Mat& m, double sym_tol = 1e-9) {
    const std::size_t n = m.rows();
    if (m.cols() != n) return false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > sym_tol) return false;
    Mat l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

// =============================================================================
// TimeGrid / GridTrajectory
// =============================================================================

/// Uniform grid on [t0, t1] with `steps` intervals. The grid itself is always
/// oriented t0 -> t1; traversal direction is a solver argument.
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double t0_, double t1_, int steps_) : t0(t0_), t1(t1_), steps(steps_) {
        if (steps < 1) throw DimensionError("TimeGrid: steps must be >= 1");
        if (!(t1 > t0)) throw DimensionError("TimeGrid: t1 must exceed t0");
    }

    double dt() const { return (t1 - t0) / steps; }
    double node(int k) const { return t0 + k * (t1 - t0) / steps; }
    int n_nodes() const { return steps + 1; }

    bool operator==(const TimeGrid& o) const {
        return t0 == o.t0 && t1 == o.t1 && steps == o.steps;
    }
};

/// A vector quantity sampled on every node of a TimeGrid.
class GridTrajectory {
public:
    GridTrajectory() = default;
    GridTrajectory(TimeGrid grid, std::vector<Vec> values)
        : grid_(grid), values_(std::move(values)) {
        if (static_cast<int>(values_.size()) != grid_.n_nodes())
            throw DimensionError("GridTrajectory: node count mismatch");
    }

    static GridTrajectory allocate(const TimeGrid& grid, std::size_t dim) {
        return GridTrajectory(grid, std::vector<Vec>(grid.n_nodes(), Vec(dim)));
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t dim() const { return values_.empty() ? 0 : values_.front().size(); }
    const Vec& at(int k) const { return values_[k]; }
    Vec& at(int k) { return values_[k]; }

    /// Piecewise-linear interpolation, exact at nodes. Times within kGridSlack
    /// of the range are clamped; anything further raises OutOfRangeError.
    Vec eval_at(double t) const {
        if (t < grid_.t0) {
            if (grid_.t0 - t > kGridSlack)
                throw OutOfRangeError("eval_at: t=" + std::to_string(t) + " before grid start");
            return values_.front();
        }
        if (t > grid_.t1) {
            if (t - grid_.t1 > kGridSlack)
                throw OutOfRangeError("eval_at: t=" + std::to_string(t) + " past grid end");
            return values_.back();
        }
        const double h = grid_.dt();
        const double pos = (t - grid_.t0) / h;
        int k = static_cast<int>(pos);
        if (k >= grid_.steps) k = grid_.steps - 1;
        const double w = pos - k;
        if (w == 0.0) return values_[k];
        Vec out = values_[k];
        const Vec& next = values_[k + 1];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * (next[i] - out[i]);
        return out;
    }

    bool finite() const {
        for (const Vec& v : values_)
            if (!v.finite()) return false;
        return true;
    }

private:
    TimeGrid grid_;
    std::vector<Vec> values_;
};

// =============================================================================
// Integration and quadrature
// =============================================================================

enum class Direction { forward, backward };

namespace detail {
inline void no_post_step(Vec&) {}
}  // namespace detail

/// Classical 4th-order Runge-Kutta on the uniform grid. `backward` traverses
/// nodes from t1 to t0 with negated step; the returned trajectory is still
/// indexed t0 -> t1 and holds start_value exactly at the start node.
/// `post_step` may adjust the state after each accepted step (e.g. to
/// re-symmetrize an embedded matrix block).
template <typename Rhs, typename PostStep = void (*)(Vec&)>
GridTrajectory integrate(Rhs&& rhs, const Vec& start_value, const TimeGrid& grid,
                         Direction direction, PostStep&& post_step = detail::no_post_step) {
    if (!start_value.finite()) throw NonFiniteError("integrate: start value not finite");

    std::vector<Vec> values(grid.n_nodes());
    const double h = grid.dt() * (direction == Direction::forward ? 1.0 : -1.0);
    const int first = direction == Direction::forward ? 0 : grid.steps;
    const int last = direction == Direction::forward ? grid.steps : 0;
    const int stride = direction == Direction::forward ? 1 : -1;

    Vec x = start_value;
    values[first] = x;
    for (int k = first; k != last; k += stride) {
        const double t = grid.node(k);
        const Vec k1 = rhs(t, x);
        const Vec k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1);
        const Vec k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2);
        const Vec k4 = rhs(t + h, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        post_step(x);
        if (!x.finite())
            throw NonFiniteError("integrate: state not finite at t=" +
                                 std::to_string(grid.node(k + stride)));
        values[k + stride] = x;
    }
    return GridTrajectory(grid, std::move(values));
}

/// Composite trapezoidal rule over the full grid of a scalar trajectory.
inline double trapezoid(const GridTrajectory& integrand) {
    if (integrand.dim() != 1) throw DimensionError("trapezoid: integrand must be scalar");
    const double h = integrand.grid().dt();
    double s = 0.5 * (integrand.at(0)[0] + integrand.at(integrand.grid().steps)[0]);
    for (int k = 1; k < integrand.grid().steps; ++k) s += integrand.at(k)[0];
    return s * h;
}

/// Trapezoidal rule over [t0, t_upper]; the final partial panel uses the
/// linearly interpolated integrand.
inline double trapezoid(const GridTrajectory& integrand, double t_upper) {
    if (integrand.dim() != 1) throw DimensionError("trapezoid: integrand must be scalar");
    const TimeGrid& g = integrand.grid();
    if (t_upper < g.t0 - kGridSlack || t_upper > g.t1 + kGridSlack)
        throw OutOfRangeError("trapezoid: upper limit outside grid");
    t_upper = std::clamp(t_upper, g.t0, g.t1);
    const double h = g.dt();
    const int whole = std::min(static_cast<int>((t_upper - g.t0) / h), g.steps);
    double s = 0.0;
    for (int k = 0; k < whole; ++k) s += 0.5 * h * (integrand.at(k)[0] + integrand.at(k + 1)[0]);
    const double rest = t_upper - g.node(whole);
    if (rest > 0.0) {
        const double f_end = integrand.eval_at(t_upper)[0];
        s += 0.5 * rest * (integrand.at(whole)[0] + f_end);
    }
    return s;
}

}  // namespace moen
