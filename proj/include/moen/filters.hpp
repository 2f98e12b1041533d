#pragma once

// Exact linear estimation theory and the extended Kalman filter baseline.
//
// The filter propagates the joint state (xhat, Sigma) of
//   xhat' = f(xhat) + alpha Sigma C^T (y - C xhat),      xhat(0)  = x0,
//   Sigma' = A Sigma + Sigma A^T - alpha Sigma C^T C Sigma + G G^T,
//                                                        Sigma(0) = Q0^{-1},
// with A = Df(xhat). For linear models this is the Kalman-Bucy filter and
// Sigma does not depend on the observation; the closed-form value function
//   V(t,xi) = 1/2 (xi-xhat)^T Sigma^{-1} (xi-xhat)
//             + alpha/2 * integral_0^t ||y - C xhat||^2
// serves as the oracle for the learned observers.

#include <string>
#include <utility>
#include <vector>

#include "moen/errors.hpp"
#include "moen/numerics.hpp"
#include "moen/systems.hpp"

namespace moen {

/// Filter output on the scenario grid. Sigma is stored row-major flattened;
/// gain holds alpha * Sigma C^T per node; output_misfit is ||y - C xhat||^2.
struct KalmanResult {
    GridTrajectory xhat;
    GridTrajectory Sigma;
    GridTrajectory gain;
    GridTrajectory output_misfit;
    double alpha = 1.0;
    Mat Q0_inv;

    int state_dim() const { return static_cast<int>(xhat.dim()); }

    Mat sigma_at_node(int k) const {
        const int n = state_dim();
        return Mat::from_flat(Sigma.at(k), n, n);
    }
    Mat sigma_at(double t) const {
        const int n = state_dim();
        return Mat::from_flat(Sigma.eval_at(t), n, n);
    }
};

namespace detail {

inline KalmanResult riccati_filter(const SystemModel& model, const ObservationRecord& obs,
                                   const Scenario& sc) {
    sc.validate();
    const TimeGrid grid = sc.grid();
    if (!(obs.grid == grid))
        throw ConfigError("filter: observation grid differs from scenario grid");

    const int n = model.n;
    const int r = model.r;
    const double alpha = sc.alpha;
    const Mat GGt = model.G * model.G.transpose();
    const Mat Ct = model.C.transpose();
    const Mat Q0inv = invert(sc.Q0);

    auto pack = [n](const Vec& x, const Mat& s) {
        Vec z(n + n * n);
        for (int i = 0; i < n; ++i) z[i] = x[i];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) z[n + i * n + j] = s(i, j);
        return z;
    };
    auto unpack_x = [n](const Vec& z) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = z[i];
        return x;
    };
    auto unpack_s = [n](const Vec& z) {
        Mat s(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s(i, j) = z[n + i * n + j];
        return s;
    };

    auto rhs = [&](double t, const Vec& z) {
        const Vec xhat = unpack_x(z);
        const Mat sig = unpack_s(z);
        const Mat a = model.Df(xhat);
        const Vec innov = obs.y.eval_at(t) - model.C * xhat;
        const Vec dx = model.f(xhat) + alpha * (sig * (Ct * innov));
        Mat ds = a * sig + sig * a.transpose() + GGt;
        ds -= alpha * ((sig * Ct) * (model.C * sig));
        return pack(dx, ds);
    };
    // Averaging Sigma with its transpose after each step suppresses the slow
    // asymmetry drift of the quadratic term.
    auto symmetrize = [n](Vec& z) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double m = 0.5 * (z[n + i * n + j] + z[n + j * n + i]);
                z[n + i * n + j] = m;
                z[n + j * n + i] = m;
            }
    };

    const GridTrajectory joint =
        integrate(rhs, pack(sc.x0_prior, Q0inv), grid, Direction::forward, symmetrize);

    KalmanResult kr;
    kr.alpha = alpha;
    kr.Q0_inv = Q0inv;
    kr.xhat = GridTrajectory::allocate(grid, n);
    kr.Sigma = GridTrajectory::allocate(grid, n * n);
    kr.gain = GridTrajectory::allocate(grid, n * r);
    kr.output_misfit = GridTrajectory::allocate(grid, 1);
    for (int k = 0; k <= grid.steps; ++k) {
        const Vec xhat = unpack_x(joint.at(k));
        const Mat sig = unpack_s(joint.at(k));
        kr.xhat.at(k) = xhat;
        kr.Sigma.at(k) = sig.to_flat();
        kr.gain.at(k) = (alpha * (sig * Ct)).to_flat();
        const Vec innov = obs.y.at(k) - model.C * xhat;
        kr.output_misfit.at(k) = Vec{innov.squared_norm()};
    }
    return kr;
}

}  // namespace detail

/// Kalman-Bucy filter; requires a linear model.
inline KalmanResult kalman_bucy(const SystemModel& model, const ObservationRecord& obs,
                                const Scenario& sc) {
    if (!model.linear)
        throw NotLinearError("kalman_bucy: model '" + model.name + "' is not linear");
    return detail::riccati_filter(model, obs, sc);
}

/// Extended Kalman filter: same Riccati propagation with the dynamics
/// linearized along the current estimate.
inline KalmanResult extended_kalman(const SystemModel& model, const ObservationRecord& obs,
                                    const Scenario& sc) {
    return detail::riccati_filter(model, obs, sc);
}

/// Value, gradient and Hessian of the closed-form linear value function.
struct ValueEval {
    double value = 0.0;
    Vec grad;
    Mat hess;
};

/// V(t,xi) with grad = Sigma^{-1}(xi - xhat) and hess = Sigma^{-1}.
inline ValueEval value_linear(const KalmanResult& kr, double t, const Vec& xi) {
    const int n = kr.state_dim();
    if (static_cast<int>(xi.size()) != n) throw DimensionError("value_linear: xi dimension");
    const Vec xhat = kr.xhat.eval_at(t);
    Mat sinv = invert(kr.sigma_at(t));
    // Exact symmetry of the Hessian despite inversion roundoff.
    sinv = 0.5 * (sinv + sinv.transpose());
    const Vec diff = xi - xhat;
    const Vec grad = sinv * diff;
    const double misfit = trapezoid(kr.output_misfit, t);
    return ValueEval{0.5 * diff.dot(grad) + 0.5 * kr.alpha * misfit, grad, sinv};
}

/// Mean optimal cost (1/d) sum_j V(T, xi_j) over an ensemble of terminals.
inline double ensemble_optimal_cost(const KalmanResult& kr, const std::vector<Vec>& terminals,
                                    double T) {
    if (terminals.empty()) throw DimensionError("ensemble_optimal_cost: empty terminal list");
    double s = 0.0;
    for (const Vec& xi : terminals) s += value_linear(kr, T, xi).value;
    return s / static_cast<double>(terminals.size());
}

/// Optimal trajectory through terminal xi and the disturbance realizing it.
struct ClosedLoopResult {
    GridTrajectory x_opt;  // n-dim
    GridTrajectory v_opt;  // m-dim, G^T Sigma^{-1} (x_opt - xhat)
};

/// Integrates x' = A x + G G^T Sigma^{-1}(t) (x - xhat(t)) backward from
/// x(T) = xi; the optimal disturbance is reported as
/// v_opt = G^T Sigma^{-1} (x_opt - xhat), the feedback form of the
/// minimizing control.
inline ClosedLoopResult optimal_closed_loop(const KalmanResult& kr, const Vec& xi,
                                            const Scenario& sc) {
    if (!sc.model.linear) throw NotLinearError("optimal_closed_loop: model must be linear");
    const SystemModel& model = sc.model;
    const TimeGrid grid = sc.grid();
    const Mat GGt = model.G * model.G.transpose();

    auto rhs = [&](double t, const Vec& x) {
        const Mat sig = kr.sigma_at(t);
        const Vec diff = x - kr.xhat.eval_at(t);
        return model.f(x) + GGt * solve_dense(sig, diff);
    };
    GridTrajectory x_opt = integrate(rhs, xi, grid, Direction::backward);

    const Mat Gt = model.G.transpose();
    GridTrajectory v_opt = GridTrajectory::allocate(grid, model.m);
    for (int k = 0; k <= grid.steps; ++k) {
        const Vec diff = x_opt.at(k) - kr.xhat.at(k);
        v_opt.at(k) = Gt * solve_dense(kr.sigma_at_node(k), diff);
    }
    return ClosedLoopResult{std::move(x_opt), std::move(v_opt)};
}

}  // namespace moen
