#pragma once

// Network-based nonlinear observer: output injection through the inverse of
// the learned gain surrogate's input Jacobian,
//   xhat' = f(xhat) + kappa (D_x h_theta(t, xhat))^{-1} C^T (y - C xhat),
//   xhat(0) = x0,
// with kappa = alpha or 1 depending on the gain convention in use.

#include <utility>

#include "moen/errors.hpp"
#include "moen/netgain.hpp"
#include "moen/numerics.hpp"
#include "moen/systems.hpp"

namespace moen {

/// Observer run: estimate, applied injection matrix per node (flattened n x r)
/// and |det D_x h| per node as conditioning telemetry.
struct ObserverResult {
    GridTrajectory xhat;
    GridTrajectory gain;
    GridTrajectory conditioning;
};

namespace detail {

/// Solves J * K = rhs_cols column-wise; retries with the ridge only when the
/// unregularized solve reports rank loss.
inline Mat solve_gain(const Mat& jac, const Mat& ct, double ridge) {
    const std::size_t n = ct.rows();
    const std::size_t r = ct.cols();
    Mat gain(n, r);
    for (std::size_t j = 0; j < r; ++j) {
        Vec col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = ct(i, j);
        Vec sol;
        try {
            sol = solve_dense(jac, col, 0.0);
        } catch (const SingularError&) {
            if (ridge == 0.0) throw;
            sol = solve_dense(jac, col, ridge);
        }
        for (std::size_t i = 0; i < n; ++i) gain(i, j) = sol[i];
    }
    return gain;
}

/// Observer integration for an arbitrary Jacobian map (t, x) -> D_x h(t, x).
/// Tests run it with the exact linear Hessian; production wraps the network.
template <typename Jac>
ObserverResult observer_core(const SystemModel& model, const ObservationRecord& obs,
                             const Scenario& sc, Jac&& jac_fn, double kappa, double ridge,
                             bool symmetrize) {
    const TimeGrid grid = sc.grid();
    if (obs.grid.t0 > grid.t0 + kGridSlack || obs.grid.t1 < grid.t1 - kGridSlack)
        throw ConfigError("observer: observation record does not cover the scenario horizon");
    const Mat ct = model.C.transpose();

    auto applied_gain = [&](double t, const Vec& x) {
        Mat jac = jac_fn(t, x);
        if (symmetrize) jac = 0.5 * (jac + jac.transpose());
        return kappa * solve_gain(jac, ct, ridge);
    };
    auto rhs = [&](double t, const Vec& x) {
        const Vec innov = obs.y.eval_at(t) - model.C * x;
        return model.f(x) + applied_gain(t, x) * innov;
    };

    ObserverResult res;
    res.xhat = integrate(rhs, sc.x0_prior, grid, Direction::forward);
    res.gain = GridTrajectory::allocate(grid, model.n * model.r);
    res.conditioning = GridTrajectory::allocate(grid, 1);
    for (int k = 0; k <= grid.steps; ++k) {
        const double t = grid.node(k);
        const Vec& x = res.xhat.at(k);
        res.gain.at(k) = applied_gain(t, x).to_flat();
        Mat jac = jac_fn(t, x);
        if (symmetrize) jac = 0.5 * (jac + jac.transpose());
        res.conditioning.at(k) = Vec{std::abs(determinant(jac))};
    }
    return res;
}

}  // namespace detail

/// (D_x h_theta(t, x))^{-1} C^T, one dense solve per output column.
inline Mat gain_matrix(const Theta& th, const ShiftFunction& shift, double t, const Vec& x,
                       const Mat& c, double ridge) {
    return detail::solve_gain(input_jacobian(th, t, x, shift), c.transpose(), ridge);
}

/// Runs the learned observer against an observation record. `alpha_in_gain`
/// selects whether the misfit weight multiplies the injection.
inline ObserverResult network_observer(const Theta& th, const ShiftFunction& shift,
                                       const ObservationRecord& obs, const Scenario& sc,
                                       bool alpha_in_gain = true, double ridge = 1e-8,
                                       bool symmetrize = false) {
    if (th.shape.state_dim() != sc.model.n)
        throw DimensionError("network_observer: network output does not match state dim");
    const double kappa = alpha_in_gain ? sc.alpha : 1.0;
    auto jac = [&](double t, const Vec& x) { return input_jacobian(th, t, x, shift); };
    return detail::observer_core(sc.model, obs, sc, jac, kappa, ridge, symmetrize);
}

}  // namespace moen
