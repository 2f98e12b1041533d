#pragma once

// Learning loop for the gain surrogate: ensemble of backward closed-loop
// state solves, forward adjoint solves, reduced cost/gradient assembly and
// Barzilai-Borwein descent with a one-time shift-function update.
//
// Reduced objective over terminals xi_j, j = 1..d:
//   J(theta) = (1/d) sum_j [ 1/2 ||x_j(0) - x0||^2_Q0
//              + 1/2 int_0^T ( ||G^T h_theta(t, x_j)||^2
//                              + alpha ||y - C x_j||^2 ) dt ]
//   with  x_j' = f(x_j) + G G^T h_theta(t, x_j),  x_j(T) = xi_j.
// The gradient comes from the adjoint
//   -p' = Df(x)^T p + (D_x h)^T (G G^T (p + h)) - alpha C^T (y - C x),
//    p(0) = -Q0 (x(0) - x0),
// integrated forward, and the parameter integral
//   (1/d) sum_j int_0^T (D_theta h)^T (G G^T (h + p)) dt.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "moen/errors.hpp"
#include "moen/filters.hpp"
#include "moen/netgain.hpp"
#include "moen/numerics.hpp"
#include "moen/observer.hpp"
#include "moen/rng.hpp"
#include "moen/systems.hpp"

namespace moen {

// =============================================================================
// Ensembles
// =============================================================================

/// Terminal-state ensemble: either an explicit list or seeded gaussian draws
/// around a center.
struct EnsembleSpec {
    enum class Sampling { explicit_list, gaussian };
    Sampling sampling = Sampling::gaussian;
    std::vector<Vec> terminals;  // explicit_list
    int d = 1;
    Vec center;
    double stddev = 0.5;
    std::uint64_t seed = 1;
};

inline std::vector<Vec> sample_ensemble(const EnsembleSpec& spec) {
    if (spec.sampling == EnsembleSpec::Sampling::explicit_list) {
        if (spec.terminals.empty())
            throw ConfigError("ensemble: explicit terminal list is empty");
        return spec.terminals;
    }
    if (spec.d < 1) throw ConfigError("ensemble: d must be >= 1");
    std::vector<Vec> out;
    out.reserve(spec.d);
    Rng rng(spec.seed);
    for (int j = 0; j < spec.d; ++j) {
        Vec xi = spec.center;
        for (std::size_t i = 0; i < xi.size(); ++i) xi[i] += spec.stddev * rng.normal();
        out.push_back(std::move(xi));
    }
    return out;
}

// =============================================================================
// Solver cores (generic in the gain surrogate, used by oracle tests as well)
// =============================================================================

/// Backward solve of x' = f(x) + G G^T h(t, x) from x(T) = xi.
template <typename H>
GridTrajectory backward_state_fn(const Scenario& sc, H&& h_fn, const Vec& xi) {
    const Mat GGt = sc.model.G * sc.model.G.transpose();
    auto rhs = [&](double t, const Vec& x) { return sc.model.f(x) + GGt * h_fn(t, x); };
    return integrate(rhs, xi, sc.grid(), Direction::backward);
}

/// Forward adjoint solve along a stored state trajectory. `jac_t_apply`
/// computes (D_x h(t, x))^T u.
template <typename H, typename JacT>
GridTrajectory adjoint_solve_fn(const Scenario& sc, const ObservationRecord& obs, H&& h_fn,
                                JacT&& jac_t_apply, const GridTrajectory& x_traj) {
    const SystemModel& model = sc.model;
    const Mat GGt = model.G * model.G.transpose();
    const Mat Ct = model.C.transpose();
    auto rhs = [&](double t, const Vec& p) {
        const Vec x = x_traj.eval_at(t);
        const Vec innov = obs.y.eval_at(t) - model.C * x;
        Vec src = model.Df(x).transpose() * p;
        src += jac_t_apply(t, x, GGt * (p + h_fn(t, x)));
        src -= sc.alpha * (Ct * innov);
        return -src;
    };
    const Vec p0 = -(sc.Q0 * (x_traj.at(0) - sc.x0_prior));
    return integrate(rhs, p0, sc.grid(), Direction::forward);
}

/// Reduced cost for one sample given its backward trajectory.
template <typename H>
double sample_cost_fn(const Scenario& sc, const ObservationRecord& obs, H&& h_fn,
                      const GridTrajectory& x_traj) {
    const SystemModel& model = sc.model;
    const Mat Gt = model.G.transpose();
    const TimeGrid grid = sc.grid();
    GridTrajectory control_energy = GridTrajectory::allocate(grid, 1);
    GridTrajectory misfit = GridTrajectory::allocate(grid, 1);
    for (int k = 0; k <= grid.steps; ++k) {
        const double t = grid.node(k);
        const Vec& x = x_traj.at(k);
        control_energy.at(k) = Vec{(Gt * h_fn(t, x)).squared_norm()};
        misfit.at(k) = Vec{(obs.y.at(k) - model.C * x).squared_norm()};
    }
    const Vec d0 = x_traj.at(0) - sc.x0_prior;
    return 0.5 * d0.dot(sc.Q0 * d0) + 0.5 * trapezoid(control_energy) +
           0.5 * sc.alpha * trapezoid(misfit);
}

/// Ensemble-mean reduced cost for an arbitrary gain surrogate.
template <typename H>
double reduced_cost_fn(const Scenario& sc, const ObservationRecord& obs, H&& h_fn,
                       const std::vector<Vec>& terminals) {
    if (terminals.empty()) throw ConfigError("reduced cost: empty ensemble");
    double total = 0.0;
    for (const Vec& xi : terminals)
        total += sample_cost_fn(sc, obs, h_fn, backward_state_fn(sc, h_fn, xi));
    return total / static_cast<double>(terminals.size());
}

// =============================================================================
// Network-parametrized operations
// =============================================================================

inline GridTrajectory backward_state(const Theta& th, const ShiftFunction& shift, const Vec& xi,
                                     const Scenario& sc) {
    auto h_fn = [&](double t, const Vec& x) { return h_eval(th, t, x, shift); };
    return backward_state_fn(sc, h_fn, xi);
}

inline GridTrajectory adjoint_solve(const Theta& th, const ShiftFunction& shift,
                                    const GridTrajectory& x_traj, const ObservationRecord& obs,
                                    const Scenario& sc) {
    auto h_fn = [&](double t, const Vec& x) { return h_eval(th, t, x, shift); };
    auto jac_t = [&](double t, const Vec& x, const Vec& u) {
        return input_jacobian(th, t, x, shift).transpose() * u;
    };
    return adjoint_solve_fn(sc, obs, h_fn, jac_t, x_traj);
}

inline double reduced_cost(const Theta& th, const ShiftFunction& shift,
                           const std::vector<Vec>& terminals, const ObservationRecord& obs,
                           const Scenario& sc) {
    auto h_fn = [&](double t, const Vec& x) { return h_eval(th, t, x, shift); };
    return reduced_cost_fn(sc, obs, h_fn, terminals);
}

/// Reduced cost and its adjoint-based gradient, sharing the backward solves.
/// The per-sample reduction runs in a fixed order so results are
/// bit-reproducible.
inline std::pair<double, Vec> cost_and_gradient(const Theta& th, const ShiftFunction& shift,
                                                const std::vector<Vec>& terminals,
                                                const ObservationRecord& obs,
                                                const Scenario& sc) {
    if (terminals.empty()) throw ConfigError("reduced gradient: empty ensemble");
    const SystemModel& model = sc.model;
    const Mat GGt = model.G * model.G.transpose();
    const TimeGrid grid = sc.grid();
    const double h_t = grid.dt();
    const int n_params = th.shape.param_count();

    auto h_fn = [&](double t, const Vec& x) { return h_eval(th, t, x, shift); };
    auto jac_t = [&](double t, const Vec& x, const Vec& u) {
        return input_jacobian(th, t, x, shift).transpose() * u;
    };

    double cost_sum = 0.0;
    Vec grad_sum(n_params);
    for (std::size_t j = 0; j < terminals.size(); ++j) {
        try {
            const GridTrajectory x_traj = backward_state_fn(sc, h_fn, terminals[j]);
            cost_sum += sample_cost_fn(sc, obs, h_fn, x_traj);
            const GridTrajectory p_traj = adjoint_solve_fn(sc, obs, h_fn, jac_t, x_traj);
            for (int k = 0; k <= grid.steps; ++k) {
                const double t = grid.node(k);
                const Vec& x = x_traj.at(k);
                const Vec u = GGt * (h_fn(t, x) + p_traj.at(k));
                const double w = (k == 0 || k == grid.steps) ? 0.5 * h_t : h_t;
                grad_sum += w * param_vjp(th, t, x, shift, u);
            }
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("sample " + std::to_string(j) + ": " + e.what());
        }
    }
    const double inv_d = 1.0 / static_cast<double>(terminals.size());
    return {cost_sum * inv_d, inv_d * grad_sum};
}

inline Vec reduced_gradient(const Theta& th, const ShiftFunction& shift,
                            const std::vector<Vec>& terminals, const ObservationRecord& obs,
                            const Scenario& sc) {
    return cost_and_gradient(th, shift, terminals, obs, sc).second;
}

// =============================================================================
// Barzilai-Borwein descent
// =============================================================================

enum class BbRule { rule1, rule2, alternate };

inline BbRule bb_rule_from_string(const std::string& s) {
    if (s == "rule1") return BbRule::rule1;
    if (s == "rule2") return BbRule::rule2;
    if (s == "alternate") return BbRule::alternate;
    throw ConfigError("unknown bb_rule '" + s + "'");
}

/// Step length from secant information:
///   rule1 = <s,s>/<s,y>,  rule2 = <s,y>/<y,y>,  both capped by gamma_max.
/// `alternate` applies rule1 on even iterations and rule2 on odd ones.
/// Degenerate or non-positive curvature falls back to gamma_max.
inline double bb_step(const Vec& s_prev, const Vec& y_prev, double gamma_max, BbRule rule,
                      int iteration = 0) {
    if (s_prev.size() != y_prev.size()) throw DimensionError("bb_step: length mismatch");
    if (rule == BbRule::alternate)
        rule = (iteration % 2 == 0) ? BbRule::rule1 : BbRule::rule2;
    const double sy = s_prev.dot(y_prev);
    double num, den;
    if (rule == BbRule::rule1) {
        num = s_prev.dot(s_prev);
        den = sy;
    } else {
        num = sy;
        den = y_prev.dot(y_prev);
    }
    if (std::abs(den) <= 1e-14) return gamma_max;
    const double ratio = num / den;
    if (ratio <= 0.0) return gamma_max;
    return std::min(gamma_max, ratio);
}

// =============================================================================
// Training loop
// =============================================================================

struct TrainingConfig {
    Scenario scenario;
    ObservationRecord obs;
    NetworkShape shape;
    EnsembleSpec ensemble;
    int iters = 50;
    int shift_at = 20;
    double gamma_max = 1.0;
    BbRule bb_rule = BbRule::alternate;
    std::uint64_t init_seed = 42;
    double init_scale = 0.1;
    double first_step = 1e-2;
    bool alpha_in_gain = true;      // gain convention of the shift-time observer
    double observer_ridge = 1e-8;   // regularization for the shift-time observer

    void validate() const {
        scenario.validate();
        shape.validate();
        if (shape.state_dim() != scenario.model.n)
            throw ConfigError("training: network output width must equal the state dimension");
        if (iters < 0) throw ConfigError("training: iters must be >= 0");
        if (shift_at < 0 || shift_at > iters)
            throw ConfigError("training: shift_at must lie in [0, iters]");
        if (!(gamma_max > 0.0)) throw ConfigError("training: gamma_max must be positive");
        if (!(first_step > 0.0)) throw ConfigError("training: first_step must be positive");
    }
};

struct CostRecord {
    int iter = 0;
    double j_theta = 0.0;
    double gamma = 0.0;
    bool shift_active = false;
};

struct TrainingState {
    Theta theta;                           // best-cost parameters
    Vec grad;                              // last reduced gradient
    std::vector<CostRecord> cost_history;  // one record per iterate, including iter 0
    ShiftFunction shift;                   // shift paired with the returned theta
    std::optional<double> j_opt;           // exact optimal cost when the model is linear
    double best_cost = 0.0;
    int best_iter = 0;
};

/// Gradient descent with BB steps. The first step after initialization and
/// after the shift switch (where the objective changes and the secant history
/// is stale) uses `first_step`. At iteration k = shift_at a preliminary
/// observer is run with the current parameters and the shift is resampled as
/// g_s(t_k) = g_theta(xhat(t_k)); the cost recorded for that iteration
/// already uses the new shift. Returns the best-cost iterate.
inline std::pair<Theta, TrainingState> train(const TrainingConfig& cfg) {
    cfg.validate();
    const Scenario& sc = cfg.scenario;
    const TimeGrid grid = sc.grid();
    const int n = sc.model.n;

    const std::vector<Vec> terminals = sample_ensemble(cfg.ensemble);

    std::optional<double> j_opt;
    if (sc.model.linear) {
        const KalmanResult kr = kalman_bucy(sc.model, cfg.obs, sc);
        j_opt = ensemble_optimal_cost(kr, terminals, sc.T);
    }

    Theta theta = init_params(cfg.shape, cfg.init_seed, cfg.init_scale);
    ShiftFunction shift = ShiftFunction::zero(n);

    auto resample_shift = [&](const Theta& th) {
        const ObserverResult pre = network_observer(th, shift, cfg.obs, sc, cfg.alpha_in_gain,
                                                    cfg.observer_ridge);
        GridTrajectory gs = GridTrajectory::allocate(grid, n);
        for (int k = 0; k <= grid.steps; ++k)
            gs.at(k) = forward(th, network_input(cfg.shape, grid.node(k), pre.xhat.at(k)));
        shift = ShiftFunction::sampled(std::move(gs));
    };

    bool shift_active = false;
    if (cfg.shift_at == 0) {
        resample_shift(theta);
        shift_active = true;
    }

    auto eval = [&](const Theta& th) {
        return cost_and_gradient(th, shift, terminals, cfg.obs, sc);
    };

    auto [cost, grad] = eval(theta);

    TrainingState state;
    state.cost_history.push_back({0, cost, 0.0, shift_active});
    Theta best_theta = theta;
    ShiftFunction best_shift = shift;
    double best_cost = cost;
    int best_iter = 0;

    Vec theta_flat = theta.flatten();
    Vec theta_prev, grad_prev;
    bool have_history = false;

    for (int k = 1; k <= cfg.iters; ++k) {
        const double gamma = have_history
                                 ? bb_step(theta_flat - theta_prev, grad - grad_prev,
                                           cfg.gamma_max, cfg.bb_rule, k)
                                 : cfg.first_step;
        theta_prev = theta_flat;
        grad_prev = grad;
        theta_flat -= gamma * grad;
        theta = Theta::unflatten(cfg.shape, theta_flat);
        have_history = true;

        if (k == cfg.shift_at) {
            resample_shift(theta);
            shift_active = true;
            have_history = false;  // the objective changed; secant pair is stale
        }

        try {
            std::tie(cost, grad) = eval(theta);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("training diverged at iteration " + std::to_string(k) + ", " +
                                 e.what());
        }
        state.cost_history.push_back({k, cost, gamma, shift_active});
        if (cost < best_cost) {
            best_cost = cost;
            best_theta = theta;
            best_shift = shift;
            best_iter = k;
        }
    }

    state.theta = best_theta;
    state.grad = grad;
    state.shift = best_shift;
    state.j_opt = j_opt;
    state.best_cost = best_cost;
    state.best_iter = best_iter;
    return {best_theta, std::move(state)};
}

}  // namespace moen
