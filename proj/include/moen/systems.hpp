#pragma once

// Dynamical models, deterministic disturbance signals and ground-truth /
// observation generation for
//     x' = f(x) + G v,   y = C x + w,   x(0) = x0 + zeta.

#include <functional>
#include <string>
#include <utility>

#include "moen/errors.hpp"
#include "moen/numerics.hpp"

namespace moen {

/// Known model data: drift f with Jacobian Df, disturbance matrix G and
/// output matrix C.
struct SystemModel {
    std::string name;
    int n = 0;  // state dimension
    int m = 0;  // disturbance dimension
    int r = 0;  // output dimension
    bool linear = false;
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> Df;
    Mat G;  // n x m
    Mat C;  // r x n
};

/// Closed-form scalar signal a*cos(w t) / a*sin(w t) / 0.
struct Signal {
    enum class Kind { zero, cosine, sine };
    Kind kind = Kind::zero;
    double amplitude = 0.0;
    double frequency = 0.0;  // rad per unit time

    static Signal zero() { return {}; }
    static Signal cosine(double a, double w) { return {Kind::cosine, a, w}; }
    static Signal sine(double a, double w) { return {Kind::sine, a, w}; }

    double operator()(double t) const {
        switch (kind) {
            case Kind::cosine: return amplitude * std::cos(frequency * t);
            case Kind::sine: return amplitude * std::sin(frequency * t);
            case Kind::zero: break;
        }
        return 0.0;
    }

    bool is_zero() const { return kind == Kind::zero || amplitude == 0.0; }
};

/// One estimation experiment: prior, true initial state, disturbances,
/// horizon, misfit weight alpha and initial-penalty weight Q0.
struct Scenario {
    SystemModel model;
    Vec x0_prior;     // a-priori guess x0
    Vec x_true_init;  // x0 + zeta, used to generate the data
    Signal v;
    Signal w;
    double T = 10.0;
    double alpha = 1.0;
    Mat Q0;
    int grid_steps = 1000;

    TimeGrid grid() const { return TimeGrid(0.0, T, grid_steps); }

    void validate() const {
        if (!(T > 0.0)) throw ConfigError("scenario: T must be positive");
        if (!(alpha > 0.0)) throw ConfigError("scenario: alpha must be positive");
        if (grid_steps < 1) throw ConfigError("scenario: grid_steps must be >= 1");
        if (static_cast<int>(x0_prior.size()) != model.n ||
            static_cast<int>(x_true_init.size()) != model.n)
            throw ConfigError("scenario: initial-state dimension mismatch");
        if (static_cast<int>(Q0.rows()) != model.n || static_cast<int>(Q0.cols()) != model.n)
            throw ConfigError("scenario: Q0 dimension mismatch");
        if (!is_spd(Q0)) throw ConfigError("scenario: Q0 must be symmetric positive definite");
    }
};

/// Ground truth and the observation sampled on the scenario grid;
/// y(t_k) = C x_truth(t_k) + w(t_k) holds exactly at every node.
struct ObservationRecord {
    TimeGrid grid;
    GridTrajectory y;        // r-dim
    GridTrajectory x_truth;  // n-dim
};

/// Undamped forced oscillator in first-order form:
///   A = (0 1; -1 0),  G = (0; 1),  C = (1 0).
inline SystemModel harmonic_model() {
    SystemModel model;
    model.name = "harmonic";
    model.n = 2;
    model.m = 1;
    model.r = 1;
    model.linear = true;
    const Mat a{{0.0, 1.0}, {-1.0, 0.0}};
    model.f = [a](const Vec& x) { return a * x; };
    model.Df = [a](const Vec&) { return a; };
    model.G = Mat{{0.0}, {1.0}};
    model.C = Mat{{1.0, 0.0}};
    return model;
}

/// Damped driven Duffing oscillator x1'' + 0.3 x1' - x1 + x1^3 = forcing,
/// with the forcing entering through G = (0; 0.2).
inline SystemModel duffing_model() {
    SystemModel model;
    model.name = "duffing";
    model.n = 2;
    model.m = 1;
    model.r = 1;
    model.linear = false;
    model.f = [](const Vec& x) {
        return Vec{x[1], x[0] - x[0] * x[0] * x[0] - 0.3 * x[1]};
    };
    model.Df = [](const Vec& x) {
        return Mat{{0.0, 1.0}, {1.0 - 3.0 * x[0] * x[0], -0.3}};
    };
    model.G = Mat{{0.0}, {0.2}};
    model.C = Mat{{1.0, 0.0}};
    return model;
}

/// Integrates the disturbed dynamics forward from x_true_init and samples
/// y = C x + w at every node.
inline ObservationRecord simulate_truth(const Scenario& sc) {
    sc.validate();
    const SystemModel& model = sc.model;
    const TimeGrid grid = sc.grid();

    auto rhs = [&](double t, const Vec& x) {
        Vec dist(model.m, sc.v(t));
        return model.f(x) + model.G * dist;
    };
    GridTrajectory x_truth = integrate(rhs, sc.x_true_init, grid, Direction::forward);

    GridTrajectory y = GridTrajectory::allocate(grid, model.r);
    for (int k = 0; k <= grid.steps; ++k) {
        const double t = grid.node(k);
        Vec yk = model.C * x_truth.at(k);
        const double wk = sc.w(t);
        for (std::size_t i = 0; i < yk.size(); ++i) yk[i] += wk;
        y.at(k) = yk;
    }
    return ObservationRecord{grid, std::move(y), std::move(x_truth)};
}

}  // namespace moen
