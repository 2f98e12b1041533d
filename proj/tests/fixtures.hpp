#pragma once

// Shared experiment fixtures for the test suites.

#include "moen/systems.hpp"

namespace moen::testfix {

/// Forced harmonic oscillator with the disturbances used throughout the
/// linear experiments: v = 0.1 cos(1.2 t), w = 0.1 sin(0.5 t),
/// x(0) = (-0.1548, 0.2969), prior x0 = 0, Q0 = I.
inline Scenario harmonic_scenario(double alpha = 1.0, double T = 10.0, int steps = 1000) {
    Scenario sc;
    sc.model = harmonic_model();
    sc.x0_prior = Vec{0.0, 0.0};
    sc.x_true_init = Vec{-0.1548, 0.2969};
    sc.v = Signal::cosine(0.1, 1.2);
    sc.w = Signal::sine(0.1, 0.5);
    sc.T = T;
    sc.alpha = alpha;
    sc.Q0 = Mat::identity(2);
    sc.grid_steps = steps;
    return sc;
}

/// Duffing training scenario: effective forcing 0.2 cos(1.2 t) through
/// G = (0, 0.2), error-free measurement, T = 15.
inline Scenario duffing_scenario(double alpha = 1.0, double T = 15.0, int steps = 1500) {
    Scenario sc;
    sc.model = duffing_model();
    sc.x0_prior = Vec{0.0, 0.0};
    sc.x_true_init = Vec{0.0646, -0.1465};
    sc.v = Signal::cosine(1.0, 1.2);
    sc.w = Signal::zero();
    sc.T = T;
    sc.alpha = alpha;
    sc.Q0 = Mat::identity(2);
    sc.grid_steps = steps;
    return sc;
}

/// Zero-disturbance harmonic scenario whose estimate should replicate the
/// truth exactly (w = v = 0 and the prior equals the true initial state).
/// The fine default grid keeps the interpolation noise of the sampled
/// observation below the tight zero-innovation tolerances.
inline Scenario harmonic_perfect_scenario(double T = 10.0, int steps = 4000) {
    Scenario sc = harmonic_scenario(1.0, T, steps);
    sc.v = Signal::zero();
    sc.w = Signal::zero();
    sc.x0_prior = Vec{0.4, -0.2};
    sc.x_true_init = sc.x0_prior;
    return sc;
}

}  // namespace moen::testfix
