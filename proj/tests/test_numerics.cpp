#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "moen/numerics.hpp"
#include "moen/rng.hpp"

using namespace moen;
using Catch::Approx;

namespace {

Vec harmonic_rhs(double, const Vec& x) { return Vec{x[1], -x[0]}; }

constexpr double kTwoPi = 6.283185307179586;

}  // namespace

TEST_CASE("rk4 reproduces exp growth", "[numerics][integrate]") {
    auto rhs = [](double, const Vec& x) { return x; };
    const TimeGrid grid(0.0, 1.0, 100);
    const GridTrajectory traj = integrate(rhs, Vec{1.0}, grid, Direction::forward);
    CHECK(std::abs(traj.at(100)[0] - std::exp(1.0)) < 1e-7);
}

TEST_CASE("backward harmonic solve conserves energy", "[numerics][integrate]") {
    const TimeGrid grid(0.0, kTwoPi, 2000);
    const GridTrajectory traj =
        integrate(harmonic_rhs, Vec{1.0, 0.0}, grid, Direction::backward);
    // Start value sits at the start node of the traversal (t1 for backward).
    CHECK(traj.at(2000)[0] == 1.0);
    CHECK(traj.at(2000)[1] == 0.0);
    for (int k = 0; k <= grid.steps; ++k)
        CHECK(std::abs(traj.at(k).norm() - 1.0) < 1e-6);
}

TEST_CASE("zero rhs keeps the trajectory constant exactly", "[numerics][integrate]") {
    auto rhs = [](double, const Vec& x) { return Vec(x.size()); };
    const TimeGrid grid(0.0, 3.0, 17);
    const GridTrajectory traj = integrate(rhs, Vec{2.5, -1.0}, grid, Direction::forward);
    for (int k = 0; k <= grid.steps; ++k) {
        CHECK(traj.at(k)[0] == 2.5);
        CHECK(traj.at(k)[1] == -1.0);
    }
}

TEST_CASE("rk4 is fourth order on the harmonic oscillator", "[numerics][integrate]") {
    auto end_error = [](int steps) {
        const TimeGrid grid(0.0, kTwoPi, steps);
        const GridTrajectory traj =
            integrate(harmonic_rhs, Vec{1.0, 0.0}, grid, Direction::forward);
        return (traj.at(steps) - Vec{1.0, 0.0}).norm();
    };
    const double ratio = end_error(100) / end_error(200);
    CHECK(ratio > 16.0 * 0.8);
    CHECK(ratio < 16.0 * 1.2);
}

TEST_CASE("backward then forward returns to the start", "[numerics][integrate]") {
    const TimeGrid grid(0.0, 10.0, 1000);
    const Vec end{0.3, -0.7};
    const GridTrajectory back = integrate(harmonic_rhs, end, grid, Direction::backward);
    const GridTrajectory fwd = integrate(harmonic_rhs, back.at(0), grid, Direction::forward);
    CHECK((fwd.at(1000) - end).norm() < 1e-6);
}

TEST_CASE("integrator reports blow-up as NonFinite", "[numerics][integrate]") {
    auto rhs = [](double, const Vec& x) { return Vec{x[0] * x[0]}; };
    const TimeGrid grid(0.0, 2.0, 200);
    CHECK_THROWS_AS(integrate(rhs, Vec{1.0}, grid, Direction::forward), NonFiniteError);
}

TEST_CASE("solve_dense basic solves", "[numerics][solve]") {
    SECTION("identity") {
        const Vec x = solve_dense(Mat::identity(2), Vec{3.0, 4.0});
        CHECK(x[0] == Approx(3.0));
        CHECK(x[1] == Approx(4.0));
    }
    SECTION("rotation matrix") {
        // inverse of the rotation is [[0,-1],[1,0]], so M^{-1} (1,0) = (0,1)
        const Mat m{{0.0, 1.0}, {-1.0, 0.0}};
        const Vec x = solve_dense(m, Vec{1.0, 0.0});
        CHECK(x[0] == Approx(0.0).margin(1e-15));
        CHECK(x[1] == Approx(1.0));
        const Vec back = m * x;
        CHECK(back[0] == Approx(1.0));
        CHECK(back[1] == Approx(0.0).margin(1e-15));
    }
    SECTION("rank-1 matrix is singular") {
        const Mat m{{1.0, 1.0}, {1.0, 1.0}};
        CHECK_THROWS_AS(solve_dense(m, Vec{1.0, 2.0}), SingularError);
    }
    SECTION("ridge regularizes the zero matrix") {
        const Vec x = solve_dense(Mat::zeros(2, 2), Vec{1.0, -2.0}, 1e-6);
        CHECK(x[0] == Approx(1e6));
        CHECK(x[1] == Approx(-2e6));
    }
}

TEST_CASE("solve_dense round-trips random well-conditioned systems", "[numerics][solve]") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        Mat m(2, 2);
        do {
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) m(i, j) = rng.uniform(-2.0, 2.0);
        } while (std::abs(determinant(m)) < 0.5);
        Vec x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const Vec recovered = solve_dense(m, m * x);
        CHECK((recovered - x).norm() < 1e-10);
    }
}

TEST_CASE("eval_at interpolates and clamps", "[numerics][trajectory]") {
    const TimeGrid grid(0.0, 1.0, 1);
    GridTrajectory traj(grid, {Vec{0.0}, Vec{1.0}});
    CHECK(traj.eval_at(0.5)[0] == Approx(0.5));
    CHECK(traj.eval_at(0.0)[0] == 0.0);
    CHECK(traj.eval_at(1.0)[0] == 1.0);
    CHECK(traj.eval_at(1.0 + 1e-10)[0] == 1.0);  // within slack: clamped
    CHECK_THROWS_AS(traj.eval_at(1.0 + 1e-8), OutOfRangeError);
    CHECK_THROWS_AS(traj.eval_at(-1e-8), OutOfRangeError);
}

TEST_CASE("eval_at is exact at nodes", "[numerics][trajectory]") {
    const TimeGrid grid(0.0, 2.0, 4);
    GridTrajectory traj = GridTrajectory::allocate(grid, 2);
    for (int k = 0; k <= 4; ++k) traj.at(k) = Vec{0.1 * k, -0.3 * k};
    for (int k = 0; k <= 4; ++k) {
        const Vec v = traj.eval_at(grid.node(k));
        CHECK(v[0] == traj.at(k)[0]);
        CHECK(v[1] == traj.at(k)[1]);
    }
}

TEST_CASE("trapezoid quadrature", "[numerics][quadrature]") {
    SECTION("constant integrand is exact") {
        const TimeGrid grid(0.0, 2.0, 7);
        GridTrajectory traj = GridTrajectory::allocate(grid, 1);
        for (int k = 0; k <= 7; ++k) traj.at(k) = Vec{1.0};
        CHECK(trapezoid(traj) == Approx(2.0).epsilon(1e-14));
    }
    SECTION("linear integrand is exact") {
        const TimeGrid grid(0.0, 1.0, 10);
        GridTrajectory traj = GridTrajectory::allocate(grid, 1);
        for (int k = 0; k <= 10; ++k) traj.at(k) = Vec{grid.node(k)};
        CHECK(trapezoid(traj) == Approx(0.5).epsilon(1e-14));
    }
    SECTION("quadratic integrand meets the h^2 bound") {
        const TimeGrid grid(0.0, 1.0, 100);
        GridTrajectory traj = GridTrajectory::allocate(grid, 1);
        for (int k = 0; k <= 100; ++k) traj.at(k) = Vec{grid.node(k) * grid.node(k)};
        CHECK(std::abs(trapezoid(traj) - 1.0 / 3.0) < 2e-5);
    }
    SECTION("partial upper limit matches the full rule at t1") {
        const TimeGrid grid(0.0, 1.0, 10);
        GridTrajectory traj = GridTrajectory::allocate(grid, 1);
        for (int k = 0; k <= 10; ++k) traj.at(k) = Vec{std::sin(grid.node(k))};
        CHECK(trapezoid(traj, 1.0) == Approx(trapezoid(traj)).epsilon(1e-14));
        CHECK(trapezoid(traj, 0.0) == 0.0);
    }
}

TEST_CASE("determinant and spd checks", "[numerics][linalg]") {
    CHECK(determinant(Mat{{0.0, 1.0}, {-1.0, 0.0}}) == Approx(1.0));
    CHECK(determinant(Mat{{1.0, 1.0}, {1.0, 1.0}}) == 0.0);
    CHECK(is_spd(Mat{{2.0, 0.5}, {0.5, 1.0}}));
    CHECK_FALSE(is_spd(Mat{{1.0, 2.0}, {2.0, 1.0}}));   // indefinite
    CHECK_FALSE(is_spd(Mat{{1.0, 0.3}, {0.0, 1.0}}));   // not symmetric
}

TEST_CASE("dimension mismatches are rejected", "[numerics][linalg]") {
    CHECK_THROWS_AS((Vec{1.0, 2.0} + Vec{1.0}), DimensionError);
    CHECK_THROWS_AS(Mat::identity(2) * Vec{1.0}, DimensionError);
    CHECK_THROWS_AS(solve_dense(Mat::zeros(2, 3), Vec{1.0, 2.0}), DimensionError);
}
