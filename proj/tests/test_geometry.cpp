#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>

#include "mrc/geometry.hpp"
#include "mrc/rng.hpp"

using namespace mrc;

TEST_CASE("normalize_angle maps onto (-pi, pi]") {
    const double pi = std::numbers::pi;
    CHECK(normalize_angle(0.0) == doctest::Approx(0.0));
    CHECK(normalize_angle(pi) == doctest::Approx(pi));
    CHECK(normalize_angle(-pi) == doctest::Approx(pi));
    CHECK(normalize_angle(3.0 * pi) == doctest::Approx(pi));
    CHECK(normalize_angle(2.0 * pi) == doctest::Approx(0.0));
    CHECK(normalize_angle(-0.5 * pi) == doctest::Approx(-0.5 * pi));
    for (double a = -20.0; a <= 20.0; a += 0.37) {
        const double n = normalize_angle(a);
        CHECK(n > -std::numbers::pi);
        CHECK(n <= std::numbers::pi);
        // Same direction up to a full turn.
        CHECK(std::abs(std::remainder(n - a, 2.0 * std::numbers::pi)) ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("Pose2D constructor normalizes heading and rejects non-finite input") {
    Pose2D p(1.0, 2.0, 3.0 * std::numbers::pi);
    CHECK(p.heading == doctest::Approx(std::numbers::pi));
    CHECK_THROWS_AS(Pose2D(std::nan(""), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Pose2D(0.0, std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
}

TEST_CASE("distance and vector norm") {
    CHECK(distance(Pose2D(0, 0), Pose2D(3, 4)) == doctest::Approx(5.0));
    const Vec2 v = Pose2D(3, 4) - Pose2D(0, 0);
    CHECK(norm(v) == doctest::Approx(5.0));
}

TEST_CASE("Rect containment is inclusive at the boundary") {
    Rect r{1.0, 2.0, 0.5, 0.25};
    CHECK(r.contains(1.0, 2.0));
    CHECK(r.contains(1.5, 2.25));
    CHECK(!r.contains(1.51, 2.0));
    CHECK(!r.contains(1.0, 2.26));
}

TEST_CASE("Bounds containment and clamping") {
    Bounds b{-6.0, 6.0, -10.0, 10.0};
    CHECK(b.contains(0.0, 0.0));
    CHECK(b.contains(-6.0, 10.0));
    CHECK(!b.contains(6.1, 0.0));
    CHECK(b.clamp_x(7.0) == doctest::Approx(6.0));
    CHECK(b.clamp_y(-11.0) == doctest::Approx(-10.0));
}

TEST_CASE("lerp_along interpolates position and aligns heading with the segment") {
    Pose2D a(0, 0, 0), b(2, 2, 0);
    Pose2D mid = lerp_along(a, b, 0.5);
    CHECK(mid.x == doctest::Approx(1.0));
    CHECK(mid.y == doctest::Approx(1.0));
    CHECK(mid.heading == doctest::Approx(std::numbers::pi / 4));
    // Degenerate segment keeps the start heading.
    Pose2D same = lerp_along(Pose2D(1, 1, 0.7), Pose2D(1, 1, 0.7), 0.3);
    CHECK(same.heading == doctest::Approx(0.7));
}

TEST_CASE("Rng is deterministic per seed and uniform stays in [0, 1)") {
    Rng a(123), b(123), c(124);
    bool diverged = false;
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        if (u != c.uniform()) diverged = true;
    }
    CHECK(diverged);
    Rng r(7);
    for (int i = 0; i < 100; ++i) {
        const double v = r.uniform(-3.0, 5.0);
        CHECK(v >= -3.0);
        CHECK(v < 5.0);
        CHECK(r.uniform_index(10) < 10);
    }
    CHECK(Rng(1).uniform_index(0) == 0);
}

TEST_CASE("derive_seed separates task and trial streams") {
    std::set<std::uint64_t> seen;
    for (int task = 1; task <= 4; ++task) {
        for (int trial = 0; trial < 20; ++trial) {
            seen.insert(derive_seed(42, task, trial));
        }
    }
    CHECK(seen.size() == 80);
    CHECK(derive_seed(42, 1, 0) != derive_seed(43, 1, 0));
    CHECK(derive_seed(42, 1, 0) == derive_seed(42, 1, 0));
}
