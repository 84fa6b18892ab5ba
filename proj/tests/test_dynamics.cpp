#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "cubic/dynamics.hpp"
#include "doctest.h"

using namespace cubic;
using doctest::Approx;

namespace {

const cplx I{0.0, 1.0};

// Curve point with c fixed: f(c) = c gives a = c + 2c^3.
CubicParam s1_point(cplx c) { return {c, c + 2.0 * c * c * c}; }

}  // namespace

TEST_CASE("evaluate and derivative on hand values") {
    CHECK(evaluate({0, 0}, 2.0) == cplx(8.0));
    CHECK(evaluate({1, 2}, 1.0) == cplx(0.0));
    CHECK(evaluate({1, 0}, 2.0) == cplx(2.0));
    CHECK(derivative({1, 5}, 1.0) == cplx(0.0));
    CHECK(derivative({0, 5}, 2.0) == cplx(12.0));
}

TEST_CASE("derivative agrees with a central difference") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        CubicParam p{{u(rng), u(rng)}, {u(rng), u(rng)}};
        cplx z{u(rng), u(rng)};
        const double h = 1e-6;
        cplx fd = (evaluate(p, z + h) - evaluate(p, z - h)) / (2.0 * h);
        CHECK(std::abs(derivative(p, z) - fd) < 1e-6);
    }
}

TEST_CASE("critical values are hit exactly") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        CubicParam p{{u(rng), u(rng)}, {u(rng), u(rng)}};
        cplx c3 = p.c * p.c * p.c;
        CHECK(std::abs(evaluate(p, p.c) - (-2.0 * c3 + p.a)) < 1e-12 * (1 + std::abs(c3)));
        CHECK(std::abs(evaluate(p, -p.c) - (2.0 * c3 + p.a)) < 1e-12 * (1 + std::abs(c3)));
        CHECK(derivative(p, p.c) == cplx(0.0));
        CHECK(derivative(p, -p.c) == cplx(0.0));
    }
}

TEST_CASE("escape bound values and doubling property") {
    CHECK(escape_bound({0, 0}).radius == Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(escape_bound({1, 0}).radius == Approx(std::sqrt(5.0)).epsilon(1e-15));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi);
    for (int i = 0; i < 1000; ++i) {
        CubicParam p{{u(rng), u(rng)}, {u(rng), u(rng)}};
        double r = escape_bound(p).radius * (1.0 + 1e-6);
        cplx z = std::polar(r, ang(rng));
        CHECK(std::abs(evaluate(p, z)) >= 2.0 * std::abs(z));
    }
}

TEST_CASE("iterate: escape, fixed point, and period-2 cycle") {
    Orbit o = iterate({0, 0}, 2.0, 10, escape_bound({0, 0}));
    CHECK(o.status == Orbit::Status::Escaped);
    CHECK(o.n == 0);

    o = iterate({0, 0}, 0.5, 100, escape_bound({0, 0}));
    REQUIRE(o.status == Orbit::Status::ConvergedToCycle);
    REQUIRE(o.cycle.size() == 1);
    CHECK(std::abs(o.cycle[0]) < 1e-12);

    CubicParam q{0, I};
    o = iterate(q, 0.0, 100, escape_bound(q));
    REQUIRE(o.status == Orbit::Status::ConvergedToCycle);
    REQUIRE(o.cycle.size() == 2);
    CHECK(std::abs(o.cycle[0]) < 1e-12);
    CHECK(std::abs(o.cycle[1] - I) < 1e-12);
    for (size_t k = 0; k + 1 < o.samples.size(); ++k)
        CHECK(std::abs(evaluate(q, o.samples[k]) - o.samples[k + 1]) == 0.0);
}

TEST_CASE("exact_period examples") {
    CHECK(exact_period({0, 0}, 0.0, 1));
    CHECK(exact_period({0, I}, 0.0, 2));
    CHECK_FALSE(exact_period({0, I}, 0.0, 1));
    CHECK(exact_period({1, 3}, 1.0, 1));
    // a point returning to within 1e-8 of itself is ambiguous
    CubicParam p = s1_point(0.3);
    CHECK_THROWS_AS(exact_period(p, 0.3 + 1e-8, 1), Error);
}

TEST_CASE("find_cycle examples") {
    MarkedCycle c0 = find_cycle({0, 0}, 0.1, 1);
    CHECK(std::abs(c0.points[0]) < 1e-12);
    CHECK(std::abs(c0.multiplier) < 1e-12);

    MarkedCycle c1 = find_cycle({0, I}, 0.01, 2);
    CHECK(std::abs(c1.points[0]) < 1e-12);
    CHECK(std::abs(c1.points[1] - I) < 1e-12);
    CHECK(std::abs(c1.multiplier) < 1e-12);

    MarkedCycle c2 = find_cycle({0, 0}, 1.05, 1);
    CHECK(std::abs(c2.points[0] - 1.0) < 1e-12);
    CHECK(std::abs(c2.multiplier - 3.0) < 1e-10);

    CHECK_THROWS_AS(find_cycle({0, 0}, 0.1, 2), Error);
}

TEST_CASE("green_infinity on z^3 and the functional equation") {
    CHECK(green_infinity({0, 0}, 2.0).value == Approx(std::log(2.0)).epsilon(1e-12));
    GreenValue b = green_infinity({0, 0}, 0.5);
    CHECK(b.bounded);
    CHECK(b.value == 0.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    int checked = 0;
    for (int i = 0; i < 400 && checked < 100; ++i) {
        CubicParam p = s1_point({u(rng), u(rng)});
        cplx z{2 * u(rng), 2 * u(rng)};
        GreenValue g0 = green_infinity(p, z);
        GreenValue g1 = green_infinity(p, evaluate(p, z));
        if (g0.bounded || g1.bounded) continue;
        CHECK(g1.value == Approx(3.0 * g0.value).epsilon(1e-8));
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("bottcher_infinity: identity for z^3, cube law and modulus elsewhere") {
    CHECK(std::abs(bottcher_infinity({0, 0}, 2.0) - 2.0) < 1e-12);
    CHECK(std::abs(bottcher_infinity({0, 0}, 2.0 * I) - 2.0 * I) < 1e-12);
    CHECK(std::abs(bottcher_infinity({0, 0}, 1.0001 * I) - 1.0001 * I) < 1e-12);
    CHECK_THROWS_AS(bottcher_infinity({0, 0}, 0.5), Error);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 400 && checked < 60; ++i) {
        CubicParam p = s1_point({0.6 * u(rng), 0.6 * u(rng)});
        cplx z{1.5 * u(rng), 1.5 * u(rng)};
        GreenValue g = green_infinity(p, z);
        if (g.bounded || g.value < 1e-6) continue;
        cplx b0, b1;
        try {
            b0 = bottcher_infinity(p, z);
            b1 = bottcher_infinity(p, evaluate(p, z));
        } catch (const Error& e) {
            // below the escaping critical point's level
            CHECK(e.code() == Err::OutsideDomain);
            CHECK(g.value <= green_infinity(p, -p.c).value);
            continue;
        }
        CHECK(std::abs(std::abs(b0) - std::exp(g.value)) < 1e-8 * std::abs(b0));
        CHECK(std::abs(b1 - b0 * b0 * b0) < 1e-8 * std::abs(b1));
        ++checked;
    }
    CHECK(checked == 60);
}

TEST_CASE("green_basin on z^3 and the unicritical period-2 map") {
    MarkedCycle fixed0 = critical_cycle({0, 0}, 1);
    CHECK(green_basin({0, 0}, fixed0, 0.5) == Approx(std::log(0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(green_basin({0, 0}, fixed0, 2.0), Error);

    // Reference: 3^-n log|sqrt(3) F^n(z)| with F = f^2, iterated in ~210 digits.
    using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<700>>;
    Big re = 0.1, im = 0;
    const int n = 4;  // keeps |F^n| well above the working precision
    for (int k = 0; k < 2 * n; ++k) {
        Big r2 = re * re - im * im, i2 = 2 * re * im;
        Big r3 = r2 * re - i2 * im, i3 = r2 * im + i2 * re;
        re = r3;
        im = i3 + 1;
    }
    Big modulus = sqrt(re * re + im * im) * sqrt(Big(3));
    double ref = static_cast<double>(log(modulus) / pow(Big(3), n));
    MarkedCycle cyc = critical_cycle({0, I}, 2);
    double g = green_basin({0, I}, cyc, 0.1);
    CHECK(g < 0.0);
    CHECK(g == Approx(ref).epsilon(1e-12));
}

TEST_CASE("green_basin doubles under the return map on generic S_1 points") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 2000 && checked < 100; ++i) {
        CubicParam p = s1_point({0.8 * u(rng), 0.8 * u(rng)});
        if (std::abs(p.c) < 0.05) continue;
        MarkedCycle cyc = critical_cycle(p, 1);
        cplx z = p.c + 0.3 * cplx(u(rng), u(rng)) * std::abs(p.c);
        double g0, g1;
        try {
            g0 = green_basin(p, cyc, z);
            g1 = green_basin(p, cyc, evaluate(p, z));
        } catch (const Error&) {
            continue;
        }
        CHECK(g1 == Approx(2.0 * g0).epsilon(1e-8));
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("bottcher_basin: identity for z^3, squaring law and modulus") {
    CHECK(std::abs(bottcher_basin({0, 0}, 0.0, 0.3, 1) - 0.3) < 1e-12);
    CHECK(std::abs(bottcher_basin({0, 0}, 0.0, 0.3 * I, 1) - 0.3 * I) < 1e-12);

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 4000 && checked < 60; ++i) {
        CubicParam p = s1_point({0.8 * u(rng), 0.8 * u(rng)});
        if (std::abs(p.c) < 0.1) continue;
        MarkedCycle cyc = critical_cycle(p, 1);
        cplx z = p.c + 0.5 * cplx(u(rng), u(rng)) * std::abs(p.c);
        cplx b0, b1;
        double g0;
        try {
            b0 = bottcher_basin(p, p.c, z, 1);
            b1 = bottcher_basin(p, p.c, evaluate(p, z), 1);
            g0 = green_basin(p, cyc, z);
        } catch (const Error&) {
            continue;
        }
        CHECK(std::abs(std::abs(b0) - std::exp(g0)) < 1e-8 * std::abs(b0));
        CHECK(std::abs(b1 - b0 * b0) < 1e-8 * std::max(std::abs(b1), 1e-3));
        ++checked;
    }
    CHECK(checked == 60);
}

TEST_CASE("conjugation symmetry of critical orbits") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        CubicParam p{{u(rng), u(rng)}, {u(rng), u(rng)}};
        CubicParam q = negate(p);
        cplx x = p.c, y = q.c;  // z -> -z conjugates p to (-c,-a)
        for (int k = 0; k < 6 && std::abs(x) < 1e6; ++k) {
            CHECK(std::abs(y + x) <= 1e-12 * (1 + std::abs(x)));
            x = evaluate(p, x);
            y = evaluate(q, y);
        }
    }
}
