#include <algorithm>
#include <cmath>
#include <set>

#include "cubic/paramspace.hpp"
#include "cubic/rays.hpp"
#include "doctest.h"

using namespace cubic;

namespace {

const cplx I{0.0, 1.0};

CubicParam s1_point(cplx c) { return {c, c + 2.0 * c * c * c}; }

std::set<RayAngle> as_set(const std::vector<RayAngle>& v) { return {v.begin(), v.end()}; }

// Cardano: roots of z^3 + P z + Q.
std::vector<cplx> depressed_cubic_roots(cplx P, cplx Q) {
    const cplx disc = std::sqrt(Q * Q / 4.0 + P * P * P / 27.0);
    cplx u = std::pow(-Q / 2.0 + disc, 1.0 / 3.0);
    if (std::abs(u) < 1e-14) u = std::pow(-Q / 2.0 - disc, 1.0 / 3.0);
    const cplx omega = std::polar(1.0, kTwoPi / 3.0);
    std::vector<cplx> roots;
    for (int k = 0; k < 3; ++k) {
        const cplx uk = u * std::pow(omega, k);
        roots.push_back(uk - P / (3.0 * uk));
    }
    return roots;
}

// Point of the external ray of angle t at potential g, by Newton on the Bottcher
// coordinate from a nearby start.
cplx ray_point(const CubicParam& p, double t, double g, cplx z) {
    const cplx target = std::exp(cplx(g, kTwoPi * t));
    for (int it = 0; it < 50; ++it) {
        const cplx b = bottcher_infinity(p, z);
        const cplx h = 1e-7 * (1.0 + std::abs(z));
        const cplx db = (bottcher_infinity(p, z + h) - b) / h;
        const cplx dz = (b - target) / db;
        z -= dz;
        if (std::abs(dz) < 1e-14 * (1.0 + std::abs(z))) break;
    }
    return z;
}

}  // namespace

TEST_CASE("angle arithmetic: orbits, preimages, periods") {
    CHECK(angle_double_orbit(RayAngle(1, 7)) ==
          std::vector<RayAngle>{RayAngle(1, 7), RayAngle(2, 7), RayAngle(4, 7)});
    CHECK(angle_double_orbit(RayAngle(3, 7)) ==
          std::vector<RayAngle>{RayAngle(3, 7), RayAngle(6, 7), RayAngle(5, 7)});

    std::set<RayAngle> pre;
    for (auto t : {RayAngle(1, 7), RayAngle(2, 7), RayAngle(4, 7)})
        for (auto s : t.preimages(2)) pre.insert(s);
    CHECK(pre.size() == 6);
    for (auto s : {RayAngle(1, 14), RayAngle(9, 14), RayAngle(11, 14)}) CHECK(pre.count(s) == 1);

    CHECK(RayAngle(1, 13).period(3) == 3);
    CHECK(RayAngle(1, 7).period(2) == 3);
    CHECK(RayAngle(1, 14).period(2) == 0);
    CHECK(RayAngle(-1, 3) == RayAngle(2, 3));
    CHECK(RayAngle(6, 8) == RayAngle(3, 4));
    CHECK(periodic_angles(3, 1).size() == 2);  // 0 and 1/2
    CHECK(periodic_angles(2, 3).size() == 6);
}

TEST_CASE("external rays of z^3 are straight") {
    const CubicParam z3{0.0, 0.0};
    for (auto t : {RayAngle(0, 1), RayAngle(1, 13), RayAngle(1, 4), RayAngle(5, 8)}) {
        const auto ray = trace_external_ray(z3, t, 1e-10);
        REQUIRE(ray.samples.size() > 10);
        for (auto z : ray.samples) CHECK(std::abs(z / std::abs(z) - std::polar(1.0, kTwoPi * t.value())) < 1e-6);
        if (t.period(3) > 0) {
            REQUIRE(ray.landing == TracedRay::Landing::Landed);
            CHECK(std::abs(ray.cert.point - std::polar(1.0, kTwoPi * t.value())) < 1e-9);
        }
    }
    const auto r0 = trace_external_ray(z3, RayAngle(0, 1));
    const auto cert = landing_point(z3, r0);
    CHECK(cert.repelling);
    CHECK(std::abs(cert.multiplier - 3.0) < 1e-8);
}

TEST_CASE("external rays: monotone potentials and image invariance") {
    const CubicParam q = s1_point(cplx(0.05, 1.0 / std::sqrt(2.0)));
    for (int k : {1, 2, 4}) {
        const RayAngle t(k, 26);
        const auto ray = trace_external_ray(q, t, 1e-10);
        const auto img = trace_external_ray(q, t.tripled(), 1e-10);
        for (std::size_t i = 1; i < ray.potentials.size(); ++i) CHECK(ray.potentials[i] < ray.potentials[i - 1]);
        double worst = 0.0;
        for (std::size_t i = 0; i < ray.samples.size(); ++i) {
            const double g = 3.0 * ray.potentials[i];
            if (g > img.potentials.front() || g < 1e-8) continue;
            const cplx fz = evaluate(q, ray.samples[i]);
            // nearest traced sample of the image ray, then exact projection onto it
            const auto near = std::min_element(img.samples.begin(), img.samples.end(), [&](cplx x, cplx y) {
                return std::abs(x - fz) < std::abs(y - fz);
            });
            worst = std::max(worst, std::abs(fz - ray_point(q, t.tripled().value(), g, *near)));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("ray 0 of z^3 + i lands at a repelling fixed point") {
    const CubicParam q{0.0, I};
    const auto ray = trace_external_ray(q, RayAngle(0, 1));
    REQUIRE(ray.landing == TracedRay::Landing::Landed);
    const auto roots = depressed_cubic_roots(-1.0, I);  // z^3 - z + i = 0
    double best = 1e9;
    cplx root;
    for (auto r : roots)
        if (std::abs(r - ray.cert.point) < best) best = std::abs(r - ray.cert.point), root = r;
    CHECK(best < 1e-9);
    CHECK(std::abs(derivative(q, root)) > 1.0);
}

TEST_CASE("internal rays: radial for z^3, periodic landing for z^3 + i") {
    for (auto t : {RayAngle(0, 1), RayAngle(1, 7), RayAngle(3, 8)}) {
        const auto ray = trace_internal_ray(CubicParam{0.0, 0.0}, 1, 0, t);
        CHECK(ray.angle_factor == 3);
        for (std::size_t i = 0; i < ray.samples.size(); ++i) {
            const cplx z = ray.samples[i];
            if (std::abs(z) < 1e-12) continue;
            CHECK(std::abs(z / std::abs(z) - std::polar(1.0, kTwoPi * t.value())) < 1e-9);
            if (i > 0) CHECK(ray.potentials[i] > ray.potentials[i - 1]);
        }
    }

    const CubicParam q{0.0, I};
    const auto ray = trace_internal_ray(q, 2, 0, RayAngle(0, 1));
    const auto cert = landing_point(q, ray);
    REQUIRE(cert.certified);
    const cplx z = cert.point;
    CHECK(std::abs(evaluate(q, evaluate(q, z)) - z) < 1e-10);
    CHECK(std::abs(derivative(q, z) * derivative(q, evaluate(q, z))) > 1.0);
}

TEST_CASE("internal rays map to the doubled angle") {
    const CubicParam q = s1_point(cplx(0.05, 1.0 / std::sqrt(2.0)));
    for (int k : {1, 2, 4}) {
        const auto ray = trace_internal_ray(q, 1, 0, RayAngle(k, 7));
        const auto img = trace_internal_ray(q, 1, 0, RayAngle(2 * k, 7));
        CHECK(ray.angle_factor == 2);
        double worst = 0.0;
        for (std::size_t i = 0; i < ray.samples.size(); ++i) {
            const double g = 2.0 * ray.potentials[i];
            if (g < img.potentials.front() || g > -1e-9) continue;
            worst = std::max(worst, polyline_distance(img.samples, evaluate(q, ray.samples[i])));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("co-landing angle sets are forward invariant") {
    const CubicParam q = s1_point(cplx(0.05, 1.0 / std::sqrt(2.0)));
    const auto ray = trace_internal_ray(q, 1, 0, RayAngle(0, 1));
    const auto zeta = landing_point(q, ray);
    REQUIRE(zeta.certified);
    CHECK(zeta.repelling);
    const auto angles = colanding_external_angles(q, zeta, 9);
    REQUIRE(!angles.empty());
    const auto set = as_set(angles);
    for (auto t : angles) {
        CHECK(set.count(t.tripled()) == 1);
        const auto ext = trace_external_ray(q, t);
        REQUIRE(ext.landing == TracedRay::Landing::Landed);
        CHECK(std::abs(ext.cert.point - zeta.point) < 1e-7);
    }
}

TEST_CASE("touching point of the two cycle components on S_2") {
    CenterSearchOptions opts;
    opts.grid = 8;
    opts.q_max = 1;
    int found = 0;
    for (const auto& cs : center_search(2, ComponentType::D, opts)) {
        if (std::abs(cs.param.c.real()) > 1e-6) continue;
        const auto tp = touching_point_check(cs.param, 2, 0, 1);
        REQUIRE(tp.has_value());
        const cplx z = tp->point;
        CHECK(std::abs(iterate_n(cs.param, z, 2) - z) < 1e-10);
        CHECK(std::abs(tp->multiplier) > 1.0);
        // both 0-internal rays end there
        for (int j : {0, 1}) {
            const auto ray = trace_internal_ray(cs.param, 2, j, RayAngle(0, 1));
            CHECK(std::abs(ray.samples.back() - z) < 1e-3);
        }
        ++found;
    }
    CHECK(found == 2);
}

TEST_CASE("polyline distance") {
    const std::vector<cplx> poly{0.0, 1.0, cplx(1.0, 1.0)};
    CHECK(polyline_distance(poly, cplx(0.5, 0.25)) == doctest::Approx(0.25));
    CHECK(polyline_distance(poly, cplx(2.0, 0.5)) == doctest::Approx(1.0));
    CHECK(segment_distance(0.0, 1.0, cplx(-1.0, 0.0)) == doctest::Approx(1.0));
}
