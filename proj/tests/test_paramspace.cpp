#include <cmath>

#include "cubic/curve.hpp"
#include "cubic/paramspace.hpp"
#include "doctest.h"

using namespace cubic;

namespace {

const cplx I{0.0, 1.0};

CenterSearchOptions coarse() {
    CenterSearchOptions o;
    o.grid = 8;
    return o;
}

bool has_center(const std::vector<CenterSolution>& v, cplx c, cplx a) {
    for (const auto& s : v)
        if (std::abs(s.param.c - c) < 1e-8 && std::abs(s.param.a - a) < 1e-8) return true;
    return false;
}

CenterSolution first_of(const std::vector<CenterSolution>& v) {
    REQUIRE(!v.empty());
    return v.front();
}

}  // namespace

TEST_CASE("center_search finds the known centers") {
    const auto a1 = center_search(1, ComponentType::A, coarse());
    CHECK(has_center(a1, 0.0, 0.0));
    const auto a2 = center_search(2, ComponentType::A, coarse());
    CHECK(has_center(a2, 0.0, I));
    CHECK(has_center(a2, 0.0, -I));
    const auto b2 = center_search(2, ComponentType::B, coarse());
    CHECK(has_center(b2, 1.0 / std::sqrt(2.0), 0.0));
    CHECK(has_center(b2, -1.0 / std::sqrt(2.0), 0.0));
    const auto d1 = center_search(1, ComponentType::D, coarse());
    CHECK(has_center(d1, I / std::sqrt(2.0), 0.0));
    CHECK(has_center(d1, -I / std::sqrt(2.0), 0.0));
    for (const auto& s : d1) {
        CHECK(s.curve_residual < 1e-10);
        CHECK(s.relation_residual < 1e-10);
        CHECK(classify(s.param, 1).kind == OrbitClass::Kind::TypeD);
    }
}

TEST_CASE("Phi and rho vanish at centers and stay in the disk") {
    for (auto [p, type] : {std::pair{1, ComponentType::A}, std::pair{2, ComponentType::B},
                           std::pair{1, ComponentType::C}, std::pair{1, ComponentType::D}}) {
        const auto cs = first_of(center_search(p, type, coarse()));
        const auto chart = build_chart(cs, 24);
        CHECK(std::abs(chart.value(cs.param)) < 1e-8);
        int seen = 0;
        for (std::size_t i = 0; i < chart.inside.size() && seen < 50; i += 3) {
            if (!chart.inside[i]) continue;
            const cplx c = chart.origin + cplx((i % chart.n + 0.5) * chart.h, (i / chart.n + 0.5) * chart.h);
            const CubicParam q{c, chart.a_values[i]};
            CHECK(std::abs(on_curve_residual(q.c, q.a, p).residual) < 1e-10);
            CHECK(std::abs(chart.value(q)) < 1.0);
            ++seen;
        }
        CHECK(seen > 0);
    }
}

TEST_CASE("|Phi_C| is exp of the basin Green function") {
    const auto cs = first_of(center_search(1, ComponentType::C, coarse()));
    const auto chart = build_chart(cs, 24);
    int seen = 0;
    for (std::size_t i = 0; i < chart.inside.size() && seen < 20; ++i) {
        if (!chart.inside[i]) continue;
        const cplx c = chart.origin + cplx((i % chart.n + 0.5) * chart.h, (i / chart.n + 0.5) * chart.h);
        const CubicParam q{c, chart.a_values[i]};
        const cplx z = iterate_n(q, -q.c, cs.l);
        const double g = green_basin(q, critical_cycle(q, 1), z);
        CHECK(std::abs(std::abs(chart.value(q)) - std::exp(g)) < 1e-8);
        ++seen;
    }
    CHECK(seen > 0);
}

TEST_CASE("rho at a perturbed Type-D parameter is the cycle multiplier") {
    const CubicParam q{I / std::sqrt(2.0) + 0.02, 0.0};
    const cplx c = q.c;
    const cplx a = branch_step(I / std::sqrt(2.0), 0.0, c, 1, 0.01);
    const CubicParam on{c, a};
    const cplx rho = rho_eval(on, 1);
    // independent: iterate -c to its fixed point, then take f'
    cplx z = -c;
    for (int k = 0; k < 2000; ++k) z = evaluate(on, z);
    CHECK(std::abs(rho - derivative(on, z)) < 1e-10);
    CHECK(std::abs(rho) < 1.0);
}

TEST_CASE("Phi preimage counts by type") {
    const cplx w0(0.3, 0.1);
    CHECK(count_phi_preimages(build_chart(first_of(center_search(1, ComponentType::C, coarse()))), w0) == 1);
    CHECK(count_phi_preimages(build_chart(first_of(center_search(1, ComponentType::A, coarse()))), w0) == 2);
    CHECK(count_phi_preimages(build_chart(first_of(center_search(2, ComponentType::B, coarse()))), w0) == 3);
}

TEST_CASE("parameter rays stay on the curve and on the level set") {
    for (auto [p, type] : {std::pair{1, ComponentType::A}, std::pair{2, ComponentType::B},
                           std::pair{1, ComponentType::C}, std::pair{1, ComponentType::D}}) {
        const auto chart = build_chart(first_of(center_search(p, type, coarse())));
        const auto ray = param_ray_trace(chart, 0.1, 0.1, 0.999, 24);
        REQUIRE(ray.status == ParamRaySample::Status::Complete);
        CHECK(ray.max_curve_residual < 1e-10);
        CHECK(ray.max_value_residual < 1e-8);
        for (std::size_t i = 1; i < ray.s.size(); ++i) CHECK(ray.s[i] > ray.s[i - 1]);
        CHECK(ray.error_bar < 1e-4);
    }
}

TEST_CASE("rays t and t + 1/d share the Phi target on distinct paths") {
    const auto chart = build_chart(first_of(center_search(1, ComponentType::A, coarse())));
    REQUIRE(chart.d_omega == 2);
    const auto r1 = param_ray_trace(chart, 0.1, 0.2, 0.9, 8);
    const auto r2 = param_ray_trace(chart, 0.6, 0.2, 0.9, 8);
    REQUIRE(r1.points.size() == r2.points.size());
    for (std::size_t i = 0; i < r1.points.size(); ++i) {
        CHECK(std::abs(chart.value(r1.points[i]) - chart.value(r2.points[i])) < 1e-8);
        CHECK(std::abs(r1.points[i].c - r2.points[i].c) > 1e-3);
    }
}

TEST_CASE("Type-D boundary: closed, simple, winding once") {
    CenterSearchOptions o = coarse();
    o.q_max = 1;
    const auto d1 = center_search(1, ComponentType::D, o);
    const auto cs = first_of(d1);
    const auto chart = build_chart(cs);
    CHECK(std::abs(rho_eval(cs.param, 1)) < 1e-8);
    const auto bt = boundary_trace_D(chart, 128);
    CHECK(bt.closure_defect < 1e-3 * bt.diameter);
    CHECK(bt.winding == 1);
    CHECK(bt.simple);
    CHECK(bt.stall_angles.empty());
    CHECK(bt.max_rho_error < 1e-8);

    std::vector<double> angles;
    for (int k = 0; k < 8; ++k) angles.push_back(k / 8.0 + 0.01);
    const auto table = landing_separation_experiment(chart, angles, 0.999);
    CHECK(table.pass);
    for (const auto& row : table.rows) CHECK(row.distance > 3.0 * row.error_sum);
}

TEST_CASE("parabolic angles and winding numbers") {
    CenterSearchOptions o = coarse();
    o.q_max = 1;
    const auto chart = build_chart(first_of(center_search(1, ComponentType::D, o)));
    CHECK(parabolic_angle(chart, 1.0 / 3.0));
    CHECK(parabolic_angle(chart, 2.0 / 3.0));
    CHECK_FALSE(parabolic_angle(chart, 0.1));
    CHECK_FALSE(parabolic_angle(chart, 0.0));

    std::vector<cplx> square{cplx(-1, -1), cplx(1, -1), cplx(1, 1), cplx(-1, 1)};
    CHECK(winding_number(square, 0.0) == 1);
    CHECK(winding_number(square, cplx(3.0, 0.0)) == 0);
    std::vector<cplx> rev(square.rbegin(), square.rend());
    CHECK(winding_number(rev, 0.0) == -1);
}
