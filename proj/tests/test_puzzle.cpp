#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cubic/curve.hpp"
#include "cubic/paramspace.hpp"
#include "cubic/puzzle.hpp"
#include "doctest.h"

using namespace cubic;

namespace {

const cplx I{0.0, 1.0};

CubicParam s1_point(cplx c) { return {c, c + 2.0 * c * c * c}; }

// Type D on S_1: -c is attracted to a second fixed point.
const CubicParam kBase = s1_point(cplx(0.05, 1.0 / std::sqrt(2.0)));

int depth0_region(Puzzle& pz, cplx z) {
    try {
        return pz.region_of(z);
    } catch (const Error&) {
        return -2;
    }
}

// Random points of X that are off the graph, with their forward images also off it.
std::vector<cplx> sample_points(Puzzle& pz, int count, int depth, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.6, 1.6);
    std::vector<cplx> out;
    for (int tries = 0; tries < 40 * count && static_cast<int>(out.size()) < count; ++tries) {
        cplx z(u(rng), u(rng));
        bool ok = true;
        cplx w = z;
        for (int k = 0; k <= depth && ok; ++k, w = evaluate(pz.param(), w)) ok = depth0_region(pz, w) >= 0;
        if (ok) out.push_back(z);
    }
    return out;
}

std::set<RayAngle> external_angle_set(const SupportGraph& g) {
    return {g.external_angles.begin(), g.external_angles.end()};
}

}  // namespace

TEST_CASE("support graphs at a Type-D S_1 parameter") {
    const auto g17 = build_support_graph(kBase, 1, Candidate::G17);
    const auto g37 = build_support_graph(kBase, 1, Candidate::G37);
    const auto both = build_support_graph(kBase, 1, Candidate::Both);

    CHECK(g17.internal.size() == 3);
    CHECK(g17.external.size() == 3);
    CHECK(g17.vertices.size() == 3);
    CHECK(g17.labels_forward_invariant());
    CHECK(g37.labels_forward_invariant());
    CHECK(both.labels_forward_invariant());
    for (const auto& v : both.vertices) CHECK(std::abs(v.cert.multiplier) > 1.0);

    std::set<RayAngle> uni = external_angle_set(g17);
    for (auto t : g37.external_angles) uni.insert(t);
    CHECK(external_angle_set(both) == uni);
    std::set<RayAngle> ints(g17.internal_angles.begin(), g17.internal_angles.end());
    ints.insert(g37.internal_angles.begin(), g37.internal_angles.end());
    CHECK(std::set<RayAngle>(both.internal_angles.begin(), both.internal_angles.end()) == ints);

    CHECK(g17.euler_piece_count() == 3);
    CHECK(both.euler_piece_count() == 6);
}

TEST_CASE("piece counts by depth") {
    Puzzle p17(build_support_graph(kBase, 1, Candidate::G17));
    CHECK(p17.region_count() == 3);
    CHECK(p17.enumerate(1).size() == 8);
    CHECK(p17.enumerate(2).size() == 23);

    Puzzle pb(build_support_graph(kBase, 1, Candidate::Both));
    CHECK(pb.region_count() == 6);
    CHECK(pb.enumerate(1).size() == 17);
    CHECK(pb.enumerate(2).size() == 50);
}

TEST_CASE("deeper pieces map onto shallower pieces") {
    Puzzle pz(build_support_graph(kBase, 1, Candidate::G17));
    for (int n = 1; n <= 2; ++n) {
        for (int id : pz.enumerate(n)) {
            const auto& pc = pz.piece(n, id);
            REQUIRE(pc.image >= 0);
            CHECK(pz.locate(evaluate(kBase, pc.rep), n - 1) == pc.image);
            CHECK(pz.locate(pc.rep, n - 1) == pc.parent);
        }
    }
}

TEST_CASE("a depth-n piece fixes the depth-0 itinerary") {
    Puzzle pz(build_support_graph(kBase, 1, Candidate::G17));
    const int n = 2;
    const auto pts = sample_points(pz, 24, n, 7);
    REQUIRE(pts.size() >= 12);
    int pairs = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if (pz.locate(pts[i], n) != pz.locate(pts[j], n)) continue;
            ++pairs;
            cplx x = pts[i], y = pts[j];
            for (int k = 0; k <= n; ++k, x = evaluate(kBase, x), y = evaluate(kBase, y))
                CHECK(pz.region_of(x) == pz.region_of(y));
        }
    }
    CHECK(pairs > 0);
}

TEST_CASE("compact containment agrees with the geometric oracle") {
    Puzzle pz(build_support_graph(kBase, 1, Candidate::Both));
    int contained = 0, shared = 0;
    for (int n = 1; n <= 2; ++n) {
        for (int id : pz.enumerate(n)) {
            const auto& q = pz.describe(n, id);
            int anc = q.parent;
            for (int m = n - 1; m > 0; --m) anc = pz.piece(m, anc).parent;
            const auto& p = pz.describe(0, anc);
            const bool cc = compact_containment(q, p);
            const double dist = boundary_distance(pz, q, p);
            if (cc) {
                ++contained;
                CHECK(dist > 1e-7);
            } else {
                ++shared;
            }
            // a shared external ray always blocks containment
            for (const auto& lq : q.labels) {
                if (lq.kind != PieceLabel::Kind::ExternalRay) continue;
                for (const auto& lp : p.labels)
                    if (lp.kind == PieceLabel::Kind::ExternalRay && lp.angle == lq.angle) CHECK_FALSE(cc);
            }
        }
    }
    CHECK(contained >= 20);
    CHECK(shared > 0);
}

TEST_CASE("tableaux: coherence and rules R1, R2") {
    Puzzle pz(build_support_graph(kBase, 1, Candidate::G17));
    const Tableau crit = tableau_build(pz, pz.critical_point(), 3, 20);
    CHECK(tableau_coherent(pz, crit));
    const auto r1 = check_rule_r1(crit, crit);
    CHECK(r1.checked > 0);
    CHECK(r1.violations == 0);
    for (cplx z : sample_points(pz, 6, 23, 11)) {
        const Tableau tz = tableau_build(pz, z, 3, 20);
        CHECK(tableau_coherent(pz, tz));
        CHECK(check_rule_r1(tz, crit).violations == 0);
        CHECK(check_rule_r2(crit, tz).violations == 0);
    }
}

TEST_CASE("children and recurrence verdicts") {
    Puzzle pz(build_support_graph(kBase, 1, Candidate::G17));
    const Tableau crit = tableau_build(pz, pz.critical_point(), 3, 24);
    for (int n = 0; n <= 1; ++n) {
        const auto few = children(crit, n, 10);
        const auto many = children(crit, n, 20);
        CHECK(few.size() <= many.size());
        for (int k : many) {
            CHECK(crit.at(n, k) == crit.at(n, 0));
            for (int j = 1; j < k; ++j) CHECK(crit.at(n + k - j, j) != crit.at(n + k - j, 0));
        }
    }
    const auto v = recurrence_classify(pz, 3, 12);
    const auto v2 = recurrence_classify(pz, 3, 24);
    CHECK(v.kind == RecurrenceVerdict::Kind::NonRecurrent);
    CHECK(v2.kind == v.kind);
    CHECK(v.depth == 3);
    CHECK(v.budget == 12);
}

TEST_CASE("selection witness re-verifies") {
    const auto w = select_admissible(kBase, 1);
    REQUIRE(w.puzzle);
    Puzzle& pz = *w.puzzle;
    const cplx z = iterate_n(kBase, pz.critical_point(), w.orbit_index);
    CHECK(pz.locate(z, 1) == w.q_id);
    CHECK(pz.locate(z, 0) == w.p_id);
    const auto& q = pz.describe(1, w.q_id);
    const auto& p = pz.describe(0, w.p_id);
    CHECK(compact_containment(q, p));
    CHECK(boundary_distance(pz, q, p) > 1e-7);
    for (const auto& b : q.boundary) CHECK(depth0_region(pz, b.z) == w.p_id);
}

TEST_CASE("orbit on the 1/7 graph forces the 3/7 candidate") {
    // Land the internal parameter ray 1/7 of a capture component, then solve
    // f^2(-c) = landing point of the dynamical internal ray 1/7 exactly.
    CenterSearchOptions opts;
    opts.grid = 8;
    opts.l_max = 2;
    const auto centers = center_search(1, ComponentType::C, opts);
    REQUIRE(!centers.empty());
    const auto& cs = centers.front();
    REQUIRE(cs.l == 2);
    const auto chart = build_chart(cs, 40);
    const auto ray = param_ray_trace(chart, 1.0 / 7.0, 0.5, 0.999, 16);
    REQUIRE(ray.status == ParamRaySample::Status::Complete);

    const CubicParam last = ray.points.back();
    cplx zeta = landing_point(last, trace_internal_ray(last, 1, 0, RayAngle(1, 7))).point;
    auto defect = [&](cplx c, cplx& z) {
        const CubicParam q = s1_point(c);
        z = certify_periodic(q, z, 3).point;
        return iterate_n(q, -c, 2) - z;
    };
    cplx c = ray.landing;
    for (int it = 0; it < 30; ++it) {
        cplx z = zeta;
        const cplx d0 = defect(c, z);
        zeta = z;
        if (std::abs(d0) < 1e-13) break;
        const cplx h = 1e-7;
        const cplx d1 = defect(c + h, z);
        c -= d0 * h / (d1 - d0);
    }
    const CubicParam q = s1_point(c);
    cplx z = zeta;
    REQUIRE(std::abs(defect(c, z)) < 1e-12);

    CHECK_THROWS_AS(build_support_graph(q, 1, Candidate::G17), Error);
    CHECK_THROWS_AS(build_support_graph(q, 1, Candidate::Both), Error);
    const auto w = select_admissible(q, 1);
    CHECK(w.candidate == Candidate::G37);
}

TEST_CASE("Type-D centers at p = 1, 2 are non-recurrent") {
    CenterSearchOptions opts;
    opts.grid = 8;
    opts.q_max = 1;
    for (int p = 1; p <= 2; ++p) {
        int tested = 0;
        for (const auto& cs : center_search(p, ComponentType::D, opts)) {
            if (cs.param.c.imag() < 0 || tested >= 2) continue;
            const auto w = select_admissible(cs.param, p);
            const auto tb = tableau_build(*w.puzzle, w.puzzle->critical_point(), 3 * p, 20);
            CHECK(check_rule_r1(tb, tb).violations == 0);
            CHECK(recurrence_classify(tb).kind == RecurrenceVerdict::Kind::NonRecurrent);
            ++tested;
        }
        CHECK(tested >= 1);
    }
}
