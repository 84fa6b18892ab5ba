#include "cubic/puzzle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace cubic {

namespace {

constexpr double kOnGraph = 1e-9;
constexpr double kGeomTol = 1e-7;

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Preimages of f(z) other than z itself.
std::array<cplx, 2> sibling_points(const CubicParam& p, cplx z) {
    cplx s = std::sqrt(12.0 * p.c * p.c - 3.0 * z * z);
    return {0.5 * (-z + s), 0.5 * (-z - s)};
}

double sheet_gap(const CubicParam& p, cplx z) {
    auto o = sibling_points(p, z);
    return std::min(std::abs(z - o[0]), std::abs(z - o[1]));
}

bool polish(const CubicParam& p, cplx target, cplx& w) {
    for (int it = 0; it < 30; ++it) {
        cplx d = derivative(p, w);
        if (d == 0.0) return false;
        cplx dw = (evaluate(p, w) - target) / d;
        w -= dw;
        if (!finite(w)) return false;
        if (std::abs(dw) <= 1e-15 * (1.0 + std::abs(w))) return true;
        if (it > 4 && std::abs(dw) <= 1e-12 * (1.0 + std::abs(w))) return true;
    }
    return false;
}

bool newton_n(const CubicParam& p, int n, cplx target, cplx& z) {
    for (int it = 0; it < 60; ++it) {
        cplx d = 1.0, v = z;
        for (int k = 0; k < n; ++k) {
            d *= derivative(p, v);
            v = evaluate(p, v);
        }
        if (d == 0.0 || !finite(v)) return false;
        cplx dz = (v - target) / d;
        z -= dz;
        if (std::abs(dz) < 1e-14 * (1.0 + std::abs(z))) return true;
    }
    return false;
}

// All three solutions of f(u) = r.
std::array<cplx, 3> cubic_preimages(const CubicParam& p, cplx r) {
    const cplx q = p.a - r;
    const double rad = 1.0 + 2.0 * std::abs(p.c) + std::cbrt(std::abs(q));
    std::array<cplx, 3> z;
    for (int k = 0; k < 3; ++k) z[k] = std::polar(rad, 0.4 + kTwoPi * k / 3.0);
    for (int it = 0; it < 500; ++it) {
        double worst = 0.0;
        for (int k = 0; k < 3; ++k) {
            cplx den = 1.0;
            for (int j = 0; j < 3; ++j)
                if (j != k) den *= z[k] - z[j];
            cplx dz = (evaluate(p, z[k]) - r) / den;
            z[k] -= dz;
            worst = std::max(worst, std::abs(dz));
        }
        if (worst < 1e-15 * rad) break;
    }
    for (auto& u : z) polish(p, r, u);
    return z;
}

double orient(cplx a, cplx b, cplx c) {
    const cplx u = b - a, v = c - a;
    return u.real() * v.imag() - u.imag() * v.real();
}

bool segments_meet(cplx a, cplx b, cplx c, cplx d) {
    const double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    const double tiny = 1e-15 * (1.0 + std::abs(a) + std::abs(c));
    return segment_distance(c, d, a) < tiny || segment_distance(c, d, b) < tiny || segment_distance(a, b, c) < tiny ||
           segment_distance(a, b, d) < tiny;
}

std::vector<RayAngle> candidate_angles(Candidate c) {
    std::vector<RayAngle> out;
    if (c != Candidate::G37)
        for (auto t : angle_double_orbit(RayAngle(1, 7))) out.push_back(t);
    if (c != Candidate::G17)
        for (auto t : angle_double_orbit(RayAngle(3, 7))) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
}

// Keep the part of a traced ray inside X: potential <= 1 outside, >= -1 inside.
void trim_to_x(TracedRay& ray) {
    std::vector<cplx> s;
    std::vector<double> g;
    const bool ext = ray.kind == TracedRay::Kind::External;
    for (std::size_t i = 0; i < ray.samples.size(); ++i) {
        const double v = ray.potentials[i];
        const bool keep = ext ? v <= 1.0 : v >= -1.0;
        if (!keep) continue;
        if (s.empty() && i > 0 && std::abs(v) != 1.0) {
            // interpolate the crossing of the level-one curve
            const double v0 = ray.potentials[i - 1];
            const double lam = ((ext ? 1.0 : -1.0) - v0) / (v - v0);
            s.push_back(ray.samples[i - 1] + lam * (ray.samples[i] - ray.samples[i - 1]));
            g.push_back(ext ? 1.0 : -1.0);
        }
        s.push_back(ray.samples[i]);
        g.push_back(v);
    }
    ray.samples = std::move(s);
    ray.potentials = std::move(g);
}

double angle_of(cplx b) {
    double t = std::arg(b) / kTwoPi;
    return t < 0 ? t + 1.0 : t;
}

// s with m^k s = t that is closest to theta.
RayAngle nearest_preimage(RayAngle t, std::uint64_t m, int k, double theta) {
    std::uint64_t mk = 1;
    for (int i = 0; i < k; ++i) mk *= m;
    const double x = theta * static_cast<double>(mk) - t.value();
    std::int64_t j = std::llround(x);
    j %= static_cast<std::int64_t>(mk);
    if (j < 0) j += static_cast<std::int64_t>(mk);
    return RayAngle(static_cast<std::int64_t>(t.num + static_cast<std::uint64_t>(j) * t.den), t.den * mk);
}

}  // namespace

const char* candidate_name(Candidate c) {
    switch (c) {
        case Candidate::Both: return "BOTH";
        case Candidate::G17: return "G17";
        case Candidate::G37: return "G37";
    }
    return "?";
}

const char* verdict_name(RecurrenceVerdict::Kind k) {
    switch (k) {
        case RecurrenceVerdict::Kind::NonCritical: return "NonCritical";
        case RecurrenceVerdict::Kind::NonRecurrent: return "NonRecurrent";
        case RecurrenceVerdict::Kind::ReluctantlyRecurrent: return "ReluctantlyRecurrent";
        case RecurrenceVerdict::Kind::PersistentlyRecurrent: return "PersistentlyRecurrent";
    }
    return "?";
}

std::string PieceLabel::str() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::ExternalRay: os << "ext(" << angle.str() << ")"; break;
        case Kind::InternalRay: os << "int(" << component << "," << angle.str() << ")"; break;
        case Kind::OuterEquipotential: os << "outer(" << level << ")"; break;
        case Kind::InnerEquipotential: os << "inner(" << component << "," << level << ")"; break;
        case Kind::Vertex: os << "vertex(" << vertex << ")"; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Support graph

bool SupportGraph::labels_forward_invariant() const {
    std::set<RayAngle> ia(internal_angles.begin(), internal_angles.end());
    std::set<RayAngle> ea(external_angles.begin(), external_angles.end());
    for (const auto& r : internal) {
        RayAngle img = r.ray.component == 0 ? r.ray.angle.doubled() : r.ray.angle;
        if (!ia.count(img)) return false;
    }
    for (const auto& t : internal_angles)
        if (!ia.count(t.doubled())) return false;
    for (const auto& t : ea)
        if (!ea.count(t.tripled())) return false;
    return true;
}

int SupportGraph::euler_piece_count() const {
    return static_cast<int>(external.size() + internal.size()) - static_cast<int>(vertices.size()) + 1 - period;
}

SupportGraph build_support_graph(const CubicParam& p, int period, Candidate candidate) {
    if (period < 1) throw Error(Err::InvalidArgument, "build_support_graph: period must be positive");
    if (!exact_period(p, p.c, period)) throw Error(Err::OutsideSpStar, "c does not have the stated exact period");
    SupportGraph g;
    g.param = p;
    g.period = period;
    g.candidate = candidate;
    g.cycle = critical_cycle(p, period);
    if (local_degree_on_cycle(p, g.cycle) != 2)
        throw Error(Err::OutsideSpStar, "the critical cycle must have local degree 2");
    {
        // Stops at the first near-return: an orbit sitting on a repelling cycle
        // would otherwise drift off it through round-off.
        cplx z = -p.c;
        std::vector<cplx> seen;
        for (int k = 0; k < 4000; ++k) {
            for (const cplx& w : g.cycle.points)
                if (std::abs(z - w) < 1e-8) throw Error(Err::InvalidArgument, "-c is captured by the critical cycle");
            if (k < 64) {
                bool back = false;
                for (const cplx& s : seen) back = back || std::abs(z - s) < 1e-9 * (1.0 + std::abs(z));
                if (back) break;
                seen.push_back(z);
            }
            z = evaluate(p, z);
            if (std::abs(z) > 1e8) break;
        }
    }
    g.internal_angles = candidate_angles(candidate);

    auto add_vertex = [&](const LandingCertificate& c) {
        for (std::size_t v = 0; v < g.vertices.size(); ++v)
            if (std::abs(g.vertices[v].cert.point - c.point) < 1e-7 * (1.0 + std::abs(c.point))) return static_cast<int>(v);
        g.vertices.push_back({c, {}, {}});
        return static_cast<int>(g.vertices.size()) - 1;
    };
    auto landing = [&](const TracedRay& r) {
        try {
            LandingCertificate c = landing_point(p, r);
            if (!c.repelling) throw Error(Err::GraphInvalid, "ParabolicVertex: landing point is not repelling");
            return c;
        } catch (const Error& e) {
            if (e.code() == Err::ParabolicSuspect) throw Error(Err::GraphInvalid, std::string("ParabolicVertex: ") + e.what());
            throw;
        }
    };
    auto traced = [&](auto&& fn) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() == Err::RayBifurcates)
                throw Error(Err::GraphInvalid, std::string("HitsCriticalOrbit: ") + e.what());
            throw;
        }
    };

    for (int j = 0; j < period; ++j) {
        BasinChart chart(p, g.cycle, j);
        for (const RayAngle& t : g.internal_angles) {
            TracedRay r = traced([&] { return trace_internal_ray(chart, t, -1e-14); });
            if (r.landing != TracedRay::Landing::Landed)
                throw Error(Err::NoConvergence, "internal ray " + t.str() + " did not land");
            LandingCertificate c = landing(r);
            trim_to_x(r);
            GraphRay gr{std::move(r), add_vertex(c)};
            g.vertices[gr.vertex].internal.push_back(static_cast<int>(g.internal.size()));
            g.internal.push_back(std::move(gr));
        }
    }

    // Co-landing external rays: search one vertex per cycle, push angles forward.
    std::vector<std::vector<RayAngle>> ext(g.vertices.size());
    std::vector<bool> done(g.vertices.size(), false);
    auto match = [&](cplx z) {
        for (std::size_t v = 0; v < g.vertices.size(); ++v)
            if (std::abs(g.vertices[v].cert.point - z) < 1e-6 * (1.0 + std::abs(z))) return static_cast<int>(v);
        return -1;
    };
    for (std::size_t v0 = 0; v0 < g.vertices.size(); ++v0) {
        if (done[v0]) continue;
        std::vector<RayAngle> a = colanding_external_angles(p, g.vertices[v0].cert, 9 * period);
        if (a.empty()) throw Error(Err::ResolutionExhausted, "no co-landing external ray found within the period bound");
        int v = static_cast<int>(v0);
        while (v >= 0 && !done[v]) {
            ext[v] = a;
            done[v] = true;
            for (auto& t : a) t = t.tripled();
            std::sort(a.begin(), a.end());
            v = match(evaluate(p, g.vertices[v].cert.point));
        }
    }
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        for (const RayAngle& t : ext[v]) {
            TracedRay r = traced([&] { return trace_external_ray(p, t, 1e-14); });
            if (r.landing != TracedRay::Landing::Landed || !r.cert.certified ||
                std::abs(r.cert.point - g.vertices[v].cert.point) > 1e-6 * (1.0 + std::abs(r.cert.point)))
                throw Error(Err::NoConvergence, "external ray " + t.str() + " does not land at its vertex");
            landing(r);
            trim_to_x(r);
            g.vertices[v].external.push_back(static_cast<int>(g.external.size()));
            g.external_angles.push_back(t);
            g.external.push_back({std::move(r), static_cast<int>(v)});
        }
    }
    std::sort(g.external_angles.begin(), g.external_angles.end());

    // The critical orbit must stay off the graph.
    cplx z = -p.c;
    for (int k = 0; k < 400; ++k) {
        const double tol = 1e-8 * (1.0 + std::abs(z));
        for (const auto* set : {&g.internal, &g.external})
            for (const auto& r : *set)
                if (polyline_distance(r.ray.samples, z) < tol)
                    throw Error(Err::GraphInvalid, "HitsCriticalOrbit: f^" + std::to_string(k) + "(-c) lies on ray " +
                                                       r.ray.angle.str());
        z = evaluate(p, z);
        if (std::abs(z) > 1e8) break;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Puzzle construction

Puzzle::Puzzle(SupportGraph graph, int resolution) : graph_(std::move(graph)) {
    const CubicParam& p = graph_.param;
    n_internal_ = static_cast<int>(graph_.internal.size());
    for (int j = 0; j < graph_.period; ++j) charts_.emplace_back(p, graph_.cycle, j);
    cstar_ = -p.c + 1e-4 * (1.0 + std::abs(p.c));
    vcrit_ = evaluate(p, -p.c);
    for (const auto& v : graph_.vertices) vertex_pts_.push_back(v.cert.point);

    for (int j = 0; j < graph_.period; ++j) {
        double rho = 0.0;
        for (int k = 0; k < 24; ++k) {
            try {
                TracedRay r = trace_internal_ray(charts_[j], RayAngle(k, 24), -1.0);
                rho = std::max(rho, std::abs(r.samples.back() - charts_[j].center()));
            } catch (const Error&) {
            }
        }
        if (rho == 0.0) throw Error(Err::NoConvergence, "inner equipotential could not be traced");
        inner_radius_.push_back(1.25 * rho);
    }

    // Bounding box of {G < 1} from a coarse scan, widened until it is not clipped.
    double W = std::max(escape_bound(p).radius, std::exp(graph_.outer_level));
    const int m = 160;
    double hc = 0, x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    for (int attempt = 0; attempt < 8; ++attempt, W *= 2.0) {
        hc = 2.0 * W / m;
        x0 = y0 = 1e300;
        x1 = y1 = -1e300;
        for (int k = 0; k < m; ++k) {
            for (int i = 0; i < m; ++i) {
                cplx z(-W + (i + 0.5) * hc, -W + (k + 0.5) * hc);
                GreenValue gv = green_infinity(p, z, 24);
                if (!gv.bounded && gv.value >= graph_.outer_level) continue;
                x0 = std::min(x0, z.real());
                x1 = std::max(x1, z.real());
                y0 = std::min(y0, z.imag());
                y1 = std::max(y1, z.imag());
            }
        }
        if (std::max({-x0, x1, -y0, y1}) < W - 2.0 * hc) break;
    }
    box_lo_ = cplx(x0 - 3 * hc, y0 - 3 * hc);
    box_hi_ = cplx(x1 + 3 * hc, y1 + 3 * hc);

    int n = resolution;
    while (!build(n)) {
        if (n >= 4 * resolution)
            throw Error(Err::ArrangementAmbiguous, "depth-0 region count " + std::to_string(regions_.size()) +
                                                       " disagrees with the Euler count " +
                                                       std::to_string(graph_.euler_piece_count()));
        n *= 2;
    }

    pieces_.resize(1);
    for (int r = 0; r < region_count(); ++r) {
        PuzzlePiece pc;
        pc.depth = 0;
        pc.id = r;
        const int root = regions_[r].root;
        pc.rep = center_of(root % n_, root / n_);
        pieces_[0].push_back(pc);
    }
    const int cr = region_of(cstar_);
    if (cr >= 0) pieces_[0][cr].critical = true;
}

const GraphRay& Puzzle::ray_at(int r) const {
    return r < n_internal_ ? graph_.internal[r] : graph_.external[r - n_internal_];
}

bool Puzzle::build(int n) {
    n_ = n;
    const cplx span = box_hi_ - box_lo_;
    h_ = std::max(span.real(), span.imag()) / n;
    origin_ = 0.5 * (box_lo_ + box_hi_) - cplx(0.5 * n * h_, 0.5 * n * h_);
    classify_pixels();
    mark_walls();
    label_regions();
    if (static_cast<int>(regions_.size()) != graph_.euler_piece_count()) return false;
    build_trees();
    return true;
}

void Puzzle::classify_pixels() {
    const CubicParam& p = graph_.param;
    const std::size_t total = static_cast<std::size_t>(n_) * n_;
    state_.assign(total, 0);
    inner_of_.assign(total, 255);
    for (int k = 0; k < n_; ++k) {
        for (int i = 0; i < n_; ++i) {
            GreenValue g = green_infinity(p, center_of(i, k), 24);
            if (!g.bounded && g.value >= graph_.outer_level) state_[idx(i, k)] = 2;
        }
    }
    for (int j = 0; j < graph_.period; ++j) {
        const cplx w = charts_[j].center();
        const double rho = inner_radius_[j];
        const int i0 = std::max(0, static_cast<int>(std::floor((w.real() - rho - origin_.real()) / h_)));
        const int i1 = std::min(n_ - 1, static_cast<int>(std::ceil((w.real() + rho - origin_.real()) / h_)));
        const int k0 = std::max(0, static_cast<int>(std::floor((w.imag() - rho - origin_.imag()) / h_)));
        const int k1 = std::min(n_ - 1, static_cast<int>(std::ceil((w.imag() + rho - origin_.imag()) / h_)));
        if (i0 > i1 || k0 > k1) continue;
        const int wi = i1 - i0 + 1, wk = k1 - k0 + 1;
        std::vector<std::uint8_t> deep(static_cast<std::size_t>(wi) * wk, 0);
        for (int k = k0; k <= k1; ++k) {
            for (int i = i0; i <= i1; ++i) {
                cplx z = center_of(i, k);
                if (std::abs(z - w) >= rho || state_[idx(i, k)] != 0) continue;
                try {
                    if (charts_[j].green(z, 64) <= graph_.inner_level) deep[(k - k0) * wi + (i - i0)] = 1;
                } catch (const Error&) {
                }
            }
        }
        const int si = static_cast<int>(std::floor((w.real() - origin_.real()) / h_));
        const int sk = static_cast<int>(std::floor((w.imag() - origin_.imag()) / h_));
        if (si < i0 || si > i1 || sk < k0 || sk > k1) continue;
        std::deque<std::pair<int, int>> q;
        if (deep[(sk - k0) * wi + (si - i0)]) {
            q.push_back({si, sk});
            deep[(sk - k0) * wi + (si - i0)] = 2;
        }
        while (!q.empty()) {
            auto [i, k] = q.front();
            q.pop_front();
            state_[idx(i, k)] = 3;
            inner_of_[idx(i, k)] = static_cast<std::uint8_t>(j);
            const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
            for (int d = 0; d < 4; ++d) {
                int a = i + di[d], b = k + dk[d];
                if (a < i0 || a > i1 || b < k0 || b > k1) continue;
                auto& cell = deep[(b - k0) * wi + (a - i0)];
                if (cell == 1) {
                    cell = 2;
                    q.push_back({a, b});
                }
            }
        }
    }
}

void Puzzle::mark_walls() {
    bucket_ = 8.0 * h_;
    nb_ = n_ / 8 + 2;
    buckets_.assign(static_cast<std::size_t>(nb_) * nb_, {});
    const double w = 1.5 * h_;
    const int nrays = n_internal_ + static_cast<int>(graph_.external.size());
    auto bclamp = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / bucket_)), 0, nb_ - 1); };
    for (int r = 0; r < nrays; ++r) {
        const auto& s = ray_at(r).ray.samples;
        for (std::size_t t = 1; t < s.size(); ++t) {
            const cplx a = s[t - 1], b = s[t];
            const double xa = std::min(a.real(), b.real()) - origin_.real(), xb = std::max(a.real(), b.real()) - origin_.real();
            const double ya = std::min(a.imag(), b.imag()) - origin_.imag(), yb = std::max(a.imag(), b.imag()) - origin_.imag();
            for (int bk = bclamp(ya); bk <= bclamp(yb); ++bk)
                for (int bi = bclamp(xa); bi <= bclamp(xb); ++bi)
                    buckets_[static_cast<std::size_t>(bk) * nb_ + bi].push_back({r, static_cast<int>(t - 1)});
            const int i0 = std::max(0, static_cast<int>(std::floor((xa - w) / h_)));
            const int i1 = std::min(n_ - 1, static_cast<int>(std::floor((xb + w) / h_)));
            const int k0 = std::max(0, static_cast<int>(std::floor((ya - w) / h_)));
            const int k1 = std::min(n_ - 1, static_cast<int>(std::floor((yb + w) / h_)));
            for (int k = k0; k <= k1; ++k)
                for (int i = i0; i <= i1; ++i)
                    if (state_[idx(i, k)] == 0 && segment_distance(a, b, center_of(i, k)) <= w) state_[idx(i, k)] = 1;
        }
    }
}

void Puzzle::label_regions() {
    region_.assign(state_.size(), -1);
    regions_.clear();
    for (int k = 0; k < n_; ++k) {
        for (int i = 0; i < n_; ++i) {
            if (state_[idx(i, k)] != 0 || region_[idx(i, k)] >= 0) continue;
            const int id = static_cast<int>(regions_.size());
            regions_.push_back({});
            std::deque<int> q{static_cast<int>(idx(i, k))};
            region_[idx(i, k)] = id;
            int count = 0;
            while (!q.empty()) {
                const int c = q.front();
                q.pop_front();
                ++count;
                const int ci = c % n_, ck = c / n_;
                const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int a = ci + di[d], b = ck + dk[d];
                    if (a < 0 || b < 0 || a >= n_ || b >= n_) continue;
                    const std::size_t x = idx(a, b);
                    if (state_[x] == 0 && region_[x] < 0) {
                        region_[x] = id;
                        q.push_back(static_cast<int>(x));
                    }
                }
            }
            regions_.back().pixels = count;
        }
    }
}

void Puzzle::build_trees() {
    // Distance to the nearest non-free pixel picks a deep root per region.
    const std::size_t total = state_.size();
    std::vector<int> dist(total, -1);
    std::deque<int> q;
    for (std::size_t x = 0; x < total; ++x) {
        const int i = static_cast<int>(x % n_), k = static_cast<int>(x / n_);
        if (state_[x] != 0 || i == 0 || k == 0 || i == n_ - 1 || k == n_ - 1) {
            dist[x] = 0;
            q.push_back(static_cast<int>(x));
        }
    }
    const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
    while (!q.empty()) {
        const int c = q.front();
        q.pop_front();
        for (int d = 0; d < 4; ++d) {
            const int a = c % n_ + di[d], b = c / n_ + dk[d];
            if (a < 0 || b < 0 || a >= n_ || b >= n_) continue;
            const std::size_t x = idx(a, b);
            if (dist[x] < 0) {
                dist[x] = dist[c] + 1;
                q.push_back(static_cast<int>(x));
            }
        }
    }
    for (auto& r : regions_) r.root = -1;
    for (std::size_t x = 0; x < total; ++x) {
        const int r = region_[x];
        if (r < 0) continue;
        int& root = regions_[r].root;
        if (root < 0 || dist[x] > dist[root]) root = static_cast<int>(x);
    }
    parent_.assign(total, -1);
    tree_depth_.assign(total, -1);
    for (auto& r : regions_) {
        q.clear();
        q.push_back(r.root);
        tree_depth_[r.root] = 0;
        while (!q.empty()) {
            const int c = q.front();
            q.pop_front();
            for (int d = 0; d < 4; ++d) {
                const int a = c % n_ + di[d], b = c / n_ + dk[d];
                if (a < 0 || b < 0 || a >= n_ || b >= n_) continue;
                const std::size_t x = idx(a, b);
                if (region_[x] == region_[c] && tree_depth_[x] < 0) {
                    tree_depth_[x] = tree_depth_[c] + 1;
                    parent_[x] = c;
                    q.push_back(static_cast<int>(x));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Point location at depth 0

bool Puzzle::in_x(cplx z) const {
    GreenValue g = green_infinity(graph_.param, z, 60);
    if (!g.bounded && g.value >= graph_.outer_level) return false;
    for (int j = 0; j < graph_.period; ++j) {
        if (std::abs(z - charts_[j].center()) >= inner_radius_[j]) continue;
        try {
            if (charts_[j].green(z, 400) <= graph_.inner_level && charts_[j].descend(z).reached_center) return false;
        } catch (const Error&) {
        }
    }
    return true;
}

double Puzzle::graph_distance(cplx z, int* ray, cplx* foot, double* pot) const {
    const cplx u = z - origin_;
    const int bi = static_cast<int>(std::floor(u.real() / bucket_)), bk = static_cast<int>(std::floor(u.imag() / bucket_));
    double best = std::numeric_limits<double>::infinity();
    for (int k = std::max(0, bk - 1); k <= std::min(nb_ - 1, bk + 1); ++k) {
        for (int i = std::max(0, bi - 1); i <= std::min(nb_ - 1, bi + 1); ++i) {
            for (const SegRef& s : buckets_[static_cast<std::size_t>(k) * nb_ + i]) {
                const TracedRay& r = ray_at(s.ray).ray;
                const cplx a = r.samples[s.seg], b = r.samples[s.seg + 1];
                const cplx ab = b - a;
                const double n2 = std::norm(ab);
                const double lam = n2 > 0 ? std::clamp(((z - a) * std::conj(ab)).real() / n2, 0.0, 1.0) : 0.0;
                const cplx f = a + lam * ab;
                const double d = std::abs(z - f);
                if (d < best) {
                    best = d;
                    if (ray) *ray = s.ray;
                    if (foot) *foot = f;
                    if (pot) *pot = r.potentials[s.seg] + lam * (r.potentials[s.seg + 1] - r.potentials[s.seg]);
                }
            }
        }
    }
    return best;
}

bool Puzzle::crosses_graph(cplx a, cplx b) const {
    auto bc = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / bucket_)), 0, nb_ - 1); };
    const cplx ua = a - origin_, ub = b - origin_;
    for (int k = bc(std::min(ua.imag(), ub.imag())); k <= bc(std::max(ua.imag(), ub.imag())); ++k) {
        for (int i = bc(std::min(ua.real(), ub.real())); i <= bc(std::max(ua.real(), ub.real())); ++i) {
            for (const SegRef& s : buckets_[static_cast<std::size_t>(k) * nb_ + i]) {
                const auto& smp = ray_at(s.ray).ray.samples;
                if (segments_meet(a, b, smp[s.seg], smp[s.seg + 1])) return true;
            }
        }
    }
    return false;
}

int Puzzle::anchor_pixel(cplx z) {
    if (graph_distance(z) < kOnGraph * (1.0 + std::abs(z)))
        throw Error(Err::OnGraph, "point lies on a graph arc");
    if (!in_x(z)) return -1;
    const cplx u = (z - origin_) / h_;
    const int i = static_cast<int>(std::floor(u.real())), k = static_cast<int>(std::floor(u.imag()));
    if (i >= 0 && k >= 0 && i < n_ && k < n_ && state_[idx(i, k)] == 0) return static_cast<int>(idx(i, k));
    for (int rad : {2, 6, 16}) {
        std::vector<std::pair<double, int>> cand;
        for (int b = k - rad; b <= k + rad; ++b)
            for (int a = i - rad; a <= i + rad; ++a)
                if (a >= 0 && b >= 0 && a < n_ && b < n_ && state_[idx(a, b)] == 0)
                    cand.push_back({std::abs(center_of(a, b) - z), static_cast<int>(idx(a, b))});
        std::sort(cand.begin(), cand.end());
        for (auto [d, x] : cand)
            if (!crosses_graph(z, center_of(x % n_, x / n_))) return x;
    }
    throw Error(Err::ArrangementAmbiguous, "no free pixel reachable from the point");
}

int Puzzle::region_of(cplx z) {
    const int x = anchor_pixel(z);
    return x < 0 ? -1 : region_[x];
}

Path Puzzle::pixel_route(int from, int to) const {
    std::vector<int> up, down;
    int a = from, b = to;
    while (tree_depth_[a] > tree_depth_[b]) {
        up.push_back(a);
        a = parent_[a];
    }
    while (tree_depth_[b] > tree_depth_[a]) {
        down.push_back(b);
        b = parent_[b];
    }
    while (a != b) {
        up.push_back(a);
        down.push_back(b);
        a = parent_[a];
        b = parent_[b];
    }
    up.push_back(a);
    up.insert(up.end(), down.rbegin(), down.rend());
    // drop interior points of straight runs
    Path out;
    for (std::size_t t = 0; t < up.size(); ++t) {
        if (t > 0 && t + 1 < up.size()) {
            const int d1 = up[t] - up[t - 1], d2 = up[t + 1] - up[t];
            if (d1 == d2) continue;
        }
        out.push_back(center_of(up[t] % n_, up[t] / n_));
    }
    return out;
}

Path Puzzle::raster_path(cplx x, cplx y) {
    const int ax = anchor_pixel(x), ay = anchor_pixel(y);
    if (ax < 0 || ay < 0 || region_[ax] != region_[ay]) return {};
    Path out{x};
    for (cplx z : pixel_route(ax, ay)) out.push_back(z);
    out.push_back(y);
    return out;
}

// ---------------------------------------------------------------------------
// Lifting

Path Puzzle::lift(const Path& path, cplx start, std::vector<std::size_t>* tags) const {
    const CubicParam& p = graph_.param;
    Path out{start};
    if (tags) tags->assign(path.size(), 0);
    cplx z = start;
    double ds = 1.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const cplx a = path[i - 1], b = path[i];
        double s = 0.0;
        ds = std::min(1.0, 4.0 * ds);
        while (s < 1.0) {
            const double step = std::min(ds, 1.0 - s);
            const bool last = s + step >= 1.0;
            const cplx target = last ? b : a + (s + step) * (b - a);
            // The two sheets meet at -c; any lift through a tiny disk about it
            // stays in the critical piece, so crossing it is allowed.
            const double rc = 1e-6 * (1.0 + std::abs(p.c));
            cplx w = z;
            bool ok = false;
            if (std::abs(z + p.c) < rc) {
                double best = std::numeric_limits<double>::infinity();
                for (cplx u : cubic_preimages(p, target))
                    if (std::abs(u - z) < best) {
                        best = std::abs(u - z);
                        w = u;
                    }
                ok = finite(w);
            } else {
                const cplx d = derivative(p, z);
                w = d != 0.0 ? z + (target - evaluate(p, z)) / d : z;
                ok = polish(p, target, w);
                if (!ok) {
                    // Newton breaks down close to -c; take the exact root nearest z
                    // when it is clearly nearer than the others.
                    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
                    for (cplx u : cubic_preimages(p, target)) {
                        const double e = std::abs(u - z);
                        if (e < d1) {
                            d2 = d1;
                            d1 = e;
                            w = u;
                        } else if (e < d2) {
                            d2 = e;
                        }
                    }
                    ok = finite(w) && d1 < 0.5 * d2;
                }
            }
            // From the critical point either near-critical preimage of the
            // target is a valid continuation (they sit at sqrt scale).
            const double sq = std::sqrt(std::abs(target - vcrit_) / (3.0 * std::abs(p.c)));
            const bool at_crit =
                std::abs(z + p.c) < rc && sq < 1e-3 && std::abs(w + p.c) < 2.0 * std::max(rc, sq);
            if (ok && (at_crit || std::abs(w - z) <= 0.25 * sheet_gap(p, z))) {
                z = w;
                s = last ? 1.0 : s + step;
                out.push_back(z);
                ds = std::min(1.0, 2.0 * step);
            } else {
                ds = 0.5 * step;
                if (ds < 1e-13) throw Error(Err::StepUnderflow, "path lift stalled");
            }
        }
        if (tags) (*tags)[i] = out.size() - 1;
    }
    return out;
}

bool Puzzle::close_preimage(cplx e, cplx y) const {
    const cplx c = graph_.param.c;
    const double rc = 1e-6 * (1.0 + std::abs(c));
    if (std::abs(e + c) < rc && std::abs(y + c) < rc) return true;
    return std::abs(e - y) < 0.25 * sheet_gap(graph_.param, y);
}

std::optional<Path> Puzzle::piece_path(cplx x, cplx y, int depth) {
    const auto key = std::make_tuple(x.real(), x.imag(), y.real(), y.imag(), depth);
    if (auto it = paths_.find(key); it != paths_.end()) {
        if (!it->second) return std::nullopt;
        return *it->second;
    }
    auto remember = [&](std::optional<Path> r) {
        paths_[key] = r ? std::make_shared<const Path>(*r) : nullptr;
        return r;
    };
    if (x == y) return remember(Path{x});
    if (depth == 0) {
        Path r = raster_path(x, y);
        if (r.empty()) return remember(std::nullopt);
        return remember(r);
    }
    const CubicParam& p = graph_.param;
    const cplx fx = evaluate(p, x), fy = evaluate(p, y);
    auto g = piece_path(fx, fy, depth - 1);
    if (!g) return remember(std::nullopt);
    Path l = lift(*g, x);
    if (close_preimage(l.back(), y)) {
        // keep x: near -c a one-point lift may be snapped onto y
        if (l.size() == 1)
            l.push_back(y);
        else
            l.back() = y;
        return remember(l);
    }
    // Other sheet: go once around the critical value inside the image piece.
    const cplx dv = fy - vcrit_;
    if (std::abs(dv) == 0.0) return remember(std::nullopt);
    const double r = std::min(1e-6 * (1.0 + std::abs(vcrit_)), std::abs(dv));
    const cplx mpt = r == std::abs(dv) ? fy : vcrit_ + r * dv / std::abs(dv);
    auto b = piece_path(fy, mpt, depth - 1);
    if (!b) return remember(std::nullopt);
    Path loop = *b;
    const cplx u = mpt - vcrit_;
    for (int k = 1; k <= 64; ++k) loop.push_back(vcrit_ + u * std::polar(1.0, kTwoPi * k / 64.0));
    loop.back() = mpt;
    for (auto it = b->rbegin(); it != b->rend(); ++it) loop.push_back(*it);
    Path l2 = lift(loop, l.back());
    if (!close_preimage(l2.back(), y)) return remember(std::nullopt);
    l.insert(l.end(), l2.begin() + 1, l2.end());
    l.back() = y;
    return remember(l);
}

bool Puzzle::same_piece(cplx x, cplx y, int depth) { return piece_path(x, y, depth).has_value(); }

PuzzlePiece& Puzzle::piece(int depth, int id) {
    if (depth < 0 || depth >= static_cast<int>(pieces_.size()) || id < 0 ||
        id >= static_cast<int>(pieces_[depth].size()))
        throw Error(Err::InvalidArgument, "no such piece");
    return pieces_[depth][id];
}

int Puzzle::locate(cplx z, int depth) {
    if (depth < 0) throw Error(Err::InvalidArgument, "negative depth");
    const auto key = std::make_tuple(z.real(), z.imag(), depth);
    if (auto it = located_.find(key); it != located_.end()) return it->second;
    int id = -1;
    if (depth == 0) {
        id = region_of(z);
        if (id < 0) throw Error(Err::OutsideDomain, "point is outside X");
    } else {
        const int q = locate(evaluate(graph_.param, z), depth - 1);
        if (static_cast<int>(pieces_.size()) <= depth) pieces_.resize(depth + 1);
        for (const auto& pc : pieces_[depth]) {
            if (pc.image == q && same_piece(z, pc.rep, depth)) {
                id = pc.id;
                break;
            }
        }
        if (id < 0) {
            const int parent = locate(z, depth - 1);
            PuzzlePiece pc;
            pc.depth = depth;
            pc.id = static_cast<int>(pieces_[depth].size());
            pc.rep = z;
            pc.image = q;
            pc.parent = parent;
            pc.critical = same_piece(z, cstar_, depth);
            pieces_[depth].push_back(pc);
            id = pc.id;
        }
    }
    located_[key] = id;
    return id;
}

std::vector<int> Puzzle::enumerate(int depth) {
    std::vector<int> out;
    if (depth == 0) {
        for (int r = 0; r < region_count(); ++r) out.push_back(r);
        return out;
    }
    std::set<int> ids;
    for (int q : enumerate(depth - 1)) {
        const cplx rep = piece(depth - 1, q).rep;
        for (cplx u : cubic_preimages(graph_.param, rep)) {
            located_[std::make_tuple(evaluate(graph_.param, u).real(), evaluate(graph_.param, u).imag(), depth - 1)] = q;
            ids.insert(locate(u, depth));
        }
    }
    return {ids.begin(), ids.end()};
}

int Puzzle::vertex_id(cplx z) {
    for (std::size_t v = 0; v < vertex_pts_.size(); ++v)
        if (std::abs(vertex_pts_[v] - z) < 1e-7 * (1.0 + std::abs(z))) return static_cast<int>(v);
    vertex_pts_.push_back(z);
    return static_cast<int>(vertex_pts_.size()) - 1;
}

// ---------------------------------------------------------------------------
// Boundaries and labels

PieceLabel Puzzle::base_label(int ray) const {
    const GraphRay& g = ray_at(ray);
    PieceLabel l;
    l.angle = g.ray.angle;
    if (ray < n_internal_) {
        l.kind = PieceLabel::Kind::InternalRay;
        l.component = g.ray.component;
    } else {
        l.kind = PieceLabel::Kind::ExternalRay;
    }
    return l;
}

void Puzzle::build_ring(int r) {
    Region& R = regions_[r];
    if (R.ring_ready) return;
    auto in = [&](int i, int k) { return i >= 0 && k >= 0 && i < n_ && k < n_ && region_[idx(i, k)] == r; };
    int start = -1;
    for (std::size_t x = 0; x < region_.size() && start < 0; ++x)
        if (region_[x] == r) start = static_cast<int>(x);
    // Moore neighbour tracing, clockwise on screen with k pointing down.
    const int di[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    const int dk[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    auto dir_of = [&](int a, int b) {
        for (int d = 0; d < 8; ++d)
            if (di[d] == a && dk[d] == b) return d;
        return -1;
    };
    int ci = start % n_, ck = start / n_;
    int back = 4;
    R.ring = {start};
    for (std::size_t guard = 0; guard < 4 * region_.size(); ++guard) {
        int found = -1;
        for (int t = 1; t <= 8; ++t) {
            const int d = (back + t) % 8;
            if (in(ci + di[d], ck + dk[d])) {
                found = d;
                break;
            }
        }
        if (found < 0) break;
        const int pd = (found + 7) % 8;
        const int bi = ci + di[pd], bk = ck + dk[pd];
        ci += di[found];
        ck += dk[found];
        back = dir_of(bi - ci, bk - ck);
        const int cur = static_cast<int>(idx(ci, ck));
        if (cur == start && back == 4) break;
        if (cur == start && R.ring.size() > 2 && guard > 8 * static_cast<std::size_t>(R.pixels)) break;
        R.ring.push_back(cur);
    }

    // Project every ring pixel to the nearest boundary feature.
    const CubicParam& p = graph_.param;
    R.ring_proj.clear();
    R.ring_pot.clear();
    R.ring_ray.clear();
    for (int x : R.ring) {
        const int i = x % n_, k = x / n_;
        const cplx z = center_of(i, k);
        int ray = -1;
        cplx foot;
        double pot = 0;
        double best = graph_distance(z, &ray, &foot, &pot);
        if (best > 4.0 * h_) ray = -1;
        BoundarySample smp{foot, base_label(std::max(ray, 0))};
        if (ray < 0) best = std::numeric_limits<double>::infinity();
        int outer = 0, inner = -1;
        for (int b = k - 2; b <= k + 2; ++b)
            for (int a = i - 2; a <= i + 2; ++a) {
                if (a < 0 || b < 0 || a >= n_ || b >= n_) continue;
                if (state_[idx(a, b)] == 2) outer = 1;
                if (state_[idx(a, b)] == 3) inner = inner_of_[idx(a, b)];
            }
        if (outer) {
            cplx w = z;
            for (int it = 0; it < 8; ++it) {
                GreenGradient g = green_infinity_gradient(p, w, 200);
                if (g.bounded || std::norm(g.grad) == 0.0) break;
                w -= (g.value - graph_.outer_level) * g.grad / std::norm(g.grad);
            }
            if (std::abs(w - z) < best) {
                best = std::abs(w - z);
                smp = {w, {PieceLabel::Kind::OuterEquipotential, {}, -1, -1, 0, graph_.outer_level}};
                ray = -1;
                pot = graph_.outer_level;
            }
        }
        if (inner >= 0) {
            cplx w = z;
            bool ok = true;
            for (int it = 0; it < 8 && ok; ++it) {
                try {
                    GreenGradient g = charts_[inner].gradient(w, 400);
                    if (std::norm(g.grad) == 0.0) break;
                    w -= (g.value - graph_.inner_level) * g.grad / std::norm(g.grad);
                } catch (const Error&) {
                    ok = false;
                }
            }
            if (ok && std::abs(w - z) < best) {
                best = std::abs(w - z);
                smp = {w, {PieceLabel::Kind::InnerEquipotential, {}, inner, -1, 0, graph_.inner_level}};
                ray = -1;
                pot = graph_.inner_level;
            }
        }
        if (!std::isfinite(best)) {
            // a gap: keep the pixel so the loop stays closed, with no label
            smp = {z, {PieceLabel::Kind::Vertex, {}, -1, -1, 0, 0.0}};
            ray = -2;
        }
        R.ring_proj.push_back(smp);
        R.ring_pot.push_back(pot);
        R.ring_ray.push_back(ray);
    }
    R.ring_ready = true;
}

void Puzzle::describe_base(PuzzlePiece& pc) {
    build_ring(pc.id);
    const Region& R = regions_[pc.id];
    pc.boundary.clear();
    pc.labels.clear();
    std::set<int> rays;
    for (std::size_t t = 0; t < R.ring.size(); ++t) {
        if (R.ring_ray[t] == -2) continue;
        pc.boundary.push_back(R.ring_proj[t]);
        pc.labels.insert(R.ring_proj[t].label);
        if (R.ring_ray[t] >= 0) rays.insert(R.ring_ray[t]);
    }
    for (int r : rays) {
        const int v = ray_at(r).vertex;
        PieceLabel l;
        l.kind = PieceLabel::Kind::Vertex;
        l.vertex = v;
        pc.labels.insert(l);
        pc.boundary.push_back({vertex_pts_[v], l});
    }
    pc.described = true;
}

PieceLabel Puzzle::lift_label(const PieceLabel& base, cplx z, int depth) {
    const CubicParam& p = graph_.param;
    const int per = graph_.period;
    PieceLabel out = base;
    out.depth = depth;
    auto component = [&]() {
        for (int i = 0; i < per; ++i) {
            try {
                if (charts_[i].phase(z, 400) == i && charts_[i].descend(z).reached_center) return i;
            } catch (const Error&) {
            }
        }
        return -1;
    };
    auto doublings = [&](int i) {
        int d = 0;
        for (int k = 0; k < depth; ++k)
            if ((i + k) % per == 0) ++d;
        return d;
    };
    switch (base.kind) {
        case PieceLabel::Kind::ExternalRay: {
            try {
                const double theta = angle_of(bottcher_infinity(p, z));
                out.angle = nearest_preimage(base.angle, 3, depth, theta);
            } catch (const Error&) {
                // Too close to the Julia set for the Bottcher map: pick the
                // preimage ray that passes nearest to z.
                std::uint64_t mk = 1;
                for (int i = 0; i < depth; ++i) mk *= 3;
                double best = std::numeric_limits<double>::infinity();
                for (std::uint64_t j = 0; j < mk; ++j) {
                    const RayAngle s(static_cast<std::int64_t>(base.angle.num + j * base.angle.den), base.angle.den * mk);
                    try {
                        const double d = polyline_distance(trace_external_ray(p, s, 1e-12).samples, z);
                        if (d < best) {
                            best = d;
                            out.angle = s;
                        }
                    } catch (const Error&) {
                    }
                }
                if (!std::isfinite(best)) throw;
            }
            break;
        }
        case PieceLabel::Kind::InternalRay: {
            const int i = component();
            out.component = i;
            if (i >= 0) {
                const double theta = angle_of(charts_[i].bottcher(z));
                out.angle = nearest_preimage(base.angle, 2, doublings(i), theta);
            }
            break;
        }
        case PieceLabel::Kind::OuterEquipotential:
            out.level = base.level * std::pow(3.0, -depth);
            break;
        case PieceLabel::Kind::InnerEquipotential: {
            const int i = component();
            out.component = i;
            out.level = i >= 0 ? base.level * std::pow(2.0, -doublings(i)) : base.level;
            break;
        }
        case PieceLabel::Kind::Vertex:
            break;
    }
    return out;
}

const PuzzlePiece& Puzzle::describe(int depth, int id) {
    PuzzlePiece& pc = piece(depth, id);
    if (pc.described) return pc;
    if (depth == 0) {
        describe_base(pc);
        return pc;
    }
    const CubicParam& p = graph_.param;
    std::vector<cplx> orb{pc.rep};
    for (int k = 0; k < depth; ++k) orb.push_back(evaluate(p, orb.back()));
    const int r = region_of(orb[depth]);
    build_ring(r);
    const Region& R = regions_[r];
    const std::size_t m = R.ring.size();

    // Loop along the ring of the depth-0 image, closed at its first pixel.
    Path loop;
    std::vector<int> tag;
    std::vector<cplx> proj;
    for (std::size_t t = 0; t <= m; ++t) {
        const int x = R.ring[t % m];
        loop.push_back(center_of(x % n_, x / n_));
        tag.push_back(static_cast<int>(t % m));
        proj.push_back(R.ring_proj[t % m].z);
    }

    // Lift a lead-in path from the image of the representative to the loop start.
    Path lead = raster_path(orb[depth], loop[0]);
    if (lead.empty()) throw Error(Err::ArrangementAmbiguous, "ring start not reachable inside its region");
    std::vector<cplx> starts(depth);
    for (int k = depth - 1; k >= 0; --k) {
        lead = lift(lead, orb[k]);
        starts[k] = lead.back();
    }

    for (int k = depth - 1; k >= 0; --k) {
        Path nl;
        std::vector<int> ntag;
        std::vector<cplx> nproj;
        cplx st = starts[k];
        bool closed = false;
        for (int pass = 0; pass < 3 && !closed; ++pass) {
            std::vector<std::size_t> pos;
            Path seg = lift(loop, st, &pos);
            std::vector<int> segtag(seg.size(), -1);
            std::vector<cplx> segproj(seg.size());
            for (std::size_t t = 0; t < loop.size(); ++t) {
                if (tag[t] < 0) continue;
                segtag[pos[t]] = tag[t];
                segproj[pos[t]] = lift(Path{loop[t], proj[t]}, seg[pos[t]]).back();
            }
            const std::size_t from = pass == 0 ? 0 : 1;
            nl.insert(nl.end(), seg.begin() + from, seg.end());
            ntag.insert(ntag.end(), segtag.begin() + from, segtag.end());
            nproj.insert(nproj.end(), segproj.begin() + from, segproj.end());
            st = seg.back();
            closed = close_preimage(st, starts[k]);
        }
        if (!closed) throw Error(Err::ArrangementAmbiguous, "boundary loop did not close after lifting");
        loop = std::move(nl);
        tag = std::move(ntag);
        proj = std::move(nproj);
    }

    // Runs of equal base labels along the lifted loop get one lifted label each.
    pc.boundary.clear();
    pc.labels.clear();
    std::size_t t = 0;
    const std::size_t L = loop.size();
    std::vector<std::size_t> tagged;
    for (std::size_t u = 0; u < L; ++u)
        if (tag[u] >= 0 && R.ring_ray[tag[u]] != -2) tagged.push_back(u);
    while (t < tagged.size()) {
        const int first = tag[tagged[t]];
        const PieceLabel base = R.ring_proj[first].label;
        std::size_t e = t;
        while (e < tagged.size() && R.ring_proj[tag[tagged[e]]].label == base) ++e;
        // representative: largest |potential| on rays, the middle sample otherwise
        std::size_t rep = tagged[(t + e - 1) / 2], near_v = rep;
        const int ray = R.ring_ray[first];
        if (ray >= 0) {
            double hi = -1.0, lo = std::numeric_limits<double>::infinity();
            for (std::size_t u = t; u < e; ++u) {
                const double a = std::abs(R.ring_pot[tag[tagged[u]]]);
                if (a > hi) {
                    hi = a;
                    rep = tagged[u];
                }
                if (a < lo) {
                    lo = a;
                    near_v = tagged[u];
                }
            }
        }
        PieceLabel lifted = lift_label(base, proj[rep], depth);
        pc.labels.insert(lifted);
        for (std::size_t u = t; u < e; ++u) pc.boundary.push_back({proj[tagged[u]], lifted});
        if (ray >= 0) {
            cplx v = proj[near_v];
            const cplx target = vertex_pts_[ray_at(ray).vertex];
            if (newton_n(p, depth, target, v)) {
                PieceLabel vl;
                vl.kind = PieceLabel::Kind::Vertex;
                vl.vertex = vertex_id(v);
                vl.depth = depth;
                pc.labels.insert(vl);
                pc.boundary.push_back({v, vl});
            }
        }
        t = e;
    }
    pc.described = true;
    return pc;
}

bool compact_containment(const PuzzlePiece& q, const PuzzlePiece& p) {
    using K = PieceLabel::Kind;
    for (const auto& a : q.labels) {
        for (const auto& b : p.labels) {
            if (a.kind != b.kind) continue;
            if (a.kind == K::ExternalRay && a.angle == b.angle) return false;
            if (a.kind == K::InternalRay && a.component >= 0 && a.component == b.component && a.angle == b.angle)
                return false;
            if (a.kind == K::Vertex && a.vertex == b.vertex) return false;
        }
    }
    return true;
}

double boundary_distance(Puzzle& puzzle, const PuzzlePiece& q, const PuzzlePiece& p) {
    using K = PieceLabel::Kind;
    double best = std::numeric_limits<double>::infinity();
    if (p.depth != 0) {
        for (const auto& a : q.boundary) {
            for (std::size_t t = 0; t < p.boundary.size(); ++t) {
                const cplx u = p.boundary[t].z, v = p.boundary[(t + 1) % p.boundary.size()].z;
                best = std::min(best, segment_distance(u, v, a.z));
            }
        }
        return best;
    }
    const SupportGraph& g = puzzle.graph();
    std::vector<const std::vector<cplx>*> arcs;
    std::vector<cplx> points;
    bool outer = false;
    std::vector<int> inner;
    for (const auto& l : p.labels) {
        if (l.kind == K::ExternalRay) {
            for (const auto& r : g.external)
                if (r.ray.angle == l.angle) arcs.push_back(&r.ray.samples);
        } else if (l.kind == K::InternalRay) {
            for (const auto& r : g.internal)
                if (r.ray.angle == l.angle && r.ray.component == l.component) arcs.push_back(&r.ray.samples);
        } else if (l.kind == K::Vertex) {
            points.push_back(puzzle.vertex_points()[l.vertex]);
        } else if (l.kind == K::OuterEquipotential) {
            outer = true;
        } else {
            inner.push_back(l.component);
        }
    }
    std::vector<BasinChart> charts;
    for (int j : inner) charts.emplace_back(g.param, g.cycle, j);
    for (const auto& a : q.boundary) {
        for (const auto* arc : arcs) best = std::min(best, polyline_distance(*arc, a.z));
        for (cplx v : points) best = std::min(best, std::abs(v - a.z));
        if (outer) {
            GreenGradient gg = green_infinity_gradient(g.param, a.z, 400);
            if (!gg.bounded && std::norm(gg.grad) > 0)
                best = std::min(best, std::abs(gg.value - g.outer_level) / std::abs(gg.grad));
        }
        for (const auto& ch : charts) {
            try {
                GreenGradient gg = ch.gradient(a.z, 400);
                if (std::norm(gg.grad) > 0) best = std::min(best, std::abs(gg.value - g.inner_level) / std::abs(gg.grad));
            } catch (const Error&) {
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Selection

AdmissibleWitness select_admissible(const CubicParam& p, int period, int orbit_budget, int resolution) {
    std::vector<std::string> diag;
    for (Candidate cand : {Candidate::Both, Candidate::G17, Candidate::G37}) {
        std::shared_ptr<Puzzle> pz;
        try {
            pz = std::make_shared<Puzzle>(build_support_graph(p, period, cand), resolution);
        } catch (const Error& e) {
            if (e.code() != Err::GraphInvalid && e.code() != Err::ArrangementAmbiguous) throw;
            diag.push_back(std::string(candidate_name(cand)) + ": " + e.what());
            continue;
        }
        std::set<std::pair<int, int>> seen;
        std::ostringstream visits;
        cplx x = -p.c;
        for (int k = 0; k < orbit_budget; ++k, x = evaluate(p, x)) {
            const cplx pt = k == 0 ? pz->critical_point() : x;
            try {
                const int P = pz->locate(pt, 0);
                const int Q = pz->locate(pt, period);
                visits << " " << k << ":P" << P << "/Q" << Q;
                if (!seen.insert({Q, P}).second) continue;
                const PuzzlePiece& qp = pz->describe(period, Q);
                const PuzzlePiece& pp = pz->describe(0, P);
                if (!compact_containment(qp, pp)) continue;
                const double dist = boundary_distance(*pz, qp, pp);
                if (dist <= kGeomTol) {
                    diag.push_back(std::string(candidate_name(cand)) + ": labels disjoint but boundaries meet at orbit index " +
                                   std::to_string(k));
                    continue;
                }
                AdmissibleWitness w;
                w.candidate = cand;
                w.orbit_index = k;
                w.q_id = Q;
                w.p_id = P;
                w.distance = dist;
                w.diagnostics = diag;
                w.puzzle = pz;
                return w;
            } catch (const Error& e) {
                if (e.code() != Err::OnGraph && e.code() != Err::ArrangementAmbiguous) throw;
                diag.push_back(std::string(candidate_name(cand)) + ": orbit index " + std::to_string(k) + ": " + e.what());
            }
        }
        std::ostringstream os;
        os << candidate_name(cand) << ": no witness; depth-0 pieces of the orbit:";
        for (int r = 0; r < pz->region_count(); ++r) {
            os << " P" << r << "{";
            bool first = true;
            for (const auto& l : pz->describe(0, r).labels) {
                os << (first ? "" : " ") << l.str();
                first = false;
            }
            os << "}";
        }
        os << "; visits" << visits.str();
        diag.push_back(os.str());
    }
    std::string all;
    for (const auto& d : diag) all += "\n  " + d;
    throw Error(Err::SelectionFailed, "no candidate produced a witness" + all);
}

// ---------------------------------------------------------------------------
// Tableaux

Tableau tableau_build(Puzzle& puzzle, cplx z, int depth, int width) {
    if (depth < 0 || width < 0) throw Error(Err::InvalidArgument, "tableau_build: negative size");
    const CubicParam& p = puzzle.param();
    Tableau t;
    t.base = z;
    t.depth = depth;
    t.width = width;
    std::vector<cplx> orb{z};
    // the nudged critical point stands in for -c only at column 0
    cplx x = z == puzzle.critical_point() ? -p.c : z;
    for (int l = 1; l <= width; ++l) {
        x = evaluate(p, x);
        orb.push_back(x);
    }
    std::vector<int> crit(depth + 1);
    for (int n = 0; n <= depth; ++n) crit[n] = puzzle.locate(puzzle.critical_point(), n);
    t.piece.assign(depth + 1, std::vector<int>(width + 1, -1));
    t.critical.assign(depth + 1, std::vector<bool>(width + 1, false));
    for (int l = 0; l <= width; ++l) {
        for (int n = 0; n <= depth; ++n) {
            t.piece[n][l] = puzzle.locate(orb[l], n);
            t.critical[n][l] = t.piece[n][l] == crit[n];
        }
    }
    return t;
}

bool tableau_coherent(Puzzle& puzzle, const Tableau& t) {
    for (int n = 0; n < t.depth; ++n) {
        for (int l = 0; l <= t.width; ++l) {
            const PuzzlePiece& pc = puzzle.piece(n + 1, t.at(n + 1, l));
            if (pc.parent != t.at(n, l)) return false;
            if (l < t.width && pc.image != t.at(n, l + 1)) return false;
            // a critical mark persists upward
            if (t.critical[n + 1][l] && !t.critical[n][l]) return false;
        }
    }
    return true;
}

RuleReport check_rule_r1(const Tableau& z, const Tableau& zp) {
    RuleReport r;
    const int D = std::min(z.depth, zp.depth);
    for (int n = 0; n <= D; ++n) {
        for (int l = 0; l <= z.width; ++l) {
            if (z.at(n, l) != zp.at(n, 0)) continue;
            for (int i = 0; i <= n; ++i) {
                for (int j = 0; i + j <= n && l + j <= z.width && j <= zp.width; ++j) {
                    ++r.checked;
                    if (z.at(i, l + j) != zp.at(i, j)) ++r.violations;
                }
            }
        }
    }
    return r;
}

RuleReport check_rule_r2(const Tableau& crit, const Tableau& z) {
    RuleReport r;
    for (int n = 1; n + 1 <= std::min(crit.depth, z.depth); ++n) {
        for (int l = 1; l < n && l <= crit.width; ++l) {
            // (a) the critical tableau: (n+1-l, l) critical, (n-i, i) not for 0 < i < l
            if (crit.at(n + 1 - l, l) != crit.at(n + 1 - l, 0)) continue;
            bool clear = true;
            for (int i = 1; i < l && clear; ++i)
                if (crit.at(n - i, i) == crit.at(n - i, 0)) clear = false;
            if (!clear) continue;
            // (b) z: (n, m) critical and (n+1, m) not
            for (int m = 1; m + l <= z.width; ++m) {
                if (z.at(n, m) != crit.at(n, 0) || z.at(n + 1, m) == crit.at(n + 1, 0)) continue;
                ++r.checked;
                if (z.at(n + 1 - l, m + l) == crit.at(n + 1 - l, 0)) ++r.violations;
            }
        }
    }
    return r;
}

std::vector<int> children(const Tableau& crit, int n, int budget) {
    std::vector<int> out;
    for (int k = 1; k <= budget && k <= crit.width && n + k - 1 <= crit.depth; ++k) {
        if (crit.at(n, k) != crit.at(n, 0)) continue;
        bool conformal = true;
        for (int j = 1; j < k && conformal; ++j)
            if (crit.at(n + k - j, j) == crit.at(n + k - j, 0)) conformal = false;
        if (conformal) out.push_back(k);
    }
    return out;
}

RecurrenceVerdict recurrence_classify(const Tableau& crit) {
    RecurrenceVerdict v;
    v.depth = crit.depth;
    v.budget = crit.width;
    const int D = crit.depth, J = crit.width;
    for (int n = 0; n <= D; ++n) {
        bool any = false;
        for (int j = 1; j <= J && !any; ++j) any = crit.critical[n][j];
        if (!any) {
            v.kind = RecurrenceVerdict::Kind::NonCritical;
            v.row = n;
            v.note = "row " + std::to_string(n) + " has no critical position";
            return v;
        }
    }
    for (int k = 1; k <= J; ++k) {
        bool all = true;
        for (int n = 0; n <= D && all; ++n) all = crit.critical[n][k];
        if (all) {
            v.kind = RecurrenceVerdict::Kind::NonRecurrent;
            v.period = k;
            v.note = "critical tableau is periodic with period " + std::to_string(k) + " down to depth " + std::to_string(D);
            return v;
        }
    }
    // Finite children test over the critical pieces whose children fit in the tableau.
    int most = 0;
    for (int n = 0; 2 * n <= D; ++n) most = std::max(most, static_cast<int>(children(crit, n, J).size()));
    v.kind = most >= 2 ? RecurrenceVerdict::Kind::ReluctantlyRecurrent : RecurrenceVerdict::Kind::PersistentlyRecurrent;
    v.note = "largest child count " + std::to_string(most) + "; deeper tableaux may change the verdict";
    return v;
}

RecurrenceVerdict recurrence_classify(Puzzle& puzzle, int depth, int budget) {
    return recurrence_classify(tableau_build(puzzle, puzzle.critical_point(), depth, budget));
}

}  // namespace cubic
