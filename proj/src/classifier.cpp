#include "cubic/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <unordered_map>

namespace cubic {

char OrbitClass::code() const {
    switch (kind) {
        case Kind::Escape: return 'E';
        case Kind::TypeA: return 'A';
        case Kind::TypeB: return 'B';
        case Kind::TypeC: return 'C';
        case Kind::TypeD: return 'D';
        case Kind::Undecided: return 'U';
    }
    return 'U';
}

bool same_variant(const OrbitClass& x, const OrbitClass& y, double mult_tol) {
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case OrbitClass::Kind::Escape: return x.n == y.n;
        case OrbitClass::Kind::TypeB: return x.k == y.k;
        case OrbitClass::Kind::TypeC: return x.l == y.l && x.kappa == y.kappa;
        case OrbitClass::Kind::TypeD: return x.q == y.q && std::abs(x.multiplier - y.multiplier) <= mult_tol;
        default: return true;
    }
}

std::string describe(const OrbitClass& v) {
    char buf[160];
    switch (v.kind) {
        case OrbitClass::Kind::Escape: std::snprintf(buf, sizeof buf, "E\tn=%d", v.n); break;
        case OrbitClass::Kind::TypeA: std::snprintf(buf, sizeof buf, "A"); break;
        case OrbitClass::Kind::TypeB: std::snprintf(buf, sizeof buf, "B\tk=%d", v.k); break;
        case OrbitClass::Kind::TypeC: std::snprintf(buf, sizeof buf, "C\tl=%d\tkappa=%d", v.l, v.kappa); break;
        case OrbitClass::Kind::TypeD:
            std::snprintf(buf, sizeof buf, "D\tq=%d\tmultiplier=%.17g%+.17gi", v.q, v.multiplier.real(),
                          v.multiplier.imag());
            break;
        case OrbitClass::Kind::Undecided: std::snprintf(buf, sizeof buf, "U\tbudget=%d", v.budget); break;
    }
    return buf;
}

namespace {

bool contracts(const CubicParam& p, cplx w, int per, double r) {
    for (int k = 0; k < 64; ++k) {
        cplx u = w + std::polar(r, kTwoPi * k / 64.0);
        cplx v = iterate_n(p, u, per);
        if (!(std::abs(v - w) < r / 2.0)) return false;
    }
    return true;
}

}  // namespace

double trap_radius_at(const CubicParam& p, const MarkedCycle& cycle, int j) {
    const int per = static_cast<int>(cycle.points.size());
    const cplx w = cycle.points[j];
    double r = 1.0;
    for (int i = 0; i < per; ++i)
        if (i != j) r = std::min(r, 0.5 * std::abs(cycle.points[i] - w));
    for (; r >= 1e-8; r /= 2.0)
        if (contracts(p, w, per, r) && contracts(p, w, per, r / 2.0)) return r / 2.0;
    throw Error(Err::NoTrapFound, "trap_radius: no contracting disk above 1e-8");
}

double trap_radius(const CubicParam& p, const MarkedCycle& cycle) { return trap_radius_at(p, cycle, 0); }

PhaseOracle::PhaseOracle(const CubicParam& p, const MarkedCycle& cycle, double trap_scale, int budget)
    : param_(p), cycle_(cycle), resc_(escape_bound(p).radius), budget_(budget) {
    for (int j = 0; j < static_cast<int>(cycle.points.size()); ++j)
        traps_.push_back(trap_scale * trap_radius_at(p, cycle, j));
}

int PhaseOracle::phase(cplx z) const {
    int t;
    return phase(z, t);
}

int PhaseOracle::phase(cplx z, int& entry_time) const {
    const int per = static_cast<int>(cycle_.points.size());
    for (int t = 0; t <= budget_; ++t) {
        if (std::norm(z) > resc_ * resc_) return -1;
        for (int j = 0; j < per; ++j) {
            if (std::norm(z - cycle_.points[j]) < traps_[j] * traps_[j]) {
                entry_time = t;
                return ((j - t) % per + per) % per;
            }
        }
        z = evaluate(param_, z);
    }
    return -2;
}

namespace {

// Descent witness: a gradient path of G^V from z that reaches w_j stays in
// one Fatou component.
bool descent_reaches(const CubicParam& p, const MarkedCycle& cycle, int j, cplx z) {
    try {
        BasinChart chart(p, cycle, j);
        GreenGradient g = chart.gradient(z);
        std::vector<cplx> starts;
        const double scale = std::max(1e-3, std::abs(z - chart.center()));
        if (std::abs(g.grad) > 1e-9) {
            starts.push_back(z);
        } else {
            // z is a critical point of G (e.g. z = -c); leave along both
            // directions where Re(h''(z) d^2) < 0.
            const double eps = 1e-6 * scale;
            cplx h1 = std::conj(g.grad);
            cplx h2 = std::conj(chart.gradient(z + eps).grad);
            cplx hpp = (h2 - h1) / eps;
            if (std::abs(hpp) == 0.0) return false;
            cplx dir = std::sqrt(-std::conj(hpp));
            dir /= std::abs(dir);
            const double rho = 1e-3 * scale;
            starts.push_back(z + rho * dir);
            starts.push_back(z - rho * dir);
        }
        for (cplx s : starts) {
            BasinChart::Descent d = chart.descend(s);
            if (d.reached_center) return true;
        }
    } catch (const Error&) {
    }
    return false;
}

}  // namespace

Membership flood_membership(const PhaseOracle& oracle, int j, cplx z, double h, bool use_descent,
                            int max_refinements) {
    const MarkedCycle& cyc = oracle.cycle();
    const CubicParam& par = oracle.param();
    const cplx w = cyc.points[j];
    Membership out;
    out.grid.w = w;

    int zt = 0;
    const int zphase = oracle.phase(z, zt);
    if (zphase != j) {
        out.member = false;
        out.grid.h = h;
        return out;
    }
    if (zt == 0 && std::norm(z - w) < oracle.trap(j) * oracle.trap(j)) {
        out.member = true;
        out.grid.h = h;
        return out;
    }
    if (use_descent && descent_reaches(par, cyc, j, z)) {
        out.member = true;
        out.grid.h = h;
        out.grid.via_descent = true;
        return out;
    }

    const double half = 2.0 * oracle.escape_radius();
    for (int ref = 0; ref <= max_refinements; ++ref) {
        const double hr = h / std::pow(2.0, ref);
        const int n = static_cast<int>(std::ceil(2.0 * half / hr));
        const double hh = 2.0 * half / n;  // exact fit keeps the lattice symmetric about 0
        const cplx origin(-half, -half);
        out.grid = MembershipGrid{};
        out.grid.w = w;
        out.grid.h = hh;
        out.grid.origin = origin;
        out.grid.cells = n;
        out.grid.refinements = ref;

        std::unordered_map<std::int64_t, signed char> cache;
        const std::int64_t side = 2 * static_cast<std::int64_t>(n) + 1;
        auto vertex_phase = [&](int ix, int iy) -> int {
            std::int64_t key = static_cast<std::int64_t>(iy) * side + ix;
            auto it = cache.find(key);
            if (it != cache.end()) return it->second;
            // integer offsets from 0 keep the lattice exactly symmetric under z -> -z
            cplx pt((ix - n) * hh / 2.0, (iy - n) * hh / 2.0);
            int ph = oracle.phase(pt);
            cache.emplace(key, static_cast<signed char>(ph));
            return ph;
        };
        auto good = [&](int i, int k) -> bool {
            if (i < 0 || k < 0 || i >= n || k >= n) return false;
            const int cx = 2 * i + 1, cy = 2 * k + 1;
            return vertex_phase(cx, cy) == j && vertex_phase(cx - 1, cy - 1) == j &&
                   vertex_phase(cx + 1, cy - 1) == j && vertex_phase(cx - 1, cy + 1) == j &&
                   vertex_phase(cx + 1, cy + 1) == j;
        };
        auto cell_of = [&](cplx x) {
            int i = static_cast<int>(std::floor((x.real() - origin.real()) / hh));
            int k = static_cast<int>(std::floor((x.imag() - origin.imag()) / hh));
            return std::make_pair(std::clamp(i, 0, n - 1), std::clamp(k, 0, n - 1));
        };
        auto [wi, wk] = cell_of(w);
        auto [zi, zk] = cell_of(z);
        const bool zgood = good(zi, zk);
        bool zadj = !zgood;
        if (zgood) {
            const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
            for (int e = 0; e < 4; ++e)
                if (!good(zi + di[e], zk + dk[e])) zadj = true;
        }
        out.grid.z_boundary_adjacent = zadj;
        if (!good(wi, wk)) continue;  // w's cell straddles the boundary: refine

        std::vector<char> seen(static_cast<size_t>(n) * n, 0);
        std::deque<std::pair<int, int>> queue{{wi, wk}};
        seen[static_cast<size_t>(wk) * n + wi] = 1;
        bool reached = false;
        while (!queue.empty()) {
            auto [i, k] = queue.front();
            queue.pop_front();
            out.grid.region.emplace_back(i, k);
            if (i == zi && k == zk) {
                reached = true;
                break;
            }
            const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
            for (int e = 0; e < 4; ++e) {
                int a = i + di[e], b = k + dk[e];
                if (a < 0 || b < 0 || a >= n || b >= n) continue;
                size_t idx = static_cast<size_t>(b) * n + a;
                if (seen[idx]) continue;
                seen[idx] = 1;
                if (good(a, b)) queue.emplace_back(a, b);
            }
        }
        if (reached) {
            out.member = true;
            return out;
        }
        if (!zadj) {
            out.member = false;
            return out;
        }
    }
    throw Error(Err::ResolutionExhausted, "flood_membership: point stays boundary-adjacent after " + std::to_string(max_refinements) + " refinements");
}

Membership flood_membership(const CubicParam& p, int period, cplx w, cplx z, double h, bool use_descent) {
    MarkedCycle cyc = critical_cycle(p, period);
    int j = -1;
    for (int i = 0; i < period; ++i)
        if (std::abs(cyc.points[i] - w) < kDeltaSep) j = i;
    if (j < 0) throw Error(Err::InvalidArgument, "flood_membership: w is not on the critical cycle");
    PhaseOracle oracle(p, cyc);
    return flood_membership(oracle, j, z, h, use_descent);
}

OrbitClass classify(const CubicParam& p, int period, const ClassifyOptions& opts) {
    OrbitClass out;
    out.budget = opts.budget;
    if (std::abs(p.c) < kDeltaSep) {
        out.kind = OrbitClass::Kind::TypeA;  // -c = c
        return out;
    }
    const EscapeBound bound = escape_bound(p);
    const MarkedCycle crit = critical_cycle(p, period);

    Orbit orb = iterate(p, -p.c, opts.budget, bound);
    if (orb.status == Orbit::Status::Escaped) {
        out.kind = OrbitClass::Kind::Escape;
        out.n = orb.n;
        return out;
    }
    if (orb.status == Orbit::Status::BoundedAtBudget) {
        // Slow convergence to a weakly attracting cycle: Newton from the tail
        // of the orbit, accepted if the tail is still closing in on it.
        const auto& s = orb.samples;
        const int n = static_cast<int>(s.size()) - 1;
        for (int q = 1; q <= 64 && n >= 11 * q; ++q) {
            if (std::abs(s[n] - s[n - q]) > 1e-3) continue;
            try {
                MarkedCycle cyc = find_cycle(p, s[n], q);
                if (std::abs(cyc.multiplier) >= 1.0) continue;
                auto dist = [&](cplx x) {
                    double d = 1e300;
                    for (const cplx& y : cyc.points) d = std::min(d, std::abs(x - y));
                    return d;
                };
                if (dist(s[n]) < 1e-3 && dist(s[n]) < dist(s[n - 10 * q])) {
                    bool hits_c = false;
                    for (const cplx& y : cyc.points)
                        for (const cplx& x : crit.points)
                            if (std::abs(x - y) <= kDeltaSep) hits_c = true;
                    if (hits_c) break;
                    out.kind = OrbitClass::Kind::TypeD;
                    out.q = q;
                    out.multiplier = cyc.multiplier;
                    out.cycle = cyc.points;
                    return out;
                }
            } catch (const Error&) {
            }
        }
        return out;
    }

    bool to_critical = false;
    for (const cplx& x : orb.cycle)
        for (const cplx& y : crit.points)
            if (std::abs(x - y) <= kDeltaSep) to_critical = true;
    if (!to_critical) {
        const int q = static_cast<int>(orb.cycle.size());
        if (q > 64) return out;
        try {
            MarkedCycle cyc = find_cycle(p, orb.cycle[0], q);
            if (std::abs(cyc.multiplier) < 1.0) {
                out.kind = OrbitClass::Kind::TypeD;
                out.q = q;
                out.multiplier = cyc.multiplier;
                out.cycle = cyc.points;
            }
        } catch (const Error&) {
        }
        return out;
    }

    try {
        PhaseOracle oracle(p, crit, opts.trap_scale, opts.budget);
        const double h = opts.h > 0 ? opts.h : oracle.escape_radius() / 128.0;
        int entry = 0;
        const int ph0 = oracle.phase(-p.c, entry);
        if (ph0 < 0) return out;
        if (flood_membership(oracle, ph0, -p.c, h, opts.use_descent, opts.max_refinements).member) {
            if (ph0 == 0) {
                out.kind = OrbitClass::Kind::TypeA;
            } else {
                out.kind = OrbitClass::Kind::TypeB;
                out.k = ph0;
            }
            return out;
        }
        cplx z = -p.c;
        for (int l = 1; l <= opts.budget; ++l) {
            z = evaluate(p, z);
            int kap = oracle.phase(z);
            if (kap < 0) return out;
            if (flood_membership(oracle, kap, z, h, opts.use_descent, opts.max_refinements).member) {
                out.kind = OrbitClass::Kind::TypeC;
                out.l = l;
                out.kappa = kap;
                return out;
            }
        }
    } catch (const Error&) {
        // NoTrapFound or ResolutionExhausted: stays Undecided
    }
    return out;
}

}  // namespace cubic
