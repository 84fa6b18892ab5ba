#include "cubic/paramspace.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "cubic/curve.hpp"
#include "cubic/rays.hpp"

namespace cubic {

char component_code(ComponentType t) {
    switch (t) {
        case ComponentType::A: return 'A';
        case ComponentType::B: return 'B';
        case ComponentType::C: return 'C';
        case ComponentType::D: return 'D';
    }
    return '?';
}

namespace {

OrbitClass::Kind kind_of(ComponentType t) {
    switch (t) {
        case ComponentType::A: return OrbitClass::Kind::TypeA;
        case ComponentType::B: return OrbitClass::Kind::TypeB;
        case ComponentType::C: return OrbitClass::Kind::TypeC;
        case ComponentType::D: return OrbitClass::Kind::TypeD;
    }
    return OrbitClass::Kind::Undecided;
}

OrbitClass class_of(const CenterSolution& s) {
    OrbitClass o;
    o.kind = kind_of(s.type);
    o.k = s.k;
    o.l = s.l;
    o.kappa = s.kappa;
    o.q = s.q;
    return o;
}

bool same_component_class(const OrbitClass& x, const CenterSolution& s) {
    if (x.kind != kind_of(s.type)) return false;
    switch (s.type) {
        case ComponentType::A: return true;
        case ComponentType::B: return x.k == s.k;
        case ComponentType::C: return x.l == s.l && x.kappa == s.kappa;
        case ComponentType::D: return x.q == s.q;
    }
    return false;
}

// Minimum distance from z to the orbit segment f^0(c) .. f^(p-1)(c).
double dist_to_cycle(const CubicParam& q, cplx z, int p) {
    double m = std::numeric_limits<double>::infinity();
    cplx w = q.c;
    for (int j = 0; j < p; ++j) {
        m = std::min(m, std::abs(z - w));
        w = evaluate(q, w);
    }
    return m;
}

// Exact-combinatorics check of a converged center. Fills the residuals.
bool admissible_center(CenterSolution& s) {
    const CubicParam& q = s.param;
    const int p = s.p;
    s.curve_residual = std::abs(iterate_n(q, q.c, p) - q.c);
    if (!(s.curve_residual < 1e-9)) return false;
    try {
        if (!exact_period(q, q.c, p)) return false;
    } catch (const Error&) {
        return false;
    }
    constexpr double sep = 1e-6;
    switch (s.type) {
        case ComponentType::A:
            s.relation_residual = std::abs(q.c);
            return s.relation_residual < 1e-9;
        case ComponentType::B: {
            if (std::abs(q.c) < sep) return false;
            s.relation_residual = std::abs(iterate_n(q, q.c, s.k) + q.c);
            if (!(s.relation_residual < 1e-9)) return false;
            for (int j = 1; j < s.k; ++j)
                if (std::abs(iterate_n(q, q.c, j) + q.c) < sep) return false;
            return true;
        }
        case ComponentType::C: {
            if (dist_to_cycle(q, -q.c, p) < sep) return false;
            s.relation_residual = std::abs(iterate_n(q, -q.c, s.l) - iterate_n(q, q.c, s.kappa));
            if (!(s.relation_residual < 1e-9)) return false;
            for (int j = 1; j < s.l; ++j)
                if (dist_to_cycle(q, iterate_n(q, -q.c, j), p) < sep) return false;
            return true;
        }
        case ComponentType::D: {
            s.relation_residual = std::abs(iterate_n(q, -q.c, s.q) + q.c);
            if (!(s.relation_residual < 1e-9)) return false;
            for (int d : proper_divisors(s.q))
                if (std::abs(iterate_n(q, -q.c, d) + q.c) < sep) return false;
            cplx z = -q.c;
            for (int j = 0; j < s.q; ++j) {
                if (dist_to_cycle(q, z, p) < sep) return false;
                z = evaluate(q, z);
            }
            return true;
        }
    }
    return false;
}

struct Relation {
    ComponentType type;
    int k = 0, l = 0, kappa = 0, q = 0;
    cplx operator()(cplx c, cplx a) const {
        const CubicParam z{c, a};
        switch (type) {
            case ComponentType::A: return c;
            case ComponentType::B: return iterate_n(z, c, k) + c;
            case ComponentType::C: return iterate_n(z, -c, l) - iterate_n(z, c, kappa);
            case ComponentType::D: return iterate_n(z, -c, q) + c;
        }
        return c;
    }
};

std::vector<Relation> relations(int p, ComponentType type, const CenterSearchOptions& o) {
    std::vector<Relation> out;
    switch (type) {
        case ComponentType::A: out.push_back({type}); break;
        case ComponentType::B:
            for (int k = 1; k < p; ++k) out.push_back({type, k});
            break;
        case ComponentType::C:
            for (int l = 1; l <= o.l_max; ++l)
                for (int kap = 0; kap < p; ++kap) out.push_back({type, 0, l, kap});
            break;
        case ComponentType::D:
            for (int q = 1; q <= o.q_max; ++q) out.push_back({type, 0, 0, 0, q});
            break;
    }
    return out;
}

// Bottcher coordinate of the critical point -c inside U_j. There -c sits on
// the boundary of the Bottcher disk and is reached from two sectors, so the
// value is fixed by continuing sqrt(B(F(x))) along the segment from w to -c,
// starting from B itself near w.
cplx critical_bottcher(const BasinChart& chart, cplx z) {
    const cplx w = chart.center();
    if (std::abs(z - w) < 1e-12 * (1.0 + std::abs(w))) return 0.0;
    const int p = chart.period();
    const CubicParam& q = chart.param();
    auto root_at = [&](double t) { return std::sqrt(chart.bottcher(iterate_n(q, w + t * (z - w), p))); };
    for (int n = 16; n <= 512; n *= 2) {
        const double t0 = 1.0 / n;
        cplx prev = root_at(t0);
        const cplx ref = chart.bottcher(w + t0 * (z - w));
        if (std::abs(ref + prev) < std::abs(ref - prev)) prev = -prev;
        bool clean = true;
        for (int j = 2; j <= n && clean; ++j) {
            cplx r = root_at(static_cast<double>(j) / n);
            const double dp = std::abs(r - prev), dm = std::abs(r + prev);
            if (std::min(dp, dm) > 0.5 * std::max(dp, dm) && std::abs(r) > 1e-7) clean = false;
            if (dm < dp) r = -r;
            prev = r;
        }
        if (clean) return prev;
    }
    throw Error(Err::NotInBasin, "phi_eval: no continuation of the Bottcher coordinate to the critical point");
}

cplx cycle_multiplier(const CubicParam& q, int period, cplx& z) {
    const LandingCertificate cert = certify_periodic(q, z, period);
    if (!cert.certified || std::abs(cert.multiplier) >= 1.0)
        throw Error(Err::NoConvergence, "rho: attracting cycle lost");
    z = cert.point;
    return cert.multiplier;
}

cplx aitken(cplx x0, cplx x1, cplx x2) {
    const cplx d1 = x1 - x0, d2 = x2 - x1, dd = d2 - d1;
    if (std::abs(dd) < 1e-300) return x2;
    return x2 - d2 * d2 / dd;
}

// Newton in a alone: puts (c, a) back on f^p(c) = c.
bool project(int p, cplx c, cplx& a) {
    for (int it = 0; it < 30; ++it) {
        const cplx step = fiber_newton_step(c, a, p);
        if (!std::isfinite(std::abs(step))) return false;
        a -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(a))) break;
    }
    return std::abs(iterate_n({c, a}, c, p) - c) < 1e-11 * (1.0 + std::abs(c));
}

// Newton for g(c, a(c)) = 0 where a(c) follows the curve: g is only ever
// evaluated on S_p, which Phi requires (the critical cycle must exist).
template <class G>
bool newton_projected(int p, G&& g, cplx& c, cplx& a, double tol, int max_iter) {
    if (!project(p, c, a)) return false;
    for (int it = 0; it < max_iter; ++it) {
        cplx v;
        try {
            v = g(c, a);
        } catch (const Error&) {
            return false;
        }
        if (!std::isfinite(std::abs(v))) return false;
        if (std::abs(v) < tol) return true;
        const cplx hc = 1e-7 * (1.0 + std::abs(c));
        cplx a2 = a;
        if (!project(p, c + hc, a2)) return false;
        cplx v2;
        try {
            v2 = g(c + hc, a2);
        } catch (const Error&) {
            return false;
        }
        const cplx dv = (v2 - v) / hc;
        if (std::abs(dv) == 0.0) return false;
        cplx dc = -v / dv;
        const double cap = 0.25 * (1.0 + std::abs(c));
        if (std::abs(dc) > cap) dc *= cap / std::abs(dc);
        const cplx dadc = (a2 - a) / hc;
        cplx an = a + dadc * dc;
        if (!project(p, c + dc, an)) return false;
        c += dc;
        a = an;
    }
    try {
        return std::abs(g(c, a)) < 1e3 * tol;
    } catch (const Error&) {
        return false;
    }
}

// Cheap membership for the chart mask: the chart value exists (immediate
// basin reached by descent, or the attracting q-cycle found) and lies in the
// unit disk; for C the entry time must not be shorter than the center's.
bool chart_member(const ComponentChart& ch, const CubicParam& q) {
    const cplx v = ch.value(q);
    if (!(std::abs(v) < 1.0)) return false;
    if (ch.center.type == ComponentType::C) {
        const int p = ch.center.p;
        const MarkedCycle cyc = critical_cycle(q, p);
        cplx z = -q.c;
        for (int j = 0; j < ch.center.l; ++j, z = evaluate(q, z)) {
            for (int m = 0; m < p; ++m) {
                try {
                    BasinChart(q, cyc, m).bottcher(z);
                    return false;
                } catch (const Error&) {
                }
            }
        }
    }
    return true;
}

}  // namespace

std::vector<CenterSolution> center_search(int p, ComponentType type, const CenterSearchOptions& opts) {
    if (p < 1) throw Error(Err::InvalidArgument, "center_search: p >= 1");
    std::vector<CenterSolution> out;
    auto known = [&](const CenterSolution& s) {
        for (const auto& o : out)
            if (o.k == s.k && o.l == s.l && o.kappa == s.kappa && o.q == s.q &&
                std::abs(o.param.c - s.param.c) < 1e-8 && std::abs(o.param.a - s.param.a) < 1e-8)
                return true;
        return false;
    };
    for (const Relation& rel : relations(p, type, opts)) {
        std::vector<CubicParam> seeds;
        if (type == ComponentType::A) {
            for (const FiberRoot& r : fiber_solve(0.0, p).roots)
                if (r.exact_period == p) seeds.push_back({0.0, r.a});
        } else {
            const int g = std::max(2, opts.grid);
            for (int i = 0; i < g; ++i)
                for (int k = 0; k < g; ++k) {
                    const cplx c(opts.lo.real() + (i + 0.5) * (opts.hi.real() - opts.lo.real()) / g,
                                 opts.lo.imag() + (k + 0.5) * (opts.hi.imag() - opts.lo.imag()) / g);
                    for (const FiberRoot& r : fiber_solve(c, p).roots)
                        if (r.exact_period == p) seeds.push_back({c, r.a});
                }
        }
        for (const CubicParam& s0 : seeds) {
            cplx c = s0.c, a = s0.a;
            if (!newton_on_curve(p, rel, c, a, 1e-13, 80)) continue;
            CenterSolution s;
            s.param = {c, a};
            s.p = p;
            s.type = type;
            s.k = rel.k;
            s.l = rel.l;
            s.kappa = rel.kappa;
            s.q = rel.q;
            if (type == ComponentType::A) s.param.c = 0.0;
            if (!admissible_center(s) || known(s)) continue;
            try {
                if (!same_component_class(classify(s.param, p), s)) continue;
            } catch (const Error&) {
                continue;
            }
            out.push_back(s);
        }
    }
    std::sort(out.begin(), out.end(), [](const CenterSolution& x, const CenterSolution& y) {
        return std::tie(x.k, x.l, x.kappa, x.q) < std::tie(y.k, y.l, y.kappa, y.q) ||
               (std::tie(x.k, x.l, x.kappa, x.q) == std::tie(y.k, y.l, y.kappa, y.q) &&
                (x.param.c.real() < y.param.c.real() ||
                 (x.param.c.real() == y.param.c.real() && x.param.c.imag() < y.param.c.imag())));
    });
    return out;
}

cplx phi_eval(const CubicParam& param, int p, const OrbitClass& cls) {
    const MarkedCycle cyc = critical_cycle(param, p);
    switch (cls.kind) {
        case OrbitClass::Kind::TypeA: return critical_bottcher(BasinChart(param, cyc, 0), -param.c);
        case OrbitClass::Kind::TypeB: {
            const cplx w = cyc.points[cls.k % p];
            if (std::abs(w + param.c) < 1e-12 * (1.0 + std::abs(w))) return 0.0;  // the center itself
            return critical_bottcher(BasinChart(param, cyc, cls.k % p), -param.c);
        }
        case OrbitClass::Kind::TypeC: {
            const BasinChart chart(param, cyc, cls.kappa % p);
            const cplx z = iterate_n(param, -param.c, cls.l);
            if (std::abs(z - chart.center()) < 1e-12 * (1.0 + std::abs(z))) return 0.0;
            return chart.bottcher(z);
        }
        default: throw Error(Err::NotHyperbolicABC, "phi_eval: parameter is not of type A, B or C");
    }
}

cplx rho_eval(const CubicParam& param, int p) {
    const OrbitClass cls = classify(param, p);
    if (cls.kind != OrbitClass::Kind::TypeD) throw Error(Err::NotTypeD, "rho_eval: parameter is not of type D");
    cplx z = cls.cycle.front();
    return cycle_multiplier(param, cls.q, z);
}

cplx ComponentChart::value(const CubicParam& param, cplx* cycle_hint) const {
    if (center.type != ComponentType::D) return phi_eval(param, center.p, class_of(center));
    cplx z;
    if (cycle_hint) {
        z = *cycle_hint;
    } else {
        z = -param.c;
        for (int i = 0; i < 400 * center.q; ++i) z = evaluate(param, z);
    }
    const cplx m = cycle_multiplier(param, center.q, z);
    if (cycle_hint) *cycle_hint = z;
    return m;
}

bool ComponentChart::cell_inside(cplx c) const {
    const int i = static_cast<int>(std::floor((c.real() - origin.real()) / h));
    const int k = static_cast<int>(std::floor((c.imag() - origin.imag()) / h));
    if (i < 0 || k < 0 || i >= n || k >= n) return false;
    return inside[static_cast<std::size_t>(k) * n + i] != 0;
}

std::optional<CubicParam> ComponentChart::nearest_inside(cplx c) const {
    double best = std::numeric_limits<double>::infinity();
    std::optional<CubicParam> out;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
            const std::size_t id = static_cast<std::size_t>(k) * n + i;
            if (!inside[id]) continue;
            const cplx cc = origin + cplx((i + 0.5) * h, (k + 0.5) * h);
            const double d = std::abs(cc - c);
            if (d < best) {
                best = d;
                out = CubicParam{cc, a_values[id]};
            }
        }
    return out;
}

ComponentChart build_chart(const CenterSolution& center, int cells) {
    ComponentChart ch;
    ch.center = center;
    ch.d_omega = center.type == ComponentType::A ? 2 : center.type == ComponentType::B ? 3 : 1;
    const int p = center.p;
    const cplx c0 = center.param.c, a0 = center.param.a;
    cells = std::max(cells, 8);
    // Linear coefficient of Psi at the center, refined once at the scale it gives.
    auto lambda_at = [&](double eps) {
        const cplx c1 = c0 + eps;
        cplx a1 = branch_step(c0, a0, c1, p, eps);
        const cplx v = ch.value({c1, a1});
        const cplx root = ch.d_omega == 1 ? v : std::pow(v, 1.0 / ch.d_omega);
        return root / eps;
    };
    bool have = false;
    for (double eps = 1e-3; eps > 1e-8 && !have; eps *= 0.1) {
        try {
            ch.lambda = lambda_at(eps);
            have = std::abs(ch.lambda) * eps < 0.1;
        } catch (const Error&) {
        }
    }
    if (!have) throw Error(Err::NoConvergence, "build_chart: no linear coefficient at the center");
    try {
        ch.lambda = lambda_at(std::min(1e-2, 0.02 / std::abs(ch.lambda)));
    } catch (const Error&) {
    }
    double r = std::clamp(1.5 / std::abs(ch.lambda), 1e-3, 2.0);
    for (int attempt = 0; attempt < 6; ++attempt, r *= 2.0) {
        ch.n = cells;
        ch.h = 2.0 * r / cells;
        ch.origin = c0 - cplx(r, r);
        const std::size_t total = static_cast<std::size_t>(cells) * cells;
        ch.inside.assign(total, 0);
        ch.a_values.assign(total, 0.0);
        std::vector<std::uint8_t> seen(total, 0);
        auto cell_c = [&](int i, int k) { return ch.origin + cplx((i + 0.5) * ch.h, (k + 0.5) * ch.h); };
        const int i0 = std::clamp(static_cast<int>((c0.real() - ch.origin.real()) / ch.h), 0, cells - 1);
        const int k0 = std::clamp(static_cast<int>((c0.imag() - ch.origin.imag()) / ch.h), 0, cells - 1);
        std::deque<std::pair<int, int>> queue;
        {
            const std::size_t id = static_cast<std::size_t>(k0) * cells + i0;
            seen[id] = 1;
            const cplx a = branch_step(c0, a0, cell_c(i0, k0), p, ch.h);
            ch.inside[id] = 1;
            ch.a_values[id] = a;
            queue.push_back({i0, k0});
        }
        bool touches = false;
        while (!queue.empty()) {
            const auto [i, k] = queue.front();
            queue.pop_front();
            const std::size_t from = static_cast<std::size_t>(k) * cells + i;
            const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
            for (int m = 0; m < 4; ++m) {
                const int ni = i + di[m], nk = k + dk[m];
                if (ni < 0 || nk < 0 || ni >= cells || nk >= cells) continue;
                const std::size_t id = static_cast<std::size_t>(nk) * cells + ni;
                if (seen[id]) continue;
                seen[id] = 1;
                const cplx cn = cell_c(ni, nk);
                bool in = false;
                cplx a;
                try {
                    a = branch_step(cell_c(i, k), ch.a_values[from], cn, p, 0.5 * ch.h);
                    in = chart_member(ch, {cn, a});
                } catch (const Error&) {
                    in = false;
                }
                if (!in) continue;
                ch.inside[id] = 1;
                ch.a_values[id] = a;
                if (ni == 0 || nk == 0 || ni == cells - 1 || nk == cells - 1) touches = true;
                queue.push_back({ni, nk});
            }
        }
        if (!touches) break;
    }
    return ch;
}

int count_phi_preimages(const ComponentChart& chart, cplx w0) {
    const int n = chart.n;
    const int p = chart.center.p;
    std::vector<double> dist(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::infinity());
    std::vector<cplx> hints(dist.size());
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
            const std::size_t id = static_cast<std::size_t>(k) * n + i;
            if (!chart.inside[id]) continue;
            const cplx c = chart.origin + cplx((i + 0.5) * chart.h, (k + 0.5) * chart.h);
            try {
                dist[id] = std::abs(chart.value({c, chart.a_values[id]}) - w0);
            } catch (const Error&) {
            }
        }
    std::vector<CubicParam> found;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
            const std::size_t id = static_cast<std::size_t>(k) * n + i;
            if (!std::isfinite(dist[id])) continue;
            bool local_min = true;
            for (int dk = -1; dk <= 1 && local_min; ++dk)
                for (int di = -1; di <= 1; ++di) {
                    const int ni = i + di, nk = k + dk;
                    if ((di == 0 && dk == 0) || ni < 0 || nk < 0 || ni >= n || nk >= n) continue;
                    if (dist[static_cast<std::size_t>(nk) * n + ni] < dist[id]) {
                        local_min = false;
                        break;
                    }
                }
            if (!local_min) continue;
            cplx c = chart.origin + cplx((i + 0.5) * chart.h, (k + 0.5) * chart.h);
            cplx a = chart.a_values[id];
            auto g = [&](cplx cc, cplx aa) {
                try {
                    return chart.value({cc, aa}) - w0;
                } catch (const Error&) {
                    return cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
                }
            };
            if (!newton_projected(p, g, c, a, 1e-11, 60)) continue;
            try {
                if (!same_component_class(classify({c, a}, p), chart.center)) continue;
            } catch (const Error&) {
                continue;
            }
            // Same component: the solution must sit next to the sampled region.
            const auto near = chart.nearest_inside(c);
            if (!near || std::abs(near->c - c) > 2.0 * chart.h) continue;
            bool dup = false;
            for (const auto& f : found)
                if (std::abs(f.c - c) < 1e-7 && std::abs(f.a - a) < 1e-7) dup = true;
            if (!dup) found.push_back({c, a});
        }
    return static_cast<int>(found.size());
}

namespace {

struct Tracker {
    const ComponentChart& chart;
    int p;
    cplx hint{0.0, 0.0};
    bool has_hint = false;

    cplx eval(const CubicParam& q) {
        if (chart.center.type != ComponentType::D) return chart.value(q);
        if (!has_hint) {
            hint = -q.c;
            for (int i = 0; i < 400 * chart.center.q; ++i) hint = evaluate(q, hint);
            has_hint = true;
        }
        cplx z = hint;
        const cplx m = chart.value(q, &z);
        hint = z;
        return m;
    }

    // Newton on {curve, value = target} from (c, a); keeps the cycle hint in step.
    bool solve(cplx target, cplx& c, cplx& a) {
        const cplx saved = hint;
        const bool saved_has = has_hint;
        auto g = [&](cplx cc, cplx aa) {
            try {
                if (chart.center.type != ComponentType::D) return chart.value({cc, aa}) - target;
                cplx z = hint;
                return chart.value({cc, aa}, &z) - target;
            } catch (const Error&) {
                return cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
            }
        };
        if (!newton_projected(p, g, c, a, 1e-12, 40)) {
            hint = saved;
            has_hint = saved_has;
            return false;
        }
        try {
            eval({c, a});
        } catch (const Error&) {
            hint = saved;
            has_hint = saved_has;
            return false;
        }
        return true;
    }
};

cplx target_of(const ComponentChart& ch, double s, double t) {
    const cplx u = std::polar(s, kTwoPi * t);
    return ch.d_omega == 1 ? u : std::pow(u, ch.d_omega);
}

// Continuation from (c, a) at parameter x0 to x1 along target(x); prev holds the
// last two accepted points for the predictor. Returns false on a stall.
template <class Target>
bool advance(Tracker& tr, Target&& target, double x0, double x1, cplx& c, cplx& a, cplx& dcdx, cplx& dadx) {
    double x = x0;
    double dx = x1 - x0;
    const double min_dx = 1e-9 * std::max(1.0, std::abs(x1 - x0));
    while ((x1 - x) * (x1 - x0) > 0.0) {
        if (std::abs(dx) > std::abs(x1 - x)) dx = x1 - x;
        cplx cn = c + dcdx * dx, an = a + dadx * dx;
        const cplx pred = cn;
        const cplx saved_hint = tr.hint;
        bool ok = tr.solve(target(x + dx), cn, an);
        if (ok) {
            // Reject jumps far beyond the predictor.
            const double move = std::abs(cn - c);
            const double guess = std::abs(pred - c);
            if (std::abs(cn - pred) > 0.5 * std::max(guess, 1e-6 * (1.0 + std::abs(c))) + 0.1 * move) ok = false;
        }
        if (!ok) {
            tr.hint = saved_hint;
            dx *= 0.5;
            if (std::abs(dx) < min_dx) return false;
            continue;
        }
        dcdx = (cn - c) / dx;
        dadx = (an - a) / dx;
        c = cn;
        a = an;
        x += dx;
        dx *= 1.5;
    }
    return true;
}

}  // namespace

ParamRaySample param_ray_trace(const ComponentChart& chart, double t, double s_from, double s_to, int steps) {
    if (!(s_from > 0.0 && s_from < s_to && s_to < 1.0) || steps < 2)
        throw Error(Err::InvalidArgument, "param_ray_trace: need 0 < s_from < s_to < 1 and steps >= 2");
    ParamRaySample out;
    out.t = t;
    const int p = chart.center.p;
    const cplx c0 = chart.center.param.c, a0 = chart.center.param.a;
    Tracker tr{chart, p};
    auto target = [&](double s) { return target_of(chart, s, t); };
    // Start very close to the center where Psi is nearly linear.
    const double s0 = std::min(0.01, 0.5 * s_from);
    const cplx dir = std::polar(1.0, kTwoPi * t) / chart.lambda;
    cplx c = c0 + s0 * dir;
    cplx a = branch_step(c0, a0, c, p, 0.1 * s0 * std::abs(dir));
    if (chart.center.type == ComponentType::D) {
        cplx z = -c;
        for (int i = 0; i < 400 * chart.center.q; ++i) z = evaluate({c, a}, z);
        tr.hint = z;
        tr.has_hint = true;
    }
    if (!tr.solve(target(s0), c, a)) throw Error(Err::ContinuationStall, "param_ray_trace: start point failed");
    cplx dcds = dir, dads = (a - a0) / s0;
    if (!advance(tr, target, s0, s_from, c, a, dcds, dads)) {
        out.status = ParamRaySample::Status::Stalled;
        out.last_s = s0;
        return out;
    }
    const double la = std::log(1.0 - s_from), lb = std::log(1.0 - s_to);
    double s = s_from;
    for (int j = 0; j < steps; ++j) {
        const double sj = 1.0 - std::exp(la + (lb - la) * j / (steps - 1));
        if (j > 0 && !advance(tr, target, s, sj, c, a, dcds, dads)) {
            out.status = ParamRaySample::Status::Stalled;
            break;
        }
        s = sj;
        out.s.push_back(sj);
        out.points.push_back({c, a});
        out.max_curve_residual = std::max(out.max_curve_residual, std::abs(iterate_n({c, a}, c, p) - c));
        try {
            out.max_value_residual = std::max(out.max_value_residual, std::abs(tr.eval({c, a}) - target(sj)));
        } catch (const Error&) {
            out.max_value_residual = std::numeric_limits<double>::infinity();
        }
    }
    out.last_s = out.s.empty() ? s0 : out.s.back();
    const std::size_t m = out.points.size();
    if (m >= 4) {
        const cplx l1 = aitken(out.points[m - 4].c, out.points[m - 3].c, out.points[m - 2].c);
        const cplx l2 = aitken(out.points[m - 3].c, out.points[m - 2].c, out.points[m - 1].c);
        out.landing = l2;
        out.error_bar = std::abs(l2 - l1);
    } else if (m > 0) {
        out.landing = out.points.back().c;
        out.error_bar = std::numeric_limits<double>::infinity();
    }
    return out;
}

int winding_number(const std::vector<cplx>& loop, cplx z) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) total += std::arg((loop[i + 1] - z) / (loop[i] - z));
    if (loop.size() > 1) total += std::arg((loop.front() - z) / (loop.back() - z));
    return static_cast<int>(std::lround(total / kTwoPi));
}

BoundaryTrace boundary_trace_D(const ComponentChart& chart, int samples, double radius) {
    if (chart.center.type != ComponentType::D) throw Error(Err::NotTypeD, "boundary_trace_D: chart is not of type D");
    if (samples < 8 || !(radius > 0.0 && radius < 1.0))
        throw Error(Err::InvalidArgument, "boundary_trace_D: samples >= 8 and 0 < radius < 1");
    BoundaryTrace out;
    out.radius = radius;
    const ParamRaySample ray = param_ray_trace(chart, 0.0, std::min(0.1, 0.5 * radius), radius, 8);
    if (ray.status != ParamRaySample::Status::Complete)
        throw Error(Err::ContinuationStall, "boundary_trace_D: radial leg stalled");
    const int p = chart.center.p;
    cplx c = ray.points.back().c, a = ray.points.back().a;
    Tracker tr{chart, p};
    {
        cplx z = -c;
        for (int i = 0; i < 400 * chart.center.q; ++i) z = evaluate({c, a}, z);
        tr.hint = z;
        tr.has_hint = true;
        tr.eval({c, a});
    }
    auto target = [&](double th) { return std::polar(radius, th); };
    out.polyline.push_back({c, a});
    cplx dcd = 0.0, dad = 0.0;
    {
        // Tangent from a tiny angular step.
        cplx c1 = c, a1 = a;
        Tracker t1 = tr;
        const double d = 1e-6;
        if (t1.solve(target(d), c1, a1)) {
            dcd = (c1 - c) / d;
            dad = (a1 - a) / d;
        }
    }
    for (int k = 1; k <= samples; ++k) {
        const double th0 = kTwoPi * (k - 1) / samples, th1 = kTwoPi * k / samples;
        if (!advance(tr, target, th0, th1, c, a, dcd, dad)) {
            out.stall_angles.push_back(th0 / kTwoPi);
            throw Error(Err::ContinuationStall, "boundary_trace_D: stalled near angle " + std::to_string(th0 / kTwoPi));
        }
        out.polyline.push_back({c, a});
        try {
            out.max_rho_error = std::max(out.max_rho_error, std::abs(tr.eval({c, a}) - target(th1)));
        } catch (const Error&) {
            out.max_rho_error = std::numeric_limits<double>::infinity();
        }
    }
    out.closure_defect = std::abs(out.polyline.back().c - out.polyline.front().c);
    std::vector<cplx> loop;
    for (std::size_t i = 0; i + 1 < out.polyline.size(); ++i) loop.push_back(out.polyline[i].c);
    for (std::size_t i = 0; i < loop.size(); ++i)
        for (std::size_t j = i + 1; j < loop.size(); ++j)
            out.diameter = std::max(out.diameter, std::abs(loop[i] - loop[j]));
    out.winding = winding_number(loop, chart.center.param.c);
    // Simplicity: no two non-adjacent edges cross.
    const std::size_t m = loop.size();
    auto cross = [](cplx u, cplx v) { return u.real() * v.imag() - u.imag() * v.real(); };
    for (std::size_t i = 0; i < m && out.simple; ++i) {
        const cplx p1 = loop[i], p2 = loop[(i + 1) % m];
        for (std::size_t j = i + 2; j < m; ++j) {
            if (i == 0 && j == m - 1) continue;
            const cplx q1 = loop[j], q2 = loop[(j + 1) % m];
            const double d1 = cross(p2 - p1, q1 - p1), d2 = cross(p2 - p1, q2 - p1);
            const double d3 = cross(q2 - q1, p1 - q1), d4 = cross(q2 - q1, p2 - q1);
            if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) {
                out.simple = false;
                break;
            }
        }
    }
    return out;
}

bool parabolic_angle(const ComponentChart& chart, double t) {
    double x = chart.d_omega * t;
    x -= std::floor(x);
    // Exact period 2 under doubling: x in {1/3, 2/3}.
    return std::abs(x - 1.0 / 3.0) < 1e-12 || std::abs(x - 2.0 / 3.0) < 1e-12;
}

SeparationTable landing_separation_experiment(const ComponentChart& chart, const std::vector<double>& angles,
                                              double s_max) {
    SeparationTable out;
    out.pass = true;
    for (double t : angles) {
        ParamRaySample r;
        try {
            r = param_ray_trace(chart, t, 0.1, s_max, 24);
        } catch (const Error& e) {
            r.t = t;
            r.status = ParamRaySample::Status::Stalled;
            r.error_bar = std::numeric_limits<double>::infinity();
            out.diagnostics.push_back("t=" + std::to_string(t) + " start failed: " + e.what());
        }
        if (r.status == ParamRaySample::Status::Stalled) {
            out.pass = false;
            out.diagnostics.push_back("t=" + std::to_string(t) + " stalled at s=" + std::to_string(r.last_s));
        }
        if (parabolic_angle(chart, t)) out.diagnostics.push_back("t=" + std::to_string(t) + " parabolic landing expected");
        out.rays.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < out.rays.size(); ++i)
        for (std::size_t j = i + 1; j < out.rays.size(); ++j) {
            SeparationRow row;
            row.t1 = out.rays[i].t;
            row.t2 = out.rays[j].t;
            row.distance = std::abs(out.rays[i].landing - out.rays[j].landing);
            row.error_sum = out.rays[i].error_bar + out.rays[j].error_bar;
            row.pass = out.rays[i].status == ParamRaySample::Status::Complete &&
                       out.rays[j].status == ParamRaySample::Status::Complete && row.distance > 3.0 * row.error_sum;
            if (!row.pass) out.pass = false;
            out.rows.push_back(row);
        }
    return out;
}

}  // namespace cubic
