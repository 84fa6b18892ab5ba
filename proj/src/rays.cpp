#include "cubic/rays.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace cubic {

namespace {

using u128 = unsigned __int128;

std::uint64_t mulmod(std::uint64_t x, std::uint64_t y, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<u128>(x) * y % m);
}

std::uint64_t powmod(std::uint64_t b, int e, std::uint64_t m) {
    std::uint64_t r = 1 % m;
    b %= m;
    while (e > 0) {
        if (e & 1) r = mulmod(r, b, m);
        b = mulmod(b, b, m);
        e >>= 1;
    }
    return r;
}

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// f^n(z) and its derivative.
cplx iterate_with_derivative(const CubicParam& p, cplx z, int n, cplx& deriv) {
    deriv = 1.0;
    for (int k = 0; k < n; ++k) {
        deriv *= derivative(p, z);
        z = evaluate(p, z);
    }
    return z;
}

cplx inverse_bottcher_series(const CubicParam& p, cplx w) {
    return w + p.c * p.c / w - p.a / (3.0 * w * w);
}

// Newton for f^n(z) = target started at guess.
bool newton_preimage(const CubicParam& p, int n, cplx target, cplx guess, cplx& out) {
    cplx z = guess;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 60; ++it) {
        cplx d;
        cplx v = iterate_with_derivative(p, z, n, d);
        if (!finite(v) || !finite(d) || d == 0.0) return false;
        cplx dz = (v - target) / d;
        z -= dz;
        if (!finite(z)) return false;
        const double s = std::abs(dz), scale = 1.0 + std::abs(z);
        // Either full precision, or the corrections stopped shrinking at the
        // rounding floor of f^n (deep inside a superattracting basin).
        if (s < 1e-14 * scale || (it > 2 && s > 0.5 * prev && s < 1e-9 * scale)) {
            out = z;
            return true;
        }
        prev = s;
    }
    return false;
}

int exact_point_period(const CubicParam& p, cplx z, int m) {
    for (int d = 1; d <= m; ++d) {
        if (m % d) continue;
        if (std::abs(iterate_n(p, z, d) - z) < 1e-8 * (1.0 + std::abs(z))) return d;
    }
    return m;
}

// Shared level-descent driver. `solve(level, guess, out)` computes the ray
// point at a level; levels run through sign * 2^(k/steps).
template <class Solve>
void descend_levels(TracedRay& ray, const CubicParam& p, Solve solve, double first_level, double last_level,
                    int steps, int period_eq) {
    const double sign = first_level < 0 ? -1.0 : 1.0;
    int k = static_cast<int>(std::ceil(steps * std::log2(std::abs(first_level))));
    double cur = sign * std::exp2(static_cast<double>(k) / steps);
    cplx z;
    if (!solve(cur, cplx(std::numeric_limits<double>::quiet_NaN(), 0.0), z))
        throw Error(Err::NoConvergence, "ray: no start point");
    ray.samples.push_back(z);
    ray.potentials.push_back(cur);
    double rate = std::numeric_limits<double>::infinity();  // step length per unit of log-level
    std::optional<cplx> last_attempt;
    int since_attempt = 0;

    // Advance from the current sample to `level`, subdividing on failure.
    auto advance = [&](auto&& self, double level, int depth) -> void {
        const cplx z0 = ray.samples.back();
        const double l0 = ray.potentials.back();
        const double dlog = std::abs(std::log(std::abs(level) / std::abs(l0)));
        cplx z1;
        bool ok = solve(level, z0, z1);
        if (ok && std::isfinite(rate)) ok = std::abs(z1 - z0) <= 4.0 * rate * dlog + 1e-12 * (1.0 + std::abs(z0));
        if (ok) {
            double step = std::abs(z1 - z0);
            if (dlog > 0) rate = std::max(step / dlog, 1e-300);
            ray.samples.push_back(z1);
            ray.potentials.push_back(level);
            return;
        }
        if (depth >= 10) throw Error(Err::RayBifurcates, "ray continuation jumped branches near level " + std::to_string(level));
        const double mid = sign * std::sqrt(std::abs(level * l0));
        self(self, mid, depth + 1);
        self(self, level, depth + 1);
    };

    for (--k;; --k) {
        double level = sign * std::exp2(static_cast<double>(k) / steps);
        if (std::abs(level) < std::abs(last_level)) break;
        advance(advance, level, 0);
        const std::size_t m = ray.samples.size();
        const cplx zn = ray.samples[m - 1];
        if (std::abs(zn - ray.samples[m - 2]) < 1e-9) {
            ray.landing = TracedRay::Landing::Landed;
            break;
        }
        if (period_eq > 0 && std::abs(level) < 1e-2 && ++since_attempt >= steps) {
            since_attempt = 0;
            LandingCertificate c = certify_periodic(p, zn, period_eq);
            if (c.certified) {
                bool close = std::abs(c.point - zn) < 1e-4 * (1.0 + std::abs(c.point));
                if (close && last_attempt && std::abs(*last_attempt - c.point) < 1e-9 * (1.0 + std::abs(c.point))) {
                    ray.landing = TracedRay::Landing::Landed;
                    break;
                }
                last_attempt = c.point;
            } else {
                last_attempt.reset();
            }
        }
    }
    ray.level = ray.potentials.back();
    if (period_eq > 0) {
        LandingCertificate c = certify_periodic(p, ray.samples.back(), period_eq);
        const double gap = std::abs(c.point - ray.samples.back());
        bool agrees = c.certified && (gap < 1e-4 * (1.0 + std::abs(c.point)) ||
                                      (last_attempt && std::abs(*last_attempt - c.point) < 1e-9 * (1.0 + std::abs(c.point))));
        if (agrees) {
            ray.cert = c;
            ray.landing = TracedRay::Landing::Landed;
            ray.samples.push_back(c.point);
            ray.potentials.push_back(0.0);
        } else if (ray.landing == TracedRay::Landing::Landed) {
            ray.landing = TracedRay::Landing::Truncated;
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Angles

RayAngle::RayAngle(std::int64_t n, std::uint64_t d) {
    if (d == 0) throw Error(Err::InvalidArgument, "RayAngle: zero denominator");
    std::int64_t r = n % static_cast<std::int64_t>(d);
    if (r < 0) r += static_cast<std::int64_t>(d);
    std::uint64_t g = std::gcd(static_cast<std::uint64_t>(r), d);
    num = static_cast<std::uint64_t>(r) / g;
    den = d / g;
}

RayAngle RayAngle::times(std::uint64_t m) const {
    RayAngle r;
    r.num = mulmod(num, m, den);
    r.den = den;
    std::uint64_t g = std::gcd(r.num, r.den);
    r.num /= g;
    r.den /= g;
    return r;
}

RayAngle RayAngle::times_power(std::uint64_t m, int k) const {
    RayAngle r;
    r.num = mulmod(num, powmod(m, k, den), den);
    r.den = den;
    std::uint64_t g = std::gcd(r.num, r.den);
    r.num /= g;
    r.den /= g;
    return r;
}

int RayAngle::period(std::uint64_t m) const {
    if (den == 1) return 1;
    if (std::gcd(den, m) != 1) return 0;
    std::uint64_t x = m % den;
    int k = 1;
    while (x != 1) {
        x = mulmod(x, m, den);
        if (++k > (1 << 26)) throw Error(Err::InvalidArgument, "RayAngle: period too large");
    }
    return k;
}

std::vector<RayAngle> RayAngle::preimages(std::uint64_t m) const {
    std::vector<RayAngle> out;
    for (std::uint64_t k = 0; k < m; ++k)
        out.emplace_back(static_cast<std::int64_t>(num + k * den), den * m);
    return out;
}

std::string RayAngle::str() const { return std::to_string(num) + "/" + std::to_string(den); }

std::vector<RayAngle> angle_orbit(RayAngle t, std::uint64_t m) {
    std::vector<RayAngle> out;
    std::set<RayAngle> seen;
    while (seen.insert(t).second) {
        out.push_back(t);
        t = t.times(m);
    }
    return out;
}

std::vector<RayAngle> angle_double_orbit(RayAngle t) { return angle_orbit(t, 2); }

std::vector<RayAngle> periodic_angles(std::uint64_t m, int n) {
    std::uint64_t d = 1;
    for (int k = 0; k < n; ++k) d *= m;
    d -= 1;
    std::vector<RayAngle> out;
    for (std::uint64_t k = 0; k < d; ++k) {
        RayAngle t(static_cast<std::int64_t>(k), d);
        if (t.period(m) == n) out.push_back(t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Periodic points

LandingCertificate certify_periodic(const CubicParam& p, cplx z0, int m) {
    LandingCertificate c;
    c.period = m;
    cplx z = z0;
    bool conv = false;
    for (int it = 0; it < 80; ++it) {
        cplx d;
        cplx v = iterate_with_derivative(p, z, m, d);
        if (!finite(v) || !finite(d)) return c;
        cplx g = d - 1.0;
        if (g == 0.0) return c;
        cplx dz = (v - z) / g;
        double cap = 0.5 * (1.0 + std::abs(z));
        if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
        z -= dz;
        if (std::abs(dz) < 1e-15 * (1.0 + std::abs(z))) {
            conv = true;
            break;
        }
    }
    cplx d;
    cplx v = iterate_with_derivative(p, z, m, d);
    c.point = z;
    c.multiplier = d;
    c.residual = std::abs(v - z);
    c.certified = conv || c.residual < 1e-12 * (1.0 + std::abs(z));
    c.certified = c.certified && c.residual < 1e-10;
    const double mod = std::abs(d);
    c.parabolic_suspect = std::abs(mod - 1.0) <= kParabolicBand;
    c.repelling = mod > 1.0 + kParabolicBand;
    return c;
}

LandingCertificate landing_point(const CubicParam& p, const TracedRay& ray) {
    int m = 0;
    if (ray.kind == TracedRay::Kind::External) {
        m = ray.angle.period(3);
    } else {
        m = ray.cycle_period * ray.angle.period(static_cast<std::uint64_t>(ray.angle_factor));
    }
    if (m <= 0) throw Error(Err::InvalidArgument, "landing_point: angle is not periodic");
    if (ray.samples.empty()) throw Error(Err::InvalidArgument, "landing_point: empty ray");
    LandingCertificate c = ray.cert.certified ? ray.cert : certify_periodic(p, ray.samples.back(), m);
    if (!c.certified) throw Error(Err::NoConvergence, "landing_point: periodic Newton failed");
    if (c.parabolic_suspect)
        throw Error(Err::ParabolicSuspect, "landing point multiplier modulus " + std::to_string(std::abs(c.multiplier)));
    return c;
}

// ---------------------------------------------------------------------------
// Rays

TracedRay trace_external_ray(const CubicParam& p, RayAngle t, double min_level) {
    TracedRay ray;
    ray.kind = TracedRay::Kind::External;
    ray.angle = t;
    const double resc = escape_bound(p).radius;
    const double L0 = std::max(2.0, std::log(resc) + 1.0);
    const double big = std::log(1e5);
    auto solve = [&](double level, cplx guess, cplx& out) {
        int n = 0;
        double s = level;
        while (s < big) {
            s *= 3.0;
            ++n;
        }
        const RayAngle tn = t.times_power(3, n);
        const cplx target = inverse_bottcher_series(p, std::polar(std::exp(s), kTwoPi * tn.value()));
        if (!finite(guess)) guess = inverse_bottcher_series(p, std::polar(std::exp(level), kTwoPi * t.value()));
        return newton_preimage(p, n, target, guess, out);
    };
    descend_levels(ray, p, solve, L0, min_level, 4, t.period(3));
    return ray;
}

TracedRay trace_internal_ray(const BasinChart& chart, RayAngle t, double max_level) {
    if (max_level >= 0) throw Error(Err::InvalidArgument, "trace_internal_ray: max_level must be negative");
    TracedRay ray;
    ray.kind = TracedRay::Kind::Internal;
    ray.angle = t;
    ray.component = chart.index();
    ray.cycle_period = chart.period();
    ray.angle_factor = chart.degree();
    const CubicParam& p = chart.param();
    const int per = chart.period();
    const int deg = chart.degree();
    const cplx w = chart.center();
    const cplx A = chart.scale();
    // Radius in the d-coordinate where the truncated local series is accurate.
    double r = 1e-2;
    for (int it = 0; it < 40; ++it) {
        double worst = 0.0;
        for (int k = 0; k < 8; ++k) {
            cplx d = std::polar(r, kTwoPi * k / 8.0);
            worst = std::max(worst, std::abs(chart.local_series(d) / (A * d) - 1.0));
        }
        if (worst < 1e-4) break;
        r *= 0.5;
    }
    const double g0 = std::log(std::abs(A) * r);
    auto solve = [&](double level, cplx guess, cplx& out) {
        int n = 0;
        double s = level;
        while (s > g0) {
            s *= deg;
            ++n;
        }
        const RayAngle tn = t.times_power(static_cast<std::uint64_t>(deg), n);
        const cplx target = w + chart.local_inverse(std::polar(std::exp(s), kTwoPi * tn.value()));
        if (n == 0) {
            out = target;
            return true;
        }
        return newton_preimage(p, n * per, target, finite(guess) ? guess : target, out);
    };
    int per_t = t.period(static_cast<std::uint64_t>(deg));
    descend_levels(ray, p, solve, std::min(g0, -1.5), max_level, 4, per_t > 0 ? per * per_t : 0);
    return ray;
}

TracedRay trace_internal_ray(const CubicParam& p, int period, int component, RayAngle t, double max_level) {
    MarkedCycle cyc = critical_cycle(p, period);
    if (!exact_period(p, p.c, period)) throw Error(Err::OutsideSpStar, "c does not have the stated exact period");
    if (local_degree_on_cycle(p, cyc) > 3) throw Error(Err::OutsideSpStar, "-c lies on the critical cycle");
    if (component < 0 || component >= period) throw Error(Err::InvalidArgument, "trace_internal_ray: bad component");
    BasinChart chart(p, cyc, component);
    return trace_internal_ray(chart, t, max_level);
}

// ---------------------------------------------------------------------------
// Co-landing search

std::vector<RayAngle> colanding_external_angles(const CubicParam& p, const LandingCertificate& zeta, int period_bound) {
    if (!zeta.certified) throw Error(Err::InvalidArgument, "colanding_external_angles: uncertified point");
    const int base = exact_point_period(p, zeta.point, std::max(zeta.period, 1));
    const double tol = 1e-6 * (1.0 + std::abs(zeta.point));
    for (int M = base; M <= period_bound; M += base) {
        std::vector<RayAngle> cand;
        if (std::pow(3.0, M) <= 800.0) {
            cand = periodic_angles(3, M);
        } else {
            // Window the enumeration around angles seen on small circles about zeta.
            const std::uint64_t D = static_cast<std::uint64_t>(std::llround(std::pow(3.0, M))) - 1;
            std::set<RayAngle> pool;
            for (double rad : {1e-2, 3e-3, 1e-3}) {
                for (int k = 0; k < 96; ++k) {
                    cplx z = zeta.point + std::polar(rad * (1.0 + std::abs(zeta.point)), kTwoPi * k / 96.0);
                    double theta;
                    try {
                        theta = std::arg(bottcher_infinity(p, z)) / kTwoPi;
                    } catch (const Error&) {
                        continue;
                    }
                    if (theta < 0) theta += 1.0;
                    const double win = 2e-3;
                    auto lo = static_cast<std::int64_t>(std::floor((theta - win) * D));
                    auto hi = static_cast<std::int64_t>(std::ceil((theta + win) * D));
                    for (std::int64_t j = lo; j <= hi; ++j) {
                        RayAngle a(j, D);
                        if (a.period(3) == M) pool.insert(a);
                    }
                }
            }
            cand.assign(pool.begin(), pool.end());
        }
        std::vector<RayAngle> found;
        for (const RayAngle& a : cand) {
            TracedRay coarse;
            try {
                coarse = trace_external_ray(p, a, 1e-9);
            } catch (const Error&) {
                continue;
            }
            if (coarse.landing != TracedRay::Landing::Landed || !coarse.cert.certified) continue;
            if (std::abs(coarse.cert.point - zeta.point) > tol) continue;
            TracedRay fine = trace_external_ray(p, a, 1e-14);
            if (fine.cert.certified && std::abs(fine.cert.point - zeta.point) <= tol) found.push_back(a);
        }
        if (!found.empty()) return found;  // all rays at a repelling point share one period
    }
    return {};
}

std::optional<LandingCertificate> touching_point_check(const CubicParam& p, int period, int v1, int v2) {
    MarkedCycle cyc = critical_cycle(p, period);
    TracedRay r1 = trace_internal_ray(BasinChart(p, cyc, v1), RayAngle(0, 1));
    TracedRay r2 = trace_internal_ray(BasinChart(p, cyc, v2), RayAngle(0, 1));
    if (!r1.cert.certified || !r2.cert.certified) return std::nullopt;
    if (std::abs(r1.cert.point - r2.cert.point) > 1e-6) return std::nullopt;
    LandingCertificate q = certify_periodic(p, 0.5 * (r1.cert.point + r2.cert.point), period);
    if (!q.certified || std::abs(iterate_n(p, q.point, period) - q.point) > 1e-10) return std::nullopt;
    return q;
}

// ---------------------------------------------------------------------------

double segment_distance(cplx a, cplx b, cplx z) {
    cplx ab = b - a;
    double n2 = std::norm(ab);
    if (n2 == 0.0) return std::abs(z - a);
    double s = std::clamp(((z - a) * std::conj(ab)).real() / n2, 0.0, 1.0);
    return std::abs(z - (a + s * ab));
}

double polyline_distance(const std::vector<cplx>& poly, cplx z) {
    if (poly.empty()) return std::numeric_limits<double>::infinity();
    double best = std::abs(z - poly[0]);
    for (std::size_t i = 1; i < poly.size(); ++i) best = std::min(best, segment_distance(poly[i - 1], poly[i], z));
    return best;
}

}  // namespace cubic
