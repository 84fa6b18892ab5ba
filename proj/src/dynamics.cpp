#include "cubic/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cubic/mp.hpp"

namespace cubic {

const char* err_name(Err e) {
    switch (e) {
        case Err::AmbiguousPeriod: return "AmbiguousPeriod";
        case Err::NoConvergence: return "NoConvergence";
        case Err::WrongPeriod: return "WrongPeriod";
        case Err::NotInBasin: return "NotInBasin";
        case Err::OutsideDomain: return "OutsideDomain";
        case Err::OnCriticalOrbitRelation: return "OnCriticalOrbitRelation";
        case Err::DegenerateFiber: return "DegenerateFiber";
        case Err::BranchJump: return "BranchJump";
        case Err::StepUnderflow: return "StepUnderflow";
        case Err::NoTrapFound: return "NoTrapFound";
        case Err::ResolutionExhausted: return "ResolutionExhausted";
        case Err::RayBifurcates: return "RayBifurcates";
        case Err::OutsideSpStar: return "OutsideSpStar";
        case Err::ParabolicSuspect: return "ParabolicSuspect";
        case Err::GraphInvalid: return "GraphInvalid";
        case Err::ArrangementAmbiguous: return "ArrangementAmbiguous";
        case Err::SelectionFailed: return "SelectionFailed";
        case Err::OnGraph: return "OnGraph";
        case Err::NotHyperbolicABC: return "NotHyperbolicABC";
        case Err::NotTypeD: return "NotTypeD";
        case Err::ContinuationStall: return "ContinuationStall";
        case Err::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::vector<int> proper_divisors(int n) {
    std::vector<int> out;
    for (int k = 1; k < n; ++k)
        if (n % k == 0) out.push_back(k);
    return out;
}

cplx iterate_n(const CubicParam& p, cplx z, int n) {
    for (int i = 0; i < n; ++i) z = evaluate(p, z);
    return z;
}

EscapeBound escape_bound(const CubicParam& p) {
    return {std::sqrt(3.0 * std::norm(p.c) + std::abs(p.a) + 2.0)};
}

Orbit iterate(const CubicParam& p, cplx z, int budget, EscapeBound bound) {
    if (budget < 1) throw Error(Err::InvalidArgument, "iterate: budget must be >= 1");
    Orbit orb;
    orb.seed = z;
    constexpr int kMaxQ = 64;
    for (int n = 0; n <= budget; ++n) {
        orb.samples.push_back(z);
        double m = std::abs(z);
        if (m >= bound.radius) {
            orb.status = Orbit::Status::Escaped;
            orb.n = n;
            orb.escape_modulus = m;
            return orb;
        }
        const double tol = kTolCycle * std::max(1.0, m);
        for (int q = 1; q <= std::min(kMaxQ, n); ++q) {
            if (std::abs(z - orb.samples[n - q]) < tol) {
                try {
                    MarkedCycle cyc = find_cycle(p, z, q);
                    orb.status = Orbit::Status::ConvergedToCycle;
                    orb.n = n;
                    orb.cycle = cyc.points;
                    return orb;
                } catch (const Error&) {
                    // not a genuine cycle of this period; keep looking
                }
            }
        }
        if (n < budget) z = evaluate(p, z);
    }
    orb.status = Orbit::Status::BoundedAtBudget;
    orb.n = budget;
    return orb;
}

namespace {

template <class T>
std::vector<double> period_gaps(const CubicParam& p, cplx z0, int period) {
    using C = mp::Complex<T>;
    C c = C::from(p.c), a = C::from(p.a), z = C::from(z0), start = z;
    C c2 = c * c * T(3);
    std::vector<double> gaps;
    for (int k = 1; k <= period; ++k) {
        z = z * z * z - c2 * z + a;
        gaps.push_back(static_cast<double>((z - start).abs()));
    }
    return gaps;
}

enum class PeriodVerdict { Yes, No, Ambiguous };

PeriodVerdict judge(const std::vector<double>& gaps, double tol, double sep) {
    const int period = static_cast<int>(gaps.size());
    bool ambiguous = false;
    for (int k = 0; k < period; ++k)
        if (gaps[k] >= tol && gaps[k] <= sep) ambiguous = true;
    if (ambiguous) return PeriodVerdict::Ambiguous;
    if (gaps[period - 1] >= tol) return PeriodVerdict::No;
    for (int k = 0; k + 1 < period; ++k)
        if (gaps[k] <= sep) return PeriodVerdict::No;
    return PeriodVerdict::Yes;
}

}  // namespace

bool exact_period(const CubicParam& p, cplx z, int period, double delta_sep) {
    if (period < 1) throw Error(Err::InvalidArgument, "exact_period: period must be >= 1");
    auto v = judge(period_gaps<double>(p, z, period), kTolCycle, delta_sep);
    if (v == PeriodVerdict::Ambiguous) v = judge(period_gaps<mp::Real>(p, z, period), kTolCycle, delta_sep);
    if (v == PeriodVerdict::Ambiguous)
        throw Error(Err::AmbiguousPeriod, "orbit return distance lies between tol_cycle and delta_sep");
    return v == PeriodVerdict::Yes;
}

MarkedCycle find_cycle(const CubicParam& p, cplx seed, int period) {
    if (period < 1) throw Error(Err::InvalidArgument, "find_cycle: period must be >= 1");
    cplx z = seed;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        cplx w = z, d = 1.0;
        for (int k = 0; k < period; ++k) {
            d *= derivative(p, w);
            w = evaluate(p, w);
        }
        if (!std::isfinite(std::abs(w)) || std::abs(w) > 1e150) break;
        cplx step = (w - z) / (d - 1.0);
        if (!std::isfinite(std::abs(step))) break;
        z -= step;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) {
            converged = true;
            break;
        }
    }
    const double scale = std::max(1.0, std::abs(z));
    if (!converged) {
        if (!std::isfinite(std::abs(z)) || std::abs(iterate_n(p, z, period) - z) > 1e-12 * scale)
            throw Error(Err::NoConvergence, "find_cycle: Newton did not converge in 50 steps");
    }
    if (std::abs(iterate_n(p, z, period) - z) > 1e-12 * scale)
        throw Error(Err::NoConvergence, "find_cycle: residual above 1e-12");
    MarkedCycle cyc;
    cyc.period = period;
    cplx w = z, mult = 1.0;
    for (int k = 0; k < period; ++k) {
        cyc.points.push_back(w);
        mult *= derivative(p, w);
        w = evaluate(p, w);
    }
    cyc.multiplier = mult;
    for (int n : proper_divisors(period))
        if (period % n == 0 && std::abs(cyc.points[n] - cyc.points[0]) <= kDeltaSep)
            throw Error(Err::WrongPeriod, "find_cycle: point has a smaller period");
    return cyc;
}

MarkedCycle critical_cycle(const CubicParam& p, int period) {
    MarkedCycle cyc;
    cyc.period = period;
    cplx w = p.c, mult = 1.0;
    for (int k = 0; k < period; ++k) {
        cyc.points.push_back(w);
        mult *= derivative(p, w);
        w = evaluate(p, w);
    }
    cyc.multiplier = mult;
    return cyc;
}

GreenValue green_infinity(const CubicParam& p, cplx z, int budget) {
    GreenValue g;
    double scale = 1.0;
    for (int n = 0; n <= budget; ++n) {
        double m = std::abs(z);
        if (m > 1e100) {
            cplx w = 1.0 / z;
            cplx eps = -3.0 * p.c * p.c * w * w + p.a * w * w * w;
            g.value = scale * std::log(m) + scale / 3.0 * std::log(std::abs(1.0 + eps));
            g.iterations = n;
            return g;
        }
        if (n == budget) break;
        z = evaluate(p, z);
        scale /= 3.0;
    }
    g.bounded = true;
    g.iterations = budget;
    return g;
}

GreenGradient green_infinity_gradient(const CubicParam& p, cplx z, int budget) {
    GreenGradient out;
    cplx ratio = 1.0 / z;  // (f^n)'(z) / f^n(z)
    double scale = 1.0;
    for (int n = 0; n <= budget; ++n) {
        double m = std::abs(z);
        if (m > 1e100) {
            cplx w = 1.0 / z;
            cplx eps = -3.0 * p.c * p.c * w * w + p.a * w * w * w;
            out.value = scale * std::log(m) + scale / 3.0 * std::log(std::abs(1.0 + eps));
            out.grad = std::conj(scale * ratio);
            return out;
        }
        if (n == budget) break;
        cplx fz = evaluate(p, z);
        ratio *= z * derivative(p, z) / fz;
        z = fz;
        scale /= 3.0;
    }
    out.bounded = true;
    return out;
}

namespace {

// log B^infinity at a point far enough out that principal branches are continuous.
cplx log_bottcher_far(const CubicParam& p, cplx z) {
    cplx acc = std::log(z);
    double scale = 1.0 / 3.0;
    for (int k = 0; k < 200; ++k) {
        if (std::abs(z) > 1e100) break;
        cplx w = 1.0 / z;
        cplx eps = -3.0 * p.c * p.c * w * w + p.a * w * w * w;
        if (std::abs(eps) < 1e-18) break;
        acc += scale * std::log(1.0 + eps);
        z = evaluate(p, z);
        scale /= 3.0;
    }
    return acc;
}

double circ_dist(double x, double y) {
    double d = std::fmod(x - y, 1.0);
    if (d < 0) d += 1.0;
    return std::min(d, 1.0 - d);
}

double wrap01(double x) {
    x = std::fmod(x, 1.0);
    if (x < 0) x += 1.0;
    return x;
}

// Rough external angle (in turns) by integrating h' along a gradient ascent path.
double rough_external_angle(const CubicParam& p, cplx x, double r_far) {
    cplx acc = 0.0;
    for (int step = 0; step < 4000; ++step) {
        if (std::abs(x) >= r_far) {
            cplx lb = log_bottcher_far(p, x) - acc;
            return wrap01(lb.imag() / kTwoPi);
        }
        GreenGradient g0 = green_infinity_gradient(p, x);
        if (g0.bounded) throw Error(Err::OutsideDomain, "ascent path entered the filled Julia set");
        cplx hp0 = std::conj(g0.grad);
        double n2 = std::norm(hp0);
        if (n2 == 0.0) throw Error(Err::OutsideDomain, "ascent path hit a critical point");
        double dG = 0.15 * std::max(g0.value, 1e-300);
        cplx dz = dG * g0.grad / n2;
        double cap = 0.1 * std::max(std::abs(x), 1.0);
        if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
        cplx hpm = std::conj(green_infinity_gradient(p, x + 0.5 * dz).grad);
        cplx hp1 = std::conj(green_infinity_gradient(p, x + dz).grad);
        acc += dz / 6.0 * (hp0 + 4.0 * hpm + hp1);
        x += dz;
    }
    throw Error(Err::OutsideDomain, "ascent path did not reach the far region");
}

}  // namespace

cplx bottcher_infinity(const CubicParam& p, cplx z) {
    GreenValue g = green_infinity(p, z);
    if (g.bounded) throw Error(Err::OutsideDomain, "bottcher_infinity: point does not escape");
    double gcrit = 0.0;
    for (cplx cp : {p.c, -p.c}) {
        GreenValue gc = green_infinity(p, cp);
        if (!gc.bounded) gcrit = std::max(gcrit, gc.value);
    }
    if (g.value <= gcrit * (1.0 + 1e-9))
        throw Error(Err::OutsideDomain, "bottcher_infinity: below the critical equipotential");
    const double resc = escape_bound(p).radius;
    const double r_far = 1.5 * resc;
    const double r_big = std::max(2.0 * resc, 4.0);
    std::vector<cplx> orbit{z};
    while (std::abs(orbit.back()) < r_big) orbit.push_back(evaluate(p, orbit.back()));
    const int m = static_cast<int>(orbit.size()) - 1;
    double theta = wrap01(log_bottcher_far(p, orbit[m]).imag() / kTwoPi);
    for (int j = m - 1; j >= 0; --j) {
        double rough = std::abs(orbit[j]) >= r_far ? wrap01(log_bottcher_far(p, orbit[j]).imag() / kTwoPi)
                                                   : rough_external_angle(p, orbit[j], r_far);
        double best = 0.0, bestd = 2.0;
        for (int d = 0; d < 3; ++d) {
            double cand = (theta + d) / 3.0;
            double dd = circ_dist(cand, rough);
            if (dd < bestd) {
                bestd = dd;
                best = cand;
            }
        }
        theta = best;
    }
    return std::polar(std::exp(g.value), kTwoPi * theta);
}

// ---------------------------------------------------------------------------
// Superattracting basins

BasinChart::BasinChart(const CubicParam& p, const MarkedCycle& cycle, int index)
    : param_(p), cycle_(cycle), index_(index) {
    const int per = static_cast<int>(cycle_.points.size());
    if (per < 1 || index < 0 || index >= per) throw Error(Err::InvalidArgument, "BasinChart: bad cycle index");
    // The cycle is treated as exact: f(w_j) - w_{j+1} is rounding noise, and
    // feeding it into the shifted orbit would swamp d once |d|^2 nears 1e-16.
    // Taylor series of F(w + d) - w up to degree 5.
    constexpr int K = 6;
    using Series = std::array<cplx, K>;
    Series s{};
    s[1] = 1.0;
    auto mul = [](const Series& x, const Series& y) {
        Series r{};
        for (int i = 0; i < K; ++i)
            for (int j = 0; i + j < K; ++j) r[i + j] += x[i] * y[j];
        return r;
    };
    for (int t = 0; t < per; ++t) {
        int j = (index + t) % per;
        cplx w = cycle_.points[j];
        auto s2 = mul(s, s);
        auto s3 = mul(s2, s);
        Series n{};
        for (int i = 0; i < K; ++i) n[i] = derivative(p, w) * s[i] + 3.0 * w * s2[i] + s3[i];
        s = n;
    }
    double ref = 1.0;
    for (int i = 2; i < K; ++i) ref = std::max(ref, std::abs(s[i]));
    if (std::abs(s[2]) >= 1e-9 * ref) {
        degree_ = 2;
        A_ = s[2];
        b1_ = s[3] / (2.0 * A_);
        b2_ = ((s[4] + b1_ * A_ * A_) / A_ - b1_ * b1_) / 2.0;
    } else if (std::abs(s[3]) >= 1e-9 * ref) {
        degree_ = 3;
        A_ = std::sqrt(s[3]);
        b1_ = s[4] / (3.0 * s[3]);
        b2_ = (s[5] / s[3] - 3.0 * b1_ * b1_) / 3.0;
    } else {
        throw Error(Err::OnCriticalOrbitRelation, "local degree of the return map exceeds 3");
    }
}

cplx BasinChart::local_series(cplx d) const { return A_ * d * (1.0 + d * (b1_ + b2_ * d)); }

cplx BasinChart::local_inverse(cplx u) const {
    cplx x = u / A_;
    return x * (1.0 - b1_ * x + (2.0 * b1_ * b1_ - b2_) * x * x);
}

cplx BasinChart::step_delta(cplx delta, int j) const {
    cplx w = cycle_.points[j];
    return delta * (derivative(param_, w) + delta * (3.0 * w + delta));
}

bool BasinChart::small_u(cplx delta) const {
    return std::abs(A_ * delta) < 0.05 && std::abs(b1_ * delta) < 0.05 && std::abs(b2_ * delta * delta) < 0.01;
}

int BasinChart::phase(cplx z, int budget) const {
    const int per = period();
    const double resc = escape_bound(param_).radius;
    for (int t = 0; t <= budget; ++t) {
        if (std::abs(z) > resc) return -1;
        for (int j = 0; j < per; ++j) {
            if (std::abs(z - cycle_.points[j]) < 1e-9 * (1.0 + std::abs(cycle_.points[j]))) {
                int k = ((j - t) % per + per) % per;
                return k;
            }
        }
        z = evaluate(param_, z);
    }
    return -1;
}

double BasinChart::green(cplx z, int budget) const {
    return gradient(z, budget).value;
}

GreenGradient BasinChart::gradient(cplx z, int budget) const {
    const int per = period();
    if (phase(z, budget) != index_) throw Error(Err::NotInBasin, "point is not attracted to this cycle point");
    const cplx w = center();
    cplx deriv = 1.0;
    int n = 0;
    // Plain iteration until close to w at a multiple of the period.
    cplx x = z;
    while (!small_u(x - w)) {
        for (int t = 0; t < per; ++t) {
            deriv *= derivative(param_, x);
            x = evaluate(param_, x);
        }
        ++n;
        if (n > budget) throw Error(Err::NotInBasin, "no convergence within budget");
    }
    cplx d = x - w;
    while (std::abs(A_ * d) >= 1e-6 || std::abs(b1_ * d) >= 1e-6) {
        for (int t = 0; t < per; ++t) {
            int j = (index_ + t) % per;
            cplx wj = cycle_.points[j];
            deriv *= derivative(param_, wj) + 3.0 * d * (2.0 * wj + d);
            d = step_delta(d, j);
        }
        ++n;
        if (n > budget) throw Error(Err::NotInBasin, "no convergence within budget");
    }
    GreenGradient out;
    if (d == 0.0) {
        out.value = -std::numeric_limits<double>::infinity();
        return out;
    }
    const double scale = std::pow(static_cast<double>(degree_), -n);
    out.value = scale * std::log(std::abs(local_series(d)));
    cplx logder = 1.0 / d + (b1_ + 2.0 * b2_ * d) / (1.0 + d * (b1_ + b2_ * d));
    out.grad = std::conj(scale * logder * deriv);
    return out;
}

BasinChart::Descent BasinChart::descend(cplx z, int max_steps) const {
    Descent out;
    out.path.push_back(z);
    const cplx w = center();
    cplx x = z;
    for (int step = 0; step < max_steps; ++step) {
        if (small_u(x - w)) {
            out.reached_center = true;
            return out;
        }
        GreenGradient g0;
        try {
            g0 = gradient(x);
        } catch (const Error&) {
            out.stalled = true;
            return out;
        }
        if (g0.value < std::log(0.02)) {
            // deep in the basin but far from w: another preimage of w
            return out;
        }
        cplx hp0 = std::conj(g0.grad);
        double n2 = std::norm(hp0);
        if (n2 < 1e-300) {
            out.stalled = true;
            return out;
        }
        double dG = -0.15 * std::abs(g0.value);
        cplx dz = dG * g0.grad / n2;
        double cap = 0.25 * std::abs(x - w) + 1e-12;
        if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
        try {
            cplx hpm = std::conj(gradient(x + 0.5 * dz).grad);
            cplx hp1 = std::conj(gradient(x + dz).grad);
            out.log_b_increment += dz / 6.0 * (hp0 + 4.0 * hpm + hp1);
        } catch (const Error&) {
            out.stalled = true;
            return out;
        }
        x += dz;
        out.path.push_back(x);
    }
    out.stalled = true;
    return out;
}

cplx BasinChart::bottcher(cplx z, int budget) const {
    const int per = period();
    if (phase(z, budget) != index_) throw Error(Err::NotInBasin, "point is not attracted to this cycle point");
    const cplx w = center();
    if (z == w) return 0.0;
    // Orbit under F, sampled at multiples of the period.
    std::vector<cplx> ys{z - w};
    cplx x = z;
    while (!small_u(x - w)) {
        for (int t = 0; t < per; ++t) x = evaluate(param_, x);
        ys.push_back(x - w);
        if (static_cast<int>(ys.size()) > budget) throw Error(Err::NotInBasin, "no convergence within budget");
    }
    cplx d = x - w;
    while (std::abs(A_ * d) >= 1e-6 || std::abs(b1_ * d) >= 1e-6) {
        for (int t = 0; t < per; ++t) d = step_delta(d, (index_ + t) % per);
        ys.push_back(d);
        if (d == 0.0) break;
    }
    const int n = static_cast<int>(ys.size()) - 1;
    if (ys[n] == 0.0) {
        // z is a preimage of w under F within the component; only possible at w itself
        throw Error(Err::OutsideDomain, "orbit lands exactly on the cycle point");
    }
    cplx bn = local_series(ys[n]);
    double phi = wrap01(std::arg(bn) / kTwoPi);
    for (int j = n - 1; j >= 0; --j) {
        double rough;
        if (small_u(ys[j])) {
            rough = wrap01(std::arg(local_series(ys[j])) / kTwoPi);
        } else {
            Descent ds = descend(ys[j] + w);
            if (!ds.reached_center) throw Error(Err::OutsideDomain, "descent from the point does not reach the cycle point");
            cplx end = ds.path.back() - w;
            rough = wrap01((std::arg(local_series(end)) - ds.log_b_increment.imag()) / kTwoPi);
        }
        double best = phi, bestd = 2.0;
        for (int k = 0; k < degree_; ++k) {
            double cand = (phi + k) / degree_;
            double dd = circ_dist(cand, rough);
            if (dd < bestd) {
                bestd = dd;
                best = cand;
            }
        }
        phi = best;
    }
    const double g = std::pow(static_cast<double>(degree_), -n) * std::log(std::abs(bn));
    return std::polar(std::exp(g), kTwoPi * phi);
}

int local_degree_on_cycle(const CubicParam& p, const MarkedCycle& cycle) {
    if (std::abs(p.c) < kDeltaSep) return 3;
    for (const cplx& w : cycle.points)
        if (std::abs(w + p.c) < kDeltaSep) return 4;
    return 2;
}

double green_basin(const CubicParam& p, const MarkedCycle& cycle, cplx z) {
    BasinChart base(p, cycle, 0);
    int k = base.phase(z);
    if (k < 0) throw Error(Err::NotInBasin, "green_basin: point not attracted to the cycle");
    if (k == 0) return base.green(z);
    return BasinChart(p, cycle, k).green(z);
}

cplx bottcher_basin(const CubicParam& p, cplx w, cplx z, int period) {
    MarkedCycle cyc = find_cycle(p, w, period);
    if (local_degree_on_cycle(p, cyc) > 3)
        throw Error(Err::OnCriticalOrbitRelation, "bottcher_basin: both critical points meet the cycle");
    return BasinChart(p, cyc, 0).bottcher(z);
}

}  // namespace cubic
