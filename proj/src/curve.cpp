#include "cubic/curve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cubic/mp.hpp"

namespace cubic {

std::int64_t curve_degree(int p) {
    if (p < 1) throw Error(Err::InvalidArgument, "curve_degree: p must be >= 1");
    std::int64_t total = 1;
    for (int k = 1; k < p; ++k) total *= 3;
    for (int n : proper_divisors(p)) total -= curve_degree(n);
    return total;
}

std::int64_t euler_characteristic(int p) { return (2 - p) * curve_degree(p); }

CurveStats curve_stats(int p) { return {p, curve_degree(p), euler_characteristic(p)}; }

namespace {

template <class T>
using Poly = std::vector<mp::Complex<T>>;

template <class T>
Poly<T> poly_mul(const Poly<T>& x, const Poly<T>& y) {
    Poly<T> r(x.size() + y.size() - 1);
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i].re == 0 && x[i].im == 0) continue;
        for (size_t j = 0; j < y.size(); ++j) r[i + j] = r[i + j] + x[i] * y[j];
    }
    return r;
}

template <class T>
std::vector<cplx> coefficients_in(cplx c0, int p) {
    using C = mp::Complex<T>;
    C c = C::from(c0);
    C m3c2 = c * c * C{T(-3), T(0)};
    Poly<T> z{c};  // z_0 = c, constant in a
    for (int k = 0; k < p; ++k) {
        Poly<T> z2 = poly_mul(z, z);
        Poly<T> z3 = poly_mul(z2, z);
        Poly<T> next(z3.size());
        for (size_t i = 0; i < z3.size(); ++i) next[i] = z3[i];
        for (size_t i = 0; i < z.size(); ++i) next[i] = next[i] + z[i] * m3c2;
        if (next.size() < 2) next.resize(2);
        next[1] = next[1] + C{T(1), T(0)};
        z = std::move(next);
    }
    z[0] = z[0] - c;
    // z_p has degree 3^(p-1); z^3 of the linear z_1 pads nothing, but trim anyway
    while (z.size() > 1 && z.back().re == 0 && z.back().im == 0) z.pop_back();
    std::vector<cplx> out(z.size());
    for (size_t i = 0; i < z.size(); ++i) out[i] = z[i].to_double();
    return out;
}

struct Eval {
    cplx value, d1, d2;
};

// P(a) = f^p(c) - c and its first two a-derivatives in the nested orbit form.
Eval fiber_eval(cplx c, cplx a, int p) {
    const CubicParam par{c, a};
    cplx z = c, dz = 0.0, ddz = 0.0;
    for (int k = 0; k < p; ++k) {
        cplx fp = derivative(par, z);
        ddz = 6.0 * z * dz * dz + fp * ddz;
        dz = fp * dz + 1.0;
        z = evaluate(par, z);
    }
    return {z - c, dz, ddz};
}

mp::Complex<mp::Real> fiber_value_mp(cplx c0, const mp::Complex<mp::Real>& a, int p,
                                     mp::Complex<mp::Real>* deriv) {
    using C = mp::Complex<mp::Real>;
    C c = C::from(c0);
    C c2 = c * c;
    C z = c, dz{0, 0};
    for (int k = 0; k < p; ++k) {
        C fp = (z * z - c2) * mp::Real(3);
        dz = fp * dz + C{1, 0};
        z = z * z * z - c2 * z * mp::Real(3) + a;
    }
    if (deriv) *deriv = dz;
    return z - c;
}

// Upper bound for |a| over the fiber: the orbit of c stays in the escape disk,
// so |a - 2c^3| <= sqrt(3|c|^2 + |a| + 2).
double fiber_radius_bound(cplx c) {
    const double k = 3.0 * std::norm(c) + 2.0;
    const double m = 2.0 * std::pow(std::abs(c), 3);
    double x = m + std::sqrt(k + m) + 1.0;
    for (int i = 0; i < 60; ++i) x = m + std::sqrt(x + k);
    return x * 1.01;
}

int label_period(cplx c, cplx a, int p, double scale) {
    const CubicParam par{c, a};
    const double zero_tol = 1e-8 * scale;
    cplx z = c;
    std::vector<cplx> orbit{c};
    for (int k = 1; k <= p; ++k) {
        z = evaluate(par, z);
        orbit.push_back(z);
    }
    for (int n : proper_divisors(p)) {
        double gap = std::abs(orbit[n] - c);
        if (gap < zero_tol) return n;
        if (gap <= kDeltaSep) throw Error(Err::DegenerateFiber, "fiber root too close to a lower-period root");
    }
    return p;
}

}  // namespace

std::vector<cplx> fiber_coefficients(cplx c, int p) {
    if (p < 1) throw Error(Err::InvalidArgument, "fiber_coefficients: p must be >= 1");
    if (p <= 5) return coefficients_in<double>(c, p);
    return coefficients_in<mp::Real>(c, p);
}

cplx fiber_newton_step(cplx c, cplx a, int p) {
    const CubicParam par{c, a};
    cplx z = c, dz = 0.0;
    int k = 0;
    for (; k < p; ++k) {
        if (std::abs(z) > 1e30) break;
        dz = derivative(par, z) * dz + 1.0;
        z = evaluate(par, z);
    }
    if (k == p) return (z - c) / dz;
    // Far out: z -> z^3 dominates, so the ratio z/z' shrinks by 3 per step.
    cplx r = z / dz;
    const cplx iz = 1.0 / z;
    r = r * (1.0 - 3.0 * c * c * iz * iz + a * iz * iz * iz) / (3.0 * (1.0 - c * c * iz * iz) + r * iz * iz * iz);
    for (++k; k < p; ++k) r /= 3.0;
    return r;
}

FiberSolution fiber_solve(cplx c, int p) {
    if (p < 1 || p > 8) throw Error(Err::InvalidArgument, "fiber_solve: need 1 <= p <= 8");
    FiberSolution out;
    out.c = c;
    out.p = p;
    int n = 1;
    for (int k = 1; k < p; ++k) n *= 3;

    // Start radius from the Fujiwara bound of the monic coefficients, capped by
    // the dynamical bound.
    const std::vector<cplx> coef = fiber_coefficients(c, p);
    double fuj = 0.0;
    for (int k = 1; k <= n; ++k) {
        double m = std::abs(coef[n - k]);
        if (k == n) m /= 2.0;
        if (m > 0 && std::isfinite(m)) fuj = std::max(fuj, std::pow(m, 1.0 / k));
    }
    const double bound = std::min(2.0 * fuj, fiber_radius_bound(c));
    const double r0 = std::max(0.5 * bound, 1e-3);

    std::vector<cplx> roots(n);
    const cplx center = 2.0 * c * c * c;  // a - 2c^3 = f(c) is the natural variable
    for (int i = 0; i < n; ++i) roots[i] = center + std::polar(r0, kTwoPi * (i + 0.25) / n + 0.4);

    // Aberth-Ehrlich iteration, Gauss-Seidel updates.
    std::vector<bool> done(n, false);
    for (int sweep = 0; sweep < 2000; ++sweep) {
        bool all = true;
        for (int i = 0; i < n; ++i) {
            if (done[i]) continue;
            cplx ratio = fiber_newton_step(c, roots[i], p);
            cplx s = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) s += 1.0 / (roots[i] - roots[j]);
            cplx w = ratio / (1.0 - ratio * s);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) w = ratio;
            roots[i] -= w;
            if (std::abs(w) < 1e-14 * std::max(1.0, std::abs(roots[i])))
                done[i] = true;
            else
                all = false;
        }
        if (all) break;
    }

    // Newton polish, in 128-bit for large p where double evaluation loses digits.
    for (cplx& a : roots) {
        for (int it = 0; it < 8; ++it) {
            cplx step = fiber_newton_step(c, a, p);
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
            a -= step;
            if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(a))) break;
        }
        if (p > 5) {
            using C = mp::Complex<mp::Real>;
            C x = C::from(a), d;
            for (int it = 0; it < 4; ++it) {
                C v = fiber_value_mp(c, x, p, &d);
                x = x - v / d;
            }
            a = x.to_double();
        }
    }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(roots[i] - roots[j]) < kDeltaSep)
                throw Error(Err::DegenerateFiber, "fiber_solve: clustered roots");

    for (const cplx& a : roots) {
        FiberRoot r;
        r.a = a;
        r.residual = std::abs(fiber_eval(c, a, p).value);
        r.exact_period = label_period(c, a, p, std::max(1.0, std::abs(c)));
        out.roots.push_back(r);
    }
    std::sort(out.roots.begin(), out.roots.end(), [](const FiberRoot& x, const FiberRoot& y) {
        if (x.exact_period != y.exact_period) return x.exact_period < y.exact_period;
        if (x.a.real() != y.a.real()) return x.a.real() < y.a.real();
        return x.a.imag() < y.a.imag();
    });
    return out;
}

CurveResidual on_curve_residual(cplx c, cplx a, int p) {
    if (p < 1) throw Error(Err::InvalidArgument, "on_curve_residual: p must be >= 1");
    const CubicParam par{c, a};
    CurveResidual out;
    out.margin = std::numeric_limits<double>::infinity();
    std::vector<int> divs = proper_divisors(p);
    cplx z = c;
    for (int k = 1; k <= p; ++k) {
        z = evaluate(par, z);
        if (std::find(divs.begin(), divs.end(), k) != divs.end()) out.margin = std::min(out.margin, std::abs(z - c));
    }
    out.residual = z - c;
    return out;
}

namespace {

// dP/dc by a forward difference of the orbit form.
cplx dP_dc(cplx c, cplx a, int p) {
    const double h = 1e-7 * std::max(1.0, std::abs(c));
    return (fiber_eval(c + h, a, p).value - fiber_eval(c, a, p).value) / h;
}

cplx predict(cplx c0, cplx a0, cplx c1, int p) {
    Eval e = fiber_eval(c0, a0, p);
    return a0 - dP_dc(c0, a0, p) / e.d1 * (c1 - c0);
}

// Newton in a at fixed c; returns false if it does not settle.
bool correct(cplx c, cplx& a, int p) {
    for (int it = 0; it < 12; ++it) {
        cplx step = fiber_newton_step(c, a, p);
        if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) return false;
        a -= step;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(a))) break;
    }
    return std::abs(fiber_eval(c, a, p).value) < 1e-10;
}

// Aberth sweeps from a warm start; all roots move together.
bool refit_fiber(cplx c, std::vector<cplx>& roots, int p) {
    const int n = static_cast<int>(roots.size());
    for (int sweep = 0; sweep < 200; ++sweep) {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            cplx ratio = fiber_newton_step(c, roots[i], p);
            cplx s = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) s += 1.0 / (roots[i] - roots[j]);
            cplx w = ratio / (1.0 - ratio * s);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) return false;
            roots[i] -= w;
            worst = std::max(worst, std::abs(w) / std::max(1.0, std::abs(roots[i])));
        }
        if (worst < 1e-14) return true;
    }
    return false;
}

}  // namespace

BranchSample branch_continue(const CubicParam& seed, int p, const std::vector<cplx>& c_path, double max_step) {
    if (max_step <= 0) throw Error(Err::InvalidArgument, "branch_continue: max_step must be positive");
    if (std::abs(on_curve_residual(seed.c, seed.a, p).residual) >= 1e-10)
        throw Error(Err::InvalidArgument, "branch_continue: seed is not on the curve");
    BranchSample out;
    out.p = p;
    out.min_step = max_step;
    out.path.push_back(seed);

    FiberSolution fib = fiber_solve(seed.c, p);
    std::vector<cplx> roots;
    int tracked = -1;
    double best = 1e300;
    for (size_t i = 0; i < fib.roots.size(); ++i) {
        roots.push_back(fib.roots[i].a);
        double d = std::abs(fib.roots[i].a - seed.a);
        if (d < best) {
            best = d;
            tracked = static_cast<int>(i);
        }
    }
    cplx c = seed.c;
    const double floor_step = 1e-10 * max_step;
    size_t target_idx = c_path.empty() ? 0 : 1;
    if (!c_path.empty() && std::abs(c_path.front() - seed.c) > 1e-12) target_idx = 0;
    for (; target_idx < c_path.size(); ++target_idx) {
        const cplx target = c_path[target_idx];
        double h = max_step;
        while (std::abs(target - c) > 0) {
            double dist = std::abs(target - c);
            cplx c1 = dist <= h ? target : c + (target - c) * (h / dist);
            std::vector<cplx> trial(roots.size());
            for (size_t i = 0; i < roots.size(); ++i) trial[i] = predict(c, roots[i], c1, p);
            cplx predicted = trial[tracked];
            bool ok = refit_fiber(c1, trial, p);
            if (ok) {
                // nearest root to the prediction must be the tracked one, by a factor 2
                double d_own = std::abs(trial[tracked] - predicted), d_other = 1e300;
                for (size_t i = 0; i < trial.size(); ++i)
                    if (static_cast<int>(i) != tracked) d_other = std::min(d_other, std::abs(trial[i] - predicted));
                if (2.0 * d_own >= d_other) ok = false;
                for (size_t i = 0; ok && i < trial.size(); ++i)
                    for (size_t j = i + 1; j < trial.size(); ++j)
                        if (std::abs(trial[i] - trial[j]) < kDeltaSep) ok = false;
            }
            if (ok) ok = correct(c1, trial[tracked], p);
            if (!ok) {
                h /= 2.0;
                ++out.halvings;
                if (h < floor_step) throw Error(Err::StepUnderflow, "branch_continue: step underflow near a fiber discriminant point");
                continue;
            }
            roots = std::move(trial);
            c = c1;
            out.path.push_back({c, roots[tracked]});
            ++out.accepted_steps;
            out.min_step = std::min(out.min_step, h);
            h = std::min(max_step, 2.0 * h);
        }
    }
    return out;
}

cplx branch_step(cplx c0, cplx a0, cplx c1, int p, double max_step) {
    cplx c = c0, a = a0;
    double h = max_step;
    const double floor_step = 1e-10 * max_step;
    while (std::abs(c1 - c) > 0) {
        double dist = std::abs(c1 - c);
        cplx cn = dist <= h ? c1 : c + (c1 - c) * (h / dist);
        cplx pred = predict(c, a, cn, p);
        cplx an = pred;
        bool ok = correct(cn, an, p);
        if (ok) {
            // Distance to the neighbouring roots estimated from |P''/2P'|: the
            // corrector must stay well inside that radius.
            Eval e = fiber_eval(cn, an, p);
            double gamma = std::abs(e.d2 / (2.0 * e.d1));
            if (2.0 * std::abs(an - pred) * gamma >= 0.5) ok = false;
        }
        if (!ok) {
            h /= 2.0;
            if (h < floor_step) throw Error(Err::StepUnderflow, "branch_step: step underflow");
            continue;
        }
        c = cn;
        a = an;
        h = std::min(max_step, 2.0 * h);
    }
    return a;
}

}  // namespace cubic
