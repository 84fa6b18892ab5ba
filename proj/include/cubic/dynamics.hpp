#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "cubic/error.hpp"

namespace cubic {

using cplx = std::complex<double>;

inline constexpr double kTolCycle = 1e-10;
inline constexpr double kDeltaSep = 1e-6;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// f(z) = z^3 - 3c^2 z + a with marked critical point c.
struct CubicParam {
    cplx c{0.0, 0.0};
    cplx a{0.0, 0.0};
};

inline CubicParam negate(const CubicParam& p) { return {-p.c, -p.a}; }

inline cplx evaluate(const CubicParam& p, cplx z) { return z * z * z - 3.0 * p.c * p.c * z + p.a; }
inline cplx derivative(const CubicParam& p, cplx z) { return 3.0 * z * z - 3.0 * p.c * p.c; }

cplx iterate_n(const CubicParam& p, cplx z, int n);

struct EscapeBound {
    double radius = 0.0;
};

EscapeBound escape_bound(const CubicParam& p);

struct Orbit {
    enum class Status { BoundedAtBudget, Escaped, ConvergedToCycle };
    cplx seed;
    std::vector<cplx> samples;
    Status status = Status::BoundedAtBudget;
    int n = 0;                  // budget, escape index, or index at which convergence was seen
    double escape_modulus = 0.0;
    std::vector<cplx> cycle;    // refined cycle when converged
};

Orbit iterate(const CubicParam& p, cplx z, int budget, EscapeBound bound);

// True iff z has exact period p. Retries in 128-bit arithmetic before
// throwing AmbiguousPeriod.
bool exact_period(const CubicParam& p, cplx z, int period, double delta_sep = kDeltaSep);

struct MarkedCycle {
    std::vector<cplx> points;
    int period = 0;
    cplx multiplier{0.0, 0.0};
};

MarkedCycle find_cycle(const CubicParam& p, cplx seed, int period);

// The critical cycle through c, built by direct iteration (no Newton).
MarkedCycle critical_cycle(const CubicParam& p, int period);

struct GreenValue {
    double value = 0.0;
    bool bounded = false;
    int iterations = 0;
};

GreenValue green_infinity(const CubicParam& p, cplx z, int budget = 4000);

cplx bottcher_infinity(const CubicParam& p, cplx z);

// Gradient of G^infinity as a complex number, together with G.
struct GreenGradient {
    double value = 0.0;
    cplx grad{0.0, 0.0};
    bool bounded = false;
};
GreenGradient green_infinity_gradient(const CubicParam& p, cplx z, int budget = 4000);

// Bottcher machinery for the first return map F = f^p near one point w of a
// superattracting cycle. F(w + d) = w + a_k d^k + ..., with local degree k = 2,
// or k = 3 on the unicritical slice c = 0.
class BasinChart {
public:
    BasinChart(const CubicParam& p, const MarkedCycle& cycle, int index);

    const CubicParam& param() const { return param_; }
    int period() const { return static_cast<int>(cycle_.points.size()); }
    int index() const { return index_; }
    cplx center() const { return cycle_.points[index_]; }
    cplx scale() const { return A_; }
    int degree() const { return degree_; }
    const MarkedCycle& cycle() const { return cycle_; }

    // Phase of z: the index k with f^{pn}(z) -> w_k, or -1 if not attracted within budget.
    int phase(cplx z, int budget = 4000) const;

    // Returns G^V(z); throws NotInBasin if z is not attracted to this cycle point.
    double green(cplx z, int budget = 4000) const;

    // Holomorphic log-derivative h'(z) with G = Re h, plus G itself.
    GreenGradient gradient(cplx z, int budget = 4000) const;

    cplx bottcher(cplx z, int budget = 4000) const;

    // Approximate inverse of B near w (|u| small).
    cplx local_inverse(cplx u) const;

    // Steepest-descent path from z; returns the endpoint reached.
    struct Descent {
        bool reached_center = false;
        bool stalled = false;
        std::vector<cplx> path;
        cplx log_b_increment{0.0, 0.0};  // integral of h' from start to end
    };
    Descent descend(cplx z, int max_steps = 4000) const;

    // Local series B(w + d) ~ A d (1 + b1 d + b2 d^2), A^(k-1) = a_k.
    cplx local_series(cplx d) const;

private:
    // Shifted orbit: advances delta = z - w_j one step of f along the cycle.
    cplx step_delta(cplx delta, int j) const;
    bool small_u(cplx delta) const;

    CubicParam param_;
    MarkedCycle cycle_;
    int index_ = 0;
    int degree_ = 2;
    cplx A_, b1_, b2_;
};

double green_basin(const CubicParam& p, const MarkedCycle& cycle, cplx z);
cplx bottcher_basin(const CubicParam& p, cplx w, cplx z, int period);

// Local degree of f^p on the critical cycle: 2 normally, 3 when c = 0,
// 4 when -c lands on the cycle.
int local_degree_on_cycle(const CubicParam& p, const MarkedCycle& cycle);

std::vector<int> proper_divisors(int n);

}  // namespace cubic
