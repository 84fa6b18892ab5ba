#pragma once

#include <cstdint>
#include <vector>

#include "cubic/dynamics.hpp"

namespace cubic {

// Degree of the projection S_p -> c, i.e. the number of a with c of exact period p.
std::int64_t curve_degree(int p);
std::int64_t euler_characteristic(int p);

struct CurveStats {
    int p = 0;
    std::int64_t d = 0;
    std::int64_t chi = 0;
};
CurveStats curve_stats(int p);

struct FiberRoot {
    cplx a;
    int exact_period = 0;
    double residual = 0.0;
};

struct FiberSolution {
    cplx c;
    int p = 0;
    std::vector<FiberRoot> roots;  // sorted by (exact_period, re a, im a)
};

// Coefficients of the monic polynomial a -> f^p(c) - c, lowest degree first.
// Built in 128-bit arithmetic for p > 5 and rounded to double on return.
std::vector<cplx> fiber_coefficients(cplx c, int p);

FiberSolution fiber_solve(cplx c, int p);

struct CurveResidual {
    cplx residual;
    double margin = 0.0;  // min |f^k(c) - c| over proper divisors k; +inf when p = 1
};
CurveResidual on_curve_residual(cplx c, cplx a, int p);

// Newton correction a -> a - P(a)/P'(a) for P(a) = f^p(c) - c, safe for huge |a|.
cplx fiber_newton_step(cplx c, cplx a, int p);

struct BranchSample {
    std::vector<CubicParam> path;
    int p = 0;
    int accepted_steps = 0;
    int halvings = 0;
    double min_step = 0.0;
};

// Follows the fiber root through seed along the polyline c_path (which starts
// at seed.c). Every root of the fiber is carried along so the followed root can
// be matched against its neighbours.
BranchSample branch_continue(const CubicParam& seed, int p, const std::vector<cplx>& c_path, double max_step);

// Single-root continuation from (c0, a0) to c1 with the same matching rule,
// without the full-fiber bookkeeping. Cheap enough for per-pixel use.
cplx branch_step(cplx c0, cplx a0, cplx c1, int p, double max_step);

}  // namespace cubic
