#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cubic/dynamics.hpp"

namespace cubic {

struct OrbitClass {
    enum class Kind { Escape, TypeA, TypeB, TypeC, TypeD, Undecided };
    Kind kind = Kind::Undecided;
    int n = 0;       // Escape: first index with |f^n(-c)| >= R_esc
    int k = 0;       // TypeB: -c lies in U(f^k(c))
    int l = 0;       // TypeC: entry time
    int kappa = 0;   // TypeC: f^l(-c) lies in U(f^kappa(c))
    int q = 0;       // TypeD: period of the second attracting cycle
    cplx multiplier{0.0, 0.0};
    std::vector<cplx> cycle;  // TypeD cycle through the limit of orb(-c)
    int budget = 0;

    char code() const;
};

bool same_variant(const OrbitClass& x, const OrbitClass& y, double mult_tol = 1e-8);
std::string describe(const OrbitClass& v);

// Radius r of a disk about the cycle point w_j mapped by f^p into the r/2-disk
// (sampled on 64 boundary points, returned with a factor 2 margin).
double trap_radius(const CubicParam& p, const MarkedCycle& cycle);
double trap_radius_at(const CubicParam& p, const MarkedCycle& cycle, int j);

// Phase of a point with respect to the critical cycle, using trap disks:
// k such that f^{pn}(z) -> w_k, -1 for escape, -2 for undecided at budget.
class PhaseOracle {
public:
    PhaseOracle(const CubicParam& p, const MarkedCycle& cycle, double trap_scale = 1.0, int budget = 2000);
    int phase(cplx z) const;
    // Phase together with the first time the orbit enters a trap disk.
    int phase(cplx z, int& entry_time) const;
    const CubicParam& param() const { return param_; }
    const MarkedCycle& cycle() const { return cycle_; }
    double trap(int j) const { return traps_[j]; }
    double escape_radius() const { return resc_; }

private:
    CubicParam param_;
    MarkedCycle cycle_;
    std::vector<double> traps_;
    double resc_;
    int budget_;
};

struct MembershipGrid {
    cplx w;
    double h = 0.0;
    cplx origin;       // lower-left corner of the flood square
    int cells = 0;     // cells per side
    int refinements = 0;
    std::vector<std::pair<int, int>> region;  // cells joined to w's cell
    bool z_boundary_adjacent = false;
    bool via_descent = false;  // decided by a gradient-descent path instead of the flood
};

struct Membership {
    bool member = false;
    MembershipGrid grid;
};

// Same-component test: is z in the Fatou component of the critical cycle
// point w? Throws ResolutionExhausted when the answer stays at the
// grid resolution after 4 halvings of h.
Membership flood_membership(const CubicParam& p, int period, cplx w, cplx z, double h, bool use_descent = true);
Membership flood_membership(const PhaseOracle& oracle, int j, cplx z, double h, bool use_descent = true,
                            int max_refinements = 4);

struct ClassifyOptions {
    int budget = 2000;
    double trap_scale = 1.0;  // multiplies every trap radius
    double h = 0.0;           // flood resolution; 0 picks R_esc / 128
    bool use_descent = true;
    int max_refinements = 4;  // flood grid halvings before giving up (renders use fewer)
};

OrbitClass classify(const CubicParam& p, int period, const ClassifyOptions& opts = {});

}  // namespace cubic
