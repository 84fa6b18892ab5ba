#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cubic/classifier.hpp"
#include "cubic/dynamics.hpp"

namespace cubic {

enum class ComponentType { A, B, C, D };
char component_code(ComponentType t);

struct CenterSolution {
    CubicParam param;
    int p = 0;
    ComponentType type = ComponentType::D;
    int k = 0;      // A/B: f^k(c) = -c (k = 0 for A, where -c = c)
    int l = 0;      // C: f^l(-c) = f^kappa(c)
    int kappa = 0;
    int q = 0;      // D: f^q(-c) = -c
    double curve_residual = 0.0;
    double relation_residual = 0.0;
};

struct CenterSearchOptions {
    cplx lo{-1.5, -1.5};
    cplx hi{1.5, 1.5};
    int grid = 16;   // seeds per side
    int l_max = 3;   // Type C entry times
    int q_max = 3;   // Type D periods
};

std::vector<CenterSolution> center_search(int p, ComponentType type, const CenterSearchOptions& opts = {});

// Solves {f^p(c) - c, g(c, a)} = 0 by complex Newton with finite-difference
// partials (relative step 1e-7). Returns false when it does not converge.
template <class G>
bool newton_on_curve(int p, G&& g, cplx& c, cplx& a, double tol = 1e-12, int max_iter = 60) {
    auto F1 = [p](cplx cc, cplx aa) { return iterate_n({cc, aa}, cc, p) - cc; };
    for (int it = 0; it < max_iter; ++it) {
        const cplx f1 = F1(c, a), f2 = g(c, a);
        if (!std::isfinite(std::abs(f1)) || !std::isfinite(std::abs(f2))) return false;
        if (std::abs(f1) < tol && std::abs(f2) < tol) return true;
        const cplx hc = 1e-7 * (1.0 + std::abs(c)), ha = 1e-7 * (1.0 + std::abs(a));
        const cplx j11 = (F1(c + hc, a) - f1) / hc, j12 = (F1(c, a + ha) - f1) / ha;
        const cplx j21 = (g(c + hc, a) - f2) / hc, j22 = (g(c, a + ha) - f2) / ha;
        const cplx det = j11 * j22 - j12 * j21;
        if (det == 0.0) return false;
        cplx dc = (f1 * j22 - f2 * j12) / det;
        cplx da = (j11 * f2 - j21 * f1) / det;
        const double cap = 0.25 * (1.0 + std::abs(c));
        const double big = std::max(std::abs(dc), std::abs(da) / (1.0 + std::abs(a)) * (1.0 + std::abs(c)));
        if (big > cap) {
            dc *= cap / big;
            da *= cap / big;
        }
        c -= dc;
        a -= da;
    }
    const cplx f1 = F1(c, a), f2 = g(c, a);
    return std::abs(f1) < 1e3 * tol && std::abs(f2) < 1e3 * tol;
}


// Phi for Type A/B/C parameters (Bottcher coordinate of the relevant point).
cplx phi_eval(const CubicParam& param, int p, const OrbitClass& cls);
// Multiplier of the attracting cycle of -c; throws NotTypeD.
cplx rho_eval(const CubicParam& param, int p);

struct ComponentChart {
    CenterSolution center;
    int d_omega = 1;
    cplx lambda{1.0, 0.0};  // Phi^(1/d) ~ lambda (c - c0) near the center
    cplx origin;
    double h = 0.0;
    int n = 0;
    std::vector<std::uint8_t> inside;  // c-plane cells classified in the component
    std::vector<cplx> a_values;        // branch value at each inside cell

    // Phi (A/B/C) or rho (D) with the chart's fixed combinatorics.
    cplx value(const CubicParam& param, cplx* cycle_hint = nullptr) const;
    bool cell_inside(cplx c) const;
    // A c-plane cell near c that is inside, with its branch value.
    std::optional<CubicParam> nearest_inside(cplx c) const;
};

// Samples the component in the c-plane around the center (branch continuation
// from the center plus classification of every visited cell).
ComponentChart build_chart(const CenterSolution& center, int cells = 40);

int count_phi_preimages(const ComponentChart& chart, cplx w0);

struct ParamRaySample {
    enum class Status { Complete, Stalled };
    double t = 0.0;
    std::vector<double> s;
    std::vector<CubicParam> points;
    Status status = Status::Complete;
    double last_s = 0.0;
    cplx landing{0.0, 0.0};   // extrapolated c at s -> 1
    double error_bar = 0.0;
    double max_curve_residual = 0.0;
    double max_value_residual = 0.0;
};

// Continuation of {f^p(c) = c, Psi = s e^{2 pi i t}} in s; Psi is the d-th root
// of Phi (A/B), Phi (C) or rho (D).
ParamRaySample param_ray_trace(const ComponentChart& chart, double t, double s_from, double s_to, int steps);

struct BoundaryTrace {
    std::vector<CubicParam> polyline;  // closed: last sample continued back to theta = 2 pi
    double radius = 0.999;
    double closure_defect = 0.0;
    double diameter = 0.0;
    int winding = 0;
    std::vector<double> stall_angles;
    double max_rho_error = 0.0;
    bool simple = true;
};

BoundaryTrace boundary_trace_D(const ComponentChart& chart, int samples, double radius = 0.999);

struct SeparationRow {
    double t1 = 0.0, t2 = 0.0;
    double distance = 0.0;
    double error_sum = 0.0;
    bool pass = false;
};

struct SeparationTable {
    std::vector<ParamRaySample> rays;
    std::vector<SeparationRow> rows;
    bool pass = false;
    std::vector<std::string> diagnostics;
};

SeparationTable landing_separation_experiment(const ComponentChart& chart, const std::vector<double>& angles,
                                              double s_max);

// True when d * t has exact period 2 under doubling (a parabolic landing is expected).
bool parabolic_angle(const ComponentChart& chart, double t);

int winding_number(const std::vector<cplx>& loop, cplx z);

}  // namespace cubic
