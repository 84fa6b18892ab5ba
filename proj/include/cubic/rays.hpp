#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cubic/dynamics.hpp"

namespace cubic {

// Rational angle num/den mod 1, always reduced.
struct RayAngle {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    RayAngle() = default;
    RayAngle(std::int64_t n, std::uint64_t d);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    RayAngle times(std::uint64_t m) const;  // m*t mod 1
    RayAngle times_power(std::uint64_t m, int k) const;  // m^k * t mod 1
    RayAngle doubled() const { return times(2); }
    RayAngle tripled() const { return times(3); }
    // Smallest k >= 1 with m^k t = t, or 0 when t is strictly preperiodic.
    int period(std::uint64_t m) const;
    std::vector<RayAngle> preimages(std::uint64_t m) const;
    std::string str() const;

    auto operator<=>(const RayAngle&) const = default;
};

// Orbit of t under doubling, stopping before the first repeat.
std::vector<RayAngle> angle_double_orbit(RayAngle t);
std::vector<RayAngle> angle_orbit(RayAngle t, std::uint64_t m);
// Angles k/(m^n - 1) of exact period n under t -> m t.
std::vector<RayAngle> periodic_angles(std::uint64_t m, int n);

struct LandingCertificate {
    bool certified = false;
    cplx point{0.0, 0.0};
    int period = 0;  // the periodicity equation used: f^period(z) = z
    cplx multiplier{0.0, 0.0};
    double residual = 0.0;
    bool repelling = false;
    bool parabolic_suspect = false;
};

inline constexpr double kParabolicBand = 1e-4;

struct TracedRay {
    enum class Kind { External, Internal };
    enum class Landing { Landed, Truncated };
    Kind kind = Kind::External;
    RayAngle angle;
    int component = -1;     // internal rays: index j of the cycle point w_j
    int cycle_period = 1;   // internal rays: p, the return time of the component
    int angle_factor = 3;   // 3 at infinity; the local degree (2, or 3 when c = 0) inside
    std::vector<cplx> samples;
    std::vector<double> potentials;  // G^inf (decreasing) or G^V (increasing to 0-)
    Landing landing = Landing::Truncated;
    double level = 0.0;     // potential of the last sample before landing
    LandingCertificate cert;
};

// External ray through levels 2^(k/4) from L0 >= log R_esc down to min_level.
TracedRay trace_external_ray(const CubicParam& p, RayAngle t, double min_level = 1e-12);

// Internal ray of the component of w_j in the critical cycle of period `period`,
// from deep inside the linearizing disk up to max_level < 0.
TracedRay trace_internal_ray(const BasinChart& chart, RayAngle t, double max_level = -1e-12);
TracedRay trace_internal_ray(const CubicParam& p, int period, int component, RayAngle t,
                             double max_level = -1e-12);

// Newton on f^m(z) = z from z0, with multiplier classification.
LandingCertificate certify_periodic(const CubicParam& p, cplx z0, int m);

// Certified landing point of a traced ray; throws ParabolicSuspect when the
// multiplier sits in the 1e-4 band around the unit circle.
LandingCertificate landing_point(const CubicParam& p, const TracedRay& ray);

// Periodic external angles whose rays land at zeta, with period a multiple of
// zeta's period and at most period_bound.
std::vector<RayAngle> colanding_external_angles(const CubicParam& p, const LandingCertificate& zeta,
                                                int period_bound);

// Common landing point of the 0-internal rays of components v1 and v2, if any.
std::optional<LandingCertificate> touching_point_check(const CubicParam& p, int period, int v1, int v2);

// Distance from z to a polyline.
double polyline_distance(const std::vector<cplx>& poly, cplx z);
double segment_distance(cplx a, cplx b, cplx z);

}  // namespace cubic
