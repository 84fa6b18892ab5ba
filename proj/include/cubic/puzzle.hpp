#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cubic/dynamics.hpp"
#include "cubic/rays.hpp"

namespace cubic {

enum class Candidate { Both, G17, G37 };
const char* candidate_name(Candidate c);

struct GraphRay {
    TracedRay ray;      // samples restricted to X (potential <= 1, or >= -1 inside)
    int vertex = -1;    // index of the landing vertex
};

struct GraphVertex {
    LandingCertificate cert;
    std::vector<int> internal;  // indices into SupportGraph::internal
    std::vector<int> external;
};

struct SupportGraph {
    CubicParam param;
    int period = 1;
    Candidate candidate = Candidate::G17;
    MarkedCycle cycle;
    std::vector<RayAngle> internal_angles;
    std::vector<RayAngle> external_angles;
    std::vector<GraphRay> internal;  // every cycle component, every angle
    std::vector<GraphRay> external;
    std::vector<GraphVertex> vertices;
    double outer_level = 1.0;
    double inner_level = -1.0;

    // Label sets map into themselves: doubling (through the critical
    // component) or identity for internal angles, tripling for external ones.
    bool labels_forward_invariant() const;
    // Depth-0 piece count from Euler's formula for the arrangement.
    int euler_piece_count() const;
};

// Throws GraphInvalid ("HitsCriticalOrbit" or "ParabolicVertex") when the
// candidate cannot serve as a puzzle.
SupportGraph build_support_graph(const CubicParam& p, int period, Candidate candidate);

struct PieceLabel {
    enum class Kind { ExternalRay, InternalRay, OuterEquipotential, InnerEquipotential, Vertex };
    Kind kind = Kind::ExternalRay;
    RayAngle angle;
    int component = -1;  // cycle index, or -1 for a strictly preperiodic component
    int vertex = -1;
    int depth = 0;
    double level = 0.0;

    std::string str() const;
    auto operator<=>(const PieceLabel&) const = default;
};

struct BoundarySample {
    cplx z;
    PieceLabel label;
};

struct PuzzlePiece {
    int depth = 0;
    int id = -1;
    cplx rep{0.0, 0.0};  // a point of the piece, off the graph
    int image = -1;      // id of f(piece) at depth - 1
    int parent = -1;     // id of the depth - 1 piece containing this one
    bool critical = false;
    bool described = false;
    std::set<PieceLabel> labels;
    std::vector<BoundarySample> boundary;
};

using Path = std::vector<cplx>;

// Depth-0 pieces come from a raster of X minus thick walls around the traced
// arcs, checked against the Euler count; deeper pieces are never rasterized.
// Two points share a depth-n piece iff a path joining their f^n-images inside
// the depth-0 piece lifts back to a path joining them (with one extra loop
// around the critical value when the lift lands on the other sheet).
class Puzzle {
public:
    explicit Puzzle(SupportGraph graph, int resolution = 512);
    Puzzle(const Puzzle&) = delete;
    Puzzle& operator=(const Puzzle&) = delete;

    const SupportGraph& graph() const { return graph_; }
    const CubicParam& param() const { return graph_.param; }
    int resolution() const { return n_; }
    double pixel() const { return h_; }
    int region_count() const { return static_cast<int>(regions_.size()); }
    cplx critical_point() const { return cstar_; }  // -c nudged off the critical point

    // Depth-0 region of z, -1 outside X; throws OnGraph on an arc.
    int region_of(cplx z);
    int locate(cplx z, int depth);
    bool same_piece(cplx x, cplx y, int depth);
    std::optional<Path> piece_path(cplx x, cplx y, int depth);

    PuzzlePiece& piece(int depth, int id);
    // Fills labels and boundary samples of a piece.
    const PuzzlePiece& describe(int depth, int id);
    // All pieces of a depth, creating them from preimages of shallower ones.
    std::vector<int> enumerate(int depth);
    int vertex_id(cplx z);
    const std::vector<cplx>& vertex_points() const { return vertex_pts_; }

    // Raster access for rendering and tests: state 0 free, 1 wall, 2 outer, 3 inner.
    std::uint8_t state_at(int i, int k) const { return state_[idx(i, k)]; }
    int region_at(int i, int k) const { return region_[idx(i, k)]; }
    cplx center_of(int i, int k) const { return origin_ + cplx((i + 0.5) * h_, (k + 0.5) * h_); }

private:
    struct Region {
        int root = -1;
        int pixels = 0;
        std::vector<int> ring;  // ordered boundary pixels
        std::vector<BoundarySample> ring_proj;
        std::vector<double> ring_pot;  // potential of the projection on a ray
        std::vector<int> ring_ray;     // ray index, -1 for equipotentials and gaps
        bool ring_ready = false;
    };
    struct SegRef {
        int ray;
        int seg;
    };

    std::size_t idx(int i, int k) const { return static_cast<std::size_t>(k) * n_ + i; }
    const GraphRay& ray_at(int r) const;
    bool build(int n);
    void classify_pixels();
    void mark_walls();
    void label_regions();
    void build_trees();
    void build_ring(int r);
    bool in_x(cplx z) const;
    int anchor_pixel(cplx z);
    bool crosses_graph(cplx a, cplx b) const;
    double graph_distance(cplx z, int* ray = nullptr, cplx* foot = nullptr, double* pot = nullptr) const;
    Path raster_path(cplx x, cplx y);
    Path pixel_route(int from, int to) const;
    Path lift(const Path& path, cplx start, std::vector<std::size_t>* tags = nullptr) const;
    bool close_preimage(cplx e, cplx y) const;
    PieceLabel base_label(int ray) const;
    PieceLabel lift_label(const PieceLabel& base, cplx z, int depth);
    void describe_base(PuzzlePiece& pc);

    SupportGraph graph_;
    int n_internal_ = 0;
    std::vector<BasinChart> charts_;
    std::vector<double> inner_radius_;
    cplx cstar_;
    cplx vcrit_;
    cplx box_lo_, box_hi_;
    int n_ = 0;
    double h_ = 0.0;
    cplx origin_;
    std::vector<std::uint8_t> state_;
    std::vector<std::uint8_t> inner_of_;
    std::vector<int> region_;
    std::vector<int> parent_;
    std::vector<int> tree_depth_;
    std::vector<Region> regions_;
    double bucket_ = 0.0;
    int nb_ = 0;
    std::vector<std::vector<SegRef>> buckets_;
    std::vector<cplx> vertex_pts_;
    std::vector<std::vector<PuzzlePiece>> pieces_;
    std::map<std::tuple<double, double, double, double, int>, std::shared_ptr<const Path>> paths_;
    std::map<std::tuple<double, double, int>, int> located_;
};

// Label-disjointness test for Q inside P (Q deeper than P).
bool compact_containment(const PuzzlePiece& q, const PuzzlePiece& p);
// Geometric cross-check: minimum distance from the boundary samples of q to
// the boundary of p (exact arcs when p has depth 0, sampled polyline otherwise).
double boundary_distance(Puzzle& puzzle, const PuzzlePiece& q, const PuzzlePiece& p);

struct AdmissibleWitness {
    Candidate candidate = Candidate::Both;
    int orbit_index = 0;  // n0: the point f^n0(-c)
    int q_id = -1;        // depth-p piece
    int p_id = -1;        // depth-0 piece
    double distance = 0.0;
    std::vector<std::string> diagnostics;
    std::shared_ptr<Puzzle> puzzle;
};

AdmissibleWitness select_admissible(const CubicParam& p, int period, int orbit_budget = 24, int resolution = 512);

struct Tableau {
    cplx base;
    int depth = 0;
    int width = 0;
    std::vector<std::vector<int>> piece;  // piece[n][l] = id of P_n(f^l(base))
    std::vector<std::vector<bool>> critical;
    int at(int n, int l) const { return piece[n][l]; }
};

Tableau tableau_build(Puzzle& puzzle, cplx z, int depth, int width);

// Consistency re-check of a built tableau: vertical nesting and horizontal dynamics.
bool tableau_coherent(Puzzle& puzzle, const Tableau& t);

struct RuleReport {
    int checked = 0;
    int violations = 0;
};
// R1 with the column shift made explicit: P_{n,l}(z) = P_n(z') implies
// P_{i,l+j}(z) = P_{i,j}(z') for i + j <= n.
RuleReport check_rule_r1(const Tableau& z, const Tableau& zp);
// R2 for the single free critical point c* = -c.
RuleReport check_rule_r2(const Tableau& crit, const Tableau& z);

// k values for which P_{n+k}(c*) is a child of P_n(c*), within the tableau.
std::vector<int> children(const Tableau& crit, int n, int budget);

struct RecurrenceVerdict {
    enum class Kind { NonCritical, NonRecurrent, ReluctantlyRecurrent, PersistentlyRecurrent };
    Kind kind = Kind::NonRecurrent;
    int depth = 0;
    int budget = 0;
    int period = 0;     // > 0 when the tableau repeats with this period at this scale
    int row = -1;       // NonCritical: the row without critical positions
    std::string note;
};
const char* verdict_name(RecurrenceVerdict::Kind k);

RecurrenceVerdict recurrence_classify(Puzzle& puzzle, int depth, int budget);
RecurrenceVerdict recurrence_classify(const Tableau& crit);

}  // namespace cubic
