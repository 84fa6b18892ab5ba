// atlas: command-line front end for the cubic library.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "cache.hpp"
#include "cubic/classifier.hpp"
#include "cubic/curve.hpp"
#include "cubic/paramspace.hpp"
#include "cubic/puzzle.hpp"
#include "cubic/rays.hpp"
#include "format.hpp"
#include "render.hpp"

using namespace cubic;
using atlas::num;
using atlas::str;
using atlas::Tsv;

namespace {

enum Exit { kOk = 0, kValidation = 2, kNumerical = 3 };

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code(Err e) {
    switch (e) {
        case Err::InvalidArgument:
        case Err::OutsideSpStar:
        case Err::WrongPeriod:
        case Err::OutsideDomain:
        case Err::NotHyperbolicABC:
        case Err::NotTypeD: return kValidation;
        default: return kNumerical;
    }
}

struct Options {
    int p = 1;
    std::string center = "0,0";
    double width = 3.0;
    std::string pixels = "256";
    int budget = 500;
    int workers = 1;
    std::string seed_branch;
    std::string out;
    std::string cache_dir;
    std::vector<std::string> overlay;
    // positionals
    std::string c = "0", a = "0";
    std::vector<std::string> items;
    std::string type;
};

void parse_pixels(const std::string& s, int& w, int& h) {
    const auto x = s.find('x');
    try {
        if (x == std::string::npos) {
            w = h = std::stoi(s);
        } else {
            w = std::stoi(s.substr(0, x));
            h = std::stoi(s.substr(x + 1));
        }
    } catch (const std::exception&) {
        throw ValidationError("--pixels: expected N or WxH, got '" + s + "'");
    }
    if (w < 1 || h < 1 || w > 16384 || h > 16384) throw ValidationError("--pixels out of range");
}

cplx complex_arg(const std::string& s, const char* what) {
    try {
        return atlas::parse_complex(s);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

CubicParam param_arg(const Options& o) { return {complex_arg(o.c, "c"), complex_arg(o.a, "a")}; }

void require_on_curve(const CubicParam& q, int p) {
    const double r = std::abs(on_curve_residual(q.c, q.a, p).residual);
    if (r > 1e-10) throw ValidationError("(c, a) is not on S_" + std::to_string(p) + " (residual " + num(r) + ")");
}

// Output goes to --out when given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw ValidationError("cannot open " + path);
        }
    }
    std::ostream& get() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

// ---------------------------------------------------------------------------

int cmd_curve_stats(const Options& o) {
    if (o.p < 1 || o.p > 40) throw ValidationError("--p must be in [1, 40]");
    Sink sink(o.out);
    Tsv tsv(sink.get(), {"p", "degree", "euler_characteristic"});
    for (int p = 1; p <= o.p; ++p) {
        const CurveStats s = curve_stats(p);
        std::int64_t sum = 0, pow3 = 1;
        for (int n = 1; n <= p; ++n)
            if (p % n == 0) sum += curve_degree(n);
        for (int k = 1; k < p; ++k) pow3 *= 3;
        if (sum != pow3 || s.chi != (2 - p) * s.d) throw NumericalError("curve statistics fail the recursion check");
        tsv.row(p, static_cast<long long>(s.d), static_cast<long long>(s.chi));
    }
    return kOk;
}

int cmd_fiber(const Options& o) {
    const cplx c = complex_arg(o.c, "c");
    const FiberSolution f = fiber_solve(c, o.p);
    Sink sink(o.out);
    Tsv tsv(sink.get(), {"index", "a_re", "a_im", "exact_period", "residual"});
    int i = 0;
    for (const auto& r : f.roots) tsv.row(i++, r.a.real(), r.a.imag(), r.exact_period, r.residual);
    return kOk;
}

int cmd_classify(const Options& o) {
    const CubicParam q = param_arg(o);
    require_on_curve(q, o.p);
    if (!exact_period(q, q.c, o.p)) throw ValidationError("c does not have exact period " + std::to_string(o.p));
    ClassifyOptions opts;
    opts.budget = o.budget;
    const OrbitClass cls = classify(q, o.p, opts);
    Sink sink(o.out);
    sink.get() << describe(cls) << '\n';
    return cls.kind == OrbitClass::Kind::Undecided ? kNumerical : kOk;
}

CubicParam seed_of(const Options& o, cplx center) {
    if (!o.seed_branch.empty()) {
        const auto colon = o.seed_branch.find(':');
        if (colon == std::string::npos) return {center, complex_arg(o.seed_branch, "--seed-branch")};
        return {complex_arg(o.seed_branch.substr(0, colon), "--seed-branch"),
                complex_arg(o.seed_branch.substr(colon + 1), "--seed-branch")};
    }
    if (o.p == 1) return {center, center + 2.0 * center * center * center};
    const FiberSolution f = fiber_solve(center, o.p);
    for (const auto& r : f.roots)
        if (r.exact_period == o.p) return {center, r.a};
    throw ValidationError("no exact-period root over the center; pass --seed-branch");
}

int cmd_render_param(const Options& o) {
    atlas::RenderJob job;
    job.mode = atlas::RenderJob::Mode::Parameter;
    job.center = complex_arg(o.center, "--center");
    job.width = o.width;
    parse_pixels(o.pixels, job.pixels_x, job.pixels_y);
    job.p = o.p;
    job.budget = o.budget;
    job.workers = o.workers;
    job.seed = seed_of(o, job.center);
    require_on_curve(job.seed, job.p);
    if (!(job.width > 0)) throw ValidationError("--width must be positive");

    const atlas::Cache cache(atlas::Cache::resolve_dir(o.cache_dir));
    const std::string key = atlas::Cache::key("render-param", job.canonical());
    atlas::ImageGrid grid;
    bool hit = false;
    if (auto payload = cache.get(key)) {
        try {
            grid = atlas::ImageGrid::deserialize(*payload);
            hit = grid.width == job.pixels_x && grid.height == job.pixels_y;
        } catch (const std::exception&) {
        }
    }
    if (!hit) {
        grid = atlas::render(job);
        try {
            cache.put(key, "render-param", grid.serialize());
        } catch (const std::exception& e) {
            std::cerr << "warning: cache write failed: " << e.what() << '\n';
        }
    }
    const std::string out = o.out.empty() ? "param.ppm" : o.out;
    std::ofstream img(out, std::ios::binary);
    if (!img) throw ValidationError("cannot open " + out);
    atlas::write_ppm(img, grid.width, grid.height, atlas::colorize(grid));
    std::ofstream legend(out + ".legend.tsv");
    atlas::write_legend(legend, grid);
    std::cerr << (hit ? "cache hit " : "cache miss ") << key << '\n';
    long undecided = 0;
    for (char ch : grid.code) undecided += ch == 'U' || ch == 'J';
    std::cout << out << "\t" << grid.width << "x" << grid.height << "\tundecided=" << undecided << '\n';
    return kOk;
}

// Overlay specs: ext:T, int:T (component 0) or intJ:T, graph:G17|G37|BOTH, puzzle:N.
void draw_overlay(const std::string& spec, const atlas::RenderJob& job, std::vector<atlas::Rgb>& img) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ValidationError("overlay '" + spec + "': expected kind:value");
    const std::string kind = spec.substr(0, colon), value = spec.substr(colon + 1);
    const atlas::Rgb white{255, 255, 255}, black{0, 0, 0};
    if (kind == "ext") {
        atlas::draw_polyline(img, job, trace_external_ray(job.param, atlas::parse_angle(value)).samples, white);
    } else if (kind.rfind("int", 0) == 0) {
        const int comp = kind.size() > 3 ? std::stoi(kind.substr(3)) : 0;
        atlas::draw_polyline(img, job, trace_internal_ray(job.param, job.p, comp, atlas::parse_angle(value)).samples,
                             black);
    } else if (kind == "graph" || kind == "puzzle") {
        Candidate cand = Candidate::G17;
        int depth = 0;
        if (kind == "graph") {
            if (value == "G37") cand = Candidate::G37;
            else if (value == "BOTH") cand = Candidate::Both;
            else if (value != "G17") throw ValidationError("overlay graph: expected G17, G37 or BOTH");
        } else {
            depth = std::stoi(value);
            if (depth < 0 || depth > 2 * job.p) throw ValidationError("overlay puzzle: depth must be in [0, 2p]");
        }
        SupportGraph g = build_support_graph(job.param, job.p, cand);
        for (const auto& r : g.internal) atlas::draw_polyline(img, job, r.ray.samples, black);
        for (const auto& r : g.external) atlas::draw_polyline(img, job, r.ray.samples, white);
        if (kind == "puzzle" && depth > 0) {
            Puzzle pz(std::move(g));
            for (int id : pz.enumerate(depth)) {
                std::vector<cplx> pts;
                for (const auto& b : pz.describe(depth, id).boundary) pts.push_back(b.z);
                for (cplx z : pts) atlas::draw_polyline(img, job, {z}, atlas::Rgb{255, 255, 0});
            }
        }
    } else {
        throw ValidationError("unknown overlay kind '" + kind + "'");
    }
}

int cmd_render_dyn(const Options& o) {
    atlas::RenderJob job;
    job.mode = atlas::RenderJob::Mode::Dynamical;
    job.param = param_arg(o);
    job.center = complex_arg(o.center, "--center");
    job.width = o.width;
    parse_pixels(o.pixels, job.pixels_x, job.pixels_y);
    job.p = o.p;
    job.budget = o.budget;
    job.workers = o.workers;
    if (!(job.width > 0)) throw ValidationError("--width must be positive");
    const atlas::ImageGrid grid = atlas::render(job);
    auto img = atlas::colorize(grid);
    for (const auto& spec : o.overlay) {
        try {
            draw_overlay(spec, job, img);
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            std::cerr << "warning: overlay " << spec << " skipped: " << e.what() << '\n';
        }
    }
    const std::string out = o.out.empty() ? "dyn.ppm" : o.out;
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ValidationError("cannot open " + out);
    atlas::write_ppm(f, grid.width, grid.height, img);
    std::ofstream legend(out + ".legend.tsv");
    atlas::write_legend(legend, grid);
    std::cout << out << "\t" << grid.width << "x" << grid.height << '\n';
    return kOk;
}

std::string serialize_ray(const TracedRay& r) {
    std::ostringstream s;
    s << "ray\t" << (r.kind == TracedRay::Kind::External ? 'E' : 'I') << '\t' << r.angle.num << '\t' << r.angle.den
      << '\t' << r.component << '\t' << r.cycle_period << '\t' << r.angle_factor << '\t'
      << (r.landing == TracedRay::Landing::Landed ? 1 : 0) << '\t' << num(r.level) << '\t' << r.samples.size() << '\n';
    const auto& c = r.cert;
    s << "cert\t" << c.certified << '\t' << num(c.point.real()) << '\t' << num(c.point.imag()) << '\t' << c.period
      << '\t' << num(c.multiplier.real()) << '\t' << num(c.multiplier.imag()) << '\t' << num(c.residual) << '\t'
      << c.repelling << '\t' << c.parabolic_suspect << '\n';
    for (std::size_t i = 0; i < r.samples.size(); ++i)
        s << num(r.potentials[i]) << '\t' << num(r.samples[i].real()) << '\t' << num(r.samples[i].imag()) << '\n';
    return s.str();
}

TracedRay deserialize_ray(const std::string& text) {
    std::istringstream s(text);
    std::string tag, level;
    char kind = 0;
    int landed = 0;
    std::size_t n = 0;
    TracedRay r;
    if (!(s >> tag >> kind >> r.angle.num >> r.angle.den >> r.component >> r.cycle_period >> r.angle_factor >> landed >>
          level >> n) ||
        tag != "ray")
        throw std::runtime_error("cached ray: bad header");
    r.kind = kind == 'E' ? TracedRay::Kind::External : TracedRay::Kind::Internal;
    r.landing = landed ? TracedRay::Landing::Landed : TracedRay::Landing::Truncated;
    r.level = std::stod(level);
    std::string f[7];
    auto& c = r.cert;
    if (!(s >> tag >> c.certified >> f[0] >> f[1] >> c.period >> f[2] >> f[3] >> f[4] >> c.repelling >>
          c.parabolic_suspect) ||
        tag != "cert")
        throw std::runtime_error("cached ray: bad certificate");
    c.point = {std::stod(f[0]), std::stod(f[1])};
    c.multiplier = {std::stod(f[2]), std::stod(f[3])};
    c.residual = std::stod(f[4]);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(s >> f[0] >> f[1] >> f[2])) throw std::runtime_error("cached ray: truncated");
        r.potentials.push_back(std::stod(f[0]));
        r.samples.emplace_back(std::stod(f[1]), std::stod(f[2]));
    }
    return r;
}

// "1/7" or "ext:1/7" external; "int:1/7" or "intJ:1/7" internal.
TracedRay traced(const CubicParam& q, int p, const std::string& spec, const atlas::Cache& cache, bool& hit) {
    const auto colon = spec.find(':');
    const std::string kind = colon == std::string::npos ? "ext" : spec.substr(0, colon);
    const RayAngle t = atlas::parse_angle(colon == std::string::npos ? spec : spec.substr(colon + 1));
    int comp = -1;
    if (kind.rfind("int", 0) == 0) {
        try {
            comp = kind.size() > 3 ? std::stoi(kind.substr(3)) : 0;
        } catch (const std::exception&) {
            throw ValidationError("bad ray kind '" + kind + "'");
        }
        if (comp < 0 || comp >= p) throw ValidationError("internal ray component out of range");
    } else if (kind != "ext") {
        throw ValidationError("bad ray kind '" + kind + "'");
    }
    const std::string job = "c=" + str(q.c) + " a=" + str(q.a) + " p=" + std::to_string(p) + " ray=" + kind + ":" +
                            t.str();
    const std::string key = atlas::Cache::key("ray", job);
    hit = false;
    if (auto payload = cache.get(key)) {
        try {
            hit = true;
            return deserialize_ray(*payload);
        } catch (const std::exception&) {
            hit = false;
        }
    }
    TracedRay r = comp < 0 ? trace_external_ray(q, t) : trace_internal_ray(q, p, comp, t);
    if (r.landing == TracedRay::Landing::Landed && !r.cert.certified) {
        try {
            r.cert = landing_point(q, r);
        } catch (const Error&) {
        }
    }
    try {
        cache.put(key, "ray", serialize_ray(r));
    } catch (const std::exception& e) {
        std::cerr << "warning: cache write failed: " << e.what() << '\n';
    }
    return r;
}

int cmd_rays(const Options& o) {
    const CubicParam q = param_arg(o);
    if (o.items.empty()) throw ValidationError("rays: give at least one angle");
    const atlas::Cache cache(atlas::Cache::resolve_dir(o.cache_dir));
    std::vector<std::pair<std::string, TracedRay>> rays;
    for (const auto& spec : o.items) {
        bool hit = false;
        rays.emplace_back(spec, traced(q, o.p, spec, cache, hit));
        std::cerr << spec << (hit ? ": cache hit\n" : ": cache miss\n");
    }
    Tsv summary(std::cout, {"ray", "samples", "landed", "landing_re", "landing_im", "period", "multiplier_abs",
                            "repelling", "parabolic_suspect"});
    for (const auto& [spec, r] : rays)
        summary.row(spec, r.samples.size(), r.landing == TracedRay::Landing::Landed ? 1 : 0, r.cert.point.real(),
                    r.cert.point.imag(), r.cert.period, std::abs(r.cert.multiplier), r.cert.repelling ? 1 : 0,
                    r.cert.parabolic_suspect ? 1 : 0);
    if (!o.out.empty()) {
        Sink sink(o.out);
        Tsv tsv(sink.get(), {"ray", "index", "potential", "re", "im"});
        for (const auto& [spec, r] : rays)
            for (std::size_t i = 0; i < r.samples.size(); ++i)
                tsv.row(spec, i, r.potentials[i], r.samples[i].real(), r.samples[i].imag());
    }
    return kOk;
}

int cmd_puzzle_report(const Options& o) {
    const CubicParam q = param_arg(o);
    require_on_curve(q, o.p);
    Sink sink(o.out);
    std::ostream& out = sink.get();
    const OrbitClass cls = classify(q, o.p);
    out << "param\t" << str(q.c) << '\t' << str(q.a) << "\np\t" << o.p << "\nclass\t" << describe(cls) << '\n';
    for (Candidate cand : {Candidate::Both, Candidate::G17, Candidate::G37}) {
        out << "graph\t" << candidate_name(cand) << '\t';
        try {
            const SupportGraph g = build_support_graph(q, o.p, cand);
            out << "valid\trays=" << g.internal.size() << "+" << g.external.size() << "\tvertices=" << g.vertices.size()
                << '\n';
        } catch (const Error& e) {
            out << "invalid\t" << e.what() << '\n';
        }
    }
    AdmissibleWitness w;
    try {
        w = select_admissible(q, o.p);
    } catch (const Error& e) {
        out << "selected\tnone\n";
        std::cerr << e.what() << '\n';
        return e.code() == Err::SelectionFailed ? kNumerical : exit_code(e.code());
    }
    Puzzle& pz = *w.puzzle;
    out << "selected\t" << candidate_name(w.candidate) << "\nwitness\tn0=" << w.orbit_index << "\tQ=" << w.q_id
        << "\tP=" << w.p_id << "\tdistance=" << num(w.distance) << '\n';
    for (int n = 0; n <= o.p; ++n) out << "pieces\tdepth=" << n << '\t' << pz.enumerate(n).size() << '\n';
    const Tableau tb = tableau_build(pz, pz.critical_point(), 3 * o.p, 40);
    const RuleReport r1 = check_rule_r1(tb, tb), r2 = check_rule_r2(tb, tb);
    out << "R1\tchecked=" << r1.checked << "\tviolations=" << r1.violations << "\nR2\tchecked=" << r2.checked
        << "\tviolations=" << r2.violations << '\n';
    const RecurrenceVerdict v = recurrence_classify(tb);
    out << "verdict\t" << verdict_name(v.kind) << "\tD=" << v.depth << "\tJ=" << v.budget << '\t' << v.note << '\n';
    return kOk;
}

ComponentType type_arg(const std::string& s) {
    if (s == "A") return ComponentType::A;
    if (s == "B") return ComponentType::B;
    if (s == "C") return ComponentType::C;
    if (s == "D") return ComponentType::D;
    throw ValidationError("component type must be A, B, C or D");
}

int cmd_component(const Options& o) {
    const ComponentType type = type_arg(o.type);
    const cplx near = complex_arg(o.center, "--center");
    CenterSearchOptions so;
    so.grid = 8;
    const auto centers = center_search(o.p, type, so);
    if (centers.empty()) throw NumericalError("no centers found");
    std::vector<std::string> actions = o.items;
    if (actions.empty()) actions = {"summary"};
    Sink sink(o.out);
    std::ostream& out = sink.get();

    if (actions.size() == 1 && actions[0] == "centers") {
        Tsv tsv(out, {"type", "c_re", "c_im", "a_re", "a_im", "k", "l", "kappa", "q", "curve_residual",
                      "relation_residual"});
        for (const auto& s : centers)
            tsv.row(component_code(s.type), s.param.c.real(), s.param.c.imag(), s.param.a.real(), s.param.a.imag(),
                    s.k, s.l, s.kappa, s.q, s.curve_residual, s.relation_residual);
        return kOk;
    }
    const CenterSolution* best = &centers.front();
    for (const auto& s : centers)
        if (std::abs(s.param.c - near) < std::abs(best->param.c - near)) best = &s;
    const ComponentChart chart = build_chart(*best);
    int inside = 0;
    for (auto x : chart.inside) inside += x;
    out << "center\t" << str(best->param.c) << '\t' << str(best->param.a) << "\ntype\t" << component_code(type)
        << "\nd_omega\t" << chart.d_omega << "\nlambda\t" << str(chart.lambda) << "\nchart_cells\t" << inside << '\n';
    int rc = kOk;
    for (const auto& act : actions) {
        if (act == "summary") continue;
        if (act == "preimages") {
            if (type == ComponentType::D) throw ValidationError("preimages: Type A, B or C only");
            out << "preimages\tw0=0.3,0.1\t" << count_phi_preimages(chart, cplx(0.3, 0.1)) << '\n';
        } else if (act == "rays") {
            for (int k = 0; k < 8; ++k) {
                const auto r = param_ray_trace(chart, k / 8.0 + 0.01, 0.1, 0.999, 24);
                out << "ray\tt=" << num(r.t) << '\t'
                    << (r.status == ParamRaySample::Status::Complete ? "complete" : "stalled") << "\tlanding=" << str(r.landing)
                    << "\terror=" << num(r.error_bar) << '\n';
                if (r.status != ParamRaySample::Status::Complete) rc = kNumerical;
            }
        } else if (act == "boundary") {
            if (type != ComponentType::D) throw ValidationError("boundary: Type D only");
            const BoundaryTrace bt = boundary_trace_D(chart, 256);
            out << "boundary\tdefect=" << num(bt.closure_defect) << "\tdiameter=" << num(bt.diameter)
                << "\twinding=" << bt.winding << "\tsimple=" << bt.simple << '\n';
        } else if (act == "separation") {
            std::vector<double> angles;
            for (int k = 0; k < 8; ++k) angles.push_back(k / 8.0 + 0.01);
            const SeparationTable t = landing_separation_experiment(chart, angles, 0.999);
            for (const auto& row : t.rows)
                out << "pair\t" << num(row.t1) << '\t' << num(row.t2) << "\tdistance=" << num(row.distance)
                    << "\terrors=" << num(row.error_sum) << '\t' << (row.pass ? "PASS" : "FAIL") << '\n';
            out << "separation\t" << (t.pass ? "PASS" : "FAIL") << '\n';
            if (!t.pass) rc = kNumerical;
        } else {
            throw ValidationError("unknown action '" + act + "'");
        }
    }
    return rc;
}

int cmd_cache(const Options& o) {
    const atlas::Cache cache(atlas::Cache::resolve_dir(o.cache_dir));
    const std::string act = o.items.empty() ? "list" : o.items.front();
    if (act == "list") {
        Tsv tsv(std::cout, {"key", "kind", "version", "bytes", "status"});
        for (const auto& e : cache.list())
            tsv.row(e.key, e.kind, e.version, static_cast<long long>(e.bytes),
                    e.version == atlas::kCacheVersion ? "current" : "stale");
    } else if (act == "clear") {
        std::cout << "removed\t" << cache.clear() << '\n';
    } else if (act == "dir") {
        std::cout << cache.dir().string() << '\n';
    } else {
        throw ValidationError("cache: expected list, clear or dir");
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameter and dynamical atlas for cubic polynomials z^3 - 3c^2 z + a"};
    app.require_subcommand(1);
    Options o;

    auto add_p = [&](CLI::App* s, const char* help) { s->add_option("--p", o.p, help)->capture_default_str(); };
    auto add_out = [&](CLI::App* s) { s->add_option("--out", o.out, "Output file (stdout when empty)"); };
    auto add_region = [&](CLI::App* s, double width_default) {
        s->add_option("--center", o.center, "Region center re,im")->capture_default_str();
        s->add_option("--width", o.width, "Region width")->default_str(num(width_default));
        s->add_option("--pixels", o.pixels, "N or WxH")->capture_default_str();
        s->add_option("--budget", o.budget, "Iteration budget per pixel")->capture_default_str();
        s->add_option("--workers", o.workers, "Worker threads")->capture_default_str();
    };
    auto add_param = [&](CLI::App* s) {
        s->add_option("c", o.c, "Marked critical point c as re,im")->required();
        s->add_option("a", o.a, "Constant term a as re,im")->required();
    };
    auto add_cache = [&](CLI::App* s) {
        s->add_option("--cache-dir", o.cache_dir, "Cache directory (default $ATLAS_CACHE_DIR, else ./.atlas-cache)");
    };

    auto* stats = app.add_subcommand("curve-stats", "Degree and Euler characteristic of S_p for p <= --p");
    add_p(stats, "Largest period");
    add_out(stats);

    auto* fiber = app.add_subcommand("fiber", "All a with f^p(c) = c over one c");
    fiber->add_option("c", o.c, "c as re,im")->required();
    add_p(fiber, "Period");
    add_out(fiber);

    auto* cls = app.add_subcommand("classify", "Orbit class of -c (E, A, B, C, D or U)");
    add_param(cls);
    add_p(cls, "Period of c");
    cls->add_option("--budget", o.budget, "Iteration budget")->capture_default_str();
    add_out(cls);

    auto* rparam = app.add_subcommand("render-param", "Render a region of S_p over the c-plane (PPM)");
    add_p(rparam, "Period");
    rparam->add_option("--seed-branch", o.seed_branch,
                       "Branch seed: a at the center, or c:a (default: first exact-period root over the center)");
    add_out(rparam);
    add_cache(rparam);

    auto* rdyn = app.add_subcommand("render-dyn", "Render the dynamical plane of one map (PPM)");
    add_param(rdyn);
    add_p(rdyn, "Period of c (basin phases are shown when c has it)");
    rdyn->add_option("--overlay", o.overlay, "ext:T, int:T, intJ:T, graph:G17|G37|BOTH, puzzle:N (repeatable)");
    add_out(rdyn);

    auto* rays = app.add_subcommand("rays", "Trace external (T or ext:T) and internal (int:T, intJ:T) rays");
    add_param(rays);
    rays->add_option("angles", o.items, "Ray specs")->required();
    add_p(rays, "Period of c (internal rays)");
    add_out(rays);
    add_cache(rays);

    auto* preport = app.add_subcommand("puzzle-report", "Support graphs, selected puzzle, witness and verdict");
    add_param(preport);
    add_p(preport, "Period of c");
    add_out(preport);

    auto* comp = app.add_subcommand("component", "Hyperbolic component charts, rays, boundary and separation");
    comp->add_option("type", o.type, "A, B, C or D")->required();
    comp->add_option("actions", o.items, "centers | summary | preimages | rays | boundary | separation");
    add_p(comp, "Period");
    comp->add_option("--center", o.center, "Pick the center nearest to this c")->capture_default_str();
    add_out(comp);

    auto* cache = app.add_subcommand("cache", "Inspect or clear the cache");
    cache->add_option("action", o.items, "list | clear | dir");
    add_cache(cache);

    add_region(rparam, 3.0);
    add_region(rdyn, 4.0);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    if (*stats && stats->get_option("--p")->count() == 0) o.p = 6;
    // The dynamical plane needs a wider default view.
    if (*rdyn && rdyn->get_option("--width")->count() == 0) o.width = 4.0;

    try {
        if (o.p < 1) throw ValidationError("--p must be positive");
        if (o.budget < 1) throw ValidationError("--budget must be positive");
        if (o.workers < 1) throw ValidationError("--workers must be positive");
        if (*stats) return cmd_curve_stats(o);
        if (*fiber) return cmd_fiber(o);
        if (*cls) return cmd_classify(o);
        if (*rparam) return cmd_render_param(o);
        if (*rdyn) return cmd_render_dyn(o);
        if (*rays) return cmd_rays(o);
        if (*preport) return cmd_puzzle_report(o);
        if (*comp) return cmd_component(o);
        if (*cache) return cmd_cache(o);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kOk;
}
