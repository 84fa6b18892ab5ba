#include "render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cubic/classifier.hpp"
#include "cubic/curve.hpp"
#include "format.hpp"

namespace atlas {

using namespace cubic;

cplx RenderJob::pixel(int i, int k) const {
    const double h = width / pixels_x;
    const double height = h * pixels_y;
    return {center.real() - 0.5 * width + (i + 0.5) * h, center.imag() + 0.5 * height - (k + 0.5) * h};
}

std::string RenderJob::canonical() const {
    std::ostringstream s;
    s << (mode == Mode::Parameter ? "parameter" : "dynamical") << " center=" << str(center) << " width=" << num(width)
      << " pixels=" << pixels_x << 'x' << pixels_y << " p=" << p << " budget=" << budget
      << " refinements=" << refinements;
    if (mode == Mode::Parameter)
        s << " seed=" << str(seed.c) << ';' << str(seed.a);
    else
        s << " param=" << str(param.c) << ';' << str(param.a);
    return s.str();
}

std::string ImageGrid::serialize() const {
    std::ostringstream s;
    s << "grid\t" << width << '\t' << height << '\t' << (branch.empty() ? 0 : 1) << '\n';
    for (std::size_t i = 0; i < code.size(); ++i) {
        s << code[i] << '\t' << shade[i];
        if (!branch.empty()) s << '\t' << num(branch[i].real()) << '\t' << num(branch[i].imag());
        s << '\n';
    }
    return s.str();
}

ImageGrid ImageGrid::deserialize(const std::string& text) {
    std::istringstream s(text);
    std::string tag;
    int has_branch = 0;
    ImageGrid g;
    if (!(s >> tag >> g.width >> g.height >> has_branch) || tag != "grid" || g.width <= 0 || g.height <= 0)
        throw std::runtime_error("cached grid: bad header");
    const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    g.code.resize(n);
    g.shade.resize(n);
    if (has_branch) g.branch.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string re, im;
        if (!(s >> g.code[i] >> g.shade[i])) throw std::runtime_error("cached grid: truncated");
        if (has_branch) {
            if (!(s >> re >> im)) throw std::runtime_error("cached grid: truncated");
            g.branch[i] = {std::stod(re), std::stod(im)};
        }
    }
    return g;
}

namespace {

struct Tile {
    int i0, k0, i1, k1;
};

std::vector<Tile> tiles_of(int w, int h) {
    std::vector<Tile> out;
    for (int k = 0; k < h; k += kTile)
        for (int i = 0; i < w; i += kTile) out.push_back({i, k, std::min(i + kTile, w), std::min(k + kTile, h)});
    return out;
}

// Row-serpentine walk through a tile, continuing the branch pixel to pixel.
// Every tile starts again from the seed, so the result does not depend on
// which worker runs it or in which order.
void parameter_tile(const RenderJob& job, const Tile& t, ImageGrid& g) {
    ClassifyOptions opts;
    opts.budget = job.budget;
    opts.max_refinements = job.refinements;
    const double step = 0.25 * job.width / job.pixels_x;
    cplx c = job.seed.c, a = job.seed.a;
    bool lost = false;
    try {
        const cplx first = job.pixel(t.i0, t.k0);
        a = branch_step(c, a, first, job.p, std::max(step, 0.02));
        c = first;
    } catch (const Error&) {
        lost = true;
    }
    for (int k = t.k0; k < t.k1; ++k) {
        const bool forward = (k - t.k0) % 2 == 0;
        for (int n = 0; n < t.i1 - t.i0; ++n) {
            const int i = forward ? t.i0 + n : t.i1 - 1 - n;
            const std::size_t id = g.idx(i, k);
            const cplx target = job.pixel(i, k);
            if (!lost) {
                try {
                    a = branch_step(c, a, target, job.p, step);
                    c = target;
                } catch (const Error&) {
                    g.code[id] = 'J';
                    g.shade[id] = 0;
                    g.branch[id] = a;
                    continue;
                }
            }
            if (lost) {
                g.code[id] = 'J';
                g.shade[id] = 0;
                g.branch[id] = a;
                continue;
            }
            g.branch[id] = a;
            const OrbitClass cls = classify({c, a}, job.p, opts);
            g.code[id] = cls.code();
            switch (cls.kind) {
                case OrbitClass::Kind::Escape: g.shade[id] = cls.n; break;
                case OrbitClass::Kind::TypeB: g.shade[id] = cls.k; break;
                case OrbitClass::Kind::TypeC: g.shade[id] = cls.l; break;
                case OrbitClass::Kind::TypeD: g.shade[id] = cls.q; break;
                default: g.shade[id] = 0;
            }
        }
    }
}

void dynamical_tile(const RenderJob& job, const Tile& t, const std::optional<PhaseOracle>& oracle, ImageGrid& g) {
    const EscapeBound bound = escape_bound(job.param);
    for (int k = t.k0; k < t.k1; ++k) {
        for (int i = t.i0; i < t.i1; ++i) {
            const std::size_t id = g.idx(i, k);
            const cplx z = job.pixel(i, k);
            const Orbit orb = iterate(job.param, z, job.budget, bound);
            if (orb.status == Orbit::Status::Escaped) {
                g.code[id] = 'E';
                g.shade[id] = orb.n;
                continue;
            }
            const int ph = oracle ? oracle->phase(z) : -2;
            if (ph >= 0) {
                g.code[id] = static_cast<char>('0' + std::min(ph, 9));
                g.shade[id] = ph;
            } else {
                g.code[id] = 'K';
                g.shade[id] = 0;
            }
        }
    }
}

}  // namespace

ImageGrid render(const RenderJob& job) {
    if (job.pixels_x < 1 || job.pixels_y < 1 || !(job.width > 0)) throw Error(Err::InvalidArgument, "render: empty region");
    if (job.p < 1) throw Error(Err::InvalidArgument, "render: p must be positive");
    ImageGrid g;
    g.width = job.pixels_x;
    g.height = job.pixels_y;
    const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    g.code.assign(n, '?');
    g.shade.assign(n, 0);

    std::optional<PhaseOracle> oracle;
    if (job.mode == RenderJob::Mode::Parameter) {
        if (std::abs(on_curve_residual(job.seed.c, job.seed.a, job.p).residual) > 1e-10)
            throw Error(Err::InvalidArgument, "render: branch seed is not on the curve");
        g.branch.assign(n, cplx(0.0, 0.0));
    } else {
        try {
            if (exact_period(job.param, job.param.c, job.p))
                oracle.emplace(job.param, critical_cycle(job.param, job.p), 1.0, job.budget);
        } catch (const Error&) {
        }
    }

    const auto tiles = tiles_of(g.width, g.height);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < tiles.size(); t = next++) {
            if (job.mode == RenderJob::Mode::Parameter)
                parameter_tile(job, tiles[t], g);
            else
                dynamical_tile(job, tiles[t], oracle, g);
        }
    };
    const int workers = std::clamp(job.workers, 1, 256);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return g;
}

Rgb color_of(char code, std::int32_t shade) {
    auto fade = [](int n, int lo, int hi) {
        const double t = std::min(n, 60) / 60.0;
        return static_cast<std::uint8_t>(lo + (hi - lo) * std::sqrt(t));
    };
    switch (code) {
        case 'A': return {200, 50, 50};
        case 'B': return {235, 140, 40};
        case 'C': return {225, 210, 70};
        case 'D': return {static_cast<std::uint8_t>(50 + 20 * (shade % 4)), 170, 90};
        case 'E': return {20, fade(shade, 20, 150), fade(shade, 60, 250)};
        case 'U': return {128, 128, 128};
        case 'J': return {255, 0, 255};
        case 'K': return {15, 15, 15};
        default: break;
    }
    if (code >= '0' && code <= '9') {
        static const Rgb phases[] = {{200, 50, 50}, {60, 170, 90}, {225, 210, 70}, {150, 80, 200}, {235, 140, 40},
                                     {70, 200, 200}, {190, 110, 140}, {120, 160, 40}, {210, 170, 150}, {100, 100, 220}};
        return phases[code - '0'];
    }
    return {0, 0, 0};
}

std::vector<Rgb> colorize(const ImageGrid& g) {
    std::vector<Rgb> img(g.code.size());
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = color_of(g.code[i], g.shade[i]);
    return img;
}

void draw_polyline(std::vector<Rgb>& img, const RenderJob& job, const std::vector<cplx>& pts, Rgb color) {
    const double h = job.width / job.pixels_x;
    const cplx corner = job.pixel(0, 0);
    auto plot = [&](cplx z) {
        const int i = static_cast<int>(std::lround((z.real() - corner.real()) / h));
        const int k = static_cast<int>(std::lround((corner.imag() - z.imag()) / h));
        if (i >= 0 && k >= 0 && i < job.pixels_x && k < job.pixels_y)
            img[static_cast<std::size_t>(k) * job.pixels_x + i] = color;
    };
    for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
        const int steps = std::clamp(static_cast<int>(std::ceil(std::abs(pts[s + 1] - pts[s]) / (0.5 * h))), 1, 100000);
        for (int j = 0; j <= steps; ++j) plot(pts[s] + (pts[s + 1] - pts[s]) * (static_cast<double>(j) / steps));
    }
    if (pts.size() == 1) plot(pts.front());
}

void write_ppm(std::ostream& out, int width, int height, const std::vector<Rgb>& img) {
    out << "P6\n" << width << ' ' << height << "\n255\n";
    for (const Rgb& px : img) out.write(reinterpret_cast<const char*>(px.data()), 3);
}

void write_legend(std::ostream& out, const ImageGrid& g) {
    static const std::map<char, const char*> meaning = {
        {'A', "-c in the immediate basin of c"}, {'B', "-c in another cycle component"},
        {'C', "-c captured after l steps"},      {'D', "second attracting cycle"},
        {'E', "critical orbit escapes"},         {'U', "undecided at budget"},
        {'J', "branch step failed (sentinel)"},  {'K', "bounded, no basin phase"}};
    std::map<char, long> count;
    for (char c : g.code) ++count[c];
    Tsv tsv(out, {"code", "r", "g", "b", "pixels", "meaning"});
    for (const auto& [c, n] : count) {
        const Rgb rgb = color_of(c, 0);
        std::string m;
        if (auto it = meaning.find(c); it != meaning.end())
            m = it->second;
        else if (c >= '0' && c <= '9')
            m = std::string("basin phase ") + c;
        tsv.row(c, static_cast<int>(rgb[0]), static_cast<int>(rgb[1]), static_cast<int>(rgb[2]), n, m);
    }
}

}  // namespace atlas
