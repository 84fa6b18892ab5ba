#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cubic/dynamics.hpp"

namespace atlas {

using cubic::cplx;
using cubic::CubicParam;

inline constexpr int kTile = 64;

struct RenderJob {
    enum class Mode { Parameter, Dynamical };
    Mode mode = Mode::Parameter;
    cplx center{0.0, 0.0};
    double width = 3.0;
    int pixels_x = 256;
    int pixels_y = 256;
    int p = 1;
    CubicParam seed{};   // parameter mode: on-curve point the branch is continued from
    CubicParam param{};  // dynamical mode
    int budget = 500;
    int refinements = 1;  // flood grid halvings in classify
    int workers = 1;

    cplx pixel(int i, int k) const;
    // Canonical text of everything that affects the output (worker count excluded).
    std::string canonical() const;
};

// Pixel codes. Parameter plane: classifier codes A B C D E U, plus J for a
// failed branch step. Dynamical plane: E escaping, 0..9 basin phase, K bounded
// or undecided.
struct ImageGrid {
    int width = 0, height = 0;
    std::vector<char> code;
    std::vector<std::int32_t> shade;  // escape index, phase, or period q
    std::vector<cplx> branch;         // parameter mode: the a value at each pixel

    std::size_t idx(int i, int k) const { return static_cast<std::size_t>(k) * width + i; }
    std::string serialize() const;
    static ImageGrid deserialize(const std::string& text);
};

ImageGrid render(const RenderJob& job);

using Rgb = std::array<std::uint8_t, 3>;
Rgb color_of(char code, std::int32_t shade);
std::vector<Rgb> colorize(const ImageGrid& grid);

// Overlay arcs drawn onto colorized pixels in sample order.
void draw_polyline(std::vector<Rgb>& img, const RenderJob& job, const std::vector<cplx>& pts, Rgb color);

void write_ppm(std::ostream& out, int width, int height, const std::vector<Rgb>& img);
void write_legend(std::ostream& out, const ImageGrid& grid);

}  // namespace atlas
