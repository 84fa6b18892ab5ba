#pragma once

#include <charconv>
#include <complex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cubic/rays.hpp"

namespace atlas {

using cubic::cplx;

// 17 significant digits: round-trips every double.
inline std::string num(double x) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

class Tsv {
public:
    Tsv(std::ostream& out, std::vector<std::string> columns) : out_(out), n_(columns.size()) {
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "\t" : "") << columns[i];
        out_ << '\n';
    }
    template <class... T>
    void row(const T&... cells) {
        static_assert(sizeof...(T) > 0);
        if (sizeof...(T) != n_) throw std::logic_error("Tsv: column count mismatch");
        bool first = true;
        ((out_ << (first ? "" : "\t") << cell(cells), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string cell(double x) { return num(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(long x) { return std::to_string(x); }
    static std::string cell(long long x) { return std::to_string(x); }
    static std::string cell(std::size_t x) { return std::to_string(x); }
    static std::string cell(char x) { return std::string(1, x); }
    static std::string cell(const char* x) { return x; }
    static std::string cell(const std::string& x) { return x; }

    std::ostream& out_;
    std::size_t n_;
};

// "re,im" or "re"; throws std::invalid_argument.
inline cplx parse_complex(std::string_view s) {
    auto parse = [](std::string_view t) {
        double v = 0.0;
        while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
        if (!t.empty() && t.front() == '+') t.remove_prefix(1);
        auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (r.ec != std::errc() || r.ptr != t.data() + t.size())
            throw std::invalid_argument("not a number: '" + std::string(t) + "'");
        return v;
    };
    const auto comma = s.find(',');
    if (comma == std::string_view::npos) return {parse(s), 0.0};
    return {parse(s.substr(0, comma)), parse(s.substr(comma + 1))};
}

// "num/den" or a bare integer numerator over 1.
inline cubic::RayAngle parse_angle(std::string_view s) {
    auto parse = [&](std::string_view t) {
        long long v = 0;
        auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (r.ec != std::errc() || r.ptr != t.data() + t.size())
            throw std::invalid_argument("bad angle: '" + std::string(s) + "'");
        return v;
    };
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return cubic::RayAngle(parse(s), 1);
    const long long den = parse(s.substr(slash + 1));
    if (den <= 0) throw std::invalid_argument("bad angle denominator: '" + std::string(s) + "'");
    return cubic::RayAngle(parse(s.substr(0, slash)), static_cast<std::uint64_t>(den));
}

inline std::string str(cplx z) { return num(z.real()) + "," + num(z.imag()); }

}  // namespace atlas
