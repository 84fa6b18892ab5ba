#pragma once

#include <complex>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace cubic::mp {

// 128-bit mantissa, used where double precision cannot settle a question.
using Real = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<128, boost::multiprecision::digit_base_2>>;

template <class T>
struct Complex {
    T re{0}, im{0};

    static Complex from(std::complex<double> z) { return {T(z.real()), T(z.imag())}; }
    std::complex<double> to_double() const {
        return {static_cast<double>(re), static_cast<double>(im)};
    }

    friend Complex operator+(const Complex& x, const Complex& y) { return {x.re + y.re, x.im + y.im}; }
    friend Complex operator-(const Complex& x, const Complex& y) { return {x.re - y.re, x.im - y.im}; }
    friend Complex operator*(const Complex& x, const Complex& y) {
        return {x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re};
    }
    friend Complex operator*(const Complex& x, const T& s) { return {x.re * s, x.im * s}; }
    friend Complex operator/(const Complex& x, const Complex& y) {
        T den = y.re * y.re + y.im * y.im;
        return {(x.re * y.re + x.im * y.im) / den, (x.im * y.re - x.re * y.im) / den};
    }
    T norm() const { return re * re + im * im; }
    T abs() const {
        using std::sqrt;
        return sqrt(norm());
    }
};

}  // namespace cubic::mp
