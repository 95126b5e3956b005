#pragma once

#include <boost/rational.hpp>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace openg2g {

// Exact simulation time: tick counts and cadences are rationals so that
// multi-rate schedules never accumulate float drift.
using Rational = boost::rational<std::int64_t>;

inline double to_seconds(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Convert a time given in seconds to a Rational, snapping to a microsecond
// grid. Sub-microsecond cadences are out of scope.
inline Rational rational_seconds(double s) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite time");
    const std::int64_t micros = std::llround(s * 1e6);
    return Rational(micros, 1000000);
}

// True if a is an exact positive integer multiple of b.
inline bool is_positive_multiple(const Rational& a, const Rational& b) {
    if (a <= Rational(0) || b <= Rational(0)) return false;
    const Rational q = a / b;
    return q.denominator() == 1;
}

enum class Phase : int { A = 0, B = 1, C = 2 };

inline char phase_letter(Phase p) { return "abc"[static_cast<int>(p)]; }

inline Phase phase_from_letter(char c) {
    switch (c) {
        case 'a': case 'A': return Phase::A;
        case 'b': case 'B': return Phase::B;
        case 'c': case 'C': return Phase::C;
    }
    throw std::invalid_argument(std::string("bad phase letter: ") + c);
}

// Per-phase real quantity (e.g. active power in watts).
struct ThreePhase {
    double a = 0.0, b = 0.0, c = 0.0;

    double total() const { return a + b + c; }
    double& operator[](Phase p) { return p == Phase::A ? a : (p == Phase::B ? b : c); }
    double operator[](Phase p) const { return p == Phase::A ? a : (p == Phase::B ? b : c); }

    ThreePhase& operator+=(const ThreePhase& o) {
        a += o.a; b += o.b; c += o.c;
        return *this;
    }
    friend ThreePhase operator+(ThreePhase x, const ThreePhase& y) { return x += y; }
    friend ThreePhase operator*(const ThreePhase& x, double s) { return {x.a * s, x.b * s, x.c * s}; }
};

// Error taxonomy. `code` is a stable machine-readable identifier
// ("module.condition"); the CLI maps categories onto exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// Bad user input: malformed config/spec/feeder, unknown names, off-ladder batches.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Solver failed to converge; carries the residual that was left.
class DivergenceError : public Error {
public:
    DivergenceError(std::string code, const std::string& what, double residual)
        : Error(std::move(code), what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

// Command routed to a component that cannot accept it.
class RoutingError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Shortest round-trip decimal form; used for all CSV floats so identical
// runs serialize byte-identically.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace openg2g
