#pragma once

#include <armadillo>
#include <complex>
#include <stdexcept>
#include <string>

namespace frmofdm {

using cx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kSpeedOfLight = 3.0e8;

/// Power quantity in dB (or gain in dBi) to linear scale.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace frmofdm
