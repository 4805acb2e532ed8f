// types.hpp — shared scalar/matrix aliases and unit constants

#pragma once

#include <complex>

#include <Eigen/Dense>

namespace ccgate {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr const char* kVersion = "0.1.0";

// Energies are carried in meV, times in ps throughout the library.
// hbar converts between the two: a term of energy E advances phase at
// E / kHbar radians per ps.
inline constexpr double kHbar = 0.6582119569;  // meV·ps

// Angular rate (rad/ps) of a phase factor driven by an energy in meV.
inline constexpr double angular_rate(double energy_mev) { return energy_mev / kHbar; }

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace ccgate
