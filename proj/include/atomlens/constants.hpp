#pragma once

// Physical constants (SI, CODATA 2018) and the unit factors used throughout.

namespace atomlens {

constexpr double pi = 3.14159265358979323846;
constexpr double two_pi = 2.0 * pi;

constexpr double c_light = 299792458.0;         // m/s
constexpr double hbar = 1.054571817e-34;        // J s
constexpr double k_boltzmann = 1.380649e-23;    // J/K
constexpr double atomic_mass_kg = 1.66053906660e-27;

// unit factors (SI value of one unit)
constexpr double nm = 1e-9;
constexpr double um = 1e-6;
constexpr double mm = 1e-3;
constexpr double milliwatt = 1e-3;
constexpr double millikelvin = 1e-3;
constexpr double gauss = 1e-4;  // tesla

}  // namespace atomlens
