#pragma once

#include <string>

#include "constants.hpp"

namespace atomlens {

// D-line data for an alkali species. Linewidths are angular (rad/s).
struct AtomSpecies {
  std::string name;
  double mass_kg = 0;
  double d1_lambda_m = 0;
  double d1_gamma = 0;
  double d2_lambda_m = 0;
  double d2_gamma = 0;

  static AtomSpecies rb87() {
    AtomSpecies s;
    s.name = "Rb87";
    s.mass_kg = 86.909180527 * atomic_mass_kg;
    s.d1_lambda_m = 794.978851156e-9;
    s.d1_gamma = two_pi * 5.7500e6;
    s.d2_lambda_m = 780.241209686e-9;
    s.d2_gamma = two_pi * 6.0666e6;
    return s;
  }
};

}  // namespace atomlens
