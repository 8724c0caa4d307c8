#pragma once

#include <stdexcept>
#include <string>

namespace atomlens {

// Error categories; the CLI maps these 1:1 onto distinct exit codes.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct input_error : std::runtime_error {
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct convergence_error : std::runtime_error {
  explicit convergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace atomlens
