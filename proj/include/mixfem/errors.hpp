#pragma once

/// @file errors.hpp
/// @brief Exception types shared by all modules.

#include <cstdio>
#include <stdexcept>
#include <string>

namespace mixfem {

/// @brief Base class of every library error.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// @brief An iterative solve hit its iteration cap.
inline std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", r);
  return buf;
}

class NoConvergence : public Error {
public:
  NoConvergence(const std::string& where, int iterations, double residual)
      : Error(where + ": no convergence after " + std::to_string(iterations) +
              " iterations (residual " + format_residual(residual) + ")"),
        iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

class PerfectPlasticityUnsupported : public Error {
public:
  explicit PerfectPlasticityUnsupported(
      const std::string& what = "inverse update needs k_i > 0 or k_k > 0")
      : Error(what) {}
};

class DegenerateElement : public Error {
public:
  using Error::Error;
};

class RankDeficientFilter : public Error {
public:
  using Error::Error;
};

class SingularG : public Error {
public:
  using Error::Error;
};

class SingularEnhancedStiffness : public Error {
public:
  using Error::Error;
};

class SingularCV : public Error {
public:
  using Error::Error;
};

class CollinearNodes : public Error {
public:
  using Error::Error;
};

class ActiveSetCycling : public Error {
public:
  using Error::Error;
};

class GlobalNoConvergence : public Error {
public:
  using Error::Error;
};

class EigensolverFailure : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class MissingRun : public Error {
public:
  using Error::Error;
};

class InvalidParams : public Error {
public:
  using Error::Error;
};

} // namespace mixfem
