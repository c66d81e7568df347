#pragma once

#include <stdexcept>
#include <string>

namespace gpgm {

/// Base exception for all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical routine did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Malformed or unreadable input files.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpgm
