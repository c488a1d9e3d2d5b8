#pragma once

#include <stdexcept>
#include <string>

namespace ddlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonInvertibleDeformation : public Error {
 public:
  explicit NonInvertibleDeformation(const std::string& what = "deformation is not invertible (det <= 0)")
      : Error(what) {}
};

class NonPositiveDefinite : public Error {
 public:
  explicit NonPositiveDefinite(const std::string& what = "tensor is not positive definite")
      : Error(what) {}
};

class MissingTargets : public Error {
  using Error::Error;
};

class AllRestartsDiverged : public Error {
  using Error::Error;
};

class DegenerateDatabase : public Error {
  using Error::Error;
};

class InnerSolverFailure : public Error {
  using Error::Error;
};

class NewtonDivergence : public Error {
  using Error::Error;
};

class SubsampleTooLarge : public Error {
  using Error::Error;
};

class MalformedFile : public Error {
  using Error::Error;
};

class ZeroReference : public Error {
  using Error::Error;
};

class KeyMismatch : public Error {
  using Error::Error;
};

class InvalidConfig : public Error {
  using Error::Error;
};

}  // namespace ddlab
