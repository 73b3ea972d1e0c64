#pragma once

#include <stdexcept>
#include <string>

namespace romshape {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged() : Error("simulation diverged") {}
};

class FitError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class QpError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace romshape
