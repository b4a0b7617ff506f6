#pragma once

#include <stdexcept>
#include <string>

namespace dpwate {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration or parameter (CLI exit code 2).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Problem with input data: file access, schema, or value validation
// (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Model fitting failed: perfect separation or rank deficiency. Callers in
// the partition pipeline translate this into the degenerate-partition path.
class FitError : public Error {
 public:
  using Error::Error;
};

// A subset without enough treated and control records, or a run where every
// partition is degenerate (CLI exit code 4).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpwate
