#pragma once

#include <stdexcept>
#include <string>

namespace artikin {

// Process exit codes used by the CLI (and by callers that map errors).
enum ExitCode : int {
  kExitOk = 0,
  kExitInvalidInput = 2,
  kExitDegenerateGeometry = 3,
  kExitDivergence = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual int exit_code() const { return kExitInvalidInput; }
};

// Bad arguments, out-of-range values, malformed requests.
class InvalidInputError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitInvalidInput; }
};

// Geometry too degenerate to solve (collinear point sets, zero matrices, ...).
// `rank` carries the offending matrix rank when known, -1 otherwise.
class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& msg, int rank = -1)
      : Error(msg), rank_(rank) {}
  int rank() const { return rank_; }
  int exit_code() const override { return kExitDegenerateGeometry; }

 private:
  int rank_;
};

// A track with too few visible samples to anchor interpolation.
class DegenerateTrackError : public DegenerateGeometryError {
 public:
  DegenerateTrackError(const std::string& msg, int point_index)
      : DegenerateGeometryError(msg), point_index_(point_index) {}
  int point_index() const { return point_index_; }

 private:
  int point_index_;
};

// Malformed file content. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, long line = -1)
      : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  long line() const { return line_; }
  int exit_code() const override { return kExitInvalidInput; }

 private:
  long line_;
};

// Optimization blew up past the divergence guard.
class DivergenceError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitDivergence; }
};

}  // namespace artikin
