#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace equipart {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed expression or manifest text. `position` is a 0-based byte offset
// into the parsed text; detail() is the message without it.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position,
             std::vector<std::string> expected = {});

  std::size_t position() const { return position_; }
  const std::string& detail() const { return detail_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::string detail_;
  std::size_t position_;
  std::vector<std::string> expected_;
};

// Evaluation outside the domain of an elementary function (log of a
// nonpositive number, acos outside [-1, 1], ...).
class DomainError : public Error {
 public:
  DomainError(const std::string& message, std::string subtree);
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

// Geometric precondition failure: point outside the chart domain, metric not
// positive definite, near-critical point, dimension not supported.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// A numeric operation was asked to evaluate at a near-critical point of a
// field (|grad f| <= eps_crit).
class CriticalPointError : public GeometryError {
 public:
  CriticalPointError(const std::string& message, double grad_norm)
      : GeometryError(message), grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  double grad_norm_;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace equipart
