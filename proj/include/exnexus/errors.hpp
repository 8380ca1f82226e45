#pragma once

#include <stdexcept>
#include <string>

namespace exnexus {

// Eigenpair residual above the acceptance bound.
class IllConditioned : public std::runtime_error {
 public:
  explicit IllConditioned(const std::string& what) : std::runtime_error(what) {}
};

// Branch identity became ambiguous while following eigenpairs.
class TrackingLost : public std::runtime_error {
 public:
  explicit TrackingLost(const std::string& what) : std::runtime_error(what) {}
};

class DivisionByZero : public std::domain_error {
 public:
  explicit DivisionByZero(const std::string& what) : std::domain_error(what) {}
};

// Input carries no information the estimator can use.
class Degenerate : public std::runtime_error {
 public:
  explicit Degenerate(const std::string& what) : std::runtime_error(what) {}
};

// Eigencurves show no sign of a degeneracy inside the sampled window.
class NoBracket : public std::runtime_error {
 public:
  explicit NoBracket(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace exnexus
