#pragma once
// Semilinear parabolic PDE problem data:
//   du/dt = f(x, u, grad u) + <mu(x), grad u> + 1/2 Tr(sigma sigma* Hess u),
//   u(0, x) = phi(x),
// with the diffusion supplied as a matrix action (x, w) -> sigma(x) w so
// diagonal cases stay O(d).

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepsplit/rng.hpp"

namespace deepsplit {

struct StartDistribution {
  enum class Kind { point, box_uniform };
  Kind kind = Kind::point;
  std::vector<double> point;  // point mass location
  std::vector<double> box_lo; // box-uniform bounds (robustness studies)
  std::vector<double> box_hi;

  static StartDistribution at(std::vector<double> x) {
    StartDistribution s;
    s.kind = Kind::point;
    s.point = std::move(x);
    return s;
  }
  static StartDistribution box(std::vector<double> lo, std::vector<double> hi) {
    StartDistribution s;
    s.kind = Kind::box_uniform;
    s.box_lo = std::move(lo);
    s.box_hi = std::move(hi);
    return s;
  }

  /// Samples xi for path `elem`; deterministic given (stream, elem).
  void sample(const rng::Stream& stream, std::uint32_t elem, std::span<double> out) const;
};

struct PdeProblem {
  int dim = 0;
  std::string label;

  // mu(x) -> out, both length dim
  std::function<void(std::span<const double>, std::span<double>)> drift;
  // sigma(x) w -> out, all length dim
  std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>
      diffusion;
  // f(x, y, z)
  std::function<double(std::span<const double>, double, std::span<const double>)> nonlinearity;
  // phi(x)
  std::function<double(std::span<const double>)> initial;
  // weak gradient of phi
  std::function<void(std::span<const double>, std::span<double>)> initial_grad;

  StartDistribution start;
};

}  // namespace deepsplit
