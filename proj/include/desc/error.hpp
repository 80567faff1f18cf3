#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace desc {

/// Malformed or unreadable input (files, parameters).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed to produce a usable answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Projection onto SO(3) of a matrix with rank <= 1.
class DegenerateProjectionError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Orthogonal iteration did not converge; carries the final residuals.
class SpectralError : public SolverError {
 public:
  SpectralError(const std::string& what, double subspace_change, double rayleigh_residual)
      : SolverError(what), subspace_change_(subspace_change), rayleigh_residual_(rayleigh_residual) {}
  double subspace_change() const { return subspace_change_; }
  double rayleigh_residual() const { return rayleigh_residual_; }

 private:
  double subspace_change_;
  double rayleigh_residual_;
};

/// Edges that lie on no 3-cycle. Stored as (i, j) pairs with i < j.
class UncoveredEdgesError : public std::runtime_error {
 public:
  UncoveredEdgesError(const std::string& what, std::vector<std::pair<int, int>> edges)
      : std::runtime_error(what), edges_(std::move(edges)) {}
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

 private:
  std::vector<std::pair<int, int>> edges_;
};

}  // namespace desc
