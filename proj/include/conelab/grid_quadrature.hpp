#pragma once

// Fixed-rule discretization of the HPW/CKN quotients of a piecewise-linear
// function on a given node set, with exact gradients. Used by the optimizer
// and by quotient_gradient; reports go through the adaptive integrator.

#include <optional>
#include <span>
#include <vector>

#include "conelab/functionals.hpp"
#include "conelab/space.hpp"

namespace conelab {

enum class QuotientKind { Hpw, Ckn };

class DiscreteQuotient {
 public:
  // nodes[0] = 0; the value at the last node is pinned to 0. The free
  // variables are the values at every other node.
  DiscreteQuotient(const Density& d, std::vector<double> nodes, QuotientKind kind,
                   std::optional<CknParams> params = std::nullopt);

  std::size_t free_size() const { return nodes_.size() - 1; }
  const std::vector<double>& nodes() const { return nodes_; }
  QuotientKind kind() const { return kind_; }

  // log Q(v); fills grad (size free_size()) when non-null.
  double log_quotient(std::span<const double> free, std::vector<double>* grad = nullptr) const;
  // Positive approximation of the Hessian diagonal of log Q, used as a
  // preconditioner: |second derivative| of each term over its value.
  std::vector<double> hessian_diagonal(std::span<const double> free) const;
  // int u^2 dm (HPW) or int |u|^p d^{-q} dm (CKN).
  double normalizer(std::span<const double> free) const;
  // Homogeneity degree of the normalizer in v (2 or p).
  double normalizer_degree() const;

  GridFunction to_grid_function(std::span<const double> free) const;

 private:
  struct Point {
    std::size_t element;
    double s;        // local coordinate in [0,1]
    double w_mass;   // W h
    double w_x2;     // W x^2 h
    double w_neg_q;  // W x^{-q} h
    double w_sing;   // W x^{2-2q} h
  };

  std::vector<double> nodes_;
  QuotientKind kind_;
  double p_ = 0.0;
  std::vector<double> stiffness_;  // int_{element} h
  std::vector<Point> points_;
};

}  // namespace conelab
