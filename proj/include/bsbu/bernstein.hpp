#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsbu/common.hpp"

namespace bsbu {

/// Bernstein polynomials of order J on [lo, hi]:
///   B_j(z) = C(J, j) u^j (1 - u)^(J - j),  u = (z - lo) / (hi - lo).
class BernsteinBasis {
 public:
  BernsteinBasis(int order, double lo, double hi) : order_(order), lo_(lo), hi_(hi) {
    if (order < 0) throw ValidationError("BernsteinBasis: order must be >= 0");
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ValidationError("BernsteinBasis: need finite lo < hi");
    binomial_.resize(static_cast<std::size_t>(order) + 1);
    binomial_[0] = 1.0;
    for (int j = 1; j <= order; ++j)
      binomial_[static_cast<std::size_t>(j)] =
          binomial_[static_cast<std::size_t>(j - 1)] * (order - j + 1) / j;
  }

  int order() const { return order_; }
  std::size_t size() const { return static_cast<std::size_t>(order_) + 1; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool contains(double z) const { return z >= lo_ && z <= hi_; }

  /// Writes all J+1 basis values at z into out. No extrapolation.
  void evaluate(double z, std::span<double> out) const {
    if (!contains(z))
      throw RangeError("BernsteinBasis: z=" + std::to_string(z) + " outside [" +
                       std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
    if (out.size() != size()) throw ValidationError("BernsteinBasis: output size mismatch");
    const double u = (z - lo_) / (hi_ - lo_);
    const double v = 1.0 - u;
    // out[j] <- u^j, then multiply by (1-u)^(J-j) from the top down.
    double power = 1.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] = binomial_[j] * power;
      power *= u;
    }
    power = 1.0;
    for (std::size_t j = out.size(); j-- > 0;) {
      out[j] *= power;
      power *= v;
    }
  }

  std::vector<double> evaluate(double z) const {
    std::vector<double> out(size());
    evaluate(z, out);
    return out;
  }

  friend bool operator==(const BernsteinBasis& a, const BernsteinBasis& b) {
    return a.order_ == b.order_ && a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

 private:
  int order_;
  double lo_;
  double hi_;
  std::vector<double> binomial_;
};

inline std::vector<double> bernstein_basis_eval(const BernsteinBasis& basis, double z) {
  return basis.evaluate(z);
}

enum class ShapeConstraint { None, Monotone, Convex, Concave, ConvexMonotone };

inline const char* to_string(ShapeConstraint kind) {
  switch (kind) {
    case ShapeConstraint::None: return "none";
    case ShapeConstraint::Monotone: return "monotone";
    case ShapeConstraint::Convex: return "convex";
    case ShapeConstraint::Concave: return "concave";
    case ShapeConstraint::ConvexMonotone: return "convex-monotone";
  }
  return "unknown";
}

inline ShapeConstraint parse_shape_constraint(const std::string& name) {
  for (ShapeConstraint k : {ShapeConstraint::None, ShapeConstraint::Monotone, ShapeConstraint::Convex,
                            ShapeConstraint::Concave, ShapeConstraint::ConvexMonotone})
    if (name == to_string(k)) return k;
  throw ValidationError("unknown shape constraint '" + name + "'");
}

/// Smallest order for which the constraint matrix has at least one row.
inline int min_order_for(ShapeConstraint kind) {
  switch (kind) {
    case ShapeConstraint::None: return 0;
    case ShapeConstraint::Monotone: return 1;
    case ShapeConstraint::Convex:
    case ShapeConstraint::Concave:
    case ShapeConstraint::ConvexMonotone: return 2;
  }
  return 0;
}

namespace detail {

inline Eigen::MatrixXd constraint_rows(ShapeConstraint kind, int order) {
  const Eigen::Index cols = order + 1;
  auto first_differences = [&](Eigen::Index rows) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      a(i, i) = -1.0;
      a(i, i + 1) = 1.0;
    }
    return a;
  };
  auto second_differences = [&](Eigen::Index rows) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      a(i, i) = 1.0;
      a(i, i + 1) = -2.0;
      a(i, i + 2) = 1.0;
    }
    return a;
  };
  switch (kind) {
    case ShapeConstraint::None: return Eigen::MatrixXd(0, cols);
    case ShapeConstraint::Monotone: return first_differences(std::max(order, 0));
    case ShapeConstraint::Convex: return second_differences(std::max(order - 1, 0));
    case ShapeConstraint::Concave: return -second_differences(std::max(order - 1, 0));
    case ShapeConstraint::ConvexMonotone: {
      if (order < 1) return Eigen::MatrixXd(0, cols);
      Eigen::MatrixXd a(order, cols);
      a.topRows(1) = first_differences(1);
      a.bottomRows(order - 1) = second_differences(order - 1);
      return a;
    }
  }
  return Eigen::MatrixXd(0, cols);
}

}  // namespace detail

/// A_J such that A_J beta >= 0 enforces the shape on beta^T phi(z).
inline Eigen::MatrixXd shape_constraint_matrix(ShapeConstraint kind, int order) {
  if (order < min_order_for(kind) || order < 0)
    throw ValidationError(std::string("shape_constraint_matrix: order ") + std::to_string(order) +
                          " too small for " + to_string(kind));
  return detail::constraint_rows(kind, order);
}

}  // namespace bsbu
