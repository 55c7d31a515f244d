#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gclpr/error.hpp"

namespace gclpr::basis {

/// C(degree + dim, dim): number of monomials of total degree <= degree in
/// dim variables.
inline std::size_t basis_size(int degree, int dim) {
  if (degree < 0 || dim < 1) throw Error("basis_size: degree >= 0 and dim >= 1 required");
  std::size_t num = 1;
  for (int i = 1; i <= dim; ++i) {
    num = num * static_cast<std::size_t>(degree + i) / static_cast<std::size_t>(i);
  }
  return num;
}

/// Multi-index set for the polynomial basis of total degree <= degree in dim
/// variables, ordered by total degree (intercept first) and within a degree
/// by descending lexicographic order of exponents, e.g. for degree 2, dim 2:
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
class MultiIndexSet {
 public:
  MultiIndexSet(int degree, int dim) : degree_(degree), dim_(dim) {
    const std::size_t m = basis_size(degree, dim);
    indices_.reserve(m);
    std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
    for (int total = 0; total <= degree; ++total) emit(alpha, 0, total);
  }

  int degree() const { return degree_; }
  int dim() const { return dim_; }
  std::size_t size() const { return indices_.size(); }
  const std::vector<std::vector<int>>& indices() const { return indices_; }

  /// Fills out[k] with the monomial prod_j t[j]^alpha_k[j]. The empty product
  /// convention applies, so 0^0 = 1 and the first entry is always 1.
  void eval_row(std::span<const double> t, std::span<double> out) const {
    if (t.size() != static_cast<std::size_t>(dim_))
      throw DimensionError("MultiIndexSet::eval_row: point dimension mismatch");
    if (out.size() != indices_.size())
      throw DimensionError("MultiIndexSet::eval_row: output size mismatch");
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      double v = 1.0;
      const std::vector<int>& alpha = indices_[k];
      for (int j = 0; j < dim_; ++j) {
        for (int e = 0; e < alpha[static_cast<std::size_t>(j)]; ++e) v *= t[static_cast<std::size_t>(j)];
      }
      out[k] = v;
    }
  }

  std::vector<double> eval_row(std::span<const double> t) const {
    std::vector<double> out(indices_.size());
    eval_row(t, out);
    return out;
  }

 private:
  // Enumerates exponents for positions pos.. summing to `remaining`, first
  // position taking the largest value, which yields descending lex order.
  void emit(std::vector<int>& alpha, int pos, int remaining) {
    if (pos == dim_ - 1) {
      alpha[static_cast<std::size_t>(pos)] = remaining;
      indices_.push_back(alpha);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      alpha[static_cast<std::size_t>(pos)] = e;
      emit(alpha, pos + 1, remaining - e);
    }
    alpha[static_cast<std::size_t>(pos)] = 0;
  }

  int degree_;
  int dim_;
  std::vector<std::vector<int>> indices_;
};

}  // namespace gclpr::basis
