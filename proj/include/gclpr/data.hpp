#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gclpr/error.hpp"
#include "gclpr/kernels.hpp"
#include "gclpr/linalg.hpp"

namespace gclpr {

/// One named context channel observed per row: either a numeric vector
/// (e.g. coordinates) or a categorical/node label.
struct ContextChannel {
  enum class Kind { numeric, label };

  std::string name;
  Kind kind = Kind::numeric;
  std::vector<std::vector<double>> numeric;
  std::vector<std::string> labels;

  std::size_t rows() const {
    return kind == Kind::numeric ? numeric.size() : labels.size();
  }

  kernels::ContextValue value(std::size_t row) const {
    if (kind == Kind::numeric) return numeric[row];
    return labels[row];
  }

  ContextChannel subset(std::span<const std::size_t> idx) const {
    ContextChannel out;
    out.name = name;
    out.kind = kind;
    if (kind == Kind::numeric) {
      out.numeric.reserve(idx.size());
      for (std::size_t i : idx) out.numeric.push_back(numeric[i]);
    } else {
      out.labels.reserve(idx.size());
      for (std::size_t i : idx) out.labels.push_back(labels[i]);
    }
    return out;
  }
};

/// A regression table: fitting coordinates z, any number of context
/// channels, an optional response y, optional row ids and an optional
/// chronological key.
struct Dataset {
  linalg::Matrix z;
  std::vector<ContextChannel> contexts;
  std::vector<double> y;
  std::vector<std::string> row_ids;
  std::vector<double> time;

  std::size_t rows() const { return z.rows(); }
  std::size_t dim() const { return z.cols(); }
  bool has_response() const { return !y.empty(); }

  const ContextChannel* find_context(const std::string& name) const {
    for (const auto& c : contexts)
      if (c.name == name) return &c;
    return nullptr;
  }

  const ContextChannel& require_context(const std::string& name) const {
    const ContextChannel* c = find_context(name);
    if (c == nullptr) throw DataError("dataset has no context channel '" + name + "'");
    return *c;
  }

  std::string row_id(std::size_t i) const {
    if (i < row_ids.size()) return row_ids[i];
    return std::to_string(i);
  }

  void validate() const {
    const std::size_t n = rows();
    if (!z.all_finite()) throw NonFiniteError("dataset: non-finite fitting coordinate");
    if (has_response()) {
      if (y.size() != n) throw DimensionError("dataset: response length mismatch");
      for (double v : y)
        if (!std::isfinite(v)) throw NonFiniteError("dataset: non-finite response");
    }
    for (const auto& c : contexts) {
      if (c.rows() != n)
        throw DimensionError("dataset: context channel '" + c.name + "' length mismatch");
      if (c.kind == ContextChannel::Kind::numeric)
        for (const auto& row : c.numeric)
          for (double v : row)
            if (!std::isfinite(v))
              throw NonFiniteError("dataset: non-finite context in '" + c.name + "'");
    }
    if (!row_ids.empty() && row_ids.size() != n)
      throw DimensionError("dataset: row id length mismatch");
    if (!time.empty() && time.size() != n) throw DimensionError("dataset: time length mismatch");
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.z = linalg::Matrix(idx.size(), z.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c) out.z(r, c) = z(idx[r], c);
    out.contexts.reserve(contexts.size());
    for (const auto& c : contexts) out.contexts.push_back(c.subset(idx));
    if (has_response()) {
      out.y.reserve(idx.size());
      for (std::size_t i : idx) out.y.push_back(y[i]);
    }
    if (!row_ids.empty()) {
      out.row_ids.reserve(idx.size());
      for (std::size_t i : idx) out.row_ids.push_back(row_ids[i]);
    }
    if (!time.empty()) {
      out.time.reserve(idx.size());
      for (std::size_t i : idx) out.time.push_back(time[i]);
    }
    return out;
  }
};

}  // namespace gclpr
