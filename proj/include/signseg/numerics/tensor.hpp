#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "signseg/errors.hpp"

namespace signseg {

/// Dense row-major matrix of frames x channels. Rows are time steps.
template <class Scalar>
class Tensor2 {
 public:
  using value_type = Scalar;

  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, Scalar fill = Scalar(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<Scalar> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("Tensor2: data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  /// Builds from nested rows; all rows must have the same width.
  static Tensor2 from_rows(const std::vector<std::vector<Scalar>>& rows) {
    const std::size_t c = rows.empty() ? 0 : rows.front().size();
    Tensor2 out(rows.size(), c);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != c) throw DimensionError("Tensor2::from_rows: ragged rows");
      std::copy(rows[t].begin(), rows[t].end(), out.row(t).begin());
    }
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Scalar& operator()(std::size_t t, std::size_t c) { return data_[t * cols_ + c]; }
  const Scalar& operator()(std::size_t t, std::size_t c) const { return data_[t * cols_ + c]; }

  std::span<Scalar> row(std::size_t t) { return {data_.data() + t * cols_, cols_}; }
  std::span<const Scalar> row(std::size_t t) const { return {data_.data() + t * cols_, cols_}; }

  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }
  std::span<Scalar> values() noexcept { return data_; }
  std::span<const Scalar> values() const noexcept { return data_; }
  const std::vector<Scalar>& storage() const noexcept { return data_; }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor2& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
  }

  template <class Other>
  Tensor2<Other> cast() const {
    Tensor2<Other> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](Scalar v) { return static_cast<Other>(v); });
    return out;
  }

  friend bool operator==(const Tensor2& a, const Tensor2& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Scalar> data_;
};

/// Per-frame feature matrix (T x D), the model input.
template <class Scalar>
using FeatureSequence = Tensor2<Scalar>;

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace signseg
