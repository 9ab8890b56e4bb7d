#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "biolm/common.hpp"

namespace biolm {

// Dense row-major tensor of doubles. All model math runs in double; the
// checkpoint container narrows to 32-bit floats on disk.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(numel_of(t.shape)), 0.0);
    return t;
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(size_t i) const { return shape.at(i); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace biolm
