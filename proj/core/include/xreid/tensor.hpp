#pragma once

#include <cassert>
#include <vector>

namespace xreid {

// Dense row-major matrix of doubles. Column vectors are n x 1, scalars 1 x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor column(std::vector<double> v) {
    Tensor t;
    t.rows = static_cast<int>(v.size());
    t.cols = 1;
    t.data = std::move(v);
    return t;
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }

  double scalar_value() const {
    assert(is_scalar());
    return data[0];
  }
};

}  // namespace xreid
