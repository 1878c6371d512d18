#include "xreid/metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

void check_same_dim(std::span<const double> x, std::span<const double> y,
                    const char* op) {
  if (x.size() != y.size()) {
    throw ValidationError(std::string(op) + ": dimension mismatch, " +
                          std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()));
  }
  if (x.empty()) {
    throw ValidationError(std::string(op) + ": empty vectors");
  }
}

}  // namespace

double euclidean_distance(std::span<const double> x, std::span<const double> y) {
  check_same_dim(x, y, "euclidean_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double cosine_similarity(std::span<const double> x, std::span<const double> y) {
  check_same_dim(x, y, "cosine_similarity");
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  if (nx == 0.0 || ny == 0.0) {
    throw NumericError("cosine_similarity: zero-magnitude vector");
  }
  double c = dot / (std::sqrt(nx) * std::sqrt(ny));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_distance(std::span<const double> x, std::span<const double> y) {
  return 1.0 - cosine_similarity(x, y);
}

}  // namespace xreid
