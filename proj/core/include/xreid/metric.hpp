#pragma once

#include <span>

namespace xreid {

/// Euclidean distance sqrt(sum (x_i - y_i)^2). Throws ValidationError on
/// dimension mismatch.
double euclidean_distance(std::span<const double> x, std::span<const double> y);

/// Cosine of the included angle, x.y / (|x||y|), clamped to [-1, 1] against
/// round-off. A zero-magnitude argument throws NumericError: a silent 0
/// would mask a collapsed encoder.
double cosine_similarity(std::span<const double> x, std::span<const double> y);

/// 1 - cosine_similarity, in [0, 2].
double cosine_distance(std::span<const double> x, std::span<const double> y);

}  // namespace xreid
