#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dfsdca {

// All core arithmetic is double precision; dense storage only.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Sum of a sequence using recursive pairwise splitting. The association
// order depends only on the length, so serial and parallel callers that
// fill the same buffer get bit-identical totals.
double pairwise_sum(std::span<const double> values);

// Column-wise pairwise sum of a d x n matrix, returning a d-vector.
Vector pairwise_sum_columns(const Matrix& columns);

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace dfsdca
