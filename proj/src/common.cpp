#include "dfsdca/common.hpp"

namespace dfsdca {

namespace {

constexpr std::size_t kPairwiseBlock = 8;

double pairwise_sum_range(const double* data, std::size_t count) {
    if (count <= kPairwiseBlock) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += data[i];
        return s;
    }
    const std::size_t half = count / 2;
    return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, count - half);
}

Vector pairwise_columns_range(const Matrix& m, Eigen::Index begin, Eigen::Index count) {
    if (count <= static_cast<Eigen::Index>(kPairwiseBlock)) {
        Vector s = Vector::Zero(m.rows());
        for (Eigen::Index j = begin; j < begin + count; ++j) s += m.col(j);
        return s;
    }
    const Eigen::Index half = count / 2;
    return pairwise_columns_range(m, begin, half) + pairwise_columns_range(m, begin + half, count - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_range(values.data(), values.size());
}

Vector pairwise_sum_columns(const Matrix& columns) {
    return pairwise_columns_range(columns, 0, columns.cols());
}

}  // namespace dfsdca
