#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fedu {

// All numerics run in 64-bit floats; storage is row-major so that flat
// buffers, checkpoints, and CSV exports share one layout.
using Scalar = double;
using Index = Eigen::Index;

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
}

}  // namespace fedu
