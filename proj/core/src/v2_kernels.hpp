#pragma once

#include <Eigen/Dense>

#include "v2tex/v2_stage.hpp"

namespace v2tex::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMatrix> theta_map(const V2Params& params) {
  return {params.theta.data(), params.d, static_cast<Eigen::Index>(params.row_length())};
}

// Patch matrix, one row per conv output position, one column per
// (channel, ky, kx) tap in theta's row order.
Eigen::MatrixXd im2col_transposed(const V1Response& v1, int kernel, int conv_height,
                                  int conv_width);
void im2col_transposed(const V1Response& v1, int kernel, int conv_height, int conv_width,
                       Eigen::MatrixXd& patches);

// Per-thread scratch for the patch matrix; large enough to be worth keeping
// out of the allocator.
Eigen::MatrixXd& patch_scratch();

struct ConvActivations {
  Eigen::MatrixXd rectified;  // d x positions, after max(0, .)
  V2Response pooled;          // d x pooled grid
};

ConvActivations conv_relu_pool(const V1Response& v1, const V2Params& params);

}  // namespace v2tex::detail
