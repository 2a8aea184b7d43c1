#pragma once

#include <cstddef>
#include <vector>

#include "gsa/tensor.hpp"

namespace gsa {

/// Dense 2-D convolution on [b, H, W, C_in] with weights [kh, kw, C_in, C_out],
/// zero padding, no bias. Every kernel tap is counted as one MAC, padded or not.
Tensor conv2d(const Tensor& x, const Tensor& weights, std::size_t stride, std::size_t pad);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// 3x3 max pooling, stride 2, padding 1 (the ResNet stem pool).
Tensor max_pool_3x3_s2(const Tensor& x);

/// [b, H, W, C] -> [b, C]
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad, const Shape& input_shape);

/// x [b, in] * weights [in, out] + bias [out]
Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct CrossEntropy {
    double loss = 0.0;     ///< mean over the batch
    Tensor grad_logits;    ///< d loss / d logits
};

CrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

}  // namespace gsa
