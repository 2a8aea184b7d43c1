#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gsa/tensor.hpp"

namespace gsa {

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a + s * b
Tensor axpy(const Tensor& a, double s, const Tensor& b);
Tensor relu(const Tensor& t);
/// Gradient of relu evaluated at the forward input `x`.
Tensor relu_backward(const Tensor& x, const Tensor& grad);
double sum(const Tensor& t);
double max_abs(const Tensor& t);

// --- softmax ---------------------------------------------------------------

/// Softmax over the given axes; every slice of the remaining axes sums to one.
Tensor softmax(const Tensor& t, const std::vector<std::size_t>& axes);
/// Vector-Jacobian product of softmax given its output `y`.
Tensor softmax_backward(const Tensor& y, const Tensor& grad, const std::vector<std::size_t>& axes);

// --- batch normalization -----------------------------------------------------

enum class Mode { train, infer };

struct BatchNormState {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.9;

    static BatchNormState identity(std::size_t channels);
    std::size_t channels() const { return gamma.size(); }
    void validate() const;
};

/// Per-channel statistics actually used for normalization.
struct BatchNormStats {
    std::vector<double> mean;
    std::vector<double> var;
};

struct BatchNormResult {
    Tensor out;
    /// Updated running statistics in train mode; a copy of the input state in
    /// infer mode.
    BatchNormState state;
    BatchNormStats used;
};

/// Normalizes over every axis except the last (channel) axis. Train mode uses
/// biased batch statistics and blends them into the running statistics as
/// `running = momentum * running + (1 - momentum) * batch`.
BatchNormResult batch_norm(const Tensor& t, const BatchNormState& state, Mode mode);

struct BatchNormGrad {
    Tensor input;
    std::vector<double> gamma;
    std::vector<double> beta;
};

BatchNormGrad batch_norm_backward(const Tensor& t, const BatchNormState& state, const BatchNormStats& used,
                                  Mode mode, const Tensor& grad);

// --- spatial ---------------------------------------------------------------

/// 2x2 mean pooling with stride 2 on a [b, H, W, C] tensor with even H, W.
Tensor avg_pool_2x2(const Tensor& t);
Tensor avg_pool_2x2_backward(const Tensor& grad);

/// Per-pixel channel mixing: weights are (C_in, C_out), no bias.
Tensor pointwise_conv(const Tensor& t, const Tensor& weights);

// --- initialization ----------------------------------------------------------

enum class InitScheme { fan_in_normal, zeros, ones };

/// Deterministic given (shape, scheme, seed). fan_in_normal draws from
/// N(0, 1/fan_in); fan_in defaults to the product of all but the last extent.
Tensor seeded_init(const Shape& shape, InitScheme scheme, std::uint64_t seed,
                   std::optional<std::size_t> fan_in = std::nullopt);

/// Derives an independent sub-seed (splitmix64 finalizer over seed + salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Standard-normal tensor, used by tests and verification harnesses.
Tensor random_normal(const Shape& shape, std::uint64_t seed);

}  // namespace gsa
