#include "gsa/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsa/contract.hpp"
#include "gsa/ops.hpp"
#include "gsa/runtime.hpp"

namespace gsa {

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    if (in + 2 * pad < kernel) throw ShapeError("convolution kernel larger than padded input");
    return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& weights, std::size_t stride, std::size_t pad) {
    if (x.rank() != 4 || weights.rank() != 4 || x.shape()[3] != weights.shape()[2]) {
        throw ShapeError("conv2d: input " + shape_to_string(x.shape()) + " incompatible with weights " +
                         shape_to_string(weights.shape()));
    }
    if (stride == 0) throw ArgumentError("conv2d stride must be positive");
    const std::size_t b = x.shape()[0], h = x.shape()[1], w = x.shape()[2], cin = x.shape()[3];
    const std::size_t kh = weights.shape()[0], kw = weights.shape()[1], cout = weights.shape()[3];
    const std::size_t ho = conv_output_extent(h, kh, stride, pad);
    const std::size_t wo = conv_output_extent(w, kw, stride, pad);

    Tensor out({b, ho, wo, cout});
    FlopCounter::record_macs(static_cast<std::uint64_t>(b) * ho * wo * cout * kh * kw * cin);
    const double* src = x.data().data();
    const double* wt = weights.data().data();
    double* dst = out.data().data();

    parallel_for(b * ho, 1, [&](std::size_t begin, std::size_t end) {
        for (std::size_t row = begin; row < end; ++row) {
            const std::size_t n = row / ho, oy = row % ho;
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double* acc = dst + ((n * ho + oy) * wo + ox) * cout;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const double* px = src + ((n * h + iy) * w + ix) * cin;
                        const double* wk = wt + (ky * kw + kx) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double xv = px[ci];
                            const double* wrow = wk + ci * cout;
                            for (std::size_t co = 0; co < cout; ++co) acc[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    });
    return out;
}

Tensor max_pool_3x3_s2(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("max_pool expects [b, H, W, C]");
    const std::size_t b = x.shape()[0], h = x.shape()[1], w = x.shape()[2], c = x.shape()[3];
    const std::size_t ho = conv_output_extent(h, 3, 2, 1), wo = conv_output_extent(w, 3, 2, 1);
    Tensor out({b, ho, wo, c}, -std::numeric_limits<double>::infinity());
    auto s = x.data();
    auto d = out.data();
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox)
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        for (std::size_t k = 0; k < c; ++k) {
                            double& o = d[((n * ho + oy) * wo + ox) * c + k];
                            o = std::max(o, s[((n * h + iy) * w + ix) * c + k]);
                        }
                    }
                }
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("global_avg_pool expects [b, H, W, C]");
    const std::size_t b = x.shape()[0], pix = x.shape()[1] * x.shape()[2], c = x.shape()[3];
    Tensor out({b, c});
    auto s = x.data();
    auto d = out.data();
    for (std::size_t n = 0; n < b; ++n) {
        for (std::size_t p = 0; p < pix; ++p)
            for (std::size_t k = 0; k < c; ++k) d[n * c + k] += s[(n * pix + p) * c + k];
        for (std::size_t k = 0; k < c; ++k) d[n * c + k] /= static_cast<double>(pix);
    }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& grad, const Shape& input_shape) {
    Tensor out(input_shape);
    const std::size_t b = input_shape[0], pix = input_shape[1] * input_shape[2], c = input_shape[3];
    auto g = grad.data();
    auto d = out.data();
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t p = 0; p < pix; ++p)
            for (std::size_t k = 0; k < c; ++k) d[(n * pix + p) * c + k] = g[n * c + k] / static_cast<double>(pix);
    return out;
}

Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    if (bias.rank() != 1 || weights.rank() != 2 || bias.shape()[0] != weights.shape()[1]) {
        throw ShapeError("linear: bias " + shape_to_string(bias.shape()) + " does not match weights " +
                         shape_to_string(weights.shape()));
    }
    Tensor y = einsum("bi,io->bo", x, weights);
    const std::size_t o = bias.shape()[0];
    auto d = y.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += bias[i % o];
    return y;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2 || logits.shape()[0] != labels.size()) {
        throw ShapeError("cross entropy: logits " + shape_to_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t b = logits.shape()[0], k = logits.shape()[1];
    CrossEntropy ce;
    ce.grad_logits = softmax(logits, {1});
    auto p = ce.grad_logits.data();
    for (std::size_t n = 0; n < b; ++n) {
        if (labels[n] >= k) throw ArgumentError("label out of range");
        // log-softmax via max subtraction for accuracy
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits[n * k + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(logits[n * k + j] - mx);
        ce.loss += -(logits[n * k + labels[n]] - mx - std::log(z));
        p[n * k + labels[n]] -= 1.0;
    }
    ce.loss /= static_cast<double>(b);
    for (auto& v : p) v /= static_cast<double>(b);
    return ce;
}

}  // namespace gsa
