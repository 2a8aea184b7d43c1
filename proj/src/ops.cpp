#include "gsa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gsa/contract.hpp"

namespace gsa {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Tensor out(a.shape());
    auto x = a.data();
    auto y = b.data();
    auto z = out.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
    return out;
}

// Maps every element to the flat index of its slice over the non-reduced axes.
std::vector<std::size_t> slice_ids(const Shape& shape, const std::vector<std::size_t>& axes, std::size_t& n_slices) {
    std::vector<bool> reduced(shape.size(), false);
    for (auto a : axes) {
        if (a >= shape.size()) throw ArgumentError("softmax axis " + std::to_string(a) + " out of range");
        reduced[a] = true;
    }
    std::vector<std::size_t> kept_stride(shape.size(), 0);
    n_slices = 1;
    for (std::size_t ax = shape.size(); ax-- > 0;) {
        if (!reduced[ax]) {
            kept_stride[ax] = n_slices;
            n_slices *= shape[ax];
        }
    }
    std::size_t total = shape_volume(shape);
    std::vector<std::size_t> ids(total);
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t id = 0;
    for (std::size_t f = 0; f < total; ++f) {
        ids[f] = id;
        for (std::size_t ax = shape.size(); ax-- > 0;) {
            id += kept_stride[ax];
            if (++idx[ax] < shape[ax]) break;
            id -= kept_stride[ax] * shape[ax];
            idx[ax] = 0;
        }
    }
    return ids;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor hadamard(const Tensor& a, const Tensor& b) {
    return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}
Tensor axpy(const Tensor& a, double s, const Tensor& b) {
    return zip(a, b, "axpy", [s](double x, double y) { return x + s * y; });
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (auto& v : out.data()) v *= s;
    return out;
}

Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (auto& v : out.data()) v = v < 0.0 ? 0.0 : v;
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad) {
    return zip(x, grad, "relu_backward", [](double xv, double g) { return xv > 0.0 ? g : 0.0; });
}

double sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s;
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data()) m = std::max(m, std::abs(v));
    return m;
}

Tensor softmax(const Tensor& t, const std::vector<std::size_t>& axes) {
    if (axes.empty()) throw ArgumentError("softmax requires at least one axis");
    std::size_t n_slices = 0;
    auto ids = slice_ids(t.shape(), axes, n_slices);
    std::vector<double> mx(n_slices, -std::numeric_limits<double>::infinity());
    std::vector<double> denom(n_slices, 0.0);
    auto x = t.data();
    for (std::size_t i = 0; i < x.size(); ++i) mx[ids[i]] = std::max(mx[ids[i]], x[i]);
    Tensor out(t.shape());
    auto y = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx[ids[i]]);
        denom[ids[i]] += y[i];
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= denom[ids[i]];
    return out;
}

Tensor softmax_backward(const Tensor& y, const Tensor& grad, const std::vector<std::size_t>& axes) {
    if (axes.empty()) throw ArgumentError("softmax requires at least one axis");
    require_same_shape(y, grad, "softmax_backward");
    std::size_t n_slices = 0;
    auto ids = slice_ids(y.shape(), axes, n_slices);
    std::vector<double> dot(n_slices, 0.0);
    auto yv = y.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < yv.size(); ++i) dot[ids[i]] += yv[i] * g[i];
    Tensor out(y.shape());
    auto o = out.data();
    for (std::size_t i = 0; i < yv.size(); ++i) o[i] = yv[i] * (g[i] - dot[ids[i]]);
    return out;
}

BatchNormState BatchNormState::identity(std::size_t channels) {
    BatchNormState s;
    s.gamma.assign(channels, 1.0);
    s.beta.assign(channels, 0.0);
    s.running_mean.assign(channels, 0.0);
    s.running_var.assign(channels, 1.0);
    return s;
}

void BatchNormState::validate() const {
    const std::size_t c = gamma.size();
    if (beta.size() != c || running_mean.size() != c || running_var.size() != c) {
        throw ShapeError("batch-norm state vectors have inconsistent lengths");
    }
    if (!(epsilon > 0.0)) throw ArgumentError("batch-norm epsilon must be positive");
    if (!(momentum > 0.0 && momentum < 1.0)) throw ArgumentError("batch-norm momentum must lie in (0, 1)");
    for (double v : running_var) {
        if (v < 0.0) throw ArgumentError("batch-norm running variance must be nonnegative");
    }
}

namespace {

std::size_t check_bn_channels(const Tensor& t, const BatchNormState& state) {
    state.validate();
    if (t.rank() == 0 || t.shape().back() != state.channels()) {
        throw ShapeError("batch_norm: channel axis of " + shape_to_string(t.shape()) + " does not match " +
                         std::to_string(state.channels()) + " state channels");
    }
    return state.channels();
}

}  // namespace

BatchNormResult batch_norm(const Tensor& t, const BatchNormState& state, Mode mode) {
    const std::size_t c = check_bn_channels(t, state);
    const std::size_t m = t.size() / c;
    auto x = t.data();

    BatchNormResult res{Tensor(t.shape()), state, {}};
    if (mode == Mode::train) {
        res.used.mean.assign(c, 0.0);
        res.used.var.assign(c, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) res.used.mean[i % c] += x[i];
        for (auto& v : res.used.mean) v /= static_cast<double>(m);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = x[i] - res.used.mean[i % c];
            res.used.var[i % c] += d * d;
        }
        for (auto& v : res.used.var) v /= static_cast<double>(m);
        for (std::size_t k = 0; k < c; ++k) {
            res.state.running_mean[k] = state.momentum * state.running_mean[k] + (1.0 - state.momentum) * res.used.mean[k];
            res.state.running_var[k] = state.momentum * state.running_var[k] + (1.0 - state.momentum) * res.used.var[k];
        }
    } else {
        res.used.mean = state.running_mean;
        res.used.var = state.running_var;
    }

    std::vector<double> inv(c);
    for (std::size_t k = 0; k < c; ++k) inv[k] = 1.0 / std::sqrt(res.used.var[k] + state.epsilon);
    auto y = res.out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t k = i % c;
        y[i] = state.gamma[k] * (x[i] - res.used.mean[k]) * inv[k] + state.beta[k];
    }
    return res;
}

BatchNormGrad batch_norm_backward(const Tensor& t, const BatchNormState& state, const BatchNormStats& used,
                                  Mode mode, const Tensor& grad) {
    const std::size_t c = check_bn_channels(t, state);
    require_same_shape(t, grad, "batch_norm_backward");
    const double m = static_cast<double>(t.size() / c);
    auto x = t.data();
    auto g = grad.data();

    std::vector<double> inv(c);
    for (std::size_t k = 0; k < c; ++k) inv[k] = 1.0 / std::sqrt(used.var[k] + state.epsilon);

    BatchNormGrad out{Tensor(t.shape()), std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t k = i % c;
        double xhat = (x[i] - used.mean[k]) * inv[k];
        out.gamma[k] += g[i] * xhat;
        out.beta[k] += g[i];
    }
    auto dx = out.input.data();
    if (mode == Mode::infer) {
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = g[i] * state.gamma[i % c] * inv[i % c];
        return out;
    }
    // dx = gamma * inv / m * (m * g - sum(g) - xhat * sum(g * xhat))
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t k = i % c;
        double xhat = (x[i] - used.mean[k]) * inv[k];
        dx[i] = state.gamma[k] * inv[k] / m * (m * g[i] - out.beta[k] - xhat * out.gamma[k]);
    }
    return out;
}

Tensor avg_pool_2x2(const Tensor& t) {
    if (t.rank() != 4) throw ShapeError("avg_pool_2x2 expects [b, H, W, C], got " + shape_to_string(t.shape()));
    const auto& s = t.shape();
    if (s[1] % 2 || s[2] % 2) throw ShapeError("avg_pool_2x2 needs even spatial extents, got " + shape_to_string(s));
    const std::size_t b = s[0], h = s[1] / 2, w = s[2] / 2, c = s[3];
    Tensor out({b, h, w, c});
    auto x = t.data();
    auto y = out.data();
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                for (std::size_t k = 0; k < c; ++k) {
                    auto src = [&](std::size_t di, std::size_t dj) {
                        return x[((n * s[1] + 2 * i + di) * s[2] + 2 * j + dj) * c + k];
                    };
                    y[((n * h + i) * w + j) * c + k] = 0.25 * (src(0, 0) + src(0, 1) + src(1, 0) + src(1, 1));
                }
    return out;
}

Tensor avg_pool_2x2_backward(const Tensor& grad) {
    if (grad.rank() != 4) throw ShapeError("avg_pool_2x2_backward expects [b, h, w, C]");
    const auto& s = grad.shape();
    const std::size_t b = s[0], h = s[1], w = s[2], c = s[3];
    Tensor out({b, 2 * h, 2 * w, c});
    auto g = grad.data();
    auto y = out.data();
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j)
                for (std::size_t k = 0; k < c; ++k)
                    y[((n * 2 * h + i) * 2 * w + j) * c + k] = 0.25 * g[((n * h + i / 2) * w + j / 2) * c + k];
    return out;
}

Tensor pointwise_conv(const Tensor& t, const Tensor& weights) {
    if (weights.rank() != 2) throw ShapeError("pointwise_conv weights must be (C_in, C_out)");
    if (t.rank() == 0 || t.shape().back() != weights.shape()[0]) {
        throw ShapeError("pointwise_conv: input channels of " + shape_to_string(t.shape()) +
                         " do not match weights " + shape_to_string(weights.shape()));
    }
    const std::size_t c_in = weights.shape()[0];
    Tensor flat = t.reshaped({t.size() / c_in, c_in});
    Tensor y = einsum("pd,de->pe", flat, weights);
    Shape out_shape = t.shape();
    out_shape.back() = weights.shape()[1];
    return y.reshaped(out_shape);
}

Tensor seeded_init(const Shape& shape, InitScheme scheme, std::uint64_t seed, std::optional<std::size_t> fan_in) {
    Tensor out(shape);
    switch (scheme) {
        case InitScheme::zeros:
            break;
        case InitScheme::ones:
            for (auto& v : out.data()) v = 1.0;
            break;
        case InitScheme::fan_in_normal: {
            std::size_t fi = fan_in.value_or(shape.size() > 1 ? shape_volume(shape) / shape.back() : 1);
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fi))));
            for (auto& v : out.data()) v = dist(rng);
            break;
        }
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Tensor random_normal(const Shape& shape, std::uint64_t seed) {
    Tensor out(shape);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : out.data()) v = dist(rng);
    return out;
}

}  // namespace gsa
