#include "gsa/toy.hpp"

#include <cmath>
#include <ostream>

#include "gsa/contract.hpp"
#include "gsa/layers.hpp"
#include "gsa/ops.hpp"

namespace gsa {

void ToySpec::validate() const {
    std::string problems;
    auto need = [&](bool ok, const char* msg) {
        if (!ok) problems += std::string(problems.empty() ? "" : "; ") + msg;
    };
    need(blocks >= 1 && blocks <= 3, "blocks must be in [1, 3]");
    need(image_size >= 1 && image_size <= 32, "image_size must be in [1, 32]");
    need(channels >= 1, "channels must be positive");
    need(num_classes >= 2, "num_classes must be at least 2");
    need(samples_per_class >= 1, "samples_per_class must be positive");
    need(heads >= 1 && width % heads == 0, "width must be a positive multiple of heads");
    need(noise >= 0.0 && lr >= 0.0 && momentum >= 0.0 && momentum < 1.0, "noise, lr must be >= 0 and momentum in [0, 1)");
    if (!problems.empty()) throw ArgumentError("invalid toy spec: " + problems);
}

ToyDataset make_toy_dataset(const ToySpec& spec) {
    spec.validate();
    const std::size_t s = spec.image_size, c = spec.channels;
    const std::size_t n = spec.num_classes * spec.samples_per_class;
    const Tensor templates = random_normal({spec.num_classes, s, s, c}, mix_seed(spec.seed, 101));
    const Tensor noise = random_normal({n, s, s, c}, mix_seed(spec.seed, 102));
    ToyDataset d{Tensor({n, s, s, c}), {}};
    const std::size_t img = s * s * c;
    auto out = d.images.data();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % spec.num_classes;
        d.labels.push_back(label);
        for (std::size_t e = 0; e < img; ++e) {
            out[i * img + e] = templates[label * img + e] + spec.noise * noise[i * img + e];
        }
    }
    return d;
}

ToyModel build_toy_model(const ToySpec& spec) {
    spec.validate();
    ToyModel m;
    for (std::size_t b = 0; b < spec.blocks; ++b) {
        GsaConfig cfg;
        cfg.d_in = b == 0 ? spec.channels : spec.width;
        cfg.d_k = cfg.d_out = spec.width;
        cfg.n_heads = spec.heads;
        cfg.height = cfg.width = spec.image_size;
        cfg.validate();
        m.configs.push_back(cfg);
        m.blocks.push_back(GsaParams::init(cfg, mix_seed(spec.seed, 200 + b)));
    }
    m.fc_weight = spec.zero_head ? Tensor({spec.width, spec.num_classes})
                                 : seeded_init({spec.width, spec.num_classes}, InitScheme::fan_in_normal,
                                               mix_seed(spec.seed, 300));
    m.fc_bias = Tensor({spec.num_classes});
    return m;
}

namespace {

struct Forward {
    std::vector<Tensor> inputs;  ///< input of each block
    std::vector<Tensor> pre_relu;
    std::vector<GsaParams> updated;
    Tensor features;
    Tensor pooled;
    Tensor logits;
};

Forward run_forward(const ToyModel& m, const Tensor& x) {
    Forward f;
    Tensor h = x;
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        f.inputs.push_back(h);
        GsaTrace t = gsa_forward_trace(h, m.blocks[b], m.configs[b], Mode::train);
        f.pre_relu.push_back(t.out);
        f.updated.push_back(std::move(t.updated));
        h = relu(f.pre_relu.back());
    }
    f.features = h;
    f.pooled = global_avg_pool(h);
    f.logits = linear(f.pooled, m.fc_weight, m.fc_bias);
    return f;
}

void copy_running(BatchNormState& dst, const BatchNormState& src) {
    dst.running_mean = src.running_mean;
    dst.running_var = src.running_var;
}

void sgd_update(std::span<double> p, std::span<const double> g, std::vector<double>& vel, double lr, double mu) {
    if (vel.size() != p.size()) vel.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        vel[i] = mu * vel[i] + g[i];
        p[i] -= lr * vel[i];
    }
}

}  // namespace

ToyEval evaluate_toy(const ToyModel& model, const ToyDataset& data) {
    Forward f = run_forward(model, data.images);
    ToyEval e;
    e.loss = softmax_cross_entropy(f.logits, data.labels).loss;
    e.logits = std::move(f.logits);
    return e;
}

ToyResult train_toy(const ToySpec& spec) {
    const ToyDataset data = make_toy_dataset(spec);
    ToyModel m = build_toy_model(spec);
    ToyResult result;
    std::vector<std::vector<double>> velocity;

    for (std::size_t step = 0; step <= spec.steps; ++step) {
        Forward f = run_forward(m, data.images);
        CrossEntropy ce = softmax_cross_entropy(f.logits, data.labels);
        result.losses.push_back(ce.loss);
        if (!std::isfinite(ce.loss)) {
            result.divergence_step = step;
            break;
        }
        if (step == spec.steps) break;

        const Tensor d_fc_w = einsum("bi,bo->io", f.pooled, ce.grad_logits);
        const Tensor d_fc_b = einsum("bo->o", ce.grad_logits);
        Tensor grad = global_avg_pool_backward(einsum("bo,io->bi", ce.grad_logits, m.fc_weight), f.features.shape());

        std::vector<GsaParams> block_grads(m.blocks.size());
        for (std::size_t b = m.blocks.size(); b-- > 0;) {
            grad = relu_backward(f.pre_relu[b], grad);
            GsaGradients g = gsa_backward(f.inputs[b], m.blocks[b], m.configs[b], grad, Mode::train);
            grad = std::move(g.input);
            block_grads[b] = std::move(g.params);
        }

        std::size_t slot = 0;
        auto update = [&](std::span<double> p, std::span<const double> g) {
            if (velocity.size() <= slot) velocity.emplace_back();
            sgd_update(p, g, velocity[slot++], spec.lr, spec.momentum);
        };
        for (std::size_t b = 0; b < m.blocks.size(); ++b) {
            auto params = list_parameters(m.blocks[b], m.configs[b]);
            auto grads = list_parameters(block_grads[b], m.configs[b]);
            for (std::size_t i = 0; i < params.size(); ++i) update(params[i].values, grads[i].values);
            copy_running(m.blocks[b].kqv.bn_k, f.updated[b].kqv.bn_k);
            copy_running(m.blocks[b].kqv.bn_q, f.updated[b].kqv.bn_q);
            copy_running(m.blocks[b].kqv.bn_v, f.updated[b].kqv.bn_v);
            copy_running(m.blocks[b].bn_mid, f.updated[b].bn_mid);
            copy_running(m.blocks[b].bn_out, f.updated[b].bn_out);
        }
        update(m.fc_weight.data(), d_fc_w.data());
        update(m.fc_bias.data(), d_fc_b.data());
    }
    return result;
}

void write_loss_csv(std::ostream& os, const ToyResult& result) {
    os << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", result.losses[i]);
        os << i << "," << buf << "\n";
    }
}

}  // namespace gsa
