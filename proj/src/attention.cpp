#include "gsa/attention.hpp"

#include <sstream>

#include "gsa/contract.hpp"
#include "gsa/runtime.hpp"

namespace gsa {

void GsaConfig::validate() const {
    std::vector<std::string> problems;
    if (d_in == 0 || d_k == 0 || d_out == 0) problems.push_back("channel counts must be positive");
    if (n_heads == 0) {
        problems.push_back("n_heads must be positive");
    } else {
        if (d_k % n_heads) problems.push_back("d_k (" + std::to_string(d_k) + ") not divisible by n_heads");
        if (d_out % n_heads) problems.push_back("d_out (" + std::to_string(d_out) + ") not divisible by n_heads");
    }
    if (height == 0 || width == 0) problems.push_back("spatial extents must be positive");
    if (window > std::max(height, width)) {
        problems.push_back("window " + std::to_string(window) + " exceeds max(h, w) = " +
                           std::to_string(std::max(height, width)));
    }
    if (!content_on && !col_on && !row_on) problems.push_back("at least one branch must be enabled");
    if (problems.empty()) return;
    std::string msg = "invalid GSA config:";
    for (auto& p : problems) msg += " " + p + ";";
    throw ArgumentError(msg);
}

std::string GsaConfig::describe() const {
    std::ostringstream os;
    os << "d_in=" << d_in << " d_k=" << d_k << " d_out=" << d_out << " heads=" << n_heads << " hw=" << height
       << "x" << width << " L=" << radius() << " branches=" << (content_on ? 'C' : '-') << (col_on ? 'H' : '-')
       << (row_on ? 'W' : '-');
    if (softmax_on_queries) os << " qsoftmax";
    if (axial_content) os << " axial-content";
    return os.str();
}

GsaParams GsaParams::init(const GsaConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    GsaParams p;
    p.kqv.w_k = seeded_init({cfg.d_in, cfg.d_k}, InitScheme::fan_in_normal, mix_seed(seed, 1));
    p.kqv.w_q = seeded_init({cfg.d_in, cfg.d_k}, InitScheme::fan_in_normal, mix_seed(seed, 2));
    p.kqv.w_v = seeded_init({cfg.d_in, cfg.d_out}, InitScheme::fan_in_normal, mix_seed(seed, 3));
    p.kqv.bn_k = BatchNormState::identity(cfg.d_k);
    p.kqv.bn_q = BatchNormState::identity(cfg.d_k);
    p.kqv.bn_v = BatchNormState::identity(cfg.d_out);
    const std::size_t c = cfg.key_head_dim();
    p.emb.r_col = seeded_init({2 * cfg.height - 1, c}, InitScheme::fan_in_normal, mix_seed(seed, 4), c);
    p.emb.r_row = seeded_init({2 * cfg.width - 1, c}, InitScheme::fan_in_normal, mix_seed(seed, 5), c);
    p.bn_mid = BatchNormState::identity(cfg.d_out);
    p.bn_out = BatchNormState::identity(cfg.d_out);
    return p;
}

namespace {

BatchNormState zero_state(const BatchNormState& s) {
    BatchNormState z = s;
    for (auto* v : {&z.gamma, &z.beta, &z.running_mean, &z.running_var}) std::fill(v->begin(), v->end(), 0.0);
    return z;
}

}  // namespace

GsaParams GsaParams::zeros_like(const GsaParams& p) {
    GsaParams z;
    z.kqv.w_k = Tensor(p.kqv.w_k.shape());
    z.kqv.w_q = Tensor(p.kqv.w_q.shape());
    z.kqv.w_v = Tensor(p.kqv.w_v.shape());
    z.kqv.bn_k = zero_state(p.kqv.bn_k);
    z.kqv.bn_q = zero_state(p.kqv.bn_q);
    z.kqv.bn_v = zero_state(p.kqv.bn_v);
    z.emb.r_col = Tensor(p.emb.r_col.shape());
    z.emb.r_row = Tensor(p.emb.r_row.shape());
    z.bn_mid = zero_state(p.bn_mid);
    z.bn_out = zero_state(p.bn_out);
    return z;
}

std::vector<ParamRef> list_parameters(GsaParams& p, const GsaConfig& cfg, bool active_only, bool include_buffers) {
    std::vector<ParamRef> out;
    auto tensor = [&](const std::string& name, Tensor& t) { out.push_back({name, t.shape(), t.data(), true}); };
    auto bn = [&](const std::string& name, BatchNormState& s) {
        const Shape shape{s.channels()};
        out.push_back({name + ".gamma", shape, s.gamma, true});
        out.push_back({name + ".beta", shape, s.beta, true});
        if (include_buffers) {
            out.push_back({name + ".running_mean", shape, s.running_mean, false});
            out.push_back({name + ".running_var", shape, s.running_var, false});
        }
    };
    const bool use_k = !active_only || cfg.content_on;
    if (use_k) tensor("W_K", p.kqv.w_k);
    tensor("W_Q", p.kqv.w_q);
    tensor("W_V", p.kqv.w_v);
    if (use_k) bn("bn_k", p.kqv.bn_k);
    bn("bn_q", p.kqv.bn_q);
    bn("bn_v", p.kqv.bn_v);
    if (!active_only || cfg.col_on) tensor("R_col", p.emb.r_col);
    if (!active_only || cfg.row_on) tensor("R_row", p.emb.r_row);
    if (!active_only || (cfg.col_on && cfg.row_on)) bn("bn_mid", p.bn_mid);
    bn("bn_out", p.bn_out);
    return out;
}

namespace {

void require_rank5(const Tensor& t, const char* what) {
    if (t.rank() != 5) throw ShapeError(std::string(what) + " must be [b, h, w, heads, channels], got " + shape_to_string(t.shape()));
}

Tensor split_heads(const Tensor& t, std::size_t heads) {
    const auto& s = t.shape();
    return t.reshaped({s[0], s[1], s[2], heads, s[3] / heads});
}

Tensor merge_heads(const Tensor& t) {
    const auto& s = t.shape();
    return t.reshaped({s[0], s[1], s[2], s[3] * s[4]});
}

void check_input(const Tensor& x, const GsaConfig& cfg) {
    if (x.rank() != 4 || x.shape()[1] != cfg.height || x.shape()[2] != cfg.width || x.shape()[3] != cfg.d_in) {
        throw ShapeError("GSA input " + shape_to_string(x.shape()) + " does not match config (" + cfg.describe() + ")");
    }
}

void check_weights(const KqvWeights& w, const GsaConfig& cfg) {
    auto expect = [](const Tensor& t, Shape s, const char* name) {
        if (t.shape() != s) {
            throw ShapeError(std::string(name) + " has shape " + shape_to_string(t.shape()) + ", expected " + shape_to_string(s));
        }
    };
    if (cfg.content_on) expect(w.w_k, {cfg.d_in, cfg.d_k}, "W_K");
    expect(w.w_q, {cfg.d_in, cfg.d_k}, "W_Q");
    expect(w.w_v, {cfg.d_in, cfg.d_out}, "W_V");
}

// --- content passes ---------------------------------------------------------

enum class Scope { global, column, row };

struct ScopeSpec {
    std::vector<std::size_t> softmax_axes;
    std::string context;  // labels of the context tensor
};

ScopeSpec scope_spec(Scope s) {
    switch (s) {
        case Scope::global: return {{1, 2}, "bnkv"};
        case Scope::column: return {{1}, "bynkv"};
        case Scope::row: return {{2}, "bxnkv"};
    }
    return {};
}

void check_content_operands(const Tensor& k, const Tensor& q, const Tensor& v) {
    require_rank5(k, "K");
    require_rank5(q, "Q");
    require_rank5(v, "V");
    if (k.shape() != q.shape()) throw ShapeError("K and Q shapes differ: " + shape_to_string(k.shape()) + " vs " + shape_to_string(q.shape()));
    for (std::size_t ax = 0; ax < 4; ++ax) {
        if (k.shape()[ax] != v.shape()[ax]) {
            throw ShapeError("V " + shape_to_string(v.shape()) + " incompatible with K " + shape_to_string(k.shape()));
        }
    }
}

ContentPass content_pass(const Tensor& k, const Tensor& q, const Tensor& v, Scope scope, bool softmax_queries) {
    check_content_operands(k, q, v);
    const auto sp = scope_spec(scope);
    ContentPass p;
    p.k_hat = softmax(k, sp.softmax_axes);
    p.q_eff = softmax_queries ? softmax(q, {4}) : q;
    p.values = v;
    p.context = einsum("bxynk,bxynv->" + sp.context, p.k_hat, v);
    p.out = einsum("bxynk," + sp.context + "->bxynv", p.q_eff, p.context);
    return p;
}

struct ContentGrad {
    Tensor k, q, v;
};

ContentGrad content_pass_backward(const ContentPass& p, const Tensor& grad, Scope scope, bool softmax_queries) {
    const auto sp = scope_spec(scope);
    const std::string& c = sp.context;
    Tensor dq_eff = einsum("bxynv," + c + "->bxynk", grad, p.context);
    Tensor dctx = einsum("bxynk,bxynv->" + c, p.q_eff, grad);
    Tensor dk_hat = einsum(c + ",bxynv->bxynk", dctx, p.values);
    Tensor dv = einsum("bxynk," + c + "->bxynv", p.k_hat, dctx);
    Tensor dk = softmax_backward(p.k_hat, dk_hat, sp.softmax_axes);
    Tensor dq = softmax_queries ? softmax_backward(p.q_eff, dq_eff, {4}) : dq_eff;
    return {std::move(dk), std::move(dq), std::move(dv)};
}

// --- positional passes --------------------------------------------------------

struct AxisSpec {
    std::string reindex;  // I, R -> P
    std::string scores;   // Q, P -> S
    std::string apply;    // S, V -> Y
    std::string d_scores; // dY, V -> dS
    std::string d_values; // S, dY -> dV
    std::string d_query;  // dS, P -> dQ
    std::string d_embed;  // dS, Q -> dP
    std::string d_reindex;  // I, dP -> dR
};

const AxisSpec& axis_spec(Axis axis) {
    static const AxisSpec col{"xir,rk->xik",       "bxynk,xik->bxyin", "bxyin,biynv->bxynv",
                              "bxynv,biynv->bxyin", "bxyin,bxynv->biynv", "bxyin,xik->bxynk",
                              "bxyin,bxynk->xik",   "xir,xik->rk"};
    static const AxisSpec row{"yjr,rk->yjk",       "bxynk,yjk->bxyjn", "bxyjn,bxjnv->bxynv",
                              "bxynv,bxjnv->bxyjn", "bxyjn,bxynv->bxjnv", "bxyjn,yjk->bxynk",
                              "bxyjn,bxynk->yjk",   "yjr,yjk->rk"};
    return axis == Axis::col ? col : row;
}

std::size_t axis_extent(Axis axis, const GsaConfig& cfg) { return axis == Axis::col ? cfg.height : cfg.width; }

void check_positional_operands(const Tensor& q, const Tensor& v, const Tensor& r, Axis axis, const GsaConfig& cfg) {
    require_rank5(q, "Q");
    require_rank5(v, "V");
    for (std::size_t ax = 0; ax < 4; ++ax) {
        if (q.shape()[ax] != v.shape()[ax]) throw ShapeError("Q and V spatial/head extents differ");
    }
    if (q.shape()[1] != cfg.height || q.shape()[2] != cfg.width) {
        throw ShapeError("positional attention input " + shape_to_string(q.shape()) + " does not match config");
    }
    const std::size_t n = axis_extent(axis, cfg);
    if (r.rank() != 2 || r.shape()[0] != 2 * n - 1 || r.shape()[1] != q.shape()[4]) {
        throw ShapeError(std::string(axis == Axis::col ? "R_col" : "R_row") + " has shape " + shape_to_string(r.shape()) +
                         ", expected (" + std::to_string(2 * n - 1) + "," + std::to_string(q.shape()[4]) + ")");
    }
}

Tensor absolute_embedding(const Tensor& r, Axis axis, const GsaConfig& cfg) {
    FlopPause pause;
    Tensor reindex = build_reindex_tensor(axis_extent(axis, cfg), cfg.radius());
    return einsum(axis_spec(axis).reindex, reindex, r);
}

struct AxisGrad {
    Tensor q, v, r;
};

AxisGrad positional_axis_backward(const Tensor& q, const Tensor& v, const Tensor& p, Axis axis, const GsaConfig& cfg,
                                  const Tensor& grad) {
    const auto& sp = axis_spec(axis);
    Tensor scores = einsum(sp.scores, q, p);
    Tensor d_scores = einsum(sp.d_scores, grad, v);
    AxisGrad g;
    g.v = einsum(sp.d_values, scores, grad);
    g.q = einsum(sp.d_query, d_scores, p);
    Tensor dp = einsum(sp.d_embed, d_scores, q);
    FlopPause pause;
    Tensor reindex = build_reindex_tensor(axis_extent(axis, cfg), cfg.radius());
    g.r = einsum(sp.d_reindex, reindex, dp);
    return g;
}

Tensor apply_axis(const Tensor& q, const Tensor& v, const Tensor& p, Axis axis) {
    const auto& sp = axis_spec(axis);
    Tensor scores = einsum(sp.scores, q, p);
    return einsum(sp.apply, scores, v);
}

Tensor bn_on_heads(const Tensor& t5, const BatchNormState& state, Mode mode, BatchNormStats* stats,
                   BatchNormState* updated) {
    auto res = batch_norm(merge_heads(t5), state, mode);
    if (stats) *stats = res.used;
    if (updated) *updated = res.state;
    return split_heads(res.out, t5.shape()[3]);
}

}  // namespace

Heads kqv_project(const Tensor& x, const KqvWeights& w, const GsaConfig& cfg, Mode mode) {
    cfg.validate();
    check_input(x, cfg);
    check_weights(w, cfg);
    Heads h;
    if (cfg.content_on) h.k = split_heads(batch_norm(pointwise_conv(x, w.w_k), w.bn_k, mode).out, cfg.n_heads);
    h.q = split_heads(batch_norm(pointwise_conv(x, w.w_q), w.bn_q, mode).out, cfg.n_heads);
    h.v = split_heads(batch_norm(pointwise_conv(x, w.w_v), w.bn_v, mode).out, cfg.n_heads);
    return h;
}

Tensor content_attention(const Tensor& k, const Tensor& q, const Tensor& v, const GsaConfig& cfg) {
    return content_pass(k, q, v, Scope::global, cfg.softmax_on_queries).out;
}

Tensor axial_content_attention(const Tensor& k, const Tensor& q, const Tensor& v, const GsaConfig& cfg) {
    Tensor col = content_pass(k, q, v, Scope::column, cfg.softmax_on_queries).out;
    return content_pass(k, q, col, Scope::row, cfg.softmax_on_queries).out;
}

Tensor build_reindex_tensor(std::size_t extent, std::size_t radius) {
    if (extent == 0) throw ArgumentError("re-index extent must be positive");
    const std::size_t rows = 2 * extent - 1;
    Tensor out({extent, extent, rows});
    for (std::size_t x = 0; x < extent; ++x) {
        for (std::size_t i = 0; i < extent; ++i) {
            const std::size_t dist = x > i ? x - i : i - x;
            if (dist <= radius) out[(x * extent + i) * rows + (i + extent - 1 - x)] = 1.0;
        }
    }
    return out;
}

Tensor positional_attention_axis(const Tensor& q, const Tensor& v, const Tensor& r, Axis axis, const GsaConfig& cfg) {
    check_positional_operands(q, v, r, axis, cfg);
    return apply_axis(q, v, absolute_embedding(r, axis, cfg), axis);
}

Tensor positional_attention(const Tensor& q, const Tensor& v, const RelPosEmbedding& emb, const BatchNormState& bn_mid,
                            const GsaConfig& cfg, Mode mode) {
    if (!cfg.positional_on()) throw ArgumentError("positional attention needs col_on or row_on");
    Tensor values = v;
    if (cfg.col_on) {
        values = positional_attention_axis(q, values, emb.r_col, Axis::col, cfg);
        if (!cfg.row_on) return values;
        values = bn_on_heads(values, bn_mid, mode, nullptr, nullptr);
    }
    return positional_attention_axis(q, values, emb.r_row, Axis::row, cfg);
}

GsaTrace gsa_forward_trace(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, Mode mode) {
    cfg.validate();
    check_input(x, cfg);
    check_weights(params.kqv, cfg);

    GsaTrace t;
    t.x = x;
    t.updated = params;
    const auto& w = params.kqv;
    if (cfg.content_on) {
        t.k_raw = pointwise_conv(x, w.w_k);
        auto bk = batch_norm(t.k_raw, w.bn_k, mode);
        t.k_stats = bk.used;
        t.updated.kqv.bn_k = bk.state;
        t.heads.k = split_heads(bk.out, cfg.n_heads);
    }
    t.q_raw = pointwise_conv(x, w.w_q);
    auto bq = batch_norm(t.q_raw, w.bn_q, mode);
    t.q_stats = bq.used;
    t.updated.kqv.bn_q = bq.state;
    t.heads.q = split_heads(bq.out, cfg.n_heads);

    t.v_raw = pointwise_conv(x, w.w_v);
    auto bv = batch_norm(t.v_raw, w.bn_v, mode);
    t.v_stats = bv.used;
    t.updated.kqv.bn_v = bv.state;
    t.heads.v = split_heads(bv.out, cfg.n_heads);

    const Tensor& q = t.heads.q;
    const Tensor& v = t.heads.v;
    Tensor sum(v.shape());

    if (cfg.content_on) {
        if (cfg.axial_content) {
            t.content.push_back(content_pass(*t.heads.k, q, v, Scope::column, cfg.softmax_on_queries));
            t.content.push_back(content_pass(*t.heads.k, q, t.content[0].out, Scope::row, cfg.softmax_on_queries));
        } else {
            t.content.push_back(content_pass(*t.heads.k, q, v, Scope::global, cfg.softmax_on_queries));
        }
        t.content_out = t.content.back().out;
        sum = add(sum, t.content_out);
    }

    if (cfg.positional_on()) {
        t.row_values = v;
        if (cfg.col_on) {
            check_positional_operands(q, v, params.emb.r_col, Axis::col, cfg);
            t.p_col = absolute_embedding(params.emb.r_col, Axis::col, cfg);
            t.col_out = apply_axis(q, v, t.p_col, Axis::col);
            t.positional_out = t.col_out;
            if (cfg.row_on) {
                t.mid = bn_on_heads(t.col_out, params.bn_mid, mode, &t.mid_stats, &t.updated.bn_mid);
                t.row_values = t.mid;
            }
        }
        if (cfg.row_on) {
            check_positional_operands(q, t.row_values, params.emb.r_row, Axis::row, cfg);
            t.p_row = absolute_embedding(params.emb.r_row, Axis::row, cfg);
            t.row_out = apply_axis(q, t.row_values, t.p_row, Axis::row);
            t.positional_out = t.row_out;
        }
        sum = add(sum, t.positional_out);
    }

    t.pre_norm = merge_heads(sum);
    auto bo = batch_norm(t.pre_norm, params.bn_out, mode);
    t.out_stats = bo.used;
    t.updated.bn_out = bo.state;
    t.out = std::move(bo.out);
    return t;
}

Tensor gsa_forward(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, Mode mode) {
    return gsa_forward_trace(x, params, cfg, mode).out;
}

GsaGradients gsa_backward(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, const Tensor& upstream,
                          Mode mode) {
    GsaTrace t = gsa_forward_trace(x, params, cfg, mode);
    if (upstream.shape() != t.out.shape()) {
        throw ShapeError("upstream gradient " + shape_to_string(upstream.shape()) + " does not match output " +
                         shape_to_string(t.out.shape()));
    }
    GsaGradients g{Tensor(x.shape()), GsaParams::zeros_like(params)};

    auto assign_bn = [](BatchNormState& dst, const BatchNormGrad& src) {
        dst.gamma = src.gamma;
        dst.beta = src.beta;
    };

    auto bo = batch_norm_backward(t.pre_norm, params.bn_out, t.out_stats, mode, upstream);
    assign_bn(g.params.bn_out, bo);
    const Tensor d_sum = split_heads(bo.input, cfg.n_heads);

    const Tensor& q = t.heads.q;
    Tensor dq(q.shape());
    Tensor dv(t.heads.v.shape());
    std::optional<Tensor> dk;

    if (cfg.content_on) {
        dk = Tensor(t.heads.k->shape());
        if (cfg.axial_content) {
            auto row = content_pass_backward(t.content[1], d_sum, Scope::row, cfg.softmax_on_queries);
            auto col = content_pass_backward(t.content[0], row.v, Scope::column, cfg.softmax_on_queries);
            *dk = add(row.k, col.k);
            dq = add(dq, add(row.q, col.q));
            dv = add(dv, col.v);
        } else {
            auto cg = content_pass_backward(t.content[0], d_sum, Scope::global, cfg.softmax_on_queries);
            *dk = std::move(cg.k);
            dq = add(dq, cg.q);
            dv = add(dv, cg.v);
        }
    }

    if (cfg.positional_on()) {
        Tensor d_values = d_sum;
        if (cfg.row_on) {
            auto rg = positional_axis_backward(q, t.row_values, t.p_row, Axis::row, cfg, d_sum);
            g.params.emb.r_row = std::move(rg.r);
            dq = add(dq, rg.q);
            d_values = std::move(rg.v);
            if (cfg.col_on) {
                auto bm = batch_norm_backward(merge_heads(t.col_out), params.bn_mid, t.mid_stats, mode,
                                              merge_heads(d_values));
                assign_bn(g.params.bn_mid, bm);
                d_values = split_heads(bm.input, cfg.n_heads);
            }
        }
        if (cfg.col_on) {
            auto cg = positional_axis_backward(q, t.heads.v, t.p_col, Axis::col, cfg, d_values);
            g.params.emb.r_col = std::move(cg.r);
            dq = add(dq, cg.q);
            d_values = std::move(cg.v);
        }
        dv = add(dv, d_values);
    }

    // projections
    const std::size_t d_in = cfg.d_in;
    const Tensor x_flat = x.reshaped({x.size() / d_in, d_in});
    auto project_back = [&](const Tensor& raw, const BatchNormState& bn, const BatchNormStats& stats, const Tensor& d_heads,
                            const Tensor& weight, Tensor& d_weight, BatchNormState& d_bn) {
        auto b = batch_norm_backward(raw, bn, stats, mode, merge_heads(d_heads));
        assign_bn(d_bn, b);
        const std::size_t c = raw.shape()[3];
        Tensor d_raw = b.input.reshaped({raw.size() / c, c});
        d_weight = einsum("pd,pe->de", x_flat, d_raw);
        g.input = add(g.input, einsum("pe,de->pd", d_raw, weight).reshaped(x.shape()));
    };

    if (cfg.content_on) {
        project_back(t.k_raw, params.kqv.bn_k, t.k_stats, *dk, params.kqv.w_k, g.params.kqv.w_k, g.params.kqv.bn_k);
    }
    project_back(t.q_raw, params.kqv.bn_q, t.q_stats, dq, params.kqv.w_q, g.params.kqv.w_q, g.params.kqv.bn_q);
    project_back(t.v_raw, params.kqv.bn_v, t.v_stats, dv, params.kqv.w_v, g.params.kqv.w_v, g.params.kqv.bn_v);
    return g;
}

GsaMacs gsa_macs(const GsaConfig& cfg) {
    cfg.validate();
    const std::uint64_t n_pix = cfg.height * cfg.width;
    const std::uint64_t heads = cfg.n_heads;
    const std::uint64_t c = cfg.key_head_dim();
    const std::uint64_t v = cfg.value_head_dim();
    GsaMacs m;
    m.projection = n_pix * cfg.d_in * ((cfg.content_on ? cfg.d_k : 0) + cfg.d_k + cfg.d_out);
    if (cfg.content_on) m.content = (cfg.axial_content ? 4 : 2) * n_pix * heads * c * v;
    if (cfg.col_on) {
        m.positional += n_pix * cfg.height * heads * (c + v);
        m.reindex += std::uint64_t(cfg.height) * cfg.height * (2 * cfg.height - 1) * c;
    }
    if (cfg.row_on) {
        m.positional += n_pix * cfg.width * heads * (c + v);
        m.reindex += std::uint64_t(cfg.width) * cfg.width * (2 * cfg.width - 1) * c;
    }
    return m;
}

}  // namespace gsa
