#include "gsa/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "gsa/contract.hpp"

namespace gsa {

using nlohmann::json;

namespace {

struct Dims5 {
    std::size_t b, h, w, n, c;
    explicit Dims5(const Tensor& t) {
        if (t.rank() != 5) throw ShapeError("oracle operands must be [b, h, w, heads, channels]");
        b = t.shape()[0];
        h = t.shape()[1];
        w = t.shape()[2];
        n = t.shape()[3];
        c = t.shape()[4];
    }
    std::size_t at(std::size_t ib, std::size_t x, std::size_t y, std::size_t head, std::size_t k) const {
        return (((ib * h + x) * w + y) * n + head) * c + k;
    }
};

// Softmax over `len` entries spaced `stride` apart.
void softmax_strided(const double* src, double* dst, std::size_t len, std::size_t stride) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, src[i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        dst[i * stride] = std::exp(src[i * stride] - mx);
        z += dst[i * stride];
    }
    for (std::size_t i = 0; i < len; ++i) dst[i * stride] /= z;
}

Tensor query_softmax(const Tensor& q) {
    Dims5 d(q);
    Tensor out(q.shape());
    const double* src = q.data().data();
    double* dst = out.data().data();
    for (std::size_t row = 0; row < q.size() / d.c; ++row) softmax_strided(src + row * d.c, dst + row * d.c, d.c, 1);
    return out;
}

enum class Reach { all, column, row };

// Content attention where pixel (x, y) sees the pixels selected by `reach`.
Tensor content_loops(const Tensor& k, const Tensor& q, const Tensor& v, bool softmax_on_queries, Reach reach) {
    Dims5 dk(k), dv(v);
    if (q.shape() != k.shape() || dv.b != dk.b || dv.h != dk.h || dv.w != dk.w || dv.n != dk.n) {
        throw ShapeError("oracle content attention: incompatible K, Q, V");
    }
    const Tensor qe = softmax_on_queries ? query_softmax(q) : q;
    Tensor k_hat(k.shape());
    const double* ks = k.data().data();
    double* kh = k_hat.data().data();
    for (std::size_t b = 0; b < dk.b; ++b)
        for (std::size_t n = 0; n < dk.n; ++n)
            for (std::size_t c = 0; c < dk.c; ++c) {
                if (reach == Reach::all) {
                    const std::size_t base = dk.at(b, 0, 0, n, c);
                    softmax_strided(ks + base, kh + base, dk.h * dk.w, dk.n * dk.c);
                } else if (reach == Reach::column) {
                    for (std::size_t y = 0; y < dk.w; ++y) {
                        const std::size_t base = dk.at(b, 0, y, n, c);
                        softmax_strided(ks + base, kh + base, dk.h, dk.w * dk.n * dk.c);
                    }
                } else {
                    for (std::size_t x = 0; x < dk.h; ++x) {
                        const std::size_t base = dk.at(b, x, 0, n, c);
                        softmax_strided(ks + base, kh + base, dk.w, dk.n * dk.c);
                    }
                }
            }

    Tensor out(v.shape());
    const double* qs = qe.data().data();
    const double* vs = v.data().data();
    double* os = out.data().data();
    std::vector<double> weight;
    for (std::size_t b = 0; b < dk.b; ++b)
        for (std::size_t n = 0; n < dk.n; ++n)
            for (std::size_t x = 0; x < dk.h; ++x)
                for (std::size_t y = 0; y < dk.w; ++y) {
                    std::vector<std::pair<std::size_t, std::size_t>> sources;
                    for (std::size_t i = 0; i < dk.h; ++i)
                        for (std::size_t j = 0; j < dk.w; ++j) {
                            if (reach == Reach::column && j != y) continue;
                            if (reach == Reach::row && i != x) continue;
                            sources.emplace_back(i, j);
                        }
                    weight.assign(sources.size(), 0.0);
                    for (std::size_t s = 0; s < sources.size(); ++s) {
                        for (std::size_t c = 0; c < dk.c; ++c) {
                            weight[s] += qs[dk.at(b, x, y, n, c)] * kh[dk.at(b, sources[s].first, sources[s].second, n, c)];
                        }
                    }
                    for (std::size_t s = 0; s < sources.size(); ++s) {
                        for (std::size_t e = 0; e < dv.c; ++e) {
                            os[dv.at(b, x, y, n, e)] += weight[s] * vs[dv.at(b, sources[s].first, sources[s].second, n, e)];
                        }
                    }
                }
    return out;
}

}  // namespace

Tensor oracle_content_attention(const Tensor& k, const Tensor& q, const Tensor& v, bool softmax_on_queries) {
    return content_loops(k, q, v, softmax_on_queries, Reach::all);
}

Tensor oracle_axial_content_attention(const Tensor& k, const Tensor& q, const Tensor& v, bool softmax_on_queries) {
    Tensor col = content_loops(k, q, v, softmax_on_queries, Reach::column);
    return content_loops(k, q, col, softmax_on_queries, Reach::row);
}

Tensor oracle_positional_axis(const Tensor& q, const Tensor& v, const Tensor& r, Axis axis, std::size_t radius) {
    Dims5 dq(q), dv(v);
    const std::size_t extent = axis == Axis::col ? dq.h : dq.w;
    if (r.rank() != 2 || r.shape()[0] != 2 * extent - 1 || r.shape()[1] != dq.c) {
        throw ShapeError("oracle positional attention: embedding shape " + shape_to_string(r.shape()));
    }
    Tensor out(v.shape());
    const double* qs = q.data().data();
    const double* vs = v.data().data();
    const double* rs = r.data().data();
    double* os = out.data().data();
    for (std::size_t b = 0; b < dq.b; ++b)
        for (std::size_t x = 0; x < dq.h; ++x)
            for (std::size_t y = 0; y < dq.w; ++y)
                for (std::size_t n = 0; n < dq.n; ++n) {
                    const std::size_t pos = axis == Axis::col ? x : y;
                    const std::size_t lo = pos >= radius ? pos - radius : 0;
                    const std::size_t hi = std::min(extent - 1, pos + radius);
                    for (std::size_t other = lo; other <= hi; ++other) {
                        const double* emb = rs + (other + extent - 1 - pos) * dq.c;
                        double wgt = 0.0;
                        for (std::size_t c = 0; c < dq.c; ++c) wgt += qs[dq.at(b, x, y, n, c)] * emb[c];
                        const std::size_t sx = axis == Axis::col ? other : x;
                        const std::size_t sy = axis == Axis::col ? y : other;
                        for (std::size_t e = 0; e < dv.c; ++e) os[dv.at(b, x, y, n, e)] += wgt * vs[dv.at(b, sx, sy, n, e)];
                    }
                }
    return out;
}

OracleBatchNorm oracle_batch_norm(const Tensor& t, const BatchNormState& state, Mode mode, bool merge_last_two) {
    std::size_t ch = t.shape().back();
    if (merge_last_two) ch *= t.shape()[t.rank() - 2];
    if (ch != state.gamma.size()) throw ShapeError("oracle batch norm: channel mismatch");
    const std::size_t rows = t.size() / ch;
    const double* xs = t.data().data();
    OracleBatchNorm res{Tensor(t.shape()), state};
    std::vector<double> mean(ch), var(ch);
    if (mode == Mode::train) {
        for (std::size_t k = 0; k < ch; ++k) {
            double s = 0.0;
            for (std::size_t r = 0; r < rows; ++r) s += xs[r * ch + k];
            mean[k] = s / static_cast<double>(rows);
            double q = 0.0;
            for (std::size_t r = 0; r < rows; ++r) q += (xs[r * ch + k] - mean[k]) * (xs[r * ch + k] - mean[k]);
            var[k] = q / static_cast<double>(rows);
            res.state.running_mean[k] = state.momentum * state.running_mean[k] + (1.0 - state.momentum) * mean[k];
            res.state.running_var[k] = state.momentum * state.running_var[k] + (1.0 - state.momentum) * var[k];
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }
    double* ys = res.out.data().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < ch; ++k) {
            ys[r * ch + k] = state.gamma[k] * (xs[r * ch + k] - mean[k]) / std::sqrt(var[k] + state.epsilon) + state.beta[k];
        }
    return res;
}

Tensor oracle_positional_attention(const Tensor& q, const Tensor& v, const RelPosEmbedding& emb,
                                   const BatchNormState& bn_mid, const GsaConfig& cfg, Mode mode) {
    Tensor values = v;
    if (cfg.col_on) {
        values = oracle_positional_axis(q, values, emb.r_col, Axis::col, cfg.radius());
        if (!cfg.row_on) return values;
        values = oracle_batch_norm(values, bn_mid, mode, true).out;
    }
    if (cfg.row_on) values = oracle_positional_axis(q, values, emb.r_row, Axis::row, cfg.radius());
    return values;
}

namespace {

Tensor oracle_projection(const Tensor& x, const Tensor& w) {
    const std::size_t cin = w.shape()[0], cout = w.shape()[1];
    const std::size_t pixels = x.size() / cin;
    Shape s = x.shape();
    s.back() = cout;
    Tensor out(s);
    const double* xs = x.data().data();
    const double* ws = w.data().data();
    double* os = out.data().data();
    for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t o = 0; o < cout; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < cin; ++i) acc += xs[p * cin + i] * ws[i * cout + o];
            os[p * cout + o] = acc;
        }
    return out;
}

Tensor to_heads(const Tensor& t, std::size_t heads) {
    const auto& s = t.shape();
    return t.reshaped({s[0], s[1], s[2], heads, s[3] / heads});
}

}  // namespace

Tensor oracle_gsa_forward(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, Mode mode) {
    cfg.validate();
    const auto& w = params.kqv;
    const Tensor q = to_heads(oracle_batch_norm(oracle_projection(x, w.w_q), w.bn_q, mode).out, cfg.n_heads);
    const Tensor v = to_heads(oracle_batch_norm(oracle_projection(x, w.w_v), w.bn_v, mode).out, cfg.n_heads);
    Tensor sum(v.shape());
    double* acc = sum.data().data();
    if (cfg.content_on) {
        const Tensor k = to_heads(oracle_batch_norm(oracle_projection(x, w.w_k), w.bn_k, mode).out, cfg.n_heads);
        Tensor c = cfg.axial_content ? oracle_axial_content_attention(k, q, v, cfg.softmax_on_queries)
                                     : oracle_content_attention(k, q, v, cfg.softmax_on_queries);
        for (std::size_t i = 0; i < c.size(); ++i) acc[i] += c[i];
    }
    if (cfg.positional_on()) {
        Tensor p = oracle_positional_attention(q, v, params.emb, params.bn_mid, cfg, mode);
        for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i];
    }
    const auto& s = sum.shape();
    return oracle_batch_norm(sum.reshaped({s[0], s[1], s[2], s[3] * s[4]}), params.bn_out, mode).out;
}

// --- reports -----------------------------------------------------------------------

double relative_error(const Tensor& got, const Tensor& ref) {
    if (got.shape() != ref.shape()) {
        throw ShapeError("relative_error: " + shape_to_string(got.shape()) + " vs " + shape_to_string(ref.shape()));
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = std::abs(got[i] - ref[i]);
        if (!(d <= diff)) diff = d;  // NaN propagates
        scale = std::max(scale, std::abs(ref[i]));
    }
    return scale > 0.0 ? diff / scale : diff;
}

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = std::abs(a[i] - b[i]);
        if (!(e <= d)) d = e;
    }
    return d;
}

}  // namespace

void OracleReport::finish(double abs_err, double rel_err, double tol) {
    max_abs_error = abs_err;
    max_rel_error = rel_err;
    tolerance = tol;
    pass = std::isfinite(rel_err) && rel_err <= tol;
}

json to_json(const OracleReport& r) {
    json j{{"check", r.check},
           {"seed", r.seed},
           {"config", r.config},
           {"max_abs_error", r.max_abs_error},
           {"max_rel_error", r.max_rel_error},
           {"tolerance", r.tolerance},
           {"pass", r.pass}};
    if (!r.breakdown.empty()) j["breakdown"] = r.breakdown;
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

void write_json_lines(std::ostream& os, const std::vector<OracleReport>& reports) {
    for (const auto& r : reports) os << to_json(r).dump() << "\n";
}

// --- gradient checking -----------------------------------------------------------------

OracleReport grad_check(const std::function<double()>& loss, const std::vector<GradProbe>& probes, double step,
                        double tolerance) {
    OracleReport rep;
    rep.check = "grad_check";
    struct ClassErr {
        double diff = 0.0;
        double scale = 0.0;
    };
    std::map<std::string, ClassErr> classes;
    double worst_abs = 0.0;
    for (const auto& p : probes) {
        if (p.values.size() != p.analytic.size()) throw ShapeError("grad_check: probe '" + p.name + "' size mismatch");
        auto& ce = classes[p.cls];
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double saved = p.values[i];
            p.values[i] = saved + step;
            const double up = loss();
            p.values[i] = saved - step;
            const double down = loss();
            p.values[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(p.analytic[i])) {
                rep.detail = "non-finite value at " + p.name + "[" + std::to_string(i) + "]";
                rep.finish(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), tolerance);
                return rep;
            }
            const double fd = (up - down) / (2.0 * step);
            const double d = std::abs(fd - p.analytic[i]);
            ce.diff = std::max(ce.diff, d);
            ce.scale = std::max({ce.scale, std::abs(fd), std::abs(p.analytic[i])});
            worst_abs = std::max(worst_abs, d);
        }
    }
    double worst_rel = 0.0;
    for (const auto& [cls, ce] : classes) {
        const double rel = ce.scale > 0.0 ? ce.diff / ce.scale : ce.diff;
        rep.breakdown[cls] = rel;
        worst_rel = std::max(worst_rel, rel);
    }
    rep.finish(worst_abs, worst_rel, tolerance);
    return rep;
}

namespace {

std::mt19937_64 case_rng(std::uint64_t seed, std::uint64_t salt) { return std::mt19937_64(mix_seed(seed, salt)); }

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng) { return pick(rng, 0, 1) == 1; }

BatchNormState random_bn(std::size_t channels, std::mt19937_64& rng) {
    BatchNormState s = BatchNormState::identity(channels);
    std::uniform_real_distribution<double> gamma(0.5, 1.5), var(0.5, 2.0);
    std::normal_distribution<double> shift(0.0, 0.5);
    for (std::size_t k = 0; k < channels; ++k) {
        s.gamma[k] = gamma(rng);
        s.beta[k] = shift(rng);
        s.running_mean[k] = shift(rng);
        s.running_var[k] = var(rng);
    }
    return s;
}

void randomize_bn(GsaParams& p, std::mt19937_64& rng) {
    p.kqv.bn_k = random_bn(p.kqv.bn_k.channels(), rng);
    p.kqv.bn_q = random_bn(p.kqv.bn_q.channels(), rng);
    p.kqv.bn_v = random_bn(p.kqv.bn_v.channels(), rng);
    p.bn_mid = random_bn(p.bn_mid.channels(), rng);
    p.bn_out = random_bn(p.bn_out.channels(), rng);
}

json config_json(const GsaConfig& cfg) {
    return json{{"d_in", cfg.d_in},       {"d_k", cfg.d_k},         {"d_out", cfg.d_out},
                {"heads", cfg.n_heads},   {"height", cfg.height},   {"width", cfg.width},
                {"window", cfg.window},   {"content", cfg.content_on}, {"col", cfg.col_on},
                {"row", cfg.row_on},      {"softmax_on_queries", cfg.softmax_on_queries},
                {"axial_content", cfg.axial_content}};
}

const char* mode_name(Mode m) { return m == Mode::train ? "train" : "infer"; }

OracleReport compare(const std::string& check, std::uint64_t seed, json config, const Tensor& got, const Tensor& ref,
                     double tol) {
    OracleReport r;
    r.check = check;
    r.seed = seed;
    r.config = std::move(config);
    r.finish(max_abs_diff(got, ref), relative_error(got, ref), tol);
    return r;
}

struct ContentCase {
    Tensor k, q, v;
    bool softmax_on_queries = false;
    json config;
};

// Every tenth seed is a single pixel and the next one has all-equal keys.
ContentCase content_case(std::uint64_t seed, std::uint64_t salt) {
    auto rng = case_rng(seed, salt);
    std::size_t b = pick(rng, 1, 2), h = pick(rng, 1, 5), w = pick(rng, 1, 5);
    const std::size_t n = pick(rng, 1, 3), c = pick(rng, 1, 4), v = pick(rng, 1, 4);
    const bool single = seed % 10 == 0;
    const bool flat_keys = seed % 10 == 1;
    if (single) h = w = 1;
    ContentCase cc;
    cc.softmax_on_queries = coin(rng);
    cc.k = flat_keys ? Tensor({b, h, w, n, c}, 0.75) : random_normal({b, h, w, n, c}, mix_seed(seed, salt + 1));
    cc.q = random_normal({b, h, w, n, c}, mix_seed(seed, salt + 2));
    cc.v = random_normal({b, h, w, n, v}, mix_seed(seed, salt + 3));
    cc.config = json{{"shape_k", cc.k.shape()},
                     {"shape_v", cc.v.shape()},
                     {"softmax_on_queries", cc.softmax_on_queries},
                     {"degenerate", single ? "single_pixel" : flat_keys ? "equal_keys" : "none"}};
    return cc;
}

GsaConfig content_cfg(const ContentCase& cc) {
    GsaConfig cfg;
    cfg.n_heads = cc.k.shape()[3];
    cfg.d_in = 1;
    cfg.d_k = cfg.n_heads * cc.k.shape()[4];
    cfg.d_out = cfg.n_heads * cc.v.shape()[4];
    cfg.height = cc.k.shape()[1];
    cfg.width = cc.k.shape()[2];
    cfg.softmax_on_queries = cc.softmax_on_queries;
    return cfg;
}

GsaConfig random_module_config(std::mt19937_64& rng, std::size_t max_side) {
    GsaConfig cfg;
    cfg.n_heads = pick(rng, 1, 2);
    cfg.d_in = pick(rng, 1, 5);
    cfg.d_k = cfg.n_heads * pick(rng, 1, 3);
    cfg.d_out = cfg.n_heads * pick(rng, 1, 3);
    cfg.height = pick(rng, 1, max_side);
    cfg.width = pick(rng, 1, max_side);
    cfg.window = coin(rng) ? 0 : pick(rng, 1, std::max(cfg.height, cfg.width));
    return cfg;
}

}  // namespace

GsaConfig gradient_check_config() {
    GsaConfig cfg;
    cfg.d_in = 4;
    cfg.d_k = 4;
    cfg.d_out = 4;
    cfg.n_heads = 2;
    cfg.height = 3;
    cfg.width = 3;
    return cfg;
}

OracleReport check_gsa_gradients(std::uint64_t seed, const GsaConfig& cfg, Mode mode, double step, double tolerance) {
    cfg.validate();
    auto rng = case_rng(seed, 40);
    GsaParams params = GsaParams::init(cfg, mix_seed(seed, 41));
    randomize_bn(params, rng);
    const std::size_t batch = 2;
    Tensor x = random_normal({batch, cfg.height, cfg.width, cfg.d_in}, mix_seed(seed, 42));
    const Tensor upstream = random_normal({batch, cfg.height, cfg.width, cfg.d_out}, mix_seed(seed, 43));

    GsaGradients g = gsa_backward(x, params, cfg, upstream, mode);
    auto loss = [&] {
        const Tensor y = gsa_forward(x, params, cfg, mode);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += upstream[i] * y[i];
        return s;
    };

    std::vector<GradProbe> probes;
    auto values = list_parameters(params, cfg);
    auto grads = list_parameters(g.params, cfg);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::string& name = values[i].name;
        const std::string cls = name.rfind("bn_", 0) == 0 ? "BN affine" : name;
        probes.push_back({cls, name, values[i].values, grads[i].values});
    }
    probes.push_back({"input", "input", x.data(), g.input.data()});

    OracleReport r = grad_check(loss, probes, step, tolerance);
    r.check = "gsa_backward";
    r.seed = seed;
    r.config = config_json(cfg);
    r.config["mode"] = mode_name(mode);
    r.config["batch"] = batch;
    r.config["step"] = step;
    return r;
}

OracleReport check_content_oracle(std::uint64_t seed, double tolerance) {
    ContentCase cc = content_case(seed, 10);
    const Tensor got = content_attention(cc.k, cc.q, cc.v, content_cfg(cc));
    const Tensor ref = oracle_content_attention(cc.k, cc.q, cc.v, cc.softmax_on_queries);
    return compare("content_attention", seed, cc.config, got, ref, tolerance);
}

OracleReport check_axial_content_oracle(std::uint64_t seed, double tolerance) {
    ContentCase cc = content_case(seed, 15);
    const Tensor got = axial_content_attention(cc.k, cc.q, cc.v, content_cfg(cc));
    const Tensor ref = oracle_axial_content_attention(cc.k, cc.q, cc.v, cc.softmax_on_queries);
    return compare("axial_content_attention", seed, cc.config, got, ref, tolerance);
}

OracleReport check_positional_oracle(std::uint64_t seed, double tolerance) {
    auto rng = case_rng(seed, 20);
    GsaConfig cfg = random_module_config(rng, 6);
    if (seed % 10 == 0) {
        cfg.height = cfg.width = 1;
        cfg.window = 0;
    }
    const int passes = static_cast<int>(pick(rng, 0, 3));  // 0 -> both
    cfg.col_on = passes != 2;
    cfg.row_on = passes != 1;
    const Mode mode = coin(rng) ? Mode::train : Mode::infer;
    const std::size_t b = pick(rng, 1, 2);
    const std::size_t n = cfg.n_heads;
    const Tensor q = random_normal({b, cfg.height, cfg.width, n, cfg.key_head_dim()}, mix_seed(seed, 21));
    const Tensor v = random_normal({b, cfg.height, cfg.width, n, cfg.value_head_dim()}, mix_seed(seed, 22));
    GsaParams p = GsaParams::init(cfg, mix_seed(seed, 23));
    p.bn_mid = random_bn(cfg.d_out, rng);

    const Tensor got = positional_attention(q, v, p.emb, p.bn_mid, cfg, mode);
    const Tensor ref = oracle_positional_attention(q, v, p.emb, p.bn_mid, cfg, mode);
    json config = config_json(cfg);
    config["mode"] = mode_name(mode);
    config["batch"] = b;
    return compare("positional_attention", seed, config, got, ref, tolerance);
}

OracleReport check_gsa_forward_oracle(std::uint64_t seed, double tolerance) {
    auto rng = case_rng(seed, 30);
    GsaConfig cfg = random_module_config(rng, 5);
    if (seed % 10 == 0) {
        cfg.height = cfg.width = 1;
        cfg.window = 0;
    }
    do {
        cfg.content_on = coin(rng);
        cfg.col_on = coin(rng);
        cfg.row_on = coin(rng);
    } while (!cfg.content_on && !cfg.col_on && !cfg.row_on);
    cfg.axial_content = cfg.content_on && coin(rng);
    cfg.softmax_on_queries = cfg.content_on && pick(rng, 0, 3) == 0;
    const Mode mode = coin(rng) ? Mode::train : Mode::infer;
    const std::size_t b = pick(rng, 1, 2);
    GsaParams p = GsaParams::init(cfg, mix_seed(seed, 31));
    randomize_bn(p, rng);
    const Tensor x = random_normal({b, cfg.height, cfg.width, cfg.d_in}, mix_seed(seed, 32));

    const Tensor got = gsa_forward(x, p, cfg, mode);
    const Tensor ref = oracle_gsa_forward(x, p, cfg, mode);
    json config = config_json(cfg);
    config["mode"] = mode_name(mode);
    config["batch"] = b;
    return compare("gsa_forward", seed, config, got, ref, tolerance);
}

OracleReport equivariance_check(Equivariance kind, std::uint64_t seed, double tolerance) {
    if (kind == Equivariance::permutation) {
        auto rng = case_rng(seed, 50);
        const std::size_t b = pick(rng, 1, 2), h = pick(rng, 2, 5), w = pick(rng, 2, 5);
        const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 4), vc = pick(rng, 1, 4);
        const Tensor k = random_normal({b, h, w, n, c}, mix_seed(seed, 51));
        const Tensor q = random_normal({b, h, w, n, c}, mix_seed(seed, 52));
        const Tensor v = random_normal({b, h, w, n, vc}, mix_seed(seed, 53));
        std::vector<std::size_t> perm(h * w);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        // pixel p of the permuted tensor holds pixel perm[p] of the source
        auto permute = [&](const Tensor& t) {
            Tensor out(t.shape());
            const std::size_t per_pixel = t.shape()[3] * t.shape()[4];
            for (std::size_t ib = 0; ib < b; ++ib)
                for (std::size_t p = 0; p < h * w; ++p)
                    for (std::size_t e = 0; e < per_pixel; ++e) {
                        out[(ib * h * w + p) * per_pixel + e] = t[(ib * h * w + perm[p]) * per_pixel + e];
                    }
            return out;
        };
        GsaConfig cfg;
        cfg.n_heads = n;
        cfg.d_in = 1;
        cfg.d_k = n * c;
        cfg.d_out = n * vc;
        cfg.height = h;
        cfg.width = w;
        const Tensor got = content_attention(permute(k), permute(q), permute(v), cfg);
        const Tensor ref = permute(content_attention(k, q, v, cfg));
        return compare("permutation_equivariance", seed, json{{"shape_k", k.shape()}, {"shape_v", v.shape()}}, got,
                       ref, tolerance);
    }

    auto rng = case_rng(seed, 60);
    GsaConfig cfg;
    cfg.n_heads = pick(rng, 1, 2);
    cfg.d_in = 1;
    cfg.d_k = cfg.n_heads * pick(rng, 1, 3);
    cfg.d_out = cfg.n_heads * pick(rng, 1, 3);
    cfg.height = 16;
    cfg.width = pick(rng, 3, 8);
    cfg.window = 3;  // < height / 4
    const std::size_t shift = pick(rng, 1, 3);
    const std::size_t n = cfg.n_heads, c = cfg.key_head_dim(), vc = cfg.value_head_dim();
    const std::size_t h = cfg.height, w = cfg.width, L = cfg.window;
    GsaParams p = GsaParams::init(cfg, mix_seed(seed, 61));
    p.bn_mid = random_bn(cfg.d_out, rng);
    const Tensor q = random_normal({1, h, w, n, c}, mix_seed(seed, 62));
    const Tensor v = random_normal({1, h, w, n, vc}, mix_seed(seed, 63));
    // rows entering at the top are fresh content
    const Tensor q_fill = random_normal({1, h, w, n, c}, mix_seed(seed, 64));
    const Tensor v_fill = random_normal({1, h, w, n, vc}, mix_seed(seed, 65));

    auto shifted = [&](const Tensor& t, const Tensor& fill) {
        Tensor out(t.shape());
        const std::size_t row = w * t.shape()[3] * t.shape()[4];
        for (std::size_t x = 0; x < h; ++x)
            for (std::size_t e = 0; e < row; ++e) out[x * row + e] = x >= shift ? t[(x - shift) * row + e] : fill[x * row + e];
        return out;
    };
    const Tensor out = positional_attention(q, v, p.emb, p.bn_mid, cfg, Mode::infer);
    const Tensor out_shifted = positional_attention(shifted(q, q_fill), shifted(v, v_fill), p.emb, p.bn_mid, cfg, Mode::infer);

    // interior rows: full windows before and after the shift
    const std::size_t first = L, last = h - 1 - L - shift;
    const std::size_t row = w * n * vc;
    Tensor got({last - first + 1, row}), ref({last - first + 1, row});
    for (std::size_t x = first; x <= last; ++x)
        for (std::size_t e = 0; e < row; ++e) {
            ref[(x - first) * row + e] = out[x * row + e];
            got[(x - first) * row + e] = out_shifted[(x + shift) * row + e];
        }
    json config = config_json(cfg);
    config["shift"] = shift;
    config["interior_rows"] = json::array({first, last});
    return compare("translation_equivariance", seed, config, got, ref, tolerance);
}

OracleReport check_query_softmax_variant(std::uint64_t seed) {
    auto rng = case_rng(seed, 70);
    const std::size_t h = pick(rng, 2, 5), w = pick(rng, 2, 5), n = pick(rng, 1, 2), c = pick(rng, 2, 4);
    const Tensor k = random_normal({1, h, w, n, c}, mix_seed(seed, 71));
    const Tensor q = random_normal({1, h, w, n, c}, mix_seed(seed, 72));
    const Tensor v = random_normal({1, h, w, n, c}, mix_seed(seed, 73));
    GsaConfig cfg;
    cfg.n_heads = n;
    cfg.d_in = 1;
    cfg.d_k = cfg.d_out = n * c;
    cfg.height = h;
    cfg.width = w;
    const Tensor plain = content_attention(k, q, v, cfg);
    cfg.softmax_on_queries = true;
    const Tensor with_softmax = content_attention(k, q, v, cfg);
    OracleReport r;
    r.check = "query_softmax_variant";
    r.seed = seed;
    r.config = json{{"shape", k.shape()}, {"min_difference", 1e-3}};
    r.max_abs_error = max_abs_diff(with_softmax, plain);
    r.max_rel_error = relative_error(with_softmax, plain);
    r.tolerance = 1e-3;
    r.pass = r.max_rel_error > 1e-3;
    return r;
}

OracleReport check_linear_gradient(std::uint64_t seed) {
    auto rng = case_rng(seed, 80);
    const std::size_t b = pick(rng, 1, 2), h = pick(rng, 1, 4), w = pick(rng, 1, 4);
    const std::size_t cin = pick(rng, 1, 5), cout = pick(rng, 1, 5);
    Tensor x = random_normal({b, h, w, cin}, mix_seed(seed, 81));
    Tensor wt = random_normal({cin, cout}, mix_seed(seed, 82));
    const Tensor u = random_normal({b, h, w, cout}, mix_seed(seed, 83));
    const Tensor dw = einsum("bhwi,bhwo->io", x, u);
    const Tensor dx = einsum("bhwo,io->bhwi", u, wt);
    auto loss = [&] {
        const Tensor y = pointwise_conv(x, wt);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
        return s;
    };
    OracleReport r = grad_check(loss, {{"weights", "W", wt.data(), dw.data()}, {"input", "x", x.data(), dx.data()}},
                                1e-5, 1e-9);
    r.check = "linear_gradient";
    r.seed = seed;
    r.config = json{{"shape_x", x.shape()}, {"shape_w", wt.shape()}};
    return r;
}

OracleReport check_softmax_jacobian(std::uint64_t seed) {
    auto rng = case_rng(seed, 90);
    const std::size_t rows = pick(rng, 1, 4), len = pick(rng, 1, 6);
    const Tensor z = random_normal({rows, len}, mix_seed(seed, 91));
    const Tensor u = random_normal({rows, len}, mix_seed(seed, 92));
    const Tensor s = softmax(z, {1});
    const Tensor got = softmax_backward(s, u, {1});
    // closed form: J = diag(s) - s s^T applied to u
    Tensor ref({rows, len});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < len; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double jac = (i == j ? s[r * len + i] : 0.0) - s[r * len + i] * s[r * len + j];
                acc += jac * u[r * len + j];
            }
            ref[r * len + i] = acc;
        }
    return compare("softmax_jacobian", seed, json{{"shape", z.shape()}}, got, ref, 1e-7);
}

std::vector<OracleReport> run_verify_suite(const std::string& suite, std::uint64_t seed, std::size_t cases) {
    const bool all = suite == "all";
    if (!all && suite != "oracle" && suite != "equivariance" && suite != "gradient") {
        throw ArgumentError("unknown suite '" + suite + "'; valid suites: all, oracle, equivariance, gradient");
    }
    const std::size_t n_oracle = cases ? cases : 100;
    const std::size_t n_grad = cases ? cases : 20;
    std::vector<OracleReport> out;
    auto run = [&](std::size_t count, const std::function<OracleReport(std::uint64_t)>& f) {
        for (std::size_t i = 0; i < count; ++i) out.push_back(f(seed + i));
    };
    if (all || suite == "oracle") {
        run(n_oracle, [](std::uint64_t s) { return check_content_oracle(s); });
        run(n_oracle, [](std::uint64_t s) { return check_axial_content_oracle(s); });
        run(n_oracle, [](std::uint64_t s) { return check_positional_oracle(s); });
        run(n_oracle, [](std::uint64_t s) { return check_gsa_forward_oracle(s); });
        run(n_oracle, [](std::uint64_t s) { return check_query_softmax_variant(s); });
    }
    if (all || suite == "equivariance") {
        run(n_oracle, [](std::uint64_t s) { return equivariance_check(Equivariance::permutation, s); });
        run(n_oracle, [](std::uint64_t s) { return equivariance_check(Equivariance::translation, s); });
    }
    if (all || suite == "gradient") {
        run(n_grad, [](std::uint64_t s) { return check_gsa_gradients(s, gradient_check_config()); });
        run(n_grad, [](std::uint64_t s) { return check_linear_gradient(s); });
        run(n_grad, [](std::uint64_t s) { return check_softmax_jacobian(s); });
    }
    return out;
}

}  // namespace gsa
