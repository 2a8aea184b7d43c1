#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsa/ops.hpp"
#include "gsa/tensor.hpp"

namespace gsa {

/**
 * Hyperparameters of one global self-attention module.
 *
 * Activations use the [batch, height, width, channels] layout; after the
 * key/query/value projection the channel axis is split into
 * [heads, channels-per-head].
 */
struct GsaConfig {
    std::size_t d_in = 0;
    std::size_t d_k = 0;    ///< total key/query channels
    std::size_t d_out = 0;  ///< total value/output channels
    std::size_t n_heads = 8;
    std::size_t height = 1;
    std::size_t width = 1;
    /// Largest relative shift a pixel attends to along a column or row.
    /// 0 selects max(height, width), i.e. global axial attention.
    std::size_t window = 0;

    bool content_on = true;
    bool col_on = true;
    bool row_on = true;

    bool softmax_on_queries = false;
    /// Replace global content attention by a column pass followed by a row pass.
    bool axial_content = false;

    std::size_t radius() const { return window ? window : std::max(height, width); }
    std::size_t key_head_dim() const { return d_k / n_heads; }
    std::size_t value_head_dim() const { return d_out / n_heads; }
    bool positional_on() const { return col_on || row_on; }

    /// Throws ArgumentError listing every violated invariant.
    void validate() const;
    std::string describe() const;
};

struct KqvWeights {
    Tensor w_k;  ///< (d_in, d_k); unused when the content branch is off
    Tensor w_q;  ///< (d_in, d_k)
    Tensor w_v;  ///< (d_in, d_out)
    BatchNormState bn_k;
    BatchNormState bn_q;
    BatchNormState bn_v;
};

/// Relative-shift embeddings; row r encodes the shift r - (extent - 1).
/// One instance per module, shared by all heads.
struct RelPosEmbedding {
    Tensor r_col;  ///< (2h - 1, d_k / n_heads)
    Tensor r_row;  ///< (2w - 1, d_k / n_heads)
};

struct GsaParams {
    KqvWeights kqv;
    RelPosEmbedding emb;
    BatchNormState bn_mid;  ///< between the column and row positional passes
    BatchNormState bn_out;  ///< applied to the merged module output

    /// Seeded initialization: projections fan_in_normal over d_in, embeddings
    /// fan_in_normal over per-head key channels, identity batch norms.
    static GsaParams init(const GsaConfig& cfg, std::uint64_t seed);
    /// Same layout with every entry zero (used as a gradient accumulator).
    static GsaParams zeros_like(const GsaParams& p);
};

/// A named view of one parameter array.
struct ParamRef {
    std::string name;
    Shape shape;
    std::span<double> values;
    bool trainable = true;
};

/// Enumerates the parameters of a module in a fixed order. With
/// `active_only`, arrays unused by the enabled branches are skipped (W_K and
/// bn_k without content attention, R_col/R_row without their pass, bn_mid
/// unless both positional passes run). Running statistics are listed as
/// non-trainable buffers when `include_buffers` is set.
std::vector<ParamRef> list_parameters(GsaParams& p, const GsaConfig& cfg, bool active_only = true,
                                      bool include_buffers = false);

/// Keys, queries and values split into heads: [b, h, w, n, channels].
/// `k` is absent when the content branch is off.
struct Heads {
    std::optional<Tensor> k;
    Tensor q;
    Tensor v;
};

Heads kqv_project(const Tensor& x, const KqvWeights& w, const GsaConfig& cfg, Mode mode = Mode::infer);

/// Global content attention per head: Q (softmax_xy(K)^T V), linear in pixels.
Tensor content_attention(const Tensor& k, const Tensor& q, const Tensor& v, const GsaConfig& cfg);

/// Column-only content attention followed by row-only content attention.
Tensor axial_content_attention(const Tensor& k, const Tensor& q, const Tensor& v, const GsaConfig& cfg);

/// Binary re-indexing tensor of shape [n, n, 2n - 1] with I[x, i, r] = 1 iff
/// r - (n - 1) == i - x and |i - x| <= radius.
Tensor build_reindex_tensor(std::size_t extent, std::size_t radius);

enum class Axis { col, row };

/// One axial positional pass; relative embeddings act as keys, no softmax.
Tensor positional_attention_axis(const Tensor& q, const Tensor& v, const Tensor& r, Axis axis,
                                 const GsaConfig& cfg);

/// Column pass, batch norm, row pass (values chained, queries shared).
/// With a single pass enabled the mid batch norm is skipped.
Tensor positional_attention(const Tensor& q, const Tensor& v, const RelPosEmbedding& emb,
                            const BatchNormState& bn_mid, const GsaConfig& cfg, Mode mode = Mode::infer);

/// Intermediates of one content pass.
struct ContentPass {
    Tensor k_hat;
    Tensor q_eff;
    Tensor context;
    Tensor values;
    Tensor out;
};

/// Every intermediate of a forward evaluation, plus the updated running
/// statistics (unchanged in infer mode).
struct GsaTrace {
    Tensor x;
    Tensor k_raw, q_raw, v_raw;
    BatchNormStats k_stats, q_stats, v_stats;
    Heads heads;

    std::vector<ContentPass> content;  ///< one global pass, or column then row
    Tensor content_out;

    Tensor p_col, p_row;
    Tensor col_out;  ///< column pass output [b, h, w, n, v]
    Tensor mid;      ///< mid batch-norm output
    BatchNormStats mid_stats;
    Tensor row_values;
    Tensor row_out;
    Tensor positional_out;

    Tensor pre_norm;  ///< merged branch sum [b, h, w, d_out]
    BatchNormStats out_stats;
    Tensor out;

    GsaParams updated;
};

GsaTrace gsa_forward_trace(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, Mode mode);

/// Full module: projection, parallel content and positional branches, sum,
/// head merge by concatenation, output batch norm.
Tensor gsa_forward(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, Mode mode = Mode::infer);

struct GsaGradients {
    Tensor input;
    GsaParams params;  ///< gradient for every parameter; running stats zero
};

/// Exact gradients of sum(upstream * gsa_forward(x)) with respect to the
/// input and every parameter.
GsaGradients gsa_backward(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, const Tensor& upstream,
                          Mode mode = Mode::train);

/// Multiply-accumulate counts of the module's contractions at batch 1, split
/// by stage. The re-indexing step is pure data movement and reported apart.
struct GsaMacs {
    std::uint64_t projection = 0;
    std::uint64_t content = 0;
    std::uint64_t positional = 0;
    std::uint64_t reindex = 0;

    std::uint64_t total() const { return projection + content + positional; }
};

GsaMacs gsa_macs(const GsaConfig& cfg);

}  // namespace gsa
