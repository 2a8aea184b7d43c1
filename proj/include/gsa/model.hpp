#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsa/attention.hpp"
#include "gsa/ops.hpp"
#include "gsa/tensor.hpp"

namespace gsa {

/// Raised when a model spec is inconsistent; the message lists every violation.
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Variant { standard, axial_content, m_resnet50 };

struct BranchFlags {
    bool content = true;
    bool col = true;
    bool row = true;
};

/// Channel counts after applying the variant's width transform.
struct ChannelPlan {
    std::size_t stem = 64;
    std::array<std::size_t, 4> width{};  ///< bottleneck (3x3 / GSA) width per group
    std::array<std::size_t, 4> out{};    ///< block output channels per group
};

/**
 * Declarative description of a bottleneck ResNet and its attention variants.
 *
 * `group_uses_gsa[g]` replaces every 3x3 convolution of residual group g by a
 * GSA module. Inputs are square, `input_size` x `input_size` x 3, and must be
 * a multiple of 32 so every downsampling site sees even extents.
 */
struct ModelSpec {
    int depth = 50;
    std::array<std::size_t, 4> blocks_per_group{3, 4, 6, 3};
    std::array<bool, 4> group_uses_gsa{false, false, false, false};
    BranchFlags branches;
    Variant variant = Variant::standard;
    std::size_t input_size = 224;
    std::size_t num_classes = 1000;
    std::size_t heads = 8;
    std::size_t base_width = 64;
    bool softmax_on_queries = false;

    static std::array<std::size_t, 4> canonical_blocks(int depth);

    ChannelPlan channels() const;
    std::vector<std::string> violations() const;
    void validate() const;
    std::size_t gsa_group_count() const;

    /// Named configurations; throws SpecError naming the valid presets.
    static ModelSpec preset(const std::string& name);
    static std::vector<std::string> preset_names();
};

void to_json(nlohmann::json& j, const ModelSpec& spec);
/// Strict parse: unknown fields and wrong types raise SpecError naming the field.
ModelSpec model_spec_from_json(const nlohmann::json& j);
std::string variant_name(Variant v);

enum class BlockKind { conv3x3, gsa };

struct BlockInstance {
    std::string name;  ///< e.g. "group2.block1"
    BlockKind kind = BlockKind::conv3x3;
    std::size_t group = 0;  ///< 0-based
    std::size_t in_channels = 0;
    std::size_t width = 0;
    std::size_t out_channels = 0;
    bool downsample = false;
    bool projection = false;
    std::size_t in_resolution = 0;
    std::size_t out_resolution = 0;
    std::optional<GsaConfig> gsa;
};

/// Convolution followed by batch norm; weights [kh, kw, C_in, C_out], no bias.
struct ConvBn {
    Tensor weight;
    BatchNormState bn;
    std::size_t stride = 1;
    std::size_t pad = 0;
};

struct Block {
    BlockInstance desc;
    ConvBn reduce;
    std::optional<ConvBn> spatial;  ///< 3x3 convolution blocks
    std::optional<GsaParams> gsa;   ///< attention blocks
    ConvBn expand;
    std::optional<ConvBn> shortcut;
};

struct Model {
    ModelSpec spec;
    ConvBn stem;
    std::vector<Block> blocks;
    Tensor fc_weight;  ///< [C, num_classes]
    Tensor fc_bias;    ///< [num_classes]
};

/// Deterministic architecture and initialization for a validated spec.
Model build_model(const ModelSpec& spec, std::uint64_t seed);

/// Resolves the block sequence without allocating parameters.
std::vector<BlockInstance> plan_blocks(const ModelSpec& spec);

/// Logits [b, num_classes] for input [b, S, S, 3]. Infer mode uses running
/// statistics and is pure; train mode normalizes with batch statistics.
Tensor model_forward(const Model& model, const Tensor& x, Mode mode = Mode::infer);

/// Every parameter of the model under dotted names such as
/// "group2.block1.gsa.W_Q" or "head.fc.bias"; buffers (running stats) flagged non-trainable.
std::vector<ParamRef> model_parameters(Model& model, bool include_buffers = false);

/// One row of the structured model summary; costs are closed-form at batch 1.
struct LayerRecord {
    std::string name;
    std::string kind;  ///< stem_conv7x7, conv1x1, conv3x3, gsa, maxpool, avgpool, gap, fc
    Shape in_shape;
    Shape out_shape;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    /// Element-wise work excluded from FLOP totals.
    std::uint64_t norm_elements = 0;
    std::uint64_t softmax_elements = 0;
    std::uint64_t pool_elements = 0;
    std::uint64_t reindex_macs = 0;

    friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

void to_json(nlohmann::json& j, const LayerRecord& r);
void from_json(const nlohmann::json& j, LayerRecord& r);

struct ModelSummary {
    ModelSpec spec;
    std::vector<LayerRecord> layers;
};

ModelSummary describe_model(const ModelSpec& spec);
inline ModelSummary describe_model(const Model& model) { return describe_model(model.spec); }
nlohmann::json summary_to_json(const ModelSummary& s);
ModelSummary summary_from_json(const nlohmann::json& j);

}  // namespace gsa
