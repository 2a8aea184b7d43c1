#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gsa/attention.hpp"
#include "gsa/tensor.hpp"

namespace gsa {

/// A small attention classifier: `blocks` GSA modules (each followed by ReLU),
/// global average pooling and a linear head, trained full-batch with SGD and
/// momentum on a synthetic set of noisy class templates.
struct ToySpec {
    std::size_t image_size = 8;
    std::size_t channels = 3;
    std::size_t num_classes = 10;
    std::size_t samples_per_class = 8;
    std::size_t width = 16;
    std::size_t heads = 2;
    std::size_t blocks = 2;
    double noise = 0.5;
    std::size_t steps = 200;
    double lr = 0.1;
    double momentum = 0.9;
    bool zero_head = true;
    std::uint64_t seed = 0;

    /// Throws ArgumentError; limited to 3 blocks and 32x32 inputs.
    void validate() const;
};

struct ToyDataset {
    Tensor images;  ///< [n, s, s, channels]
    std::vector<std::size_t> labels;
};

/// Every class gets a standard-normal template image; samples add Gaussian
/// noise of standard deviation `noise`. Labels cycle through the classes.
ToyDataset make_toy_dataset(const ToySpec& spec);

struct ToyModel {
    std::vector<GsaConfig> configs;
    std::vector<GsaParams> blocks;
    Tensor fc_weight;  ///< [width, num_classes]
    Tensor fc_bias;    ///< [num_classes]
};

ToyModel build_toy_model(const ToySpec& spec);

/// Logits [n, num_classes] and mean cross-entropy in train mode (batch
/// statistics) without updating the model.
struct ToyEval {
    Tensor logits;
    double loss = 0.0;
};
ToyEval evaluate_toy(const ToyModel& model, const ToyDataset& data);

struct ToyResult {
    /// losses[t] is the loss before update t; the last entry follows the final update.
    std::vector<double> losses;
    std::optional<std::size_t> divergence_step;  ///< first step with a non-finite loss
    bool ok() const { return !divergence_step.has_value(); }
};

ToyResult train_toy(const ToySpec& spec);

/// CSV with header "step,loss".
void write_loss_csv(std::ostream& os, const ToyResult& result);

}  // namespace gsa
