#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gsa/tensor.hpp"

namespace gsa {

/**
 * Parsed Einstein-summation spec such as "xyd,dnk->xynk".
 *
 * Labels are single ASCII letters. Labels that appear in the inputs but not
 * in the output are summed over. At most kMaxIndices distinct labels.
 */
class ContractionSpec {
public:
    static constexpr std::size_t kMaxIndices = 6;

    static ContractionSpec parse(std::string_view text);

    const std::vector<std::string>& inputs() const { return inputs_; }
    const std::string& output() const { return output_; }
    /// Distinct labels in the order output labels first, then contracted
    /// labels in order of first appearance.
    const std::string& loop_order() const { return loop_order_; }
    std::size_t contracted_count() const { return loop_order_.size() - output_.size(); }
    std::string to_string() const;

private:
    std::vector<std::string> inputs_;
    std::string output_;
    std::string loop_order_;
};

/// Generalized contraction. Each output element is the left-to-right sum over
/// the contracted labels (lexicographic in loop_order()) of the product of
/// operand elements, so results are bit-reproducible for any thread count.
Tensor contract(const ContractionSpec& spec, const std::vector<const Tensor*>& operands);

template <class... Ts>
Tensor einsum(std::string_view spec, const Ts&... operands) {
    return contract(ContractionSpec::parse(spec), std::vector<const Tensor*>{&operands...});
}

}  // namespace gsa
