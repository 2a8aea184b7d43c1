#include "gsa/contract.hpp"

#include <array>
#include <algorithm>
#include <cctype>
#include <vector>

#include "gsa/runtime.hpp"

namespace gsa {

ContractionSpec ContractionSpec::parse(std::string_view text) {
    std::string compact;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    }
    auto arrow = compact.find("->");
    if (arrow == std::string::npos) throw ArgumentError("contraction spec '" + compact + "' lacks '->'");

    ContractionSpec spec;
    std::string lhs = compact.substr(0, arrow);
    spec.output_ = compact.substr(arrow + 2);

    std::size_t start = 0;
    while (true) {
        auto comma = lhs.find(',', start);
        spec.inputs_.push_back(lhs.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }

    auto check_labels = [&](const std::string& s) {
        for (char c : s) {
            if (!std::isalpha(static_cast<unsigned char>(c))) {
                throw ArgumentError("invalid label '" + std::string(1, c) + "' in spec '" + compact + "'");
            }
        }
    };
    for (auto& in : spec.inputs_) check_labels(in);
    check_labels(spec.output_);

    for (std::size_t i = 0; i < spec.output_.size(); ++i) {
        char c = spec.output_[i];
        if (spec.output_.find(c, i + 1) != std::string::npos) {
            throw ArgumentError("output label '" + std::string(1, c) + "' repeated in '" + compact + "'");
        }
        bool found = false;
        for (auto& in : spec.inputs_) found = found || in.find(c) != std::string::npos;
        if (!found) {
            throw ArgumentError("output label '" + std::string(1, c) + "' absent from inputs in '" + compact + "'");
        }
    }

    spec.loop_order_ = spec.output_;
    for (auto& in : spec.inputs_) {
        for (char c : in) {
            if (spec.loop_order_.find(c) == std::string::npos) spec.loop_order_.push_back(c);
        }
    }
    if (spec.loop_order_.size() > kMaxIndices) {
        throw ArgumentError("contraction '" + compact + "' uses " + std::to_string(spec.loop_order_.size()) +
                            " distinct indices; at most 6 are supported");
    }
    return spec;
}

std::string ContractionSpec::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
        if (i) s += ',';
        s += inputs_[i];
    }
    return s + "->" + output_;
}

namespace {

constexpr std::size_t kMaxOperands = 4;
constexpr std::size_t kOuterFormMaxOutputs = 16384;
constexpr std::size_t kOuterFormMinTerms = 256;

struct Plan {
    std::size_t n_ops = 0;
    std::size_t n_out = 0;
    std::size_t n_loop = 0;
    std::array<std::size_t, ContractionSpec::kMaxIndices> extent{};
    // stride[op][slot]
    std::array<std::array<std::size_t, ContractionSpec::kMaxIndices>, kMaxOperands> stride{};
};

// Row form: the last output label becomes the innermost loop and every
// contracted tuple is an axpy over that row. Each output still accumulates its
// terms in lexicographic contracted order, so results match the dot form bit
// for bit.
void contract_rows(const Plan& plan, const std::array<const double*, kMaxOperands>& base, double* dst,
                   std::size_t m_out, std::size_t k_sum) {
    const std::size_t last = plan.n_out - 1;
    const std::size_t row_len = plan.extent[last];
    const std::size_t n_rows = m_out / row_len;
    std::array<std::size_t, kMaxOperands> rs{};
    for (std::size_t op = 0; op < plan.n_ops; ++op) rs[op] = plan.stride[op][last];

    auto body = [&](std::size_t begin, std::size_t end) {
        std::array<std::size_t, ContractionSpec::kMaxIndices> idx{};
        std::array<std::size_t, kMaxOperands> off{};
        {
            std::size_t rem = begin;
            for (std::size_t s = last; s-- > 0;) {
                idx[s] = rem % plan.extent[s];
                rem /= plan.extent[s];
            }
            for (std::size_t op = 0; op < plan.n_ops; ++op) {
                for (std::size_t s = 0; s < last; ++s) off[op] += idx[s] * plan.stride[op][s];
            }
        }
        for (std::size_t row = begin; row < end; ++row) {
            double* acc = dst + row * row_len;
            std::array<std::size_t, kMaxOperands> coff = off;
            std::array<std::size_t, ContractionSpec::kMaxIndices> cidx{};
            for (std::size_t k = 0; k < k_sum; ++k) {
                if (plan.n_ops == 2) {
                    const double* a = base[0] + coff[0];
                    const double* b = base[1] + coff[1];
                    const std::size_t sa = rs[0], sb = rs[1];
                    if (sa == 1 && sb == 0) {
                        const double bv = *b;
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += a[t] * bv;
                    } else if (sa == 0 && sb == 1) {
                        const double av = *a;
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += av * b[t];
                    } else if (sa == 1 && sb == 1) {
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += a[t] * b[t];
                    } else {
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += a[t * sa] * b[t * sb];
                    }
                } else {
                    for (std::size_t t = 0; t < row_len; ++t) {
                        double prod = 1.0;
                        for (std::size_t op = 0; op < plan.n_ops; ++op) prod *= base[op][coff[op] + t * rs[op]];
                        acc[t] += prod;
                    }
                }
                for (std::size_t s = plan.n_loop; s-- > plan.n_out;) {
                    if (++cidx[s] < plan.extent[s]) {
                        for (std::size_t op = 0; op < plan.n_ops; ++op) coff[op] += plan.stride[op][s];
                        break;
                    }
                    cidx[s] = 0;
                    for (std::size_t op = 0; op < plan.n_ops; ++op) {
                        coff[op] -= plan.stride[op][s] * (plan.extent[s] - 1);
                    }
                }
            }
            for (std::size_t s = last; s-- > 0;) {
                if (++idx[s] < plan.extent[s]) {
                    for (std::size_t op = 0; op < plan.n_ops; ++op) off[op] += plan.stride[op][s];
                    break;
                }
                idx[s] = 0;
                for (std::size_t op = 0; op < plan.n_ops; ++op) off[op] -= plan.stride[op][s] * (plan.extent[s] - 1);
            }
        }
    };
    parallel_for(n_rows, std::max<std::size_t>(1, 16384 / std::max<std::size_t>(1, k_sum * row_len)), body);
}

// Outer form for small outputs with long contractions: contracted tuples
// are the outermost loop and the whole output block stays in cache. Workers
// own disjoint output rows; per-output summation order is unchanged.
void contract_outer(const Plan& plan, const std::array<const double*, kMaxOperands>& base, double* dst,
                    std::size_t m_out, std::size_t k_sum) {
    const std::size_t last = plan.n_out - 1;
    const std::size_t row_len = plan.extent[last];
    const std::size_t n_rows = m_out / row_len;
    std::array<std::size_t, kMaxOperands> rs{};
    for (std::size_t op = 0; op < plan.n_ops; ++op) rs[op] = plan.stride[op][last];

    std::vector<std::size_t> row_off(n_rows * plan.n_ops);
    {
        std::array<std::size_t, ContractionSpec::kMaxIndices> idx{};
        for (std::size_t row = 0; row < n_rows; ++row) {
            for (std::size_t op = 0; op < plan.n_ops; ++op) {
                std::size_t o = 0;
                for (std::size_t s = 0; s < last; ++s) o += idx[s] * plan.stride[op][s];
                row_off[row * plan.n_ops + op] = o;
            }
            for (std::size_t s = last; s-- > 0;) {
                if (++idx[s] < plan.extent[s]) break;
                idx[s] = 0;
            }
        }
    }

    auto body = [&](std::size_t begin, std::size_t end) {
        std::array<std::size_t, kMaxOperands> coff{};
        std::array<std::size_t, ContractionSpec::kMaxIndices> cidx{};
        for (std::size_t k = 0; k < k_sum; ++k) {
            for (std::size_t row = begin; row < end; ++row) {
                double* acc = dst + row * row_len;
                const std::size_t* ro = &row_off[row * plan.n_ops];
                if (plan.n_ops == 2) {
                    const double* a = base[0] + coff[0] + ro[0];
                    const double* b = base[1] + coff[1] + ro[1];
                    const std::size_t sa = rs[0], sb = rs[1];
                    if (sa == 1 && sb == 0) {
                        const double bv = *b;
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += a[t] * bv;
                    } else if (sa == 0 && sb == 1) {
                        const double av = *a;
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += av * b[t];
                    } else if (sa == 1 && sb == 1) {
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += a[t] * b[t];
                    } else {
                        for (std::size_t t = 0; t < row_len; ++t) acc[t] += a[t * sa] * b[t * sb];
                    }
                } else {
                    for (std::size_t t = 0; t < row_len; ++t) {
                        double prod = 1.0;
                        for (std::size_t op = 0; op < plan.n_ops; ++op) prod *= base[op][coff[op] + ro[op] + t * rs[op]];
                        acc[t] += prod;
                    }
                }
            }
            for (std::size_t s = plan.n_loop; s-- > plan.n_out;) {
                if (++cidx[s] < plan.extent[s]) {
                    for (std::size_t op = 0; op < plan.n_ops; ++op) coff[op] += plan.stride[op][s];
                    break;
                }
                cidx[s] = 0;
                for (std::size_t op = 0; op < plan.n_ops; ++op) coff[op] -= plan.stride[op][s] * (plan.extent[s] - 1);
            }
        }
    };
    parallel_for(n_rows, std::max<std::size_t>(1, n_rows / 8), body);
}

}  // namespace

Tensor contract(const ContractionSpec& spec, const std::vector<const Tensor*>& operands) {
    const auto& inputs = spec.inputs();
    if (operands.size() != inputs.size()) {
        throw ArgumentError("spec '" + spec.to_string() + "' expects " + std::to_string(inputs.size()) +
                            " operands, got " + std::to_string(operands.size()));
    }
    if (operands.size() > kMaxOperands) throw ArgumentError("at most 4 operands are supported");

    const std::string& order = spec.loop_order();
    Plan plan;
    plan.n_ops = operands.size();
    plan.n_out = spec.output().size();
    plan.n_loop = order.size();
    std::array<bool, ContractionSpec::kMaxIndices> seen{};

    for (std::size_t op = 0; op < operands.size(); ++op) {
        const Tensor& t = *operands[op];
        const std::string& labels = inputs[op];
        if (labels.size() != t.rank()) {
            throw ShapeError("operand " + std::to_string(op) + " has rank " + std::to_string(t.rank()) +
                             " but spec term '" + labels + "' has " + std::to_string(labels.size()) + " labels");
        }
        auto strides = t.strides();
        for (std::size_t ax = 0; ax < labels.size(); ++ax) {
            std::size_t slot = order.find(labels[ax]);
            std::size_t e = t.shape()[ax];
            if (seen[slot] && plan.extent[slot] != e) {
                throw ShapeError("label '" + std::string(1, labels[ax]) + "' bound to extents " +
                                 std::to_string(plan.extent[slot]) + " and " + std::to_string(e) + " in '" +
                                 spec.to_string() + "'");
            }
            seen[slot] = true;
            plan.extent[slot] = e;
            plan.stride[op][slot] += strides[ax];
        }
    }

    Shape out_shape(plan.n_out);
    std::size_t m_out = 1;
    for (std::size_t s = 0; s < plan.n_out; ++s) {
        out_shape[s] = plan.extent[s];
        m_out *= plan.extent[s];
    }
    std::size_t k_sum = 1;
    for (std::size_t s = plan.n_out; s < plan.n_loop; ++s) k_sum *= plan.extent[s];

    Tensor out(out_shape);
    FlopCounter::record_macs(static_cast<std::uint64_t>(m_out) * k_sum);

    std::array<const double*, kMaxOperands> base{};
    for (std::size_t op = 0; op < plan.n_ops; ++op) base[op] = operands[op]->data().data();
    double* dst = out.data().data();

    const std::size_t n_con = plan.n_loop - plan.n_out;
    // Innermost contracted slot runs as a tight strided loop; the remaining
    // contracted slots are walked by an odometer.
    const std::size_t inner_slot = n_con ? plan.n_loop - 1 : 0;
    const std::size_t inner_len = n_con ? plan.extent[inner_slot] : 1;
    const std::size_t outer_k = k_sum / inner_len;

    if (plan.n_out > 0 && m_out <= kOuterFormMaxOutputs && k_sum >= kOuterFormMinTerms) {
        contract_outer(plan, base, dst, m_out, k_sum);
        return out;
    }
    if (plan.n_out > 0 && plan.extent[plan.n_out - 1] >= inner_len && plan.extent[plan.n_out - 1] >= 4) {
        contract_rows(plan, base, dst, m_out, k_sum);
        return out;
    }

    auto body = [&](std::size_t begin, std::size_t end) {
        std::array<std::size_t, ContractionSpec::kMaxIndices> idx{};
        std::array<std::size_t, kMaxOperands> off{};
        {
            std::size_t rem = begin;
            for (std::size_t s = plan.n_out; s-- > 0;) {
                idx[s] = rem % plan.extent[s];
                rem /= plan.extent[s];
            }
            for (std::size_t op = 0; op < plan.n_ops; ++op) {
                for (std::size_t s = 0; s < plan.n_out; ++s) off[op] += idx[s] * plan.stride[op][s];
            }
        }

        for (std::size_t o = begin; o < end; ++o) {
            double acc = 0.0;
            std::array<std::size_t, kMaxOperands> coff = off;
            std::array<std::size_t, ContractionSpec::kMaxIndices> cidx{};
            for (std::size_t outer = 0; outer < outer_k; ++outer) {
                if (plan.n_ops == 2) {
                    const double* a = base[0] + coff[0];
                    const double* b = base[1] + coff[1];
                    const std::size_t sa = n_con ? plan.stride[0][inner_slot] : 0;
                    const std::size_t sb = n_con ? plan.stride[1][inner_slot] : 0;
                    for (std::size_t t = 0; t < inner_len; ++t) acc += a[t * sa] * b[t * sb];
                } else {
                    for (std::size_t t = 0; t < inner_len; ++t) {
                        double prod = 1.0;
                        for (std::size_t op = 0; op < plan.n_ops; ++op) {
                            std::size_t s = n_con ? plan.stride[op][inner_slot] : 0;
                            prod *= base[op][coff[op] + t * s];
                        }
                        acc += prod;
                    }
                }
                // advance the outer contracted odometer (slots n_out .. n_loop-2)
                for (std::size_t s = plan.n_loop - 1; n_con > 1 && s-- > plan.n_out;) {
                    if (++cidx[s] < plan.extent[s]) {
                        for (std::size_t op = 0; op < plan.n_ops; ++op) coff[op] += plan.stride[op][s];
                        break;
                    }
                    cidx[s] = 0;
                    for (std::size_t op = 0; op < plan.n_ops; ++op) {
                        coff[op] -= plan.stride[op][s] * (plan.extent[s] - 1);
                    }
                }
            }
            dst[o] = acc;

            for (std::size_t s = plan.n_out; s-- > 0;) {
                if (++idx[s] < plan.extent[s]) {
                    for (std::size_t op = 0; op < plan.n_ops; ++op) off[op] += plan.stride[op][s];
                    break;
                }
                idx[s] = 0;
                for (std::size_t op = 0; op < plan.n_ops; ++op) off[op] -= plan.stride[op][s] * (plan.extent[s] - 1);
            }
        }
    };

    parallel_for(m_out, std::max<std::size_t>(1, 16384 / std::max<std::size_t>(1, k_sum)), body);
    return out;
}

}  // namespace gsa
