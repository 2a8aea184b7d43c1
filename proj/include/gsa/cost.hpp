#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsa/model.hpp"

namespace gsa {

struct CostRecord {
    std::string name;
    std::string kind;
    std::uint64_t params = 0;
    std::uint64_t mults = 0;
    std::uint64_t adds = 0;

    std::uint64_t flops() const { return mults + adds; }
    friend bool operator==(const CostRecord&, const CostRecord&) = default;
};

/// Per-layer parameter and arithmetic accounting. One multiplication and one
/// addition are charged per multiply-accumulate of every contraction or
/// convolution; softmax, batch norm, ReLU, pooling and the positional
/// re-indexing are excluded from the totals and reported in `metadata`.
struct CostReport {
    std::string model;  ///< display name, e.g. "GSA-ResNet-50"
    std::string operation;
    std::vector<CostRecord> layers;
    std::uint64_t total_params = 0;
    std::uint64_t total_mults = 0;
    std::uint64_t total_adds = 0;
    nlohmann::json metadata = nlohmann::json::object();

    std::uint64_t total_flops() const { return total_mults + total_adds; }
    /// Recomputes the totals from the layer records.
    void recompute_totals();
    friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// Learnable scalars per layer from the closed-form summary: weights, batch
/// norm gamma and beta, relative embeddings, classifier weight and bias.
CostReport count_params(const ModelSpec& spec);
/// Same accounting taken from the allocated tensors of a built model.
CostReport count_params(Model& model);

/// Closed-form mults and adds at `input_size` x `input_size` (0 keeps the
/// spec's input size). Parameters are populated as well.
CostReport count_flops(const ModelSpec& spec, std::size_t input_size = 0);
inline CostReport count_flops(const Model& model, std::size_t input_size = 0) {
    return count_flops(model.spec, input_size);
}

/// Multiply-accumulates actually executed by one infer-mode forward pass.
std::uint64_t measured_macs(const Model& model, const Tensor& x);

std::string model_display_name(const ModelSpec& spec);
std::string operation_label(const ModelSpec& spec);

nlohmann::json to_json(const CostReport& r);
CostReport cost_report_from_json(const nlohmann::json& j);
/// Header: name,kind,params,mults,adds,flops followed by a TOTAL row.
void write_cost_csv(std::ostream& os, const CostReport& r);
/// Aligned table: Structure, Operation, Params, FLOPs.
std::string render_cost_table(const std::vector<CostReport>& rows);

// --- empirical scaling ----------------------------------------------------------

enum class BenchKernel { content, axial_positional, naive_quadratic };

BenchKernel parse_bench_kernel(const std::string& name);
std::string bench_kernel_name(BenchKernel k);

struct BenchOptions {
    BenchKernel kernel = BenchKernel::content;
    std::vector<std::size_t> sizes{8, 16, 32, 64, 128};  ///< square side lengths; N = side^2
    std::size_t reps = 5;
    std::size_t warmup = 1;
    std::size_t heads = 0;     ///< 0 selects the per-kernel default
    std::size_t channels = 0;  ///< per-head key/value channels; 0 selects the default
    /// Each timed rep repeats the kernel until at least this much time passed.
    double min_rep_seconds = 0.005;
    std::uint64_t seed = 0;
    bool time = true;  ///< false reports analytic counts only
};

struct BenchPoint {
    std::size_t side = 0;
    std::size_t pixels = 0;
    std::uint64_t analytic_flops = 0;
    double median_seconds = 0.0;
    double min_seconds = 0.0;
    double max_seconds = 0.0;
    double spread = 0.0;  ///< (max - min) / median
    std::size_t calls_per_rep = 0;
};

struct BenchReport {
    BenchKernel kernel = BenchKernel::content;
    std::vector<BenchPoint> points;
    double analytic_slope = 0.0;
    double expected_slope = 0.0;
    double empirical_slope = 0.0;  ///< NaN when timing is disabled
    bool unreliable = false;
    std::string note;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Analytic FLOPs of a kernel at square side `side`.
std::uint64_t bench_analytic_flops(BenchKernel k, std::size_t side, std::size_t heads, std::size_t channels);

/// Times the kernel at each size, fits log(time) and log(FLOPs) against
/// log(N) by least squares. Requires at least 4 sizes spanning 16x in N.
BenchReport scaling_benchmark(const BenchOptions& opts);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

nlohmann::json to_json(const BenchReport& r);
/// Header: kernel,side,pixels,analytic_flops,median_seconds,min_seconds,max_seconds,spread
void write_bench_csv(std::ostream& os, const BenchReport& r);

}  // namespace gsa
