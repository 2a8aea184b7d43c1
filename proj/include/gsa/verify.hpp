#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsa/attention.hpp"
#include "gsa/ops.hpp"
#include "gsa/tensor.hpp"

namespace gsa {

// --- loop oracles ------------------------------------------------------------------
//
// Written with plain index loops over raw buffers; nothing here calls the
// contraction engine, softmax or batch_norm.

/// Materializes, for every query pixel, its N attention weights
/// sum_k q_jk softmax_i(K_ik) and applies them to V. O(N^2) time, O(N) memory.
Tensor oracle_content_attention(const Tensor& k, const Tensor& q, const Tensor& v, bool softmax_on_queries = false);

/// Column-only weights (softmax over rows x), then row-only weights on the result.
Tensor oracle_axial_content_attention(const Tensor& k, const Tensor& q, const Tensor& v,
                                      bool softmax_on_queries = false);

/// Neighbor loop over |i - x| <= radius along one axis: weight q . r[i - x + n - 1].
Tensor oracle_positional_axis(const Tensor& q, const Tensor& v, const Tensor& r, Axis axis, std::size_t radius);

struct OracleBatchNorm {
    Tensor out;
    BatchNormState state;
};
/// Per-channel normalization over every axis but the last, or the last two
/// when `merge_last_two` (channels laid out as heads x per-head).
OracleBatchNorm oracle_batch_norm(const Tensor& t, const BatchNormState& state, Mode mode, bool merge_last_two = false);

Tensor oracle_positional_attention(const Tensor& q, const Tensor& v, const RelPosEmbedding& emb,
                                   const BatchNormState& bn_mid, const GsaConfig& cfg, Mode mode);

/// The whole module composed from the oracles above and a loop projection.
Tensor oracle_gsa_forward(const Tensor& x, const GsaParams& params, const GsaConfig& cfg, Mode mode);

// --- reports ---------------------------------------------------------------------

/// max |got - ref| / max |ref|; falls back to the absolute error when ref is 0.
double relative_error(const Tensor& got, const Tensor& ref);

struct OracleReport {
    std::string check;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    /// Worst relative error per parameter class (gradient checks).
    std::map<std::string, double> breakdown;
    std::string detail;

    void finish(double abs_err, double rel_err, double tol);
};

nlohmann::json to_json(const OracleReport& r);
/// One compact JSON object per line.
void write_json_lines(std::ostream& os, const std::vector<OracleReport>& reports);

// --- gradient checking ---------------------------------------------------------------

/// One scalar array probed by finite differences.
struct GradProbe {
    std::string cls;   ///< parameter class, e.g. "W_Q" or "input"
    std::string name;
    std::span<double> values;         ///< perturbed in place, restored afterwards
    std::span<const double> analytic; ///< claimed gradient
};

/// Central differences of `loss` around the current values of every probe.
/// The error of a class is max |fd - analytic| / max(max |analytic|, max |fd|).
/// A non-finite loss aborts with the probe name and coordinate in `detail`.
OracleReport grad_check(const std::function<double()>& loss, const std::vector<GradProbe>& probes, double step = 1e-5,
                        double tolerance = 1e-5);

/// gsa_backward against finite differences of sum(upstream * gsa_forward(x)).
OracleReport check_gsa_gradients(std::uint64_t seed, const GsaConfig& cfg, Mode mode = Mode::train,
                                 double step = 1e-5, double tolerance = 1e-5);

/// The gradient-check instance: 3x3 input, 2 heads, every branch on.
GsaConfig gradient_check_config();

// --- randomized case classes ---------------------------------------------------------

OracleReport check_content_oracle(std::uint64_t seed, double tolerance = 1e-10);
OracleReport check_axial_content_oracle(std::uint64_t seed, double tolerance = 1e-10);
OracleReport check_positional_oracle(std::uint64_t seed, double tolerance = 1e-10);
OracleReport check_gsa_forward_oracle(std::uint64_t seed, double tolerance = 1e-10);

enum class Equivariance { permutation, translation };

/// Permutation: a random pixel permutation applied to K, Q, V commutes with
/// content attention. Translation: with radius < h/4, shifting the content
/// down by s rows shifts the interior outputs of positional attention.
OracleReport equivariance_check(Equivariance kind, std::uint64_t seed, double tolerance = 1e-10);

/// Passes when the query-softmax variant differs from the default by more than 1e-3.
OracleReport check_query_softmax_variant(std::uint64_t seed);

OracleReport check_linear_gradient(std::uint64_t seed);
OracleReport check_softmax_jacobian(std::uint64_t seed);

/// Suites: "oracle", "equivariance", "gradient", "all". Case class i runs
/// seeds seed, seed + 1, ...; `cases` = 0 selects 100 per oracle class and 20
/// per gradient class.
std::vector<OracleReport> run_verify_suite(const std::string& suite, std::uint64_t seed, std::size_t cases = 0);

}  // namespace gsa
