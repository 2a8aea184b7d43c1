#include <limits>

#include "doctest.h"

#include "gsa/attention.hpp"
#include "gsa/ops.hpp"
#include "gsa/verify.hpp"

using namespace gsa;

namespace {

void check_variant(const GsaConfig& cfg, Mode mode, std::uint64_t seed) {
    const OracleReport r = check_gsa_gradients(seed, cfg, mode);
    INFO(cfg.describe() << " " << r.detail);
    for (const auto& [cls, err] : r.breakdown) {
        INFO(cls);
        CHECK(err <= 1e-5);
    }
    CHECK(r.pass);
}

}  // namespace

TEST_SUITE("backward") {

TEST_CASE("zero upstream gradient gives zero gradients") {
    const GsaConfig cfg = gradient_check_config();
    const GsaParams p = GsaParams::init(cfg, 1);
    const Tensor x = random_normal({2, cfg.height, cfg.width, cfg.d_in}, 2);
    GsaGradients g = gsa_backward(x, p, cfg, Tensor({2, cfg.height, cfg.width, cfg.d_out}));
    CHECK(max_abs(g.input) == 0.0);
    GsaParams copy = g.params;
    for (const auto& ref : list_parameters(copy, cfg))
        for (double v : ref.values) CHECK(v == 0.0);
}

TEST_CASE("disabled branches receive exactly zero gradient") {
    GsaConfig cfg = gradient_check_config();
    cfg.col_on = false;
    GsaParams p = GsaParams::init(cfg, 3);
    const Tensor x = random_normal({2, cfg.height, cfg.width, cfg.d_in}, 4);
    const Tensor u = random_normal({2, cfg.height, cfg.width, cfg.d_out}, 5);
    GsaGradients g = gsa_backward(x, p, cfg, u);
    CHECK(max_abs(g.params.emb.r_col) == 0.0);
    CHECK(max_abs(g.params.emb.r_row) > 0.0);

    cfg = gradient_check_config();
    cfg.content_on = false;
    g = gsa_backward(x, GsaParams::init(cfg, 3), cfg, u);
    CHECK(max_abs(g.params.kqv.w_k) == 0.0);
    CHECK(max_abs(g.params.kqv.w_q) > 0.0);
}

TEST_CASE("default configuration matches finite differences") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) check_variant(gradient_check_config(), Mode::train, seed);
}

TEST_CASE("inference mode matches finite differences") {
    check_variant(gradient_check_config(), Mode::infer, 11);
}

TEST_CASE("variants match finite differences") {
    GsaConfig axial = gradient_check_config();
    axial.axial_content = true;
    check_variant(axial, Mode::train, 21);

    GsaConfig qsoft = gradient_check_config();
    qsoft.softmax_on_queries = true;
    check_variant(qsoft, Mode::train, 22);

    GsaConfig windowed = gradient_check_config();
    windowed.height = 4;
    windowed.window = 1;
    check_variant(windowed, Mode::train, 23);

    GsaConfig col_only = gradient_check_config();
    col_only.content_on = false;
    col_only.row_on = false;
    check_variant(col_only, Mode::train, 24);

    GsaConfig content_only = gradient_check_config();
    content_only.col_on = content_only.row_on = false;
    check_variant(content_only, Mode::train, 25);
}

TEST_CASE("gradient checker reports a non-finite loss") {
    std::vector<double> v{1.0}, a{0.0};
    const OracleReport r = grad_check([] { return std::numeric_limits<double>::quiet_NaN(); },
                                      {{"x", "x", v, a}});
    CHECK_FALSE(r.pass);
    CHECK_FALSE(r.detail.empty());
}

}
