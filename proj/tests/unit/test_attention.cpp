#include <cmath>

#include "doctest.h"

#include "gsa/attention.hpp"
#include "gsa/ops.hpp"

using namespace gsa;

namespace {

GsaConfig small_config() {
    GsaConfig cfg;
    cfg.d_in = 6;
    cfg.d_k = 4;
    cfg.d_out = 4;
    cfg.n_heads = 2;
    cfg.height = 4;
    cfg.width = 3;
    return cfg;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("single pixel content attention returns q times v") {
    GsaConfig cfg;
    cfg.d_in = cfg.d_k = cfg.d_out = 1;
    cfg.n_heads = 1;
    const Tensor k({1, 1, 1, 1, 1}, {0.3}), q({1, 1, 1, 1, 1}, {1.0}), v({1, 1, 1, 1, 1}, {5.0});
    CHECK(content_attention(k, q, v, cfg)[0] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("constant values pass through content attention scaled by the query sum") {
    GsaConfig cfg = small_config();
    const Tensor k = random_normal({1, 4, 3, 2, 2}, 1), q = random_normal({1, 4, 3, 2, 2}, 2);
    const Tensor v({1, 4, 3, 2, 2}, 1.5);
    const Tensor out = content_attention(k, q, v, cfg);
    for (std::size_t p = 0; p < 12; ++p)
        for (std::size_t n = 0; n < 2; ++n) {
            const double qs = q[(p * 2 + n) * 2] + q[(p * 2 + n) * 2 + 1];
            for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(out[(p * 2 + n) * 2 + c] - 1.5 * qs) < 1e-14);
        }
}

TEST_CASE("re-index tensor") {
    const Tensor one = build_reindex_tensor(1, 1);
    CHECK(one.shape() == Shape{1, 1, 1});
    CHECK(one[0] == 1.0);
    const Tensor r = build_reindex_tensor(3, 1);
    CHECK(r.shape() == Shape{3, 3, 5});
    double total = 0.0;
    for (double v : r.data()) total += v;
    CHECK(total == 7.0);
    CHECK(r.at({0, 0, 2}) == 1.0);
    CHECK(r.at({0, 1, 3}) == 1.0);
    CHECK(r.at({2, 0, 0}) == 0.0);
    CHECK_THROWS_AS(build_reindex_tensor(0, 1), ArgumentError);
}

TEST_CASE("one-pixel positional example") {
    GsaConfig cfg;
    cfg.d_in = 1;
    cfg.d_k = 2;
    cfg.d_out = 1;
    cfg.n_heads = 1;
    const Tensor q({1, 1, 1, 1, 2}, {1.0, 1.0}), v({1, 1, 1, 1, 1}, {2.0}), r({1, 2}, {0.5, 0.5});
    CHECK(positional_attention_axis(q, v, r, Axis::col, cfg)[0] == 2.0);
    CHECK(positional_attention_axis(q, v, r, Axis::row, cfg)[0] == 2.0);
}

TEST_CASE("zero embeddings give zero positional output") {
    GsaConfig cfg = small_config();
    const Tensor q = random_normal({2, 4, 3, 2, 2}, 3), v = random_normal({2, 4, 3, 2, 2}, 4);
    RelPosEmbedding emb{Tensor({7, 2}), Tensor({5, 2})};
    const Tensor out = positional_attention(q, v, emb, BatchNormState::identity(4), cfg, Mode::infer);
    CHECK(max_abs(out) == 0.0);
    CHECK_THROWS_AS(positional_attention_axis(q, v, Tensor({5, 2}), Axis::col, cfg), ShapeError);
}

TEST_CASE("column-only module with zero embedding outputs the output shift") {
    GsaConfig cfg = small_config();
    cfg.content_on = false;
    cfg.row_on = false;
    GsaParams p = GsaParams::init(cfg, 7);
    p.emb.r_col = Tensor(p.emb.r_col.shape());
    p.bn_out.beta = {0.5, -1.0, 2.0, 0.25};
    const Tensor out = gsa_forward(random_normal({1, 4, 3, 6}, 8), p, cfg, Mode::infer);
    CHECK(out.shape() == Shape{1, 4, 3, 4});
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == p.bn_out.beta[i % 4]);
}

TEST_CASE("branches add under an affine output norm") {
    GsaConfig full = small_config();
    GsaParams p = GsaParams::init(full, 9);
    p.emb.r_col = random_normal(p.emb.r_col.shape(), 10);
    p.emb.r_row = random_normal(p.emb.r_row.shape(), 11);
    const Tensor x = random_normal({2, 4, 3, 6}, 12);

    GsaConfig content_only = full;
    content_only.col_on = content_only.row_on = false;
    GsaConfig positional_only = full;
    positional_only.content_on = false;

    const Tensor a = gsa_forward(x, p, content_only, Mode::infer);
    const Tensor b = gsa_forward(x, p, positional_only, Mode::infer);
    const Tensor both = gsa_forward(x, p, full, Mode::infer);
    CHECK(max_abs(sub(both, add(a, b))) <= 1e-12 * max_abs(both));
}

TEST_CASE("query softmax variant differs from the default") {
    GsaConfig cfg = small_config();
    const Tensor k = random_normal({1, 4, 3, 2, 2}, 13), q = random_normal({1, 4, 3, 2, 2}, 14),
                 v = random_normal({1, 4, 3, 2, 2}, 15);
    GsaConfig alt = cfg;
    alt.softmax_on_queries = true;
    CHECK(max_abs(sub(content_attention(k, q, v, cfg), content_attention(k, q, v, alt))) > 1e-3);
}

TEST_CASE("config validation") {
    GsaConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.d_k = 5;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = small_config();
    cfg.content_on = cfg.col_on = cfg.row_on = false;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = small_config();
    const GsaParams p = GsaParams::init(cfg, 1);
    CHECK_THROWS_AS(gsa_forward(Tensor({1, 4, 4, 6}), p, cfg), ShapeError);
}

TEST_CASE("multiply-accumulate counts") {
    GsaConfig cfg;
    cfg.d_in = cfg.d_k = cfg.d_out = 8;
    cfg.n_heads = 2;
    cfg.height = cfg.width = 4;
    const GsaMacs m = gsa_macs(cfg);
    CHECK(m.projection == 16u * 8 * 24);
    CHECK(m.content == 2u * 16 * 2 * 4 * 4);
    CHECK(m.positional == 2u * 16 * 4 * 2 * 8);
    CHECK(m.reindex == 2u * 4 * 4 * 7 * 4);
    CHECK(m.total() == m.projection + m.content + m.positional);

    cfg.content_on = false;
    const GsaMacs no_content = gsa_macs(cfg);
    CHECK(no_content.content == 0);
    CHECK(no_content.projection == 16u * 8 * 16);

    cfg.content_on = true;
    cfg.axial_content = true;
    CHECK(gsa_macs(cfg).content == 2 * m.content);
}

TEST_CASE("parameter listing respects active branches") {
    GsaConfig cfg = small_config();
    GsaParams p = GsaParams::init(cfg, 3);
    auto names = [](const std::vector<ParamRef>& refs) {
        std::vector<std::string> out;
        for (const auto& r : refs) out.push_back(r.name);
        return out;
    };
    const auto all = names(list_parameters(p, cfg));
    CHECK(std::find(all.begin(), all.end(), "W_K") != all.end());
    cfg.content_on = false;
    const auto some = names(list_parameters(p, cfg));
    CHECK(std::find(some.begin(), some.end(), "W_K") == some.end());
    CHECK(std::find(some.begin(), some.end(), "W_Q") != some.end());
}

}
