#include <cmath>

#include "doctest.h"

#include "gsa/cost.hpp"
#include "gsa/model.hpp"

using namespace gsa;

namespace {

ModelSpec small_spec(std::array<bool, 4> gsa_groups) {
    ModelSpec s;
    s.depth = 38;
    s.blocks_per_group = ModelSpec::canonical_blocks(38);
    s.group_uses_gsa = gsa_groups;
    s.input_size = 64;
    s.num_classes = 10;
    s.base_width = 8;
    s.heads = 2;
    return s;
}

std::uint64_t params_of(const std::string& preset) { return count_params(ModelSpec::preset(preset)).total_params; }

}  // namespace

TEST_SUITE("model") {

TEST_CASE("preset parameter counts") {
    auto near = [](std::uint64_t got, double target, double tol) {
        return std::abs(static_cast<double>(got) - target) <= tol * target;
    };
    CHECK(near(params_of("resnet50"), 25.6e6, 0.01));
    CHECK(near(params_of("gsa-resnet50"), 18.1e6, 0.01));
    CHECK(near(params_of("resnet101"), 44.5e6, 0.01));
    CHECK(near(params_of("gsa-resnet101"), 30.4e6, 0.01));
    CHECK(near(params_of("gsa-resnet38"), 14.2e6, 0.02));
    CHECK(near(params_of("m-gsa-resnet50"), 12.7e6, 0.02));
    CHECK(params_of("resnet50") == 25557032);
}

TEST_CASE("block layout") {
    const auto blocks = plan_blocks(ModelSpec::preset("gsa-resnet50"));
    CHECK(blocks.size() == 16);
    std::size_t gsa = 0;
    for (const auto& b : blocks) gsa += b.kind == BlockKind::gsa;
    CHECK(gsa == 16);

    const auto mixed = plan_blocks(ModelSpec::preset("table5:0011"));
    std::size_t g = 0, c = 0;
    for (const auto& b : mixed) (b.kind == BlockKind::gsa ? g : c)++;
    CHECK(g == 9);
    CHECK(c == 7);

    const std::size_t expected_res[4] = {56, 28, 14, 7};
    for (const auto& b : blocks) CHECK(b.out_resolution == expected_res[b.group]);
    CHECK(blocks[3].name == "group2.block1");
    CHECK(blocks[3].in_resolution == 56);
    CHECK(blocks[3].downsample);
    CHECK(blocks[3].gsa->height == 56);
    CHECK(blocks[3].gsa->d_k == 128);
}

TEST_CASE("ResNet-50 has 53 convolution layers") {
    const auto summary = describe_model(ModelSpec::preset("resnet50"));
    std::size_t convs = 0, fc = 0;
    for (const auto& l : summary.layers) {
        convs += l.kind == "stem_conv7x7" || l.kind == "conv1x1" || l.kind == "conv3x3";
        fc += l.kind == "fc";
    }
    CHECK(convs == 53);
    CHECK(fc == 1);
    CHECK(summary.layers.back().out_shape == Shape{1000});
}

TEST_CASE("replacing more groups removes parameters") {
    const char* order[] = {"table5:0000", "table5:0001", "table5:0011", "table5:0111", "table5:1111"};
    for (int i = 0; i + 1 < 5; ++i) CHECK(params_of(order[i]) > params_of(order[i + 1]));
    CHECK(params_of("table5:0000") == params_of("resnet50"));
    CHECK(params_of("table5:1111") == params_of("gsa-resnet50"));
}

TEST_CASE("branch ablations change parameter counts consistently") {
    CHECK(params_of("table3:111") == params_of("gsa-resnet50"));
    CHECK(params_of("table3:011") < params_of("table3:111"));
    CHECK(params_of("table3:110") < params_of("table3:111"));
    CHECK(params_of("axial-content-50") == params_of("gsa-resnet50"));
    CHECK_THROWS_AS(ModelSpec::preset("table3:000"), SpecError);
    CHECK_THROWS_AS(ModelSpec::preset("table3:01"), SpecError);
}

TEST_CASE("unknown preset lists the valid names") {
    try {
        ModelSpec::preset("resnet51");
        FAIL_CHECK("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("gsa-resnet50") != std::string::npos);
    }
}

TEST_CASE("spec JSON round trip and strict parsing") {
    const ModelSpec s = ModelSpec::preset("m-gsa-resnet50");
    const nlohmann::json j = s;
    CHECK(nlohmann::json(model_spec_from_json(j)) == j);

    nlohmann::json bad = j;
    bad["heds"] = 8;
    CHECK_THROWS_WITH_AS(model_spec_from_json(bad), "field 'heds': unknown field", SpecError);
    bad = j;
    bad["heads"] = "eight";
    CHECK_THROWS_AS(model_spec_from_json(bad), SpecError);
    bad = j;
    bad["heads"] = 7;
    CHECK_THROWS_AS(model_spec_from_json(bad), SpecError);
    bad = j;
    bad["depth"] = 34;
    CHECK_THROWS_AS(model_spec_from_json(bad), SpecError);
}

TEST_CASE("model construction is deterministic") {
    const ModelSpec s = small_spec({false, false, true, true});
    Model a = build_model(s, 5), b = build_model(s, 5), c = build_model(s, 6);
    auto pa = model_parameters(a), pb = model_parameters(b), pc = model_parameters(c);
    REQUIRE(pa.size() == pb.size());
    bool all_same = true, any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        all_same = all_same && std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin());
        any_diff = any_diff || !std::equal(pa[i].values.begin(), pa[i].values.end(), pc[i].values.begin());
    }
    CHECK(all_same);
    CHECK(any_diff);

    std::uint64_t total = 0;
    for (const auto& p : pa) total += p.values.size();
    CHECK(total == count_params(s).total_params);
}

TEST_CASE("forward pass shapes and batch independence") {
    const ModelSpec s = small_spec({false, false, false, true});
    Model m = build_model(s, 1);
    const Tensor x = random_normal({2, 64, 64, 3}, 2);
    const Tensor logits = model_forward(m, x);
    CHECK(logits.shape() == Shape{2, 10});

    Tensor first({1, 64, 64, 3});
    std::copy_n(x.data().begin(), first.size(), first.data().begin());
    const Tensor alone = model_forward(m, first);
    double diff = 0.0, scale_ref = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        diff = std::max(diff, std::abs(alone[i] - logits[i]));
        scale_ref = std::max(scale_ref, std::abs(logits[i]));
    }
    CHECK(std::isfinite(scale_ref));
    CHECK(diff <= 1e-12 * std::max(1.0, scale_ref));

    CHECK_THROWS_AS(model_forward(m, Tensor({1, 32, 32, 3})), ShapeError);
}

TEST_CASE("zero classifier gives zero logits") {
    const ModelSpec s = small_spec({false, false, true, true});
    Model m = build_model(s, 3);
    m.fc_weight = Tensor(m.fc_weight.shape());
    const Tensor logits = model_forward(m, random_normal({1, 64, 64, 3}, 4), Mode::train);
    CHECK(max_abs(logits) == 0.0);
}

TEST_CASE("summary JSON round trip") {
    const auto summary = describe_model(ModelSpec::preset("table5:0011"));
    const auto back = summary_from_json(summary_to_json(summary));
    CHECK(back.layers == summary.layers);
}

}
