#include <cmath>
#include <sstream>

#include "doctest.h"

#include "gsa/cost.hpp"

using namespace gsa;

TEST_SUITE("cost") {

TEST_CASE("preset FLOP counts at 224") {
    auto gflops = [](const std::string& preset) {
        return static_cast<double>(count_flops(ModelSpec::preset(preset)).total_flops()) / 1e9;
    };
    CHECK(std::abs(gflops("resnet50") - 8.2) <= 0.02 * 8.2);
    CHECK(std::abs(gflops("gsa-resnet50") - 7.2) <= 0.05 * 7.2);
    CHECK(std::abs(gflops("gsa-resnet101") - 12.2) <= 0.05 * 12.2);
    CHECK(std::abs(gflops("axial-content-50") - 7.3) <= 0.05 * 7.3);
}

TEST_CASE("multiplies and adds are counted separately and summed") {
    const CostReport r = count_flops(ModelSpec::preset("resnet50"));
    CHECK(r.total_mults == r.total_adds);
    CHECK(r.total_flops() == 2 * r.total_mults);
    std::uint64_t sum = 0;
    for (const auto& l : r.layers) sum += l.flops();
    CHECK(sum == r.total_flops());
    CHECK(r.metadata.contains("excluded_from_totals"));
}

TEST_CASE("closed-form and instantiated parameter counts agree") {
    ModelSpec s;
    s.depth = 38;
    s.blocks_per_group = ModelSpec::canonical_blocks(38);
    s.group_uses_gsa = {false, true, false, true};
    s.input_size = 32;
    s.num_classes = 7;
    s.base_width = 8;
    s.heads = 2;
    Model m = build_model(s, 0);
    const CostReport closed = count_params(s), inst = count_params(m);
    CHECK(closed.total_params == inst.total_params);
    REQUIRE(closed.layers.size() == inst.layers.size());
    for (std::size_t i = 0; i < closed.layers.size(); ++i) {
        INFO(closed.layers[i].name);
        CHECK(closed.layers[i].params == inst.layers[i].params);
    }
}

TEST_CASE("counted multiply-accumulates match an instrumented forward pass") {
    ModelSpec s;
    s.depth = 38;
    s.blocks_per_group = ModelSpec::canonical_blocks(38);
    s.group_uses_gsa = {false, false, true, true};
    s.input_size = 32;
    s.num_classes = 5;
    s.base_width = 8;
    s.heads = 2;
    const Model m = build_model(s, 1);
    CHECK(measured_macs(m, random_normal({1, 32, 32, 3}, 2)) == count_flops(s).total_mults);
}

TEST_CASE("benchmark FLOP formulas scale as expected") {
    for (std::size_t side : {8, 16, 32}) {
        const double content = static_cast<double>(bench_analytic_flops(BenchKernel::content, side, 4, 16));
        const double content2 = static_cast<double>(bench_analytic_flops(BenchKernel::content, 2 * side, 4, 16));
        CHECK(content2 / content == 4.0);
        const double naive = static_cast<double>(bench_analytic_flops(BenchKernel::naive_quadratic, side, 1, 2));
        const double naive2 = static_cast<double>(bench_analytic_flops(BenchKernel::naive_quadratic, 2 * side, 1, 2));
        CHECK(naive2 / naive == 16.0);
    }
    CHECK(loglog_slope({1, 2, 4, 8}, {3, 6, 12, 24}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loglog_slope({1, 10, 100}, {5, 500, 50000}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("analytic-only benchmark") {
    BenchOptions o;
    o.time = false;
    for (auto k : {BenchKernel::content, BenchKernel::axial_positional, BenchKernel::naive_quadratic}) {
        o.kernel = k;
        const BenchReport r = scaling_benchmark(o);
        CHECK(r.analytic_slope == doctest::Approx(r.expected_slope).epsilon(1e-9));
        CHECK(std::isnan(r.empirical_slope));
        CHECK(parse_bench_kernel(bench_kernel_name(k)) == k);
    }
    o.sizes = {8, 9, 10, 11};
    CHECK_THROWS_AS(scaling_benchmark(o), ArgumentError);
    o.sizes = {8, 16, 32};
    CHECK_THROWS_AS(scaling_benchmark(o), ArgumentError);
}

TEST_CASE("report serialization") {
    const CostReport r = count_flops(ModelSpec::preset("gsa-resnet38"));
    CHECK(cost_report_from_json(to_json(r)) == r);

    std::ostringstream csv;
    write_cost_csv(csv, r);
    const std::string text = csv.str();
    CHECK(text.rfind("name,kind,params,mults,adds,flops\n", 0) == 0);
    CHECK(text.find("TOTAL") != std::string::npos);

    const std::string table = render_cost_table({count_params(ModelSpec::preset("resnet50"))});
    CHECK(table.find("ResNet-50") != std::string::npos);
    CHECK(table.find("25.6M") != std::string::npos);
}

TEST_CASE("display names") {
    CHECK(model_display_name(ModelSpec::preset("resnet50")) == "ResNet-50");
    CHECK(model_display_name(ModelSpec::preset("gsa-resnet101")) == "GSA-ResNet-101");
    CHECK(model_display_name(ModelSpec::preset("m-gsa-resnet50")) == "M-GSA-ResNet-50");
    CHECK(operation_label(ModelSpec::preset("resnet50")) == "Convolution");
}

}
