#include <sstream>

#include "doctest.h"

#include "gsa/verify.hpp"

using namespace gsa;

TEST_SUITE("verify") {

TEST_CASE("relative error") {
    const Tensor a({3}, {1.0, 2.0, 4.0});
    CHECK(relative_error(a, a) == 0.0);
    CHECK(relative_error(Tensor({3}, {1.0, 2.0, 4.4}), a) == doctest::Approx(0.1));
    CHECK(relative_error(Tensor({1}, {0.5}), Tensor({1})) == 0.5);
}

TEST_CASE("loop oracles agree with the single-pixel examples") {
    const Tensor one({1, 1, 1, 1, 1}, {1.0}), five({1, 1, 1, 1, 1}, {5.0});
    CHECK(oracle_content_attention(one, one, five)[0] == doctest::Approx(5.0));
    const Tensor q({1, 1, 1, 1, 2}, {1.0, 1.0}), v({1, 1, 1, 1, 1}, {2.0}), r({1, 2}, {0.5, 0.5});
    CHECK(oracle_positional_axis(q, v, r, Axis::col, 1)[0] == 2.0);
}

TEST_CASE("each randomized check passes") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        CHECK(check_content_oracle(seed).pass);
        CHECK(check_axial_content_oracle(seed).pass);
        CHECK(check_positional_oracle(seed).pass);
        CHECK(check_gsa_forward_oracle(seed).pass);
        CHECK(equivariance_check(Equivariance::permutation, seed).pass);
        CHECK(equivariance_check(Equivariance::translation, seed).pass);
        CHECK(check_query_softmax_variant(seed).pass);
    }
    CHECK(check_linear_gradient(3).pass);
    CHECK(check_softmax_jacobian(3).pass);
}

TEST_CASE("a corrupted gradient is caught") {
    std::vector<double> x{0.3, -0.7};
    std::vector<double> wrong{2 * 0.3, 2 * -0.7 + 1e-3};
    auto loss = [&] { return x[0] * x[0] + x[1] * x[1]; };
    const OracleReport bad = grad_check(loss, {{"x", "x", x, wrong}});
    CHECK_FALSE(bad.pass);
    std::vector<double> right{2 * 0.3, 2 * -0.7};
    CHECK(grad_check(loss, {{"x", "x", x, right}}).pass);
    CHECK(x[0] == 0.3);
}

TEST_CASE("suite runner") {
    const auto reports = run_verify_suite("oracle", 0, 2);
    CHECK(reports.size() == 10);
    std::ostringstream os;
    write_json_lines(os, reports);
    std::istringstream is(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("check"));
        CHECK(j.at("pass").get<bool>());
        ++n;
    }
    CHECK(n == reports.size());
    CHECK_THROWS_AS(run_verify_suite("everything", 0, 1), ArgumentError);
}

}
