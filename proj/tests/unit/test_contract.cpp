#include <map>

#include "doctest.h"

#include "gsa/contract.hpp"
#include "gsa/ops.hpp"
#include "gsa/runtime.hpp"

using namespace gsa;

namespace {

// Brute-force evaluator: walks every assignment of the loop labels in
// lexicographic order and accumulates products.
Tensor reference_contract(const std::string& text, const std::vector<const Tensor*>& ops) {
    const auto spec = ContractionSpec::parse(text);
    const std::string& order = spec.loop_order();
    std::map<char, std::size_t> extent;
    for (std::size_t o = 0; o < ops.size(); ++o)
        for (std::size_t a = 0; a < spec.inputs()[o].size(); ++a) extent[spec.inputs()[o][a]] = ops[o]->shape()[a];
    Shape out_shape;
    for (char c : spec.output()) out_shape.push_back(extent[c]);
    Tensor out(out_shape);
    std::vector<std::size_t> idx(order.size(), 0);
    auto flat = [&](const std::string& labels, const Shape& shape) {
        std::size_t f = 0;
        for (std::size_t a = 0; a < labels.size(); ++a) f = f * shape[a] + idx[order.find(labels[a])];
        return f;
    };
    while (true) {
        double prod = 1.0;
        for (std::size_t o = 0; o < ops.size(); ++o) prod *= (*ops[o])[flat(spec.inputs()[o], ops[o]->shape())];
        out[flat(spec.output(), out_shape)] += prod;
        std::size_t s = order.size();
        while (s > 0) {
            --s;
            if (++idx[s] < extent[order[s]]) break;
            idx[s] = 0;
            if (s == 0) return out;
        }
        if (order.empty()) return out;
    }
}

}  // namespace

TEST_SUITE("contract") {

TEST_CASE("identity and dot products") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor eye({2, 2}, {1, 0, 0, 1});
    CHECK(einsum("ij,jk->ik", a, eye) == a);
    Tensor x({3}, {1, 2, 3}), ones({3}, 1.0);
    CHECK(einsum("i,i->", x, ones)[0] == 6.0);
    CHECK(einsum("ii->", a)[0] == 5.0);
    CHECK(einsum("ij->ji", a).at({0, 1}) == 3.0);
}

TEST_CASE("matches the brute-force evaluator") {
    const Tensor a = random_normal({2, 2, 3}, 1), b = random_normal({3, 2, 2}, 2);
    CHECK(einsum("xyd,dnk->xynk", a, b) == reference_contract("xyd,dnk->xynk", {&a, &b}));

    // shapes chosen to exercise the dot, row and outer loop orders
    const Tensor k = random_normal({1, 20, 20, 2, 8}, 3), v = random_normal({1, 20, 20, 2, 8}, 4);
    CHECK(einsum("bxynk,bxynv->bnkv", k, v) == reference_contract("bxynk,bxynv->bnkv", {&k, &v}));
    const Tensor ctx = random_normal({1, 2, 8, 8}, 5);
    CHECK(einsum("bxynk,bnkv->bxynv", k, ctx) == reference_contract("bxynk,bnkv->bxynv", {&k, &ctx}));
    const Tensor m = random_normal({3, 40}, 6), n = random_normal({40, 2}, 7);
    CHECK(einsum("ij,jk->ik", m, n) == reference_contract("ij,jk->ik", {&m, &n}));
    const Tensor c3 = random_normal({40}, 8);
    CHECK(einsum("ij,jk,j->ik", m, n, c3) == reference_contract("ij,jk,j->ik", {&m, &n, &c3}));
}

TEST_CASE("bit-identical across thread counts") {
    const Tensor k = random_normal({2, 12, 12, 2, 6}, 11), v = random_normal({2, 12, 12, 2, 5}, 12);
    set_num_threads(1);
    const Tensor one = einsum("bxynk,bxynv->bnkv", k, v);
    const Tensor one_t = einsum("bxynk,bxynv->bxynv", k, v);
    set_num_threads(3);
    const Tensor three = einsum("bxynk,bxynv->bnkv", k, v);
    const Tensor three_t = einsum("bxynk,bxynv->bxynv", k, v);
    set_num_threads(1);
    CHECK(one == three);
    CHECK(one_t == three_t);
}

TEST_CASE("multilinearity and associativity") {
    const Tensor a = random_normal({3, 4}, 21), a2 = random_normal({3, 4}, 22), b = random_normal({4, 5}, 23);
    const double alpha = 0.7, beta = -1.3;
    const Tensor lhs = einsum("ij,jk->ik", axpy(scale(a, alpha), beta, a2), b);
    const Tensor rhs = axpy(scale(einsum("ij,jk->ik", a, b), alpha), beta, einsum("ij,jk->ik", a2, b));
    CHECK(max_abs(sub(lhs, rhs)) <= 1e-12 * max_abs(rhs));

    const Tensor c = random_normal({5, 2}, 24);
    const Tensor left = einsum("ik,kl->il", einsum("ij,jk->ik", a, b), c);
    const Tensor right = einsum("ij,jl->il", a, einsum("jk,kl->jl", b, c));
    CHECK(max_abs(sub(left, right)) <= 1e-10 * max_abs(left));
}

TEST_CASE("counts one multiply-accumulate per term") {
    const Tensor a({2, 3}, 1.0), b({3, 4}, 1.0);
    FlopCounter counter;
    einsum("ij,jk->ik", a, b);
    CHECK(counter.tally().mults == 24);
    CHECK(counter.tally().adds == 24);
    CHECK(counter.tally().total() == 48);
    {
        FlopPause pause;
        einsum("ij,jk->ik", a, b);
    }
    CHECK(counter.tally().total() == 48);
}

TEST_CASE("rejects malformed specs") {
    const Tensor a({2, 3}), b({4, 5});
    CHECK_THROWS_AS(einsum("ij,jk->ik", a, b), ShapeError);
    CHECK_THROWS_AS(einsum("ijk->ik", a), ShapeError);
    CHECK_THROWS_AS(ContractionSpec::parse("ij,jk"), ArgumentError);
    CHECK_THROWS_AS(ContractionSpec::parse("ij->ii"), ArgumentError);
    CHECK_THROWS_AS(ContractionSpec::parse("ij->iz"), ArgumentError);
    CHECK_THROWS_AS(ContractionSpec::parse("i1->i"), ArgumentError);
    CHECK_THROWS_AS(ContractionSpec::parse("abcdefg->a"), ArgumentError);
    CHECK_NOTHROW(ContractionSpec::parse("abcdef->a"));
}

}
