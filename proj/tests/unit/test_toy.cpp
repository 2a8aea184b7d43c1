#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "gsa/toy.hpp"

using namespace gsa;

namespace {

ToySpec tiny() {
    ToySpec s;
    s.image_size = 4;
    s.num_classes = 3;
    s.samples_per_class = 2;
    s.width = 4;
    s.blocks = 1;
    s.steps = 4;
    return s;
}

}  // namespace

TEST_SUITE("toy") {

TEST_CASE("dataset layout") {
    const ToySpec s = tiny();
    const ToyDataset d = make_toy_dataset(s);
    CHECK(d.images.shape() == Shape{6, 4, 4, 3});
    CHECK(d.labels == std::vector<std::size_t>{0, 1, 2, 0, 1, 2});
    CHECK(make_toy_dataset(s).images == d.images);
}

TEST_CASE("zero classifier starts at ln K") {
    const ToySpec s = tiny();
    const ToyEval e = evaluate_toy(build_toy_model(s), make_toy_dataset(s));
    CHECK(std::abs(e.loss - std::log(3.0)) < 1e-12);
}

TEST_CASE("zero learning rate keeps the loss flat") {
    ToySpec s = tiny();
    s.zero_head = false;
    s.lr = 0.0;
    const ToyResult r = train_toy(s);
    REQUIRE(r.losses.size() == s.steps + 1);
    for (double l : r.losses) CHECK(l == r.losses[0]);
    CHECK(r.ok());
}

TEST_CASE("a few steps reduce the loss") {
    ToySpec s = tiny();
    s.steps = 20;
    const ToyResult r = train_toy(s);
    CHECK(r.ok());
    CHECK(r.losses.back() < r.losses.front());
}

TEST_CASE("divergence is reported") {
    ToySpec s = tiny();
    s.noise = std::numeric_limits<double>::infinity();
    const ToyResult r = train_toy(s);
    REQUIRE_FALSE(r.ok());
    CHECK(*r.divergence_step == 0);
    CHECK(r.losses.size() == 1);
}

TEST_CASE("loss CSV") {
    ToyResult r;
    r.losses = {2.5, 1.25};
    std::ostringstream os;
    write_loss_csv(os, r);
    CHECK(os.str() == "step,loss\n0,2.5\n1,1.25\n");
}

TEST_CASE("spec validation") {
    ToySpec s = tiny();
    s.blocks = 4;
    CHECK_THROWS(s.validate());
    s = tiny();
    s.width = 5;
    CHECK_THROWS(s.validate());
}

}
