// Acceptance suite: one PASS/FAIL line per criterion, with the measured values.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gsa/cost.hpp"
#include "gsa/model.hpp"
#include "gsa/toy.hpp"
#include "gsa/verify.hpp"

using namespace gsa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [out of tolerance]");
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Outcome parameter_counts() {
    struct Row {
        const char* preset;
        double target;
        double tol;
    };
    const Row rows[] = {{"resnet50", 25.6e6, 0.01},     {"gsa-resnet50", 18.1e6, 0.01},  {"resnet101", 44.5e6, 0.01},
                        {"gsa-resnet101", 30.4e6, 0.01}, {"gsa-resnet38", 14.2e6, 0.02}, {"m-gsa-resnet50", 12.7e6, 0.02}};
    Outcome o;
    for (const auto& r : rows) {
        const auto t0 = Clock::now();
        const double got = static_cast<double>(count_params(ModelSpec::preset(r.preset)).total_params);
        const double dt = seconds_since(t0);
        const double dev = (got - r.target) / r.target;
        o.require(std::abs(dev) <= r.tol && dt < 1.0,
                  std::string(r.preset) + fmt(" %.3fM (%+.2f%%, %.3fs)", got / 1e6, 100 * dev, dt));
    }
    return o;
}

Outcome flop_counts() {
    struct Row {
        const char* preset;
        double target;
        double tol;
    };
    const Row rows[] = {{"resnet50", 8.2e9, 0.02},
                        {"gsa-resnet50", 7.2e9, 0.05},
                        {"gsa-resnet101", 12.2e9, 0.05},
                        {"axial-content-50", 7.3e9, 0.05}};
    Outcome o;
    for (const auto& r : rows) {
        const auto t0 = Clock::now();
        const double got = static_cast<double>(count_flops(ModelSpec::preset(r.preset), 224).total_flops());
        const double dt = seconds_since(t0);
        const double dev = (got - r.target) / r.target;
        o.require(std::abs(dev) <= r.tol && dt < 1.0,
                  std::string(r.preset) + fmt(" %.3fG (%+.2f%%, %.3fs)", got / 1e9, 100 * dev, dt));
    }
    return o;
}

struct SeedSweep {
    std::size_t failures = 0;
    double worst = 0.0;
};

SeedSweep sweep(const std::function<OracleReport(std::uint64_t)>& check, std::size_t seeds) {
    SeedSweep s;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        const OracleReport r = check(seed);
        s.failures += !r.pass;
        s.worst = std::max(s.worst, r.max_rel_error);
    }
    return s;
}

Outcome oracle_equivalence() {
    Outcome o;
    const auto t0 = Clock::now();
    const std::pair<const char*, std::function<OracleReport(std::uint64_t)>> checks[] = {
        {"content", [](std::uint64_t s) { return check_content_oracle(s, 1e-10); }},
        {"positional", [](std::uint64_t s) { return check_positional_oracle(s, 1e-10); }},
        {"gsa_forward", [](std::uint64_t s) { return check_gsa_forward_oracle(s, 1e-10); }}};
    for (const auto& [name, fn] : checks) {
        const SeedSweep s = sweep(fn, 100);
        o.require(s.failures == 0 && s.worst <= 1e-10,
                  std::string(name) + fmt(" worst rel %.2e over 100 seeds", s.worst));
    }
    const double dt = seconds_since(t0);
    o.require(dt < 120.0, fmt("%.1fs", dt));
    return o;
}

Outcome equivariance() {
    Outcome o;
    const auto t0 = Clock::now();
    const SeedSweep perm = sweep([](std::uint64_t s) { return equivariance_check(Equivariance::permutation, s, 1e-10); }, 100);
    o.require(perm.failures == 0, fmt("permutation worst %.2e over 100 seeds", perm.worst));
    const SeedSweep trans = sweep([](std::uint64_t s) { return equivariance_check(Equivariance::translation, s, 1e-10); }, 100);
    o.require(trans.failures == 0, fmt("interior translation worst %.2e over 100 seeds", trans.worst));
    const double dt = seconds_since(t0);
    o.require(dt < 60.0, fmt("%.1fs", dt));
    return o;
}

Outcome gradients() {
    Outcome o;
    const auto t0 = Clock::now();
    const GsaConfig cfg = gradient_check_config();
    std::map<std::string, double> worst;
    std::size_t failures = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const OracleReport r = check_gsa_gradients(seed, cfg, Mode::train, 1e-5, 1e-5);
        failures += !r.pass;
        for (const auto& [cls, err] : r.breakdown) worst[cls] = std::max(worst[cls], err);
    }
    const char* classes[] = {"W_K", "W_Q", "W_V", "R_col", "R_row", "BN affine", "input"};
    for (const char* cls : classes) {
        const auto it = worst.find(cls);
        const bool seen = it != worst.end();
        o.require(seen && it->second <= 1e-5, std::string(cls) + fmt(" %.2e", seen ? it->second : NAN));
    }
    o.require(failures == 0, fmt("%.0f/20 seeds within tolerance", static_cast<double>(20 - failures)));
    const double dt = seconds_since(t0);
    o.require(dt < 300.0, fmt("%.1fs", dt));
    return o;
}

Outcome complexity() {
    Outcome o;
    const auto t0 = Clock::now();
    const std::pair<BenchKernel, double> kernels[] = {
        {BenchKernel::content, 1.0}, {BenchKernel::axial_positional, 1.5}, {BenchKernel::naive_quadratic, 2.0}};
    for (const auto& [kernel, expected] : kernels) {
        BenchOptions opts;
        opts.kernel = kernel;
        opts.sizes = {8, 16, 32, 64, 128};
        const BenchReport r = scaling_benchmark(opts);
        o.require(std::abs(r.analytic_slope - expected) <= 1e-9,
                  bench_kernel_name(kernel) + fmt(" analytic %.12f", r.analytic_slope));
        o.require(std::abs(r.empirical_slope - expected) <= 0.2,
                  bench_kernel_name(kernel) + fmt(" empirical %.3f", r.empirical_slope));
    }
    const double dt = seconds_since(t0);
    o.require(dt < 300.0, fmt("%.1fs", dt));
    return o;
}

Outcome toy_training() {
    Outcome o;
    const auto t0 = Clock::now();
    const ToySpec spec;
    const ToyResult r = train_toy(spec);
    o.require(r.ok(), r.ok() ? "finite losses" : "non-finite loss");
    const double first = r.losses.front(), last = r.losses.back();
    const double ln_k = std::log(static_cast<double>(spec.num_classes));
    o.require(std::abs(first - ln_k) <= 1e-6, fmt("initial %.9f vs ln K %.9f", first, ln_k));
    o.require(r.losses.size() == spec.steps + 1 && last < 0.5 * first,
              fmt("after %.0f steps %.4f (ratio %.3f)", static_cast<double>(r.losses.size() - 1), last, last / first));
    const double dt = seconds_since(t0);
    o.require(dt < 300.0, fmt("%.1fs", dt));
    return o;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"parameter counts", parameter_counts}, {"FLOP counts at 224", flop_counts},
        {"oracle equivalence", oracle_equivalence}, {"equivariance", equivariance},
        {"gradients vs finite differences", gradients}, {"complexity scaling", complexity},
        {"toy training", toy_training}};
    int failed = 0;
    int index = 1;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %d %s: %s | %s\n", index++, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
