#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsa/cost.hpp"
#include "gsa/model.hpp"
#include "gsa/params_io.hpp"
#include "gsa/runtime.hpp"
#include "gsa/tensor_io.hpp"
#include "gsa/toy.hpp"
#include "gsa/verify.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelSource {
    std::vector<std::string> presets;
    std::string spec_path;

    void add_to(CLI::App* cmd, bool many) {
        if (many) {
            cmd->add_option("--preset", presets, "Named configuration (repeatable)");
        } else {
            cmd->add_option("--preset", presets, "Named configuration")->expected(1);
        }
        cmd->add_option("--spec", spec_path, "Model spec JSON file");
    }

    std::vector<gsa::ModelSpec> resolve() const {
        if (!spec_path.empty() && !presets.empty()) throw UsageError("give either --preset or --spec, not both");
        if (spec_path.empty() && presets.empty()) throw UsageError("one of --preset or --spec is required");
        if (!spec_path.empty()) return {load_spec(spec_path)};
        std::vector<gsa::ModelSpec> out;
        for (const auto& p : presets) out.push_back(gsa::ModelSpec::preset(p));
        return out;
    }

    static gsa::ModelSpec load_spec(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw UsageError("cannot open spec file " + path);
        std::stringstream buf;
        buf << is.rdbuf();
        const std::string text = buf.str();
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            std::size_t line = 1, col = 1;
            for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
                if (text[i] == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
            }
            throw UsageError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
        }
        try {
            return gsa::model_spec_from_json(j);
        } catch (const gsa::SpecError& e) {
            throw UsageError(path + ": " + e.what());
        }
    }
};

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw UsageError("cannot write " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

void check_format(const std::string& format, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (format == a) return;
    }
    std::string msg = "unsupported --format '" + format + "'; choose from";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw UsageError(msg);
}

std::string join_shape(const gsa::Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(item, &pos);
            if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("invalid size '" + item + "' in --sizes");
        }
    }
    return out;
}

int run_describe(const ModelSource& src, const std::string& format, const std::string& out_path) {
    check_format(format, {"json", "table", "csv"});
    const auto spec = src.resolve().front();
    const auto summary = gsa::describe_model(spec);
    Output out(out_path);
    auto& os = out.stream();
    if (format == "json") {
        os << gsa::summary_to_json(summary).dump(2) << "\n";
    } else if (format == "csv") {
        os << "name,kind,in_shape,out_shape,params,macs\n";
        for (const auto& l : summary.layers) {
            os << l.name << "," << l.kind << "," << join_shape(l.in_shape) << "," << join_shape(l.out_shape) << ","
               << l.params << "," << l.macs << "\n";
        }
    } else {
        char line[256];
        std::snprintf(line, sizeof line, "%-28s %-13s %-14s %-14s %12s %15s\n", "layer", "kind", "input", "output",
                      "params", "MACs");
        os << line;
        for (const auto& l : summary.layers) {
            std::snprintf(line, sizeof line, "%-28s %-13s %-14s %-14s %12llu %15llu\n", l.name.c_str(), l.kind.c_str(),
                          join_shape(l.in_shape).c_str(), join_shape(l.out_shape).c_str(),
                          static_cast<unsigned long long>(l.params), static_cast<unsigned long long>(l.macs));
            os << line;
        }
    }
    return kOk;
}

int run_count(const ModelSource& src, std::size_t input_size, const std::string& format, const std::string& out_path) {
    check_format(format, {"json", "table", "csv"});
    std::vector<gsa::CostReport> reports;
    for (const auto& spec : src.resolve()) reports.push_back(gsa::count_flops(spec, input_size));
    Output out(out_path);
    auto& os = out.stream();
    if (format == "table") {
        os << gsa::render_cost_table(reports);
    } else if (format == "json") {
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(gsa::to_json(r));
        os << (arr.size() == 1 ? arr[0] : arr).dump(2) << "\n";
    } else {
        for (const auto& r : reports) gsa::write_cost_csv(os, r);
    }
    return kOk;
}

int run_build(const ModelSource& src, std::uint64_t seed, const std::string& out_dir, const std::string& dtype) {
    if (out_dir.empty()) throw UsageError("build requires --output DIR");
    if (dtype != "float64" && dtype != "float32") throw UsageError("--dtype must be float64 or float32");
    const auto spec = src.resolve().front();
    gsa::Model model = gsa::build_model(spec, seed);
    auto params = gsa::model_parameters(model, true);
    gsa::save_bundle(out_dir, params, dtype == "float32" ? gsa::Dtype::f32 : gsa::Dtype::f64);
    std::ofstream(std::filesystem::path(out_dir) / "spec.json") << json(spec).dump(2) << "\n";
    std::size_t scalars = 0;
    for (const auto& p : params) scalars += p.trainable ? p.values.size() : 0;
    std::cout << "wrote " << params.size() << " arrays (" << scalars << " learnable scalars) to " << out_dir << "\n";
    return kOk;
}

int run_verify(const std::string& suite, std::uint64_t seed, std::size_t cases, const std::string& out_path) {
    std::vector<gsa::OracleReport> reports;
    try {
        reports = gsa::run_verify_suite(suite, seed, cases);
    } catch (const gsa::ArgumentError& e) {
        throw UsageError(e.what());
    }
    Output out(out_path);
    gsa::write_json_lines(out.stream(), reports);
    std::size_t failed = 0;
    for (const auto& r : reports) failed += !r.pass;
    std::cerr << reports.size() - failed << "/" << reports.size() << " checks passed\n";
    return failed ? kCheckFailed : kOk;
}

int run_bench(gsa::BenchOptions opts, const std::string& kernel, const std::string& sizes, const std::string& format,
              const std::string& out_path) {
    check_format(format, {"json", "csv"});
    opts.kernel = gsa::parse_bench_kernel(kernel);
    if (!sizes.empty()) opts.sizes = parse_sizes(sizes);
    const auto report = gsa::scaling_benchmark(opts);
    Output out(out_path);
    if (format == "json") {
        out.stream() << gsa::to_json(report).dump(2) << "\n";
    } else {
        gsa::write_bench_csv(out.stream(), report);
    }
    if (report.unreliable) std::cerr << "warning: " << report.note << "\n";
    return kOk;
}

int run_train_toy(const gsa::ToySpec& spec, const std::string& out_path) {
    const auto result = gsa::train_toy(spec);
    Output out(out_path);
    gsa::write_loss_csv(out.stream(), result);
    if (!result.ok()) {
        std::cerr << "training diverged at step " << *result.divergence_step << "\n";
        return kCheckFailed;
    }
    std::fprintf(stderr, "initial loss %.6f, final loss %.6f\n", result.losses.front(), result.losses.back());
    return kOk;
}

int run_tensor_info(const std::string& path) {
    const gsa::Tensor t = gsa::load_gsat(path);
    json j{{"file", path},
           {"dtype", t.dtype() == gsa::Dtype::f32 ? "float32" : "float64"},
           {"shape", t.shape()},
           {"elements", t.size()}};
    if (t.size() > 0) {
        double lo = t[0], hi = t[0], s = 0.0;
        for (double v : t.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            s += v;
        }
        j["min"] = lo;
        j["max"] = hi;
        j["mean"] = s / static_cast<double>(t.size());
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

int run_tensor_cat(const std::string& path) {
    const gsa::Tensor t = gsa::load_gsat(path);
    std::cout << "# shape " << gsa::shape_to_string(t.shape()) << "\n";
    const std::size_t last = t.rank() ? t.shape().back() : 1;
    char buf[32];
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t[i]);
        std::cout << buf << ((i + 1) % last == 0 ? "\n" : " ");
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Global self-attention networks: build, inspect, count, verify, benchmark"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (defaults to GSA_THREADS, else 1)");

    ModelSource build_src, describe_src, count_src;
    std::uint64_t seed = 0;
    std::string format, output, dtype = "float64";

    auto* build = app.add_subcommand("build", "Build a model and write its parameter bundle");
    build_src.add_to(build, false);
    build->add_option("--seed", seed, "Initialization seed");
    build->add_option("--output,-o", output, "Bundle directory")->required();
    build->add_option("--dtype", dtype, "float64 or float32");

    auto* describe = app.add_subcommand("describe", "Print the per-layer summary");
    describe_src.add_to(describe, false);
    std::string describe_format = "table";
    describe->add_option("--format", describe_format, "json, csv or table");
    describe->add_option("--output,-o", output, "Output file");

    auto* count = app.add_subcommand("count", "Parameter and FLOP totals");
    count_src.add_to(count, true);
    std::string count_format = "table";
    std::size_t input_size = 0;
    count->add_option("--format", count_format, "json, csv or table");
    count->add_option("--input-size", input_size, "Square input resolution (defaults to the model input size)");
    count->add_option("--output,-o", output, "Output file");

    auto* verify = app.add_subcommand("verify", "Run oracle, equivariance and gradient suites");
    std::string suite = "all";
    std::size_t cases = 0;
    verify->add_option("--suite", suite, "all, oracle, equivariance or gradient");
    verify->add_option("--seed", seed, "First seed of every case class");
    verify->add_option("--cases", cases, "Cases per class (default 100, gradients 20)");
    verify->add_option("--output,-o", output, "JSON lines file");

    auto* bench = app.add_subcommand("bench", "Empirical scaling benchmark");
    gsa::BenchOptions bench_opts;
    std::string kernel = "content", sizes;
    std::string bench_format = "json";
    bool no_time = false;
    bench->add_option("--kernel", kernel, "content, axial_positional or naive_quadratic");
    bench->add_option("--sizes", sizes, "Comma-separated square side lengths");
    bench->add_option("--reps", bench_opts.reps, "Timed repetitions per size");
    bench->add_option("--warmup", bench_opts.warmup, "Untimed warm-up calls per size");
    bench->add_option("--heads", bench_opts.heads, "Attention heads");
    bench->add_option("--channels", bench_opts.channels, "Channels per head");
    bench->add_option("--seed", bench_opts.seed, "Input seed");
    bench->add_flag("--no-time", no_time, "Report analytic counts only");
    bench->add_option("--format", bench_format, "json or csv");
    bench->add_option("--output,-o", output, "Output file");

    auto* toy = app.add_subcommand("train-toy", "Train the toy attention classifier");
    gsa::ToySpec toy_spec;
    toy->add_option("--steps", toy_spec.steps, "SGD steps");
    toy->add_option("--lr", toy_spec.lr, "Learning rate");
    toy->add_option("--momentum", toy_spec.momentum, "Momentum");
    toy->add_option("--seed", toy_spec.seed, "Data and initialization seed");
    toy->add_option("--image-size", toy_spec.image_size, "Square image side (<= 32)");
    toy->add_option("--classes", toy_spec.num_classes, "Number of classes");
    toy->add_option("--samples-per-class", toy_spec.samples_per_class, "Training images per class");
    toy->add_option("--width", toy_spec.width, "Attention channels");
    toy->add_option("--blocks", toy_spec.blocks, "GSA blocks (1 to 3)");
    toy->add_option("--output,-o", output, "Loss curve CSV");

    auto* tensor = app.add_subcommand("tensor", "Inspect GSAT tensor files");
    tensor->require_subcommand(1);
    std::string tensor_path;
    auto* tinfo = tensor->add_subcommand("info", "Header and summary statistics");
    tinfo->add_option("file", tensor_path, "GSAT file")->required();
    auto* tcat = tensor->add_subcommand("cat", "Print every element");
    tcat->add_option("file", tensor_path, "GSAT file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (threads) gsa::set_num_threads(threads);
        if (*build) return run_build(build_src, seed, output, dtype);
        if (*describe) return run_describe(describe_src, describe_format, output);
        if (*count) return run_count(count_src, input_size, count_format, output);
        if (*verify) return run_verify(suite, seed, cases, output);
        if (*bench) {
            bench_opts.time = !no_time;
            return run_bench(bench_opts, kernel, sizes, bench_format, output);
        }
        if (*toy) return run_train_toy(toy_spec, output);
        if (*tinfo) return run_tensor_info(tensor_path);
        if (*tcat) return run_tensor_cat(tensor_path);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const gsa::SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const gsa::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const gsa::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCheckFailed;
    }
    return kUsage;
}
