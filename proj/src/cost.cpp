#include "gsa/cost.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "gsa/runtime.hpp"
#include "gsa/verify.hpp"

namespace gsa {

using nlohmann::json;

void CostReport::recompute_totals() {
    total_params = total_mults = total_adds = 0;
    for (const auto& l : layers) {
        total_params += l.params;
        total_mults += l.mults;
        total_adds += l.adds;
    }
}

std::string model_display_name(const ModelSpec& spec) {
    const std::size_t gsa_groups = spec.gsa_group_count();
    std::string base = "ResNet-" + std::to_string(spec.depth);
    if (spec.variant == Variant::m_resnet50) base = "M-" + std::string(gsa_groups == 4 ? "GSA-" : "") + base;
    else if (gsa_groups == 4) base = "GSA-" + base;
    if (gsa_groups > 0 && gsa_groups < 4) {
        std::string groups;
        for (std::size_t g = 0; g < 4; ++g) {
            if (spec.group_uses_gsa[g]) groups += (groups.empty() ? "" : ",") + std::to_string(g + 1);
        }
        base += " (GSA groups " + groups + ")";
    }
    return base;
}

std::string operation_label(const ModelSpec& spec) {
    if (spec.gsa_group_count() == 0) return "Convolution";
    std::vector<std::string> parts;
    if (spec.branches.content) {
        parts.push_back(spec.variant == Variant::axial_content ? "axial content" : "content");
        if (spec.softmax_on_queries) parts.back() += " (query softmax)";
    }
    if (spec.branches.col && spec.branches.row) parts.push_back("axial positional");
    else if (spec.branches.col) parts.push_back("column positional");
    else if (spec.branches.row) parts.push_back("row positional");
    std::string s = "GSA: ";
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " + " : "") + parts[i];
    return s;
}

namespace {

CostReport report_from_summary(const ModelSummary& summary, bool with_flops) {
    CostReport r;
    r.model = model_display_name(summary.spec);
    r.operation = operation_label(summary.spec);
    std::uint64_t norm = 0, soft = 0, pool = 0, reindex = 0;
    for (const auto& l : summary.layers) {
        CostRecord c{l.name, l.kind, l.params, 0, 0};
        if (with_flops) c.mults = c.adds = l.macs;
        r.layers.push_back(c);
        norm += l.norm_elements;
        soft += l.softmax_elements;
        pool += l.pool_elements;
        reindex += l.reindex_macs;
    }
    r.recompute_totals();
    r.metadata = json{{"input_size", summary.spec.input_size},
                      {"batch", 1},
                      {"params_convention", "learnable scalars; batch norm gamma and beta counted, running statistics excluded"}};
    if (with_flops) {
        r.metadata["flops_convention"] =
            "mults = adds = multiply-accumulates of every contraction and convolution; FLOPs = mults + adds";
        r.metadata["excluded_from_totals"] = json{{"batch_norm_elements", norm},
                                                  {"softmax_elements", soft},
                                                  {"pooling_elements", pool},
                                                  {"positional_reindex_macs", reindex},
                                                  {"relu", "not counted"}};
    }
    return r;
}

}  // namespace

CostReport count_params(const ModelSpec& spec) { return report_from_summary(describe_model(spec), false); }

CostReport count_params(Model& model) {
    CostReport r = report_from_summary(describe_model(model.spec), false);
    for (auto& l : r.layers) l.params = 0;
    for (const auto& p : model_parameters(model)) {
        CostRecord* owner = nullptr;
        for (auto& l : r.layers) {
            if (p.name.size() > l.name.size() && p.name.compare(0, l.name.size(), l.name) == 0 && p.name[l.name.size()] == '.') {
                if (!owner || l.name.size() > owner->name.size()) owner = &l;
            }
        }
        if (!owner) throw std::logic_error("parameter '" + p.name + "' belongs to no layer");
        owner->params += p.values.size();
    }
    r.recompute_totals();
    return r;
}

CostReport count_flops(const ModelSpec& spec, std::size_t input_size) {
    ModelSpec s = spec;
    if (input_size) s.input_size = input_size;
    return report_from_summary(describe_model(s), true);
}

std::uint64_t measured_macs(const Model& model, const Tensor& x) {
    FlopCounter counter;
    model_forward(model, x, Mode::infer);
    return counter.tally().mults;
}

json to_json(const CostReport& r) {
    json layers = json::array();
    for (const auto& l : r.layers) {
        layers.push_back({{"name", l.name}, {"kind", l.kind}, {"params", l.params}, {"mults", l.mults}, {"adds", l.adds}});
    }
    return json{{"model", r.model},
                {"operation", r.operation},
                {"layers", layers},
                {"totals",
                 {{"params", r.total_params},
                  {"mults", r.total_mults},
                  {"adds", r.total_adds},
                  {"flops", r.total_flops()}}},
                {"metadata", r.metadata}};
}

CostReport cost_report_from_json(const json& j) {
    CostReport r;
    j.at("model").get_to(r.model);
    j.at("operation").get_to(r.operation);
    for (const auto& l : j.at("layers")) {
        r.layers.push_back({l.at("name").get<std::string>(), l.at("kind").get<std::string>(),
                            l.at("params").get<std::uint64_t>(), l.at("mults").get<std::uint64_t>(),
                            l.at("adds").get<std::uint64_t>()});
    }
    const auto& t = j.at("totals");
    t.at("params").get_to(r.total_params);
    t.at("mults").get_to(r.total_mults);
    t.at("adds").get_to(r.total_adds);
    r.metadata = j.at("metadata");
    return r;
}

void write_cost_csv(std::ostream& os, const CostReport& r) {
    os << "name,kind,params,mults,adds,flops\n";
    for (const auto& l : r.layers) {
        os << l.name << "," << l.kind << "," << l.params << "," << l.mults << "," << l.adds << "," << l.flops() << "\n";
    }
    os << "TOTAL,," << r.total_params << "," << r.total_mults << "," << r.total_adds << "," << r.total_flops() << "\n";
}

std::string render_cost_table(const std::vector<CostReport>& rows) {
    auto fmt = [](double v, const char* unit) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f%s", v, unit);
        return std::string(buf);
    };
    std::vector<std::array<std::string, 4>> cells{{"Structure", "Operation", "Params", "FLOPs"}};
    for (const auto& r : rows) {
        cells.push_back({r.model, r.operation, fmt(static_cast<double>(r.total_params) / 1e6, "M"),
                         fmt(static_cast<double>(r.total_flops()) / 1e9, "G")});
    }
    std::array<std::size_t, 4> width{};
    for (const auto& row : cells)
        for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            const auto& s = cells[i][c];
            const std::string pad(width[c] - s.size(), ' ');
            os << (c ? "  " : "") << (c >= 2 ? pad + s : s + (c == 3 ? "" : pad));
        }
        os << "\n";
        if (i == 0) {
            for (std::size_t c = 0; c < 4; ++c) os << (c ? "  " : "") << std::string(width[c], '-');
            os << "\n";
        }
    }
    return os.str();
}

// --- scaling benchmark ----------------------------------------------------------------

BenchKernel parse_bench_kernel(const std::string& name) {
    if (name == "content") return BenchKernel::content;
    if (name == "axial_positional") return BenchKernel::axial_positional;
    if (name == "naive_quadratic") return BenchKernel::naive_quadratic;
    throw ArgumentError("unknown kernel '" + name + "'; valid kernels: content, axial_positional, naive_quadratic");
}

std::string bench_kernel_name(BenchKernel k) {
    switch (k) {
        case BenchKernel::content: return "content";
        case BenchKernel::axial_positional: return "axial_positional";
        case BenchKernel::naive_quadratic: return "naive_quadratic";
    }
    return "content";
}

namespace {

struct KernelShape {
    std::size_t heads;
    std::size_t channels;
};

KernelShape resolve_shape(BenchKernel k, std::size_t heads, std::size_t channels) {
    KernelShape d{};
    switch (k) {
        case BenchKernel::content: d = {4, 16}; break;
        case BenchKernel::axial_positional: d = {2, 8}; break;
        case BenchKernel::naive_quadratic: d = {1, 2}; break;
    }
    if (heads) d.heads = heads;
    if (channels) d.channels = channels;
    return d;
}

GsaConfig bench_config(BenchKernel k, std::size_t side, const KernelShape& ks) {
    GsaConfig cfg;
    cfg.n_heads = ks.heads;
    cfg.d_in = 1;
    cfg.d_k = cfg.d_out = ks.heads * ks.channels;
    cfg.height = cfg.width = side;
    cfg.content_on = k != BenchKernel::axial_positional;
    cfg.col_on = cfg.row_on = k == BenchKernel::axial_positional;
    return cfg;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::uint64_t bench_analytic_flops(BenchKernel k, std::size_t side, std::size_t heads, std::size_t channels) {
    const KernelShape ks = resolve_shape(k, heads, channels);
    const std::uint64_t n_pix = static_cast<std::uint64_t>(side) * side;
    if (k == BenchKernel::naive_quadratic) {
        // per query pixel: N weights of c terms, then N weighted value rows
        return 2 * n_pix * n_pix * ks.heads * (ks.channels + ks.channels);
    }
    const GsaMacs macs = gsa_macs(bench_config(k, side, ks));
    return 2 * (k == BenchKernel::content ? macs.content : macs.positional);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ArgumentError("loglog_slope needs at least two matching points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchReport scaling_benchmark(const BenchOptions& opts) {
    if (opts.sizes.size() < 4) throw ArgumentError("scaling benchmark needs at least 4 sizes");
    const auto [lo, hi] = std::minmax_element(opts.sizes.begin(), opts.sizes.end());
    if (*lo == 0 || (*hi) * (*hi) < 16 * (*lo) * (*lo)) {
        throw ArgumentError("scaling benchmark sizes must span at least 16x in pixel count");
    }
    if (opts.reps == 0) throw ArgumentError("reps must be positive");

    const KernelShape ks = resolve_shape(opts.kernel, opts.heads, opts.channels);
    BenchReport rep;
    rep.kernel = opts.kernel;
    rep.expected_slope = opts.kernel == BenchKernel::content ? 1.0 : opts.kernel == BenchKernel::axial_positional ? 1.5 : 2.0;

    std::vector<double> pixels, flops, times;
    double worst_spread = 0.0;
    for (std::size_t side : opts.sizes) {
        BenchPoint pt;
        pt.side = side;
        pt.pixels = side * side;
        pt.analytic_flops = bench_analytic_flops(opts.kernel, side, ks.heads, ks.channels);
        pixels.push_back(static_cast<double>(pt.pixels));
        flops.push_back(static_cast<double>(pt.analytic_flops));

        if (opts.time) {
            const GsaConfig cfg = bench_config(opts.kernel, side, ks);
            const std::uint64_t seed = mix_seed(opts.seed, side);
            const Tensor k = random_normal({1, side, side, ks.heads, ks.channels}, mix_seed(seed, 1));
            const Tensor q = random_normal({1, side, side, ks.heads, ks.channels}, mix_seed(seed, 2));
            const Tensor v = random_normal({1, side, side, ks.heads, ks.channels}, mix_seed(seed, 3));
            const GsaParams params = GsaParams::init(cfg, mix_seed(seed, 4));
            auto call = [&] {
                switch (opts.kernel) {
                    case BenchKernel::content: return content_attention(k, q, v, cfg);
                    case BenchKernel::axial_positional:
                        return positional_attention(q, v, params.emb, params.bn_mid, cfg, Mode::infer);
                    case BenchKernel::naive_quadratic: return oracle_content_attention(k, q, v);
                }
                return Tensor();
            };
            using clock = std::chrono::steady_clock;
            auto seconds_since = [](clock::time_point t0) {
                return std::chrono::duration<double>(clock::now() - t0).count();
            };
            for (std::size_t w = 0; w < opts.warmup; ++w) call();
            // calibrate the number of calls per timed rep
            std::size_t calls = 1;
            {
                auto t0 = clock::now();
                call();
                const double one = seconds_since(t0);
                if (one < opts.min_rep_seconds) {
                    calls = static_cast<std::size_t>(std::ceil(opts.min_rep_seconds / std::max(one, 1e-9)));
                }
            }
            std::vector<double> samples;
            for (std::size_t r = 0; r < opts.reps; ++r) {
                auto t0 = clock::now();
                for (std::size_t c = 0; c < calls; ++c) call();
                samples.push_back(seconds_since(t0) / static_cast<double>(calls));
            }
            pt.calls_per_rep = calls;
            pt.median_seconds = median(samples);
            pt.min_seconds = *std::min_element(samples.begin(), samples.end());
            pt.max_seconds = *std::max_element(samples.begin(), samples.end());
            pt.spread = (pt.max_seconds - pt.min_seconds) / pt.median_seconds;
            worst_spread = std::max(worst_spread, pt.spread);
            times.push_back(pt.median_seconds);
        }
        rep.points.push_back(pt);
    }

    rep.analytic_slope = loglog_slope(pixels, flops);
    rep.empirical_slope = opts.time ? loglog_slope(pixels, times) : std::numeric_limits<double>::quiet_NaN();
    if (opts.time && worst_spread > 0.2) {
        rep.unreliable = true;
        rep.note = "timing spread " + std::to_string(worst_spread) + " exceeds 20% at some size; rerun with more reps";
    }
    rep.metadata = json{{"threads", num_threads()},
                        {"heads", ks.heads},
                        {"channels_per_head", ks.channels},
                        {"reps", opts.reps},
                        {"warmup", opts.warmup},
                        {"min_rep_seconds", opts.min_rep_seconds},
                        {"seed", opts.seed},
                        {"timed", opts.time},
                        {"statistic", "median seconds per call"}};
    return rep;
}

json to_json(const BenchReport& r) {
    json points = json::array();
    for (const auto& p : r.points) {
        json jp{{"side", p.side}, {"pixels", p.pixels}, {"analytic_flops", p.analytic_flops}};
        if (r.metadata.value("timed", true)) {
            jp["wall_clock"] = {{"median_seconds", p.median_seconds},
                                {"min_seconds", p.min_seconds},
                                {"max_seconds", p.max_seconds},
                                {"spread", p.spread},
                                {"calls_per_rep", p.calls_per_rep}};
        }
        points.push_back(jp);
    }
    json j{{"kernel", bench_kernel_name(r.kernel)},
           {"points", points},
           {"analytic_slope", r.analytic_slope},
           {"expected_slope", r.expected_slope},
           {"metadata", r.metadata}};
    if (std::isfinite(r.empirical_slope)) {
        j["wall_clock_fit"] = {{"empirical_slope", r.empirical_slope}, {"unreliable", r.unreliable}, {"note", r.note}};
    }
    return j;
}

void write_bench_csv(std::ostream& os, const BenchReport& r) {
    os << "kernel,side,pixels,analytic_flops,median_seconds,min_seconds,max_seconds,spread\n";
    for (const auto& p : r.points) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.4f", p.median_seconds, p.min_seconds, p.max_seconds, p.spread);
        os << bench_kernel_name(r.kernel) << "," << p.side << "," << p.pixels << "," << p.analytic_flops << "," << buf << "\n";
    }
}

}  // namespace gsa
