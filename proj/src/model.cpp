#include "gsa/model.hpp"

#include <cmath>
#include <set>

#include "gsa/layers.hpp"

namespace gsa {

using nlohmann::json;

std::array<std::size_t, 4> ModelSpec::canonical_blocks(int depth) {
    switch (depth) {
        case 38: return {2, 3, 5, 2};
        case 50: return {3, 4, 6, 3};
        case 101: return {3, 4, 23, 3};
        default: throw SpecError("depth must be one of 38, 50, 101; got " + std::to_string(depth));
    }
}

namespace {

std::size_t round_to_8(double v) {
    auto r = static_cast<std::size_t>(std::llround(v / 8.0)) * 8;
    return r == 0 ? 8 : r;
}

}  // namespace

ChannelPlan ModelSpec::channels() const {
    ChannelPlan plan;
    plan.stem = base_width;
    for (std::size_t g = 0; g < 4; ++g) {
        plan.width[g] = base_width << g;
        plan.out[g] = 4 * plan.width[g];
    }
    if (variant == Variant::m_resnet50) {
        // halve block input/output channels, then widen every layer by 1.125
        plan.stem = round_to_8(1.125 * static_cast<double>(plan.stem));
        for (std::size_t g = 0; g < 4; ++g) {
            plan.out[g] = round_to_8(1.125 * static_cast<double>(plan.out[g] / 2));
            plan.width[g] = round_to_8(1.125 * static_cast<double>(plan.width[g]));
        }
    }
    return plan;
}

std::size_t ModelSpec::gsa_group_count() const {
    std::size_t n = 0;
    for (bool b : group_uses_gsa) n += b;
    return n;
}

std::vector<std::string> ModelSpec::violations() const {
    std::vector<std::string> v;
    if (depth != 38 && depth != 50 && depth != 101) {
        v.push_back("depth must be one of 38, 50, 101 (got " + std::to_string(depth) + ")");
    } else if (blocks_per_group != canonical_blocks(depth)) {
        auto c = canonical_blocks(depth);
        v.push_back("blocks_per_group for depth " + std::to_string(depth) + " must be (" + std::to_string(c[0]) + "," +
                    std::to_string(c[1]) + "," + std::to_string(c[2]) + "," + std::to_string(c[3]) + ")");
    }
    if (variant == Variant::m_resnet50 && depth != 50) v.push_back("m_resnet50 variant requires depth 50");
    if (input_size == 0 || input_size % 32 != 0) {
        v.push_back("input_size must be a positive multiple of 32 (got " + std::to_string(input_size) + ")");
    }
    if (num_classes == 0) v.push_back("num_classes must be positive");
    if (heads == 0) v.push_back("heads must be positive");
    if (base_width == 0) v.push_back("base_width must be positive");
    if (!branches.content && !branches.col && !branches.row) v.push_back("at least one attention branch must be on");
    if (variant == Variant::axial_content && !branches.content) {
        v.push_back("axial_content variant requires the content branch");
    }
    if (heads > 0 && base_width > 0) {
        auto plan = channels();
        for (std::size_t g = 0; g < 4; ++g) {
            if (group_uses_gsa[g] && plan.width[g] % heads != 0) {
                v.push_back("group " + std::to_string(g + 1) + " width " + std::to_string(plan.width[g]) +
                            " not divisible by " + std::to_string(heads) + " heads");
            }
        }
    }
    return v;
}

void ModelSpec::validate() const {
    auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid model spec:";
    for (auto& s : v) msg += "\n  - " + s;
    throw SpecError(msg);
}

std::vector<std::string> ModelSpec::preset_names() {
    return {"resnet38",      "resnet50",         "resnet101",       "gsa-resnet38", "gsa-resnet50",
            "gsa-resnet101", "m-resnet50",       "m-gsa-resnet50",  "axial-content-50",
            "qsoftmax-50",   "table3:<content><col><row>",          "table5:<g1><g2><g3><g4>"};
}

ModelSpec ModelSpec::preset(const std::string& name) {
    ModelSpec s;
    auto all_gsa = [&s] { s.group_uses_gsa = {true, true, true, true}; };
    auto depth = [&s](int d) {
        s.depth = d;
        s.blocks_per_group = canonical_blocks(d);
    };
    auto bits = [&](const std::string& body, std::size_t n) {
        if (body.size() != n || body.find_first_not_of("01") != std::string::npos) {
            throw SpecError("preset '" + name + "': expected " + std::to_string(n) + " binary digits");
        }
        std::vector<bool> out;
        for (char c : body) out.push_back(c == '1');
        return out;
    };

    if (name == "resnet38") depth(38);
    else if (name == "resnet50") depth(50);
    else if (name == "resnet101") depth(101);
    else if (name == "gsa-resnet38") { depth(38); all_gsa(); }
    else if (name == "gsa-resnet50") { depth(50); all_gsa(); }
    else if (name == "gsa-resnet101") { depth(101); all_gsa(); }
    else if (name == "m-resnet50") { s.variant = Variant::m_resnet50; }
    else if (name == "m-gsa-resnet50") { s.variant = Variant::m_resnet50; all_gsa(); }
    else if (name == "axial-content-50") { s.variant = Variant::axial_content; all_gsa(); }
    else if (name == "qsoftmax-50") { s.softmax_on_queries = true; all_gsa(); }
    else if (name.rfind("table3:", 0) == 0) {
        auto b = bits(name.substr(7), 3);
        all_gsa();
        s.branches = {b[0], b[1], b[2]};
    } else if (name.rfind("table5:", 0) == 0) {
        auto b = bits(name.substr(7), 4);
        for (std::size_t g = 0; g < 4; ++g) s.group_uses_gsa[g] = b[g];
    } else {
        std::string msg = "unknown preset '" + name + "'; valid presets:";
        for (auto& p : preset_names()) msg += " " + p;
        throw SpecError(msg);
    }
    s.validate();
    return s;
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::standard: return "standard";
        case Variant::axial_content: return "axial_content";
        case Variant::m_resnet50: return "m_resnet50";
    }
    return "standard";
}

void to_json(json& j, const ModelSpec& s) {
    j = json{{"depth", s.depth},
             {"blocks_per_group", s.blocks_per_group},
             {"group_uses_gsa", s.group_uses_gsa},
             {"branches", {{"content", s.branches.content}, {"col", s.branches.col}, {"row", s.branches.row}}},
             {"variant", variant_name(s.variant)},
             {"input_size", s.input_size},
             {"num_classes", s.num_classes},
             {"heads", s.heads},
             {"base_width", s.base_width},
             {"softmax_on_queries", s.softmax_on_queries}};
}

ModelSpec model_spec_from_json(const json& j) {
    if (!j.is_object()) throw SpecError("model spec must be a JSON object");
    static const std::set<std::string> known{"depth",      "blocks_per_group", "group_uses_gsa", "branches",
                                             "variant",    "input_size",       "num_classes",    "heads",
                                             "base_width", "softmax_on_queries"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw SpecError("field '" + it.key() + "': unknown field");
    }

    ModelSpec s;
    auto field = [&](const char* name, auto& dst, auto check, const char* expected) {
        if (!j.contains(name)) return;
        const json& v = j.at(name);
        if (!check(v)) throw SpecError(std::string("field '") + name + "': expected " + expected);
        try {
            v.get_to(dst);
        } catch (const json::exception& e) {
            throw SpecError(std::string("field '") + name + "': " + e.what());
        }
    };
    auto is_uint = [](const json& v) { return v.is_number_unsigned(); };
    auto is_int = [](const json& v) { return v.is_number_integer(); };
    auto is_bool = [](const json& v) { return v.is_boolean(); };

    field("depth", s.depth, is_int, "integer");
    if (j.contains("depth") && (s.depth == 38 || s.depth == 50 || s.depth == 101)) {
        s.blocks_per_group = ModelSpec::canonical_blocks(s.depth);
    }
    field("blocks_per_group", s.blocks_per_group,
          [](const json& v) {
              return v.is_array() && v.size() == 4 &&
                     std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); });
          },
          "array of 4 non-negative integers");
    field("group_uses_gsa", s.group_uses_gsa,
          [](const json& v) {
              return v.is_array() && v.size() == 4 && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_boolean(); });
          },
          "array of 4 booleans");
    if (j.contains("branches")) {
        const json& b = j.at("branches");
        if (!b.is_object()) throw SpecError("field 'branches': expected object with content/col/row booleans");
        for (auto it = b.begin(); it != b.end(); ++it) {
            if (it.key() != "content" && it.key() != "col" && it.key() != "row") {
                throw SpecError("field 'branches." + it.key() + "': unknown field");
            }
            if (!it.value().is_boolean()) throw SpecError("field 'branches." + it.key() + "': expected boolean");
        }
        s.branches.content = b.value("content", true);
        s.branches.col = b.value("col", true);
        s.branches.row = b.value("row", true);
    }
    if (j.contains("variant")) {
        const json& v = j.at("variant");
        std::string name = v.is_string() ? v.get<std::string>() : "";
        if (name == "standard") s.variant = Variant::standard;
        else if (name == "axial_content") s.variant = Variant::axial_content;
        else if (name == "m_resnet50") s.variant = Variant::m_resnet50;
        else throw SpecError("field 'variant': expected one of standard, axial_content, m_resnet50");
    }
    field("input_size", s.input_size, is_uint, "positive integer");
    field("num_classes", s.num_classes, is_uint, "positive integer");
    field("heads", s.heads, is_uint, "positive integer");
    field("base_width", s.base_width, is_uint, "positive integer");
    field("softmax_on_queries", s.softmax_on_queries, is_bool, "boolean");
    s.validate();
    return s;
}

std::vector<BlockInstance> plan_blocks(const ModelSpec& spec) {
    spec.validate();
    const auto plan = spec.channels();
    std::vector<BlockInstance> out;
    std::size_t res = spec.input_size / 4;
    std::size_t in_ch = plan.stem;
    for (std::size_t g = 0; g < 4; ++g) {
        for (std::size_t b = 0; b < spec.blocks_per_group[g]; ++b) {
            BlockInstance bi;
            bi.name = "group" + std::to_string(g + 1) + ".block" + std::to_string(b + 1);
            bi.group = g;
            bi.kind = spec.group_uses_gsa[g] ? BlockKind::gsa : BlockKind::conv3x3;
            bi.in_channels = in_ch;
            bi.width = plan.width[g];
            bi.out_channels = plan.out[g];
            bi.downsample = g > 0 && b == 0;
            bi.projection = b == 0;
            bi.in_resolution = res;
            bi.out_resolution = bi.downsample ? res / 2 : res;
            if (bi.kind == BlockKind::gsa) {
                GsaConfig cfg;
                cfg.d_in = cfg.d_k = cfg.d_out = bi.width;
                cfg.n_heads = spec.heads;
                cfg.height = cfg.width = res;
                cfg.content_on = spec.branches.content;
                cfg.col_on = spec.branches.col;
                cfg.row_on = spec.branches.row;
                cfg.softmax_on_queries = spec.softmax_on_queries;
                cfg.axial_content = spec.variant == Variant::axial_content;
                cfg.validate();
                bi.gsa = cfg;
            }
            out.push_back(bi);
            res = bi.out_resolution;
            in_ch = bi.out_channels;
        }
    }
    return out;
}

namespace {

ConvBn make_conv(std::size_t k, std::size_t cin, std::size_t cout, std::size_t stride, std::size_t pad,
                 std::uint64_t seed) {
    ConvBn c;
    c.weight = seeded_init({k, k, cin, cout}, InitScheme::fan_in_normal, seed);
    c.bn = BatchNormState::identity(cout);
    c.stride = stride;
    c.pad = pad;
    return c;
}

Tensor conv_bn(const ConvBn& c, const Tensor& x, Mode mode) {
    return batch_norm(conv2d(x, c.weight, c.stride, c.pad), c.bn, mode).out;
}

}  // namespace

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
    Model m;
    m.spec = spec;
    const auto plan = spec.channels();
    std::uint64_t salt = 0;
    auto next_seed = [&] { return mix_seed(seed, salt++); };

    m.stem = make_conv(7, 3, plan.stem, 2, 3, next_seed());
    for (const auto& bi : plan_blocks(spec)) {
        Block blk;
        blk.desc = bi;
        blk.reduce = make_conv(1, bi.in_channels, bi.width, 1, 0, next_seed());
        if (bi.kind == BlockKind::gsa) {
            blk.gsa = GsaParams::init(*bi.gsa, next_seed());
        } else {
            blk.spatial = make_conv(3, bi.width, bi.width, bi.downsample ? 2 : 1, 1, next_seed());
        }
        blk.expand = make_conv(1, bi.width, bi.out_channels, 1, 0, next_seed());
        if (bi.projection) {
            // attention blocks pool before the shortcut convolution, conv blocks stride it
            std::size_t stride = bi.downsample && bi.kind == BlockKind::conv3x3 ? 2 : 1;
            blk.shortcut = make_conv(1, bi.in_channels, bi.out_channels, stride, 0, next_seed());
        }
        m.blocks.push_back(std::move(blk));
    }
    const std::size_t feat = plan.out[3];
    m.fc_weight = seeded_init({feat, spec.num_classes}, InitScheme::fan_in_normal, next_seed());
    m.fc_bias = Tensor({spec.num_classes});
    return m;
}

Tensor model_forward(const Model& model, const Tensor& x, Mode mode) {
    const auto& spec = model.spec;
    if (x.rank() != 4 || x.shape()[1] != spec.input_size || x.shape()[2] != spec.input_size || x.shape()[3] != 3) {
        throw ShapeError("model input must be [b, " + std::to_string(spec.input_size) + ", " +
                         std::to_string(spec.input_size) + ", 3], got " + shape_to_string(x.shape()));
    }
    Tensor h = max_pool_3x3_s2(relu(conv_bn(model.stem, x, mode)));
    for (const auto& blk : model.blocks) {
        Tensor y = relu(conv_bn(blk.reduce, h, mode));
        if (blk.gsa) {
            y = relu(gsa_forward(y, *blk.gsa, *blk.desc.gsa, mode));
            if (blk.desc.downsample) y = avg_pool_2x2(y);
        } else {
            y = relu(conv_bn(*blk.spatial, y, mode));
        }
        y = conv_bn(blk.expand, y, mode);
        Tensor skip = h;
        if (blk.shortcut) {
            Tensor src = blk.gsa && blk.desc.downsample ? avg_pool_2x2(h) : h;
            skip = conv_bn(*blk.shortcut, src, mode);
        }
        h = relu(add(y, skip));
    }
    return linear(global_avg_pool(h), model.fc_weight, model.fc_bias);
}

std::vector<ParamRef> model_parameters(Model& model, bool include_buffers) {
    std::vector<ParamRef> out;
    auto bn = [&](const std::string& prefix, BatchNormState& s) {
        const Shape shape{s.channels()};
        out.push_back({prefix + ".gamma", shape, s.gamma, true});
        out.push_back({prefix + ".beta", shape, s.beta, true});
        if (include_buffers) {
            out.push_back({prefix + ".running_mean", shape, s.running_mean, false});
            out.push_back({prefix + ".running_var", shape, s.running_var, false});
        }
    };
    auto conv = [&](const std::string& prefix, ConvBn& c) {
        out.push_back({prefix + ".weight", c.weight.shape(), c.weight.data(), true});
        bn(prefix + ".bn", c.bn);
    };
    conv("stem.conv", model.stem);
    for (auto& blk : model.blocks) {
        const std::string& p = blk.desc.name;
        conv(p + ".reduce", blk.reduce);
        if (blk.spatial) conv(p + ".conv3x3", *blk.spatial);
        if (blk.gsa) {
            for (auto& r : list_parameters(*blk.gsa, *blk.desc.gsa, true, include_buffers)) {
                r.name = p + ".gsa." + r.name;
                out.push_back(std::move(r));
            }
        }
        conv(p + ".expand", blk.expand);
        if (blk.shortcut) conv(p + ".shortcut", *blk.shortcut);
    }
    out.push_back({"head.fc.weight", model.fc_weight.shape(), model.fc_weight.data(), true});
    out.push_back({"head.fc.bias", model.fc_bias.shape(), model.fc_bias.data(), true});
    return out;
}

// --- summary ---------------------------------------------------------------------

void to_json(json& j, const LayerRecord& r) {
    j = json{{"name", r.name},
             {"kind", r.kind},
             {"in_shape", r.in_shape},
             {"out_shape", r.out_shape},
             {"params", r.params},
             {"macs", r.macs},
             {"norm_elements", r.norm_elements},
             {"softmax_elements", r.softmax_elements},
             {"pool_elements", r.pool_elements},
             {"reindex_macs", r.reindex_macs}};
}

void from_json(const json& j, LayerRecord& r) {
    j.at("name").get_to(r.name);
    j.at("kind").get_to(r.kind);
    j.at("in_shape").get_to(r.in_shape);
    j.at("out_shape").get_to(r.out_shape);
    j.at("params").get_to(r.params);
    j.at("macs").get_to(r.macs);
    j.at("norm_elements").get_to(r.norm_elements);
    j.at("softmax_elements").get_to(r.softmax_elements);
    j.at("pool_elements").get_to(r.pool_elements);
    j.at("reindex_macs").get_to(r.reindex_macs);
}

namespace {

LayerRecord conv_record(const std::string& name, const std::string& kind, std::size_t res_in, std::size_t cin,
                        std::size_t k, std::size_t stride, std::size_t pad, std::size_t cout) {
    const std::size_t res_out = conv_output_extent(res_in, k, stride, pad);
    LayerRecord r;
    r.name = name;
    r.kind = kind;
    r.in_shape = {res_in, res_in, cin};
    r.out_shape = {res_out, res_out, cout};
    r.params = k * k * cin * cout + 2 * cout;
    r.macs = std::uint64_t(res_out) * res_out * cout * k * k * cin;
    r.norm_elements = std::uint64_t(res_out) * res_out * cout;
    return r;
}

LayerRecord gsa_record(const std::string& name, const GsaConfig& cfg) {
    LayerRecord r;
    r.name = name;
    r.kind = "gsa";
    r.in_shape = {cfg.height, cfg.width, cfg.d_in};
    r.out_shape = {cfg.height, cfg.width, cfg.d_out};
    const std::uint64_t pix = cfg.height * cfg.width;
    const std::uint64_t proj_out = (cfg.content_on ? cfg.d_k : 0) + cfg.d_k + cfg.d_out;
    const std::uint64_t c = cfg.key_head_dim();
    r.params = cfg.d_in * proj_out + 2 * proj_out + 2 * cfg.d_out;
    if (cfg.col_on) r.params += (2 * cfg.height - 1) * c;
    if (cfg.row_on) r.params += (2 * cfg.width - 1) * c;
    if (cfg.col_on && cfg.row_on) r.params += 2 * cfg.d_out;
    const auto macs = gsa_macs(cfg);
    r.macs = macs.total();
    r.reindex_macs = macs.reindex;
    r.norm_elements = pix * (proj_out + cfg.d_out + (cfg.col_on && cfg.row_on ? cfg.d_out : 0));
    if (cfg.content_on) {
        const std::uint64_t per_pass = pix * cfg.d_k * (cfg.softmax_on_queries ? 2 : 1);
        r.softmax_elements = per_pass * (cfg.axial_content ? 2 : 1);
    }
    return r;
}

}  // namespace

ModelSummary describe_model(const ModelSpec& spec) {
    spec.validate();
    ModelSummary s;
    s.spec = spec;
    const auto plan = spec.channels();
    const std::size_t in = spec.input_size;

    s.layers.push_back(conv_record("stem.conv", "stem_conv7x7", in, 3, 7, 2, 3, plan.stem));
    {
        const std::size_t r_in = in / 2;
        const std::size_t r_out = conv_output_extent(r_in, 3, 2, 1);
        LayerRecord p;
        p.name = "stem.pool";
        p.kind = "maxpool";
        p.in_shape = {r_in, r_in, plan.stem};
        p.out_shape = {r_out, r_out, plan.stem};
        p.pool_elements = std::uint64_t(r_out) * r_out * plan.stem;
        s.layers.push_back(p);
    }
    for (const auto& bi : plan_blocks(spec)) {
        const std::size_t r = bi.in_resolution;
        s.layers.push_back(conv_record(bi.name + ".reduce", "conv1x1", r, bi.in_channels, 1, 1, 0, bi.width));
        if (bi.kind == BlockKind::gsa) {
            s.layers.push_back(gsa_record(bi.name + ".gsa", *bi.gsa));
            if (bi.downsample) {
                LayerRecord p;
                p.name = bi.name + ".pool";
                p.kind = "avgpool";
                p.in_shape = {r, r, bi.width};
                p.out_shape = {r / 2, r / 2, bi.width};
                p.pool_elements = std::uint64_t(r / 2) * (r / 2) * bi.width;
                s.layers.push_back(p);
            }
        } else {
            s.layers.push_back(conv_record(bi.name + ".conv3x3", "conv3x3", r, bi.width, 3, bi.downsample ? 2 : 1, 1, bi.width));
        }
        const std::size_t ro = bi.out_resolution;
        s.layers.push_back(conv_record(bi.name + ".expand", "conv1x1", ro, bi.width, 1, 1, 0, bi.out_channels));
        if (bi.projection) {
            if (bi.kind == BlockKind::gsa && bi.downsample) {
                LayerRecord p;
                p.name = bi.name + ".shortcut_pool";
                p.kind = "avgpool";
                p.in_shape = {r, r, bi.in_channels};
                p.out_shape = {ro, ro, bi.in_channels};
                p.pool_elements = std::uint64_t(ro) * ro * bi.in_channels;
                s.layers.push_back(p);
                s.layers.push_back(conv_record(bi.name + ".shortcut", "conv1x1", ro, bi.in_channels, 1, 1, 0, bi.out_channels));
            } else {
                s.layers.push_back(conv_record(bi.name + ".shortcut", "conv1x1", r, bi.in_channels, 1,
                                               bi.downsample ? 2 : 1, 0, bi.out_channels));
            }
        }
    }
    const std::size_t feat = plan.out[3];
    const std::size_t r_last = in / 32;
    LayerRecord gap;
    gap.name = "head.gap";
    gap.kind = "gap";
    gap.in_shape = {r_last, r_last, feat};
    gap.out_shape = {feat};
    gap.pool_elements = feat;
    s.layers.push_back(gap);
    LayerRecord fc;
    fc.name = "head.fc";
    fc.kind = "fc";
    fc.in_shape = {feat};
    fc.out_shape = {spec.num_classes};
    fc.params = feat * spec.num_classes + spec.num_classes;
    fc.macs = std::uint64_t(feat) * spec.num_classes;
    s.layers.push_back(fc);
    return s;
}

json summary_to_json(const ModelSummary& s) {
    json j;
    j["spec"] = s.spec;
    j["layers"] = s.layers;
    return j;
}

ModelSummary summary_from_json(const json& j) {
    ModelSummary s;
    s.spec = model_spec_from_json(j.at("spec"));
    s.layers = j.at("layers").get<std::vector<LayerRecord>>();
    return s;
}

}  // namespace gsa
