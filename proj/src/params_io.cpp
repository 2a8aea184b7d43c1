#include "gsa/params_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace gsa {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "gsa-param-bundle";

std::string dtype_name(Dtype d) { return d == Dtype::f32 ? "float32" : "float64"; }

}  // namespace

void save_bundle(const std::filesystem::path& dir, const std::vector<ParamRef>& params, Dtype dtype) {
    std::filesystem::create_directories(dir);
    json entries = json::array();
    for (const auto& p : params) {
        const std::string file = p.name + ".gsat";
        Tensor t(p.shape, std::vector<double>(p.values.begin(), p.values.end()));
        save_gsat(dir / file, t.with_dtype(dtype));
        entries.push_back({{"name", p.name},
                           {"file", file},
                           {"shape", p.shape},
                           {"dtype", dtype_name(dtype)},
                           {"trainable", p.trainable}});
    }
    json manifest{{"format", kFormat}, {"version", 1}, {"parameters", entries}};
    std::ofstream os(dir / "manifest.json");
    if (!os) throw FormatError("cannot write manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
}

json read_manifest(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw FormatError("missing manifest.json in " + dir.string());
    json m;
    try {
        m = json::parse(is);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    if (!m.is_object() || m.value("format", "") != kFormat) throw FormatError("manifest.json: format is not gsa-param-bundle");
    if (m.value("version", 0) != 1) throw FormatError("manifest.json: unsupported version");
    if (!m.contains("parameters") || !m["parameters"].is_array()) throw FormatError("manifest.json: missing parameters array");
    return m;
}

void load_bundle(const std::filesystem::path& dir, std::vector<ParamRef>& params) {
    const json m = read_manifest(dir);
    std::map<std::string, ParamRef*> by_name;
    for (auto& p : params) by_name[p.name] = &p;

    std::size_t seen = 0;
    for (const auto& e : m["parameters"]) {
        const std::string name = e.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("bundle parameter '" + name + "' has no counterpart in the model");
        ParamRef& dst = *it->second;
        Tensor t = load_gsat(dir / e.at("file").get<std::string>());
        if (t.shape() != dst.shape || e.at("shape").get<Shape>() != dst.shape) {
            throw FormatError("bundle parameter '" + name + "' has shape " + shape_to_string(t.shape()) + ", expected " +
                              shape_to_string(dst.shape));
        }
        auto src = t.data();
        std::copy(src.begin(), src.end(), dst.values.begin());
        ++seen;
    }
    if (seen != params.size()) {
        throw FormatError("bundle holds " + std::to_string(seen) + " parameters, model expects " +
                          std::to_string(params.size()));
    }
}

}  // namespace gsa
