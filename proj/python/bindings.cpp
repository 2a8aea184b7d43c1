#include <map>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gsa/attention.hpp"
#include "gsa/contract.hpp"
#include "gsa/cost.hpp"
#include "gsa/model.hpp"
#include "gsa/runtime.hpp"
#include "gsa/tensor_io.hpp"
#include "gsa/toy.hpp"
#include "gsa/verify.hpp"

namespace py = pybind11;
using namespace gsa;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return std::move(out);
}

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Mode parse_mode(const std::string& s) {
    if (s == "train") return Mode::train;
    if (s == "infer") return Mode::infer;
    throw ArgumentError("mode must be 'train' or 'infer', got '" + s + "'");
}

Axis parse_axis(const std::string& s) {
    if (s == "col") return Axis::col;
    if (s == "row") return Axis::row;
    throw ArgumentError("axis must be 'col' or 'row', got '" + s + "'");
}

py::dict params_to_dict(GsaParams& p, const GsaConfig& cfg) {
    py::dict out;
    for (const auto& ref : list_parameters(p, cfg, true, true)) {
        out[py::str(ref.name)] = to_array(Tensor(ref.shape, std::vector<double>(ref.values.begin(), ref.values.end())));
    }
    return out;
}

// Every active parameter and running statistic must be present; unknown names are rejected.
GsaParams params_from_dict(const py::dict& d, const GsaConfig& cfg) {
    GsaParams p = GsaParams::init(cfg, 0);
    auto refs = list_parameters(p, cfg, true, true);
    std::map<std::string, ParamRef*> by_name;
    for (auto& r : refs) by_name[r.name] = &r;
    std::size_t seen = 0;
    for (auto [key, value] : d) {
        const std::string name = py::cast<std::string>(key);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ArgumentError("unknown parameter '" + name + "' for " + cfg.describe());
        const Tensor t = to_tensor(py::cast<Array>(value));
        if (t.shape() != it->second->shape) {
            throw ShapeError("parameter '" + name + "' has shape " + shape_to_string(t.shape()) + ", expected " +
                             shape_to_string(it->second->shape));
        }
        std::copy(t.data().begin(), t.data().end(), it->second->values.begin());
        ++seen;
    }
    if (seen != refs.size()) {
        std::string missing;
        for (auto& r : refs)
            if (!d.contains(r.name)) missing += " " + r.name;
        throw ArgumentError("missing parameters:" + missing);
    }
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Global self-attention kernels, cost model and verification";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

    m.def("set_num_threads", &set_num_threads, py::arg("n"));
    m.def("num_threads", &num_threads);

    py::class_<GsaConfig>(m, "GsaConfig")
        .def(py::init([](std::size_t d_in, std::size_t d_k, std::size_t d_out, std::size_t n_heads, std::size_t height,
                         std::size_t width, std::size_t window, bool content_on, bool col_on, bool row_on,
                         bool softmax_on_queries, bool axial_content) {
                 GsaConfig c;
                 c.d_in = d_in;
                 c.d_k = d_k;
                 c.d_out = d_out;
                 c.n_heads = n_heads;
                 c.height = height;
                 c.width = width;
                 c.window = window;
                 c.content_on = content_on;
                 c.col_on = col_on;
                 c.row_on = row_on;
                 c.softmax_on_queries = softmax_on_queries;
                 c.axial_content = axial_content;
                 c.validate();
                 return c;
             }),
             py::arg("d_in"), py::arg("d_k"), py::arg("d_out"), py::arg("n_heads") = 8, py::arg("height") = 1,
             py::arg("width") = 1, py::arg("window") = 0, py::arg("content_on") = true, py::arg("col_on") = true,
             py::arg("row_on") = true, py::arg("softmax_on_queries") = false, py::arg("axial_content") = false)
        .def_readwrite("d_in", &GsaConfig::d_in)
        .def_readwrite("d_k", &GsaConfig::d_k)
        .def_readwrite("d_out", &GsaConfig::d_out)
        .def_readwrite("n_heads", &GsaConfig::n_heads)
        .def_readwrite("height", &GsaConfig::height)
        .def_readwrite("width", &GsaConfig::width)
        .def_readwrite("window", &GsaConfig::window)
        .def_readwrite("content_on", &GsaConfig::content_on)
        .def_readwrite("col_on", &GsaConfig::col_on)
        .def_readwrite("row_on", &GsaConfig::row_on)
        .def_readwrite("softmax_on_queries", &GsaConfig::softmax_on_queries)
        .def_readwrite("axial_content", &GsaConfig::axial_content)
        .def("validate", &GsaConfig::validate)
        .def("__repr__", [](const GsaConfig& c) { return "GsaConfig(" + c.describe() + ")"; });

    m.def(
        "einsum",
        [](const std::string& spec, py::args operands) {
            std::vector<Tensor> tensors;
            for (auto o : operands) tensors.push_back(to_tensor(py::cast<Array>(o)));
            std::vector<const Tensor*> ptrs;
            for (auto& t : tensors) ptrs.push_back(&t);
            return to_array(contract(ContractionSpec::parse(spec), ptrs));
        },
        py::arg("spec"));

    m.def(
        "softmax", [](const Array& x, std::vector<std::size_t> axes) { return to_array(softmax(to_tensor(x), axes)); },
        py::arg("x"), py::arg("axes"));

    m.def(
        "init_params",
        [](const GsaConfig& cfg, std::uint64_t seed) {
            GsaParams p = GsaParams::init(cfg, seed);
            return params_to_dict(p, cfg);
        },
        py::arg("config"), py::arg("seed") = 0);

    m.def(
        "content_attention",
        [](const Array& k, const Array& q, const Array& v, const GsaConfig& cfg) {
            return to_array(content_attention(to_tensor(k), to_tensor(q), to_tensor(v), cfg));
        },
        py::arg("k"), py::arg("q"), py::arg("v"), py::arg("config"));
    m.def(
        "axial_content_attention",
        [](const Array& k, const Array& q, const Array& v, const GsaConfig& cfg) {
            return to_array(axial_content_attention(to_tensor(k), to_tensor(q), to_tensor(v), cfg));
        },
        py::arg("k"), py::arg("q"), py::arg("v"), py::arg("config"));
    m.def(
        "positional_attention_axis",
        [](const Array& q, const Array& v, const Array& r, const std::string& axis, const GsaConfig& cfg) {
            return to_array(positional_attention_axis(to_tensor(q), to_tensor(v), to_tensor(r), parse_axis(axis), cfg));
        },
        py::arg("q"), py::arg("v"), py::arg("r"), py::arg("axis"), py::arg("config"));
    m.def(
        "build_reindex_tensor",
        [](std::size_t extent, std::size_t radius) { return to_array(build_reindex_tensor(extent, radius)); },
        py::arg("extent"), py::arg("radius"));

    m.def(
        "gsa_forward",
        [](const Array& x, const py::dict& params, const GsaConfig& cfg, const std::string& mode) {
            return to_array(gsa_forward(to_tensor(x), params_from_dict(params, cfg), cfg, parse_mode(mode)));
        },
        py::arg("x"), py::arg("params"), py::arg("config"), py::arg("mode") = "infer");
    m.def(
        "gsa_backward",
        [](const Array& x, const py::dict& params, const GsaConfig& cfg, const Array& upstream,
           const std::string& mode) {
            GsaGradients g = gsa_backward(to_tensor(x), params_from_dict(params, cfg), cfg, to_tensor(upstream),
                                          parse_mode(mode));
            py::dict grads;
            for (const auto& ref : list_parameters(g.params, cfg)) {
                grads[py::str(ref.name)] =
                    to_array(Tensor(ref.shape, std::vector<double>(ref.values.begin(), ref.values.end())));
            }
            return py::make_tuple(to_array(g.input), grads);
        },
        py::arg("x"), py::arg("params"), py::arg("config"), py::arg("upstream"), py::arg("mode") = "train");
    m.def(
        "oracle_gsa_forward",
        [](const Array& x, const py::dict& params, const GsaConfig& cfg, const std::string& mode) {
            return to_array(oracle_gsa_forward(to_tensor(x), params_from_dict(params, cfg), cfg, parse_mode(mode)));
        },
        py::arg("x"), py::arg("params"), py::arg("config"), py::arg("mode") = "infer");
    m.def(
        "oracle_content_attention",
        [](const Array& k, const Array& q, const Array& v, bool softmax_on_queries) {
            return to_array(oracle_content_attention(to_tensor(k), to_tensor(q), to_tensor(v), softmax_on_queries));
        },
        py::arg("k"), py::arg("q"), py::arg("v"), py::arg("softmax_on_queries") = false);
    m.def(
        "oracle_positional_axis",
        [](const Array& q, const Array& v, const Array& r, const std::string& axis, std::size_t radius) {
            return to_array(oracle_positional_axis(to_tensor(q), to_tensor(v), to_tensor(r), parse_axis(axis), radius));
        },
        py::arg("q"), py::arg("v"), py::arg("r"), py::arg("axis"), py::arg("radius"));

    m.def("preset_names", &ModelSpec::preset_names);
    m.def(
        "model_spec", [](const std::string& preset) { return to_python(nlohmann::json(ModelSpec::preset(preset))); },
        py::arg("preset"));
    m.def(
        "count_params", [](const std::string& preset) { return to_python(to_json(count_params(ModelSpec::preset(preset)))); },
        py::arg("preset"));
    m.def(
        "count_flops",
        [](const std::string& preset, std::size_t input_size) {
            return to_python(to_json(count_flops(ModelSpec::preset(preset), input_size)));
        },
        py::arg("preset"), py::arg("input_size") = 0);
    m.def(
        "describe", [](const std::string& preset) { return to_python(summary_to_json(describe_model(ModelSpec::preset(preset)))); },
        py::arg("preset"));

    m.def(
        "run_verify_suite",
        [](const std::string& suite, std::uint64_t seed, std::size_t cases) {
            py::list out;
            for (const auto& r : run_verify_suite(suite, seed, cases)) out.append(to_python(to_json(r)));
            return out;
        },
        py::arg("suite") = "all", py::arg("seed") = 0, py::arg("cases") = 0);

    m.def(
        "train_toy",
        [](std::size_t steps, double lr, double momentum, std::uint64_t seed, std::size_t blocks, std::size_t width,
           std::size_t image_size, std::size_t num_classes, std::size_t samples_per_class) {
            ToySpec s;
            s.steps = steps;
            s.lr = lr;
            s.momentum = momentum;
            s.seed = seed;
            s.blocks = blocks;
            s.width = width;
            s.image_size = image_size;
            s.num_classes = num_classes;
            s.samples_per_class = samples_per_class;
            return train_toy(s).losses;
        },
        py::arg("steps") = 200, py::arg("lr") = 0.1, py::arg("momentum") = 0.9, py::arg("seed") = 0,
        py::arg("blocks") = 2, py::arg("width") = 16, py::arg("image_size") = 8, py::arg("num_classes") = 10,
        py::arg("samples_per_class") = 8);

    m.def(
        "save_gsat", [](const std::filesystem::path& p, const Array& a, bool float32) {
            save_gsat(p, to_tensor(a).with_dtype(float32 ? Dtype::f32 : Dtype::f64));
        },
        py::arg("path"), py::arg("array"), py::arg("float32") = false);
    m.def(
        "load_gsat", [](const std::filesystem::path& p) { return to_array(load_gsat(p)); }, py::arg("path"));
}
