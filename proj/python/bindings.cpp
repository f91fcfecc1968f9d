#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vse/checkpoint.hpp"
#include "vse/config.hpp"
#include "vse/dataset.hpp"
#include "vse/gradient_suite.hpp"
#include "vse/retrieval.hpp"
#include "vse/synth.hpp"
#include "vse/tensor_io.hpp"
#include "vse/training.hpp"

namespace py = pybind11;
using namespace vse;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
    std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
    py::array_t<T> out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

template <typename T, typename Array>
Tensor<T> from_numpy(const Array& a) {
    Shape dims(a.shape(), a.shape() + a.ndim());
    return Tensor<T>(std::move(dims), std::vector<T>(a.data(), a.data() + a.size()));
}

py::dict item_dict(const DatasetItem& item) {
    py::dict d;
    d["id"] = item.id;
    d["split"] = split_name(item.split);
    d["feature_path"] = item.feature_path;
    d["captions"] = item.captions;
    if (item.image_size) d["image_size"] = py::make_tuple(item.image_size->width, item.image_size->height);
    else d["image_size"] = py::none();
    d["features"] = to_numpy(item.features);
    return d;
}

Split split_from(const std::string& s) {
    auto split = parse_split(s);
    if (!split) throw ConfigError("unknown split '" + s + "'");
    return *split;
}

py::dict report_dict(const ProtocolResult& r) {
    py::dict d;
    for (const auto* rep : {&r.sentence, &r.image}) {
        py::dict x;
        x["r1"] = rep->r1;
        x["r5"] = rep->r5;
        x["r10"] = rep->r10;
        x["folds"] = rep->folds;
        d[direction_name(rep->direction).c_str()] = x;
    }
    return d;
}

RunConfig config_from(const std::map<std::string, std::string>& settings) {
    RunConfig cfg;
    for (const auto& [k, v] : settings) set_config_value(cfg, k, v);
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_vse, m) {
    m.doc() = "Multi-head attention visual-semantic embedding core";

    static py::exception<Error> error(m, "VseError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error.ptr())("[" + e.category() + "] " + e.what());
            exc.attr("category") = e.category();
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    m.def("read_tensor", [](const std::string& path) { return to_numpy(read_tensor(path)); }, py::arg("path"),
          "Load a TensorFile as a float32 array.");
    m.def("write_tensor", [](const std::string& path, const FloatArray& a) { write_tensor(path, from_numpy<float>(a)); },
          py::arg("path"), py::arg("array"));
    m.def("encode_tensor", [](const FloatArray& a) {
        const auto b = encode_tensor(from_numpy<float>(a));
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
    });
    m.def("decode_tensor", [](const py::bytes& b) {
        const std::string s = b;
        return to_numpy(decode_tensor(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
    });

    m.def("load_manifest", [](const std::string& path) {
        const auto ds = load_dataset(path);
        py::list items;
        for (const auto& it : ds.items) items.append(item_dict(it));
        py::dict d;
        d["vocab_size"] = ds.vocab_size;
        d["items"] = items;
        return d;
    }, py::arg("path"));
    m.def("manifest_line",
          [](const std::string& id, const std::string& split, const std::string& feature_path,
             const std::vector<TokenSequence>& captions, std::optional<std::pair<std::size_t, std::size_t>> image_size) {
              DatasetItem item;
              item.id = id;
              item.split = split_from(split);
              item.feature_path = feature_path;
              item.captions = captions;
              if (image_size) item.image_size = ImageSize{image_size->first, image_size->second};
              return format_manifest_item(item);
          },
          py::arg("id"), py::arg("split"), py::arg("feature_path"), py::arg("captions"), py::arg("image_size") = py::none(),
          "One manifest line; fragments built from these lines may be concatenated.");

    m.def("synth", [](const std::string& out, const std::map<std::string, double>& options) {
        SynthOptions o;
        for (const auto& [k, v] : options) {
            if (k == "seed") o.seed = static_cast<std::uint64_t>(v);
            else if (k == "classes") o.classes = static_cast<std::size_t>(v);
            else if (k == "items") o.items = static_cast<std::size_t>(v);
            else if (k == "grid_width") o.grid_width = static_cast<std::size_t>(v);
            else if (k == "grid_height") o.grid_height = static_cast<std::size_t>(v);
            else if (k == "vocab") o.vocab = static_cast<std::size_t>(v);
            else if (k == "channels") o.channels = static_cast<std::size_t>(v);
            else if (k == "noise") o.noise = v;
            else throw ConfigError("unknown synth option '" + k + "'");
        }
        return write_synthetic(generate_synthetic(o), out);
    }, py::arg("out"), py::arg("options") = std::map<std::string, double>{}, "Write a synthetic dataset; returns the manifest path.");

    m.def("train", [](const std::string& manifest, const std::map<std::string, std::string>& settings,
                      const std::string& checkpoint) {
        const auto ds = load_dataset(manifest);
        RunConfig cfg = config_from(settings);
        cfg.train.checkpoint_dir = checkpoint;
        TrainResult res = [&] {
            py::gil_scoped_release release;
            return train(ds, cfg);
        }();
        py::list rows;
        for (const auto& e : res.metrics) {
            py::dict d;
            d["epoch"] = e.epoch;
            d["stage"] = e.stage;
            d["lr"] = e.lr;
            d["total_loss"] = e.total;
            d["triplet_loss"] = e.triplet;
            d["diversity_loss"] = e.diversity;
            rows.append(d);
        }
        return rows;
    }, py::arg("manifest"), py::arg("settings") = std::map<std::string, std::string>{}, py::arg("checkpoint") = "",
       "Train from a manifest with key = value config overrides; returns per-epoch metrics.");

    m.def("evaluate", [](const std::string& checkpoint, const std::string& manifest, const std::string& split,
                         std::size_t fold_size) {
        const auto ck = load_checkpoint(checkpoint);
        const auto ds = load_dataset(manifest);
        const auto items = split == "all" ? ds.select({Split::train, Split::val, Split::test}) : ds.select(split_from(split));
        if (items.empty()) throw ContractError("no items in split '" + split + "'");
        const auto enc = encode_items(ck.model, std::span<const DatasetItem* const>(items));
        auto d = report_dict(evaluate_protocol(enc.embeddings, fold_size));
        d["mean_diversity"] = enc.mean_diversity;
        return d;
    }, py::arg("checkpoint"), py::arg("manifest"), py::arg("split") = "test", py::arg("fold_size") = 0);

    m.def("recall_at_k", [](const DoubleArray& sim, const GroundTruth& truth, std::size_t k) {
        if (sim.ndim() != 2) throw ShapeError("similarity must be a matrix");
        return recall_at_k(from_numpy<double>(sim), truth, k);
    }, py::arg("similarity"), py::arg("truth"), py::arg("k"));

    m.def("gradcheck", [](std::uint64_t seed) {
        GradientSuiteOptions o;
        o.seed = seed;
        const auto rep = run_gradient_suite(o);
        py::dict d;
        d["max_rel_error"] = rep.max_rel_error;
        d["passed"] = rep.passed();
        py::dict cases;
        for (const auto& c : rep.cases) cases[c.name.c_str()] = c.result.max_rel_error;
        d["cases"] = cases;
        return d;
    }, py::arg("seed") = 2024);
}
