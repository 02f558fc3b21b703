#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "seqlab/checkpoint.hpp"
#include "seqlab/data.hpp"
#include "seqlab/inference.hpp"
#include "seqlab/model.hpp"
#include "seqlab/textgen.hpp"
#include "seqlab/training.hpp"

namespace py = pybind11;
using namespace seqlab;

namespace {

std::vector<std::string> tensor_names(const ModelParams& p) {
    std::vector<std::string> names;
    names.push_back("embedding");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        names.push_back("layer" + std::to_string(l) + ".W");
        names.push_back("layer" + std::to_string(l) + ".b");
    }
    names.push_back("output_W");
    names.push_back("output_b");
    return names;
}

py::array_t<double> tensor_array(const TensorPtr& t) {
    if (t->shape.size() == 2)
        return py::array_t<double>({t->shape[0], t->shape[1]}, t->data.data());
    return py::array_t<double>(static_cast<py::ssize_t>(t->data.size()), t->data.data());
}

void fill_tensor(const TensorPtr& t, const py::array_t<double>& arr) {
    const py::buffer_info info = py::array_t<double, py::array::c_style>::ensure(arr).request();
    if (static_cast<std::size_t>(info.size) != t->data.size())
        throw ShapeError("array element count does not match the tensor");
    std::memcpy(t->data.data(), info.ptr, t->data.size() * sizeof(double));
}

ModelParams deep_copy(const ModelParams& p) {
    ModelParams out = ModelParams::create(p.vocab(), p.width(), p.depth());
    const auto src = p.all_tensors();
    const auto dst = out.all_tensors();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->data = src[i]->data;
    return out;
}

py::list metrics_list(const std::vector<EpochMetrics>& metrics) {
    py::list rows;
    for (const EpochMetrics& m : metrics) {
        py::dict row;
        row["epoch"] = m.epoch;
        row["lr"] = m.lr;
        row["train_ppl"] = m.train_ppl;
        row["valid_ppl"] = m.valid_ppl;
        row["wall_seconds"] = m.wall_seconds;
        row["grad_clip_events"] = m.grad_clip_events;
        rows.append(row);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_seqlab, m) {
    m.doc() = "LSTM sequence-modeling laboratory: dropout on non-recurrent connections only";

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("n", &TrainConfig::n)
        .def_readwrite("layers", &TrainConfig::layers)
        .def_readwrite("unroll", &TrainConfig::unroll)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("init_range", &TrainConfig::init_range)
        .def_readwrite("dropout_p", &TrainConfig::dropout_p)
        .def_readwrite("lr0", &TrainConfig::lr0)
        .def_readwrite("decay_start_epoch", &TrainConfig::decay_start_epoch)
        .def_readwrite("decay_factor", &TrainConfig::decay_factor)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("clip_threshold", &TrainConfig::clip_threshold)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("vocab_cap", &TrainConfig::vocab_cap)
        .def_readwrite("translation_mode", &TrainConfig::translation_mode)
        .def("validate", &TrainConfig::validate)
        .def("__eq__", [](const TrainConfig& a, const TrainConfig& b) { return a == b; })
        .def("__repr__", [](const TrainConfig& c) {
            return "TrainConfig(n=" + std::to_string(c.n) + ", layers=" +
                   std::to_string(c.layers) + ", unroll=" + std::to_string(c.unroll) +
                   ", batch=" + std::to_string(c.batch) + ", dropout_p=" +
                   std::to_string(c.dropout_p) + ", epochs=" + std::to_string(c.epochs) + ")";
        });

    m.def("preset", &preset, py::arg("name"),
          "Named configuration: medium, large, or baseline-small");
    m.def("preset_names", &preset_names);

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("load", &Vocabulary::load, py::arg("path"))
        .def("save", &Vocabulary::save, py::arg("path"))
        .def("__len__", &Vocabulary::size)
        .def("lookup", &Vocabulary::lookup, py::arg("token"))
        .def("token", &Vocabulary::token, py::arg("id"))
        .def("tokens", &Vocabulary::tokens)
        .def("eos_id", &Vocabulary::eos_id)
        .def("unk_id", &Vocabulary::unk_id)
        .def("has_sep", &Vocabulary::has_sep)
        .def("sep_id", &Vocabulary::sep_id)
        .def("__eq__", [](const Vocabulary& a, const Vocabulary& b) { return a == b; });

    py::class_<Corpus>(m, "Corpus")
        .def_readonly("ids", &Corpus::ids)
        .def_readonly("vocab", &Corpus::vocab);

    m.def(
        "corpus_from_text",
        [](const std::string& text, std::optional<Vocabulary> vocab, std::size_t vocab_cap) {
            return corpus_from_text(text, vocab ? &*vocab : nullptr, vocab_cap);
        },
        py::arg("text"), py::arg("vocab") = std::nullopt, py::arg("vocab_cap") = 10000);
    m.def(
        "load_corpus",
        [](const std::filesystem::path& path, std::optional<Vocabulary> vocab,
           std::size_t vocab_cap) {
            return load_corpus(path, vocab ? &*vocab : nullptr, vocab_cap);
        },
        py::arg("path"), py::arg("vocab") = std::nullopt, py::arg("vocab_cap") = 10000);

    m.def("cyclic_toy_text", &cyclic_toy_text, py::arg("n_tokens"));
    m.def(
        "markov_text",
        [](std::size_t n_tokens, std::size_t vocab, std::size_t branch, double eos_prob,
           std::uint64_t seed, std::uint64_t sample_offset) {
            MarkovTextConfig cfg;
            cfg.vocab = vocab;
            cfg.branch = branch;
            cfg.eos_prob = eos_prob;
            cfg.seed = seed;
            return markov_text(n_tokens, cfg, sample_offset);
        },
        py::arg("n_tokens"), py::arg("vocab") = 2000, py::arg("branch") = 20,
        py::arg("eos_prob") = 0.08, py::arg("seed") = 1234, py::arg("sample_offset") = 0);

    py::class_<ModelParams>(m, "ModelParams")
        .def_property_readonly("vocab", &ModelParams::vocab)
        .def_property_readonly("width", &ModelParams::width)
        .def_property_readonly("depth", &ModelParams::depth)
        .def("parameter_count", &ModelParams::parameter_count)
        .def("tensor_names", [](const ModelParams& p) { return tensor_names(p); })
        .def(
            "tensor",
            [](const ModelParams& p, std::size_t i) {
                const auto all = p.all_tensors();
                if (i >= all.size()) throw IndexError("tensor index out of range");
                return tensor_array(all[i]);
            },
            py::arg("index"), "Copy of the i-th parameter tensor (declared order)")
        .def(
            "set_tensor",
            [](const ModelParams& p, std::size_t i, const py::array_t<double>& arr) {
                const auto all = p.all_tensors();
                if (i >= all.size()) throw IndexError("tensor index out of range");
                fill_tensor(all[i], arr);
            },
            py::arg("index"), py::arg("array"))
        .def("copy", &deep_copy, "Deep copy (tensors not shared)");

    m.def("init_params", &init_params, py::arg("config"), py::arg("vocab_size"));

    m.def(
        "train",
        [](const TrainConfig& cfg, const Corpus& corpus, const std::vector<TokenId>& valid_ids) {
            const TrainResult r = train(cfg, corpus, valid_ids);
            return py::make_tuple(r.params, metrics_list(r.metrics));
        },
        py::arg("config"), py::arg("corpus"), py::arg("valid_ids"),
        "Returns (params, per-epoch metrics dicts)");

    m.def("perplexity", &perplexity, py::arg("params"), py::arg("ids"), py::arg("batch"),
          py::arg("steps"));
    m.def(
        "ensemble_perplexity",
        [](const std::vector<ModelParams>& models, const std::vector<TokenId>& ids,
           std::size_t batch, std::size_t steps) {
            std::vector<const ModelParams*> ptrs;
            for (const ModelParams& p : models) ptrs.push_back(&p);
            return ensemble_perplexity(ptrs, ids, batch, steps);
        },
        py::arg("models"), py::arg("ids"), py::arg("batch"), py::arg("steps"));

    m.def(
        "sample",
        [](const ModelParams& params, const std::vector<TokenId>& prefix, std::size_t max_len,
           double temperature, const std::vector<TokenId>& forbidden, std::uint64_t seed,
           TokenId eos_id) {
            SamplerConfig cfg;
            cfg.prefix = prefix;
            cfg.max_len = max_len;
            cfg.temperature = temperature;
            cfg.forbidden = forbidden;
            cfg.seed = seed;
            cfg.eos_id = eos_id;
            return sample(params, cfg);
        },
        py::arg("params"), py::arg("prefix"), py::arg("max_len") = 100,
        py::arg("temperature") = 1.0, py::arg("forbidden") = std::vector<TokenId>{},
        py::arg("seed") = 0, py::arg("eos_id") = 0);

    m.def(
        "beam_search",
        [](const ModelParams& params, const std::vector<TokenId>& prefix, std::size_t beam_width,
           std::size_t max_len, TokenId eos_id, bool length_normalize) {
            BeamOptions opts;
            opts.max_len = max_len;
            opts.eos_id = eos_id;
            opts.length_normalize = length_normalize;
            const BeamHypothesis h = beam_search(params, prefix, beam_width, opts);
            return py::make_tuple(h.tokens, h.log_prob, h.completed);
        },
        py::arg("params"), py::arg("prefix"), py::arg("beam_width") = 12,
        py::arg("max_len") = 100, py::arg("eos_id") = 0, py::arg("length_normalize") = false,
        "Returns (tokens, log_prob, completed)");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readwrite("config", &Checkpoint::config)
        .def_readwrite("vocab", &Checkpoint::vocab)
        .def_readwrite("params", &Checkpoint::params)
        .def_readwrite("completed_epochs", &Checkpoint::completed_epochs);

    m.def(
        "save_checkpoint",
        [](const std::filesystem::path& path, const TrainConfig& cfg, const Vocabulary& vocab,
           const ModelParams& params, int completed_epochs) {
            save_checkpoint(path, {cfg, vocab, params, completed_epochs});
        },
        py::arg("path"), py::arg("config"), py::arg("vocab"), py::arg("params"),
        py::arg("completed_epochs") = 0);
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
}
