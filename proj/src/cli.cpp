#include "seqlab/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqlab/checkpoint.hpp"
#include "seqlab/data.hpp"
#include "seqlab/inference.hpp"
#include "seqlab/model.hpp"
#include "seqlab/textgen.hpp"
#include "seqlab/training.hpp"

namespace seqlab {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) throw IoError("failed reading " + path.string());
    return out.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (in.bad()) throw IoError("failed reading " + path.string());
    return lines;
}

fs::path resolve_split_file(const fs::path& dir, const std::string& split) {
    for (const std::string name : {split + ".txt", "ptb." + split + ".txt"}) {
        if (fs::exists(dir / name)) return dir / name;
    }
    throw IoError("no " + split + " split under " + dir.string() + " (tried " + split +
                  ".txt and ptb." + split + ".txt)");
}

bool is_translation_dir(const fs::path& dir) {
    return fs::exists(dir / "train.src") && fs::exists(dir / "train.tgt");
}

void count_file_tokens(const fs::path& path, std::unordered_map<std::string, std::size_t>& counts,
                       std::size_t& total) {
    for (const std::string& line : read_lines(path)) {
        for (const std::string& tok : split_tokens(line)) {
            ++counts[tok];
            ++total;
        }
    }
}

std::string checkpoint_name(int epoch) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "checkpoint-epoch-%04d.bin", epoch);
    return buf;
}

// ---- option bags -----------------------------------------------------------

struct PrepareOpts {
    fs::path data_dir;
    fs::path out_dir;
    std::size_t vocab_size = 10000;
};

struct TrainOpts {
    fs::path data_dir;
    std::string toy_corpus;
    std::string preset_name;
    fs::path config_file;
    fs::path out_dir;
    fs::path checkpoint;  // resume source
    // overrides; *_set reflects whether the flag appeared
    int epochs = 0;
    double dropout = 0.0;
    std::size_t unroll = 0;
    std::size_t batch_size = 0;
    double lr = 0.0;
    double clip = 0.0;
    std::uint64_t seed = 0;
    std::size_t vocab_size = 0;
    bool epochs_set = false, dropout_set = false, unroll_set = false, batch_set = false,
         lr_set = false, clip_set = false, seed_set = false, vocab_set = false;

    bool has_override() const {
        return epochs_set || dropout_set || unroll_set || batch_set || lr_set || clip_set ||
               seed_set || vocab_set;
    }
};

struct EvalOpts {
    std::vector<fs::path> checkpoints;
    fs::path data_dir;
    std::vector<std::string> splits{"valid", "test"};
    std::size_t batch_size = 0;
    std::size_t unroll = 0;
    bool batch_set = false, unroll_set = false;
};

struct SampleOpts {
    fs::path checkpoint;
    std::string prefix;
    std::size_t max_len = 100;
    double temperature = 1.0;
    std::vector<std::string> forbid{"<unk>", "N", "$"};
    std::uint64_t seed = 0;
};

struct TranslateOpts {
    fs::path checkpoint;
    fs::path source;
    fs::path out_dir;
    std::size_t beam_width = 12;
    std::size_t max_len = 100;
};

// ---- corpus assembly -------------------------------------------------------

struct TrainData {
    Corpus train;
    std::vector<TokenId> valid_ids;
    bool translation = false;
};

Vocabulary translation_vocab(const fs::path& dir, std::size_t cap) {
    std::unordered_map<std::string, std::size_t> counts;
    std::size_t total = 0;
    count_file_tokens(dir / "train.src", counts, total);
    count_file_tokens(dir / "train.tgt", counts, total);
    return Vocabulary::build(counts, cap, /*with_sep=*/true);
}

std::vector<TokenId> translation_ids(const fs::path& dir, const std::string& split,
                                     const Vocabulary& vocab) {
    const fs::path src = dir / (split + ".src");
    const fs::path tgt = dir / (split + ".tgt");
    if (!fs::exists(src) || !fs::exists(tgt))
        throw IoError("no " + split + " pair under " + dir.string() + " (need " + split +
                      ".src and " + split + ".tgt)");
    return concat_pairs(read_lines(src), read_lines(tgt), vocab);
}

TrainData load_train_data(const TrainOpts& o, const TrainConfig& cfg,
                          const Vocabulary* fixed_vocab) {
    TrainData out;
    if (!o.toy_corpus.empty() && !o.data_dir.empty())
        throw ConfigError("--data-dir and --toy-corpus are mutually exclusive");
    if (!o.toy_corpus.empty()) {
        const std::size_t n_tokens = parse_size(o.toy_corpus);
        out.train = corpus_from_text(cyclic_toy_text(n_tokens), fixed_vocab, cfg.vocab_cap);
        const std::size_t valid_tokens = std::max<std::size_t>(n_tokens / 5, 4 * cfg.batch);
        out.valid_ids = corpus_from_text(cyclic_toy_text(valid_tokens), &out.train.vocab).ids;
        return out;
    }
    if (o.data_dir.empty()) throw ConfigError("train needs --data-dir or --toy-corpus");
    if (is_translation_dir(o.data_dir)) {
        out.translation = true;
        Vocabulary vocab =
            fixed_vocab ? *fixed_vocab : translation_vocab(o.data_dir, cfg.vocab_cap);
        out.train.vocab = vocab;
        out.train.ids = translation_ids(o.data_dir, "train", vocab);
        out.valid_ids = translation_ids(o.data_dir, "valid", vocab);
        return out;
    }
    out.train = load_corpus(resolve_split_file(o.data_dir, "train"), fixed_vocab, cfg.vocab_cap);
    out.valid_ids = load_corpus(resolve_split_file(o.data_dir, "valid"), &out.train.vocab).ids;
    return out;
}

// ---- commands --------------------------------------------------------------

void cmd_prepare(const PrepareOpts& o) {
    fs::create_directories(o.out_dir);
    if (is_translation_dir(o.data_dir)) {
        const Vocabulary vocab = translation_vocab(o.data_dir, o.vocab_size);
        vocab.save(o.out_dir / "vocab.txt");
        std::cout << "mode: translation (source <sep> target <eos> concatenation)\n";
        for (const std::string split : {"train", "valid", "test"}) {
            if (!fs::exists(o.data_dir / (split + ".src"))) continue;
            const auto ids = translation_ids(o.data_dir, split, vocab);
            std::cout << split << ": " << ids.size() << " tokens\n";
        }
        std::cout << "vocabulary: " << vocab.size() << " entries -> "
                  << (o.out_dir / "vocab.txt").string() << "\n";
        return;
    }
    const Corpus train = load_corpus(resolve_split_file(o.data_dir, "train"), nullptr,
                                     o.vocab_size);
    train.vocab.save(o.out_dir / "vocab.txt");
    std::cout << "train: " << train.ids.size() << " tokens\n";
    for (const std::string split : {"valid", "test"}) {
        fs::path path;
        try {
            path = resolve_split_file(o.data_dir, split);
        } catch (const IoError&) {
            continue;
        }
        const Corpus c = load_corpus(path, &train.vocab);
        std::cout << split << ": " << c.ids.size() << " tokens\n";
    }
    std::cout << "vocabulary: " << train.vocab.size() << " entries -> "
              << (o.out_dir / "vocab.txt").string() << "\n";
}

TrainConfig resolve_train_config(const TrainOpts& o, const Checkpoint* resume) {
    if (resume) {
        if (!o.preset_name.empty() || !o.config_file.empty())
            throw ConfigError("resuming takes its configuration from the checkpoint; "
                              "--preset/--config conflict with --checkpoint");
        TrainConfig cfg = resume->config;
        if (o.dropout_set || o.unroll_set || o.batch_set || o.lr_set || o.clip_set ||
            o.seed_set || o.vocab_set)
            throw ConfigError("only --epochs may override a resumed configuration");
        if (o.epochs_set) cfg.epochs = o.epochs;
        cfg.validate();
        return cfg;
    }
    if (!o.preset_name.empty() && !o.config_file.empty())
        throw ConfigError("--preset and --config are mutually exclusive");
    TrainConfig cfg;
    if (!o.config_file.empty())
        cfg = config_from_json(read_text_file(o.config_file));
    else if (!o.preset_name.empty())
        cfg = preset(o.preset_name);
    if (o.epochs_set) cfg.epochs = o.epochs;
    if (o.dropout_set) cfg.dropout_p = o.dropout;
    if (o.unroll_set) cfg.unroll = o.unroll;
    if (o.batch_set) cfg.batch = o.batch_size;
    if (o.lr_set) cfg.lr0 = o.lr;
    if (o.clip_set) cfg.clip_threshold = o.clip;
    if (o.seed_set) cfg.seed = o.seed;
    if (o.vocab_set) cfg.vocab_cap = o.vocab_size;
    cfg.validate();
    return cfg;
}

void cmd_train(const TrainOpts& o) {
    std::optional<Checkpoint> resume;
    if (!o.checkpoint.empty()) resume = load_checkpoint(o.checkpoint);
    TrainConfig cfg = resolve_train_config(o, resume ? &*resume : nullptr);

    TrainData data = load_train_data(o, cfg, resume ? &resume->vocab : nullptr);
    if (data.translation != cfg.translation_mode) {
        if (resume)
            throw ConfigError("checkpoint and data directory disagree on translation mode");
        cfg.translation_mode = data.translation;
        cfg.validate();
    }

    fs::create_directories(o.out_dir);
    write_text_file(o.out_dir / "resolved-config.json", config_to_json(cfg));
    data.train.vocab.save(o.out_dir / "vocab.txt");

    const int start_epoch = resume ? resume->completed_epochs : 0;
    std::ofstream metrics(o.out_dir / "metrics.jsonl",
                          resume ? std::ios::app : std::ios::trunc);
    if (!metrics) throw IoError("cannot open metrics.jsonl under " + o.out_dir.string());

    const EpochSink sink = [&](const EpochMetrics& m, const ModelParams& params,
                               const Vocabulary& vocab) {
        ordered_json row;
        row["epoch"] = m.epoch;
        row["lr"] = m.lr;
        row["train_ppl"] = m.train_ppl;
        row["valid_ppl"] = m.valid_ppl;
        row["wall_seconds"] = m.wall_seconds;
        row["grad_clip_events"] = m.grad_clip_events;
        metrics << row.dump() << "\n";
        metrics.flush();
        if (!metrics) throw IoError("failed writing metrics.jsonl");
        save_checkpoint(o.out_dir / checkpoint_name(m.epoch),
                        {cfg, vocab, params, m.epoch});
        std::cout << "epoch " << m.epoch << "  lr " << m.lr << "  train_ppl " << m.train_ppl
                  << "  valid_ppl " << m.valid_ppl << "  (" << m.wall_seconds << "s, "
                  << m.grad_clip_events << " clip events)" << std::endl;
    };

    TrainResult result =
        train(cfg, data.train, data.valid_ids, sink, start_epoch,
              resume ? std::optional<ModelParams>(std::move(resume->params)) : std::nullopt);
    if (result.metrics.empty()) {
        // Nothing trained (epochs == start_epoch): still leave a loadable snapshot.
        save_checkpoint(o.out_dir / checkpoint_name(start_epoch),
                        {cfg, data.train.vocab, result.params, start_epoch});
        std::cout << "no epochs to run; wrote initial checkpoint" << std::endl;
    }
}

void cmd_eval(const EvalOpts& o) {
    if (o.checkpoints.empty()) throw ConfigError("eval needs at least one --checkpoint");
    std::vector<Checkpoint> members;
    members.reserve(o.checkpoints.size());
    for (const fs::path& p : o.checkpoints) members.push_back(load_checkpoint(p));
    for (const Checkpoint& c : members)
        if (!(c.vocab == members[0].vocab))
            throw ConfigError("ensemble members must share a vocabulary");

    const std::size_t batch = o.batch_set ? o.batch_size : members[0].config.batch;
    const std::size_t unroll = o.unroll_set ? o.unroll : members[0].config.unroll;
    const bool translation = members[0].config.translation_mode;

    for (const std::string& split : o.splits) {
        std::vector<TokenId> ids;
        if (translation) {
            ids = translation_ids(o.data_dir, split, members[0].vocab);
        } else {
            ids = load_corpus(resolve_split_file(o.data_dir, split), &members[0].vocab).ids;
        }
        EvalDetail detail;
        if (members.size() == 1) {
            detail = evaluate(members[0].params, ids, batch, unroll);
        } else {
            std::vector<const ModelParams*> models;
            for (const Checkpoint& c : members) models.push_back(&c.params);
            detail = ensemble_evaluate(models, ids, batch, unroll);
        }
        char line[128];
        std::snprintf(line, sizeof(line), "%s perplexity: %.4f (%zu tokens)", split.c_str(),
                      detail.perplexity(), detail.tokens);
        std::cout << line << std::endl;
    }
}

void cmd_sample(const SampleOpts& o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Vocabulary& vocab = ckpt.vocab;

    std::vector<TokenId> prefix_ids;
    for (const std::string& tok : split_tokens(o.prefix)) {
        const auto id = vocab.find(tok);
        if (!id) std::cerr << "warning: prefix token '" << tok << "' not in vocabulary; using "
                           << Vocabulary::kUnk << "\n";
        prefix_ids.push_back(id.value_or(vocab.unk_id()));
    }

    std::vector<TokenId> forbidden;
    for (const std::string& tok : o.forbid) {
        const auto id = vocab.find(tok);
        if (id)
            forbidden.push_back(*id);
        else
            std::cerr << "warning: forbidden token '" << tok << "' not in vocabulary; ignored\n";
    }

    std::vector<TokenId> out_ids = prefix_ids;
    if (o.max_len > 0) {
        SamplerConfig scfg;
        scfg.prefix = prefix_ids;
        scfg.max_len = o.max_len;
        scfg.temperature = o.temperature;
        scfg.forbidden = forbidden;
        scfg.seed = o.seed;
        scfg.eos_id = vocab.eos_id();
        const std::vector<TokenId> continuation = sample(ckpt.params, scfg);
        out_ids.insert(out_ids.end(), continuation.begin(), continuation.end());
    }
    std::cout << detokenize(out_ids, vocab) << std::endl;
}

void cmd_translate(const TranslateOpts& o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    if (!ckpt.config.translation_mode)
        throw UsageError("checkpoint was not trained in translation mode");
    const Vocabulary& vocab = ckpt.vocab;

    std::ostringstream out;
    for (const std::string& line : read_lines(o.source)) {
        std::vector<TokenId> prefix;
        for (const std::string& tok : split_tokens(line)) prefix.push_back(vocab.lookup(tok));
        prefix.push_back(vocab.sep_id());

        BeamOptions opts;
        opts.max_len = o.max_len;
        opts.eos_id = vocab.eos_id();
        BeamHypothesis hyp = beam_search(ckpt.params, prefix, o.beam_width, opts);
        if (hyp.completed) hyp.tokens.pop_back();  // drop the terminating <eos>
        out << detokenize(hyp.tokens, vocab) << "\n";
    }
    if (o.out_dir.empty()) {
        std::cout << out.str();
    } else {
        fs::create_directories(o.out_dir);
        write_text_file(o.out_dir / "translated.txt", out.str());
        std::cout << "wrote " << (o.out_dir / "translated.txt").string() << std::endl;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"LSTM sequence-modeling laboratory: dropout on the non-recurrent "
                 "connections only"};
    app.require_subcommand(1);

    PrepareOpts prep;
    auto* p = app.add_subcommand("prepare",
                                 "Build the vocabulary and report token counts per split");
    p->add_option("--data-dir", prep.data_dir, "Directory with train/valid/test text")
        ->required();
    p->add_option("--out-dir", prep.out_dir, "Where to write vocab.txt")->required();
    p->add_option("--vocab-size", prep.vocab_size, "Vocabulary cap (default 10000)");
    p->callback([&] { cmd_prepare(prep); });

    TrainOpts tr;
    auto* t = app.add_subcommand("train", "Train a model and write checkpoints + metrics");
    t->add_option("--data-dir", tr.data_dir, "Directory with train/valid text");
    t->add_option("--toy-corpus", tr.toy_corpus,
                  "Generate a deterministic toy corpus of this many tokens (e.g. 1k)");
    t->add_option("--preset", tr.preset_name, "Named configuration: medium, large, "
                                              "baseline-small");
    t->add_option("--config", tr.config_file, "JSON file with a full training config");
    t->add_option("--out-dir", tr.out_dir, "Run directory for checkpoints and metrics")
        ->required();
    t->add_option("--checkpoint", tr.checkpoint, "Resume training from this checkpoint");
    auto* o_epochs = t->add_option("--epochs", tr.epochs, "Override: number of epochs");
    auto* o_drop = t->add_option("--dropout", tr.dropout, "Override: dropout probability");
    auto* o_unroll = t->add_option("--unroll", tr.unroll, "Override: BPTT window length");
    auto* o_batch = t->add_option("--batch-size", tr.batch_size, "Override: parallel streams");
    auto* o_lr = t->add_option("--lr", tr.lr, "Override: initial learning rate");
    auto* o_clip = t->add_option("--clip", tr.clip, "Override: gradient-norm clip threshold");
    auto* o_seed = t->add_option("--seed", tr.seed, "Override: RNG seed");
    auto* o_vocab = t->add_option("--vocab-size", tr.vocab_size, "Override: vocabulary cap");
    t->callback([&] {
        tr.epochs_set = o_epochs->count() > 0;
        tr.dropout_set = o_drop->count() > 0;
        tr.unroll_set = o_unroll->count() > 0;
        tr.batch_set = o_batch->count() > 0;
        tr.lr_set = o_lr->count() > 0;
        tr.clip_set = o_clip->count() > 0;
        tr.seed_set = o_seed->count() > 0;
        tr.vocab_set = o_vocab->count() > 0;
        cmd_train(tr);
    });

    EvalOpts ev;
    auto* e = app.add_subcommand("eval", "Report perplexity; several --checkpoint flags "
                                         "form a probability-averaging ensemble");
    e->add_option("--checkpoint", ev.checkpoints, "Checkpoint(s) to evaluate")->required();
    e->add_option("--data-dir", ev.data_dir, "Directory with the evaluation splits")
        ->required();
    e->add_option("--split", ev.splits, "Splits to evaluate (default: valid test)");
    auto* e_batch = e->add_option("--batch-size", ev.batch_size,
                                  "Evaluation streams (default: training config)");
    auto* e_unroll = e->add_option("--unroll", ev.unroll,
                                   "Evaluation window (default: training config)");
    e->callback([&] {
        ev.batch_set = e_batch->count() > 0;
        ev.unroll_set = e_unroll->count() > 0;
        cmd_eval(ev);
    });

    SampleOpts sa;
    auto* s = app.add_subcommand("sample", "Sample a continuation of --prefix");
    s->add_option("--checkpoint", sa.checkpoint, "Model checkpoint")->required();
    s->add_option("--prefix", sa.prefix, "Conditioning text (whitespace-tokenized)");
    s->add_option("--max-len", sa.max_len, "Maximum generated tokens (default 100)");
    s->add_option("--temperature", sa.temperature, "Softmax temperature; 0 = greedy");
    s->add_option("--forbid", sa.forbid,
                  "Tokens never emitted (default: <unk> N $); pass explicit flags to replace");
    s->add_option("--seed", sa.seed, "Sampling seed");
    s->callback([&] { cmd_sample(sa); });

    TranslateOpts tl;
    auto* x = app.add_subcommand("translate",
                                 "Beam-decode each source line of a translation-mode model");
    x->add_option("--checkpoint", tl.checkpoint, "Translation-mode checkpoint")->required();
    x->add_option("source", tl.source, "Source text file, one sentence per line")
        ->required()
        ->check(CLI::ExistingFile);
    x->add_option("--beam-width", tl.beam_width, "Beam width (default 12)");
    x->add_option("--max-len", tl.max_len, "Maximum decoded tokens per line (default 100)");
    x->add_option("--out-dir", tl.out_dir, "Write translated.txt here instead of stdout");
    x->callback([&] { cmd_translate(tl); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace seqlab
