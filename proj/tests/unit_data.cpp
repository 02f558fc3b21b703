#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "seqlab/data.hpp"

using namespace seqlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path p = fs::temp_directory_path() / ("seqlab_data_" + name);
    std::ofstream out(p, std::ios::trunc);
    out << content;
    return p;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("tokenization splits on any whitespace") {
    CHECK(split_tokens("a b  c\td") == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(split_tokens("   ") == std::vector<std::string>{});
    CHECK(split_tokens("") == std::vector<std::string>{});
}

TEST_CASE("corpus_from_text worked example") {
    // two lines: "a b" and "a"; each line gains an <eos>
    const Corpus c = corpus_from_text("a b\na\n");
    CHECK(c.vocab.size() == 4);  // <eos> <unk> a b
    CHECK(c.vocab.token(0) == "<eos>");
    CHECK(c.vocab.token(1) == "<unk>");
    CHECK(c.vocab.token(2) == "a");  // frequency 2 outranks b
    CHECK(c.vocab.token(3) == "b");
    CHECK(c.ids == std::vector<TokenId>{2, 3, 0, 2, 0});
}

TEST_CASE("unknown tokens map to <unk> under a fixed vocabulary") {
    const Corpus base = corpus_from_text("a b\n");
    const Corpus other = corpus_from_text("a z\n", &base.vocab);
    CHECK(other.ids == std::vector<TokenId>{base.vocab.lookup("a"), base.vocab.unk_id(), 0});
    CHECK(base.vocab.find("z") == std::nullopt);
    CHECK(base.vocab.lookup("z") == base.vocab.unk_id());
}

TEST_CASE("vocabulary ranks by frequency with lexicographic tie-break") {
    const Corpus c = corpus_from_text("b a\nc c\n");
    // counts: c=2, a=1, b=1 -> c first, then a before b
    CHECK(c.vocab.token(2) == "c");
    CHECK(c.vocab.token(3) == "a");
    CHECK(c.vocab.token(4) == "b");
}

TEST_CASE("vocabulary cap sends the tail to <unk>") {
    const Corpus c = corpus_from_text("a a a b b z\n", nullptr, /*vocab_cap=*/4);
    CHECK(c.vocab.size() == 4);  // <eos> <unk> a b
    CHECK(c.vocab.find("z") == std::nullopt);
    CHECK(c.ids == std::vector<TokenId>{2, 2, 2, 3, 3, 1, 0});
}

TEST_CASE("reserved spellings in running text do not duplicate entries") {
    const Corpus c = corpus_from_text("a <unk> <eos> a\n");
    CHECK(c.vocab.size() == 3);  // <eos> <unk> a
    CHECK(c.ids == std::vector<TokenId>{2, 1, 0, 2, 0});
}

TEST_CASE("vocabulary save/load round trip") {
    const Corpus c = corpus_from_text("the quick brown fox\nthe lazy dog\n");
    const fs::path p = fs::temp_directory_path() / "seqlab_vocab_roundtrip.txt";
    c.vocab.save(p);
    const Vocabulary loaded = Vocabulary::load(p);
    CHECK(loaded == c.vocab);

    // reruns produce byte-identical files
    const fs::path p2 = fs::temp_directory_path() / "seqlab_vocab_roundtrip2.txt";
    c.vocab.save(p2);
    std::ifstream a(p, std::ios::binary), b(p2, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("from_tokens validates the reserved prefix") {
    CHECK_NOTHROW(Vocabulary::from_tokens({"<eos>", "<unk>", "a"}));
    CHECK_NOTHROW(Vocabulary::from_tokens({"<eos>", "<unk>", "<sep>", "a"}));
    CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), ConfigError);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<unk>", "<eos>"}), ConfigError);
}

TEST_CASE("sep is reserved only in translation mode") {
    const Corpus plain = corpus_from_text("a\n");
    CHECK_FALSE(plain.vocab.has_sep());
    CHECK_THROWS_AS(plain.vocab.sep_id(), UsageError);

    const Corpus tx = corpus_from_text("a\n", nullptr, 10000, /*with_sep=*/true);
    CHECK(tx.vocab.has_sep());
    CHECK(tx.vocab.sep_id() == 2);
    CHECK(tx.vocab.token(2) == "<sep>");
}

TEST_CASE("batching worked example: 26 tokens in 2 streams") {
    std::vector<TokenId> ids(26);
    for (std::size_t i = 0; i < 26; ++i) ids[i] = static_cast<TokenId>(i);
    const BatchedCorpus corpus(ids, 2);
    CHECK(corpus.rows() == 13);
    CHECK(corpus.batch() == 2);
    // column b holds tokens b*13 .. b*13+12: streams are contiguous text
    for (std::size_t r = 0; r < 13; ++r) {
        CHECK(corpus.at(r, 0) == static_cast<TokenId>(r));
        CHECK(corpus.at(r, 1) == static_cast<TokenId>(13 + r));
    }
    CHECK(corpus.window_count(3) == 4);  // 12 predicted rows / 3

    const auto win0 = corpus.window(0, 3);
    CHECK(win0.steps == 3);
    CHECK(win0.inputs == std::vector<TokenId>{0, 13, 1, 14, 2, 15});
    CHECK(win0.targets == std::vector<TokenId>{1, 14, 2, 15, 3, 16});
}

TEST_CASE("windows tile the stream without gaps or overlap") {
    std::vector<TokenId> ids(28);
    for (std::size_t i = 0; i < 28; ++i) ids[i] = static_cast<TokenId>(i);
    const BatchedCorpus corpus(ids, 2);  // 14 rows, 13 predicted
    const auto wins = corpus.windows(3, /*include_tail=*/true);
    CHECK(wins.size() == 5);
    CHECK(wins.back().steps == 1);  // 13 = 4*3 + 1

    // continuity: each window's first input row equals the previous window's
    // last target row
    for (std::size_t k = 1; k < wins.size(); ++k) {
        const auto& prev = wins[k - 1];
        const std::vector<TokenId> last_targets(prev.targets.end() - 2, prev.targets.end());
        const std::vector<TokenId> first_inputs(wins[k].inputs.begin(),
                                                wins[k].inputs.begin() + 2);
        CHECK(last_targets == first_inputs);
    }

    // every target is the next token of its own stream
    for (const auto& w : wins)
        for (std::size_t t = 0; t < w.steps; ++t)
            for (std::size_t b = 0; b < 2; ++b)
                CHECK(w.targets[t * 2 + b] == w.inputs[t * 2 + b] + 1);

    // without the tail the short remainder is dropped
    CHECK(corpus.windows(3, /*include_tail=*/false).size() == 4);
}

TEST_CASE("single-stream batching degenerates to the plain sequence") {
    std::vector<TokenId> ids{5, 6, 7, 8, 9};
    const BatchedCorpus corpus(ids, 1);
    CHECK(corpus.rows() == 5);
    const auto win = corpus.window(0, 4);
    CHECK(win.inputs == std::vector<TokenId>{5, 6, 7, 8});
    CHECK(win.targets == std::vector<TokenId>{6, 7, 8, 9});
}

TEST_CASE("batching rejects unusable inputs") {
    std::vector<TokenId> ids(10, 1);
    CHECK_THROWS_AS(BatchedCorpus(ids, 0), UsageError);
    CHECK_THROWS_AS(BatchedCorpus(ids, 6), UsageError);  // needs >= 2 rows
    const BatchedCorpus ok(ids, 5);
    CHECK_THROWS_AS(ok.window(99, 1), IndexError);
}

TEST_CASE("translation pairs concatenate as source <sep> target <eos>") {
    const Corpus c = corpus_from_text("a b c d\n", nullptr, 10000, /*with_sep=*/true);
    const auto ids = concat_pairs({"a b", "c"}, {"c", "d a"}, c.vocab);
    const TokenId a = c.vocab.lookup("a"), b = c.vocab.lookup("b"), cc = c.vocab.lookup("c"),
                  d = c.vocab.lookup("d");
    const TokenId sep = c.vocab.sep_id(), eos = c.vocab.eos_id();
    CHECK(ids == std::vector<TokenId>{a, b, sep, cc, eos, cc, sep, d, a, eos});

    CHECK_THROWS_AS(concat_pairs({"a"}, {"b", "c"}, c.vocab), UsageError);
    const Corpus nosep = corpus_from_text("a\n");
    CHECK_THROWS_AS(concat_pairs({"a"}, {"a"}, nosep.vocab), UsageError);
}

TEST_CASE("detokenize inverts lookup") {
    const Corpus c = corpus_from_text("to be or not\n");
    CHECK(detokenize(c.ids, c.vocab) == "to be or not <eos>");
    CHECK(detokenize({}, c.vocab) == "");
}

TEST_CASE("file loading errors carry the path") {
    const fs::path missing = fs::temp_directory_path() / "seqlab_no_such_file.txt";
    try {
        (void)load_corpus(missing);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
    }

    const fs::path empty = temp_file("empty.txt", "");
    CHECK_THROWS_AS((void)load_corpus(empty), UsageError);

    const fs::path ok = temp_file("ok.txt", "a b\n");
    const Corpus c = load_corpus(ok);
    CHECK(c.ids.size() == 3);
}

TEST_CASE("full PTB statistics" * doctest::description("runs only when the dataset is bundled")) {
    const fs::path dir = fs::path(SEQLAB_SOURCE_DIR) / "data" / "ptb";
    fs::path train;
    for (const char* name : {"train.txt", "ptb.train.txt"}) {
        if (fs::exists(dir / name)) train = dir / name;
    }
    if (train.empty()) return;  // dataset not bundled; desk-scale tests cover the pipeline
    const Corpus c = load_corpus(train, nullptr, 10000);
    CHECK(c.ids.size() == 929589);  // 887,521 words + 42,068 <eos>
    CHECK(c.vocab.size() == 10000);
}

}  // TEST_SUITE
