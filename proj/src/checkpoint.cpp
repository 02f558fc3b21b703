#include "seqlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace seqlab {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'S', 'Q', 'L', 'B'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr const char* kGateOrder = "ifog";

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& buf, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

json config_json(const TrainConfig& cfg) {
    json j;
    j["n"] = cfg.n;
    j["layers"] = cfg.layers;
    j["unroll"] = cfg.unroll;
    j["batch"] = cfg.batch;
    j["init_range"] = cfg.init_range;
    j["dropout_p"] = cfg.dropout_p;
    j["lr0"] = cfg.lr0;
    j["decay_start_epoch"] = cfg.decay_start_epoch;
    j["decay_factor"] = cfg.decay_factor;
    j["epochs"] = cfg.epochs;
    j["clip_threshold"] = cfg.clip_threshold;
    j["seed"] = cfg.seed;
    j["vocab_cap"] = cfg.vocab_cap;
    j["translation_mode"] = cfg.translation_mode;
    return j;
}

TrainConfig config_from(const json& j) {
    TrainConfig cfg;
    try {
        cfg.n = j.at("n").get<std::size_t>();
        cfg.layers = j.at("layers").get<std::size_t>();
        cfg.unroll = j.at("unroll").get<std::size_t>();
        cfg.batch = j.at("batch").get<std::size_t>();
        cfg.init_range = j.at("init_range").get<double>();
        cfg.dropout_p = j.at("dropout_p").get<double>();
        cfg.lr0 = j.at("lr0").get<double>();
        cfg.decay_start_epoch = j.at("decay_start_epoch").get<int>();
        cfg.decay_factor = j.at("decay_factor").get<double>();
        cfg.epochs = j.at("epochs").get<int>();
        cfg.clip_threshold = j.at("clip_threshold").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.vocab_cap = j.at("vocab_cap").get<std::size_t>();
        cfg.translation_mode = j.at("translation_mode").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed training config: ") + e.what());
    }
    return cfg;
}

struct TensorEntry {
    std::string name;
    TensorPtr tensor;
};

std::vector<TensorEntry> named_tensors(const ModelParams& params) {
    std::vector<TensorEntry> out;
    out.push_back({"embedding", params.embedding});
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        out.push_back({"layer" + std::to_string(l) + ".W", params.layers[l].W});
        out.push_back({"layer" + std::to_string(l) + ".b", params.layers[l].b});
    }
    out.push_back({"output_W", params.output_W});
    out.push_back({"output_b", params.output_b});
    return out;
}

}  // namespace

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_to_json(const TrainConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

TrainConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from(j);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    ckpt.config.validate();
    if (ckpt.params.vocab() != ckpt.vocab.size())
        throw UsageError("checkpoint vocabulary size does not match the embedding table");
    if (ckpt.completed_epochs < 0) throw UsageError("completed_epochs must be >= 0");

    const auto entries = named_tensors(ckpt.params);
    json header;
    header["format_version"] = kFormatVersion;
    header["gate_order"] = kGateOrder;
    header["config"] = config_json(ckpt.config);
    header["vocab"] = ckpt.vocab.tokens();
    header["progress"] = {{"completed_epochs", ckpt.completed_epochs}};
    json inventory = json::array();
    for (const auto& e : entries)
        inventory.push_back({{"name", e.name}, {"shape", e.tensor->shape}});
    header["tensors"] = std::move(inventory);
    header["dtype"] = "f64le";
    const std::string header_text = header.dump();

    std::string buf;
    buf.reserve(16 + header_text.size() + ckpt.params.parameter_count() * sizeof(double) + 8);
    buf.append(kMagic, sizeof(kMagic));
    append_u32(buf, kFormatVersion);
    append_u64(buf, header_text.size());
    buf += header_text;
    for (const auto& e : entries) {
        const auto& data = e.tensor->data;
        const std::size_t offset = buf.size();
        buf.resize(offset + data.size() * sizeof(double));
        std::memcpy(buf.data() + offset, data.data(), data.size() * sizeof(double));
    }
    append_u64(buf, fnv1a64(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading checkpoint: " + path.string());

    if (buf.size() < 4 + 4 + 8 + 8) throw IoError("checkpoint truncated: " + path.string());
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    const std::uint32_t version = read_u32(buf, 4);
    if (version != kFormatVersion)
        throw IoError("unsupported checkpoint format version " + std::to_string(version) + ": " +
                      path.string());

    const std::uint64_t stored_sum = read_u64(buf, buf.size() - 8);
    const std::uint64_t actual_sum =
        fnv1a64(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 8);
    if (stored_sum != actual_sum)
        throw IoError("checkpoint corrupted (checksum mismatch): " + path.string());

    const std::uint64_t header_len = read_u64(buf, 8);
    const std::size_t header_at = 16;
    if (header_at + header_len + 8 > buf.size())
        throw IoError("checkpoint truncated: " + path.string());

    json header;
    try {
        header = json::parse(buf.begin() + header_at, buf.begin() + header_at + header_len);
    } catch (const json::exception& e) {
        throw IoError("checkpoint header is not valid JSON: " + std::string(e.what()));
    }

    Checkpoint ckpt;
    std::vector<std::string> vocab_tokens;
    std::vector<std::pair<std::string, Shape>> declared;
    try {
        if (header.at("gate_order").get<std::string>() != kGateOrder)
            throw IoError("checkpoint uses an unknown gate order");
        if (header.at("dtype").get<std::string>() != "f64le")
            throw IoError("checkpoint uses an unknown tensor dtype");
        ckpt.config = config_from(header.at("config"));
        vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
        ckpt.completed_epochs = header.at("progress").at("completed_epochs").get<int>();
        for (const auto& t : header.at("tensors"))
            declared.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<Shape>());
    } catch (const json::exception& e) {
        throw IoError("checkpoint header is malformed: " + std::string(e.what()));
    }
    ckpt.config.validate();
    ckpt.vocab = Vocabulary::from_tokens(vocab_tokens);

    ckpt.params = ModelParams::create(ckpt.vocab.size(), ckpt.config.n, ckpt.config.layers);
    const auto entries = named_tensors(ckpt.params);
    if (entries.size() != declared.size())
        throw IoError("checkpoint tensor inventory does not match the declared architecture");

    std::size_t at = header_at + header_len;
    const std::size_t payload_end = buf.size() - 8;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (declared[i].first != entries[i].name || declared[i].second != entries[i].tensor->shape)
            throw IoError("checkpoint tensor " + declared[i].first +
                          " does not match the declared architecture");
        auto& data = entries[i].tensor->data;
        const std::size_t bytes = data.size() * sizeof(double);
        if (at + bytes > payload_end) throw IoError("checkpoint payload truncated");
        std::memcpy(data.data(), buf.data() + at, bytes);
        at += bytes;
    }
    if (at != payload_end) throw IoError("checkpoint has trailing payload bytes");
    return ckpt;
}

}  // namespace seqlab
