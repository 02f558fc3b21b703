#include "seqlab/textgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

#include "seqlab/rng.hpp"
#include "seqlab/tensor.hpp"

namespace seqlab {

std::string cyclic_toy_text(std::size_t n_tokens) {
    static const char* kSentence = "a bright fox ran over nine dusty hills before sunrise today";
    const std::size_t per_line = 12;  // 11 words + <eos>
    std::string out;
    std::size_t produced = 0;
    while (produced < n_tokens) {
        out += kSentence;
        out += '\n';
        produced += per_line;
    }
    return out;
}

namespace {

std::string word_name(std::size_t i) {
    return "w" + std::to_string(i);
}

}  // namespace

std::string markov_text(std::size_t n_tokens, const MarkovTextConfig& cfg,
                        std::uint64_t sample_offset) {
    const std::size_t v = cfg.vocab;
    const std::size_t k = cfg.branch;

    // Zipf base weights over word ranks.
    std::vector<double> zipf(v);
    double zsum = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), 1.05);
        zsum += zipf[i];
    }
    std::vector<double> zipf_cdf(v);
    double acc = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        acc += zipf[i] / zsum;
        zipf_cdf[i] = acc;
    }

    auto zipf_draw = [&](double u) {
        auto it = std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
        return static_cast<std::size_t>(it - zipf_cdf.begin()) < v
                   ? static_cast<std::size_t>(it - zipf_cdf.begin())
                   : v - 1;
    };

    // Per-word successor support and weights, all derived from coordinates of
    // (seed, word, slot) so the chain itself is independent of sampling.
    auto successor = [&](std::size_t word, std::size_t slot) {
        return zipf_draw(counter_uniform(cfg.seed, word, slot));
    };
    auto successor_weight = [&](std::size_t word, std::size_t slot) {
        return 0.1 + counter_uniform(cfg.seed, word + (1ULL << 32), slot);
    };

    std::string out;
    std::size_t produced = 0;
    std::uint64_t draw = sample_offset;
    std::size_t current = zipf_draw(counter_uniform(cfg.seed ^ 0x5eedULL, draw++, 0));
    std::string line;
    while (produced < n_tokens) {
        if (!line.empty()) line += ' ';
        line += word_name(current);
        ++produced;

        const double u_eos = counter_uniform(cfg.seed ^ 0x5eedULL, draw++, 1);
        if (u_eos < cfg.eos_prob) {
            out += line;
            out += '\n';
            line.clear();
            ++produced;  // the <eos> the loader will append
            current = zipf_draw(counter_uniform(cfg.seed ^ 0x5eedULL, draw++, 2));
            continue;
        }

        double wsum = 0.0;
        for (std::size_t s = 0; s < k; ++s) wsum += successor_weight(current, s);
        double uw = counter_uniform(cfg.seed ^ 0x5eedULL, draw++, 3) * wsum;
        std::size_t chosen = k - 1;
        for (std::size_t s = 0; s < k; ++s) {
            uw -= successor_weight(current, s);
            if (uw <= 0.0) {
                chosen = s;
                break;
            }
        }
        current = successor(current, chosen);
    }
    if (!line.empty()) {
        out += line;
        out += '\n';
    }
    return out;
}

std::size_t parse_size(const std::string& s) {
    if (s.empty()) throw ConfigError("empty size string");
    std::size_t mult = 1;
    std::string digits = s;
    const char suffix = static_cast<char>(std::tolower(s.back()));
    if (suffix == 'k' || suffix == 'm') {
        mult = suffix == 'k' ? 1000 : 1000000;
        digits = s.substr(0, s.size() - 1);
    }
    try {
        return static_cast<std::size_t>(std::stoull(digits)) * mult;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse size: " + s);
    }
}

}  // namespace seqlab
