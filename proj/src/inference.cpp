#include "seqlab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include "seqlab/rng.hpp"
#include "seqlab/tape.hpp"

namespace seqlab {

double EvalDetail::perplexity() const {
    if (tokens == 0) throw UsageError("evaluation produced no predicted tokens");
    return std::exp(total_nll / static_cast<double>(tokens));
}

EvalDetail evaluate(const ModelParams& params, const std::vector<TokenId>& ids, std::size_t batch,
                    std::size_t steps) {
    if (ids.empty()) throw UsageError("empty evaluation corpus");
    if (steps == 0) throw UsageError("evaluation needs steps >= 1");
    BatchedCorpus corpus(ids, batch);
    const auto windows = corpus.windows(steps, /*include_tail=*/true);

    EvalDetail out;
    out.nlls.assign((corpus.rows() - 1) * batch, 0.0);
    LstmState state = LstmState::zeros(params.depth(), batch, params.width());
    std::size_t row = 1;  // first predicted grid row
    for (const auto& win : windows) {
        Tape tape(/*recording=*/false);
        SequenceResult res = forward_sequence(tape, win.inputs, win.targets, win.steps, win.batch,
                                              state, params, /*drop=*/nullptr);
        for (std::size_t t = 0; t < win.steps; ++t)
            for (std::size_t b = 0; b < batch; ++b)
                out.nlls[(row + t - 1) * batch + b] = res.losses[t]->data[b];
        out.total_nll += res.total_nll();
        out.tokens += res.tokens;
        row += win.steps;
        state = res.final_state;
    }
    return out;
}

double perplexity(const ModelParams& params, const std::vector<TokenId>& ids, std::size_t batch,
                  std::size_t steps) {
    return evaluate(params, ids, batch, steps).perplexity();
}

EvalDetail ensemble_evaluate(const std::vector<const ModelParams*>& models,
                             const std::vector<TokenId>& ids, std::size_t batch,
                             std::size_t steps) {
    if (models.empty()) throw UsageError("ensemble needs at least one member");
    if (ids.empty()) throw UsageError("empty evaluation corpus");
    if (steps == 0) throw UsageError("evaluation needs steps >= 1");
    const std::size_t vocab = models[0]->vocab();
    for (const ModelParams* m : models)
        if (m->vocab() != vocab) throw ConfigError("ensemble members disagree on vocabulary size");

    BatchedCorpus corpus(ids, batch);
    const auto windows = corpus.windows(steps, /*include_tail=*/true);

    EvalDetail out;
    out.nlls.assign((corpus.rows() - 1) * batch, 0.0);
    std::vector<LstmState> states;
    states.reserve(models.size());
    for (const ModelParams* m : models)
        states.push_back(LstmState::zeros(m->depth(), batch, m->width()));

    const double inv_members = 1.0 / static_cast<double>(models.size());
    std::vector<double> mean_probs(batch * vocab);
    std::size_t row = 1;
    for (const auto& win : windows) {
        Tape tape(/*recording=*/false);
        for (std::size_t t = 0; t < win.steps; ++t) {
            const std::vector<TokenId> step_ids(win.inputs.begin() + t * batch,
                                                win.inputs.begin() + (t + 1) * batch);
            std::fill(mean_probs.begin(), mean_probs.end(), 0.0);
            for (std::size_t i = 0; i < models.size(); ++i) {
                const ModelParams& m = *models[i];
                TensorPtr x = tape.embedding_rows(m.embedding, step_ids);
                StepResult sr = regularized_step(tape, x, states[i], m, /*drop=*/nullptr);
                states[i] = sr.state;
                for (std::size_t b = 0; b < batch; ++b) {
                    const auto probs = softmax(sr.logits->data.data() + b * vocab, vocab);
                    for (std::size_t v = 0; v < vocab; ++v)
                        mean_probs[b * vocab + v] += inv_members * probs[v];
                }
            }
            for (std::size_t b = 0; b < batch; ++b) {
                const TokenId target = win.targets[t * batch + b];
                const double nll = -std::log(mean_probs[b * vocab + target]);
                out.nlls[(row + t - 1) * batch + b] = nll;
                out.total_nll += nll;
            }
            out.tokens += batch;
        }
        row += win.steps;
    }
    return out;
}

double ensemble_perplexity(const std::vector<const ModelParams*>& models,
                           const std::vector<TokenId>& ids, std::size_t batch,
                           std::size_t steps) {
    return ensemble_evaluate(models, ids, batch, steps).perplexity();
}

void SamplerConfig::validate() const {
    if (temperature < 0.0) throw ConfigError("sampling temperature must be >= 0");
    if (max_len == 0) throw ConfigError("sampling max_len must be >= 1");
    for (const TokenId f : forbidden)
        if (f == eos_id) throw ConfigError("forbidden set must not contain the <eos> token");
}

std::vector<double> renormalize_filtered(std::vector<double> probs,
                                         const std::vector<bool>& forbidden) {
    if (forbidden.size() != probs.size())
        throw ShapeError("forbidden mask size does not match distribution size");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (forbidden[i]) probs[i] = 0.0;
        total += probs[i];
    }
    if (!(total > 0.0)) throw NumericError("all probability mass forbidden");
    for (double& p : probs) p /= total;
    return probs;
}

namespace {

void check_token_range(const std::vector<TokenId>& ids, std::size_t vocab, const char* what) {
    for (const TokenId t : ids)
        if (t < 0 || static_cast<std::size_t>(t) >= vocab)
            throw IndexError(std::string(what) + " token id out of vocabulary range");
}

// Runs the context through the model; returns the logits conditioning the
// first generated token.
TensorPtr feed_context(Tape& tape, const ModelParams& params, const std::vector<TokenId>& context,
                       LstmState& state) {
    TensorPtr logits;
    for (const TokenId t : context) {
        TensorPtr x = tape.embedding_rows(params.embedding, {t});
        StepResult sr = regularized_step(tape, x, state, params, /*drop=*/nullptr);
        state = sr.state;
        logits = sr.logits;
    }
    return logits;
}

}  // namespace

std::vector<TokenId> sample(const ModelParams& params, const SamplerConfig& cfg) {
    cfg.validate();
    const std::size_t vocab = params.vocab();
    check_token_range(cfg.prefix, vocab, "prefix");
    check_token_range(cfg.forbidden, vocab, "forbidden");
    if (cfg.eos_id < 0 || static_cast<std::size_t>(cfg.eos_id) >= vocab)
        throw IndexError("eos token id out of vocabulary range");

    std::vector<bool> forbidden(vocab, false);
    for (const TokenId f : cfg.forbidden) forbidden[f] = true;

    Tape tape(/*recording=*/false);
    LstmState state = LstmState::zeros(params.depth(), 1, params.width());
    std::vector<TokenId> context = cfg.prefix;
    if (context.empty()) context.push_back(cfg.eos_id);
    TensorPtr logits = feed_context(tape, params, context, state);

    UniformRng rng(cfg.seed);
    std::vector<TokenId> out;
    while (out.size() < cfg.max_len) {
        TokenId next = -1;
        if (cfg.temperature == 0.0) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t v = 0; v < vocab; ++v) {
                if (forbidden[v]) continue;
                if (logits->data[v] > best) {
                    best = logits->data[v];
                    next = static_cast<TokenId>(v);
                }
            }
        } else {
            std::vector<double> scaled(vocab);
            for (std::size_t v = 0; v < vocab; ++v) scaled[v] = logits->data[v] / cfg.temperature;
            const auto probs = renormalize_filtered(softmax(scaled.data(), vocab), forbidden);
            const double u = rng.unit();
            double acc = 0.0;
            TokenId last_alive = -1;
            for (std::size_t v = 0; v < vocab; ++v) {
                if (probs[v] > 0.0) last_alive = static_cast<TokenId>(v);
                acc += probs[v];
                if (u < acc) {
                    next = static_cast<TokenId>(v);
                    break;
                }
            }
            if (next < 0) next = last_alive;  // u fell into the terminal rounding gap
        }
        if (next == cfg.eos_id) break;
        out.push_back(next);
        TensorPtr x = tape.embedding_rows(params.embedding, {next});
        StepResult sr = regularized_step(tape, x, state, params, /*drop=*/nullptr);
        state = sr.state;
        logits = sr.logits;
    }
    return out;
}

namespace {

struct LiveHyp {
    std::vector<TokenId> tokens;
    double log_prob = 0.0;
    LstmState state;
    TensorPtr logits;
};

struct Candidate {
    std::size_t src = 0;
    TokenId token = 0;
    double score = 0.0;
};

bool seq_less(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

BeamHypothesis beam_search(const ModelParams& params, const std::vector<TokenId>& prefix,
                           std::size_t beam_width, const BeamOptions& opts) {
    if (beam_width == 0) throw ConfigError("beam width must be >= 1");
    if (opts.max_len == 0) throw ConfigError("beam max_len must be >= 1");
    const std::size_t vocab = params.vocab();
    check_token_range(prefix, vocab, "prefix");
    if (opts.eos_id < 0 || static_cast<std::size_t>(opts.eos_id) >= vocab)
        throw IndexError("eos token id out of vocabulary range");

    Tape tape(/*recording=*/false);
    LiveHyp seed;
    seed.state = LstmState::zeros(params.depth(), 1, params.width());
    std::vector<TokenId> context = prefix;
    if (context.empty()) context.push_back(opts.eos_id);
    seed.logits = feed_context(tape, params, context, seed.state);

    std::vector<LiveHyp> live;
    live.push_back(std::move(seed));
    std::vector<BeamHypothesis> done;
    BeamHypothesis best_incomplete;
    bool have_incomplete = false;

    // Compares candidate sequences without materializing them: live
    // hypotheses' stored tokens plus the one appended candidate token.
    const auto cand_seq_less = [&live](const Candidate& a, const Candidate& b) {
        const auto& ta = live[a.src].tokens;
        const auto& tb = live[b.src].tokens;
        const std::size_t la = ta.size() + 1;
        const std::size_t lb = tb.size() + 1;
        const std::size_t common = std::min(la, lb);
        for (std::size_t i = 0; i < common; ++i) {
            const TokenId xa = i < ta.size() ? ta[i] : a.token;
            const TokenId xb = i < tb.size() ? tb[i] : b.token;
            if (xa != xb) return xa < xb;
        }
        return la < lb;
    };

    std::vector<Candidate> cands;
    for (std::size_t step = 0; step < opts.max_len && !live.empty(); ++step) {
        cands.clear();
        for (std::size_t i = 0; i < live.size(); ++i) {
            const auto logp = log_softmax(live[i].logits->data.data(), vocab);
            for (std::size_t v = 0; v < vocab; ++v)
                cands.push_back({i, static_cast<TokenId>(v), live[i].log_prob + logp[v]});
        }
        const std::size_t keep = std::min(beam_width, cands.size());
        std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                          [&](const Candidate& a, const Candidate& b) {
                              if (a.score != b.score) return a.score > b.score;
                              return cand_seq_less(a, b);
                          });

        std::vector<LiveHyp> next_live;
        for (std::size_t k = 0; k < keep; ++k) {
            const Candidate& c = cands[k];
            std::vector<TokenId> seq = live[c.src].tokens;
            seq.push_back(c.token);
            if (c.token == opts.eos_id) {
                done.push_back({std::move(seq), c.score, true});
            } else if (seq.size() >= opts.max_len) {
                BeamHypothesis h{std::move(seq), c.score, false};
                if (!have_incomplete || h.log_prob > best_incomplete.log_prob ||
                    (h.log_prob == best_incomplete.log_prob &&
                     seq_less(h.tokens, best_incomplete.tokens))) {
                    best_incomplete = std::move(h);
                    have_incomplete = true;
                }
            } else {
                TensorPtr x = tape.embedding_rows(params.embedding, {c.token});
                StepResult sr = regularized_step(tape, x, live[c.src].state, params,
                                                 /*drop=*/nullptr);
                next_live.push_back(
                    {std::move(seq), c.score, std::move(sr.state), std::move(sr.logits)});
            }
        }
        live = std::move(next_live);
    }

    if (!done.empty()) {
        const auto rank = [&opts](const BeamHypothesis& h) {
            return opts.length_normalize && !h.tokens.empty()
                       ? h.log_prob / static_cast<double>(h.tokens.size())
                       : h.log_prob;
        };
        const BeamHypothesis* best = &done[0];
        for (const BeamHypothesis& h : done) {
            if (rank(h) > rank(*best) ||
                (rank(h) == rank(*best) && seq_less(h.tokens, best->tokens)))
                best = &h;
        }
        return *best;
    }
    if (have_incomplete) return best_incomplete;
    throw UsageError("beam search produced no hypotheses");  // unreachable for valid inputs
}

}  // namespace seqlab
