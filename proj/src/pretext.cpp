#include "dialsum/pretext.hpp"

#include "dialsum/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace dialsum {

std::string_view to_string(Task task) {
    switch (task) {
    case Task::switch_utterance: return "switch_utterance";
    case Task::switch_interlocutor: return "switch_interlocutor";
    case Task::insert_utterance: return "insert_utterance";
    case Task::mask_interlocutor: return "mask_interlocutor";
    }
    return "switch_utterance";
}

Task parse_task(std::string_view name) {
    if (name == "switch_utterance") return Task::switch_utterance;
    if (name == "switch_interlocutor") return Task::switch_interlocutor;
    if (name == "insert_utterance") return Task::insert_utterance;
    if (name == "mask_interlocutor") return Task::mask_interlocutor;
    throw Error(ErrorCode::InvalidConfig, "unknown task: " + std::string(name));
}

namespace {

void check_probability(double p, const char *name) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw Error(ErrorCode::InvalidConfig, std::string(name) + " must lie in [0, 1], got " + std::to_string(p));
    }
}

void mask_speakers(CorruptedDialogue &cd, const PretextConfig &cfg, RngStream &rng) {
    cd.speaker_masked.assign(cd.dialogue.turns.size(), false);
    if (!cfg.mask_names) return;
    for (std::size_t i = 0; i < cd.dialogue.turns.size(); ++i) {
        if (rng.bernoulli(cfg.p_n)) {
            cd.speaker_masked[i] = true;
            cd.provenance.masked_speakers.push_back(static_cast<int>(i));
        }
    }
}

bool want_summary(const Dialogue &d, const PretextConfig &cfg) {
    if (!cfg.include_summary) return false;
    if (!d.summary) throw Error(ErrorCode::NoSummary, "dialogue '" + d.id + "' has no reference summary");
    return true;
}

} // namespace

void PretextConfig::validate() const {
    check_probability(p_u, "p_u");
    check_probability(p_n, "p_n");
    check_probability(p_i, "p_i");
    if (insert_prob) check_probability(*insert_prob, "insert_prob");
    if (k_insert < 0) throw Error(ErrorCode::InvalidConfig, "k_insert must be non-negative");
    if (max_len < 8) throw Error(ErrorCode::InvalidConfig, "max_len must be at least 8");
}

std::size_t Dataset::total_skipped() const {
    std::size_t n = 0;
    for (const auto &[_, c] : skipped) n += c;
    return n;
}

CorruptedDialogue corrupt_switch_utterances(const Dialogue &d, const PretextConfig &cfg, RngStream &rng) {
    const auto n = d.turns.size();
    CorruptedDialogue cd;
    cd.task = Task::switch_utterance;
    cd.with_summary = want_summary(d, cfg);

    auto &prov = cd.provenance;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.bernoulli(cfg.p_u)) prov.selected.push_back(static_cast<int>(i));
    }
    std::vector<int> shuffled = prov.selected;
    rng.shuffle(shuffled);

    prov.permutation.resize(n);
    std::iota(prov.permutation.begin(), prov.permutation.end(), 0);
    for (std::size_t k = 0; k < shuffled.size(); ++k) prov.permutation[prov.selected[k]] = shuffled[k];

    cd.dialogue.id = d.id;
    cd.dialogue.summary = d.summary;
    for (std::size_t i = 0; i < n; ++i) {
        const auto &occupant = d.turns[prov.permutation[i]];
        cd.dialogue.turns.push_back(occupant);
        cd.turn_labels.push_back(occupant == d.turns[i] ? 0 : 1);
    }
    mask_speakers(cd, cfg, rng);
    return cd;
}

CorruptedDialogue corrupt_switch_interlocutors(const Dialogue &d, const PretextConfig &cfg, RngStream &rng) {
    const auto names = interlocutors(d);
    if (names.size() < 2) {
        throw Error(ErrorCode::SingleSpeaker, "dialogue '" + d.id + "' has fewer than two interlocutors");
    }
    CorruptedDialogue cd;
    cd.task = Task::switch_interlocutor;
    cd.with_summary = want_summary(d, cfg);
    cd.dialogue = d;
    cd.speaker_masked.assign(d.turns.size(), false);

    auto &prov = cd.provenance;
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
        const auto &speaker = d.turns[i].speaker;
        prov.original_speakers.push_back(speaker);
        if (!rng.bernoulli(cfg.p_i)) {
            cd.turn_labels.push_back(0);
            continue;
        }
        prov.selected.push_back(static_cast<int>(i));
        auto current = static_cast<std::size_t>(std::find(names.begin(), names.end(), speaker) - names.begin());
        auto pick = static_cast<std::size_t>(rng.uniform_int(names.size() - 1));
        if (pick >= current) ++pick;
        cd.dialogue.turns[i].speaker = names[pick];
        prov.replaced.push_back(static_cast<int>(i));
        cd.turn_labels.push_back(1);
    }
    return cd;
}

CorruptedDialogue corrupt_insert_utterances(const Dialogue &d, std::span<const Dialogue> pool, std::size_t exclude,
                                            const PretextConfig &cfg, RngStream &rng) {
    const std::size_t n_donors = pool.size() - (exclude < pool.size() ? 1 : 0);
    if (n_donors == 0) throw Error(ErrorCode::NoDonors, "no donor dialogues for '" + d.id + "'");

    const auto n = d.turns.size();
    const auto n_gaps = n + 1;
    std::vector<int> gaps;
    if (cfg.insert_prob) {
        for (std::size_t g = 0; g < n_gaps; ++g) {
            if (rng.bernoulli(*cfg.insert_prob)) gaps.push_back(static_cast<int>(g));
        }
    } else {
        const auto k = static_cast<std::size_t>(cfg.k_insert);
        if (k > n_gaps) {
            throw Error(ErrorCode::KTooLarge, "k_insert " + std::to_string(k) + " exceeds the " +
                                                  std::to_string(n_gaps) + " gaps of '" + d.id + "'");
        }
        std::vector<int> all(n_gaps);
        std::iota(all.begin(), all.end(), 0);
        // Partial Fisher-Yates: the first k entries are a uniform k-subset.
        for (std::size_t i = 0; i < k; ++i) {
            auto j = i + static_cast<std::size_t>(rng.uniform_int(n_gaps - i));
            std::swap(all[i], all[j]);
        }
        gaps.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(gaps.begin(), gaps.end());
    }

    const auto names = interlocutors(d);
    std::vector<Insertion> draws;
    std::vector<std::size_t> donor_index;
    for (int g : gaps) {
        auto di = static_cast<std::size_t>(rng.uniform_int(n_donors));
        if (exclude < pool.size() && di >= exclude) ++di;
        const Dialogue &donor = pool[di];
        auto ti = static_cast<std::size_t>(rng.uniform_int(donor.turns.size()));
        auto si = static_cast<std::size_t>(rng.uniform_int(names.size()));
        Insertion ins;
        ins.gap = g;
        ins.donor_id = donor.id;
        ins.donor_turn = static_cast<int>(ti);
        ins.donor_speaker = donor.turns[ti].speaker;
        ins.speaker = names[si];
        draws.push_back(std::move(ins));
        donor_index.push_back(di);
    }

    CorruptedDialogue cd;
    cd.task = Task::insert_utterance;
    cd.with_summary = want_summary(d, cfg);
    cd.dialogue.id = d.id;
    cd.dialogue.summary = d.summary;
    std::size_t next = 0;
    for (std::size_t g = 0; g <= n; ++g) {
        if (next < draws.size() && draws[next].gap == static_cast<int>(g)) {
            const Dialogue &donor = pool[donor_index[next]];
            auto &ins = draws[next++];
            ins.position = static_cast<int>(cd.dialogue.turns.size());
            cd.dialogue.turns.push_back({ins.speaker, donor.turns[ins.donor_turn].text});
            cd.turn_labels.push_back(1);
            cd.provenance.selected.push_back(ins.gap);
            cd.provenance.inserted.push_back(ins);
        }
        if (g < n) {
            cd.dialogue.turns.push_back(d.turns[g]);
            cd.turn_labels.push_back(0);
        }
    }
    mask_speakers(cd, cfg, rng);
    return cd;
}

CorruptedDialogue corrupt_mask_interlocutors(const Dialogue &d, const PretextConfig &) {
    if (!d.summary) throw Error(ErrorCode::NoSummary, "dialogue '" + d.id + "' has no reference summary");
    CorruptedDialogue cd;
    cd.task = Task::mask_interlocutor;
    cd.dialogue = d;
    cd.with_summary = true;
    cd.turn_labels.assign(d.turns.size(), 0);
    cd.speaker_masked.assign(d.turns.size(), false);
    return cd;
}

namespace {

TokenSeq speaker_tokens(const std::string &speaker, const Vocab &vocab) {
    if (auto id = vocab.find(speaker); id && vocab.is_special(*id)) {
        TokenSeq s;
        s.push_back(*id, speaker);
        return s;
    }
    return tokenize(speaker, vocab);
}

} // namespace

PretextExample assemble_sequence(const CorruptedDialogue &cd, const PretextConfig &cfg, const Vocab &vocab) {
    const auto &turns = cd.dialogue.turns;
    std::vector<TokenSeq> blocks;
    blocks.reserve(turns.size());
    for (std::size_t i = 0; i < turns.size(); ++i) {
        TokenSeq block;
        if (i < cd.speaker_masked.size() && cd.speaker_masked[i]) {
            block.push_back(vocab.mask_id(), std::string(kMask));
        } else {
            block.append(speaker_tokens(turns[i].speaker, vocab));
        }
        block.append(tokenize(turns[i].text, vocab));
        block.push_back(vocab.sep_id(), std::string(kSep));
        blocks.push_back(std::move(block));
    }

    TokenSeq summary;
    if (cd.with_summary && cd.dialogue.summary) {
        summary.push_back(vocab.sep_id(), std::string(kSep));
        summary.append(tokenize(*cd.dialogue.summary, vocab));
    }

    const auto limit = static_cast<std::size_t>(cfg.max_len);
    std::size_t total = 1 + summary.size();
    for (const auto &b : blocks) total += b.size();
    std::size_t keep = blocks.size();
    while (keep > 0 && total > limit) total -= blocks[--keep].size();
    if (keep == 0) {
        throw Error(ErrorCode::SequenceEmpty, "dialogue '" + cd.dialogue.id + "' does not fit in max_len " +
                                                  std::to_string(cfg.max_len));
    }

    PretextExample ex;
    ex.dialogue_id = cd.dialogue.id;
    ex.task = cd.task;
    ex.provenance = cd.provenance;
    ex.provenance.dropped_turns = static_cast<int>(blocks.size() - keep);

    ex.tokens.push_back(vocab.cls_id(), std::string(kCls));
    const bool labelled = cd.task != Task::mask_interlocutor;
    for (std::size_t i = 0; i < keep; ++i) {
        ex.tokens.append(blocks[i]);
        if (labelled) {
            ex.sep_positions.push_back(static_cast<int>(ex.tokens.size() - 1));
            ex.sep_labels.push_back(cd.turn_labels.at(i));
        }
    }
    for (std::size_t j = 0; j < summary.size(); ++j) {
        TokenId id = summary.ids[j];
        if (cd.task == Task::mask_interlocutor && vocab.person_index(id)) {
            ex.mask_positions.push_back(static_cast<int>(ex.tokens.size()));
            ex.mask_targets.push_back(id);
            ex.tokens.push_back(vocab.mask_id(), std::string(kMask));
        } else {
            ex.tokens.push_back(id, summary.pieces[j]);
        }
    }
    return ex;
}

PretextExample switch_utterances(const Dialogue &d, const PretextConfig &cfg, RngStream &rng, const Vocab &vocab) {
    return assemble_sequence(corrupt_switch_utterances(d, cfg, rng), cfg, vocab);
}

PretextExample switch_interlocutors(const Dialogue &d, const PretextConfig &cfg, RngStream &rng, const Vocab &vocab) {
    return assemble_sequence(corrupt_switch_interlocutors(d, cfg, rng), cfg, vocab);
}

PretextExample insert_utterances(const Dialogue &d, const std::vector<Dialogue> &donors, const PretextConfig &cfg,
                                 RngStream &rng, const Vocab &vocab) {
    return assemble_sequence(corrupt_insert_utterances(d, donors, donors.size(), cfg, rng), cfg, vocab);
}

PretextExample mask_interlocutors(const Dialogue &d, const PretextConfig &cfg, const Vocab &vocab) {
    return assemble_sequence(corrupt_mask_interlocutors(d, cfg), cfg, vocab);
}

namespace {

std::string_view skip_reason(ErrorCode code) {
    switch (code) {
    case ErrorCode::TooManySpeakers: return "too_many_speakers";
    case ErrorCode::SingleSpeaker: return "single_speaker";
    case ErrorCode::NoSummary: return "no_summary";
    case ErrorCode::NoDonors: return "no_donors";
    case ErrorCode::KTooLarge: return "k_too_large";
    case ErrorCode::SequenceEmpty: return "sequence_empty";
    default: return {};
    }
}

struct Outcome {
    std::optional<PretextExample> example;
    std::string_view reason;
};

} // namespace

Dataset generate_dataset(const Corpus &corpus, const PretextConfig &cfg, const Vocab &vocab, unsigned threads) {
    cfg.validate();
    const auto n = corpus.dialogues.size();

    // Canonicalize up front; the insert task draws donors from this pool.
    std::vector<Dialogue> pool;
    std::vector<std::size_t> pool_index(n, n);
    std::vector<Outcome> outcomes(n);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            pool_index[i] = pool.size();
            pool.push_back(canonicalize_names(corpus.dialogues[i], vocab.max_persons()).dialogue);
        } catch (const Error &e) {
            pool_index[i] = n;
            outcomes[i].reason = skip_reason(e.code());
            if (outcomes[i].reason.empty()) throw;
        }
    }

    auto process = [&](std::size_t i) {
        if (pool_index[i] == n) return;
        const Dialogue &d = pool[pool_index[i]];
        auto rng = derive_rng(cfg.seed, d.id);
        try {
            CorruptedDialogue cd;
            switch (cfg.task) {
            case Task::switch_utterance: cd = corrupt_switch_utterances(d, cfg, rng); break;
            case Task::switch_interlocutor: cd = corrupt_switch_interlocutors(d, cfg, rng); break;
            case Task::insert_utterance:
                cd = corrupt_insert_utterances(d, pool, pool_index[i], cfg, rng);
                break;
            case Task::mask_interlocutor: cd = corrupt_mask_interlocutors(d, cfg); break;
            }
            outcomes[i].example = assemble_sequence(cd, cfg, vocab);
        } catch (const Error &e) {
            outcomes[i].reason = skip_reason(e.code());
            if (outcomes[i].reason.empty()) throw;
        }
    };

    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> workers;
        for (unsigned t = 0; t < threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        process(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto &w : workers) w.join();
        if (failure) std::rethrow_exception(failure);
    }

    Dataset out;
    for (auto &o : outcomes) {
        if (o.example) {
            out.examples.push_back(std::move(*o.example));
        } else {
            ++out.skipped[std::string(o.reason)];
        }
    }
    return out;
}

} // namespace dialsum
