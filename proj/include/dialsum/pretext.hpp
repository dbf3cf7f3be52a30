#pragma once

#include "dialsum/corpus.hpp"
#include "dialsum/example.hpp"
#include "dialsum/rng.hpp"
#include "dialsum/vocab.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dialsum {

struct PretextConfig {
    Task task = Task::switch_utterance;
    double p_u = 0.5;
    double p_n = 0.0;
    double p_i = 0.5;
    int k_insert = 1;
    // Per-gap insertion probability; when set it replaces the fixed count.
    std::optional<double> insert_prob;
    bool include_summary = false;
    bool mask_names = false;
    int max_len = 512;
    std::uint64_t seed = 0;

    /// Throws Error(InvalidConfig).
    void validate() const;
};

/// A corrupted dialogue before tokenization. `turn_labels` and
/// `speaker_masked` are parallel to `dialogue.turns`.
struct CorruptedDialogue {
    Dialogue dialogue;
    Task task = Task::switch_utterance;
    std::vector<int> turn_labels;
    std::vector<bool> speaker_masked;
    bool with_summary = false;
    Provenance provenance;
};

CorruptedDialogue corrupt_switch_utterances(const Dialogue &d, const PretextConfig &cfg, RngStream &rng);
CorruptedDialogue corrupt_switch_interlocutors(const Dialogue &d, const PretextConfig &cfg, RngStream &rng);
/// Donors are drawn from `pool`, skipping index `exclude` (pass pool.size() to
/// use every entry).
CorruptedDialogue corrupt_insert_utterances(const Dialogue &d, std::span<const Dialogue> pool, std::size_t exclude,
                                            const PretextConfig &cfg, RngStream &rng);
CorruptedDialogue corrupt_mask_interlocutors(const Dialogue &d, const PretextConfig &cfg);

/// Lays out [CLS] (speaker text [SEP])* ([SEP] summary)? and truncates whole
/// trailing turns to fit cfg.max_len. For mask_interlocutor, person tokens in
/// the summary segment become [MASK] with their ids kept as targets.
/// Throws Error(SequenceEmpty) when even the first turn does not fit.
PretextExample assemble_sequence(const CorruptedDialogue &cd, const PretextConfig &cfg, const Vocab &vocab);

PretextExample switch_utterances(const Dialogue &d, const PretextConfig &cfg, RngStream &rng, const Vocab &vocab);
PretextExample switch_interlocutors(const Dialogue &d, const PretextConfig &cfg, RngStream &rng, const Vocab &vocab);
PretextExample insert_utterances(const Dialogue &d, const std::vector<Dialogue> &donors, const PretextConfig &cfg,
                                 RngStream &rng, const Vocab &vocab);
PretextExample mask_interlocutors(const Dialogue &d, const PretextConfig &cfg, const Vocab &vocab);

struct Dataset {
    std::vector<PretextExample> examples;
    std::map<std::string, std::size_t> skipped; // reason -> count

    std::size_t total_skipped() const;
};

/// One example per eligible dialogue, in corpus order. Names are
/// canonicalized first; each dialogue draws from derive_rng(cfg.seed, id),
/// so the result does not depend on `threads`.
Dataset generate_dataset(const Corpus &corpus, const PretextConfig &cfg, const Vocab &vocab, unsigned threads = 1);

} // namespace dialsum
