#pragma once

#include "dialsum/corpus.hpp"
#include "dialsum/training.hpp"
#include "dialsum/vocab.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Generated corpora with known structure, used by tests and the toy trainer.
namespace dialsum::synth {

/// Dialogues whose turns are three words: two words of the dialogue's topic
/// and a stage word naming the turn's original index. A turn moved to
/// another slot carries the wrong stage word; a turn taken from another
/// dialogue carries a foreign topic.
struct TemplateOptions {
    std::size_t n_dialogues = 500;
    int min_turns = 6;
    int max_turns = 10;
    int min_speakers = 2;
    int max_speakers = 4;
    int n_topics = 20;
    int words_per_topic = 4;
    std::uint64_t seed = 0;
};

Corpus templated_corpus(const TemplateOptions &opts);
/// Reserved tokens followed by every word the templated corpus can emit.
Vocab templated_vocab(const TemplateOptions &opts);

/// Short chats where roughly half of the utterances carry a facial emoji.
Corpus emoji_corpus(std::size_t n_dialogues, std::uint64_t seed);
/// A vocab covering emoji_corpus's words but none of its emoji.
Vocab emoji_base_vocab();

/// Random sources of 8-12 non-special tokens of `vocab`; the target is the
/// first `prefix` source tokens.
std::vector<nn::Seq2SeqPair> copy_task_pairs(const Vocab &vocab, std::size_t n, std::uint64_t seed, int prefix = 5);

} // namespace dialsum::synth
