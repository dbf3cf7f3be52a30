#pragma once

#include "dialsum/vocab.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dialsum {

enum class Task { switch_utterance, switch_interlocutor, insert_utterance, mask_interlocutor };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

struct Insertion {
    int position = 0;   // turn index in the corrupted dialogue
    int gap = 0;        // gap index in the original dialogue (0 = before the first turn)
    std::string donor_id;
    int donor_turn = 0;
    std::string donor_speaker;
    std::string speaker; // camouflage speaker drawn from the target dialogue

    bool operator==(const Insertion &) const = default;
};

/// What a generator did to the original dialogue. Fields that do not apply
/// to the task stay empty.
struct Provenance {
    std::vector<int> selected;         // original turn indices chosen for corruption
    std::vector<int> permutation;      // slot -> original turn index (switch_utterance)
    std::vector<int> masked_speakers;  // corrupted-turn indices whose speaker became [MASK]
    std::vector<int> replaced;         // turn indices whose speaker was swapped (switch_interlocutor)
    std::vector<std::string> original_speakers;
    std::vector<Insertion> inserted;
    int dropped_turns = 0;             // trailing turns removed by truncation

    bool operator==(const Provenance &) const = default;
};

struct PretextExample {
    std::string dialogue_id;
    Task task = Task::switch_utterance;
    TokenSeq tokens;
    std::vector<int> sep_positions;
    std::vector<int> mask_positions;
    std::vector<int> sep_labels;
    std::vector<TokenId> mask_targets;
    Provenance provenance;

    bool operator==(const PretextExample &) const = default;
};

} // namespace dialsum
