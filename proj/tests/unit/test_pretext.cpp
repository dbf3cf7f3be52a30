#include "dialsum/example_io.hpp"
#include "dialsum/pretext.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

using namespace dialsum;
using testing::error_of;
using testing::make_dialogue;

namespace {

Vocab test_vocab() {
    return testing::vocab_with({"hi", "hello", "yo", "ok", "bye", "cookies", "baked", "for", "and", "see", "you", "later",
                                "a", "b", "c", "d", "e", "f", "g", "h"});
}

PretextConfig config(Task task) {
    PretextConfig cfg;
    cfg.task = task;
    return cfg;
}

Dialogue canonical(const Dialogue &d) { return canonicalize_names(d).dialogue; }

Dialogue random_dialogue(RngStream &rng, const std::string &id, int max_turns = 8, int max_speakers = 3) {
    static const std::vector<std::string> words = {"hi", "hello", "yo", "ok", "bye", "see", "you", "later", "a", "b"};
    auto d = make_dialogue(id, {}, "[PERSON_0] and [PERSON_1] see you");
    const auto n = 1 + rng.uniform_int(static_cast<std::uint64_t>(max_turns));
    const auto speakers = 1 + rng.uniform_int(static_cast<std::uint64_t>(max_speakers));
    for (std::uint64_t t = 0; t < n; ++t) {
        std::string text = words[rng.uniform_int(words.size())];
        if (rng.bernoulli(0.7)) text += " " + words[rng.uniform_int(words.size())];
        d.turns.push_back({person_token(static_cast<int>(rng.uniform_int(speakers))), text});
    }
    return d;
}

std::vector<TokenId> ids_of(const std::vector<std::string> &pieces, const Vocab &v) {
    std::vector<TokenId> out;
    for (const auto &p : pieces) out.push_back(*v.find(p));
    return out;
}

} // namespace

TEST_CASE("derive_rng is deterministic per (seed, id)") {
    auto a = derive_rng(7, "a");
    auto b = derive_rng(7, "a");
    auto c = derive_rng(7, "b");
    auto d = derive_rng(8, "a");
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs_c |= x != c.next_u64();
        differs_d |= x != d.next_u64();
    }
    CHECK(differs_c);
    CHECK(differs_d);
}

TEST_CASE("config validation") {
    auto cfg = config(Task::switch_utterance);
    CHECK_NOTHROW(cfg.validate());
    cfg.p_u = 1.5;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
    cfg.p_u = 0.5;
    cfg.max_len = 7;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
    cfg.max_len = 8;
    cfg.p_n = -0.1;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
    CHECK(error_of([] { parse_task("shuffle"); }) == ErrorCode::InvalidConfig);
    for (auto t : {Task::switch_utterance, Task::switch_interlocutor, Task::insert_utterance, Task::mask_interlocutor}) {
        CHECK(parse_task(to_string(t)) == t);
    }
}

TEST_CASE("assemble a one-turn dialogue") {
    auto v = test_vocab();
    auto d = canonical(make_dialogue("1", {{"A", "hi"}}));
    auto rng = derive_rng(0, "1");
    auto ex = switch_utterances(d, config(Task::switch_utterance), rng, v);
    CHECK(ex.tokens.pieces == std::vector<std::string>{"[CLS]", "[PERSON_0]", "hi", "[SEP]"});
    CHECK(ex.sep_positions == std::vector<int>{3});
    CHECK(ex.sep_labels == std::vector<int>{0});
}

TEST_CASE("switch_utterance with p_u = 0 is the identity") {
    auto v = test_vocab();
    auto cfg = config(Task::switch_utterance);
    cfg.p_u = 0.0;
    auto rng = derive_rng(1, "x");
    for (int trial = 0; trial < 50; ++trial) {
        auto d = random_dialogue(rng, "x");
        auto cd = corrupt_switch_utterances(d, cfg, rng);
        CHECK(cd.dialogue.turns == d.turns);
        CHECK(std::all_of(cd.turn_labels.begin(), cd.turn_labels.end(), [](int l) { return l == 0; }));
        CHECK(cd.provenance.selected.empty());
    }
}

TEST_CASE("switch_utterance on two turns enumerates both permutations") {
    auto v = test_vocab();
    auto d = canonical(make_dialogue("two", {{"A", "hi"}, {"B", "bye"}}));
    auto cfg = config(Task::switch_utterance);
    cfg.p_u = 1.0;
    int swaps = 0, identities = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto rng = derive_rng(seed, "two");
        auto ex = switch_utterances(d, cfg, rng, v);
        if (ex.provenance.permutation == std::vector<int>{1, 0}) {
            ++swaps;
            CHECK(ex.sep_labels == std::vector<int>{1, 1});
            CHECK(ex.tokens.pieces == std::vector<std::string>{"[CLS]", "[PERSON_1]", "bye", "[SEP]", "[PERSON_0]", "hi", "[SEP]"});
        } else {
            ++identities;
            CHECK(ex.provenance.permutation == std::vector<int>{0, 1});
            CHECK(ex.sep_labels == std::vector<int>{0, 0});
        }
    }
    CHECK(swaps > 0);
    CHECK(identities > 0);
}

TEST_CASE("switch_utterance labels mark displaced turns") {
    auto rng = derive_rng(2, "soundness");
    auto cfg = config(Task::switch_utterance);
    for (int trial = 0; trial < 500; ++trial) {
        cfg.p_u = rng.uniform01();
        auto d = random_dialogue(rng, "s");
        auto cd = corrupt_switch_utterances(d, cfg, rng);
        REQUIRE(cd.dialogue.turns.size() == d.turns.size());
        for (std::size_t i = 0; i < d.turns.size(); ++i) {
            CHECK(cd.dialogue.turns[i] == d.turns[cd.provenance.permutation[i]]);
            CHECK(cd.turn_labels[i] == (cd.dialogue.turns[i] == d.turns[i] ? 0 : 1));
        }
        // The permutation only moves selected slots, and the multiset is kept.
        for (std::size_t i = 0; i < d.turns.size(); ++i) {
            bool selected = std::find(cd.provenance.selected.begin(), cd.provenance.selected.end(), static_cast<int>(i)) !=
                            cd.provenance.selected.end();
            if (!selected) CHECK(cd.provenance.permutation[i] == static_cast<int>(i));
        }
        auto key = [](const Utterance &u) { return u.speaker + "\x1f" + u.text; };
        std::vector<std::string> before, after;
        for (const auto &u : d.turns) before.push_back(key(u));
        for (const auto &u : cd.dialogue.turns) after.push_back(key(u));
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        CHECK(before == after);
    }
}

TEST_CASE("speaker masking adds no mask targets") {
    auto v = test_vocab();
    auto cfg = config(Task::switch_utterance);
    cfg.p_u = 1.0;
    cfg.p_n = 1.0;
    cfg.mask_names = true;
    auto d = canonical(make_dialogue("m", {{"A", "hi"}, {"B", "yo"}, {"A", "ok"}}));
    auto rng = derive_rng(3, "m");
    auto ex = switch_utterances(d, cfg, rng, v);
    CHECK(ex.mask_positions.empty());
    CHECK(ex.mask_targets.empty());
    CHECK(ex.provenance.masked_speakers == std::vector<int>{0, 1, 2});
    for (int p : ex.sep_positions) CHECK(ex.tokens.ids[static_cast<std::size_t>(p)] == v.sep_id());
    CHECK(ex.tokens.ids[1] == v.mask_id());

    // Without the flag p_n has no effect.
    cfg.mask_names = false;
    auto rng2 = derive_rng(3, "m");
    CHECK(switch_utterances(d, cfg, rng2, v).provenance.masked_speakers.empty());
}

TEST_CASE("switch_interlocutor") {
    auto v = test_vocab();
    auto cfg = config(Task::switch_interlocutor);
    auto rng = derive_rng(4, "si");

    auto single = canonical(make_dialogue("one", {{"A", "hi"}, {"A", "yo"}}));
    CHECK(error_of([&] { corrupt_switch_interlocutors(single, cfg, rng); }) == ErrorCode::SingleSpeaker);

    auto two = canonical(make_dialogue("two", {{"A", "hi"}, {"B", "yo"}, {"A", "ok"}}, "A and B"));
    cfg.p_i = 1.0;
    auto ex = switch_interlocutors(two, cfg, rng, v);
    CHECK(ex.sep_labels == std::vector<int>{1, 1, 1});
    CHECK(ex.tokens.pieces ==
          std::vector<std::string>{"[CLS]", "[PERSON_1]", "hi", "[SEP]", "[PERSON_0]", "yo", "[SEP]", "[PERSON_1]", "ok", "[SEP]"});

    cfg.p_i = 0.0;
    cfg.include_summary = true;
    auto id = switch_interlocutors(two, cfg, rng, v);
    CHECK(id.sep_labels == std::vector<int>{0, 0, 0});
    CHECK(id.sep_positions == std::vector<int>{3, 6, 9});
    CHECK(id.tokens.pieces == std::vector<std::string>{"[CLS]", "[PERSON_0]", "hi", "[SEP]", "[PERSON_1]", "yo", "[SEP]",
                                                       "[PERSON_0]", "ok", "[SEP]", "[SEP]", "[PERSON_0]", "and",
                                                       "[PERSON_1]"});

    auto no_summary = canonical(make_dialogue("ns", {{"A", "hi"}, {"B", "yo"}}));
    CHECK(error_of([&] { corrupt_switch_interlocutors(no_summary, cfg, rng); }) == ErrorCode::NoSummary);
}

TEST_CASE("switch_interlocutor conserves texts and always changes replaced speakers") {
    auto rng = derive_rng(5, "si-props");
    auto cfg = config(Task::switch_interlocutor);
    for (int trial = 0; trial < 500; ++trial) {
        cfg.p_i = rng.uniform01();
        auto d = random_dialogue(rng, "p", 8, 4);
        if (interlocutors(d).size() < 2) continue;
        auto cd = corrupt_switch_interlocutors(d, cfg, rng);
        const auto names = interlocutors(d);
        for (std::size_t i = 0; i < d.turns.size(); ++i) {
            CHECK(cd.dialogue.turns[i].text == d.turns[i].text);
            CHECK(std::find(names.begin(), names.end(), cd.dialogue.turns[i].speaker) != names.end());
            CHECK(cd.turn_labels[i] == (cd.dialogue.turns[i].speaker != d.turns[i].speaker ? 1 : 0));
            CHECK(cd.provenance.original_speakers[i] == d.turns[i].speaker);
        }
    }
}

TEST_CASE("insert_utterance bookkeeping") {
    auto v = test_vocab();
    auto cfg = config(Task::insert_utterance);
    auto d = canonical(make_dialogue("t", {{"A", "hi"}, {"B", "yo"}, {"A", "ok"}}));
    std::vector<Dialogue> donors = {make_dialogue("d1", {{"Zed", "cookies"}, {"Quinn", "baked"}}),
                                    make_dialogue("d2", {{"Yan", "later"}})};
    auto rng = derive_rng(6, "t");

    cfg.k_insert = 0;
    auto same = insert_utterances(d, donors, cfg, rng, v);
    CHECK(same.sep_labels == std::vector<int>{0, 0, 0});
    CHECK(same.provenance.inserted.empty());

    cfg.k_insert = 2;
    for (int trial = 0; trial < 100; ++trial) {
        auto cd = corrupt_insert_utterances(d, donors, donors.size(), cfg, rng);
        CHECK(cd.dialogue.turns.size() == 5);
        CHECK(std::count(cd.turn_labels.begin(), cd.turn_labels.end(), 1) == 2);
        for (const auto &ins : cd.provenance.inserted) {
            const auto &turn = cd.dialogue.turns[static_cast<std::size_t>(ins.position)];
            CHECK(cd.turn_labels[static_cast<std::size_t>(ins.position)] == 1);
            CHECK((turn.speaker == "[PERSON_0]" || turn.speaker == "[PERSON_1]"));
            CHECK(turn.speaker != ins.donor_speaker);
        }
    }

    cfg.k_insert = 5;
    CHECK(error_of([&] { insert_utterances(d, donors, cfg, rng, v); }) == ErrorCode::KTooLarge);
    cfg.k_insert = 4;
    CHECK_NOTHROW(insert_utterances(d, donors, cfg, rng, v));
    CHECK(error_of([&] { insert_utterances(d, {}, cfg, rng, v); }) == ErrorCode::NoDonors);
    std::vector<Dialogue> only_self = {d};
    CHECK(error_of([&] { corrupt_insert_utterances(d, only_self, 0, cfg, rng); }) == ErrorCode::NoDonors);
}

TEST_CASE("removing inserted turns recovers the original") {
    auto rng = derive_rng(7, "insert-roundtrip");
    std::vector<Dialogue> pool;
    for (int i = 0; i < 20; ++i) pool.push_back(random_dialogue(rng, "p" + std::to_string(i)));
    auto cfg = config(Task::insert_utterance);
    for (int trial = 0; trial < 300; ++trial) {
        const auto i = static_cast<std::size_t>(rng.uniform_int(pool.size()));
        const auto &d = pool[i];
        if (rng.bernoulli(0.5)) {
            cfg.insert_prob = rng.uniform01();
        } else {
            cfg.insert_prob.reset();
            cfg.k_insert = static_cast<int>(rng.uniform_int(d.turns.size() + 2));
        }
        auto cd = corrupt_insert_utterances(d, pool, i, cfg, rng);
        Dialogue restored;
        restored.id = cd.dialogue.id;
        restored.summary = cd.dialogue.summary;
        for (std::size_t t = 0; t < cd.dialogue.turns.size(); ++t) {
            if (cd.turn_labels[t] == 0) restored.turns.push_back(cd.dialogue.turns[t]);
        }
        CHECK(restored == d);
        for (const auto &ins : cd.provenance.inserted) CHECK(ins.donor_id != d.id);
    }
}

TEST_CASE("mask_interlocutor examples") {
    auto v = test_vocab();
    auto cfg = config(Task::mask_interlocutor);
    auto d = canonical(make_dialogue("m", {{"Amanda", "hi"}, {"Jerry", "yo"}}, "Amanda baked cookies for Jerry"));
    auto ex = mask_interlocutors(d, cfg, v);
    REQUIRE(ex.mask_positions.size() == 2);
    CHECK(ex.mask_targets == std::vector<TokenId>{v.person_id(0), v.person_id(1)});
    for (int p : ex.mask_positions) CHECK(ex.tokens.ids[static_cast<std::size_t>(p)] == v.mask_id());
    CHECK(ex.sep_positions.empty());
    CHECK(ex.sep_labels.empty());
    // Dialogue-side person tokens are untouched.
    CHECK(ex.tokens.ids[1] == v.person_id(0));

    auto twice = canonical(make_dialogue("t", {{"A", "hi"}, {"B", "yo"}}, "A and A"));
    auto ex2 = mask_interlocutors(twice, cfg, v);
    CHECK(ex2.mask_targets == std::vector<TokenId>{v.person_id(0), v.person_id(0)});

    auto none = canonical(make_dialogue("n", {{"A", "hi"}}, "see you"));
    CHECK(mask_interlocutors(none, cfg, v).mask_positions.empty());

    auto missing = canonical(make_dialogue("x", {{"A", "hi"}}));
    CHECK(error_of([&] { mask_interlocutors(missing, cfg, v); }) == ErrorCode::NoSummary);
}

TEST_CASE("mask_interlocutor restore property") {
    auto v = test_vocab();
    auto cfg = config(Task::mask_interlocutor);
    auto rng = derive_rng(8, "mask-restore");
    for (int trial = 0; trial < 200; ++trial) {
        auto d = random_dialogue(rng, "r");
        std::string summary;
        for (int w = 0; w < 6; ++w) summary += (rng.bernoulli(0.4) ? person_token(static_cast<int>(rng.uniform_int(4))) : "ok") + " ";
        d.summary = summary;
        auto ex = mask_interlocutors(d, cfg, v);
        auto ids = ex.tokens.ids;
        for (std::size_t k = 0; k < ex.mask_positions.size(); ++k) ids[static_cast<std::size_t>(ex.mask_positions[k])] = ex.mask_targets[k];
        // Uncorrupted layout: the same dialogue with the summary left alone.
        CorruptedDialogue plain;
        plain.dialogue = d;
        plain.task = Task::switch_utterance;
        plain.with_summary = true;
        plain.turn_labels.assign(d.turns.size(), 0);
        plain.speaker_masked.assign(d.turns.size(), false);
        CHECK(ids == assemble_sequence(plain, cfg, v).tokens.ids);
    }
}

TEST_CASE("truncation drops whole trailing turns") {
    auto v = test_vocab();
    auto d = make_dialogue("long", {});
    for (int t = 0; t < 40; ++t) d.turns.push_back({person_token(t % 2), "a b c d e f g h a b c d e"});
    auto cfg = config(Task::switch_utterance);
    cfg.p_u = 0.0;
    // Each turn is 1 + 13 + 1 = 15 tokens; 1 + 40 * 15 = 601 > 512.
    auto rng = derive_rng(0, "long");
    auto ex = switch_utterances(d, cfg, rng, v);
    CHECK(ex.tokens.size() <= 512);
    CHECK(ex.sep_labels.size() == 34);
    CHECK(ex.tokens.size() == 1 + 34 * 15);
    CHECK(ex.provenance.dropped_turns == 6);
    CHECK(ex.tokens.ids.back() == v.sep_id());

    cfg.max_len = 10;
    auto rng2 = derive_rng(0, "long");
    CHECK(error_of([&] { switch_utterances(d, cfg, rng2, v); }) == ErrorCode::SequenceEmpty);
}

TEST_CASE("structural invariants of generated examples") {
    auto v = test_vocab();
    auto rng = derive_rng(9, "structure");
    Corpus c;
    for (int i = 0; i < 60; ++i) c.dialogues.push_back(random_dialogue(rng, "d" + std::to_string(i), 12, 4));
    for (auto task : {Task::switch_utterance, Task::switch_interlocutor, Task::insert_utterance, Task::mask_interlocutor}) {
        auto cfg = config(task);
        cfg.max_len = 24;
        cfg.mask_names = task == Task::switch_utterance || task == Task::insert_utterance;
        cfg.p_n = 0.3;
        auto ds = generate_dataset(c, cfg, v);
        CHECK(!ds.examples.empty());
        for (const auto &ex : ds.examples) {
            CHECK(ex.tokens.size() <= 24);
            CHECK(ex.sep_labels.size() == ex.sep_positions.size());
            CHECK(ex.mask_targets.size() == ex.mask_positions.size());
            for (int p : ex.sep_positions) CHECK(ex.tokens.ids[static_cast<std::size_t>(p)] == v.sep_id());
            for (int p : ex.mask_positions) CHECK(ex.tokens.ids[static_cast<std::size_t>(p)] == v.mask_id());
            if (task == Task::mask_interlocutor) {
                CHECK(ex.sep_labels.empty());
            } else {
                CHECK(ex.mask_targets.empty());
            }
        }
    }
}

TEST_CASE("generate_dataset skips and counts ineligible dialogues") {
    auto v = test_vocab();
    Corpus c;
    c.dialogues.push_back(make_dialogue("1", {{"A", "hi"}, {"B", "yo"}}, "A and B"));
    c.dialogues.push_back(make_dialogue("2", {{"A", "hi"}, {"A", "yo"}}, "A"));
    c.dialogues.push_back(make_dialogue("3", {{"C", "ok"}, {"D", "bye"}}));
    auto ds = generate_dataset(c, config(Task::switch_interlocutor), v);
    CHECK(ds.examples.size() == 2);
    CHECK(ds.skipped == std::map<std::string, std::size_t>{{"single_speaker", 1}});
    CHECK(ds.total_skipped() == 1);

    auto masked = generate_dataset(c, config(Task::mask_interlocutor), v);
    CHECK(masked.examples.size() == 2);
    CHECK(masked.skipped == std::map<std::string, std::size_t>{{"no_summary", 1}});

    Corpus crowd;
    auto big = make_dialogue("big", {});
    for (int s = 0; s < 70; ++s) big.turns.push_back({"S" + std::to_string(s), "hi"});
    crowd.dialogues.push_back(big);
    crowd.dialogues.push_back(c.dialogues[0]);
    auto capped = generate_dataset(crowd, config(Task::switch_utterance), v);
    CHECK(capped.examples.size() == 1);
    CHECK(capped.skipped.at("too_many_speakers") == 1);
}

TEST_CASE("generate_dataset is independent of order and threads") {
    auto v = test_vocab();
    auto rng = derive_rng(10, "det");
    Corpus c;
    for (int i = 0; i < 80; ++i) c.dialogues.push_back(random_dialogue(rng, "d" + std::to_string(i)));
    for (auto task : {Task::switch_utterance, Task::switch_interlocutor, Task::insert_utterance}) {
        auto cfg = config(task);
        cfg.seed = 99;
        auto serial = generate_dataset(c, cfg, v, 1);
        auto again = generate_dataset(c, cfg, v, 1);
        auto parallel = generate_dataset(c, cfg, v, 8);
        CHECK(serial.examples == again.examples);
        CHECK(serial.examples == parallel.examples);

        if (task == Task::insert_utterance) continue; // donor pool follows corpus order
        Corpus reversed = c;
        std::reverse(reversed.dialogues.begin(), reversed.dialogues.end());
        auto rev = generate_dataset(reversed, cfg, v);
        std::reverse(rev.examples.begin(), rev.examples.end());
        CHECK(rev.examples == serial.examples);
    }
}

TEST_CASE("selection frequencies stay within three standard deviations") {
    auto v = test_vocab();
    Corpus c;
    for (int i = 0; i < 1250; ++i) {
        auto d = make_dialogue("f" + std::to_string(i), {});
        for (int t = 0; t < 8; ++t) d.turns.push_back({t % 2 ? "B" : "A", "hi"});
        c.dialogues.push_back(d);
    }
    const double n = 10000.0;
    for (double p : {0.2, 0.5, 0.9}) {
        const double bound = 3.0 * std::sqrt(p * (1 - p) / n);

        auto su = config(Task::switch_utterance);
        su.p_u = p;
        su.p_n = p;
        su.mask_names = true;
        std::size_t selected = 0, masked = 0;
        for (const auto &ex : generate_dataset(c, su, v).examples) {
            selected += ex.provenance.selected.size();
            masked += ex.provenance.masked_speakers.size();
        }
        CHECK(std::abs(static_cast<double>(selected) / n - p) <= bound);
        CHECK(std::abs(static_cast<double>(masked) / n - p) <= bound);

        auto si = config(Task::switch_interlocutor);
        si.p_i = p;
        std::size_t replaced = 0;
        for (const auto &ex : generate_dataset(c, si, v).examples) replaced += ex.provenance.replaced.size();
        CHECK(std::abs(static_cast<double>(replaced) / n - p) <= bound);
    }
}

TEST_CASE("example records carry the documented fields") {
    auto v = test_vocab();
    auto d = canonical(make_dialogue("j", {{"A", "hi"}, {"B", "yo"}}));
    auto rng = derive_rng(0, "j");
    auto ex = switch_utterances(d, config(Task::switch_utterance), rng, v);
    auto j = to_json(ex);
    for (const char *key : {"id", "task", "token_ids", "sep_positions", "sep_labels", "mask_positions", "mask_targets", "provenance"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["task"] == "switch_utterance");
    auto back = example_from_json(j, &v);
    CHECK(back == ex);
    CHECK(ids_of(back.tokens.pieces, v) == back.tokens.ids);
}
