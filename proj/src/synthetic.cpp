#include "dialsum/synthetic.hpp"

#include "dialsum/rng.hpp"

#include <array>

namespace dialsum::synth {

namespace {

constexpr std::array<const char *, 12> kNames = {"Amanda", "Tom",  "Olivia", "Jerry", "Hannah", "Lucas",
                                                 "Sofia",  "Mark", "Ella",   "Karl",  "Nina",   "Pete"};

std::string topic_word(int topic, int w) { return "tp" + std::to_string(topic) + "w" + std::to_string(w); }
std::string stage_word(int j) { return "st" + std::to_string(j); }

std::vector<std::string> reserved() {
    return {std::string(kPad), std::string(kUnk), std::string(kCls), std::string(kSep), std::string(kMask)};
}

} // namespace

Corpus templated_corpus(const TemplateOptions &o) {
    auto rng = derive_rng(o.seed, "templated-corpus");
    Corpus corpus;
    for (std::size_t i = 0; i < o.n_dialogues; ++i) {
        Dialogue d;
        d.id = "syn" + std::to_string(i);
        const int topic = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(o.n_topics)));
        const int n_turns = o.min_turns + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(o.max_turns - o.min_turns + 1)));
        const int n_speakers =
            o.min_speakers + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(o.max_speakers - o.min_speakers + 1)));

        std::vector<std::string> names(kNames.begin(), kNames.end());
        rng.shuffle(names);
        names.resize(static_cast<std::size_t>(n_speakers));

        for (int j = 0; j < n_turns; ++j) {
            // Everyone speaks once before speakers repeat at random.
            std::size_t who = j < n_speakers ? static_cast<std::size_t>(j) : rng.uniform_int(names.size());
            auto w = [&] { return topic_word(topic, static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(o.words_per_topic)))); };
            std::string a = w();
            std::string b = w();
            d.turns.push_back({names[who], a + " " + b + " " + stage_word(j)});
        }
        d.summary = names[0] + " and " + names[1] + " discuss " + topic_word(topic, 0) + " .";
        corpus.dialogues.push_back(std::move(d));
    }
    return corpus;
}

Vocab templated_vocab(const TemplateOptions &o) {
    auto tokens = reserved();
    for (const char *w : {"and", "discuss", "."}) tokens.emplace_back(w);
    for (int t = 0; t < o.n_topics; ++t) {
        for (int w = 0; w < o.words_per_topic; ++w) tokens.push_back(topic_word(t, w));
    }
    for (int j = 0; j < o.max_turns; ++j) tokens.push_back(stage_word(j));
    return Vocab::from_tokens(std::move(tokens));
}

namespace {

constexpr std::array<const char *, 10> kChatWords = {"hi", "see", "you", "later", "ok", "thanks", "lol", "sure", "bye", "great"};
constexpr std::array<const char *, 6> kFaces = {"\U0001F600", "\U0001F602", "\U0001F60D", "\U0001F622", "\U0001F609", "\U0001F64F"};

} // namespace

Corpus emoji_corpus(std::size_t n_dialogues, std::uint64_t seed) {
    auto rng = derive_rng(seed, "emoji-corpus");
    Corpus corpus;
    for (std::size_t i = 0; i < n_dialogues; ++i) {
        Dialogue d;
        d.id = "emo" + std::to_string(i);
        for (int j = 0; j < 4; ++j) {
            std::string text;
            for (int k = 0; k < 3; ++k) {
                if (k) text += ' ';
                text += kChatWords[rng.uniform_int(kChatWords.size())];
            }
            if (rng.bernoulli(0.5)) text += std::string(" ") + kFaces[rng.uniform_int(kFaces.size())];
            d.turns.push_back({j % 2 == 0 ? "Anna" : "Ben", text});
        }
        corpus.dialogues.push_back(std::move(d));
    }
    return corpus;
}

Vocab emoji_base_vocab() {
    auto tokens = reserved();
    for (const char *w : kChatWords) tokens.emplace_back(w);
    return Vocab::from_tokens(std::move(tokens));
}

std::vector<nn::Seq2SeqPair> copy_task_pairs(const Vocab &vocab, std::size_t n, std::uint64_t seed, int prefix) {
    std::vector<TokenId> plain;
    for (TokenId id = 0; id < static_cast<TokenId>(vocab.size()); ++id) {
        if (!vocab.is_special(id)) plain.push_back(id);
    }
    auto rng = derive_rng(seed, "copy-task");
    std::vector<nn::Seq2SeqPair> pairs;
    for (std::size_t i = 0; i < n && !plain.empty(); ++i) {
        nn::Seq2SeqPair p;
        const auto len = 8 + rng.uniform_int(5);
        for (std::uint64_t k = 0; k < len; ++k) p.source.push_back(plain[rng.uniform_int(plain.size())]);
        p.target.assign(p.source.begin(), p.source.begin() + std::min<std::ptrdiff_t>(prefix, static_cast<std::ptrdiff_t>(len)));
        pairs.push_back(std::move(p));
    }
    return pairs;
}

} // namespace dialsum::synth
