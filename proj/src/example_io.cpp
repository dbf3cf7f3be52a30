#include "dialsum/example_io.hpp"

#include "dialsum/error.hpp"
#include "dialsum/pretext.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace dialsum {

using json = nlohmann::json;

namespace {

json provenance_json(const Provenance &p) {
    json inserted = json::array();
    for (const auto &ins : p.inserted) {
        inserted.push_back({{"position", ins.position},
                            {"gap", ins.gap},
                            {"donor_id", ins.donor_id},
                            {"donor_turn", ins.donor_turn},
                            {"donor_speaker", ins.donor_speaker},
                            {"speaker", ins.speaker}});
    }
    return {{"selected", p.selected},
            {"permutation", p.permutation},
            {"masked_speakers", p.masked_speakers},
            {"replaced", p.replaced},
            {"original_speakers", p.original_speakers},
            {"inserted", std::move(inserted)},
            {"dropped_turns", p.dropped_turns}};
}

Provenance provenance_from_json(const json &j) {
    Provenance p;
    if (j.is_null()) return p;
    auto get = [&j](const char *key, auto &field) {
        if (auto it = j.find(key); it != j.end()) it->get_to(field);
    };
    get("selected", p.selected);
    get("permutation", p.permutation);
    get("masked_speakers", p.masked_speakers);
    get("replaced", p.replaced);
    get("original_speakers", p.original_speakers);
    get("dropped_turns", p.dropped_turns);
    if (auto it = j.find("inserted"); it != j.end()) {
        for (const auto &r : *it) {
            Insertion ins;
            r.at("position").get_to(ins.position);
            r.at("gap").get_to(ins.gap);
            r.at("donor_id").get_to(ins.donor_id);
            r.at("donor_turn").get_to(ins.donor_turn);
            r.at("donor_speaker").get_to(ins.donor_speaker);
            r.at("speaker").get_to(ins.speaker);
            p.inserted.push_back(std::move(ins));
        }
    }
    return p;
}

} // namespace

json to_json(const PretextExample &ex) {
    return {{"id", ex.dialogue_id},
            {"task", to_string(ex.task)},
            {"token_ids", ex.tokens.ids},
            {"sep_positions", ex.sep_positions},
            {"sep_labels", ex.sep_labels},
            {"mask_positions", ex.mask_positions},
            {"mask_targets", ex.mask_targets},
            {"provenance", provenance_json(ex.provenance)}};
}

PretextExample example_from_json(const json &rec, const Vocab *vocab) {
    PretextExample ex;
    rec.at("id").get_to(ex.dialogue_id);
    ex.task = parse_task(rec.at("task").get<std::string>());
    rec.at("token_ids").get_to(ex.tokens.ids);
    rec.at("sep_positions").get_to(ex.sep_positions);
    rec.at("sep_labels").get_to(ex.sep_labels);
    rec.at("mask_positions").get_to(ex.mask_positions);
    rec.at("mask_targets").get_to(ex.mask_targets);
    if (auto it = rec.find("provenance"); it != rec.end()) ex.provenance = provenance_from_json(*it);

    if (ex.sep_positions.size() != ex.sep_labels.size() || ex.mask_positions.size() != ex.mask_targets.size()) {
        throw std::runtime_error("marker positions and labels differ in length");
    }
    if (vocab) {
        for (TokenId id : ex.tokens.ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= vocab->size()) {
                throw std::runtime_error("token id " + std::to_string(id) + " outside vocab");
            }
            ex.tokens.pieces.push_back(vocab->token(id));
        }
    }
    return ex;
}

void write_examples(std::span<const PretextExample> examples, std::ostream &out) {
    for (const auto &ex : examples) out << to_json(ex).dump() << '\n';
}

void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot move output into place: " + path.string());
    }
}

void write_examples(std::span<const PretextExample> examples, const std::filesystem::path &path) {
    std::ostringstream buf;
    write_examples(examples, buf);
    write_file_atomic(path, buf.str());
}

std::vector<PretextExample> read_examples(std::istream &in, const Vocab *vocab) {
    std::vector<PretextExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(example_from_json(json::parse(line), vocab));
        } catch (const std::exception &e) {
            throw MalformedRecord(line_no, e.what());
        }
    }
    return out;
}

std::vector<PretextExample> read_examples(const std::filesystem::path &path, const Vocab *vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open examples file: " + path.string());
    return read_examples(in, vocab);
}

} // namespace dialsum
