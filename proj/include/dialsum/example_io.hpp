#pragma once

#include "dialsum/example.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace dialsum {

nlohmann::json to_json(const PretextExample &ex);
/// Token pieces are looked up in `vocab` when given, otherwise left empty.
PretextExample example_from_json(const nlohmann::json &rec, const Vocab *vocab = nullptr);

void write_examples(std::span<const PretextExample> examples, std::ostream &out);
/// Writes to a temporary sibling and renames it into place.
void write_examples(std::span<const PretextExample> examples, const std::filesystem::path &path);

std::vector<PretextExample> read_examples(std::istream &in, const Vocab *vocab = nullptr);
std::vector<PretextExample> read_examples(const std::filesystem::path &path, const Vocab *vocab = nullptr);

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);

} // namespace dialsum
