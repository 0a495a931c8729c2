#include "cfsl/vocabulary.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "cfsl/error.hpp"

namespace cfsl {

std::vector<std::string> tokenize_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char ch : text) {
    bool separator = ch < 0x80 && (std::isspace(ch) || std::ispunct(ch));
    if (separator) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch))
                                  : static_cast<char>(ch));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

void Vocabulary::add(std::string token, std::int64_t count) {
  TokenId id = static_cast<TokenId>(tokens_.size()) + 1;
  id_by_token_.emplace(token, id);
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = id_by_token_.find(std::string(token));
  return it == id_by_token_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id <= 0 || id > size())
    throw DomainError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id) - 1];
}

std::int64_t Vocabulary::count_of(TokenId id) const {
  if (id <= 0 || id > size())
    throw DomainError("token id " + std::to_string(id) + " out of range");
  return counts_[static_cast<std::size_t>(id) - 1];
}

void Vocabulary::dump_tsv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (TokenId id = 1; id <= size(); ++id)
    out << token_of(id) << '\t' << id << '\t' << count_of(id) << '\n';
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Vocabulary vocab;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    TokenId id;
    std::int64_t count;
    if (!std::getline(row, token, '\t') || !(row >> id >> count))
      throw IoError("malformed vocabulary row at line " + std::to_string(line_no));
    if (id != vocab.size() + 1)
      throw IoError("non-contiguous token id at line " + std::to_string(line_no));
    vocab.add(std::move(token), count);
  }
  return vocab;
}

}  // namespace cfsl
