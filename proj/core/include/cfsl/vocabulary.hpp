#ifndef CFSL_VOCABULARY_HPP_
#define CFSL_VOCABULARY_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfsl/types.hpp"

namespace cfsl {

// Lowercase and split on whitespace/punctuation. Non-ASCII bytes are kept as
// token characters, so UTF-8 words survive intact.
std::vector<std::string> tokenize_text(std::string_view text);

// Token table with id 0 reserved for the unknown token. Retained tokens are a
// bijection with ids 1..size().
class Vocabulary {
 public:
  static constexpr TokenId kUnkId = 0;

  Vocabulary() = default;

  // Tokens must be appended in final id order (1, 2, ...).
  void add(std::string token, std::int64_t count);

  TokenId id_of(std::string_view token) const;  // kUnkId when absent
  const std::string& token_of(TokenId id) const;
  std::int64_t count_of(TokenId id) const;

  // Number of retained tokens, excluding the UNK slot.
  std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }
  // Rows of an embedding table covering every id including UNK.
  std::int32_t table_rows() const { return size() + 1; }

  void dump_tsv(const std::string& path) const;
  static Vocabulary load_tsv(const std::string& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;        // index i holds the token with id i+1
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, TokenId> id_by_token_;
};

}  // namespace cfsl

#endif  // CFSL_VOCABULARY_HPP_
