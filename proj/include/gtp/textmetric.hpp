#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gtp/matrix.hpp"

namespace gtp {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kBosId = 1;
inline constexpr std::size_t kEosId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kReservedIds = 4;

// Token <-> id bijection. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();

  // Tokens seen at least min_count times, most frequent first, ties by
  // lexical order.
  static Vocabulary build(std::span<const std::string> texts, std::size_t min_count = 1);

  std::size_t add(std::string_view token);
  std::size_t id(std::string_view token) const;  // UNK when absent
  const std::string& token(std::size_t id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }

  // One non-reserved token per line; line n (0-based) has id n + 4.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TokenSequence {
  // BOS, word ids..., EOS
  std::vector<std::size_t> ids;
  // Lowercased word strings, without BOS/EOS.
  std::vector<std::string> raw;
};

// Lowercase, split on whitespace, and emit each ASCII punctuation character
// as its own token.
std::vector<std::string> split_tokens(std::string_view text);
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);
// Words for a decoded id sequence; reserved ids other than UNK are dropped.
TokenSequence from_ids(std::span<const std::size_t> ids, const Vocabulary& vocab);
std::string detokenize(const TokenSequence& seq);

struct BleuConfig {
  std::size_t max_n = 4;
  bool smoothing = true;
  double epsilon = 0.1;
};

// Sentence BLEU on word strings: geometric mean of clipped n-gram precisions
// times the brevity penalty. Empty hypothesis or reference scores 0.
double bleu(std::span<const std::string> hyp, std::span<const std::string> ref, const BleuConfig& cfg);
double bleu(const TokenSequence& hyp, const TokenSequence& ref, std::size_t max_n, bool smoothing);

// Pooled n-gram statistics and brevity penalty, scaled to [0, 100].
double corpus_bleu(std::span<const std::pair<TokenSequence, TokenSequence>> pairs, const BleuConfig& cfg);
double corpus_bleu(std::span<const std::pair<TokenSequence, TokenSequence>> pairs, std::size_t max_n);

// (i, j) = bleu(texts[i] as hypothesis, texts[j] as reference); diagonal 1.
Matrix pairwise_bleu_matrix(std::span<const TokenSequence> texts, const BleuConfig& cfg);

}  // namespace gtp
