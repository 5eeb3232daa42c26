#include "gtp/textmetric.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "gtp/errors.hpp"

namespace gtp {

namespace {

const char* const kReservedTokens[kReservedIds] = {"<pad>", "<bos>", "<eos>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* t : kReservedTokens) add(t);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts)
    for (auto& tok : split_tokens(text)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : ordered)
    if (n >= min_count) v.add(tok);
  return v;
}

std::size_t Vocabulary::add(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  tokens_.push_back(key);
  index_.emplace(std::move(key), tokens_.size() - 1);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw InvalidInput("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary to " + path.string());
  for (std::size_t i = kReservedIds; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || v.contains(line)) throw ParseError("empty or duplicate vocabulary token", lineno);
    v.add(line);
  }
  return v;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      flush();
    } else if (uc < 128 && std::ispunct(uc)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  flush();
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.raw = split_tokens(text);
  seq.ids.reserve(seq.raw.size() + 2);
  seq.ids.push_back(kBosId);
  for (const auto& tok : seq.raw) seq.ids.push_back(vocab.id(tok));
  seq.ids.push_back(kEosId);
  return seq;
}

TokenSequence from_ids(std::span<const std::size_t> ids, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids.push_back(kBosId);
  for (std::size_t id : ids) {
    if (id == kEosId) break;
    if (id < kReservedIds && id != kUnkId) continue;
    seq.ids.push_back(id);
    seq.raw.push_back(vocab.token(id));
  }
  seq.ids.push_back(kEosId);
  return seq;
}

std::string detokenize(const TokenSequence& seq) {
  std::string out;
  for (const auto& tok : seq.raw) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts count_ngrams(std::span<const std::string> toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::vector<std::string_view> gram(toks.begin() + i, toks.begin() + i + n);
    ++counts[gram];
  }
  return counts;
}

struct MatchStats {
  std::vector<std::size_t> matched;
  std::vector<std::size_t> total;
};

void accumulate_matches(std::span<const std::string> hyp, std::span<const std::string> ref, std::size_t max_n,
                        MatchStats& stats) {
  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramCounts h = count_ngrams(hyp, n);
    const NgramCounts r = count_ngrams(ref, n);
    std::size_t m = 0, t = 0;
    for (const auto& [gram, c] : h) {
      t += c;
      if (auto it = r.find(gram); it != r.end()) m += std::min(c, it->second);
    }
    stats.matched[n - 1] += m;
    stats.total[n - 1] += t;
  }
}

double combine(const MatchStats& stats, std::size_t hyp_len, std::size_t ref_len, const BleuConfig& cfg) {
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < cfg.max_n; ++n) {
    double p;
    if (stats.matched[n] > 0) {
      p = static_cast<double>(stats.matched[n]) / static_cast<double>(stats.total[n]);
    } else if (cfg.smoothing) {
      p = cfg.epsilon / (static_cast<double>(std::max<std::size_t>(stats.total[n], 1)) + cfg.epsilon);
    } else {
      return 0.0;
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(hyp_len);
  const double r = static_cast<double>(ref_len);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(cfg.max_n)), 0.0, 1.0);
}

void validate(const BleuConfig& cfg) {
  if (cfg.max_n < 1) throw InvalidConfig("BLEU order must be at least 1");
  if (cfg.smoothing && !(cfg.epsilon > 0.0)) throw InvalidConfig("BLEU smoothing epsilon must be positive");
}

}  // namespace

double bleu(std::span<const std::string> hyp, std::span<const std::string> ref, const BleuConfig& cfg) {
  validate(cfg);
  if (hyp.empty() || ref.empty()) return 0.0;
  MatchStats stats{std::vector<std::size_t>(cfg.max_n), std::vector<std::size_t>(cfg.max_n)};
  accumulate_matches(hyp, ref, cfg.max_n, stats);
  return combine(stats, hyp.size(), ref.size(), cfg);
}

double bleu(const TokenSequence& hyp, const TokenSequence& ref, std::size_t max_n, bool smoothing) {
  BleuConfig cfg;
  cfg.max_n = max_n;
  cfg.smoothing = smoothing;
  return bleu(hyp.raw, ref.raw, cfg);
}

double corpus_bleu(std::span<const std::pair<TokenSequence, TokenSequence>> pairs, const BleuConfig& cfg) {
  validate(cfg);
  if (pairs.empty()) throw InvalidInput("corpus_bleu needs at least one pair");
  MatchStats stats{std::vector<std::size_t>(cfg.max_n), std::vector<std::size_t>(cfg.max_n)};
  std::size_t hyp_len = 0, ref_len = 0;
  for (const auto& [hyp, ref] : pairs) {
    hyp_len += hyp.raw.size();
    ref_len += ref.raw.size();
    if (hyp.raw.empty() || ref.raw.empty()) continue;
    accumulate_matches(hyp.raw, ref.raw, cfg.max_n, stats);
  }
  return 100.0 * combine(stats, hyp_len, ref_len, cfg);
}

double corpus_bleu(std::span<const std::pair<TokenSequence, TokenSequence>> pairs, std::size_t max_n) {
  BleuConfig cfg;
  cfg.max_n = max_n;
  return corpus_bleu(pairs, cfg);
}

Matrix pairwise_bleu_matrix(std::span<const TokenSequence> texts, const BleuConfig& cfg) {
  validate(cfg);
  if (texts.size() < 2) throw InvalidInput("pairwise BLEU needs at least two texts");
  const std::size_t n = texts.size();
  // n-gram tables are built once per text rather than once per pair.
  std::vector<std::vector<NgramCounts>> tables(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 1; k <= cfg.max_n; ++k) tables[i].push_back(count_ngrams(texts[i].raw, k));
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        m(i, j) = 1.0;
        continue;
      }
      if (texts[i].raw.empty() || texts[j].raw.empty()) continue;
      MatchStats stats{std::vector<std::size_t>(cfg.max_n), std::vector<std::size_t>(cfg.max_n)};
      for (std::size_t k = 0; k < cfg.max_n; ++k) {
        for (const auto& [gram, c] : tables[i][k]) {
          stats.total[k] += c;
          if (auto it = tables[j][k].find(gram); it != tables[j][k].end()) stats.matched[k] += std::min(c, it->second);
        }
      }
      m(i, j) = combine(stats, texts[i].raw.size(), texts[j].raw.size(), cfg);
    }
  }
  return m;
}

}  // namespace gtp
