#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gtp/autodiff.hpp"
#include "gtp/latent.hpp"
#include "gtp/params.hpp"
#include "gtp/textmetric.hpp"

namespace gtp {

struct ModelConfig {
  std::size_t bins = 32;           // F, frequency rows of the source features
  std::size_t segments = 4;        // S
  std::size_t dim = 64;            // d
  std::size_t conv_channels = 64;  // hidden width of f and f'
  std::size_t kernel = 3;
  std::size_t vocab = 0;  // includes the 4 reserved ids
  std::size_t embed = 64;
  std::size_t hidden = 128;  // decoder state
  std::size_t sentiment_hidden = 32;
  std::size_t max_positions = 96;
  // Generate from g'(f(m)) instead of g'(M_bwd(f(m))).
  bool direct_generation = false;
};

void validate(const ModelConfig& cfg);

enum class MapDirection { kTextToSource, kSourceToText };

// All six components share one ParamStore; names are prefixed "f.", "f'.",
// "g.", "g'.", "M.fwd.", "M.bwd." and "h.".
class ModelBundle {
 public:
  ModelBundle(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // features: F x T with T >= S. Returns S x d.
  Var encode_source(Tape& t, const Matrix& features);
  // latent S x d -> T x F reconstruction (time-major, the transpose of the input layout).
  Var decode_source(Tape& t, Var latent, std::size_t frames);
  // ids: BOS ... EOS. Returns S x d.
  Var encode_text(Tape& t, std::span<const std::size_t> ids);
  // Teacher-forced logits: row i predicts ids[i + 1]; ids.size() - 1 rows.
  Var decode_text_logits(Tape& t, Var latent, std::span<const std::size_t> ids);
  // BOS, argmax tokens (lowest id on ties) ..., EOS. EOS is appended when
  // max_len tokens were produced without one.
  std::vector<std::size_t> decode_greedy(const LatentRep& latent, std::size_t max_len);
  Var map_latent(Var latent, MapDirection dir);
  // M_bwd(latent), or latent itself under direct generation.
  Var generation_latent(Var source_latent);
  // Mean soft-token distribution of the logits through h; 1 x 7. A frozen
  // head reads h as constants, so only the logits receive gradient.
  Var sentiment(Var logits, bool frozen_head = false);
  // h on a 1 x V token distribution.
  Var sentiment_of_tokens(Var soft, bool frozen_head = false);

  // Frozen-weight conveniences (no gradient bookkeeping kept).
  LatentRep encode_source(const Matrix& features);
  LatentRep encode_text(std::span<const std::size_t> ids);
  std::vector<std::size_t> generate(const Matrix& features, std::size_t max_len);

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

// f alone, reading weights named "f.*" from any store (the live bundle or a
// momentum copy).
Var encode_source_with(Tape& t, ParamStore& store, const ModelConfig& cfg, const Matrix& features);

// Versioned little-endian weight file: magic, version, parameter count, then
// per parameter its name, shape and row-major doubles.
void save_params(const ParamStore& store, const std::filesystem::path& path);
std::string serialize_params(const ParamStore& store);
// Loads into an existing store; names and shapes must match exactly.
void load_params(ParamStore& store, const std::filesystem::path& path);

struct QueueEntry {
  LatentRep latent;  // detached copy, encoded by the momentum encoder
  TokenSequence text;
  std::string id;
};

// Ring of the k-1 most recent group references plus the momentum copy of f.
class MomentumQueue {
 public:
  MomentumQueue(std::size_t capacity, const ModelBundle& live, double momentum);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool full() const { return entries_.size() == capacity_; }
  double momentum() const { return momentum_; }
  const std::deque<QueueEntry>& entries() const { return entries_; }
  ParamStore& encoder() { return copy_; }
  const ParamStore& encoder() const { return copy_; }

  // Encodes with the momentum copy, detaches, appends; evicts the oldest
  // entry when full.
  void push(const Matrix& features, TokenSequence text, std::string id);
  void push_latent(LatentRep latent, TokenSequence text, std::string id);
  void clear() { entries_.clear(); }

  // copy <- m * copy + (1 - m) * live for every "f.*" parameter.
  void momentum_update(const ParamStore& live, double m);
  void momentum_update(const ParamStore& live) { momentum_update(live, momentum_); }

 private:
  std::size_t capacity_;
  double momentum_;
  ModelConfig cfg_;
  ParamStore copy_;
  std::deque<QueueEntry> entries_;
};

}  // namespace gtp
