#include "gtp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "gtp/errors.hpp"
#include "gtp/losses.hpp"

namespace gtp {

void validate(const ModelConfig& c) {
  if (c.bins == 0 || c.segments == 0 || c.dim == 0 || c.conv_channels == 0 || c.embed == 0 || c.hidden == 0 ||
      c.sentiment_hidden == 0 || c.max_positions == 0) {
    throw InvalidConfig("model sizes must be positive");
  }
  if (c.kernel == 0 || c.kernel % 2 == 0) throw InvalidConfig("kernel must be odd");
  if (c.vocab <= kReservedIds) throw InvalidConfig("vocabulary must contain at least one non-reserved token");
}

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (auto& x : m.values()) x = n(rng);
  return m;
}

double fan_in_sd(std::size_t fan_in, double gain) { return gain / std::sqrt(static_cast<double>(fan_in)); }

Var P(Tape& t, ParamStore& s, std::string_view name) { return t.param(s.get(name)); }

// One gated recurrent step. Input and conditioning projections arrive
// precomputed; only the recurrent products happen here.
struct GruWeights {
  Var uz, ur, un;
  Var cz, cr, cn;  // conditioning projections incl. bias, 1 x H
};

Var gru_step(const GruWeights& w, Var xz, Var xr, Var xn, Var h) {
  Var z = ad::sigmoid(ad::add(ad::add(xz, w.cz), ad::matmul(h, w.uz)));
  Var r = ad::sigmoid(ad::add(ad::add(xr, w.cr), ad::matmul(h, w.ur)));
  Var n = ad::tanh(ad::add(ad::add(xn, w.cn), ad::mul(r, ad::matmul(h, w.un))));
  return ad::add(n, ad::mul(z, ad::sub(h, n)));
}

struct DecoderState {
  GruWeights gru;
  Var h0;
  Var emb, wz, wr, wn, out, out_b;
};

DecoderState decoder_state(Tape& t, ParamStore& s, Var latent) {
  Var c = ad::reshape(latent, 1, latent.rows() * latent.cols());
  DecoderState d;
  d.gru.uz = P(t, s, "g'.uz");
  d.gru.ur = P(t, s, "g'.ur");
  d.gru.un = P(t, s, "g'.un");
  d.gru.cz = ad::add(ad::matmul(c, P(t, s, "g'.cz")), P(t, s, "g'.bz"));
  d.gru.cr = ad::add(ad::matmul(c, P(t, s, "g'.cr")), P(t, s, "g'.br"));
  d.gru.cn = ad::add(ad::matmul(c, P(t, s, "g'.cn")), P(t, s, "g'.bn"));
  d.h0 = ad::tanh(ad::add(ad::matmul(c, P(t, s, "g'.init")), P(t, s, "g'.init_b")));
  d.emb = P(t, s, "g'.emb");
  d.wz = P(t, s, "g'.wz");
  d.wr = P(t, s, "g'.wr");
  d.wn = P(t, s, "g'.wn");
  d.out = P(t, s, "g'.out");
  d.out_b = P(t, s, "g'.out_b");
  return d;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

constexpr char kMagic[4] = {'G', 'T', 'P', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T take(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw IoError("weight file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

ModelBundle::ModelBundle(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  std::mt19937_64 rng(seed);
  const std::size_t F = cfg.bins, C = cfg.conv_channels, K = cfg.kernel, D = cfg.dim, V = cfg.vocab, E = cfg.embed,
                    H = cfg.hidden, SD = cfg.segments * cfg.dim;
  const double relu_gain = std::sqrt(2.0);
  auto add = [&](std::string name, std::size_t r, std::size_t c, double sd) {
    params_.add(std::move(name), sd == 0.0 ? Matrix(r, c) : gaussian(r, c, sd, rng));
  };
  // f
  add("f.c0.w", K * F, C, fan_in_sd(K * F, relu_gain));
  add("f.c0.b", 1, C, 0.0);
  add("f.c1.w", K * C, C, fan_in_sd(K * C, relu_gain));
  add("f.c1.b", 1, C, 0.0);
  add("f.c2.w", K * C, D, fan_in_sd(K * C, 1.0));
  add("f.c2.b", 1, D, 0.0);
  // f'
  add("f'.t0.w", D, K * C, fan_in_sd(K * D, relu_gain));
  add("f'.t0.b", 1, C, 0.0);
  add("f'.t1.w", C, K * C, fan_in_sd(K * C, relu_gain));
  add("f'.t1.b", 1, C, 0.0);
  add("f'.t2.w", C, K * F, fan_in_sd(K * C, 1.0));
  add("f'.t2.b", 1, F, 0.0);
  // g
  add("g.emb", V, E, 1.0);
  add("g.pos", cfg.max_positions, E, 1.0);
  add("g.mix.w", K * E, D, fan_in_sd(K * E, 1.0));
  add("g.mix.b", 1, D, 0.0);
  // g'
  add("g'.emb", V, E, 1.0);
  for (const char* gate : {"z", "r", "n"}) {
    add(std::string("g'.w") + gate, E, H, fan_in_sd(E, 1.0));
    add(std::string("g'.u") + gate, H, H, fan_in_sd(H, 1.0));
    add(std::string("g'.c") + gate, SD, H, fan_in_sd(SD, 1.0));
    add(std::string("g'.b") + gate, 1, H, 0.0);
  }
  add("g'.init", SD, H, fan_in_sd(SD, 1.0));
  add("g'.init_b", 1, H, 0.0);
  add("g'.out", H, V, fan_in_sd(H, 1.0));
  add("g'.out_b", 1, V, 0.0);
  // M: identity plus small noise per segment row
  for (const char* half : {"M.fwd", "M.bwd"}) {
    Matrix w = gaussian(D, D, 0.01, rng);
    for (std::size_t i = 0; i < D; ++i) w(i, i) += 1.0;
    params_.add(std::string(half) + ".w", std::move(w));
    add(std::string(half) + ".b", 1, D, 0.0);
  }
  // h
  add("h.w1", V, cfg.sentiment_hidden, 1.0);
  add("h.b1", 1, cfg.sentiment_hidden, 0.0);
  add("h.w2", cfg.sentiment_hidden, kSentimentClasses, fan_in_sd(cfg.sentiment_hidden, 1.0));
  add("h.b2", 1, kSentimentClasses, 0.0);
}

Var encode_source_with(Tape& t, ParamStore& s, const ModelConfig& cfg, const Matrix& features) {
  if (features.rows() != cfg.bins) {
    throw ShapeError("source features have " + std::to_string(features.rows()) + " bins, model expects " +
                     std::to_string(cfg.bins));
  }
  if (features.cols() < cfg.segments) {
    throw InvalidInput("source has " + std::to_string(features.cols()) + " frames, fewer than " +
                       std::to_string(cfg.segments) + " segments");
  }
  const std::size_t K = cfg.kernel, pad = K / 2;
  Var x = t.constant(transpose(features));
  x = ad::relu(ad::conv1d(x, P(t, s, "f.c0.w"), P(t, s, "f.c0.b"), K, 1, pad));
  x = ad::relu(ad::conv1d(x, P(t, s, "f.c1.w"), P(t, s, "f.c1.b"), K, 1, pad));
  x = ad::conv1d(x, P(t, s, "f.c2.w"), P(t, s, "f.c2.b"), K, 1, pad);
  return ad::segment_pool(x, cfg.segments);
}

Var ModelBundle::encode_source(Tape& t, const Matrix& features) {
  return encode_source_with(t, params_, cfg_, features);
}

Var ModelBundle::decode_source(Tape& t, Var latent, std::size_t frames) {
  if (latent.rows() != cfg_.segments || latent.cols() != cfg_.dim) throw ShapeError("latent must be S x d");
  const std::size_t K = cfg_.kernel, pad = K / 2;
  Var x = ad::segment_unpool(latent, frames);
  x = ad::relu(ad::conv_transpose1d(x, P(t, params_, "f'.t0.w"), P(t, params_, "f'.t0.b"), K, 1, pad));
  x = ad::relu(ad::conv_transpose1d(x, P(t, params_, "f'.t1.w"), P(t, params_, "f'.t1.b"), K, 1, pad));
  return ad::conv_transpose1d(x, P(t, params_, "f'.t2.w"), P(t, params_, "f'.t2.b"), K, 1, pad);
}

Var ModelBundle::encode_text(Tape& t, std::span<const std::size_t> ids) {
  if (ids.empty()) throw InvalidInput("cannot encode an empty token sequence");
  std::vector<std::size_t> padded(ids.begin(), ids.end());
  while (padded.size() < cfg_.segments) padded.push_back(kPadId);
  for (std::size_t id : padded)
    if (id >= cfg_.vocab) throw InvalidInput("token id " + std::to_string(id) + " outside the vocabulary");
  std::vector<std::size_t> positions(padded.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = std::min(i, cfg_.max_positions - 1);
  Var x = ad::tanh(ad::add(ad::gather_rows(P(t, params_, "g.emb"), padded),
                           ad::gather_rows(P(t, params_, "g.pos"), positions)));
  const std::size_t K = cfg_.kernel;
  x = ad::tanh(ad::conv1d(x, P(t, params_, "g.mix.w"), P(t, params_, "g.mix.b"), K, 1, K / 2));
  return ad::segment_pool(x, cfg_.segments);
}

Var ModelBundle::decode_text_logits(Tape& t, Var latent, std::span<const std::size_t> ids) {
  if (ids.size() < 2) throw InvalidInput("teacher forcing needs at least BOS and one target");
  if (latent.rows() != cfg_.segments || latent.cols() != cfg_.dim) throw ShapeError("latent must be S x d");
  DecoderState d = decoder_state(t, params_, latent);
  std::span<const std::size_t> inputs = ids.first(ids.size() - 1);
  for (std::size_t id : inputs)
    if (id >= cfg_.vocab) throw InvalidInput("token id " + std::to_string(id) + " outside the vocabulary");
  Var x = ad::gather_rows(d.emb, inputs);
  Var xz = ad::matmul(x, d.wz), xr = ad::matmul(x, d.wr), xn = ad::matmul(x, d.wn);
  std::vector<Var> states;
  states.reserve(inputs.size());
  Var h = d.h0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    h = gru_step(d.gru, ad::slice_rows(xz, i, i + 1), ad::slice_rows(xr, i, i + 1), ad::slice_rows(xn, i, i + 1), h);
    states.push_back(h);
  }
  return ad::add_row(ad::matmul(ad::concat_rows(states), d.out), d.out_b);
}

std::vector<std::size_t> ModelBundle::decode_greedy(const LatentRep& latent, std::size_t max_len) {
  if (max_len == 0) throw InvalidConfig("greedy decoding needs max_len >= 1");
  Tape t;
  DecoderState d = decoder_state(t, params_, t.constant(latent.values));
  std::vector<std::size_t> out{kBosId};
  Var h = d.h0;
  std::size_t prev = kBosId;
  for (std::size_t step = 0; step < max_len; ++step) {
    Var x = ad::gather_rows(d.emb, std::span<const std::size_t>(&prev, 1));
    h = gru_step(d.gru, ad::matmul(x, d.wz), ad::matmul(x, d.wr), ad::matmul(x, d.wn), h);
    Var logits = ad::add_row(ad::matmul(h, d.out), d.out_b);
    prev = argmax_lowest(logits.value().values());
    out.push_back(prev);
    if (prev == kEosId) return out;
  }
  out.push_back(kEosId);
  return out;
}

Var ModelBundle::map_latent(Var latent, MapDirection dir) {
  if (latent.rows() != cfg_.segments || latent.cols() != cfg_.dim) {
    throw ShapeError("map_latent expects " + std::to_string(cfg_.segments) + "x" + std::to_string(cfg_.dim) +
                     ", got " + latent.value().shape_string());
  }
  Tape& t = *latent.tape();
  const char* half = dir == MapDirection::kTextToSource ? "M.fwd" : "M.bwd";
  return ad::add_row(ad::matmul(latent, P(t, params_, std::string(half) + ".w")),
                     P(t, params_, std::string(half) + ".b"));
}

Var ModelBundle::generation_latent(Var source_latent) {
  return cfg_.direct_generation ? source_latent : map_latent(source_latent, MapDirection::kSourceToText);
}

Var ModelBundle::sentiment(Var logits, bool frozen_head) {
  return sentiment_of_tokens(ad::mean_rows(ad::softmax_rows(logits)), frozen_head);
}

Var ModelBundle::sentiment_of_tokens(Var soft, bool frozen_head) {
  Tape& t = *soft.tape();
  auto w = [&](const char* name) { return frozen_head ? t.constant(params_.get(name).value) : P(t, params_, name); };
  Var hidden = ad::tanh(ad::add_row(ad::matmul(soft, w("h.w1")), w("h.b1")));
  return ad::softmax_rows(ad::add_row(ad::matmul(hidden, w("h.w2")), w("h.b2")));
}

LatentRep ModelBundle::encode_source(const Matrix& features) {
  Tape t;
  return LatentRep(encode_source(t, features).value());
}

LatentRep ModelBundle::encode_text(std::span<const std::size_t> ids) {
  Tape t;
  return LatentRep(encode_text(t, ids).value());
}

std::vector<std::size_t> ModelBundle::generate(const Matrix& features, std::size_t max_len) {
  Tape t;
  Var latent = generation_latent(encode_source(t, features));
  return decode_greedy(LatentRep(latent.value()), max_len);
}

std::string serialize_params(const ParamStore& store) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint64_t>(out, store.size());
  for (const auto& p : store.all()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint64_t>(out, p.value.rows());
    put<std::uint64_t>(out, p.value.cols());
    for (double v : p.value.values()) put<double>(out, v);
  }
  return out;
}

void save_params(const ParamStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weights " + path.string());
  out << serialize_params(store);
  if (!out) throw IoError("failed writing weights " + path.string());
}

void load_params(ParamStore& store, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read weights " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw InvalidInput("not a weight file: " + path.string());
  if (take<std::uint32_t>(in) != kWeightsVersion) throw InvalidInput("unsupported weight file version");
  const auto count = take<std::uint64_t>(in);
  if (count != store.size()) throw ShapeError("weight file has " + std::to_string(count) + " tensors, model has " +
                                              std::to_string(store.size()));
  std::vector<Matrix> values;
  values.reserve(count);
  for (const auto& p : store.all()) {
    const auto len = take<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("weight file truncated");
    if (name != p.name) throw ShapeError("weight file tensor '" + name + "' where '" + p.name + "' was expected");
    const auto rows = take<std::uint64_t>(in);
    const auto cols = take<std::uint64_t>(in);
    if (rows != p.value.rows() || cols != p.value.cols()) throw ShapeError("shape mismatch for " + name);
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = take<double>(in);
    values.push_back(std::move(m));
  }
  std::size_t i = 0;
  for (auto& p : store.all()) p.value = std::move(values[i++]);
}

void ModelBundle::save(const std::filesystem::path& path) const { save_params(params_, path); }
void ModelBundle::load(const std::filesystem::path& path) { load_params(params_, path); }

MomentumQueue::MomentumQueue(std::size_t capacity, const ModelBundle& live, double momentum)
    : capacity_(capacity), momentum_(momentum), cfg_(live.config()) {
  if (capacity == 0) throw InvalidConfig("queue capacity must be at least 1");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw InvalidConfig("momentum must lie in [0, 1]");
  for (const auto& p : live.params().all())
    if (p.name.starts_with("f.")) copy_.add(p.name, p.value);
}

void MomentumQueue::push_latent(LatentRep latent, TokenSequence text, std::string id) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(QueueEntry{std::move(latent), std::move(text), std::move(id)});
}

void MomentumQueue::push(const Matrix& features, TokenSequence text, std::string id) {
  Tape t;
  LatentRep latent(encode_source_with(t, copy_, cfg_, features).value());
  push_latent(std::move(latent), std::move(text), std::move(id));
}

void MomentumQueue::momentum_update(const ParamStore& live, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw InvalidConfig("momentum must lie in [0, 1]");
  for (auto& p : copy_.all()) {
    const Matrix& src = live.get(p.name).value;
    auto dst = p.value.values();
    auto s = src.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = m * dst[i] + (1.0 - m) * s[i];
  }
}

}  // namespace gtp
