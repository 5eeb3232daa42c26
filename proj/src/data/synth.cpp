#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gtp/autodiff.hpp"
#include "gtp/data.hpp"
#include "gtp/errors.hpp"
#include "gtp/simkernel.hpp"

namespace gtp {

namespace {

using Words = std::vector<std::string_view>;

// Latent attributes behind one sample. Tags expose four of them; mood,
// texture and dynamics only surface through the spectrum and the text.
struct Attributes {
  Mode mode;
  Instrument instrument;
  Tempo tempo;
  Ensemble ensemble;
  Sentiment mood;
  std::size_t texture;
  std::size_t dynamics;
};

constexpr std::size_t kTextures = 5;
constexpr std::size_t kDynamics = 3;

const std::array<Words, 4> kMarkings{{
    {"grave", "largo", "lento", "adagio"},
    {"andante", "moderato", "andantino"},
    {"allegro", "allegretto", "vivace"},
    {"presto", "prestissimo"},
}};

const std::array<Words, 3> kInstrumentWords{{
    {"strings", "violin", "cello", "viola", "bowed"},
    {"winds", "clarinet", "flute", "oboe", "horn", "bassoon"},
    {"piano", "keyboard", "pianist"},
}};

const std::array<Words, 4> kEnsembleWords{{
    {"sonata", "duo", "solo"},
    {"trio", "threesome", "triple"},
    {"quartet", "foursome", "four"},
    {"quintet", "sextet", "octet", "ensemble", "band"},
}};

const std::array<Words, 2> kModeWords{{
    {"major", "ionian", "sunlit"},
    {"minor", "aeolian", "shadowed"},
}};

const std::array<Words, kSentimentCount> kMoodAdjectives{{
    {"furious", "fierce", "violent", "angry", "raging"},
    {"bitter", "grotesque", "sour", "harsh", "sneering"},
    {"ominous", "eerie", "menacing", "anxious", "trembling"},
    {"joyous", "lively", "cheerful", "radiant", "playful", "graceful", "peaceful", "beautiful", "serene", "tender",
     "bright", "happy"},
    {"plain", "steady", "measured", "simple", "unadorned"},
    {"mournful", "sorrowful", "melancholy", "grieving", "weeping"},
    {"sudden", "unexpected", "startling", "abrupt", "astonishing"},
}};

const std::array<Words, kSentimentCount> kMoodNouns{{
    {"rage", "fury", "anger"},
    {"disgust", "bitterness", "crudeness"},
    {"dread", "fear", "terror"},
    {"joy", "delight", "warmth", "jubilation"},
    {"calm", "balance", "order"},
    {"sadness", "loss", "lament", "grief", "tears"},
    {"surprise", "shocks", "twists"},
}};

const std::array<Words, kTextures> kTextureNouns{{
    {"arpeggios", "runs", "scales", "cascades"},
    {"chords", "harmonies", "hymn", "chorale"},
    {"melody", "song", "cantilena", "aria"},
    {"pulses", "ostinato", "rhythms", "dance"},
    {"fugue", "canon", "imitation", "counterpoint"},
}};

const std::array<Words, kDynamics> kDynamicWords{{
    {"softly", "quietly", "hushed", "pianissimo"},
    {"evenly", "steadily", "moderately"},
    {"loudly", "boldly", "forcefully", "fortissimo"},
}};

const Words kOpeners{"begins with", "opens with", "starts with", "sets out with", "launches"};
const Words kLinks{"then", "later", "afterwards", "soon", "next", "finally", "eventually"};
const Words kVerbs{"unfolds", "builds", "returns", "fades", "develops", "grows", "wanders", "settles", "rises"};
const Words kPlaces{"coda", "middle", "recapitulation", "ending", "bridge", "development", "close", "finale"};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[static_cast<std::size_t>(rng() % v.size())];
}

std::string_view pick(const Words& v, std::mt19937_64& rng) { return v[static_cast<std::size_t>(rng() % v.size())]; }

std::size_t draw(std::mt19937_64& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

Attributes draw_attributes(std::mt19937_64& rng) {
  static constexpr std::array<double, 2> mode_w{0.6, 0.4};
  static constexpr std::array<double, 3> inst_w{0.45, 0.2, 0.35};
  static constexpr std::array<double, 4> tempo_w{0.3, 0.25, 0.3, 0.15};
  static constexpr std::array<double, 4> ens_w{0.35, 0.2, 0.3, 0.15};
  // Mostly joyful, matching the skew of real program notes.
  static constexpr std::array<double, kSentimentCount> mood_w{0.06, 0.04, 0.08, 0.45, 0.12, 0.17, 0.08};
  static constexpr std::array<double, kTextures> tex_w{0.2, 0.2, 0.25, 0.2, 0.15};
  static constexpr std::array<double, kDynamics> dyn_w{0.35, 0.35, 0.3};
  Attributes a{};
  a.mode = static_cast<Mode>(draw(rng, mode_w));
  a.instrument = static_cast<Instrument>(draw(rng, inst_w));
  a.tempo = static_cast<Tempo>(draw(rng, tempo_w));
  a.ensemble = static_cast<Ensemble>(draw(rng, ens_w));
  a.mood = static_cast<Sentiment>(draw(rng, mood_w));
  a.texture = draw(rng, tex_w);
  a.dynamics = draw(rng, dyn_w);
  return a;
}

std::string join(const std::vector<std::string_view>& parts) {
  std::string s;
  for (auto p : parts) {
    if (!s.empty()) s += ' ';
    s.append(p);
  }
  return s;
}

std::string generate_text(const Attributes& a, std::mt19937_64& rng) {
  const auto mark = pick(kMarkings[static_cast<std::size_t>(a.tempo)], rng);
  const auto inst = pick(kInstrumentWords[static_cast<std::size_t>(a.instrument)], rng);
  const auto ens = pick(kEnsembleWords[static_cast<std::size_t>(a.ensemble)], rng);
  const auto mode = pick(kModeWords[static_cast<std::size_t>(a.mode)], rng);
  const auto& adjs = kMoodAdjectives[static_cast<std::size_t>(a.mood)];
  const auto adj1 = pick(adjs, rng);
  auto adj2 = pick(adjs, rng);
  if (adj2 == adj1) adj2 = pick(adjs, rng);
  const auto noun = pick(kMoodNouns[static_cast<std::size_t>(a.mood)], rng);
  const auto tex1 = pick(kTextureNouns[a.texture], rng);
  const auto dyn = pick(kDynamicWords[a.dynamics], rng);
  const auto opener = pick(kOpeners, rng);
  const auto link = pick(kLinks, rng);
  const auto verb = pick(kVerbs, rng);
  const auto place = pick(kPlaces, rng);

  const auto verb2 = pick(kVerbs, rng);
  const auto tex2 = pick(kTextureNouns[a.texture], rng);

  // Each chunk carries one or two attributes; chunks are shuffled so that
  // only attribute words, not scaffolding, repeat across descriptions.
  std::vector<std::vector<std::string_view>> chunks;
  switch (rng() % 4) {
    case 0: chunks.push_back({"the", "movement", ",", mark, ","}); break;
    case 1: chunks.push_back({"marked", mark}); break;
    case 2: chunks.push_back({mark, "tempo"}); break;
    default: chunks.push_back({mark}); break;
  }
  switch (rng() % 4) {
    case 0: chunks.push_back({"for", inst, ens}); break;
    case 1: chunks.push_back({inst, ens, verb}); break;
    case 2: chunks.push_back({ens, "of", inst}); break;
    default: chunks.push_back({inst, "in", ens}); break;
  }
  switch (rng() % 3) {
    case 0: chunks.push_back({adj1, tex1}); break;
    case 1: chunks.push_back({tex1, ",", adj1, ","}); break;
    default: chunks.push_back({opener, adj1, tex1}); break;
  }
  switch (rng() % 4) {
    case 0: chunks.push_back({noun, verb2}); break;
    case 1: chunks.push_back({"with", noun}); break;
    case 2: chunks.push_back({adj2, noun}); break;
    default: chunks.push_back({noun, "and", tex2}); break;
  }
  switch (rng() % 3) {
    case 0: chunks.push_back({"in", mode}); break;
    case 1: chunks.push_back({mode, "colors"}); break;
    default: chunks.push_back({mode, link}); break;
  }
  switch (rng() % 3) {
    case 0: chunks.push_back({dyn, "toward", "the", place}); break;
    case 1: chunks.push_back({"played", dyn}); break;
    default: chunks.push_back({dyn}); break;
  }
  // The tempo chunk leads when it uses the "the movement" frame.
  const std::size_t first = chunks[0][0] == "the" ? 1 : 0;
  for (std::size_t i = chunks.size() - 1; i > first; --i) {
    const std::size_t j = first + static_cast<std::size_t>(rng() % (i - first + 1));
    std::swap(chunks[i], chunks[j]);
  }
  static const Words separators{",", ";", "and", "while", "."};
  std::vector<std::string_view> w;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i > 0 && (w.empty() || (w.back() != "," && w.back() != ";"))) w.push_back(pick(separators, rng));
    w.insert(w.end(), chunks[i].begin(), chunks[i].end());
  }
  if (w.back() == "," || w.back() == ";") w.back() = ".";
  else w.push_back(".");
  return join(w);
}

// Fixed spectral signatures per attribute value. They belong to the
// generator, not to a corpus, so every seed shares the same "physics".
struct Signatures {
  std::vector<std::vector<double>> mode, instrument, tempo, ensemble, mood, texture, dynamics;
  std::vector<double> base, base2;
};

std::vector<double> smooth_profile(std::size_t bins, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> raw(bins);
  for (auto& x : raw) x = n(rng);
  std::vector<double> out(bins, 0.0);
  for (std::size_t f = 0; f < bins; ++f) {
    double acc = 0.0, wsum = 0.0;
    for (std::size_t g = 0; g < bins; ++g) {
      const double d = static_cast<double>(f) - static_cast<double>(g);
      const double w = std::exp(-0.5 * d * d / 2.25);
      acc += w * raw[g];
      wsum += w;
    }
    out[f] = acc / wsum;
  }
  double norm = 0.0;
  for (double x : out) norm += x * x;
  norm = std::sqrt(norm / static_cast<double>(bins));
  for (auto& x : out) x /= norm;
  return out;
}

Signatures make_signatures(std::size_t bins) {
  std::mt19937_64 rng(0x6d757369635f7478ULL);
  auto table = [&](std::size_t count) {
    std::vector<std::vector<double>> t;
    for (std::size_t i = 0; i < count; ++i) t.push_back(smooth_profile(bins, rng));
    return t;
  };
  Signatures s;
  s.mode = table(2);
  s.instrument = table(3);
  s.tempo = table(4);
  s.ensemble = table(4);
  s.mood = table(kSentimentCount);
  s.texture = table(kTextures);
  s.dynamics = table(kDynamics);
  for (std::size_t f = 0; f < bins; ++f) {
    const double x = static_cast<double>(f) / static_cast<double>(bins);
    s.base.push_back(0.35 + std::exp(-4.0 * x));
    s.base2.push_back(0.1 * std::cos(3.0 * std::numbers::pi * x));
  }
  return s;
}

Matrix generate_features(const Attributes& a, const SynthConfig& cfg, const Signatures& sig,
                         std::mt19937_64& rng) {
  const std::size_t frames =
      cfg.min_frames + static_cast<std::size_t>(rng() % (cfg.max_frames - cfg.min_frames + 1));
  static constexpr std::array<double, 4> tempo_period{12.0, 8.0, 5.0, 3.0};
  const double period = tempo_period[static_cast<std::size_t>(a.tempo)];
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const double b2 = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  std::normal_distribution<double> noise(0.0, cfg.noise_scale);
  const double dyn_gain = 1.0 + 0.1 * (static_cast<double>(a.dynamics) - 1.0);

  Matrix m(cfg.bins, frames);
  for (std::size_t f = 0; f < cfg.bins; ++f) {
    const double stat = sig.mode[static_cast<std::size_t>(a.mode)][f] +
                        sig.instrument[static_cast<std::size_t>(a.instrument)][f] +
                        sig.ensemble[static_cast<std::size_t>(a.ensemble)][f] +
                        sig.mood[static_cast<std::size_t>(a.mood)][f] + sig.texture[a.texture][f] +
                        sig.dynamics[a.dynamics][f];
    for (std::size_t t = 0; t < frames; ++t) {
      const double pulse =
          std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
      const double attr = stat + sig.tempo[static_cast<std::size_t>(a.tempo)][f] * (1.0 + pulse);
      const double base = sig.base[f] + b2 * sig.base2[f];
      const double v = base * dyn_gain * (1.0 + cfg.attribute_scale * attr) + noise(rng);
      m(f, t) = std::max(v, 0.0);
    }
  }
  return m;
}

TagSet tags_from(const Attributes& a, std::string_view text) {
  TagSet t{a.mode, a.instrument, a.tempo, a.ensemble};
  if (auto tempo = tempo_category(text)) t.tempo = *tempo;
  return t;
}

}  // namespace

std::vector<double> pooled_features(const Matrix& features, std::size_t segments) {
  const auto bounds = segment_bounds(features.cols(), segments);
  std::vector<double> out(segments * features.rows(), 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t lo = bounds[s], hi = bounds[s + 1];
    for (std::size_t f = 0; f < features.rows(); ++f) {
      double acc = 0.0;
      for (std::size_t t = lo; t < hi; ++t) acc += features(f, t);
      out[s * features.rows() + f] = acc / static_cast<double>(hi - lo);
    }
  }
  return out;
}

CorpusStats corpus_statistics(std::span<const PairedSample> corpus, const BleuConfig& bleu_cfg, std::size_t segments,
                              double bleu_threshold) {
  if (corpus.size() < 2) throw InvalidInput("corpus statistics need at least two samples");
  std::vector<std::vector<double>> pooled;
  std::vector<TokenSequence> texts;
  pooled.reserve(corpus.size());
  texts.reserve(corpus.size());
  for (const auto& s : corpus) {
    pooled.push_back(pooled_features(s.features, segments));
    texts.push_back(TokenSequence{{}, split_tokens(s.text)});
  }
  const Matrix cos = pairwise_cosine_matrix(std::span<const std::vector<double>>(pooled));
  const Matrix bl = pairwise_bleu_matrix(texts, bleu_cfg);
  CorpusStats st;
  st.bleu_threshold = bleu_threshold;
  st.feature_cosine_min = 1.0;
  double cos_total = 0.0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (i == j) continue;
      cos_total += cos(i, j);
      st.feature_cosine_min = std::min(st.feature_cosine_min, cos(i, j));
      if (bl(i, j) < bleu_threshold) ++below;
      ++st.pairs;
    }
  }
  st.feature_cosine_mean = cos_total / static_cast<double>(st.pairs);
  st.bleu_below_threshold_fraction = static_cast<double>(below) / static_cast<double>(st.pairs);
  return st;
}

namespace {

std::vector<PairedSample> generate_once(std::size_t n, std::uint64_t seed, const SynthConfig& cfg,
                                        const Signatures& sig) {
  std::vector<PairedSample> out;
  out.reserve(n);
  const std::size_t width = std::max<std::size_t>(5, std::to_string(n - 1).size());
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + i + 1);
    const Attributes a = draw_attributes(rng);
    PairedSample s;
    const std::string num = std::to_string(i);
    s.id = "s" + std::string(width - num.size(), '0') + num;
    s.text = generate_text(a, rng);
    s.features = generate_features(a, cfg, sig, rng);
    s.tags = tags_from(a, s.text);
    s.sentiment = lexicon_sentiment(s.text);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

bool meets_corpus_targets(const CorpusStats& st) {
  return st.feature_cosine_mean >= kTargetFeatureCosine && st.bleu_below_threshold_fraction >= kTargetBleuFraction;
}

std::vector<PairedSample> synth_generate(std::size_t n, std::uint64_t seed, const SynthConfig& cfg) {
  if (n < 10) throw InvalidInput("synthetic corpus needs at least 10 samples");
  if (cfg.bins == 0 || cfg.min_frames < 4 || cfg.max_frames < cfg.min_frames) {
    throw InvalidConfig("synthetic corpus needs bins > 0 and 4 <= min_frames <= max_frames");
  }
  const Signatures sig = make_signatures(cfg.bins);
  if (!cfg.self_check) return generate_once(n, seed, cfg, sig);
  // Small corpora can miss the targets by chance; reseed deterministically.
  for (std::uint64_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    auto corpus = generate_once(n, seed + attempt * 0x100000001B3ULL, cfg, sig);
    const std::size_t probe = std::min<std::size_t>(corpus.size(), 400);
    if (meets_corpus_targets(corpus_statistics(std::span<const PairedSample>(corpus).first(probe)))) return corpus;
  }
  throw Error("synthetic corpus missed its similarity targets after " + std::to_string(cfg.max_attempts) +
              " attempts");
}

}  // namespace gtp
