#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

namespace gtp {

namespace {

constexpr std::array<std::string_view, 9> kVariantNames{
    "coordinate", "+pairwise", "+triplet", "+contrastive", "+sentiment", "+gtp", "ours", "ours_no_sentiment",
    "encoder_decoder"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw InvalidConfig("bad value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidConfig("bad boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

std::string_view to_string(Variant v) { return kVariantNames.at(static_cast<std::size_t>(v)); }

std::optional<Variant> parse_variant(std::string_view s) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == s) return static_cast<Variant>(i);
  if (s == "pairwise" || s == "triplet" || s == "contrastive" || s == "sentiment" || s == "gtp") {
    return parse_variant("+" + std::string(s));
  }
  return std::nullopt;
}

bool uses_gtp(Variant v) { return v == Variant::kGtp || v == Variant::kOurs || v == Variant::kOursNoSentiment; }
bool uses_sentiment(Variant v) { return v == Variant::kSentiment || v == Variant::kOurs; }

void validate(const RunConfig& c) {
  if (c.folds < 2) throw InvalidConfig("folds must be at least 2");
  if (c.fold >= static_cast<int>(c.folds) || c.fold < -1) throw InvalidConfig("fold must be -1 or below folds");
  if (c.k < 2) throw InvalidConfig("k must be at least 2");
  if (c.batch < 1) throw InvalidConfig("batch must be at least 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw InvalidConfig("lr must be positive");
  if (!(c.momentum >= 0.0 && c.momentum <= 1.0)) throw InvalidConfig("momentum must lie in [0, 1]");
  if (c.alpha < 0.0 || c.beta < 0.0 || c.gamma < 0.0) throw InvalidConfig("alpha, beta and gamma must be non-negative");
  if (c.segments < 1 || c.dim < 1 || c.bins < 1) throw InvalidConfig("segments, dim and bins must be positive");
  if (c.max_len < 1) throw InvalidConfig("max_len must be at least 1");
  if (!(c.gtp_temperature > 0.0)) throw InvalidConfig("gtp_temperature must be positive");
  if (!(c.contrastive_temperature > 0.0)) throw InvalidConfig("contrastive_temperature must be positive");
  if (c.route_weight < 0.0) throw InvalidConfig("route_weight must be non-negative");
  if (c.comparison_weight < 0.0) throw InvalidConfig("comparison_weight must be non-negative");
  if (c.gtp_bleu_order < 1) throw InvalidConfig("gtp_bleu_order must be at least 1");
  if (c.dataset.empty() && c.synth_n < 10) throw InvalidConfig("synth_n must be at least 10");
}

std::string effective_run_id(const RunConfig& c) {
  if (!c.run_id.empty()) return c.run_id;
  std::string v(to_string(c.variant));
  if (!v.empty() && v[0] == '+') v = "coordinate_" + v.substr(1);
  return v + "_seed" + std::to_string(c.seed);
}

ModelConfig model_config(const RunConfig& c, std::size_t vocab_size) {
  ModelConfig m;
  m.bins = c.bins;
  m.segments = c.segments;
  m.dim = c.dim;
  m.vocab = vocab_size;
  m.direct_generation = c.direct_generation || c.variant == Variant::kEncoderDecoder;
  return m;
}

std::vector<PairedSample> load_corpus(const RunConfig& c) {
  if (!c.dataset.empty()) return load_dataset(c.dataset);
  SynthConfig sc;
  sc.bins = c.bins;
  return synth_generate(c.synth_n, c.data_seed, sc);
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  const std::string k(trim(key));
  if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
  else if (k == "folds") c.folds = parse_number<std::size_t>(k, v);
  else if (k == "fold") c.fold = parse_number<int>(k, v);
  else if (k == "pretrain_epochs") c.pretrain_epochs = parse_number<std::size_t>(k, v);
  else if (k == "joint_epochs") c.joint_epochs = parse_number<std::size_t>(k, v);
  else if (k == "lr") c.lr = parse_number<double>(k, v);
  else if (k == "batch") c.batch = parse_number<std::size_t>(k, v);
  else if (k == "alpha") c.alpha = parse_number<double>(k, v);
  else if (k == "beta") c.beta = parse_number<double>(k, v);
  else if (k == "gamma") c.gamma = parse_number<double>(k, v);
  else if (k == "k") c.k = parse_number<std::size_t>(k, v);
  else if (k == "momentum") c.momentum = parse_number<double>(k, v);
  else if (k == "segments") c.segments = parse_number<std::size_t>(k, v);
  else if (k == "dim") c.dim = parse_number<std::size_t>(k, v);
  else if (k == "bins") c.bins = parse_number<std::size_t>(k, v);
  else if (k == "variant") {
    auto var = parse_variant(v);
    if (!var) throw InvalidConfig("unknown variant '" + std::string(v) + "'");
    c.variant = *var;
  } else if (k == "max_len") c.max_len = parse_number<std::size_t>(k, v);
  else if (k == "comparison_weight") c.comparison_weight = parse_number<double>(k, v);
  else if (k == "route_weight") c.route_weight = parse_number<double>(k, v);
  else if (k == "pair_threshold") c.pair_threshold = parse_number<double>(k, v);
  else if (k == "triplet_margin") c.triplet_margin = parse_number<double>(k, v);
  else if (k == "contrastive_temperature") c.contrastive_temperature = parse_number<double>(k, v);
  else if (k == "gtp_temperature") c.gtp_temperature = parse_number<double>(k, v);
  else if (k == "gtp_bleu_order") c.gtp_bleu_order = parse_number<std::size_t>(k, v);
  else if (k == "symmetric_bleu") c.symmetric_bleu = parse_bool(k, v);
  else if (k == "reference_sentiment_head") c.reference_sentiment_head = parse_bool(k, v);
  else if (k == "direct_generation") c.direct_generation = parse_bool(k, v);
  else if (k == "standardize_features") c.standardize_features = parse_bool(k, v);
  else if (k == "dataset") c.dataset = std::string(v);
  else if (k == "synth_n") c.synth_n = parse_number<std::size_t>(k, v);
  else if (k == "data_seed") c.data_seed = parse_number<std::uint64_t>(k, v);
  else if (k == "out_dir") c.out_dir = std::string(v);
  else if (k == "run_id") c.run_id = std::string(v);
  else if (k == "write_weights") c.write_weights = parse_bool(k, v);
  else throw InvalidConfig("unknown config key '" + k + "'");
}

void apply_config_text(RunConfig& c, std::string_view text) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig("config line " + std::to_string(line_no) + ": expected key = value");
    apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(c, buf.str());
}

std::map<std::string, std::string> describe(const RunConfig& c) {
  return {
      {"seed", std::to_string(c.seed)},
      {"folds", std::to_string(c.folds)},
      {"fold", std::to_string(c.fold)},
      {"pretrain_epochs", std::to_string(c.pretrain_epochs)},
      {"joint_epochs", std::to_string(c.joint_epochs)},
      {"lr", fmt(c.lr)},
      {"batch", std::to_string(c.batch)},
      {"alpha", fmt(c.alpha)},
      {"beta", fmt(c.beta)},
      {"gamma", fmt(c.gamma)},
      {"k", std::to_string(c.k)},
      {"momentum", fmt(c.momentum)},
      {"segments", std::to_string(c.segments)},
      {"dim", std::to_string(c.dim)},
      {"bins", std::to_string(c.bins)},
      {"variant", std::string(to_string(c.variant))},
      {"max_len", std::to_string(c.max_len)},
      {"comparison_weight", fmt(c.comparison_weight)},
      {"route_weight", fmt(c.route_weight)},
      {"pair_threshold", fmt(c.pair_threshold)},
      {"triplet_margin", fmt(c.triplet_margin)},
      {"contrastive_temperature", fmt(c.contrastive_temperature)},
      {"gtp_temperature", fmt(c.gtp_temperature)},
      {"gtp_bleu_order", std::to_string(c.gtp_bleu_order)},
      {"symmetric_bleu", c.symmetric_bleu ? "true" : "false"},
      {"reference_sentiment_head", c.reference_sentiment_head ? "true" : "false"},
      {"direct_generation", c.direct_generation ? "true" : "false"},
      {"standardize_features", c.standardize_features ? "true" : "false"},
      {"dataset", c.dataset},
      {"synth_n", std::to_string(c.synth_n)},
      {"data_seed", std::to_string(c.data_seed)},
      {"out_dir", c.out_dir},
      {"run_id", c.run_id},
      {"write_weights", c.write_weights ? "true" : "false"},
  };
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("pearson needs equal-length non-empty inputs");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// ---- metrics records ----------------------------------------------------

namespace {

using nlohmann::json;

json dist_json(const SentimentDistribution& d) { return std::vector<double>(d.begin(), d.end()); }

SentimentDistribution dist_from(const json& j) {
  SentimentDistribution d{};
  if (!j.is_array() || j.size() != kSentimentCount) throw InvalidInput("sentiment distribution needs 7 entries");
  for (std::size_t i = 0; i < kSentimentCount; ++i) d[i] = j[i].get<double>();
  return d;
}

// NaN is not representable in JSON; it is written as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string to_json_line(const MetricsRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["stage"] = r.stage;
  j["fold"] = r.fold;
  j["seed"] = r.seed;
  j["epoch"] = r.epoch;
  const auto& l = r.losses;
  j["losses"] = {{"m2m", l.m2m},         {"t2t", l.t2t}, {"m2t", l.m2t},     {"gtp", l.gtp},
                 {"sentiment", l.sentiment}, {"reg", l.reg}, {"total", l.total},
                 {"alpha", l.coefficients.alpha}, {"beta", l.coefficients.beta}, {"gamma", l.coefficients.gamma}};
  if (r.bleu) j["bleu"] = *r.bleu;
  if (r.spread) {
    const auto& s = *r.spread;
    j["spread"] = {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"count", s.count},
                   {"histogram", s.histogram}};
  }
  if (r.sentiment) {
    j["sentiment"] = {{"reference", dist_json(r.sentiment->reference)},
                      {"generated", dist_json(r.sentiment->generated)},
                      {"pearson", number_or_null(r.sentiment->pearson)}};
  }
  return j.dump();
}

std::vector<MetricsRecord> parse_metrics(std::string_view text) {
  std::vector<MetricsRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      MetricsRecord r;
      r.run_id = j.at("run_id").get<std::string>();
      r.stage = j.at("stage").get<std::string>();
      r.fold = j.at("fold").get<std::size_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.epoch = j.at("epoch").get<std::size_t>();
      const json& l = j.at("losses");
      r.losses.m2m = l.at("m2m").get<double>();
      r.losses.t2t = l.at("t2t").get<double>();
      r.losses.m2t = l.at("m2t").get<double>();
      r.losses.gtp = l.at("gtp").get<double>();
      r.losses.sentiment = l.at("sentiment").get<double>();
      r.losses.reg = l.at("reg").get<double>();
      r.losses.total = l.at("total").get<double>();
      r.losses.coefficients = {l.at("alpha").get<double>(), l.at("beta").get<double>(), l.at("gamma").get<double>()};
      if (j.contains("bleu")) r.bleu = j["bleu"].get<double>();
      if (j.contains("spread")) {
        const json& s = j["spread"];
        SpreadStats st;
        st.mean = s.at("mean").get<double>();
        st.std = s.at("std").get<double>();
        st.min = s.at("min").get<double>();
        st.max = s.at("max").get<double>();
        st.count = s.at("count").get<std::size_t>();
        st.histogram = s.at("histogram").get<std::vector<std::size_t>>();
        r.spread = st;
      }
      if (j.contains("sentiment")) {
        const json& s = j["sentiment"];
        SentimentComparison c;
        c.reference = dist_from(s.at("reference"));
        c.generated = dist_from(s.at("generated"));
        c.pearson = s.at("pearson").is_null() ? std::nan("") : s.at("pearson").get<double>();
        r.sentiment = c;
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad metrics record: ") + e.what(), line_no);
    } catch (const InvalidInput& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<MetricsRecord> load_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read metrics " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics(buf.str());
}

}  // namespace gtp
