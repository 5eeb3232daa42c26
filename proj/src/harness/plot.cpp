#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

namespace gtp {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 56;

std::string num(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axes {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

class Svg {
 public:
  explicit Svg(std::string_view title) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    text(kWidth / 2, 22, title, "middle", 15);
  }
  void text(double x, double y, std::string_view s, std::string_view anchor = "start", int size = 12) {
    os_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\" font-size=\"" << size
        << "\">" << escape(s) << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "black", double width = 1) {
    os_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, std::string_view fill) {
    os_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"" << fill << "\"/>\n";
  }
  void circle(double x, double y, double r, std::string_view fill) {
    os_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill
        << "\" fill-opacity=\"0.5\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os_ << num(x) << ',' << num(y) << ' ';
    os_ << "\"/>\n";
  }
  void axes(const Axes& a, std::string_view xlabel, std::string_view ylabel) {
    line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom);
    line(kLeft, kTop, kLeft, kHeight - kBottom);
    for (int i = 0; i <= 4; ++i) {
      const double xv = a.x0 + (a.x1 - a.x0) * i / 4.0, yv = a.y0 + (a.y1 - a.y0) * i / 4.0;
      text(a.px(xv), kHeight - kBottom + 16, num(xv), "middle", 10);
      text(kLeft - 6, a.py(yv) + 4, num(yv), "end", 10);
    }
    text(kWidth / 2, kHeight - 14, xlabel, "middle");
    os_ << "<text x=\"16\" y=\"" << num(kHeight / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num(kHeight / 2) << ")\">" << escape(ylabel) << "</text>\n";
  }
  void no_data() { text(kWidth / 2, kHeight / 2, "no data", "middle", 16); }
  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
};

std::vector<std::vector<std::string>> csv_rows(std::string_view text, std::vector<std::string>& header) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      header = cells;
      first = false;
    } else {
      rows.push_back(std::move(cells));
    }
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("missing column '" + std::string(name) + "'", 1);
}

double cell(const std::vector<std::string>& row, std::size_t col, std::size_t line) {
  if (col >= row.size()) throw ParseError("short row", line);
  try {
    return std::stod(row[col]);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + row[col] + "'", line);
  }
}

std::string scatter(std::string_view input) {
  Svg svg("Text BLEU vs latent cosine");
  std::vector<std::string> header;
  const auto rows = csv_rows(input, header);
  Axes a{0, 1, -1, 1};
  svg.axes(a, "text BLEU", "latent cosine");
  if (rows.empty()) {
    svg.no_data();
    return svg.finish();
  }
  const std::size_t bx = column(header, "text_bleu"), cx = column(header, "latent_cosine");
  const bool has_pre = std::find(header.begin(), header.end(), "pretrain_cosine") != header.end();
  const std::size_t px = has_pre ? column(header, "pretrain_cosine") : 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double b = std::clamp(cell(rows[i], bx, i + 2), 0.0, 1.0);
    if (has_pre) svg.circle(a.px(b), a.py(std::clamp(cell(rows[i], px, i + 2), -1.0, 1.0)), 1.6, "#999999");
    svg.circle(a.px(b), a.py(std::clamp(cell(rows[i], cx, i + 2), -1.0, 1.0)), 1.6, "#1f5fbf");
  }
  svg.circle(kWidth - 170, kTop + 8, 4, "#1f5fbf");
  svg.text(kWidth - 160, kTop + 12, "after joint training");
  if (has_pre) {
    svg.circle(kWidth - 170, kTop + 24, 4, "#999999");
    svg.text(kWidth - 160, kTop + 28, "pre-trained");
  }
  return svg.finish();
}

std::string histogram(std::string_view input) {
  Svg svg("Latent cosine similarity distribution");
  const auto records = parse_metrics(input);
  std::vector<double> counts(kHistogramBins, 0.0);
  std::size_t used = 0;
  for (const auto& r : records) {
    if (r.stage != "eval" || !r.spread || r.spread->histogram.size() != kHistogramBins) continue;
    for (std::size_t b = 0; b < kHistogramBins; ++b) counts[b] += static_cast<double>(r.spread->histogram[b]);
    ++used;
  }
  double total = 0;
  for (double c : counts) total += c;
  Axes a{-1, 1, 0, 1};
  if (used == 0 || total == 0) {
    svg.axes(a, "cosine", "fraction of pairs");
    svg.no_data();
    return svg.finish();
  }
  double peak = 0;
  for (double& c : counts) peak = std::max(peak, c /= total);
  a.y1 = std::max(0.05, std::ceil(peak * 20) / 20);
  svg.axes(a, "cosine", "fraction of pairs");
  const double w = 2.0 / kHistogramBins;
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    const double x = histogram_bin_left(b);
    svg.rect(a.px(x), a.py(counts[b]), a.px(x + w) - a.px(x) - 1, a.py(0) - a.py(counts[b]), "#1f5fbf");
  }
  return svg.finish();
}

std::string sentiment_bars(std::string_view input) {
  Svg svg("Sentiment distribution: reference vs generated");
  const auto records = parse_metrics(input);
  SentimentDistribution ref{}, gen{};
  std::size_t used = 0;
  for (const auto& r : records) {
    if (r.stage != "eval" || !r.sentiment) continue;
    for (std::size_t c = 0; c < kSentimentCount; ++c) {
      ref[c] += r.sentiment->reference[c];
      gen[c] += r.sentiment->generated[c];
    }
    ++used;
  }
  Axes a{0, static_cast<double>(kSentimentCount), 0, 1};
  if (used == 0) {
    svg.axes(a, "sentiment", "share");
    svg.no_data();
    return svg.finish();
  }
  double peak = 0;
  for (std::size_t c = 0; c < kSentimentCount; ++c) {
    ref[c] /= static_cast<double>(used);
    gen[c] /= static_cast<double>(used);
    peak = std::max({peak, ref[c], gen[c]});
  }
  a.y1 = std::max(0.05, std::ceil(peak * 10) / 10);
  svg.axes(a, "", "share");
  for (std::size_t c = 0; c < kSentimentCount; ++c) {
    const double x = static_cast<double>(c);
    svg.rect(a.px(x + 0.12), a.py(ref[c]), a.px(x + 0.5) - a.px(x + 0.12), a.py(0) - a.py(ref[c]), "#999999");
    svg.rect(a.px(x + 0.5), a.py(gen[c]), a.px(x + 0.88) - a.px(x + 0.5), a.py(0) - a.py(gen[c]), "#1f5fbf");
    svg.text(a.px(x + 0.5), kHeight - kBottom + 30, to_string(static_cast<Sentiment>(c)), "middle", 10);
  }
  const double r = pearson(ref, gen);
  svg.text(kWidth - kRight, kTop + 12, std::isfinite(r) ? "Pearson r = " + num(r) : "Pearson r undefined", "end");
  svg.rect(kLeft + 10, kTop + 2, 10, 10, "#999999");
  svg.text(kLeft + 24, kTop + 12, "reference");
  svg.rect(kLeft + 100, kTop + 2, 10, 10, "#1f5fbf");
  svg.text(kLeft + 114, kTop + 12, "generated");
  return svg.finish();
}

std::string sweep_curve(std::string_view input) {
  std::vector<std::string> header;
  const auto rows = csv_rows(input, header);
  std::string param = "value";
  std::vector<std::pair<double, double>> pts;
  if (!rows.empty()) {
    const std::size_t vx = column(header, "value"), bx = column(header, "mean_bleu");
    const std::size_t px = column(header, "param");
    param = rows.front().at(px);
    for (std::size_t i = 0; i < rows.size(); ++i) pts.emplace_back(cell(rows[i], vx, i + 2), cell(rows[i], bx, i + 2));
    std::sort(pts.begin(), pts.end());
  }
  Svg svg("Mean BLEU vs " + param);
  if (pts.empty()) {
    svg.axes(Axes{0, 1, 0, 1}, param, "mean BLEU");
    svg.no_data();
    return svg.finish();
  }
  // alpha spans decades, so use a log axis when every value is positive.
  const bool log_x = param == "alpha" && pts.front().first > 0;
  auto xv = [&](double v) { return log_x ? std::log10(v) : v; };
  double x0 = xv(pts.front().first), x1 = xv(pts.back().first), y1 = 0;
  for (const auto& p : pts) y1 = std::max(y1, p.second);
  if (x1 == x0) x1 = x0 + 1;
  Axes a{x0, x1, 0, std::max(1.0, std::ceil(y1))};
  svg.axes(a, log_x ? "log10 " + param : param, "mean BLEU");
  std::vector<std::pair<double, double>> screen;
  for (const auto& [x, y] : pts) {
    screen.emplace_back(a.px(xv(x)), a.py(y));
    svg.circle(a.px(xv(x)), a.py(y), 4, "#1f5fbf");
  }
  svg.polyline(screen, "#1f5fbf");
  return svg.finish();
}

}  // namespace

std::optional<PlotKind> parse_plot_kind(std::string_view s) {
  if (s == "similarity_scatter") return PlotKind::kSimilarityScatter;
  if (s == "similarity_histogram") return PlotKind::kSimilarityHistogram;
  if (s == "sentiment_bars") return PlotKind::kSentimentBars;
  if (s == "sweep_curve") return PlotKind::kSweepCurve;
  return std::nullopt;
}

std::string render_plot(PlotKind kind, std::string_view input_text) {
  switch (kind) {
    case PlotKind::kSimilarityScatter: return scatter(input_text);
    case PlotKind::kSimilarityHistogram: return histogram(input_text);
    case PlotKind::kSentimentBars: return sentiment_bars(input_text);
    case PlotKind::kSweepCurve: return sweep_curve(input_text);
  }
  throw InvalidConfig("unknown plot kind");
}

void cmd_plot(const std::filesystem::path& input, std::string_view kind, const std::filesystem::path& out) {
  const auto k = parse_plot_kind(kind);
  if (!k) throw InvalidConfig("unknown plot kind '" + std::string(kind) + "'");
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot read " + input.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string svg = render_plot(*k, buf.str());
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream o(out, std::ios::binary);
  if (!o) throw IoError("cannot write " + out.string());
  o << svg;
}

}  // namespace gtp
