#include "cape/plot.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "cape/error.hpp"
#include "cape/metrics.hpp"

namespace cape::plot {

namespace {

constexpr double kWidth = 640, kHeight = 360, kMargin = 40;
constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"};
constexpr const char* kOptionNames[] = {"A", "B", "C", "D", "E"};

std::string color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string num(double v) { return format_number(v, 2); }

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

class Svg {
 public:
  Svg(std::string title, bool deterministic) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    if (!deterministic) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      char buf[32];
      std::tm tm{};
      gmtime_r(&now, &tm);
      std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
      out_ << "<!-- generated by cape at " << buf << " -->\n";
    }
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out_ << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
         << "</text>\n";
    out_ << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
         << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    out_ << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
         << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  }

  void polyline(const std::vector<Point>& pts, const std::string& stroke) {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out_ << (i ? " " : "") << num(pts[i].x) << "," << num(pts[i].y);
    out_ << "\"/>\n";
  }

  void polygon(const std::vector<Point>& pts, const std::string& fill) {
    out_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.8\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out_ << (i ? " " : "") << num(pts[i].x) << "," << num(pts[i].y);
    out_ << "\"/>\n";
  }

  void bar(double x, double y, double w, double h, const std::string& fill) {
    out_ << "<rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
         << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }

  void label(double x, double y, std::string_view text, int size = 10) {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"middle\" font-size=\"" << size
         << "\">" << escape(text) << "</text>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

// Maps data coordinates into the plotting area.
struct Frame {
  double x0, x1, y0, y1;
  double left = kMargin, right = kWidth - kMargin;

  double px(double x) const { return left + (x - x0) / (x1 - x0 == 0 ? 1 : x1 - x0) * (right - left); }
  double py(double y) const {
    return kHeight - kMargin - (y - y0) / (y1 - y0 == 0 ? 1 : y1 - y0) * (kHeight - 2 * kMargin);
  }
};

}  // namespace

PlotKind parse_plot_kind(std::string_view name) {
  if (name == "trajectory-lines") return PlotKind::kTrajectoryLines;
  if (name == "ocean-bars") return PlotKind::kOceanBars;
  if (name == "diff-distribution") return PlotKind::kDiffDistribution;
  if (name == "option-area") return PlotKind::kOptionArea;
  throw InvalidArgument("unknown plot kind '" + std::string(name) + "'");
}

std::string plot_kind_name(PlotKind kind) {
  switch (kind) {
    case PlotKind::kTrajectoryLines: return "trajectory-lines";
    case PlotKind::kOceanBars: return "ocean-bars";
    case PlotKind::kDiffDistribution: return "diff-distribution";
    case PlotKind::kOptionArea: return "option-area";
  }
  return "unknown";
}

std::vector<Point> quadratic_spline(const std::vector<Point>& pts, int samples) {
  if (pts.size() < 3 || samples < 1) return pts;
  std::vector<Point> out{pts.front()};
  auto mid = [](Point a, Point b) { return Point{(a.x + b.x) / 2, (a.y + b.y) / 2}; };
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Point p0 = i == 1 ? pts[0] : mid(pts[i - 1], pts[i]);
    const Point p1 = pts[i];
    const Point p2 = i + 2 == pts.size() ? pts[i + 1] : mid(pts[i], pts[i + 1]);
    for (int s = 1; s <= samples; ++s) {
      const double t = static_cast<double>(s) / samples;
      const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, c = t * t;
      out.push_back({a * p0.x + b * p1.x + c * p2.x, a * p0.y + b * p1.y + c * p2.y});
    }
  }
  return out;
}

PlotOutput trajectory_lines(const std::vector<ScoringTrajectory>& trajs, bool deterministic) {
  if (trajs.empty()) throw InvalidArgument("plot: no trajectories");
  PlotOutput out;
  out.csv = "run_id,position,item_id,score\n";
  std::size_t m = 0;
  for (const auto& t : trajs) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      out.csv += csv_field(t.run_id) + "," + std::to_string(k + 1) + "," +
                 csv_field(k < t.item_ids.size() ? t.item_ids[k] : "") + "," + std::to_string(t.scores[k]) + "\n";
    }
    m = std::max(m, t.size());
  }
  Svg svg("Scoring trajectories", deterministic);
  const Frame f{1, static_cast<double>(std::max<std::size_t>(m, 2)), 1, 5};
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    std::vector<Point> pts;
    for (std::size_t k = 0; k < trajs[i].size(); ++k) {
      pts.push_back({f.px(static_cast<double>(k + 1)), f.py(trajs[i].scores[k])});
    }
    svg.polyline(pts, color(i));
  }
  out.svg = svg.finish();
  return out;
}

PlotOutput ocean_bars(const std::vector<std::pair<std::string, OceanScore>>& settings, bool deterministic) {
  if (settings.empty()) throw InvalidArgument("plot: no OCEAN vectors");
  PlotOutput out;
  out.csv = "setting,trait,score\n";
  for (const auto& [name, score] : settings) {
    for (Trait t : kAllTraits) {
      out.csv += csv_field(name) + "," + std::string(1, trait_letter(t)) + "," + format_number(score[t]) + "\n";
    }
  }
  Svg svg("OCEAN scores", deterministic);
  const Frame f{0, 5, 0, 5};
  const double group_w = (kWidth - 2 * kMargin) / 5.0;
  const double bar_w = group_w * 0.8 / static_cast<double>(settings.size());
  for (int g = 0; g < 5; ++g) {
    const Trait t = kAllTraits[g];
    for (std::size_t s = 0; s < settings.size(); ++s) {
      const double v = settings[s].second[t];
      const double x = kMargin + g * group_w + group_w * 0.1 + static_cast<double>(s) * bar_w;
      svg.bar(x, f.py(v), bar_w, f.py(0) - f.py(v), color(s));
    }
    svg.label(kMargin + (g + 0.5) * group_w, kHeight - kMargin + 15, std::string(1, trait_letter(t)));
  }
  out.svg = svg.finish();
  return out;
}

PlotOutput diff_distribution(const DiffHistogram& hist, bool deterministic) {
  if (hist.total() == 0) throw InvalidArgument("plot: empty histogram");
  PlotOutput out;
  out.csv = "bucket,count\n";
  std::size_t peak = 0;
  for (int b = -4; b <= 4; ++b) {
    const auto it = hist.buckets.find(b);
    const std::size_t c = it == hist.buckets.end() ? 0 : it->second;
    out.csv += std::to_string(b) + "," + std::to_string(c) + "\n";
    peak = std::max(peak, c);
  }
  Svg svg("Score differences (dependent - free)", deterministic);
  const Frame f{-4.5, 4.5, 0, static_cast<double>(peak)};
  const double w = (f.px(1) - f.px(0)) * 0.8;
  for (int b = -4; b <= 4; ++b) {
    const auto it = hist.buckets.find(b);
    if (it != hist.buckets.end() && it->second > 0) {
      const double v = static_cast<double>(it->second);
      svg.bar(f.px(b) - w / 2, f.py(v), w, f.py(0) - f.py(v), color(0));
    }
    svg.label(f.px(b), kHeight - kMargin + 15, std::to_string(b));
  }
  out.svg = svg.finish();
  return out;
}

PlotOutput option_area(const std::vector<std::pair<std::string, std::vector<Transcript>>>& series, int bin_size,
                       bool spline, bool deterministic) {
  if (series.empty()) throw InvalidArgument("plot: no transcript series");
  if (bin_size < 1) throw InvalidArgument("plot: bin size must be >= 1");
  PlotOutput out;
  out.csv = "series,bin_start,bin_end,option,count\n";
  Svg svg("Option choices", deterministic);
  const double panel_w = (kWidth - 2 * kMargin) / static_cast<double>(series.size());

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, transcripts] = series[s];
    std::size_t m = 0;
    for (const auto& t : transcripts) m = std::max(m, t.entries.size());
    if (m == 0) throw InvalidArgument("plot: series '" + name + "' has no entries");
    const std::size_t bins = (m + bin_size - 1) / bin_size;
    std::vector<std::array<std::size_t, 5>> counts(bins, std::array<std::size_t, 5>{});
    for (const auto& t : transcripts) {
      for (std::size_t k = 0; k < t.entries.size(); ++k) {
        const auto& e = t.entries[k];
        if (e.semantic_index) ++counts[k / bin_size][static_cast<std::size_t>(*e.semantic_index)];
      }
    }
    for (std::size_t b = 0; b < bins; ++b) {
      const std::size_t lo = b * bin_size + 1, hi = std::min(m, (b + 1) * bin_size);
      for (int o = 0; o < 5; ++o) {
        out.csv += csv_field(name) + "," + std::to_string(lo) + "," + std::to_string(hi) + "," + kOptionNames[o] +
                   "," + std::to_string(counts[b][o]) + "\n";
      }
    }

    // Stacked shares per bin, optionally smoothed, drawn as areas.
    Frame f{0, static_cast<double>(std::max<std::size_t>(bins, 2) - 1), 0, 1};
    f.left = kMargin + static_cast<double>(s) * panel_w + 4;
    f.right = kMargin + static_cast<double>(s + 1) * panel_w - 4;
    std::vector<std::vector<Point>> bounds(6);
    for (std::size_t b = 0; b < bins; ++b) {
      std::size_t total = 0;
      for (auto c : counts[b]) total += c;
      double acc = 0.0;
      bounds[0].push_back({static_cast<double>(b), 0.0});
      for (int o = 0; o < 5; ++o) {
        acc += total ? static_cast<double>(counts[b][o]) / static_cast<double>(total) : 0.0;
        bounds[o + 1].push_back({static_cast<double>(b), acc});
      }
    }
    for (auto& line : bounds) {
      if (spline) line = quadratic_spline(line);
      for (auto& p : line) p = {f.px(p.x), f.py(std::clamp(p.y, 0.0, 1.0))};
    }
    for (int o = 0; o < 5; ++o) {
      std::vector<Point> poly = bounds[o + 1];
      poly.insert(poly.end(), bounds[o].rbegin(), bounds[o].rend());
      svg.polygon(poly, color(o));
    }
    svg.label((f.left + f.right) / 2, kHeight - kMargin + 15, name);
  }
  out.svg = svg.finish();
  return out;
}

}  // namespace cape::plot
