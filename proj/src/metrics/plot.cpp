#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "qtransfer/errors.hpp"
#include "qtransfer/metrics.hpp"

namespace qtransfer {
namespace {

constexpr double kWidth = 800, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

double metric_value(const EpisodeRecord& r, Metric m) {
  switch (m) {
    case Metric::kReward: return r.reward;
    case Metric::kDuration: return static_cast<double>(r.duration_steps);
    case Metric::kLoss: return r.mean_loss;
  }
  return 0.0;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

Metric parse_metric(const std::string& name) {
  if (name == "reward") return Metric::kReward;
  if (name == "duration") return Metric::kDuration;
  if (name == "loss") return Metric::kLoss;
  throw ConfigError("unknown metric '" + name + "' (expected reward, duration or loss)");
}

std::string metric_name(Metric metric) {
  switch (metric) {
    case Metric::kReward: return "reward";
    case Metric::kDuration: return "duration";
    case Metric::kLoss: return "loss";
  }
  return "?";
}

void emit_plot(const std::vector<EpisodeRecord>& records, Metric metric,
               const std::filesystem::path& path) {
  std::vector<double> values;
  values.reserve(records.size());
  for (const auto& r : records) values.push_back(metric_value(r, metric));
  const std::vector<double> smooth = moving_average(values);

  double lo = 0.0, hi = 1.0;
  if (!values.empty()) {
    lo = std::min(0.0, *std::min_element(values.begin(), values.end()));
    hi = *std::max_element(values.begin(), values.end());
  }
  if (hi <= lo) hi = lo + 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(values.size()) - 1.0);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](std::size_t i) { return kLeft + pw * static_cast<double>(i) / n; };
  auto py = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

  auto polyline = [&](const std::vector<double>& ys, std::size_t from,
                      const char* color, double width) {
    std::string pts;
    for (std::size_t i = from; i < ys.size(); ++i) {
      pts += fmt(px(i)) + "," + fmt(py(ys[i])) + " ";
    }
    if (pts.empty()) return std::string();
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"" + fmt(width) + "\" points=\"" + pts + "\"/>\n";
  };

  const std::string name = metric_name(metric);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << name
      << " vs episode</text>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\""
      << kLeft + pw << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py(v) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << label(v) << "</text>\n";
  }
  out << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 20
      << "\" font-family=\"sans-serif\" font-size=\"11\">1</text>\n"
      << "<text x=\"" << kLeft + pw << "\" y=\"" << kHeight - 20
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << values.size() << "</text>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << "episode</text>\n";
  out << polyline(values, 0, "#9db7d5", 1.0);
  // The average is zero-filled for the first 99 points; draw only the
  // defined part.
  out << polyline(smooth, std::min<std::size_t>(99, smooth.size()), "#c0392b", 2.0);
  out << "<text x=\"" << kLeft + pw - 4 << "\" y=\"" << kTop + 14
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
      << "fill=\"#c0392b\">moving average (100)</text>\n"
      << "</svg>\n";
  if (!out) throw IoError("error while writing " + path.string());
}

}  // namespace qtransfer
