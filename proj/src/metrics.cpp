#include "fdfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fdfl/tensor.hpp"

namespace fdfl::metrics {
namespace {

void require_two_classes(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  check(scores.size() == labels.size() && !scores.empty(),
        "scores/labels must be non-empty and equal length");
  int pos = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    check(labels[i] == 0 || labels[i] == 1, "labels must be 0/1");
    check(std::isfinite(scores[i]), "scores must be finite");
    pos += labels[i];
  }
  check(pos > 0 && pos < static_cast<int>(labels.size()),
        "metric needs at least one sample of each class");
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require_two_classes(scores, labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  size_t n_pos = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<std::pair<double, double>> roc_curve(const std::vector<double>& scores,
                                                 const std::vector<int>& labels) {
  require_two_classes(scores, labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const double n_pos = static_cast<double>(
      std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(n) - n_pos;

  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  double tp = 0, fp = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1)
        ++tp;
      else
        ++fp;
    }
    pts.emplace_back(fp / n_neg, tp / n_pos);
    i = j;
  }
  return pts;
}

double pauc(const std::vector<double>& scores, const std::vector<int>& labels,
            double max_fpr) {
  check(max_fpr > 0.0 && max_fpr <= 1.0, "max_fpr must be in (0, 1]");
  const auto pts = roc_curve(scores, labels);
  double area = 0.0;
  for (size_t k = 1; k < pts.size(); ++k) {
    const auto [x0, y0] = pts[k - 1];
    const auto [x1, y1] = pts[k];
    if (x0 >= max_fpr) break;
    if (x1 <= max_fpr) {
      area += 0.5 * (y0 + y1) * (x1 - x0);
    } else {
      // interpolate the curve at max_fpr
      const double t = (max_fpr - x0) / (x1 - x0);
      const double ym = y0 + t * (y1 - y0);
      area += 0.5 * (y0 + ym) * (max_fpr - x0);
      break;
    }
  }
  return area / max_fpr;
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold) {
  check(scores.size() == labels.size() && !scores.empty(),
        "scores/labels must be non-empty and equal length");
  int correct = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= threshold ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

void video_aggregate(const std::vector<ScoredFrame>& frames,
                     std::vector<double>* scores, std::vector<int>* labels,
                     std::vector<std::string>* video_ids) {
  check(!frames.empty(), "video_aggregate: empty frame list");
  struct Agg {
    double sum = 0.0;
    int n = 0;
    int label = -1;
  };
  std::map<std::string, Agg> by_video;
  for (const auto& f : frames) {
    auto& a = by_video[f.video_id];
    if (a.label == -1) a.label = f.label;
    check(a.label == f.label,
          "inconsistent labels within video " + f.video_id);
    a.sum += f.score;
    ++a.n;
  }
  scores->clear();
  labels->clear();
  if (video_ids) video_ids->clear();
  for (const auto& [vid, a] : by_video) {
    scores->push_back(a.sum / a.n);
    labels->push_back(a.label);
    if (video_ids) video_ids->push_back(vid);
  }
}

namespace {

MetricsReport build_report(const std::vector<double>& scores,
                           const std::vector<int>& labels, int n_videos,
                           int n_frames, const std::string& level) {
  MetricsReport r;
  r.auc = roc_auc(scores, labels);
  r.pauc_at_0_1 = pauc(scores, labels, 0.1);
  r.accuracy = accuracy(scores, labels);
  r.n_videos = n_videos;
  r.n_frames = n_frames;
  r.level = level;
  return r;
}

}  // namespace

MetricsReport frame_report(const std::vector<ScoredFrame>& frames) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(frames.size());
  labels.reserve(frames.size());
  std::vector<double> vscores;
  std::vector<int> vlabels;
  video_aggregate(frames, &vscores, &vlabels);  // validates label consistency
  for (const auto& f : frames) {
    scores.push_back(f.score);
    labels.push_back(f.label);
  }
  return build_report(scores, labels, static_cast<int>(vscores.size()),
                      static_cast<int>(frames.size()), "frame");
}

MetricsReport video_report(const std::vector<ScoredFrame>& frames) {
  std::vector<double> vscores;
  std::vector<int> vlabels;
  video_aggregate(frames, &vscores, &vlabels);
  return build_report(vscores, vlabels, static_cast<int>(vscores.size()),
                      static_cast<int>(frames.size()), "video");
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["auc"] = auc;
  j["pauc_at_0_1"] = pauc_at_0_1;
  j["accuracy"] = accuracy;
  j["n_videos"] = n_videos;
  j["n_frames"] = n_frames;
  j["level"] = level;
  return j.dump();
}

void save_scores_csv(const std::vector<ScoredFrame>& frames,
                     const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot open scores csv for writing: " + path);
  f << "video_id,frame_id,label,score\n";
  f.precision(17);
  for (const auto& s : frames)
    f << s.video_id << "," << s.frame_id << "," << s.label << "," << s.score
      << "\n";
}

std::vector<ScoredFrame> load_scores_csv(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open scores csv: " + path);
  std::string line;
  check(static_cast<bool>(std::getline(f, line)), "empty scores csv: " + path);
  check(line == "video_id,frame_id,label,score",
        "unexpected scores csv header in " + path);
  std::vector<ScoredFrame> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ScoredFrame s;
    std::string label, score;
    check(static_cast<bool>(std::getline(ss, s.video_id, ',')) &&
              static_cast<bool>(std::getline(ss, s.frame_id, ',')) &&
              static_cast<bool>(std::getline(ss, label, ',')) &&
              static_cast<bool>(std::getline(ss, score, ',')),
          "malformed scores csv row: " + line);
    s.label = std::stoi(label);
    s.score = std::stod(score);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fdfl::metrics
