#pragma once

#include <string>
#include <utility>
#include <vector>

namespace fdfl::metrics {

// One scored frame; all frames of a video must share a label.
struct ScoredFrame {
  std::string video_id;
  std::string frame_id;
  double score = 0.0;  // probability of manipulation, in [0,1]
  int label = 0;       // 0 natural, 1 manipulated
};

struct MetricsReport {
  double auc = 0.0;
  double pauc_at_0_1 = 0.0;
  double accuracy = 0.0;
  int n_videos = 0;
  int n_frames = 0;
  std::string level;  // "frame" or "video"

  std::string to_json() const;
};

// Mann-Whitney statistic with midrank tie handling:
// P(score_pos > score_neg) + 0.5 * P(tie).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Trapezoidal area under the ROC curve restricted to FPR in [0, max_fpr],
// linearly interpolated at max_fpr, divided by max_fpr.
double pauc(const std::vector<double>& scores, const std::vector<int>& labels,
            double max_fpr = 0.1);

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

// ROC polyline (fpr, tpr) including (0,0) and (1,1); tie groups form one
// diagonal segment. Exposed for plotting.
std::vector<std::pair<double, double>> roc_curve(const std::vector<double>& scores,
                                                 const std::vector<int>& labels);

// Mean frame score per video; the shared frame label becomes the video label.
// Throws on label inconsistency within a video. Videos ordered by id.
void video_aggregate(const std::vector<ScoredFrame>& frames,
                     std::vector<double>* scores, std::vector<int>* labels,
                     std::vector<std::string>* video_ids = nullptr);

MetricsReport frame_report(const std::vector<ScoredFrame>& frames);
MetricsReport video_report(const std::vector<ScoredFrame>& frames);

// CSV with header video_id,frame_id,label,score.
void save_scores_csv(const std::vector<ScoredFrame>& frames,
                     const std::string& path);
std::vector<ScoredFrame> load_scores_csv(const std::string& path);

}  // namespace fdfl::metrics
