#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fdfl/freq.hpp"
#include "fdfl/nn.hpp"

namespace fdfl::data {

struct SampleRecord {
  std::string path;
  std::string video_id;
  std::string frame_id;
  int label = 0;
  std::string manipulation_tag;
};

struct CorpusManifest {
  std::vector<SampleRecord> records;
  std::string split;  // train / val / test
  int n_real = 0;
  int n_fake = 0;
};

// Samples up to n frames per video (evenly spaced over the sorted frame
// names) from a root laid out as root/{real|fake}/<video_id>/<frame>.png.
CorpusManifest build_manifest(const std::string& root, const std::string& split,
                              int frames_per_real_video = 80,
                              int frames_per_fake_video = 20);

// JSON lines, one SampleRecord per line.
void save_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

struct SyntheticConfig {
  int image_size = 256;  // multiple of 8
  int n_videos_train = 24;
  int n_videos_val = 12;
  int n_videos_test = 12;
  int frames_per_video = 6;
  // mid/high DCT bands (u+v >= 4) of the Y plane perturbed in fake images
  std::vector<std::pair<int, int>> perturbed_bands = {{2, 2}, {0, 4}, {4, 0}, {3, 3}};
  double amplitude = 0.03 * 8.0 * 255.0;  // DCT units, 3% of the DC range
  uint64_t seed = 7;
  int jpeg_quality = 0;  // 0 = lossless PNG, otherwise re-encode as JPEG

  void validate() const;
};

// Writes out_root/{train,val,test}/{real,fake}/<video>/<frame>.png plus one
// manifest.jsonl per split. Class-0 images are smooth random fields grouped
// into pseudo-videos; class-1 images add band-limited DCT perturbations with
// per-block random sign, so the class signal is spectral, not photometric.
// Fully determined by (cfg, out_root).
std::vector<CorpusManifest> synth_generate(const SyntheticConfig& cfg,
                                           const std::string& out_root);

// Epoch = per-class shuffles packed into batches that each contain at least
// one sample of every class. When the minority class cannot reach every
// batch of a full permutation, the epoch ends once it is exhausted.
class MixedBatchSampler {
 public:
  MixedBatchSampler(const CorpusManifest& manifest, int batch_size,
                    uint64_t seed);

  std::vector<std::vector<int>> next_epoch();

 private:
  std::vector<int> real_idx_, fake_idx_;
  int batch_size_;
  nn::Rng rng_;
};

}  // namespace fdfl::data
