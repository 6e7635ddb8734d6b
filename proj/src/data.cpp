#include "fdfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fdfl/imageio.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace fdfl::data {
namespace {

std::vector<int> evenly_spaced(int available, int wanted) {
  std::vector<int> idx;
  if (available <= wanted) {
    for (int i = 0; i < available; ++i) idx.push_back(i);
    return idx;
  }
  for (int i = 0; i < wanted; ++i)
    idx.push_back(static_cast<int>(
        static_cast<int64_t>(i) * available / wanted));
  return idx;
}

void scan_class(const fs::path& class_dir, int label, int frames_per_video,
                CorpusManifest* m) {
  check(fs::is_directory(class_dir),
        "missing class directory: " + class_dir.string());
  std::vector<fs::path> videos;
  for (const auto& e : fs::directory_iterator(class_dir))
    if (e.is_directory()) videos.push_back(e.path());
  std::sort(videos.begin(), videos.end());
  for (const auto& video : videos) {
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(video))
      if (e.is_regular_file()) frames.push_back(e.path());
    std::sort(frames.begin(), frames.end());
    for (int i : evenly_spaced(static_cast<int>(frames.size()), frames_per_video)) {
      SampleRecord r;
      r.path = frames[i].string();
      r.video_id = video.filename().string();
      r.frame_id = frames[i].stem().string();
      r.label = label;
      m->records.push_back(std::move(r));
      label == 0 ? ++m->n_real : ++m->n_fake;
    }
  }
}

}  // namespace

CorpusManifest build_manifest(const std::string& root, const std::string& split,
                              int frames_per_real_video,
                              int frames_per_fake_video) {
  check(frames_per_real_video >= 1 && frames_per_fake_video >= 1,
        "frames per video must be >= 1");
  CorpusManifest m;
  m.split = split;
  scan_class(fs::path(root) / "real", 0, frames_per_real_video, &m);
  scan_class(fs::path(root) / "fake", 1, frames_per_fake_video, &m);
  check(!m.records.empty(), "empty corpus under " + root);
  return m;
}

void save_manifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot open manifest for writing: " + path);
  // store image paths relative to the manifest so the corpus is relocatable
  // and byte-identical across output roots
  const fs::path base = fs::absolute(path).parent_path();
  for (const auto& r : m.records) {
    std::error_code ec;
    fs::path rel = fs::relative(fs::absolute(r.path), base, ec);
    const bool under = !ec && !rel.empty() && *rel.begin() != "..";
    json j;
    j["path"] = under ? rel.generic_string() : r.path;
    j["video_id"] = r.video_id;
    j["frame_id"] = r.frame_id;
    j["label"] = r.label;
    j["manipulation_tag"] = r.manipulation_tag;
    j["split"] = m.split;
    f << j.dump() << "\n";
  }
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  CorpusManifest m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    SampleRecord r;
    r.path = j.at("path").get<std::string>();
    if (fs::path(r.path).is_relative()) r.path = (base / r.path).string();
    r.video_id = j.at("video_id").get<std::string>();
    r.frame_id = j.at("frame_id").get<std::string>();
    r.label = j.at("label").get<int>();
    r.manipulation_tag = j.value("manipulation_tag", "");
    if (m.split.empty()) m.split = j.value("split", "");
    r.label == 0 ? ++m.n_real : ++m.n_fake;
    m.records.push_back(std::move(r));
  }
  check(!m.records.empty(), "empty manifest: " + path);
  return m;
}

void SyntheticConfig::validate() const {
  check(image_size >= 16 && image_size % 8 == 0,
        "image_size must be a multiple of 8, >= 16");
  check(n_videos_train >= 1 && n_videos_val >= 1 && n_videos_test >= 1,
        "video counts must be >= 1");
  check(frames_per_video >= 1, "frames_per_video must be >= 1");
  check(amplitude >= 0.0, "amplitude must be >= 0");
  check(!perturbed_bands.empty(), "perturbed_bands must be non-empty");
  for (auto [u, v] : perturbed_bands) {
    check(u >= 0 && u < 8 && v >= 0 && v < 8, "bands must lie in 0..7");
    check(u + v >= 4, "perturbed bands must be mid/high frequency (u+v >= 4)");
  }
}

namespace {

using freq::ImageRGB;

// Smooth scalar field: white noise on a coarse grid, bilinearly upsampled,
// plus a random linear ramp. Drives both classes' base imagery.
struct SmoothField {
  int grid_h, grid_w, cell;
  std::vector<double> node;
  double gx, gy, offset;

  SmoothField(int size, int cell_size, double noise_amp, double ramp_amp,
              double offs, nn::Rng& rng)
      : grid_h(size / cell_size + 2), grid_w(size / cell_size + 2),
        cell(cell_size), offset(offs) {
    node.resize(static_cast<size_t>(grid_h) * grid_w);
    for (auto& v : node) v = rng.normal() * noise_amp;
    gx = (rng.uniform() * 2.0 - 1.0) * ramp_amp / size;
    gy = (rng.uniform() * 2.0 - 1.0) * ramp_amp / size;
  }

  double at(int y, int x) const {
    const double fy = static_cast<double>(y) / cell;
    const double fx = static_cast<double>(x) / cell;
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const double wy = fy - y0, wx = fx - x0;
    const auto n = [&](int yy, int xx) {
      return node[static_cast<size_t>(yy) * grid_w + xx];
    };
    const double top = n(y0, x0) * (1 - wx) + n(y0, x0 + 1) * wx;
    const double bot = n(y0 + 1, x0) * (1 - wx) + n(y0 + 1, x0 + 1) * wx;
    return offset + top * (1 - wy) + bot * wy + gx * x + gy * y;
  }
};

// Orthonormal DCT basis patch for band (u,v), so adding amp*patch to the
// pixels adds exactly amp to coefficient (u,v) of that block.
std::array<double, 64> basis_patch(int u, int v) {
  std::array<double, 64> p{};
  const double pi = std::acos(-1.0);
  const double cu = u == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
  const double cv = v == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y)
      p[static_cast<size_t>(x) * 8 + y] = cu * cv *
                                          std::cos((2 * x + 1) * u * pi / 16.0) *
                                          std::cos((2 * y + 1) * v * pi / 16.0);
  return p;
}

uint64_t mix_tag(uint64_t seed, const std::string& tag) {
  uint64_t h = seed;
  for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

ImageRGB render_frame(const SyntheticConfig& cfg, const std::string& split,
                      int label, int video, int frame,
                      const std::vector<std::array<double, 64>>& patches) {
  const int size = cfg.image_size;
  // video-level base + frame-level jitter, keyed so every frame is an
  // independent function of (seed, split, class, video, frame)
  nn::Rng video_rng(mix_tag(cfg.seed, split + "/v" + std::to_string(label) +
                                          "_" + std::to_string(video)));
  SmoothField base(size, 16, 28.0, 40.0, 128.0, video_rng);
  double chroma[3];
  for (double& c : chroma) c = video_rng.normal() * 10.0;

  nn::Rng frame_rng(mix_tag(cfg.seed, split + "/v" + std::to_string(label) +
                                          "_" + std::to_string(video) + "/f" +
                                          std::to_string(frame)));
  SmoothField jitter(size, 16, 8.0, 10.0, 0.0, frame_rng);

  ImageRGB img;
  img.height = size;
  img.width = size;
  img.pixels.resize(static_cast<size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = base.at(y, x) + jitter.at(y, x);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v + chroma[c];
    }

  if (label == 1 && cfg.amplitude > 0.0) {
    // per-block random sign per band; added equally to R/G/B so only the
    // luma plane carries the injected coefficients
    for (int by = 0; by < size; by += 8)
      for (int bx = 0; bx < size; bx += 8)
        for (const auto& patch : patches) {
          const double s = frame_rng.uniform() < 0.5 ? -1.0 : 1.0;
          for (int dy = 0; dy < 8; ++dy)
            for (int dx = 0; dx < 8; ++dx) {
              const double add =
                  cfg.amplitude * s * patch[static_cast<size_t>(dy) * 8 + dx];
              for (int c = 0; c < 3; ++c) img.at(by + dy, bx + dx, c) += add;
            }
        }
  }

  for (auto& p : img.pixels) p = std::clamp(p, 0.0, 255.0);
  return img;
}

}  // namespace

std::vector<CorpusManifest> synth_generate(const SyntheticConfig& cfg,
                                           const std::string& out_root) {
  cfg.validate();
  std::vector<std::array<double, 64>> patches;
  for (auto [u, v] : cfg.perturbed_bands) patches.push_back(basis_patch(u, v));

  std::string band_tag;
  for (auto [u, v] : cfg.perturbed_bands)
    band_tag += (band_tag.empty() ? "" : "+") + std::to_string(u) + "_" +
                std::to_string(v);

  const struct {
    const char* name;
    int n_videos;
  } splits[] = {{"train", cfg.n_videos_train},
                {"val", cfg.n_videos_val},
                {"test", cfg.n_videos_test}};

  std::vector<CorpusManifest> manifests;
  for (const auto& split : splits) {
    for (int label = 0; label < 2; ++label) {
      for (int video = 0; video < split.n_videos; ++video) {
        char vid[32];
        std::snprintf(vid, sizeof(vid), "%s_%03d", label == 0 ? "real" : "fake",
                      video);
        const fs::path dir = fs::path(out_root) / split.name /
                             (label == 0 ? "real" : "fake") / vid;
        fs::create_directories(dir);
        for (int frame = 0; frame < cfg.frames_per_video; ++frame) {
          ImageRGB img = render_frame(cfg, split.name, label, video, frame, patches);
          char fname[32];
          std::snprintf(fname, sizeof(fname), "f%03d", frame);
          if (cfg.jpeg_quality > 0)
            io::save_jpeg((dir / (std::string(fname) + ".jpg")).string(), img,
                          cfg.jpeg_quality);
          else
            io::save_png((dir / (std::string(fname) + ".png")).string(), img);
        }
      }
    }
    CorpusManifest m =
        build_manifest((fs::path(out_root) / split.name).string(), split.name,
                       cfg.frames_per_video, cfg.frames_per_video);
    for (auto& r : m.records)
      if (r.label == 1) r.manipulation_tag = "dct_band:" + band_tag;
    save_manifest(m, (fs::path(out_root) / split.name / "manifest.jsonl").string());
    manifests.push_back(std::move(m));
  }
  return manifests;
}

MixedBatchSampler::MixedBatchSampler(const CorpusManifest& manifest,
                                     int batch_size, uint64_t seed)
    : batch_size_(batch_size), rng_(nn::Rng::stream(seed, "sampler")) {
  check(batch_size >= 2, "batch_size must be >= 2 for mixed batches");
  for (int i = 0; i < static_cast<int>(manifest.records.size()); ++i) {
    if (manifest.records[i].label == 0)
      real_idx_.push_back(i);
    else
      fake_idx_.push_back(i);
  }
  check(!real_idx_.empty() && !fake_idx_.empty(),
        "mixed batches need both classes in the manifest");
}

std::vector<std::vector<int>> MixedBatchSampler::next_epoch() {
  auto shuffle = [&](std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[rng_.uniform_int(0, i)]);
  };
  std::vector<int> real = real_idx_, fake = fake_idx_;
  shuffle(real);
  shuffle(fake);

  const int total = static_cast<int>(real.size() + fake.size());
  const int want_batches = (total + batch_size_ - 1) / batch_size_;
  const int minority = static_cast<int>(std::min(real.size(), fake.size()));
  const int n_batches = std::min(want_batches, minority);

  // one of each class per batch up front, remainder dealt round-robin
  std::vector<std::vector<int>> batches(n_batches);
  size_t ri = 0, fi = 0;
  for (int b = 0; b < n_batches; ++b) {
    batches[b].push_back(real[ri++]);
    batches[b].push_back(fake[fi++]);
  }
  std::vector<int> rest;
  rest.insert(rest.end(), real.begin() + ri, real.end());
  rest.insert(rest.end(), fake.begin() + fi, fake.end());
  shuffle(rest);
  size_t cursor = 0;
  for (int b = 0; b < n_batches && cursor < rest.size(); ++b)
    while (static_cast<int>(batches[b].size()) < batch_size_ &&
           cursor < rest.size())
      batches[b].push_back(rest[cursor++]);
  // mix the guaranteed pair into the batch body
  for (auto& batch : batches)
    for (int i = static_cast<int>(batch.size()) - 1; i > 0; --i)
      std::swap(batch[i], batch[rng_.uniform_int(0, i)]);
  return batches;
}

}  // namespace fdfl::data
