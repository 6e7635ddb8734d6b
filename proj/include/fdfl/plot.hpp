#pragma once

#include <string>
#include <vector>

#include "fdfl/data.hpp"

namespace fdfl::plot {

struct Rgb {
  double r = 0, g = 0, b = 0;  // byte intensities, [0, 255]
};

// Tiny raster surface; everything renders through lines, rects and a 5x7
// bitmap font so plots have no dependencies beyond the PNG writer.
class Canvas {
 public:
  Canvas(int w, int h);

  int width() const { return w_; }
  int height() const { return h_; }
  void set_px(int x, int y, Rgb c);
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);  // inclusive corners
  void line(double x0, double y0, double x1, double y1, Rgb c);
  void text(int x, int y, const std::string& s, Rgb c);  // top-left anchor
  void save(const std::string& path) const;

 private:
  int w_, h_;
  std::vector<double> px_;
};

// ROC polyline with the FPR <= max_fpr region shaded; CSV columns fpr,tpr.
void roc_plot(const std::vector<double>& scores, const std::vector<int>& labels,
              double max_fpr, const std::string& png_path,
              const std::string& csv_path);

// Side-by-side per-bin bars over the joint range; CSV columns
// bin_lo,bin_hi,natural,manipulated.
void histogram_plot(const std::vector<double>& natural,
                    const std::vector<double>& manipulated, int bins,
                    const std::string& png_path, const std::string& csv_path);

struct BandEnergy {
  // mean |DCT coefficient| per plane-major channel, split by class
  std::vector<double> real, fake;  // size 192
  int n_real = 0, n_fake = 0;
};

// Streams a split and averages unnormalized coefficient magnitudes per band.
BandEnergy band_energy(const data::CorpusManifest& manifest, int image_size);

// Three planes x two classes of 8x8 heatmaps; CSV columns
// plane,u,v,real_mean_abs,fake_mean_abs.
void band_energy_plot(const BandEnergy& e, const std::string& png_path,
                      const std::string& csv_path);

// Single curve with markers, e.g. AUC against a swept hyper-parameter; CSV
// columns <xlabel>,auc.
void sweep_plot(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& xlabel, const std::string& png_path,
                const std::string& csv_path);

}  // namespace fdfl::plot
