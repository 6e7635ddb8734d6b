#include "fdfl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fdfl/imageio.hpp"
#include "fdfl/metrics.hpp"

namespace fdfl::plot {

namespace {

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGray{150, 150, 150};
constexpr Rgb kBlue{55, 95, 190};
constexpr Rgb kRed{195, 70, 55};
constexpr Rgb kShade{214, 226, 246};

// 5x7 glyphs, one byte per row, bit 4 = leftmost column. Lowercase maps onto
// these; anything unlisted renders as a box.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'@', {0x0E, 0x11, 0x01, 0x0D, 0x15, 0x15, 0x0E}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const uint8_t* glyph_rows(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const Glyph& g : kFont)
    if (g.ch == c) return g.rows;
  static const uint8_t box[7] = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};
  return box;
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

Canvas::Canvas(int w, int h) : w_(w), h_(h) {
  check(w > 0 && h > 0, "canvas dims must be positive");
  px_.assign(static_cast<size_t>(w) * h * 3, 255.0);
}

void Canvas::set_px(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  double* p = &px_[(static_cast<size_t>(y) * w_ + x) * 3];
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = std::max(0, y0); y <= std::min(h_ - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(w_ - 1, x1); ++x)
      set_px(x, y, c);
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c) {
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps =
      std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    set_px(static_cast<int>(std::lround(x0 + t * dx)),
           static_cast<int>(std::lround(y0 + t * dy)), c);
  }
}

void Canvas::text(int x, int y, const std::string& s, Rgb c) {
  for (char ch : s) {
    const uint8_t* rows = glyph_rows(ch);
    for (int r = 0; r < 7; ++r)
      for (int col = 0; col < 5; ++col)
        if (rows[r] & (1 << (4 - col))) set_px(x + col, y + r, c);
    x += 6;
  }
}

void Canvas::save(const std::string& path) const {
  freq::ImageRGB img;
  img.height = h_;
  img.width = w_;
  img.pixels.resize(px_.size());
  for (size_t i = 0; i < px_.size(); ++i)
    img.pixels[i] = std::clamp(px_[i], 0.0, 255.0);
  io::save_png(path, img);
}

namespace {

// Data-space rectangle mapped onto a pixel viewport with ticks and labels.
struct Axes {
  Canvas* cv;
  double x0, x1, y0, y1;
  int px0, px1, py0, py1;  // py0 = top edge

  double X(double x) const {
    return px0 + (x - x0) / (x1 - x0) * (px1 - px0);
  }
  double Y(double y) const {
    return py1 - (y - y0) / (y1 - y0) * (py1 - py0);
  }

  void frame(const std::string& xlabel, const std::string& ylabel) const {
    cv->line(px0, py1, px1, py1, kBlack);
    cv->line(px0, py0, px0, py1, kBlack);
    for (int i = 0; i <= 4; ++i) {
      const double fx = x0 + (x1 - x0) * i / 4.0;
      const double fy = y0 + (y1 - y0) * i / 4.0;
      const int tx = static_cast<int>(std::lround(X(fx)));
      const int ty = static_cast<int>(std::lround(Y(fy)));
      cv->line(tx, py1, tx, py1 + 3, kBlack);
      cv->line(px0 - 3, ty, px0, ty, kBlack);
      const std::string xs = fmt("%.3g", fx), ys = fmt("%.3g", fy);
      cv->text(tx - static_cast<int>(xs.size()) * 3, py1 + 6, xs, kBlack);
      cv->text(px0 - 5 - static_cast<int>(ys.size()) * 6, ty - 3, ys, kBlack);
    }
    cv->text((px0 + px1) / 2 - static_cast<int>(xlabel.size()) * 3, py1 + 17,
             xlabel, kBlack);
    cv->text(4, py0 - 12, ylabel, kBlack);
  }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                Rgb c) const {
    for (size_t i = 0; i + 1 < xs.size(); ++i)
      cv->line(X(xs[i]), Y(ys[i]), X(xs[i + 1]), Y(ys[i + 1]), c);
  }

  void marker(double x, double y, Rgb c) const {
    const int mx = static_cast<int>(std::lround(X(x)));
    const int my = static_cast<int>(std::lround(Y(y)));
    cv->fill_rect(mx - 1, my - 1, mx + 1, my + 1, c);
  }
};

}  // namespace

void roc_plot(const std::vector<double>& scores, const std::vector<int>& labels,
              double max_fpr, const std::string& png_path,
              const std::string& csv_path) {
  const auto curve = metrics::roc_curve(scores, labels);
  const double auc = metrics::roc_auc(scores, labels);
  const double pa = metrics::pauc(scores, labels, max_fpr);

  std::ofstream csv(csv_path);
  check(csv.good(), "cannot write " + csv_path);
  csv << "fpr,tpr\n";
  for (const auto& [fx, fy] : curve)
    csv << fmt("%.17g", fx) << "," << fmt("%.17g", fy) << "\n";
  csv.close();

  Canvas cv(420, 360);
  Axes ax{&cv, 0, 1, 0, 1, 52, 404, 24, 318};
  // shade the partial-AUC region column by column before drawing anything else
  const int shade_to = static_cast<int>(std::lround(ax.X(max_fpr)));
  for (int px = ax.px0; px <= shade_to; ++px) {
    const double fpr =
        ax.x0 + (px - ax.px0) * (ax.x1 - ax.x0) / (ax.px1 - ax.px0);
    double tpr = 1.0;
    for (size_t i = 0; i + 1 < curve.size(); ++i)
      if (curve[i + 1].first >= fpr) {
        const double span = curve[i + 1].first - curve[i].first;
        const double t = span > 0 ? (fpr - curve[i].first) / span : 1.0;
        tpr = curve[i].second + t * (curve[i + 1].second - curve[i].second);
        break;
      }
    cv.fill_rect(px, static_cast<int>(std::lround(ax.Y(tpr))), px, ax.py1 - 1,
                 kShade);
  }
  ax.frame("fpr", "tpr");
  cv.line(ax.X(0), ax.Y(0), ax.X(1), ax.Y(1), kGray);
  std::vector<double> xs, ys;
  for (const auto& [fx, fy] : curve) {
    xs.push_back(fx);
    ys.push_back(fy);
  }
  ax.polyline(xs, ys, kBlue);
  cv.text(ax.px0 + 10, ax.py0 + 4, "auc=" + fmt("%.4f", auc), kBlack);
  cv.text(ax.px0 + 10, ax.py0 + 14,
          "pauc@" + fmt("%.3g", max_fpr) + "=" + fmt("%.4f", pa), kBlack);
  cv.save(png_path);
}

void histogram_plot(const std::vector<double>& natural,
                    const std::vector<double>& manipulated, int bins,
                    const std::string& png_path, const std::string& csv_path) {
  check(bins >= 1, "bins must be >= 1");
  check(!natural.empty() && !manipulated.empty(),
        "histogram needs both classes");
  double lo = natural[0], hi = natural[0];
  for (double v : natural) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : manipulated) lo = std::min(lo, v), hi = std::max(hi, v);
  if (hi <= lo) hi = lo + 1.0;
  const double width = (hi - lo) / bins;

  std::vector<int> cn(bins, 0), cm(bins, 0);
  auto bucket = [&](double v) {
    return std::min(bins - 1, static_cast<int>((v - lo) / width));
  };
  for (double v : natural) ++cn[bucket(v)];
  for (double v : manipulated) ++cm[bucket(v)];

  std::ofstream csv(csv_path);
  check(csv.good(), "cannot write " + csv_path);
  csv << "bin_lo,bin_hi,natural,manipulated\n";
  for (int i = 0; i < bins; ++i)
    csv << fmt("%.17g", lo + i * width) << ","
        << fmt("%.17g", lo + (i + 1) * width) << "," << cn[i] << "," << cm[i]
        << "\n";
  csv.close();

  int peak = 1;
  for (int i = 0; i < bins; ++i) peak = std::max({peak, cn[i], cm[i]});

  Canvas cv(460, 340);
  Axes ax{&cv, lo, hi, 0, static_cast<double>(peak), 52, 444, 24, 298};
  for (int i = 0; i < bins; ++i) {
    const double bl = lo + i * width;
    const int xl = static_cast<int>(std::lround(ax.X(bl)));
    const int xr = static_cast<int>(std::lround(ax.X(bl + width)));
    const int mid = (xl + xr) / 2;
    if (cn[i] > 0)
      cv.fill_rect(xl + 1, static_cast<int>(std::lround(ax.Y(cn[i]))), mid,
                   ax.py1 - 1, kBlue);
    if (cm[i] > 0)
      cv.fill_rect(mid + 1, static_cast<int>(std::lround(ax.Y(cm[i]))),
                   xr - 1, ax.py1 - 1, kRed);
  }
  ax.frame("distance to center", "count");
  cv.text(ax.px1 - 120, ax.py0 + 4, "natural", kBlue);
  cv.text(ax.px1 - 120, ax.py0 + 14, "manipulated", kRed);
  cv.save(png_path);
}

BandEnergy band_energy(const data::CorpusManifest& manifest, int image_size) {
  BandEnergy e;
  e.real.assign(freq::kChannels, 0.0);
  e.fake.assign(freq::kChannels, 0.0);
  for (const auto& rec : manifest.records) {
    freq::ImageRGB img = io::load_image(rec.path);
    if (img.height != image_size || img.width != image_size)
      img = io::resize_bilinear(img, image_size, image_size);
    const freq::FrequencyTensor t = freq::preprocess_image(img);
    auto& acc = rec.label == 0 ? e.real : e.fake;
    const double cells = static_cast<double>(t.rows) * t.cols;
    for (int i = 0; i < t.rows; ++i)
      for (int j = 0; j < t.cols; ++j)
        for (int c = 0; c < freq::kChannels; ++c)
          acc[c] += std::abs(t.at(i, j, c)) / cells;
    (rec.label == 0 ? e.n_real : e.n_fake)++;
  }
  check(e.n_real > 0 || e.n_fake > 0, "empty manifest for band energy");
  for (int c = 0; c < freq::kChannels; ++c) {
    if (e.n_real > 0) e.real[c] /= e.n_real;
    if (e.n_fake > 0) e.fake[c] /= e.n_fake;
  }
  return e;
}

void band_energy_plot(const BandEnergy& e, const std::string& png_path,
                      const std::string& csv_path) {
  static const char* kPlanes[] = {"Y", "Cb", "Cr"};
  std::ofstream csv(csv_path);
  check(csv.good(), "cannot write " + csv_path);
  csv << "plane,u,v,real_mean_abs,fake_mean_abs\n";
  for (int p = 0; p < 3; ++p)
    for (int u = 0; u < 8; ++u)
      for (int v = 0; v < 8; ++v) {
        const int c = p * 64 + u * 8 + v;
        csv << kPlanes[p] << "," << u << "," << v << ","
            << fmt("%.17g", e.real[c]) << "," << fmt("%.17g", e.fake[c])
            << "\n";
      }
  csv.close();

  double mx = 0.0;
  for (int c = 0; c < freq::kChannels; ++c)
    mx = std::max({mx, e.real[c], e.fake[c]});
  if (mx <= 0) mx = 1.0;

  const int cell = 13, grid = cell * 8;
  const int ox = 40, oy = 28, gapx = 34, gapy = 30;
  Canvas cv(ox + 2 * grid + gapx + 16, oy + 3 * (grid + gapy));
  for (int p = 0; p < 3; ++p)
    for (int cls = 0; cls < 2; ++cls) {
      const auto& vals = cls == 0 ? e.real : e.fake;
      const int gx = ox + cls * (grid + gapx);
      const int gy = oy + p * (grid + gapy);
      cv.text(gx, gy - 12,
              std::string(kPlanes[p]) + " " + (cls == 0 ? "real" : "fake"),
              kBlack);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          // log ramp keeps AC structure visible next to the DC term
          const double t =
              std::log1p(vals[p * 64 + u * 8 + v]) / std::log1p(mx);
          const Rgb c{255.0 * (1.0 - t), 255.0 * (1.0 - 0.75 * t),
                      255.0 * (1.0 - 0.45 * t)};
          cv.fill_rect(gx + v * cell, gy + u * cell, gx + (v + 1) * cell - 2,
                       gy + (u + 1) * cell - 2, c);
        }
    }
  cv.text(4, 6, "mean abs dct coefficient per band (log ramp)", kBlack);
  cv.save(png_path);
}

void sweep_plot(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& xlabel, const std::string& png_path,
                const std::string& csv_path) {
  check(!xs.empty() && xs.size() == ys.size(), "sweep needs matching x/y");
  std::ofstream csv(csv_path);
  check(csv.good(), "cannot write " + csv_path);
  csv << xlabel << ",auc\n";
  for (size_t i = 0; i < xs.size(); ++i)
    csv << fmt("%.17g", xs[i]) << "," << fmt("%.17g", ys[i]) << "\n";
  csv.close();

  double xlo = xs[0], xhi = xs[0], ylo = ys[0], yhi = ys[0];
  for (double v : xs) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
  for (double v : ys) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  if (xhi <= xlo) xhi = xlo + 1.0;
  const double pad = std::max(0.02, (yhi - ylo) * 0.15);
  ylo = std::max(0.0, ylo - pad);
  yhi = std::min(1.0, yhi + pad);
  if (yhi <= ylo) yhi = ylo + 0.1;

  Canvas cv(440, 330);
  Axes ax{&cv, xlo, xhi, ylo, yhi, 56, 424, 24, 288};
  ax.frame(xlabel, "auc");
  ax.polyline(xs, ys, kBlue);
  for (size_t i = 0; i < xs.size(); ++i) ax.marker(xs[i], ys[i], kRed);
  cv.save(png_path);
}

}  // namespace fdfl::plot
