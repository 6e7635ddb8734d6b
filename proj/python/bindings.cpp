#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fdfl/data.hpp"
#include "fdfl/freq.hpp"
#include "fdfl/losses.hpp"
#include "fdfl/metrics.hpp"

namespace py = pybind11;
using namespace fdfl;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Arr& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

// (rows, cols, 192) numpy array <-> channels-last frequency tensor
freq::FrequencyTensor tensor_from(const Arr& a, bool normalized) {
  if (a.ndim() != 3 || a.shape(2) != freq::kChannels)
    throw std::invalid_argument("tensor must be (rows, cols, 192)");
  freq::FrequencyTensor t;
  t.rows = static_cast<int>(a.shape(0));
  t.cols = static_cast<int>(a.shape(1));
  t.coeffs = to_vec(a);
  t.normalized = normalized;
  return t;
}

Arr tensor_to(const freq::FrequencyTensor& t) {
  Arr res({t.rows, t.cols, freq::kChannels});
  std::copy(t.coeffs.begin(), t.coeffs.end(), res.mutable_data());
  return res;
}

// (H, W) plane -> same-shape array of blockwise DCT coefficients
Arr py_block_dct2d(const Arr& plane, bool inverse) {
  if (plane.ndim() != 2) throw std::invalid_argument("plane must be 2-D");
  const int h = static_cast<int>(plane.shape(0));
  const int w = static_cast<int>(plane.shape(1));
  const std::vector<double> out =
      inverse ? freq::block_idct2d(to_vec(plane), h, w)
              : freq::block_dct2d(to_vec(plane), h, w);
  Arr res({h, w});
  std::copy(out.begin(), out.end(), res.mutable_data());
  return res;
}

freq::ImageRGB image_from(const Arr& rgb) {
  if (rgb.ndim() != 3 || rgb.shape(2) != 3)
    throw std::invalid_argument("image must be (H, W, 3)");
  freq::ImageRGB img;
  img.height = static_cast<int>(rgb.shape(0));
  img.width = static_cast<int>(rgb.shape(1));
  img.pixels = to_vec(rgb);
  return img;
}

losses::EmbeddingBatch batch_from(const Arr& emb, const std::vector<int>& labels) {
  if (emb.ndim() != 2) throw std::invalid_argument("embeddings must be (B, D)");
  losses::EmbeddingBatch b;
  b.vectors = Mat(static_cast<int>(emb.shape(0)), static_cast<int>(emb.shape(1)));
  std::copy(emb.data(), emb.data() + emb.size(), b.vectors.data());
  b.labels = labels;
  return b;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "numeric core: frequency features, center loss, ranking metrics";

  py::class_<freq::ChannelStats>(m, "ChannelStats")
      .def_readonly("mean", &freq::ChannelStats::mean)
      .def_readonly("std", &freq::ChannelStats::std)
      .def_readonly("count", &freq::ChannelStats::count);

  m.def("block_dct2d", &py_block_dct2d, py::arg("plane"),
        py::arg("inverse") = false,
        "8x8 blockwise orthonormal DCT-II of a 2-D plane");
  m.def(
      "rgb_to_ycbcr",
      [](const Arr& rgb) {
        const freq::ImageYCbCr ycc = freq::rgb_to_ycbcr(image_from(rgb));
        Arr res({ycc.height, ycc.width, 3});
        std::copy(ycc.planes.begin(), ycc.planes.end(), res.mutable_data());
        return res;
      },
      py::arg("rgb"), "BT.601 full-range conversion, Cb/Cr offset 128");
  m.def(
      "preprocess_image",
      [](const Arr& rgb) {
        return tensor_to(freq::preprocess_image(image_from(rgb)));
      },
      py::arg("rgb"),
      "(H, W, 3) image -> (H/8, W/8, 192) plane-major band tensor");
  m.def(
      "compute_stats",
      [](const std::vector<Arr>& tensors) {
        freq::StatsAccumulator acc;
        for (const Arr& a : tensors) acc.add(tensor_from(a, false));
        return acc.finalize();
      },
      py::arg("tensors"), "per-channel mean/std over unnormalized tensors");
  m.def(
      "normalize",
      [](const Arr& tensor, const freq::ChannelStats& stats) {
        return tensor_to(freq::normalize(tensor_from(tensor, false), stats));
      },
      py::arg("tensor"), py::arg("stats"));

  m.def(
      "scl_forward",
      [](const Arr& emb, const std::vector<int>& labels,
         const std::vector<double>& center, double margin) {
        losses::SclConfig cfg;
        cfg.m = margin;
        const auto r = losses::scl_forward(batch_from(emb, labels), center, cfg);
        py::dict d;
        d["loss"] = r.loss;
        d["m_nat"] = r.m_nat;
        d["m_man"] = r.m_man;
        d["active"] = r.active;
        return d;
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("center"),
      py::arg("margin") = 0.3);
  m.def(
      "scl_backward",
      [](const Arr& emb, const std::vector<int>& labels,
         const std::vector<double>& center, double margin) {
        losses::SclConfig cfg;
        cfg.m = margin;
        const auto b = batch_from(emb, labels);
        const auto f = losses::scl_forward(b, center, cfg);
        Mat ge;
        std::vector<double> gc;
        losses::scl_backward(b, center, cfg, f, &ge, &gc);
        Arr out({b.batch(), b.dim()});
        std::copy(ge.data(), ge.data() + ge.size(), out.mutable_data());
        return py::make_tuple(out, gc);
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("center"),
      py::arg("margin") = 0.3);

  m.def("roc_auc", &metrics::roc_auc, py::arg("scores"), py::arg("labels"));
  m.def("pauc", &metrics::pauc, py::arg("scores"), py::arg("labels"),
        py::arg("max_fpr") = 0.1);

  m.def(
      "synth_generate",
      [](const std::string& out_root, int image_size, int n_train, int n_val,
         int n_test, int frames, double amplitude, uint64_t seed) {
        data::SyntheticConfig cfg;
        cfg.image_size = image_size;
        cfg.n_videos_train = n_train;
        cfg.n_videos_val = n_val;
        cfg.n_videos_test = n_test;
        cfg.frames_per_video = frames;
        if (amplitude >= 0) cfg.amplitude = amplitude;
        cfg.seed = seed;
        data::synth_generate(cfg, out_root);
      },
      py::arg("out_root"), py::arg("image_size") = 64, py::arg("n_train") = 4,
      py::arg("n_val") = 2, py::arg("n_test") = 2, py::arg("frames") = 3,
      py::arg("amplitude") = -1.0, py::arg("seed") = 7);
}
