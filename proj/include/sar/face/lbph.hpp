#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/error.hpp"
#include "sar/vision/frame.hpp"
#include "sar/vision/image_io.hpp"

namespace sar::face {

using vision::GrayFrame;

inline constexpr int kLbpRadius = 1;
inline constexpr int kLbpNeighbors = 8;
inline constexpr int kLbpBins = 256;

struct LbphParams {
  int grid_x = 8;
  int grid_y = 8;
  int face_size = 64;
  double unknown_threshold = 80.0;
};

inline void validate(const LbphParams& p) {
  if (p.grid_x < 1 || p.grid_y < 1) throw Error(ErrorKind::Config, "LBPH grid must be >= 1");
  if (p.face_size < 3) throw Error(ErrorKind::Config, "LBPH face_size must be >= 3");
  if (!(p.unknown_threshold >= 0.0)) throw Error(ErrorKind::Config, "unknown_threshold must be >= 0");
}

/// Interior-pixel LBP codes; (w-2)x(h-2).
struct CodeImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> codes;

  [[nodiscard]] std::uint8_t at(int x, int y) const {
    return codes[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Neighbour order for bits 0..7: TL, T, TR, R, BR, B, BL, L. A bit is set
/// when the neighbour is >= the centre, so flat patches code to 255.
inline constexpr std::array<std::array<int, 2>, 8> kNeighborOffsets{
    {{-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};

inline CodeImage lbp_map(const GrayFrame& face) {
  if (face.width() < 3 || face.height() < 3) throw Error(ErrorKind::Size, "LBP needs at least 3x3");
  CodeImage out;
  out.width = face.width() - 2;
  out.height = face.height() - 2;
  out.codes.resize(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));
  for (int y = 1; y < face.height() - 1; ++y) {
    for (int x = 1; x < face.width() - 1; ++x) {
      const auto center = face.at(x, y);
      std::uint8_t code = 0;
      for (int bit = 0; bit < kLbpNeighbors; ++bit) {
        const auto& off = kNeighborOffsets[static_cast<std::size_t>(bit)];
        if (face.at(x + off[0], y + off[1]) >= center) code |= static_cast<std::uint8_t>(1u << bit);
      }
      out.codes[static_cast<std::size_t>(y - 1) * static_cast<std::size_t>(out.width) +
                static_cast<std::size_t>(x - 1)] = code;
    }
  }
  return out;
}

/// Cell boundaries along one axis: `cells` equal spans of length/cells, the
/// last one absorbing the remainder.
inline std::vector<int> cell_edges(int length, int cells) {
  std::vector<int> edges(static_cast<std::size_t>(cells) + 1);
  const int span = length / cells;
  for (int i = 0; i < cells; ++i) edges[static_cast<std::size_t>(i)] = i * span;
  edges[static_cast<std::size_t>(cells)] = length;
  return edges;
}

/// Per-cell 256-bin histograms, each L1-normalised (empty cells stay zero),
/// concatenated row-major over the grid.
inline std::vector<double> grid_histogram(const CodeImage& codes, const LbphParams& params) {
  validate(params);
  const auto xs = cell_edges(codes.width, params.grid_x);
  const auto ys = cell_edges(codes.height, params.grid_y);
  std::vector<double> hist(static_cast<std::size_t>(params.grid_x) * params.grid_y * kLbpBins, 0.0);
  for (int cy = 0; cy < params.grid_y; ++cy) {
    for (int cx = 0; cx < params.grid_x; ++cx) {
      double* block = hist.data() + (static_cast<std::size_t>(cy) * params.grid_x + cx) * kLbpBins;
      std::size_t count = 0;
      for (int y = ys[cy]; y < ys[cy + 1]; ++y) {
        for (int x = xs[cx]; x < xs[cx + 1]; ++x) {
          block[codes.at(x, y)] += 1.0;
          ++count;
        }
      }
      if (count > 0) {
        const double inv = 1.0 / static_cast<double>(count);
        for (int b = 0; b < kLbpBins; ++b) block[b] *= inv;
      }
    }
  }
  return hist;
}

inline double chi_square(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "histogram length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = a[i] + b[i];
    if (s == 0.0) continue;
    const double diff = a[i] - b[i];
    d += diff * diff / s;
  }
  return d;
}

/// Pixel-centre aligned bilinear resize; a same-size call returns the input
/// unchanged.
inline GrayFrame resample_bilinear(const GrayFrame& src, int out_w, int out_h) {
  if (src.width() == out_w && src.height() == out_h) return src;
  GrayFrame out(out_w, out_h, 0, src.timestamp_ms());
  const double sx = static_cast<double>(src.width()) / out_w;
  const double sy = static_cast<double>(src.height()) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double tx = fx - x0;
      const double top = src.at(x0, y0) * (1 - tx) + src.at(x1, y0) * tx;
      const double bottom = src.at(x0, y1) * (1 - tx) + src.at(x1, y1) * tx;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(top * (1 - ty) + bottom * ty + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

/// Crop (clamped to the frame) of a detection rectangle.
inline GrayFrame crop(const GrayFrame& frame, const vision::Rect& r) {
  const int x0 = std::clamp(r.x, 0, frame.width() - 1);
  const int y0 = std::clamp(r.y, 0, frame.height() - 1);
  const int x1 = std::clamp(r.x + r.w, x0 + 1, frame.width());
  const int y1 = std::clamp(r.y + r.h, y0 + 1, frame.height());
  GrayFrame out(x1 - x0, y1 - y0, 0, frame.timestamp_ms());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) out.at(x - x0, y - y0) = frame.at(x, y);
  return out;
}

struct FaceTemplate {
  std::string label;
  std::vector<double> histogram;
  std::string source;
};

/// Face -> resample to face_size -> LBP -> grid histogram.
inline std::vector<double> describe(const GrayFrame& face, const LbphParams& params) {
  return grid_histogram(lbp_map(resample_bilinear(face, params.face_size, params.face_size)), params);
}

struct Prediction {
  std::optional<std::string> label;  // nullopt == Unknown
  double distance = 0.0;
  std::size_t template_index = 0;

  [[nodiscard]] bool known() const noexcept { return label.has_value(); }
};

class LbphModel {
 public:
  LbphModel() = default;
  explicit LbphModel(LbphParams params) : params_(params) { validate(params_); }

  [[nodiscard]] const LbphParams& params() const noexcept { return params_; }
  [[nodiscard]] const std::vector<FaceTemplate>& templates() const noexcept { return templates_; }
  [[nodiscard]] bool trained() const noexcept { return !templates_.empty(); }

  void add(FaceTemplate t) {
    const std::size_t expected = static_cast<std::size_t>(params_.grid_x) * params_.grid_y * kLbpBins;
    if (t.histogram.size() != expected) throw Error(ErrorKind::Shape, "template histogram length mismatch");
    templates_.push_back(std::move(t));
  }

  void set_unknown_threshold(double t) {
    params_.unknown_threshold = t;
    validate(params_);
  }

  /// Nearest template by chi-square; first template wins ties. Unknown when
  /// the best distance exceeds unknown_threshold.
  [[nodiscard]] Prediction predict(const GrayFrame& face) const {
    if (!trained()) throw Error(ErrorKind::State, "LBPH model has no templates");
    const auto query = describe(face, params_);
    Prediction best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      const double d = chi_square(query, templates_[i].histogram);
      if (d < best.distance) {
        best.distance = d;
        best.template_index = i;
      }
    }
    if (best.distance <= params_.unknown_threshold) best.label = templates_[best.template_index].label;
    return best;
  }

 private:
  LbphParams params_;
  std::vector<FaceTemplate> templates_;
};

struct LabeledFace {
  std::string label;
  GrayFrame face;
  std::string source;
};

/// One template per image, in input order.
inline LbphModel train(const LbphParams& params, const std::vector<LabeledFace>& faces) {
  if (faces.empty()) throw Error(ErrorKind::Config, "training requires at least one labeled face");
  LbphModel model(params);
  for (const auto& f : faces) model.add({f.label, describe(f.face, params), f.source});
  return model;
}

// ---- persistence: {"v":1,"params":{...},"templates":[{"label":..,"hist":[..]}]} ----

inline nlohmann::json to_json(const LbphModel& m) {
  nlohmann::json templates = nlohmann::json::array();
  for (const auto& t : m.templates()) {
    nlohmann::json jt{{"label", t.label}, {"hist", t.histogram}};
    if (!t.source.empty()) jt["source"] = t.source;
    templates.push_back(std::move(jt));
  }
  const auto& p = m.params();
  return {{"v", 1},
          {"params",
           {{"radius", kLbpRadius},
            {"neighbors", kLbpNeighbors},
            {"grid_x", p.grid_x},
            {"grid_y", p.grid_y},
            {"face_size", p.face_size},
            {"unknown_threshold", p.unknown_threshold}}},
          {"templates", templates}};
}

inline LbphModel lbph_from_json(const nlohmann::json& j) {
  try {
    if (j.at("v").get<int>() != 1) throw Error(ErrorKind::Parse, "unsupported LBPH model version");
    const auto& jp = j.at("params");
    if (jp.value("radius", kLbpRadius) != kLbpRadius || jp.value("neighbors", kLbpNeighbors) != kLbpNeighbors) {
      throw Error(ErrorKind::Config, "only radius 1 / 8 neighbours is supported");
    }
    LbphParams p;
    p.grid_x = jp.value("grid_x", p.grid_x);
    p.grid_y = jp.value("grid_y", p.grid_y);
    p.face_size = jp.value("face_size", p.face_size);
    p.unknown_threshold = jp.value("unknown_threshold", p.unknown_threshold);
    LbphModel m(p);
    for (const auto& jt : j.at("templates")) {
      m.add({jt.at("label").get<std::string>(), jt.at("hist").get<std::vector<double>>(),
             jt.value("source", std::string{})});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("LBPH model JSON: ") + e.what());
  }
}

inline LbphModel load_lbph(const std::filesystem::path& path) {
  try {
    return lbph_from_json(nlohmann::json::parse(vision::read_file_bytes(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

inline void save_lbph(const LbphModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::NotFound, "cannot write " + path.string());
  out << to_json(m).dump();
}

/// Enrollment corpus: <root>/<label>/<image>.pgm|png, labels and files in
/// lexicographic order.
inline std::vector<LabeledFace> load_enrollment(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorKind::NotFound, "enrollment directory missing: " + root.string());
  std::vector<fs::path> labels;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) labels.push_back(e.path());
  std::sort(labels.begin(), labels.end());
  std::vector<LabeledFace> faces;
  for (const auto& dir : labels) {
    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) images.push_back(e.path());
    }
    std::sort(images.begin(), images.end());
    for (const auto& img : images) {
      faces.push_back({dir.filename().string(), vision::load_frame(img), img.string()});
    }
  }
  return faces;
}

}  // namespace sar::face
