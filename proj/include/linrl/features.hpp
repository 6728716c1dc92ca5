#pragma once

// Screen reduction and the sparse BASIC/SECAM state representation.
//
// Pipeline: Screen (7-bit colors) -> secam_reduce -> SecamScreen (8 classes)
// -> encode_basic (block/color indicators after background subtraction)
// -> encode_state_action (state features, action-crossed copy, bias).

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "linrl/error.hpp"

namespace linrl {

inline constexpr int kScreenWidth = 160;
inline constexpr int kScreenHeight = 210;
inline constexpr int kNumColors = 128;
inline constexpr int kNumSecamClasses = 8;
inline constexpr int kNumActions = 18;

/// Row-major grid of 7-bit color indices.
struct Screen {
  int width = kScreenWidth;
  int height = kScreenHeight;
  std::vector<std::uint8_t> pixels;

  Screen() = default;
  Screen(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const Screen&) const = default;
};

/// Row-major grid of SECAM class indices in [0,7].
struct SecamScreen {
  int width = kScreenWidth;
  int height = kScreenHeight;
  std::vector<std::uint8_t> pixels;

  SecamScreen() = default;
  SecamScreen(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const SecamScreen&) const = default;
};

inline void validate(const Screen& s) {
  if (s.width <= 0 || s.height <= 0) throw DimensionError("screen dimensions must be positive");
  if (s.pixels.size() != static_cast<std::size_t>(s.width) * s.height)
    throw DimensionError("screen pixel count does not match width x height");
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    if (s.pixels[i] >= kNumColors)
      throw MalformedScreen("pixel " + std::to_string(i) + " has color " + std::to_string(s.pixels[i]) +
                            " outside [0,127]");
  }
}

inline void validate(const SecamScreen& s) {
  if (s.width <= 0 || s.height <= 0) throw DimensionError("screen dimensions must be positive");
  if (s.pixels.size() != static_cast<std::size_t>(s.width) * s.height)
    throw DimensionError("screen pixel count does not match width x height");
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    if (s.pixels[i] >= kNumSecamClasses)
      throw MalformedScreen("SECAM pixel " + std::to_string(i) + " outside [0,7]");
  }
}

// ---------------------------------------------------------------------------
// Palette

/// Maps each of the 128 colors to a SECAM class.
using Palette = std::array<std::uint8_t, kNumColors>;

/// Default mapping: bits 1..3 of the color index.
inline Palette default_palette() {
  Palette p{};
  for (int c = 0; c < kNumColors; ++c) p[c] = static_cast<std::uint8_t>((c >> 1) & 7);
  return p;
}

inline void validate(const Palette& p) {
  for (int c = 0; c < kNumColors; ++c) {
    if (p[c] >= kNumSecamClasses)
      throw FormatError("palette entry " + std::to_string(c) + " maps outside [0,7]");
  }
}

/// Palette file: 128 lines "index class", any order, each index exactly once.
inline Palette read_palette(std::istream& in) {
  Palette p{};
  std::array<bool, kNumColors> seen{};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long index = -1, cls = -1;
    std::string extra;
    if (!(ls >> index >> cls) || (ls >> extra))
      throw FormatError("palette line " + std::to_string(line_no) + ": expected \"index class\"");
    if (index < 0 || index >= kNumColors || cls < 0 || cls >= kNumSecamClasses)
      throw FormatError("palette line " + std::to_string(line_no) + ": value out of range");
    if (seen[index]) throw FormatError("palette index " + std::to_string(index) + " listed twice");
    seen[index] = true;
    p[index] = static_cast<std::uint8_t>(cls);
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
    throw FormatError("palette must list all 128 color indices");
  return p;
}

inline void write_palette(std::ostream& out, const Palette& p) {
  for (int c = 0; c < kNumColors; ++c) out << c << ' ' << static_cast<int>(p[c]) << '\n';
}

inline Palette load_palette(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open palette file " + path);
  return read_palette(in);
}

inline void save_palette(const std::string& path, const Palette& p) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write palette file " + path);
  write_palette(out, p);
}

/// Projects every pixel through the palette. Throws MalformedScreen for
/// pixels outside [0,127].
inline SecamScreen secam_reduce(const Screen& screen, const Palette& palette) {
  if (screen.pixels.size() != static_cast<std::size_t>(screen.width) * screen.height)
    throw DimensionError("screen pixel count does not match width x height");
  SecamScreen out;
  out.width = screen.width;
  out.height = screen.height;
  out.pixels.resize(screen.pixels.size());
  std::uint8_t seen = 0;
  const std::uint8_t* src = screen.pixels.data();
  std::uint8_t* dst = out.pixels.data();
  for (std::size_t i = 0, n = screen.pixels.size(); i < n; ++i) {
    seen |= src[i];
    dst[i] = palette[src[i] & 0x7f];
  }
  if (seen & 0x80) validate(screen);  // throws with the offending pixel
  return out;
}

// ---------------------------------------------------------------------------
// Background model

struct BackgroundModel {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> modal_color;
  std::size_t sample_count = 0;

  bool operator==(const BackgroundModel&) const = default;
};

/// Running per-pixel class counts; `model()` gives the per-pixel mode with
/// ties going to the lowest class index.
class BackgroundAccumulator {
 public:
  void add(const SecamScreen& f) {
    const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
    if (frames_ == 0) {
      if (f.width <= 0 || f.height <= 0) throw DimensionError("screen dimensions must be positive");
      width_ = f.width;
      height_ = f.height;
      counts_.assign(n * kNumSecamClasses, 0);
    } else if (f.width != width_ || f.height != height_) {
      throw DimensionError("background frames have mismatched dimensions");
    }
    if (f.pixels.size() != n) throw DimensionError("pixel buffer size does not match dimensions");
    for (std::size_t p = 0; p < n; ++p) {
      if (f.pixels[p] >= kNumSecamClasses) throw MalformedScreen("SECAM pixel outside [0,7]");
      ++counts_[p * kNumSecamClasses + f.pixels[p]];
    }
    ++frames_;
  }

  std::size_t frames() const noexcept { return frames_; }

  BackgroundModel model() const {
    if (frames_ == 0) throw UsageError("background needs at least one frame");
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    BackgroundModel bg{width_, height_, std::vector<std::uint8_t>(n, 0), frames_};
    for (std::size_t p = 0; p < n; ++p) {
      const auto* c = &counts_[p * kNumSecamClasses];
      // max_element returns the first maximum, which is the lowest class.
      bg.modal_color[p] = static_cast<std::uint8_t>(std::max_element(c, c + kNumSecamClasses) - c);
    }
    return bg;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::size_t frames_ = 0;
  std::vector<std::uint32_t> counts_;
};

/// Per-pixel mode over frames; ties go to the lowest class index.
inline BackgroundModel compute_background(std::span<const SecamScreen> frames) {
  if (frames.empty()) throw UsageError("background needs at least one frame");
  BackgroundAccumulator acc;
  for (const auto& f : frames) acc.add(f);
  return acc.model();
}

/// Background file: "BG width height" header, then one line of class values
/// per screen row.
inline void write_background(std::ostream& out, const BackgroundModel& bg) {
  out << "BG " << bg.width << ' ' << bg.height << '\n';
  for (int r = 0; r < bg.height; ++r) {
    for (int c = 0; c < bg.width; ++c) {
      if (c) out << ' ';
      out << static_cast<int>(bg.modal_color[static_cast<std::size_t>(r) * bg.width + c]);
    }
    out << '\n';
  }
}

inline BackgroundModel read_background(std::istream& in) {
  std::string tag;
  BackgroundModel bg;
  if (!(in >> tag >> bg.width >> bg.height) || tag != "BG")
    throw FormatError("background file must start with \"BG width height\"");
  if (bg.width <= 0 || bg.height <= 0) throw FormatError("background dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(bg.width) * bg.height;
  bg.modal_color.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    int v = -1;
    if (!(in >> v)) throw FormatError("background file truncated at value " + std::to_string(p));
    if (v < 0 || v >= kNumSecamClasses) throw FormatError("background value outside [0,7]");
    bg.modal_color[p] = static_cast<std::uint8_t>(v);
  }
  std::string extra;
  if (in >> extra) throw FormatError("trailing data after background values");
  // The file does not record how many frames were used.
  bg.sample_count = 1;
  return bg;
}

inline BackgroundModel load_background(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open background file " + path);
  return read_background(in);
}

inline void save_background(const std::string& path, const BackgroundModel& bg) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write background file " + path);
  write_background(out, bg);
}

// ---------------------------------------------------------------------------
// Sparse feature vectors

/// Sparse feature vector: sorted, duplicate-free active indices into a
/// vector of length `dimension`. Binary unless per-index values are given,
/// in which case `values()[k]` is the feature value at `active()[k]`.
class SparseFeatures {
 public:
  SparseFeatures() = default;

  SparseFeatures(std::size_t dimension, std::vector<std::uint32_t> active)
      : dimension_(dimension), active_(std::move(active)) {
    check();
  }

  SparseFeatures(std::size_t dimension, std::vector<std::uint32_t> active, std::vector<double> values)
      : dimension_(dimension), active_(std::move(active)), values_(std::move(values)) {
    if (values_.size() != active_.size()) throw DimensionError("feature values must match active indices");
    check();
  }

  /// Skips validation; callers guarantee sorted, unique, in-range indices.
  static SparseFeatures from_sorted(std::size_t dimension, std::vector<std::uint32_t> active) {
    SparseFeatures f;
    f.dimension_ = dimension;
    f.active_ = std::move(active);
    return f;
  }

  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<std::uint32_t>& active() const noexcept { return active_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return active_.size(); }
  bool empty() const noexcept { return active_.empty(); }
  bool is_binary() const noexcept { return values_.empty(); }

  /// Value of the k-th active entry (1 for binary vectors).
  double value(std::size_t k) const noexcept { return values_.empty() ? 1.0 : values_[k]; }

  bool contains(std::uint32_t index) const { return std::binary_search(active_.begin(), active_.end(), index); }

  bool operator==(const SparseFeatures&) const = default;

 private:
  void check() const {
    for (std::size_t k = 0; k < active_.size(); ++k) {
      if (active_[k] >= dimension_)
        throw DimensionError("feature index " + std::to_string(active_[k]) + " >= dimension " +
                             std::to_string(dimension_));
      if (k > 0 && active_[k] <= active_[k - 1])
        throw UsageError("feature indices must be strictly increasing");
    }
  }

  std::size_t dimension_ = 0;
  std::vector<std::uint32_t> active_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Encoder

struct EncoderConfig {
  int grid_rows = 14;
  int grid_cols = 16;
  int block_h = 15;
  int block_w = 10;
  int num_colors = kNumSecamClasses;
  int num_actions = kNumActions;

  int screen_height() const { return grid_rows * block_h; }
  int screen_width() const { return grid_cols * block_w; }
  std::size_t state_dimension() const {
    return static_cast<std::size_t>(grid_rows) * grid_cols * num_colors;
  }
  std::size_t state_action_dimension() const {
    return state_dimension() * (static_cast<std::size_t>(num_actions) + 1) + 1;
  }

  /// Same grid, with block sizes derived for a screen of the given size.
  /// Throws if the grid does not divide the screen exactly.
  static EncoderConfig for_screen(int width, int height, int num_actions = kNumActions, int grid_rows = 14,
                                  int grid_cols = 16) {
    if (grid_rows <= 0 || grid_cols <= 0 || height % grid_rows != 0 || width % grid_cols != 0)
      throw DimensionError("grid " + std::to_string(grid_rows) + "x" + std::to_string(grid_cols) +
                           " does not divide screen " + std::to_string(width) + "x" + std::to_string(height));
    EncoderConfig cfg;
    cfg.grid_rows = grid_rows;
    cfg.grid_cols = grid_cols;
    cfg.block_h = height / grid_rows;
    cfg.block_w = width / grid_cols;
    cfg.num_actions = num_actions;
    return cfg;
  }

  bool operator==(const EncoderConfig&) const = default;
};

inline void validate(const EncoderConfig& cfg) {
  if (cfg.grid_rows <= 0 || cfg.grid_cols <= 0 || cfg.block_h <= 0 || cfg.block_w <= 0)
    throw DimensionError("encoder grid and block sizes must be positive");
  if (cfg.num_colors != kNumSecamClasses) throw DimensionError("encoder expects 8 SECAM colors");
  if (cfg.num_actions <= 0) throw DimensionError("encoder needs at least one action");
}

/// BASIC encoding: feature (block_row*grid_cols + block_col)*num_colors + color
/// is active iff some pixel of that block has that class and differs from the
/// background at that pixel.
inline SparseFeatures encode_basic(const SecamScreen& screen, const BackgroundModel& bg, const EncoderConfig& cfg) {
  validate(cfg);
  if (screen.width != cfg.screen_width() || screen.height != cfg.screen_height())
    throw DimensionError("screen " + std::to_string(screen.width) + "x" + std::to_string(screen.height) +
                         " does not match encoder grid " + std::to_string(cfg.screen_width()) + "x" +
                         std::to_string(cfg.screen_height()));
  if (bg.width != screen.width || bg.height != screen.height)
    throw DimensionError("background dimensions do not match screen");
  if (screen.pixels.size() != static_cast<std::size_t>(screen.width) * screen.height ||
      bg.modal_color.size() != screen.pixels.size())
    throw DimensionError("pixel buffer size does not match dimensions");

  const std::size_t blocks = static_cast<std::size_t>(cfg.grid_rows) * cfg.grid_cols;
  std::vector<std::uint8_t> masks(blocks, 0);
  const int w = screen.width;
  std::uint8_t range_check = 0;
  for (int y = 0; y < screen.height; ++y) {
    const std::uint8_t* px = screen.pixels.data() + static_cast<std::size_t>(y) * w;
    const std::uint8_t* bgp = bg.modal_color.data() + static_cast<std::size_t>(y) * w;
    std::uint8_t* row_masks = masks.data() + static_cast<std::size_t>(y / cfg.block_h) * cfg.grid_cols;
    for (int bc = 0; bc < cfg.grid_cols; ++bc) {
      std::uint8_t m = 0;
      const int x0 = bc * cfg.block_w;
      for (int x = x0; x < x0 + cfg.block_w; ++x) {
        const std::uint8_t c = px[x];
        range_check |= c;
        m |= static_cast<std::uint8_t>((c != bgp[x]) << (c & 7));
      }
      row_masks[bc] |= m;
    }
  }
  if (range_check & ~0x7) validate(screen);

  std::vector<std::uint32_t> active;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::uint8_t m = masks[b]; m != 0; m &= static_cast<std::uint8_t>(m - 1)) {
      active.push_back(static_cast<std::uint32_t>(b * kNumSecamClasses + std::countr_zero(m)));
    }
  }
  return SparseFeatures::from_sorted(cfg.state_dimension(), std::move(active));
}

/// State-action features: the state features, an action-major copy at offset
/// n + action*n, and a trailing always-on bias feature.
inline SparseFeatures encode_state_action(const SparseFeatures& basic, int action, int num_actions) {
  if (num_actions <= 0) throw UsageError("num_actions must be positive");
  if (action < 0 || action >= num_actions)
    throw UsageError("action " + std::to_string(action) + " outside [0," + std::to_string(num_actions) + ")");
  if (!basic.is_binary()) throw UsageError("state-action encoding expects binary state features");
  const std::size_t n = basic.dimension();
  const std::size_t dim = n * (static_cast<std::size_t>(num_actions) + 1) + 1;
  std::vector<std::uint32_t> active;
  active.reserve(2 * basic.size() + 1);
  active.insert(active.end(), basic.active().begin(), basic.active().end());
  const auto offset = static_cast<std::uint32_t>(n + static_cast<std::size_t>(action) * n);
  for (auto i : basic.active()) active.push_back(offset + i);
  active.push_back(static_cast<std::uint32_t>(dim - 1));
  return SparseFeatures::from_sorted(dim, std::move(active));
}

/// One-hot state-action features over an enumerable state space.
inline SparseFeatures encode_tabular(std::size_t state, int action, std::size_t num_states, int num_actions) {
  if (state >= num_states) throw UsageError("tabular state out of range");
  if (action < 0 || action >= num_actions) throw UsageError("action out of range");
  const std::size_t dim = num_states * static_cast<std::size_t>(num_actions);
  return SparseFeatures::from_sorted(
      dim, {static_cast<std::uint32_t>(state * static_cast<std::size_t>(num_actions) + action)});
}

// ---------------------------------------------------------------------------
// Weights

/// Dense parameter vector (theta, w and nu all use this type).
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit WeightVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  std::span<const double> view() const noexcept { return values_; }
  std::span<double> view() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const WeightVector&) const = default;

 private:
  std::vector<double> values_;
};

/// Inner product with a sparse feature vector; cost is O(active).
inline double dot(const WeightVector& weights, const SparseFeatures& phi) {
  if (weights.size() != phi.dimension())
    throw DimensionError("weight length " + std::to_string(weights.size()) + " != feature dimension " +
                         std::to_string(phi.dimension()));
  double sum = 0.0;
  const auto& idx = phi.active();
  if (phi.is_binary()) {
    for (auto i : idx) sum += weights[i];
  } else {
    for (std::size_t k = 0; k < idx.size(); ++k) sum += weights[idx[k]] * phi.values()[k];
  }
  return sum;
}

}  // namespace linrl
