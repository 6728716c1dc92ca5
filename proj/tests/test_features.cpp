#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "linrl/features.hpp"
#include "linrl/random.hpp"

using namespace linrl;

namespace {

SecamScreen random_secam(Rng& rng, int w = kScreenWidth, int h = kScreenHeight) {
  SecamScreen s(w, h);
  for (auto& p : s.pixels) p = static_cast<std::uint8_t>(uniform_index(rng, 8));
  return s;
}

BackgroundModel background_of(const SecamScreen& s) { return {s.width, s.height, s.pixels, 1}; }

// Reference encoder: per block, the set of classes present at pixels that
// differ from the background.
std::vector<std::uint32_t> brute_force_basic(const SecamScreen& s, const BackgroundModel* bg) {
  std::set<std::uint32_t> out;
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      const auto cls = s.at(r, c);
      if (bg && bg->modal_color[static_cast<std::size_t>(r) * s.width + c] == cls) continue;
      out.insert(static_cast<std::uint32_t>(((r / 15) * 16 + c / 10) * 8 + cls));
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace

TEST(Secam, DefaultPaletteExtractsBitsOneToThree) {
  const Palette p = default_palette();
  EXPECT_EQ(p[13], 6);
  EXPECT_EQ(p[0], 0);
  EXPECT_EQ(p[127], 7);
  for (int c = 0; c < 128; ++c) EXPECT_EQ(p[c], (c >> 1) & 7);
}

TEST(Secam, AllZeroScreenMapsToClassZero) {
  const SecamScreen s = secam_reduce(Screen(160, 210, 0), default_palette());
  EXPECT_EQ(s.width, 160);
  EXPECT_EQ(s.height, 210);
  for (auto v : s.pixels) EXPECT_EQ(v, 0);
}

TEST(Secam, ReductionIsIdempotentUnderIdentityExtension) {
  Rng rng(7);
  Screen raw(160, 210);
  for (auto& p : raw.pixels) p = static_cast<std::uint8_t>(uniform_index(rng, 128));
  const Palette pal = default_palette();
  const SecamScreen once = secam_reduce(raw, pal);
  Palette identity_ext = pal;
  for (int c = 0; c < 8; ++c) identity_ext[c] = static_cast<std::uint8_t>(c);
  Screen again(once.width, once.height);
  again.pixels = once.pixels;
  EXPECT_EQ(secam_reduce(again, identity_ext), once);
}

TEST(Secam, PixelOutOfRangeIsMalformed) {
  Screen s(160, 210, 0);
  s.at(5, 5) = 128;
  EXPECT_THROW(secam_reduce(s, default_palette()), MalformedScreen);
}

TEST(Palette, FileRoundTripAndErrors) {
  Palette p = default_palette();
  p[5] = 7;
  std::stringstream ss;
  write_palette(ss, p);
  EXPECT_EQ(read_palette(ss), p);

  std::stringstream missing("0 0\n1 0\n");
  EXPECT_THROW(read_palette(missing), FormatError);
  std::stringstream bad_class;
  for (int c = 0; c < 128; ++c) bad_class << c << ' ' << (c == 3 ? 9 : 0) << '\n';
  EXPECT_THROW(read_palette(bad_class), FormatError);
}

TEST(Background, ModeWithLowestClassTieBreak) {
  SecamScreen a(2, 1), b(2, 1), c(2, 1);
  a.pixels = {1, 1};
  b.pixels = {1, 2};
  c.pixels = {2, 2};
  const std::vector<SecamScreen> three{a, b, c};
  const BackgroundModel bg = compute_background(three);
  EXPECT_EQ(bg.modal_color[0], 1);  // {1,1,2}
  EXPECT_EQ(bg.modal_color[1], 2);  // {1,2,2}
  EXPECT_EQ(bg.sample_count, 3u);

  const std::vector<SecamScreen> tie{a, c};
  EXPECT_EQ(compute_background(tie).modal_color[0], 1);  // {1,2}
}

TEST(Background, IdenticalFramesGiveThatFrame) {
  Rng rng(3);
  const SecamScreen s = random_secam(rng);
  const std::vector<SecamScreen> frames{s, s, s};
  EXPECT_EQ(compute_background(frames).modal_color, s.pixels);
}

TEST(Background, Errors) {
  EXPECT_THROW(compute_background(std::vector<SecamScreen>{}), UsageError);
  const std::vector<SecamScreen> mismatched{SecamScreen(2, 2), SecamScreen(3, 2)};
  EXPECT_THROW(compute_background(mismatched), DimensionError);
}

TEST(Background, FileRoundTrip) {
  Rng rng(11);
  const BackgroundModel bg = background_of(random_secam(rng, 20, 6));
  std::stringstream ss;
  write_background(ss, bg);
  EXPECT_EQ(ss.str().substr(0, 8), "BG 20 6\n");
  const BackgroundModel back = read_background(ss);
  EXPECT_EQ(back.width, 20);
  EXPECT_EQ(back.height, 6);
  EXPECT_EQ(back.modal_color, bg.modal_color);

  std::stringstream truncated("BG 2 2\n0 1\n");
  EXPECT_THROW(read_background(truncated), FormatError);
  std::stringstream bad_value("BG 1 1\n8\n");
  EXPECT_THROW(read_background(bad_value), FormatError);
}

TEST(Encoder, DefaultDimensions) {
  const EncoderConfig cfg;
  EXPECT_EQ(cfg.state_dimension(), 1792u);
  EXPECT_EQ(cfg.state_action_dimension(), 34049u);
  EXPECT_EQ(cfg.screen_height(), 210);
  EXPECT_EQ(cfg.screen_width(), 160);
}

TEST(Encoder, ScreenEqualToBackgroundIsEmpty) {
  Rng rng(5);
  const SecamScreen s = random_secam(rng);
  const SparseFeatures f = encode_basic(s, background_of(s), EncoderConfig{});
  EXPECT_TRUE(f.empty());
  EXPECT_EQ(f.dimension(), 1792u);
}

TEST(Encoder, SinglePixelAtOrigin) {
  const SecamScreen bg_screen(160, 210, 0);
  SecamScreen s = bg_screen;
  s.at(0, 0) = 3;
  const SparseFeatures f = encode_basic(s, background_of(bg_screen), EncoderConfig{});
  EXPECT_EQ(f.active(), (std::vector<std::uint32_t>{3}));
}

TEST(Encoder, DimensionMismatchThrows) {
  const SecamScreen s(100, 100);
  EXPECT_THROW(encode_basic(s, background_of(s), EncoderConfig{}), DimensionError);
  const SecamScreen ok(160, 210);
  EXPECT_THROW(encode_basic(ok, background_of(SecamScreen(160, 200)), EncoderConfig{}), DimensionError);
}

TEST(Encoder, MatchesBruteForceOnRandomScreens) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    // Sparse foreground over a random background so subtraction matters.
    const SecamScreen bg_screen = random_secam(rng);
    SecamScreen s = bg_screen;
    const int changes = static_cast<int>(uniform_index(rng, 400));
    for (int k = 0; k < changes; ++k)
      s.pixels[uniform_index(rng, s.pixels.size())] = static_cast<std::uint8_t>(uniform_index(rng, 8));
    const BackgroundModel bg = background_of(bg_screen);
    const SparseFeatures f = encode_basic(s, bg, EncoderConfig{});
    EXPECT_EQ(f.active(), brute_force_basic(s, &bg));
  }
}

TEST(Encoder, AllDistinctBackgroundEqualsNoSubtraction) {
  Rng rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const SecamScreen s = random_secam(rng);
    BackgroundModel bg = background_of(s);
    for (auto& v : bg.modal_color) v = static_cast<std::uint8_t>((v + 1 + uniform_index(rng, 7)) % 8);
    EXPECT_EQ(encode_basic(s, bg, EncoderConfig{}).active(), brute_force_basic(s, nullptr));
  }
}

TEST(Encoder, PropertiesOnRandomScreens) {
  Rng rng(23);
  const EncoderConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const SecamScreen s = random_secam(rng);
    const SecamScreen bg_screen = random_secam(rng);
    const SparseFeatures f = encode_basic(s, background_of(bg_screen), cfg);
    EXPECT_LE(f.size(), cfg.state_dimension());
    std::vector<int> per_block(14 * 16, 0);
    for (auto idx : f.active()) {
      const int block = static_cast<int>(idx / 8);
      const int color = static_cast<int>(idx % 8);
      ++per_block[block];
      // Decoding recovers a (block, color) pair present in the screen.
      const int br = block / 16, bc = block % 16;
      bool present = false;
      for (int r = br * 15; r < br * 15 + 15 && !present; ++r)
        for (int c = bc * 10; c < bc * 10 + 10 && !present; ++c) present = s.at(r, c) == color;
      EXPECT_TRUE(present) << "index " << idx;
    }
    for (int n : per_block) EXPECT_LE(n, 8);
  }
}

TEST(StateAction, ExampleOffsets) {
  const SparseFeatures basic(1792, {3});
  const SparseFeatures sa = encode_state_action(basic, 2, 18);
  EXPECT_EQ(sa.dimension(), 34049u);
  EXPECT_EQ(sa.active(), (std::vector<std::uint32_t>{3, 5379, 34048}));
}

TEST(StateAction, EmptyBasicGivesBiasOnly) {
  const SparseFeatures basic(1792, {});
  for (int a : {0, 7, 17}) EXPECT_EQ(encode_state_action(basic, a, 18).active(), (std::vector<std::uint32_t>{34048}));
}

TEST(StateAction, ActionOutOfRange) {
  const SparseFeatures basic(1792, {1});
  EXPECT_THROW(encode_state_action(basic, 18, 18), UsageError);
  EXPECT_THROW(encode_state_action(basic, -1, 18), UsageError);
}

TEST(StateAction, SizeAndBiasProperty) {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::set<std::uint32_t> idx;
    const auto k = uniform_index(rng, 200);
    for (std::size_t i = 0; i < k; ++i) idx.insert(static_cast<std::uint32_t>(uniform_index(rng, 1792)));
    const SparseFeatures basic(1792, {idx.begin(), idx.end()});
    const int a = static_cast<int>(uniform_index(rng, 18));
    const SparseFeatures sa = encode_state_action(basic, a, 18);
    EXPECT_EQ(sa.size(), 2 * basic.size() + 1);
    EXPECT_TRUE(sa.contains(34048));
    for (auto i : basic.active()) {
      EXPECT_TRUE(sa.contains(i));
      EXPECT_TRUE(sa.contains(static_cast<std::uint32_t>(1792 + a * 1792 + i)));
    }
  }
}

TEST(SparseFeatures, RejectsInvalidIndexLists) {
  EXPECT_THROW(SparseFeatures(10, {3, 3}), UsageError);
  EXPECT_THROW(SparseFeatures(10, {4, 2}), UsageError);
  EXPECT_THROW(SparseFeatures(10, {10}), DimensionError);
}

TEST(Dot, Examples) {
  WeightVector w(34049, 0.0);
  const SparseFeatures phi(34049, {3, 34048});
  EXPECT_EQ(dot(w, phi), 0.0);
  w[3] = 0.5;
  w[34048] = 0.25;
  EXPECT_EQ(dot(w, phi), 0.75);
  EXPECT_EQ(dot(w, SparseFeatures(34049, {})), 0.0);
  EXPECT_THROW(dot(WeightVector(5), phi), DimensionError);
}

TEST(Dot, IsLinearInWeights) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 500;
    WeightVector w1(n), w2(n), sum(n);
    for (std::size_t i = 0; i < n; ++i) {
      w1[i] = uniform_real(rng) * 2 - 1;
      w2[i] = uniform_real(rng) * 2 - 1;
      sum[i] = w1[i] + w2[i];
    }
    std::set<std::uint32_t> idx;
    for (int k = 0; k < 40; ++k) idx.insert(static_cast<std::uint32_t>(uniform_index(rng, n)));
    const SparseFeatures phi(n, {idx.begin(), idx.end()});
    EXPECT_NEAR(dot(sum, phi), dot(w1, phi) + dot(w2, phi), 1e-12);
  }
}

TEST(Tabular, OneHotIndex) {
  const SparseFeatures f = encode_tabular(3, 2, 5, 4);
  EXPECT_EQ(f.dimension(), 20u);
  EXPECT_EQ(f.active(), (std::vector<std::uint32_t>{14}));
  EXPECT_THROW(encode_tabular(5, 0, 5, 4), UsageError);
}
