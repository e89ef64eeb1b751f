#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>

#include "sar/face/lbph.hpp"
#include "support/face_fixtures.hpp"
#include "support/vision_oracles.hpp"

using namespace sar;
using namespace sar::face;
using oracle::oracle_chi;

namespace {

// Direct neighbour comparison written out long-hand, bit 0 at top-left going
// clockwise.
std::uint8_t oracle_code(const GrayFrame& f, int x, int y) {
  const int c = f.at(x, y);
  int code = 0;
  code |= (f.at(x - 1, y - 1) >= c) << 0;
  code |= (f.at(x, y - 1) >= c) << 1;
  code |= (f.at(x + 1, y - 1) >= c) << 2;
  code |= (f.at(x + 1, y) >= c) << 3;
  code |= (f.at(x + 1, y + 1) >= c) << 4;
  code |= (f.at(x, y + 1) >= c) << 5;
  code |= (f.at(x - 1, y + 1) >= c) << 6;
  code |= (f.at(x - 1, y) >= c) << 7;
  return static_cast<std::uint8_t>(code);
}

}  // namespace

TEST(Lbp, ConstantFaceIsAll255) {
  const auto codes = lbp_map(GrayFrame(6, 5, 77));
  EXPECT_EQ(codes.width, 4);
  EXPECT_EQ(codes.height, 3);
  for (auto c : codes.codes) EXPECT_EQ(c, 255);
}

TEST(Lbp, StrictMaximumCodesZero) {
  GrayFrame f(3, 3, 10);
  f.at(1, 1) = 11;
  EXPECT_EQ(lbp_map(f).at(0, 0), 0);
  f.at(2, 1) = 11;  // right neighbour ties the centre -> bit 3
  EXPECT_EQ(lbp_map(f).at(0, 0), 1 << 3);
}

TEST(Lbp, RandomFaceMatchesDirectComparison) {
  std::mt19937 rng(4);
  const auto f = oracle::random_frame(rng, 8, 8);
  const auto codes = lbp_map(f);
  for (int y = 1; y < 7; ++y)
    for (int x = 1; x < 7; ++x) EXPECT_EQ(codes.at(x - 1, y - 1), oracle_code(f, x, y));
}

TEST(Lbp, TooSmallThrows) {
  try {
    lbp_map(GrayFrame(2, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Size);
  }
}

TEST(Lbp, IlluminationShiftInvariantWhereUnclamped) {
  std::mt19937 rng(6);
  std::uniform_int_distribution<int> px(0, 200);
  GrayFrame f(16, 16);
  for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(px(rng));
  GrayFrame shifted = f;
  for (auto& p : shifted.pixels()) p = static_cast<std::uint8_t>(std::min(255, p + 40));
  EXPECT_EQ(lbp_map(f).codes, lbp_map(shifted).codes);
}

TEST(GridHistogram, All255Codes) {
  LbphParams p;
  p.grid_x = 2;
  p.grid_y = 2;
  CodeImage codes{4, 4, std::vector<std::uint8_t>(16, 255)};
  const auto h = grid_histogram(codes, p);
  ASSERT_EQ(h.size(), 4u * 256u);
  for (int cell = 0; cell < 4; ++cell)
    for (int b = 0; b < 256; ++b) EXPECT_EQ(h[cell * 256 + b], b == 255 ? 1.0 : 0.0);
}

TEST(GridHistogram, DegenerateCellsAreZero) {
  LbphParams p;
  p.grid_x = 4;
  p.grid_y = 1;
  CodeImage codes{3, 2, std::vector<std::uint8_t>(6, 7)};  // width 3 over 4 cells: spans of 0
  const auto h = grid_histogram(codes, p);
  for (int cell = 0; cell < 3; ++cell)
    for (int b = 0; b < 256; ++b) EXPECT_EQ(h[cell * 256 + b], 0.0);
  EXPECT_EQ(h[3 * 256 + 7], 1.0);
}

TEST(GridHistogram, RandomCodesMatchCountingOracle) {
  std::mt19937 rng(12);
  LbphParams p;
  p.grid_x = 3;
  p.grid_y = 4;
  CodeImage codes{17, 22, {}};
  std::uniform_int_distribution<int> c(0, 255);
  for (int i = 0; i < 17 * 22; ++i) codes.codes.push_back(static_cast<std::uint8_t>(c(rng)));
  const auto h = grid_histogram(codes, p);
  // cells: x spans 5,5,7 and y spans 5,5,5,7
  const int xs[] = {0, 5, 10, 17};
  const int ys[] = {0, 5, 10, 15, 22};
  for (int cy = 0; cy < 4; ++cy)
    for (int cx = 0; cx < 3; ++cx) {
      std::map<int, int> counts;
      int n = 0;
      for (int y = ys[cy]; y < ys[cy + 1]; ++y)
        for (int x = xs[cx]; x < xs[cx + 1]; ++x) {
          ++counts[codes.at(x, y)];
          ++n;
        }
      double total = 0;
      for (int b = 0; b < 256; ++b) {
        const double v = h[(cy * 3 + cx) * 256 + b];
        EXPECT_NEAR(v, counts.count(b) ? counts[b] / double(n) : 0.0, 1e-15);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
}

TEST(ChiSquare, Basics) {
  const std::vector<double> a{1, 0}, b{0, 1};
  EXPECT_DOUBLE_EQ(chi_square(a, b), 2.0);
  EXPECT_DOUBLE_EQ(chi_square(a, a), 0.0);
  const std::vector<double> c{1, 0, 0};
  try {
    chi_square(a, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(ChiSquare, RandomPairsMatchLoopAndAreSymmetric) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(64), b(64);
    for (auto& v : a) v = u(rng) < 0.3 ? 0.0 : u(rng);
    for (auto& v : b) v = u(rng) < 0.3 ? 0.0 : u(rng);
    const double d = chi_square(a, b);
    EXPECT_NEAR(d, oracle_chi(a, b), 1e-12);
    EXPECT_EQ(d, chi_square(b, a));
    EXPECT_GE(d, 0.0);
  }
}

TEST(Train, TemplateCounts) {
  const auto faces = oracle::synthetic_enrollment();
  EXPECT_EQ(train({}, {faces.front()}).templates().size(), 1u);
  EXPECT_EQ(train({}, faces).templates().size(), 15u);
  try {
    train({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Train, TemplatesArePerCellNormalised) {
  const auto model = train({}, oracle::synthetic_enrollment());
  for (const auto& t : model.templates()) {
    ASSERT_EQ(t.histogram.size(), 64u * 256u);
    for (int cell = 0; cell < 64; ++cell) {
      double s = 0;
      for (int b = 0; b < 256; ++b) s += t.histogram[cell * 256 + b];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Predict, SelfMatchIsExactZero) {
  const auto faces = oracle::synthetic_enrollment();
  const auto model = train({}, faces);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto p = model.predict(faces[i].face);
    ASSERT_TRUE(p.known());
    EXPECT_EQ(*p.label, faces[i].label);
    EXPECT_EQ(p.distance, 0.0);
  }
}

TEST(Predict, NonSquareInputIsResampled) {
  std::mt19937 rng(3);
  const auto wide = oracle::random_frame(rng, 90, 70);
  const auto model = train({}, {{"w", wide, ""}});
  const auto p = model.predict(wide);
  EXPECT_EQ(p.distance, 0.0);
  EXPECT_EQ(resample_bilinear(wide, 64, 64).width(), 64);
}

TEST(Predict, ThresholdZeroRejectsNonzero) {
  const auto faces = oracle::synthetic_enrollment();
  LbphParams params;
  params.unknown_threshold = 0.0;
  const auto model = train(params, {faces[0]});
  EXPECT_TRUE(model.predict(faces[0].face).known());
  const auto p = model.predict(oracle::translate(faces[0].face, 1, 0));
  EXPECT_GT(p.distance, 0.0);
  EXPECT_FALSE(p.known());
}

TEST(Predict, UntrainedIsStateError) {
  LbphModel model;
  try {
    (void)model.predict(GrayFrame(64, 64, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
}

TEST(Predict, TranslatedQueriesAllCorrect) {
  const auto faces = oracle::synthetic_enrollment();
  const auto model = train({}, faces);
  int correct = 0, total = 0;
  for (const auto& f : faces) {
    for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const auto q = oracle::translate(f.face, dx, dy);
      const auto p = model.predict(q);
      // exhaustive oracle: nearest template by brute scan
      const auto qh = describe(q, model.params());
      double best = 1e300;
      std::string best_label;
      for (const auto& t : model.templates()) {
        const double d = oracle_chi(qh, t.histogram);
        if (d < best) {
          best = d;
          best_label = t.label;
        }
      }
      EXPECT_NEAR(p.distance, best, 1e-9);
      ASSERT_TRUE(p.known()) << p.distance;
      EXPECT_EQ(*p.label, best_label);
      correct += (*p.label == f.label);
      ++total;
    }
  }
  EXPECT_EQ(correct, total);
}

TEST(Predict, RaisingThresholdNeverCreatesUnknown) {
  const auto faces = oracle::synthetic_enrollment();
  auto model = train({}, faces);
  std::mt19937 rng(9);
  for (int i = 0; i < 10; ++i) {
    const auto q = oracle::random_frame(rng, 64, 64);
    model.set_unknown_threshold(20.0);
    const auto lo = model.predict(q);
    model.set_unknown_threshold(200.0);
    const auto hi = model.predict(q);
    if (lo.known()) {
      EXPECT_TRUE(hi.known());
    }
    if (hi.known()) {
      bool present = false;
      for (const auto& t : model.templates()) present |= (t.label == *hi.label);
      EXPECT_TRUE(present);
    }
  }
}

TEST(Persistence, JsonRoundTripAndEnrollmentDir) {
  namespace fs = std::filesystem;
  const auto faces = oracle::synthetic_enrollment();
  const auto model = train({}, faces);
  const auto back = lbph_from_json(to_json(model));
  ASSERT_EQ(back.templates().size(), model.templates().size());
  EXPECT_EQ(back.predict(faces[7].face).distance, 0.0);
  EXPECT_EQ(to_json(model)["v"], 1);

  auto bad = to_json(model);
  bad["v"] = 2;
  EXPECT_THROW(lbph_from_json(bad), Error);

  const auto root = fs::temp_directory_path() / "sar_enroll_test";
  fs::remove_all(root);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    fs::create_directories(root / faces[i].label);
    vision::save_pgm(faces[i].face, root / faces[i].label / ("image" + std::to_string(i % 5) + ".pgm"));
  }
  const auto loaded = load_enrollment(root);
  ASSERT_EQ(loaded.size(), 15u);
  EXPECT_EQ(loaded[0].label, "person0");
  EXPECT_EQ(loaded[14].label, "person2");
  EXPECT_EQ(loaded[5].face, faces[5].face);
}
