#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "sar/vision/cascade.hpp"
#include "sar/vision/detect.hpp"
#include "sar/vision/frame.hpp"
#include "sar/vision/image_io.hpp"
#include "support/vision_oracles.hpp"

using namespace sar;
using namespace sar::vision;

namespace {

Cascade single_stage(double stage_threshold) {
  Cascade c;
  c.base_width = 8;
  c.base_height = 8;
  c.stages.push_back({stage_threshold,
                      {WeakClassifier{{{0, 0, 4, 8, 1.0}, {4, 0, 4, 8, -1.0}}, 0.0, 1.0, -1.0}}});
  return c;
}

}  // namespace

TEST(Integral, ZeroFrame) {
  const auto ip = compute_integral(GrayFrame(4, 4, 0));
  for (int y = 0; y <= 4; ++y)
    for (int x = 0; x <= 4; ++x) {
      EXPECT_EQ(ip.sum(x, y), 0);
      EXPECT_EQ(ip.squared_sum(x, y), 0);
    }
}

TEST(Integral, TwoByTwo) {
  const auto ip = compute_integral(GrayFrame(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(ip.sum(2, 2), 10);
  EXPECT_EQ(ip.squared_sum(2, 2), 30);
  EXPECT_EQ(rect_sum(ip, 0, 0, 2, 2), 10);
  EXPECT_EQ(rect_sum(ip, 1, 0, 0, 2), 0);
}

TEST(Integral, RandomFrameMatchesPrefixLoops) {
  std::mt19937 rng(11);
  const auto f = oracle::random_frame(rng, 32, 32);
  const auto ip = compute_integral(f);
  for (int y = 0; y <= 32; ++y)
    for (int x = 0; x <= 32; ++x) {
      ASSERT_EQ(ip.sum(x, y), oracle::loop_sum(f, 0, 0, x, y));
      ASSERT_EQ(ip.squared_sum(x, y), oracle::loop_squared_sum(f, 0, 0, x, y));
    }
  for (int x = 0; x <= 32; ++x) {
    EXPECT_EQ(ip.sum(x, 0), 0);
    EXPECT_EQ(ip.sum(0, x), 0);
  }
}

TEST(Integral, RandomRectsMatchLoop) {
  std::mt19937 rng(5);
  const auto f = oracle::random_frame(rng, 41, 29);
  const auto ip = compute_integral(f);
  for (int i = 0; i < 200; ++i) {
    const int x = std::uniform_int_distribution<int>(0, 41)(rng);
    const int y = std::uniform_int_distribution<int>(0, 29)(rng);
    const int w = std::uniform_int_distribution<int>(0, 41 - x)(rng);
    const int h = std::uniform_int_distribution<int>(0, 29 - y)(rng);
    ASSERT_EQ(rect_sum(ip, x, y, w, h), oracle::loop_sum(f, x, y, w, h));
  }
}

TEST(Integral, OutOfBoundsRectThrows) {
  const auto ip = compute_integral(GrayFrame(4, 4, 1));
  try {
    rect_sum(ip, 2, 2, 3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Bounds);
  }
  EXPECT_THROW(rect_sum(ip, -1, 0, 1, 1), Error);
}

TEST(Frame, RejectsBadShapes) {
  EXPECT_THROW(GrayFrame(0, 3), Error);
  EXPECT_THROW(GrayFrame(4097, 3), Error);
  EXPECT_THROW(GrayFrame(2, 2, std::vector<std::uint8_t>{1, 2, 3}), Error);
}

TEST(Cascade, AlwaysPassStageAcceptsAnything) {
  std::mt19937 rng(3);
  const auto c = single_stage(kAlwaysPass);
  const auto f = oracle::random_frame(rng, 16, 16);
  const auto ip = compute_integral(f);
  for (int y = 0; y + 8 <= 16; ++y)
    for (int x = 0; x + 8 <= 16; ++x) EXPECT_TRUE(eval_window(c, ip, {x, y, 1.0}).accepted);
}

TEST(Cascade, ConstantFrameFeatureCancels) {
  // Equal-area rects with weights +1/-1 cancel on a flat frame; sigma clamps
  // to 1 so the normalised value is exactly 0, which is >= split 0.
  auto c = single_stage(0.5);
  const auto ip = compute_integral(GrayFrame(8, 8, 137));
  const auto r = eval_window(c, ip, {0, 0, 1.0});
  EXPECT_TRUE(r.accepted);
  EXPECT_DOUBLE_EQ(r.score, 0.5);
  c.stages[0].weak[0].split_threshold = 1e-9;
  EXPECT_FALSE(eval_window(c, ip, {0, 0, 1.0}).accepted);
}

TEST(Cascade, WindowBoundsAndScale) {
  const auto c = single_stage(0.0);
  const auto ip = compute_integral(GrayFrame(10, 10, 1));
  EXPECT_THROW(eval_window(c, ip, {3, 0, 1.0}), Error);
  EXPECT_NO_THROW(eval_window(c, ip, {0, 0, 1.3}));  // 10.4 rounds to 10
  EXPECT_THROW(eval_window(c, ip, {0, 0, 1.4}), Error);
  EXPECT_THROW(eval_window(c, ip, {0, 0, 0.5}), Error);
}

TEST(Cascade, ThreeStageMatchesBruteEvaluator) {
  std::mt19937 rng(21);
  const auto c = oracle::three_stage_cascade();
  int accepted = 0, total = 0;
  for (int frame = 0; frame < 4; ++frame) {
    const auto f = oracle::random_frame(rng, 24, 24);
    const auto ip = compute_integral(f);
    for (const double s : {1.0, 1.25, 1.5, 2.0}) {
      const int ww = scaled_extent(12, s);
      for (int y = 0; y + ww <= 24; ++y)
        for (int x = 0; x + ww <= 24; ++x) {
          double oracle_score = 0;
          const bool oracle = oracle::brute_eval(c, f, {x, y, s}, &oracle_score);
          const auto r = eval_window(c, ip, {x, y, s});
          ASSERT_EQ(r.accepted, oracle) << x << "," << y << " s=" << s;
          ASSERT_DOUBLE_EQ(r.score, oracle_score);
          accepted += r.accepted;
          ++total;
        }
    }
  }
  EXPECT_GT(accepted, 0);
  EXPECT_LT(accepted, total);
}

TEST(Cascade, RemovingAStageNeverShrinksAcceptance) {
  std::mt19937 rng(8);
  const auto full = oracle::three_stage_cascade();
  for (std::size_t drop = 0; drop < full.stages.size(); ++drop) {
    auto reduced = full;
    reduced.stages.erase(reduced.stages.begin() + static_cast<std::ptrdiff_t>(drop));
    const auto f = oracle::random_frame(rng, 24, 24);
    const auto ip = compute_integral(f);
    for (int y = 0; y + 12 <= 24; ++y)
      for (int x = 0; x + 12 <= 24; ++x)
        if (eval_window(full, ip, {x, y, 1.0}).accepted) {
          EXPECT_TRUE(eval_window(reduced, ip, {x, y, 1.0}).accepted);
        }
  }
}

TEST(Cascade, JsonRoundTripAndValidation) {
  const auto c = oracle::three_stage_cascade();
  const auto back = cascade_from_json(cascade_to_json(c));
  EXPECT_EQ(cascade_to_json(back), cascade_to_json(c));

  auto j = cascade_to_json(single_stage(kAlwaysPass));
  EXPECT_EQ(j["stages"][0]["threshold"], "-inf");
  EXPECT_EQ(cascade_from_json(j).stages[0].stage_threshold, kAlwaysPass);

  j["stages"][0]["weak"][0]["rects"][0] = {6, 0, 4, 8, 1.0};  // spills past base width 8
  EXPECT_THROW(cascade_from_json(j), Error);
  EXPECT_THROW(cascade_from_json(nlohmann::json{{"base_window", {8, 8}}, {"stages", nlohmann::json::array()}}),
               Error);
}

TEST(Detect, AlwaysRejectGivesNothing) {
  std::mt19937 rng(1);
  EXPECT_TRUE(detect_faces(single_stage(kNeverPass), oracle::random_frame(rng, 32, 32)).empty());
}

TEST(Detect, FrameSmallerThanBaseIsEmpty) {
  EXPECT_TRUE(detect_faces(single_stage(kAlwaysPass), GrayFrame(7, 20, 0)).empty());
}

TEST(Detect, ExactBaseFrameGivesOneBox) {
  DetectParams p;
  p.min_neighbors = 1;
  const auto boxes = detect_faces(single_stage(kAlwaysPass), GrayFrame(8, 8, 50), p);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].x, 0);
  EXPECT_EQ(boxes[0].y, 0);
  EXPECT_EQ(boxes[0].w, 8);
  EXPECT_EQ(boxes[0].h, 8);
  EXPECT_EQ(boxes[0].neighbors, 1);
}

TEST(Detect, BrightSquareMatchesExhaustiveScan) {
  const auto c = oracle::bright_square_cascade();
  const auto f = oracle::bright_square_frame(64, 64, 18, 22, 24);
  DetectParams p;
  const auto raw = scan_windows(c, compute_integral(f), p);
  const auto oracle = oracle::brute_scan(c, f, p);
  ASSERT_EQ(raw.size(), oracle.size());
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(raw[i].box, oracle[i]);
  ASSERT_FALSE(raw.empty());

  std::vector<Rect> boxes;
  for (const auto& h : raw) boxes.push_back(h.box);
  EXPECT_EQ(cluster_hits(raw), oracle::brute_components(boxes));

  const auto found = detect_faces(c, f, p);
  ASSERT_FALSE(found.empty());
  const double cx = found[0].x + found[0].w / 2.0;
  const double cy = found[0].y + found[0].h / 2.0;
  EXPECT_NEAR(cx, 18 + 12, 2.0);
  EXPECT_NEAR(cy, 22 + 12, 2.0);
}

TEST(Detect, ScanCompletenessAndDeterminism) {
  std::mt19937 rng(77);
  const auto c = oracle::three_stage_cascade();
  DetectParams p;
  p.min_neighbors = 2;
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = oracle::random_frame(rng, 40, 36);
    const auto ip = compute_integral(f);
    const auto raw = scan_windows(c, ip, p);
    for (const auto& h : raw) EXPECT_TRUE(eval_window(c, ip, h.window).accepted);
    const auto a = detect_faces(c, f, p);
    const auto b = detect_faces(c, f, p);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GE(a[i].neighbors, p.min_neighbors);
      EXPECT_EQ(to_json(a[i]), to_json(b[i]));
      EXPECT_GE(a[i].x, 0);
      EXPECT_LE(a[i].x + a[i].w, f.width());
      EXPECT_LE(a[i].y + a[i].h, f.height());
      if (i > 0) {
        EXPECT_GE(a[i - 1].score, a[i].score);
      }
    }
  }
}

TEST(ImageIo, PgmAndPngRoundTrip) {
  std::mt19937 rng(2);
  const auto f = oracle::random_frame(rng, 13, 7);
  EXPECT_EQ(decode_pgm(encode_pgm(f)), f);
  EXPECT_EQ(decode_png(encode_png(f)), f);

  const auto dir = std::filesystem::temp_directory_path() / "sar_io_test";
  std::filesystem::create_directories(dir);
  save_pgm(f, dir / "a.pgm");
  EXPECT_EQ(load_frame(dir / "a.pgm"), f);
  {
    std::ofstream out(dir / "b.png", std::ios::binary);
    const auto bytes = encode_png(f);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_EQ(load_frame(dir / "b.png"), f);
}

TEST(ImageIo, RejectsOtherFormats) {
  try {
    decode_pgm("P2\n2 2\n255\n1 2 3 4");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
  }
  EXPECT_THROW(decode_pgm("P5\n2 2\n65535\n"), Error);
  EXPECT_THROW(decode_pgm("P5\n2 2\n255\n\x01\x02"), Error);
  const auto dir = std::filesystem::temp_directory_path() / "sar_io_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "c.bmp", std::ios::binary);
    out << "BM....";
  }
  try {
    load_frame(dir / "c.bmp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
  }
}
