#include <gtest/gtest.h>

#include <random>

#include "cbmv/postprocess.hpp"
#include "oracles.hpp"

using namespace cbmv;

namespace {

CostVolume curve_volume(const std::vector<double>& costs) {
  const int n = int(costs.size());
  CostVolume vol(1, n, DisparityRange{n - 1}, 10.0);
  for (int d = 0; d < n; ++d) vol(0, n - 1, d) = costs[std::size_t(d)];
  return vol;
}

StatusMap all_valid(int h, int w) { return StatusMap::Constant(h, w, PixelStatus::valid); }

}  // namespace

TEST(Wta, ArgminAndTieBreak) {
  EXPECT_EQ(wta(curve_volume({3, 1, 2}))(0, 2), 1.0);
  EXPECT_EQ(wta(curve_volume({2, 2}))(0, 1), 0.0);
  // Pixel 0 only has d = 0 available.
  EXPECT_EQ(wta(curve_volume({5, 1, 0}))(0, 0), 0.0);
}

TEST(Subpixel, ParabolaCases) {
  CostVolume a = curve_volume({9, 2, 1, 2});
  DisparityMap m = wta(a);
  EXPECT_DOUBLE_EQ(subpixel_refine(m, a)(0, 3), 2.0);

  CostVolume b = curve_volume({9, 3, 1, 2});
  m = wta(b);
  ASSERT_EQ(m(0, 3), 2.0);
  EXPECT_NEAR(subpixel_refine(m, b)(0, 3), 2.0 + 1.0 / 6.0, 1e-12);

  CostVolume c = curve_volume({0, 3, 4});
  m = wta(c);
  EXPECT_EQ(subpixel_refine(m, c)(0, 2), 0.0);
  CostVolume e = curve_volume({4, 3, 0});
  m = wta(e);
  EXPECT_EQ(subpixel_refine(m, e)(0, 2), 2.0);
}

TEST(LrCheck, ConsistentAndTolerance) {
  DisparityMap left = DisparityMap::Constant(1, 10, 5.0);
  DisparityMap right = DisparityMap::Constant(1, 10, 5.0);
  EXPECT_EQ(lr_check(left, right, 6)(0, 7), PixelStatus::valid);
  right(0, 2) = 5.8;
  EXPECT_EQ(lr_check(left, right, 6)(0, 7), PixelStatus::valid);
  right(0, 2) = 6.2;
  EXPECT_NE(lr_check(left, right, 6)(0, 7), PixelStatus::valid);
}

TEST(LrCheck, OcclusionVersusMismatch) {
  // Every right pixel claims disparity 9, which no candidate d <= 3 can match.
  DisparityMap left = DisparityMap::Constant(1, 8, 2.0);
  DisparityMap right = DisparityMap::Constant(1, 8, 9.0);
  const StatusMap s = lr_check(left, right, 3);
  for (int x = 0; x < 8; ++x) EXPECT_EQ(s(0, x), PixelStatus::occlusion);

  // Right map consistent with d = 1 everywhere, left claims 3: a mismatch.
  left = DisparityMap::Constant(1, 8, 3.0);
  right = DisparityMap::Constant(1, 8, 1.0);
  EXPECT_EQ(lr_check(left, right, 3)(0, 6), PixelStatus::mismatch);
}

TEST(Fill, Cases) {
  DisparityMap m(1, 3);
  m << 5, kInvalidDisparity, 5;
  StatusMap s = all_valid(1, 3);
  s(0, 1) = PixelStatus::occlusion;
  EXPECT_EQ(fill_invalid(m, s)(0, 1), 5.0);

  m << 4, 0, 9;
  EXPECT_EQ(fill_invalid(m, s)(0, 1), 4.0);

  DisparityMap plane = DisparityMap::Constant(7, 7, 7.0);
  StatusMap sp = all_valid(7, 7);
  sp(3, 3) = PixelStatus::mismatch;
  plane(3, 3) = 1.0;
  EXPECT_EQ(fill_invalid(plane, sp)(3, 3), 7.0);

  // A row with no valid pixel copies its neighbour row.
  DisparityMap rows = DisparityMap::Constant(3, 4, 2.0);
  StatusMap sr = all_valid(3, 4);
  sr.row(1).setConstant(PixelStatus::occlusion);
  const DisparityMap filled = fill_invalid(rows, sr);
  EXPECT_TRUE((filled >= 0).all());
}

TEST(Median, ConstantOutlierIdempotent) {
  DisparityMap c = DisparityMap::Constant(9, 9, 3.0);
  EXPECT_TRUE((median_filter(c, 5) == c).all());
  DisparityMap o = c;
  o(4, 4) = 12.0;
  EXPECT_TRUE((median_filter(o, 5) == c).all());

  // Straight-edged regions at least a window wide. Corners where four
  // regions meet are not fixed points of a square median, so none here.
  DisparityMap pc = DisparityMap::Constant(12, 16, 1.0);
  pc.middleCols(5, 6) = 4.0;
  pc.rightCols(5) = 2.5;
  const DisparityMap once = median_filter(pc, 5);
  EXPECT_TRUE((once == pc).all());
  EXPECT_TRUE((median_filter(once, 5) == once).all());
  EXPECT_TRUE((median_filter(pc, 1) == pc).all());
}

TEST(Median, InvalidPixelsDoNotVote) {
  DisparityMap m = DisparityMap::Constant(5, 5, 2.0);
  m(2, 2) = kInvalidDisparity;
  m(0, 0) = kInvalidDisparity;
  EXPECT_EQ(median_filter(m, 3)(2, 2), 2.0);
}

TEST(Bilateral, ConstantMapAndIdentity) {
  std::mt19937_64 rng(1);
  const GrayImage guide = oracle::random_image(10, 10, rng);
  const DisparityMap c = DisparityMap::Constant(10, 10, 6.0);
  const DisparityMap out = bilateral_filter(c, guide, 2.0, 0.1);
  EXPECT_LE((out - c).abs().maxCoeff(), 1e-12);
  const DisparityMap r = oracle::random_image(10, 10, rng) * 5.0;
  EXPECT_TRUE((bilateral_filter(r, guide, 0.0, 0.1) == r).all());
}

TEST(Bilateral, ZeroRangeSigmaOnFlatGuideIsGaussianBlur) {
  std::mt19937_64 rng(2);
  const DisparityMap r = oracle::random_image(9, 11, rng) * 5.0;
  const GrayImage guide = GrayImage::Constant(9, 11, 0.5);
  const double s = 1.0;
  const int rad = 3;
  const DisparityMap out = bilateral_filter(r, guide, s, 0.0);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 11; ++x) {
      double num = 0.0, den = 0.0;
      for (int dy = -rad; dy <= rad; ++dy) {
        for (int dx = -rad; dx <= rad; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= 9 || xx < 0 || xx >= 11) continue;
          const double wgt = std::exp(-(dx * dx + dy * dy) / (2 * s * s));
          num += wgt * r(yy, xx);
          den += wgt;
        }
      }
      EXPECT_NEAR(out(y, x), num / den, 1e-9);
    }
  }
}

TEST(Bilateral, PreservesGuidedEdge) {
  const double sigma = 2.0;
  DisparityMap m = DisparityMap::Constant(20, 30, 3.0);
  GrayImage guide = GrayImage::Constant(20, 30, 0.2);
  m.rightCols(15) = 10.0;
  guide.rightCols(15) = 0.9;
  const DisparityMap out = bilateral_filter(m, guide, sigma, 0.03);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 30; ++x) {
      const double dist = x < 15 ? 15 - x - 0.5 : x - 15 + 0.5;
      if (dist >= 2 * sigma) {
        EXPECT_NEAR(out(y, x), m(y, x), 0.1);
      }
    }
  }
}

TEST(Pipeline, ConsistentVolumesGiveLeftWta) {
  // Cost |d - 3| with a sharp V: WTA = 3 with zero subpixel offset, and the
  // right volume built by shifting is consistent with it.
  CostVolume left(8, 16, DisparityRange{6}, 100.0);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int d = 0; d <= 6; ++d) {
        if (!left.valid(y, x, d)) continue;
        // Pixels left of x = 3 cannot see disparity 3; steer them to 0.
        left(y, x, d) = x < 3 ? d + 5.0 : std::abs(d - 3);
      }
    }
  }
  const CostVolume right = shift_to_right_volume(left);
  const GrayImage img = GrayImage::Constant(8, 16, 0.5);
  const DisparityMap out = postprocess_pipeline(left, right, img, img, PostParams{});
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 16; ++x) EXPECT_EQ(out(y, x), 3.0) << x;
  }
  EXPECT_GE(out.minCoeff(), 0.0);
  EXPECT_LE(out.maxCoeff(), 6.0);
}

TEST(Pipeline, StagesAreReported) {
  std::mt19937_64 rng(3);
  const CostVolume left = oracle::random_volume(6, 10, 3, rng);
  const GrayImage img = oracle::random_image(6, 10, rng);
  std::vector<std::string> names;
  postprocess_pipeline(left, shift_to_right_volume(left), img, img, PostParams{},
                       [&](const std::string& n, const DisparityMap& m) {
                         names.push_back(n);
                         EXPECT_EQ(m.rows(), 6);
                       });
  ASSERT_FALSE(names.empty());
  EXPECT_EQ(names.back(), "final");
}
