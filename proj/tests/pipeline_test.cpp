#include "radiogan/pipeline.hpp"

#include "radiogan/phantom.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace radiogan;

TEST(Resample, IdentityAtTargetSpacing) {
  Rng rng(1);
  const Volume v = fixtures::random_volume(rng, {5, 6, 7}, {2, 2, 2});
  const Volume out = resample_nearest(v, 2.0);
  EXPECT_EQ(out.dims.z, 5);
  EXPECT_EQ(out.dims.y, 6);
  EXPECT_EQ(out.dims.x, 7);
  EXPECT_EQ(out.voxels, v.voxels);
}

TEST(Resample, ConstantVolumeStaysConstant) {
  Volume v({4, 3, 5}, {3.3, 1.7, 4.06});
  v.voxels.setConstant(2.5f);
  for (double t : {0.5, 1.0, 2.0, 7.0}) {
    const Volume out = resample_nearest(v, t);
    EXPECT_EQ(out.spacing.z, t);
    EXPECT_EQ(out.spacing.x, t);
    EXPECT_TRUE((out.voxels.array() == 2.5f).all());
  }
}

TEST(Resample, MatchesBruteForceOnClinicalSpacing) {
  Rng rng(2);
  const Volume v = fixtures::random_volume(rng, {5, 4, 3}, {4.06, 4.06, 2.0});
  const Volume out = resample_nearest(v, 2.0);
  const Volume ref = fixtures::brute_resample(v, 2.0);
  EXPECT_EQ(out.dims.z, 10);
  EXPECT_EQ(out.dims.y, 8);
  EXPECT_EQ(out.dims.x, 3);
  EXPECT_EQ(out.dims.z, ref.dims.z);
  EXPECT_EQ(out.voxels, ref.voxels);
}

TEST(Resample, MatchesBruteForceOnRandomVolumes) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims3 d{draw_int(rng, 1, 8), draw_int(rng, 1, 8), draw_int(rng, 1, 8)};
    const Spacing3 s{draw_uniform(rng, 0.3, 5.0), draw_uniform(rng, 0.3, 5.0), draw_uniform(rng, 0.3, 5.0)};
    const double t = draw_uniform(rng, 0.5, 4.0);
    const Volume v = fixtures::random_volume(rng, d, s);
    const Volume out = resample_nearest(v, t);
    const Volume ref = fixtures::brute_resample(v, t);
    ASSERT_EQ(out.dims.count(), ref.dims.count());
    ASSERT_EQ(out.voxels, ref.voxels) << "trial " << trial;
  }
}

TEST(Resample, TiesGoToTheLowerIndex) {
  // Input centres at 1 and 3 (spacing 2); a single output voxel of spacing 4 has its centre at 2.
  Volume v({1, 1, 2}, {1, 1, 2});
  v.voxels << 10.0f, 20.0f;
  const Volume out = resample_nearest(v, 4.0);
  ASSERT_EQ(out.dims.x, 1);
  EXPECT_EQ(out.voxels[0], 10.0f);
}

TEST(Resample, CreatesNoNewValues) {
  Rng rng(4);
  const Volume v = fixtures::random_volume(rng, {6, 5, 4}, {1.3, 2.9, 0.7});
  const std::set<float> in(v.voxels.data(), v.voxels.data() + v.voxels.size());
  const Volume out = resample_nearest(v, 1.1);
  for (Index n = 0; n < out.voxels.size(); ++n) EXPECT_TRUE(in.count(out.voxels[n]));
}

TEST(Resample, RejectsNonPositiveSpacing) {
  Volume v({2, 2, 2}, {1, 1, 1});
  EXPECT_THROW(resample_nearest(v, 0.0), std::invalid_argument);
  EXPECT_THROW(resample_nearest(v, -1.0), std::invalid_argument);
  v.spacing.y = 0;
  EXPECT_THROW(resample_nearest(v, 1.0), std::invalid_argument);
}

TEST(NormalizeSuv, MapsRangeAndClamps) {
  Volume v({1, 1, 6}, {1, 1, 1});
  v.voxels << 0.0f, 30.0f, 45.0f, 15.0f, 7.5f, 0.0f;
  const Volume out = normalize_suv(v, 30.0);
  EXPECT_EQ(out.voxels[0], 0.0f);
  EXPECT_EQ(out.voxels[1], 1.0f);
  EXPECT_EQ(out.voxels[2], 1.0f);
  EXPECT_EQ(out.voxels[3], 0.5f);
  EXPECT_EQ(out.voxels[4], 0.25f);
  EXPECT_THROW(normalize_suv(v, 0.0), std::invalid_argument);
  EXPECT_THROW(normalize_suv(v, -3.0), std::invalid_argument);
}

TEST(NormalizeSuv, MonotoneIntoUnitInterval) {
  Rng rng(5);
  Volume v = fixtures::random_volume(rng, {4, 4, 4}, {1, 1, 1}, 60.0);
  const Volume out = normalize_suv(v, 30.0);
  EXPECT_GE(out.voxels.minCoeff(), 0.0f);
  EXPECT_LE(out.voxels.maxCoeff(), 1.0f);
  for (Index a = 0; a < v.voxels.size(); ++a)
    for (Index b = 0; b < v.voxels.size(); ++b)
      if (v.voxels[a] <= v.voxels[b]) {
        ASSERT_LE(out.voxels[a], out.voxels[b]);
      }
}

TEST(Mip, AllZeroAndOneHot) {
  Volume v({6, 5, 4}, {1, 1, 1});
  v.voxels.setZero();
  EXPECT_TRUE((mip_project(v, Axis::y).array() == 0.0f).all());
  v(2, 3, 1) = 1.0f;
  const Image<float> over_x = mip_project(v, Axis::x);
  ASSERT_EQ(over_x.rows(), 6);
  ASSERT_EQ(over_x.cols(), 5);
  EXPECT_EQ(over_x.sum(), 1.0f);
  EXPECT_EQ(over_x(2, 3), 1.0f);
  const Image<float> over_y = mip_project(v, Axis::y);
  ASSERT_EQ(over_y.cols(), 4);
  EXPECT_EQ(over_y(2, 1), 1.0f);
  EXPECT_THROW(mip_project(v, Axis::z), std::invalid_argument);
}

TEST(Mip, MatchesBruteForceMax) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Volume v = fixtures::random_volume(rng, {6, 5, 4}, {1, 1, 1});
    for (Axis axis : {Axis::y, Axis::x}) {
      const Image<double> ref = fixtures::brute_mip(v, axis);
      const Image<float> out = mip_project(v, axis);
      ASSERT_EQ(out.rows(), ref.rows());
      ASSERT_EQ(out.cols(), ref.cols());
      EXPECT_LE((out.cast<double>() - ref).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Mip, CommutesWithClampScale) {
  Rng rng(7);
  const Volume v = fixtures::random_volume(rng, {7, 6, 5}, {1, 1, 1}, 50.0);
  for (Axis axis : {Axis::y, Axis::x}) {
    const Image<float> a = mip_project(normalize_suv(v, 30.0), axis);
    const Image<float> b = normalize_suv(mip_project(v, axis), 30.0);
    EXPECT_EQ(a, b);
  }
}

TEST(CanvasFit, ExistingCanvasIsUnchanged) {
  Rng rng(8);
  Image<float> img(160, 96);
  for (Index n = 0; n < img.size(); ++n) img.data()[n] = draw_uniform(rng, 0.0f, 1.0f);
  const Image<float> out = fit_to_canvas(img, 160, 96);
  EXPECT_LE((out - img).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(CanvasFit, ExactAspectDownscaleHasNoPadding) {
  Image<float> img = Image<float>::Constant(320, 192, 0.75f);
  const CanvasFit fit = canvas_fit(320, 192, 160, 96);
  EXPECT_EQ(fit.scale, 0.5);
  EXPECT_EQ(fit.height, 160);
  EXPECT_EQ(fit.width, 96);
  EXPECT_EQ(fit.top, 0);
  EXPECT_EQ(fit.left, 0);
  const Image<float> out = fit_to_canvas(img, 160, 96);
  EXPECT_TRUE((out.array() == 0.75f).all());
  // A 2x2 block average of a checker pattern sampled at the block centre is its mean.
  Image<float> checker(320, 192);
  for (Index r = 0; r < 320; ++r)
    for (Index c = 0; c < 192; ++c) checker(r, c) = static_cast<float>((r + c) % 2);
  EXPECT_LE((fit_to_canvas(checker, 160, 96).array() - 0.5f).abs().maxCoeff(), 1e-6f);
}

TEST(CanvasFit, MinRuleAndZeroLetterbox) {
  const Index h = 429, w = 341;
  const double by_h = 160.0 / h, by_w = 96.0 / w;
  ASSERT_GT(std::lround(w * by_h), 96);  // scaling by height would overflow the width
  const CanvasFit fit = canvas_fit(h, w, 160, 96);
  EXPECT_EQ(fit.scale, std::min(by_h, by_w));
  EXPECT_EQ(fit.scale, by_w);
  EXPECT_EQ(fit.width, 96);
  EXPECT_EQ(fit.height, std::lround(h * by_w));
  EXPECT_EQ(fit.top, (160 - fit.height) / 2);

  const Image<float> img = Image<float>::Constant(h, w, 1.0f);
  const Image<float> out = fit_to_canvas(img, 160, 96);
  ASSERT_EQ(out.rows(), 160);
  ASSERT_EQ(out.cols(), 96);
  for (Index r = 0; r < 160; ++r) {
    const bool inside = r >= fit.top && r < fit.top + fit.height;
    for (Index c = 0; c < 96; ++c) ASSERT_EQ(out(r, c), inside ? 1.0f : 0.0f) << r << "," << c;
  }
}

TEST(CanvasFit, WideImagesPadTopAndBottomSymmetrically) {
  const CanvasFit fit = canvas_fit(10, 100, 160, 96);
  EXPECT_EQ(fit.width, 96);
  EXPECT_EQ(fit.height, 10);
  EXPECT_EQ(fit.top, 75);
  EXPECT_THROW(fit_to_canvas(Image<float>(0, 0), 160, 96), std::invalid_argument);
}

TEST(Preprocess, PhantomGivesCanvasInUnitRange) {
  const PhantomSpec spec;
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.target_spacing_mm, 2.0);
  EXPECT_EQ(cfg.suv_max, 30.0);
  for (ClassLabel c : kAllClasses) {
    const MipImage img = preprocess(make_phantom_volume(c, 3, spec), c, cfg, "x");
    EXPECT_EQ(img.height(), 160);
    EXPECT_EQ(img.width(), 96);
    EXPECT_EQ(img.label, c);
    EXPECT_EQ(img.source_id, "x");
    EXPECT_GE(img.pixels.minCoeff(), 0.0f);
    EXPECT_LE(img.pixels.maxCoeff(), 1.0f);
    EXPECT_GT(img.pixels.maxCoeff(), 0.0f);
  }
}

TEST(Preprocess, IsTheDocumentedComposition) {
  Rng rng(9);
  const Volume v = fixtures::random_volume(rng, {8, 7, 6}, {4.06, 4.06, 2.0}, 45.0);
  PipelineConfig cfg;
  cfg.projection_axis = Axis::x;
  const Image<float> expect =
      fit_to_canvas(mip_project(normalize_suv(resample_nearest(v, 2.0), 30.0), Axis::x), 160, 96);
  EXPECT_EQ(preprocess(v, ClassLabel::lung, cfg).pixels, expect);
  cfg.suv_max = 0;
  EXPECT_THROW(preprocess(v, ClassLabel::lung, cfg), std::invalid_argument);
}

TEST(Pgm16, RoundTripIsWithinQuantization) {
  Rng rng(10);
  Image<float> img(5, 3);
  for (Index n = 0; n < img.size(); ++n) img.data()[n] = draw_uniform(rng, 0.0f, 1.0f);
  img(0, 0) = 0.0f;
  img(4, 2) = 1.0f;
  const auto dir = fixtures::scratch_dir("pgm");
  write_pgm16(dir / "a.pgm", img);
  const std::string bytes = fixtures::file_bytes(dir / "a.pgm");
  EXPECT_EQ(bytes.rfind("P5\n3 5\n65535\n", 0), 0u);
  EXPECT_EQ(bytes.size(), std::string("P5\n3 5\n65535\n").size() + 2 * 15);
  // Big-endian samples: the last pixel is 1.0 -> 0xFFFF, the first 0.
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 1]), 0xFF);
  const std::size_t data = bytes.size() - 30;
  EXPECT_EQ(bytes[data], 0);
  EXPECT_EQ(bytes[data + 1], 0);
  const std::uint16_t second = static_cast<std::uint16_t>((static_cast<unsigned char>(bytes[data + 2]) << 8) |
                                                          static_cast<unsigned char>(bytes[data + 3]));
  EXPECT_EQ(second, std::lround(img(0, 1) * 65535.0));
  const Image<float> back = read_pgm16(dir / "a.pgm");
  ASSERT_EQ(back.rows(), 5);
  ASSERT_EQ(back.cols(), 3);
  EXPECT_LE((back - img).cwiseAbs().maxCoeff(), 0.5f / 65535.0f + 1e-7f);
  // Re-encoding a decoded image is exact.
  write_pgm16(dir / "b.pgm", back);
  EXPECT_EQ(fixtures::file_bytes(dir / "b.pgm"), bytes);
}

TEST(Pgm16, RejectsOtherFormats) {
  const auto dir = fixtures::scratch_dir("pgm_bad");
  io::write_file_atomic(dir / "p2.pgm", "P2\n1 1\n65535\n0\n");
  EXPECT_THROW(read_pgm16(dir / "p2.pgm"), std::runtime_error);
  io::write_file_atomic(dir / "short.pgm", std::string("P5\n2 2\n65535\n") + std::string(5, '\0'));
  EXPECT_THROW(read_pgm16(dir / "short.pgm"), std::runtime_error);
}
