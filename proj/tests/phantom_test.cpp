#include "radiogan/phantom.hpp"

#include "radiogan/io.hpp"
#include "radiogan/pipeline.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace radiogan;
namespace fs = std::filesystem;

namespace {

bool inside_enlarged(const anatomy::Ellipsoid& e, const Dims3& d, Index k, Index j, Index i) {
  // Any center shift with |shift| <= kCenterJitter per axis stays inside this bound
  // (triangle inequality in the axis-scaled norm).
  const double m = anatomy::kCenterJitter;
  const double fz = (k + 0.5) / d.z, fy = (j + 0.5) / d.y, fx = (i + 0.5) / d.x;
  const double a = (fz - e.cz) / e.rz, b = (fy - e.cy) / e.ry, c = (fx - e.cx) / e.rx;
  const double slack = std::sqrt(m * m / (e.rz * e.rz) + m * m / (e.ry * e.ry) + m * m / (e.rx * e.rx));
  return std::sqrt(a * a + b * b + c * c) <= 1.0 + slack + 1e-9;
}

}  // namespace

TEST(ClassLabel, CodesAndNamesAreStable) {
  EXPECT_EQ(kNumClasses, 5);
  EXPECT_EQ(class_code(ClassLabel::normal), 0);
  EXPECT_EQ(class_code(ClassLabel::lymphoma), 4);
  EXPECT_EQ(class_ordering(), "normal,lung,head_neck,oesophagus,lymphoma");
  for (ClassLabel c : kAllClasses) {
    EXPECT_EQ(class_from_code(class_code(c)), c);
    EXPECT_EQ(parse_class_name(class_name(c)), c);
  }
  EXPECT_THROW(class_from_code(5), std::invalid_argument);
  EXPECT_FALSE(parse_class_name("lungs").has_value());
}

TEST(Phantom, SameInputsGiveBitwiseEqualVolumes) {
  PhantomSpec spec;
  for (ClassLabel c : kAllClasses) {
    const Volume a = make_phantom_volume(c, 7, spec);
    const Volume b = make_phantom_volume(c, 7, spec);
    ASSERT_EQ(a.voxels.size(), b.voxels.size());
    EXPECT_EQ(std::memcmp(a.voxels.data(), b.voxels.data(), sizeof(float) * a.voxels.size()), 0);
  }
}

TEST(Phantom, NormalHasNoUptakeAboveHotspotRangeOutsideOrgans) {
  PhantomSpec spec;
  const Volume v = make_phantom_volume(ClassLabel::normal, 7, spec);
  EXPECT_EQ(v.dims.z, 64);
  EXPECT_EQ(v.dims.y, 48);
  EXPECT_EQ(v.dims.x, 48);
  EXPECT_LE(v.voxels.maxCoeff(), anatomy::kHotspotMaxSuv);
  const float background_max = static_cast<float>(anatomy::kBackgroundSuv * (1 + anatomy::kBackgroundNoise));
  for (Index k = 0; k < v.dims.z; ++k)
    for (Index j = 0; j < v.dims.y; ++j)
      for (Index i = 0; i < v.dims.x; ++i) {
        if (inside_enlarged(anatomy::kBrain, v.dims, k, j, i) || inside_enlarged(anatomy::kBladder, v.dims, k, j, i) ||
            inside_enlarged(anatomy::kHeart, v.dims, k, j, i)) {
          continue;
        }
        ASSERT_LE(v(k, j, i), background_max) << k << "," << j << "," << i;
      }
}

TEST(Phantom, LesionClassesDifferFromNormalOnlyInsideLesionMask) {
  PhantomSpec spec;
  const Volume normal = make_phantom_volume(ClassLabel::normal, 7, spec);
  for (ClassLabel c : {ClassLabel::lung, ClassLabel::head_neck, ClassLabel::oesophagus, ClassLabel::lymphoma}) {
    const Phantom p = make_phantom(c, 7, spec);
    Index differing = 0, masked = 0;
    for (Index n = 0; n < normal.voxels.size(); ++n) {
      const bool in_mask = p.lesion_mask[static_cast<std::size_t>(n)] != 0;
      masked += in_mask;
      if (p.volume.voxels[n] != normal.voxels[n]) {
        ++differing;
        ASSERT_TRUE(in_mask) << class_name(c) << " voxel " << n;
      }
    }
    EXPECT_GT(differing, 0) << class_name(c);
    EXPECT_GE(masked, differing);
    // Lesions sit in the 5-15 SUV range.
    EXPECT_GE(p.volume.voxels.maxCoeff(), anatomy::kLesionMinSuv);
  }
  const Phantom plain = make_phantom(ClassLabel::normal, 7, spec);
  EXPECT_EQ(std::count(plain.lesion_mask.begin(), plain.lesion_mask.end(), 1), 0);
}

TEST(Phantom, VoxelsAreFiniteAndWithinSuvRange) {
  PhantomSpec spec;
  for (ClassLabel c : kAllClasses) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Volume v = make_phantom_volume(c, seed, spec);
      EXPECT_TRUE(v.voxels.allFinite());
      EXPECT_GE(v.voxels.minCoeff(), 0.0f);
      EXPECT_LE(v.voxels.maxCoeff(), 30.0f);
    }
  }
}

TEST(Phantom, RejectsDegenerateDims) {
  PhantomSpec spec;
  spec.dims = {31, 48, 48};
  EXPECT_THROW(make_phantom_volume(ClassLabel::normal, 1, spec), std::invalid_argument);
  spec.dims = {64, 23, 48};
  EXPECT_THROW(make_phantom_volume(ClassLabel::normal, 1, spec), std::invalid_argument);
  spec.dims = {64, 48, 48};
  spec.per_class_count[2] = -1;
  EXPECT_THROW(validate(spec), std::invalid_argument);
  spec.per_class_count[2] = 0;
  spec.spacing.y = 0;
  EXPECT_THROW(validate(spec), std::invalid_argument);
}

TEST(Corpus, CountsAndDistinctSeeds) {
  PhantomSpec spec;
  spec.per_class_count.fill(2);
  spec.rng_seed = 11;
  const Corpus corpus = make_corpus(spec);
  ASSERT_EQ(corpus.entries.size(), 10u);
  ASSERT_EQ(corpus.manifest.size(), 10u);
  std::set<std::uint64_t> seeds;
  std::set<std::string> ids;
  for (std::size_t n = 0; n < corpus.entries.size(); ++n) {
    seeds.insert(corpus.entries[n].seed);
    ids.insert(corpus.entries[n].id);
    EXPECT_EQ(corpus.manifest[n].id, corpus.entries[n].id);
    EXPECT_EQ(corpus.manifest[n].label, corpus.entries[n].label);
    EXPECT_EQ(corpus.manifest[n].path, corpus.entries[n].id + ".pvol");
  }
  EXPECT_EQ(seeds.size(), 10u);
  EXPECT_EQ(ids.size(), 10u);
}

TEST(Corpus, TotalIsSumOfPerClassCounts) {
  PhantomSpec spec;
  // Clinical-scale class sizes: normal, lung, head & neck, oesophagus, lymphoma.
  spec.per_class_count = {675, 189, 422, 97, 225};
  EXPECT_EQ(spec.total(), 1608);
  spec.per_class_count = {675, 189, 420, 97, 225};
  EXPECT_EQ(spec.total(), 1606);
}

TEST(Corpus, ZeroCountClassIsOmitted) {
  PhantomSpec spec;
  spec.per_class_count = {1, 1, 0, 1, 1};
  const Corpus corpus = make_corpus(spec);
  EXPECT_EQ(corpus.manifest.size(), 4u);
  for (const auto& row : corpus.manifest) EXPECT_NE(row.label, ClassLabel::head_neck);
}

TEST(Corpus, WrittenTwiceIsByteIdentical) {
  PhantomSpec spec;
  spec.per_class_count.fill(1);
  spec.rng_seed = 5;
  const auto a = fixtures::scratch_dir("corpus_a"), b = fixtures::scratch_dir("corpus_b");
  write_corpus(make_corpus(spec), a);
  write_corpus(make_corpus(spec), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(fixtures::file_bytes(entry.path()), fixtures::file_bytes(b / entry.path().filename()))
        << entry.path().filename();
  }
  EXPECT_EQ(files, 6u);  // five volumes + manifest
  const auto rows = io::read_manifest(a / "manifest.csv");
  ASSERT_EQ(rows.size(), 5u);
  const Volume back = read_pvol(a / rows[1].path);
  const Volume direct = make_phantom_volume(rows[1].label, corpus_volume_seed(5, rows[1].label, 0), spec);
  EXPECT_EQ(back.voxels, direct.voxels);
}

TEST(Pvol, RoundTripAndHeader) {
  Rng rng(3);
  const Volume v = fixtures::random_volume(rng, {3, 4, 5}, {4.06, 4.06, 2.0});
  const auto dir = fixtures::scratch_dir("pvol");
  write_pvol(dir / "v.pvol", v);
  const std::string bytes = fixtures::file_bytes(dir / "v.pvol");
  EXPECT_EQ(bytes.rfind("PVOL1\ndims 3 4 5\nspacing ", 0), 0u);
  EXPECT_NE(bytes.find("dtype f32le\n\n"), std::string::npos);
  EXPECT_EQ(bytes.size() - (bytes.find("\n\n") + 2), 60u * 4u);
  const Volume back = read_pvol(dir / "v.pvol");
  EXPECT_EQ(back.dims.z, 3);
  EXPECT_EQ(back.dims.x, 5);
  EXPECT_EQ(back.spacing.z, 4.06);
  EXPECT_EQ(back.spacing.x, 2.0);
  EXPECT_EQ(back.voxels, v.voxels);
}

TEST(Pvol, RejectsTruncatedPayloadAndBadMagic) {
  Rng rng(4);
  const Volume v = fixtures::random_volume(rng, {2, 2, 2}, {1, 1, 1});
  const auto dir = fixtures::scratch_dir("pvol_bad");
  write_pvol(dir / "v.pvol", v);
  std::string bytes = fixtures::file_bytes(dir / "v.pvol");
  io::write_file_atomic(dir / "short.pvol", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_pvol(dir / "short.pvol"), std::runtime_error);
  bytes[4] = '2';
  io::write_file_atomic(dir / "magic.pvol", bytes);
  EXPECT_THROW(read_pvol(dir / "magic.pvol"), std::runtime_error);
  EXPECT_THROW(read_pvol(dir / "missing.pvol"), std::runtime_error);
}

TEST(Classifier, AllZerosIsNormal) {
  const Image<float> zeros = Image<float>::Zero(160, 96);
  EXPECT_EQ(region_energy_classifier(zeros), ClassLabel::normal);
  const auto energy = zone_excess_energy(zeros, ZoneLayout::for_canvas(160, 96));
  for (double e : energy) EXPECT_EQ(e, 0.0);
}

TEST(Classifier, ZonesAreDisjointFromEachOtherWhereTheyMustBe) {
  const ZoneLayout layout = ZoneLayout::for_canvas(160, 96);
  for (ClassLabel c : {ClassLabel::lung, ClassLabel::head_neck, ClassLabel::oesophagus, ClassLabel::lymphoma}) {
    EXPECT_GT(layout.zone_mask(c).sum(), 0.0f) << class_name(c);
  }
  // Lung fields are lateral, the oesophagus zone is midline: they must not overlap.
  EXPECT_EQ(layout.zone_mask(ClassLabel::lung).cwiseProduct(layout.zone_mask(ClassLabel::oesophagus)).sum(), 0.0f);
  EXPECT_GT(layout.body_mask().sum(), 0.0f);
}

// Calibration: the oracle must be reliable on fresh phantoms before it judges the generator.
TEST(Classifier, SeparatesFreshPhantomsOnDefaultCanvas) {
  const PhantomSpec spec;
  const PipelineConfig pipeline;
  const ZoneLayout layout(spec, pipeline);
  for (ClassLabel c : kAllClasses) {
    int correct = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      const MipImage img = preprocess(make_phantom_volume(c, seed, spec), c, pipeline);
      correct += region_energy_classifier(img.pixels, layout) == c;
    }
    EXPECT_GE(correct, 190) << class_name(c);
  }
}

TEST(Classifier, SeparatesFreshPhantomsOnSmallCanvas) {
  const PhantomSpec spec;
  PipelineConfig pipeline;
  pipeline.canvas_height = 80;
  pipeline.canvas_width = 48;
  const ZoneLayout layout(spec, pipeline);
  for (ClassLabel c : kAllClasses) {
    int correct = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const MipImage img = preprocess(make_phantom_volume(c, seed, spec), c, pipeline);
      correct += region_energy_classifier(img.pixels, layout) == c;
    }
    EXPECT_GE(correct, 95) << class_name(c);
  }
}
