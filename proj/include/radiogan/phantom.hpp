#ifndef RADIOGAN_PHANTOM_HPP_
#define RADIOGAN_PHANTOM_HPP_

#include "radiogan/io.hpp"
#include "radiogan/pipeline.hpp"
#include "radiogan/volume.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace radiogan {

struct PhantomSpec {
  Dims3 dims{64, 48, 48};
  Spacing3 spacing{4.0, 4.0, 4.0};
  std::array<int, kNumClasses> per_class_count{};
  std::uint64_t rng_seed = 0;

  int total() const;
};

inline constexpr Dims3 kMinPhantomDims{32, 24, 24};

void validate(const PhantomSpec& spec);

/// Fixed anatomy of the synthetic body, in fractions of the volume extent (z from the top).
namespace anatomy {

struct Ellipsoid {
  double cz, cy, cx;  // center
  double rz, ry, rx;  // semi-axes
};

inline constexpr Ellipsoid kBody{0.50, 0.50, 0.50, 0.48, 0.32, 0.40};
inline constexpr Ellipsoid kBrain{0.075, 0.50, 0.50, 0.055, 0.12, 0.10};
inline constexpr Ellipsoid kBladder{0.91, 0.50, 0.50, 0.045, 0.10, 0.10};
inline constexpr Ellipsoid kHeart{0.42, 0.45, 0.63, 0.06, 0.10, 0.08};
inline constexpr double kCenterJitter = 0.01;

inline constexpr double kBackgroundSuv = 1.0;
inline constexpr double kBackgroundNoise = 0.1;  // relative, uniform
inline constexpr double kHotspotMinSuv = 4.0, kHotspotMaxSuv = 8.0;
inline constexpr double kLesionMinSuv = 5.0, kLesionMaxSuv = 15.0;

// Lung: one large blob in the upper thorax, left or right.
inline constexpr double kLungZMin = 0.24, kLungZMax = 0.30;
inline constexpr double kLungLateralMin = 0.20, kLungLateralMax = 0.24;
inline constexpr double kLungRadiusMin = 6.0, kLungRadiusMax = 10.0;  // voxels
// Head and neck: blob directly below the brain.
inline constexpr double kNeckZMin = 0.16, kNeckZMax = 0.20;
inline constexpr double kNeckLateralMax = 0.06;
inline constexpr double kNeckRadiusMin = 3.0, kNeckRadiusMax = 5.0;
// Oesophagus: midline cylinder along z through the thorax.
inline constexpr double kOesoTopMin = 0.22, kOesoTopMax = 0.26;
inline constexpr double kOesoBottomMin = 0.40, kOesoBottomMax = 0.46;
inline constexpr double kOesoRadiusMin = 1.5, kOesoRadiusMax = 2.5;
// Lymphoma: scattered small blobs in the torso.
inline constexpr int kLymphomaMinBlobs = 3, kLymphomaMaxBlobs = 6;
inline constexpr double kLymphZMin = 0.52, kLymphZMax = 0.80;
inline constexpr double kLymphLateralMin = 0.04, kLymphLateralMax = 0.24;
inline constexpr double kLymphRadiusMin = 2.0, kLymphRadiusMax = 3.5;

/// Axis-aligned zone in (z, lateral) image fractions; `lateral` is |f - 0.5|.
struct Zone {
  double z_min, z_max;
  double lateral_min, lateral_max;
};

// Signature zones for the four lesion classes, indexed by class code (normal unused).
inline constexpr std::array<Zone, kNumClasses> kSignatureZones = {{
    {0.0, 0.0, 0.0, 0.0},
    {0.14, 0.36, 0.12, 0.42},  // lung
    {0.145, 0.23, 0.0, 0.11},  // head_neck
    {0.22, 0.46, 0.0, 0.045},  // oesophagus
    {0.50, 0.82, 0.0, 0.30},   // lymphoma
}};

}  // namespace anatomy

/// A generated volume plus the voxels written by lesion placement.
struct Phantom {
  Volume volume;
  std::vector<std::uint8_t> lesion_mask;
};

Phantom make_phantom(ClassLabel label, std::uint64_t seed, const PhantomSpec& spec);
Volume make_phantom_volume(ClassLabel label, std::uint64_t seed, const PhantomSpec& spec);

struct CorpusEntry {
  std::string id;
  ClassLabel label = ClassLabel::normal;
  std::uint64_t seed = 0;
  Volume volume;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::vector<io::ManifestRow> manifest;
};

std::uint64_t corpus_volume_seed(std::uint64_t corpus_seed, ClassLabel label, int index);
Corpus make_corpus(const PhantomSpec& spec);

/// Writes `<id>.pvol` files and `manifest.csv` into dir.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Pixel rectangles of the anatomical zones on a given canvas.
class ZoneLayout {
 public:
  ZoneLayout(const PhantomSpec& phantom, const PipelineConfig& pipeline);
  /// Layout of the default phantom geometry on an h x w canvas.
  static ZoneLayout for_canvas(Index h, Index w);

  Index canvas_height() const { return canvas_h_; }
  Index canvas_width() const { return canvas_w_; }
  /// Zone mask (1 inside) for a lesion class; empty for normal.
  const Image<float>& zone_mask(ClassLabel label) const { return masks_[class_code(label)]; }
  const Image<float>& body_mask() const { return body_; }

 private:
  Index canvas_h_ = 0, canvas_w_ = 0;
  std::array<Image<float>, kNumClasses> masks_;
  Image<float> body_;
};

inline constexpr double kClassifierThreshold = 0.012;

/// Per-class excess energy (normal entry is 0).
std::array<double, kNumClasses> zone_excess_energy(const Image<float>& image, const ZoneLayout& layout);

/// Class whose signature zone carries the most energy above background; normal below threshold.
ClassLabel region_energy_classifier(const Image<float>& image, const ZoneLayout& layout,
                                    double threshold = kClassifierThreshold);
ClassLabel region_energy_classifier(const Image<float>& image);

}  // namespace radiogan

#endif  // RADIOGAN_PHANTOM_HPP_
