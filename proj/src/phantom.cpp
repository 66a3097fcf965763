#include "radiogan/phantom.hpp"

#include "radiogan/random.hpp"

#include <algorithm>
#include <cmath>

namespace radiogan {

int PhantomSpec::total() const {
  int n = 0;
  for (int c : per_class_count) n += c;
  return n;
}

void validate(const PhantomSpec& spec) {
  if (spec.dims.z < kMinPhantomDims.z || spec.dims.y < kMinPhantomDims.y || spec.dims.x < kMinPhantomDims.x) {
    throw std::invalid_argument("phantom dims below minimum (32,24,24)");
  }
  if (!(spec.spacing.z > 0 && spec.spacing.y > 0 && spec.spacing.x > 0)) {
    throw std::invalid_argument("phantom spacing must be positive");
  }
  for (int c : spec.per_class_count) {
    if (c < 0) throw std::invalid_argument("per-class counts must be non-negative");
  }
}

namespace {

using anatomy::Ellipsoid;

// Voxel-center coordinates in volume fractions.
struct Frac {
  double z, y, x;
};

Frac frac_of(const Dims3& d, Index k, Index j, Index i) {
  return {(static_cast<double>(k) + 0.5) / static_cast<double>(d.z),
          (static_cast<double>(j) + 0.5) / static_cast<double>(d.y),
          (static_cast<double>(i) + 0.5) / static_cast<double>(d.x)};
}

bool inside(const Ellipsoid& e, const Frac& f) {
  const double a = (f.z - e.cz) / e.rz, b = (f.y - e.cy) / e.ry, c = (f.x - e.cx) / e.rx;
  return a * a + b * b + c * c <= 1.0;
}

Ellipsoid jittered(const Ellipsoid& e, Rng& rng) {
  Ellipsoid out = e;
  out.cz += draw_uniform(rng, -anatomy::kCenterJitter, anatomy::kCenterJitter);
  out.cx += draw_uniform(rng, -anatomy::kCenterJitter, anatomy::kCenterJitter);
  return out;
}

void fill(Volume& v, const Ellipsoid& e, float value) {
  for (Index k = 0; k < v.dims.z; ++k)
    for (Index j = 0; j < v.dims.y; ++j)
      for (Index i = 0; i < v.dims.x; ++i)
        if (inside(e, frac_of(v.dims, k, j, i))) v(k, j, i) = std::max(v(k, j, i), value);
}

// Lesion writer: raises voxels to the lesion value and records them in the mask.
struct LesionPainter {
  Volume& v;
  std::vector<std::uint8_t>& mask;

  void paint(Index k, Index j, Index i, float value) {
    auto& voxel = v(k, j, i);
    voxel = std::max(voxel, value);
    mask[static_cast<std::size_t>(v.offset(k, j, i))] = 1;
  }

  // Sphere with radius in voxels around a center given in fractions.
  void sphere(const Frac& c, double radius, float value) {
    const double ck = c.z * static_cast<double>(v.dims.z) - 0.5;
    const double cj = c.y * static_cast<double>(v.dims.y) - 0.5;
    const double ci = c.x * static_cast<double>(v.dims.x) - 0.5;
    for (Index k = 0; k < v.dims.z; ++k)
      for (Index j = 0; j < v.dims.y; ++j)
        for (Index i = 0; i < v.dims.x; ++i) {
          const double dk = static_cast<double>(k) - ck, dj = static_cast<double>(j) - cj,
                       di = static_cast<double>(i) - ci;
          if (dk * dk + dj * dj + di * di <= radius * radius) paint(k, j, i, value);
        }
  }

  // Cylinder parallel to z between two z fractions.
  void cylinder(double z_top, double z_bottom, double cy, double cx, double radius, float value) {
    const double cj = cy * static_cast<double>(v.dims.y) - 0.5;
    const double ci = cx * static_cast<double>(v.dims.x) - 0.5;
    for (Index k = 0; k < v.dims.z; ++k) {
      const double fz = (static_cast<double>(k) + 0.5) / static_cast<double>(v.dims.z);
      if (fz < z_top || fz > z_bottom) continue;
      for (Index j = 0; j < v.dims.y; ++j)
        for (Index i = 0; i < v.dims.x; ++i) {
          const double dj = static_cast<double>(j) - cj, di = static_cast<double>(i) - ci;
          if (dj * dj + di * di <= radius * radius) paint(k, j, i, value);
        }
    }
  }
};

float lesion_suv(Rng& rng) {
  return static_cast<float>(draw_uniform(rng, anatomy::kLesionMinSuv, anatomy::kLesionMaxSuv));
}

double side(Rng& rng) { return draw_int(rng, 0, 1) == 0 ? -1.0 : 1.0; }

void place_lesions(ClassLabel label, Rng& rng, LesionPainter& painter) {
  using namespace anatomy;
  switch (label) {
    case ClassLabel::normal:
      break;
    case ClassLabel::lung: {
      const double z = draw_uniform(rng, kLungZMin, kLungZMax);
      const double x = 0.5 + side(rng) * draw_uniform(rng, kLungLateralMin, kLungLateralMax);
      const double r = draw_uniform(rng, kLungRadiusMin, kLungRadiusMax);
      painter.sphere({z, 0.45, x}, r, lesion_suv(rng));
      break;
    }
    case ClassLabel::head_neck: {
      const double z = draw_uniform(rng, kNeckZMin, kNeckZMax);
      const double x = 0.5 + draw_uniform(rng, -kNeckLateralMax, kNeckLateralMax);
      const double r = draw_uniform(rng, kNeckRadiusMin, kNeckRadiusMax);
      painter.sphere({z, 0.5, x}, r, lesion_suv(rng));
      break;
    }
    case ClassLabel::oesophagus: {
      const double top = draw_uniform(rng, kOesoTopMin, kOesoTopMax);
      const double bottom = draw_uniform(rng, kOesoBottomMin, kOesoBottomMax);
      const double x = 0.5 + draw_uniform(rng, -0.01, 0.01);
      const double r = draw_uniform(rng, kOesoRadiusMin, kOesoRadiusMax);
      painter.cylinder(top, bottom, 0.55, x, r, lesion_suv(rng));
      break;
    }
    case ClassLabel::lymphoma: {
      const int blobs = draw_int(rng, kLymphomaMinBlobs, kLymphomaMaxBlobs);
      for (int b = 0; b < blobs; ++b) {
        const double z = draw_uniform(rng, kLymphZMin, kLymphZMax);
        const double x = 0.5 + side(rng) * draw_uniform(rng, kLymphLateralMin, kLymphLateralMax);
        const double y = draw_uniform(rng, 0.35, 0.65);
        const double r = draw_uniform(rng, kLymphRadiusMin, kLymphRadiusMax);
        painter.sphere({z, y, x}, r, lesion_suv(rng));
      }
      break;
    }
  }
}

}  // namespace

Phantom make_phantom(ClassLabel label, std::uint64_t seed, const PhantomSpec& spec) {
  validate(spec);
  Phantom out{Volume(spec.dims, spec.spacing), {}};
  Volume& v = out.volume;
  out.lesion_mask.assign(static_cast<std::size_t>(v.dims.count()), 0);

  // Anatomy comes from a stream that does not depend on the label, so classes
  // built from the same seed differ only where lesions were painted.
  Rng anatomy_rng(derive_seed(seed, 0xA1A70));
  for (Index k = 0; k < v.dims.z; ++k)
    for (Index j = 0; j < v.dims.y; ++j)
      for (Index i = 0; i < v.dims.x; ++i) {
        const double noise = draw_uniform(anatomy_rng, -anatomy::kBackgroundNoise, anatomy::kBackgroundNoise);
        if (inside(anatomy::kBody, frac_of(v.dims, k, j, i))) {
          v(k, j, i) = static_cast<float>(anatomy::kBackgroundSuv * (1.0 + noise));
        }
      }
  for (const auto* organ : {&anatomy::kBrain, &anatomy::kBladder, &anatomy::kHeart}) {
    const Ellipsoid e = jittered(*organ, anatomy_rng);
    const auto suv = static_cast<float>(draw_uniform(anatomy_rng, anatomy::kHotspotMinSuv, anatomy::kHotspotMaxSuv));
    fill(v, e, suv);
  }

  Rng lesion_rng(derive_seed(seed, 0x1E510, static_cast<std::uint64_t>(class_code(label))));
  LesionPainter painter{v, out.lesion_mask};
  place_lesions(label, lesion_rng, painter);
  return out;
}

Volume make_phantom_volume(ClassLabel label, std::uint64_t seed, const PhantomSpec& spec) {
  return make_phantom(label, seed, spec).volume;
}

std::uint64_t corpus_volume_seed(std::uint64_t corpus_seed, ClassLabel label, int index) {
  return derive_seed(corpus_seed, static_cast<std::uint64_t>(class_code(label)) + 1,
                     static_cast<std::uint64_t>(index));
}

Corpus make_corpus(const PhantomSpec& spec) {
  validate(spec);
  Corpus corpus;
  corpus.entries.reserve(static_cast<std::size_t>(spec.total()));
  for (ClassLabel label : kAllClasses) {
    for (int n = 0; n < spec.per_class_count[class_code(label)]; ++n) {
      CorpusEntry entry;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04d", std::string(class_name(label)).c_str(), n);
      entry.id = id;
      entry.label = label;
      entry.seed = corpus_volume_seed(spec.rng_seed, label, n);
      entry.volume = make_phantom_volume(label, entry.seed, spec);
      corpus.manifest.push_back({entry.id, label, entry.id + ".pvol"});
      corpus.entries.push_back(std::move(entry));
    }
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t n = 0; n < corpus.entries.size(); ++n) {
    write_pvol(dir / corpus.manifest[n].path, corpus.entries[n].volume);
  }
  io::write_manifest(dir / "manifest.csv", corpus.manifest);
}

// ---------------------------------------------------------------------------

ZoneLayout::ZoneLayout(const PhantomSpec& phantom, const PipelineConfig& pipeline)
    : canvas_h_(pipeline.canvas_height), canvas_w_(pipeline.canvas_width) {
  validate(pipeline);
  const int lateral_axis = pipeline.projection_axis == Axis::y ? 2 : 1;
  const Index h = detail::resampled_extent(phantom.dims.z, phantom.spacing.z, pipeline.target_spacing_mm);
  const Index w = detail::resampled_extent(phantom.dims[lateral_axis], phantom.spacing[lateral_axis],
                                           pipeline.target_spacing_mm);
  const CanvasFit fit = canvas_fit(h, w, canvas_h_, canvas_w_);
  const anatomy::Ellipsoid& body = anatomy::kBody;
  const double body_lateral_radius = lateral_axis == 2 ? body.rx : body.ry;

  for (auto& m : masks_) m = Image<float>::Zero(canvas_h_, canvas_w_);
  body_ = Image<float>::Zero(canvas_h_, canvas_w_);
  for (Index r = 0; r < fit.height; ++r) {
    const double fz = (static_cast<double>(r) + 0.5) / static_cast<double>(fit.height);
    for (Index c = 0; c < fit.width; ++c) {
      const double fl = (static_cast<double>(c) + 0.5) / static_cast<double>(fit.width);
      const double lateral = std::abs(fl - 0.5);
      const Index row = fit.top + r, col = fit.left + c;
      const double a = (fz - body.cz) / body.rz, b = lateral / body_lateral_radius;
      if (a * a + b * b <= 1.0) body_(row, col) = 1.0f;
      for (ClassLabel label : kAllClasses) {
        if (label == ClassLabel::normal) continue;
        const auto& zone = anatomy::kSignatureZones[class_code(label)];
        if (fz >= zone.z_min && fz < zone.z_max && lateral >= zone.lateral_min && lateral < zone.lateral_max) {
          masks_[class_code(label)](row, col) = 1.0f;
        }
      }
    }
  }
}

ZoneLayout ZoneLayout::for_canvas(Index h, Index w) {
  PipelineConfig cfg;
  cfg.canvas_height = h;
  cfg.canvas_width = w;
  return ZoneLayout(PhantomSpec{}, cfg);
}

std::array<double, kNumClasses> zone_excess_energy(const Image<float>& image, const ZoneLayout& layout) {
  if (image.rows() != layout.canvas_height() || image.cols() != layout.canvas_width()) {
    throw std::invalid_argument("image is not on the classifier canvas");
  }
  // Background level: median over the projected body.
  std::vector<float> body_pixels;
  const auto& body = layout.body_mask();
  for (Index n = 0; n < image.size(); ++n) {
    if (body(n) > 0) body_pixels.push_back(image(n));
  }
  float background = 0.0f;
  if (!body_pixels.empty()) {
    auto mid = body_pixels.begin() + static_cast<std::ptrdiff_t>(body_pixels.size() / 2);
    std::nth_element(body_pixels.begin(), mid, body_pixels.end());
    background = *mid;
  }

  std::array<double, kNumClasses> energy{};
  for (ClassLabel label : kAllClasses) {
    if (label == ClassLabel::normal) continue;
    const auto& mask = layout.zone_mask(label);
    const double area = mask.sum();
    if (area <= 0) continue;
    const double excess = (mask.array() * (image.array() - background).max(0.0f)).sum();
    energy[class_code(label)] = excess / area;
  }
  return energy;
}

ClassLabel region_energy_classifier(const Image<float>& image, const ZoneLayout& layout, double threshold) {
  const auto energy = zone_excess_energy(image, layout);
  ClassLabel best = ClassLabel::normal;
  double best_energy = threshold;
  for (ClassLabel label : kAllClasses) {
    if (energy[class_code(label)] > best_energy) {
      best = label;
      best_energy = energy[class_code(label)];
    }
  }
  return best;
}

ClassLabel region_energy_classifier(const Image<float>& image) {
  return region_energy_classifier(image, ZoneLayout::for_canvas(image.rows(), image.cols()));
}

}  // namespace radiogan
