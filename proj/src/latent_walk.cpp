#include "radiogan/latent_walk.hpp"

#include <cstdio>
#include <limits>

namespace radiogan {

std::vector<double> blend_deviation(std::span<const Image<float>> images) {
  const int n = static_cast<int>(images.size());
  const auto t = walk_fractions(n);
  const Image<float>& first = images.front();
  const Image<float>& last = images.back();
  std::vector<double> scores(images.size(), 0.0);
  for (int k = 1; k + 1 < n; ++k) {
    const auto& img = images[static_cast<std::size_t>(k)];
    if (img.rows() != first.rows() || img.cols() != first.cols()) {
      throw std::invalid_argument("walk images differ in size");
    }
    const double tk = t[static_cast<std::size_t>(k)];
    const auto blend = (1.0 - tk) * first.cast<double>().array() + tk * last.cast<double>().array();
    scores[static_cast<std::size_t>(k)] = (img.cast<double>().array() - blend).abs().mean();
  }
  return scores;
}

std::vector<double> nn_memorization_score(std::span<const Image<float>> images,
                                          std::span<const Image<float>> training_images) {
  if (training_images.empty()) throw std::invalid_argument("empty training set");
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& query : images) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& ref : training_images) {
      if (ref.rows() != query.rows() || ref.cols() != query.cols()) {
        throw std::invalid_argument("training image canvas differs from query canvas");
      }
      best = std::min(best, (query - ref).cast<double>().cwiseAbs().mean());
    }
    out.push_back(best);
  }
  return out;
}

std::vector<LatentSeed<float>> walk_seeds(const WalkSpec& spec, int latent_dim) {
  if (spec.mode == WalkMode::first_coord) {
    return seed_sequence_first_coord<float>(spec.a, spec.b, spec.steps, latent_dim);
  }
  if (spec.z_start.size() != latent_dim || spec.z_end.size() != latent_dim) {
    throw std::invalid_argument("walk endpoints must have length " + std::to_string(latent_dim));
  }
  return lerp_seeds<float>(spec.z_start, spec.z_end, spec.steps);
}

WalkReport walk_images(const WalkSource& source, std::span<const LatentSeed<float>> seeds) {
  WalkReport report;
  report.t = walk_fractions(static_cast<int>(seeds.size()));
  for (std::size_t k = 0; k < seeds.size(); ++k) report.images.push_back(source(seeds[k], report.t[k]));
  return report;
}

namespace {

// (1 - t) a + t b, returning the endpoints themselves at t = 0 and t = 1.
Matrix<float> blend_maps(const Matrix<float>& a, const Matrix<float>& b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const auto tt = static_cast<float>(t);
  return (1.0f - tt) * a + tt * b;
}

}  // namespace

WalkReport walk(const ModelParams<float>& model, const WalkSpec& spec, std::span<const Image<float>> reference_corpus) {
  const auto& g = model.generator;
  const auto& d = model.discriminator;
  const std::array<ClassLabel, 1> from{spec.label_start};
  const std::array<ClassLabel, 1> to{spec.label_end};
  const Matrix<float> g_from = generator_condition(g, from), g_to = generator_condition(g, to);
  const Matrix<float> d_from = discriminator_condition(d, from), d_to = discriminator_condition(d, to);
  const bool blend = spec.mode == WalkMode::label_lerp;

  const auto seeds = walk_seeds(spec, model.config.latent_dim);
  std::vector<double> realism;
  WalkSource source = [&](const LatentSeed<float>& z, double t) {
    const Matrix<float> g_cond = blend ? blend_maps(g_from, g_to, t) : g_from;
    const Matrix<float> d_cond = blend ? blend_maps(d_from, d_to, t) : d_from;
    const nn::FeatureBatch<float> out = generator_forward_conditioned<float>(g, z, g_cond);
    realism.push_back(static_cast<double>(discriminator_forward_conditioned<float>(d, out, d_cond)[0]));
    return Image<float>(pixel_unscale(batch_image(out, 0)));
  };
  WalkReport report = walk_images(source, seeds);
  report.realism = std::move(realism);
  report.blend_deviation = blend_deviation(report.images);
  report.nn_distance = nn_memorization_score(report.images, reference_corpus);
  return report;
}

MemorizingBlendGenerator::MemorizingBlendGenerator(Image<float> first, Image<float> last, double a, double b)
    : first_(std::move(first)), last_(std::move(last)), a_(a), b_(b) {
  if (first_.rows() != last_.rows() || first_.cols() != last_.cols()) {
    throw std::invalid_argument("memorized images differ in size");
  }
  if (a_ == b_) throw std::invalid_argument("degenerate seed interval");
}

Image<float> MemorizingBlendGenerator::operator()(const LatentSeed<float>& z) const {
  const double t = std::clamp((static_cast<double>(z[0]) - a_) / (b_ - a_), 0.0, 1.0);
  return ((1.0 - t) * first_.cast<double>().array() + t * last_.cast<double>().array()).cast<float>().matrix();
}

Image<float> horizontal_strip(std::span<const Image<float>> images) {
  if (images.empty()) throw std::invalid_argument("empty strip");
  const Index h = images.front().rows();
  Index w = 0;
  for (const auto& img : images) {
    if (img.rows() != h) throw std::invalid_argument("strip images differ in height");
    w += img.cols();
  }
  Image<float> strip(h, w);
  Index col = 0;
  for (const auto& img : images) {
    strip.middleCols(col, img.cols()) = img;
    col += img.cols();
  }
  return strip;
}

std::string walk_csv(const WalkReport& report) {
  std::string out = "step,t,realism,blend_deviation,nn_distance\n";
  char line[256];
  for (std::size_t k = 0; k < report.images.size(); ++k) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", k, report.t[k], report.realism.at(k),
                  report.blend_deviation.at(k), report.nn_distance.at(k));
    out += line;
  }
  return out;
}

Image<float> generate_image(const ModelParams<float>& model, const LatentSeed<float>& z, ClassLabel label) {
  if (z.size() != model.config.latent_dim) {
    throw std::invalid_argument("latent has length " + std::to_string(z.size()) + ", model expects " +
                                std::to_string(model.config.latent_dim));
  }
  const std::array<ClassLabel, 1> labels{label};
  return pixel_unscale(batch_image(generator_forward<float>(model.generator, z, labels), 0));
}

LatentSeed<float> sample_latent(std::uint64_t seed, ClassLabel label, int k, int latent_dim) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(class_code(label)) + 1, static_cast<std::uint64_t>(k)));
  LatentSeed<float> z(latent_dim);
  for (Index n = 0; n < latent_dim; ++n) z[n] = draw_normal<float>(rng);
  return z;
}

std::vector<ClassEvaluation> evaluate_conditioning(const ModelParams<float>& model, int per_class, std::uint64_t seed,
                                                   std::span<const Image<float>> reference, const ZoneLayout& layout) {
  if (per_class < 1) throw std::invalid_argument("samples per class must be >= 1");
  if (layout.canvas_height() != model.config.canvas_height() ||
      layout.canvas_width() != model.config.canvas_width()) {
    throw std::invalid_argument("classifier layout does not match the model canvas");
  }
  std::vector<ClassEvaluation> rows;
  for (ClassLabel label : kAllClasses) {
    const std::array<ClassLabel, 1> labels{label};
    std::vector<Image<float>> images;
    ClassEvaluation row{label, per_class, 0, 0, 0};
    int hits = 0;
    for (int k = 0; k < per_class; ++k) {
      const auto z = sample_latent(seed, label, k, model.config.latent_dim);
      const nn::FeatureBatch<float> out = generator_forward<float>(model.generator, z, labels);
      row.mean_realism += static_cast<double>(discriminator_forward<float>(model.discriminator, out, labels)[0]);
      images.push_back(pixel_unscale(batch_image(out, 0)));
      hits += region_energy_classifier(images.back(), layout) == label;
    }
    row.accuracy = static_cast<double>(hits) / per_class;
    row.mean_realism /= per_class;
    if (reference.empty()) {
      row.mean_nn_distance = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto d = nn_memorization_score(images, reference);
      for (double v : d) row.mean_nn_distance += v;
      row.mean_nn_distance /= per_class;
    }
    rows.push_back(row);
  }
  return rows;
}

double overall_accuracy(std::span<const ClassEvaluation> rows) {
  double hits = 0, total = 0;
  for (const auto& r : rows) {
    hits += r.accuracy * r.samples;
    total += r.samples;
  }
  return total > 0 ? hits / total : 0.0;
}

std::string evaluation_csv(std::span<const ClassEvaluation> rows) {
  std::string out = "class,samples,accuracy,mean_nn_distance,mean_realism\n";
  char line[256];
  double nn = 0, realism = 0, total = 0;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%d,%.9g,%.9g,%.9g\n", std::string(class_name(r.label)).c_str(), r.samples,
                  r.accuracy, r.mean_nn_distance, r.mean_realism);
    out += line;
    nn += r.mean_nn_distance * r.samples;
    realism += r.mean_realism * r.samples;
    total += r.samples;
  }
  std::snprintf(line, sizeof line, "all,%d,%.9g,%.9g,%.9g\n", static_cast<int>(total), overall_accuracy(rows),
                nn / total, realism / total);
  return out + line;
}

}  // namespace radiogan
