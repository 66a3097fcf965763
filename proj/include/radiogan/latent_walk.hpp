#ifndef RADIOGAN_LATENT_WALK_HPP_
#define RADIOGAN_LATENT_WALK_HPP_

#include "radiogan/model.hpp"
#include "radiogan/phantom.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace radiogan {

template <typename T = float>
using LatentSeed = Vector<T>;

enum class WalkMode { first_coord, lerp, label_lerp };

struct WalkSpec {
  WalkMode mode = WalkMode::first_coord;
  LatentSeed<float> z_start;  // lerp / label_lerp
  LatentSeed<float> z_end;
  double a = 1.0;  // first_coord endpoints
  double b = 10.0;
  int steps = 10;
  ClassLabel label_start = ClassLabel::normal;
  ClassLabel label_end = ClassLabel::normal;
};

/// t_k = k / (n - 1).
inline std::vector<double> walk_fractions(int n) {
  if (n < 2) throw std::invalid_argument("a walk needs at least 2 steps");
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) t[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(n - 1);
  return t;
}

/// Seeds [a + k (b - a) / (n - 1), 0, ..., 0].
template <typename T = float>
std::vector<LatentSeed<T>> seed_sequence_first_coord(double a, double b, int n, int latent_dim = 100) {
  if (n < 2) throw std::invalid_argument("a walk needs at least 2 steps");
  std::vector<LatentSeed<T>> seeds;
  for (int k = 0; k < n; ++k) {
    LatentSeed<T> z = LatentSeed<T>::Zero(latent_dim);
    z[0] = static_cast<T>(a + static_cast<double>(k) * (b - a) / static_cast<double>(n - 1));
    seeds.push_back(std::move(z));
  }
  return seeds;
}

/// z_k = (1 - t_k) z_a + t_k z_b.
template <typename T>
std::vector<LatentSeed<T>> lerp_seeds(const LatentSeed<T>& za, const LatentSeed<T>& zb, int n) {
  if (za.size() != zb.size()) throw std::invalid_argument("lerp endpoints differ in length");
  std::vector<LatentSeed<T>> seeds;
  for (double t : walk_fractions(n)) {
    const T tt = static_cast<T>(t);
    seeds.push_back((T(1) - tt) * za + tt * zb);
  }
  return seeds;
}

/// Per step: mean |I_k - ((1 - t_k) I_0 + t_k I_{n-1})|. Endpoints are 0.
std::vector<double> blend_deviation(std::span<const Image<float>> images);

/// Per query image: min over the training set of the mean absolute pixel distance.
std::vector<double> nn_memorization_score(std::span<const Image<float>> images,
                                          std::span<const Image<float>> training_images);

struct WalkReport {
  std::vector<Image<float>> images;  // [0, 1]
  std::vector<double> t;
  std::vector<double> realism;
  std::vector<double> blend_deviation;
  std::vector<double> nn_distance;
};

/// Image source for a walk: (seed, t) -> image in [0, 1].
using WalkSource = std::function<Image<float>(const LatentSeed<float>&, double)>;

/// The seeds a spec walks through.
std::vector<LatentSeed<float>> walk_seeds(const WalkSpec& spec, int latent_dim);

/// Generates one image per seed; fills images and t only.
WalkReport walk_images(const WalkSource& source, std::span<const LatentSeed<float>> seeds);

/// Eval-mode walk through a trained model with every metric attached. In label_lerp mode the
/// two classes' condition maps are blended with the same t_k for generator and discriminator.
WalkReport walk(const ModelParams<float>& model, const WalkSpec& spec,
                std::span<const Image<float>> reference_corpus);

/// A memorizer: returns the pixel blend of two fixed training images, with the blend weight
/// read off the first seed coordinate over [a, b].
class MemorizingBlendGenerator {
 public:
  MemorizingBlendGenerator(Image<float> first, Image<float> last, double a, double b);
  Image<float> operator()(const LatentSeed<float>& z) const;

 private:
  Image<float> first_, last_;
  double a_, b_;
};

/// Images concatenated left to right.
Image<float> horizontal_strip(std::span<const Image<float>> images);

std::string walk_csv(const WalkReport& report);

/// Eval-mode generation of a single image, mapped to [0, 1].
Image<float> generate_image(const ModelParams<float>& model, const LatentSeed<float>& z, ClassLabel label);

/// Latent for sample k of class `label` under run seed `seed`; each sample has its own stream.
LatentSeed<float> sample_latent(std::uint64_t seed, ClassLabel label, int k, int latent_dim);

struct ClassEvaluation {
  ClassLabel label = ClassLabel::normal;
  int samples = 0;
  double accuracy = 0;          // fraction the region-energy classifier assigns to `label`
  double mean_nn_distance = 0;  // NaN without a reference corpus
  double mean_realism = 0;      // discriminator output under the same label
};

/// Generates `per_class` samples per class and scores conditioning, memorization and realism.
std::vector<ClassEvaluation> evaluate_conditioning(const ModelParams<float>& model, int per_class, std::uint64_t seed,
                                                   std::span<const Image<float>> reference, const ZoneLayout& layout);

/// Fraction of all samples classified as their conditioning label.
double overall_accuracy(std::span<const ClassEvaluation> rows);

/// `class,samples,accuracy,mean_nn_distance,mean_realism`, one row per class plus `all`.
std::string evaluation_csv(std::span<const ClassEvaluation> rows);

}  // namespace radiogan

#endif  // RADIOGAN_LATENT_WALK_HPP_
