#ifndef RADIOGAN_TRAINING_HPP_
#define RADIOGAN_TRAINING_HPP_

#include "radiogan/model.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace radiogan {

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
template <typename T>
T bce(const Vector<T>& prediction, T target) {
  const T eps = static_cast<T>(kBceEpsilon);
  T total = 0;
  for (Index n = 0; n < prediction.size(); ++n) {
    const T p = std::clamp(prediction[n], eps, T(1) - eps);
    total -= target * std::log(p) + (T(1) - target) * std::log(T(1) - p);
  }
  return total / static_cast<T>(prediction.size());
}

/// d(mean BCE)/d(logit) for sigmoid outputs, 1 x N. Zero where the clamp is active.
template <typename T>
Matrix<T> bce_logit_gradient(const Vector<T>& prediction, T target) {
  const T eps = static_cast<T>(kBceEpsilon);
  const T scale = T(1) / static_cast<T>(prediction.size());
  Matrix<T> grad(1, prediction.size());
  for (Index n = 0; n < prediction.size(); ++n) {
    const T p = prediction[n];
    grad(0, n) = (p < eps || p > T(1) - eps) ? T(0) : (p - target) * scale;
  }
  return grad;
}

struct AdamConfig {
  double learning_rate = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Vector<T>> m, v;
  std::int64_t step = 0;
};

template <typename P>
AdamState<typename P::Scalar> make_adam_state(P& params) {
  using T = typename P::Scalar;
  AdamState<T> s;
  for (const auto& view : tensor_views(params)) {
    s.m.push_back(Vector<T>::Zero(view.size));
    s.v.push_back(Vector<T>::Zero(view.size));
  }
  return s;
}

/// One bias-corrected Adam step over every tensor of `params`.
template <typename P>
void adam_update(P& params, P& grads, AdamState<typename P::Scalar>& state, const AdamConfig& cfg) {
  using T = typename P::Scalar;
  auto pv = tensor_views(params);
  auto gv = tensor_views(grads);
  if (pv.size() != state.m.size()) throw std::invalid_argument("optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.epsilon);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    Eigen::Map<Vector<T>> p(pv[i].data, pv[i].size);
    Eigen::Map<const Vector<T>> g(gv[i].data, gv[i].size);
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

struct TrainConfig {
  int epochs = 300;
  double lr = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 32;
  std::uint64_t rng_seed = 0;
  int checkpoint_every = 50;
  std::string label_source;  // manifest the images and labels were read from

  AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

struct StepMetrics {
  double d_loss_real = 0;
  double d_loss_fake = 0;
  double g_loss = 0;
  double d_accuracy = 0;
};

struct HistoryRow {
  int epoch = 0;
  StepMetrics metrics;
};

using TrainHistory = std::vector<HistoryRow>;

std::string history_csv(const TrainHistory& history);
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to continue training bit-identically.
struct ModelCheckpoint {
  ModelParams<float> model;
  AdamState<float> g_opt;
  AdamState<float> d_opt;
  TrainConfig train;
  int epoch = 0;
  Rng rng;
};

ModelCheckpoint start_training(const ModelConfig& model_cfg, const TrainConfig& train_cfg);

/// Labeled [0, 1] images on the model canvas.
struct Dataset {
  std::vector<Image<float>> images;
  std::vector<ClassLabel> labels;

  std::size_t size() const { return images.size(); }
};

void validate(const Dataset& data, const ModelConfig& cfg);

/// Sampled fake labels and latents for one step; drawn first, in this order, from the step rng.
template <typename T>
Matrix<T> sample_latents(Index count, int latent_dim, Rng& rng) {
  Matrix<T> z(latent_dim, count);
  for (Index n = 0; n < z.size(); ++n) z.data()[n] = draw_normal<T>(rng);
  return z;
}

inline std::vector<ClassLabel> sample_labels(Index count, Rng& rng) {
  std::vector<ClassLabel> labels(static_cast<std::size_t>(count));
  for (auto& l : labels) l = static_cast<ClassLabel>(draw_int(rng, 0, kNumClasses - 1));
  return labels;
}

namespace detail {

template <typename T>
double accuracy_at_half(const Vector<T>& p, bool real) {
  Index hits = 0;
  for (Index n = 0; n < p.size(); ++n) hits += real ? (p[n] >= T(0.5)) : (p[n] < T(0.5));
  return static_cast<double>(hits);
}

}  // namespace detail

/// Discriminator update on one real batch against a given fake batch; returns
/// (loss_real, loss_fake, accuracy). Generator parameters are not touched.
template <typename T>
StepMetrics discriminator_step(Discriminator<T>& d, AdamState<T>& opt, const AdamConfig& adam,
                               const nn::FeatureBatch<T>& real, std::span<const ClassLabel> real_labels,
                               const nn::FeatureBatch<T>& fake, std::span<const ClassLabel> fake_labels, Rng& rng) {
  StepMetrics m;
  auto grads = zeros_like(d.params);
  DiscriminatorTape<T> tape;
  const Vector<T> p_real = discriminator_forward_train(d, real, real_labels, rng, tape);
  discriminator_backward(d, tape, bce_logit_gradient<T>(p_real, T(1)), grads);
  const Vector<T> p_fake = discriminator_forward_train(d, fake, fake_labels, rng, tape);
  discriminator_backward(d, tape, bce_logit_gradient<T>(p_fake, T(0)), grads);
  adam_update(d.params, grads, opt, adam);
  m.d_loss_real = static_cast<double>(bce<T>(p_real, T(1)));
  m.d_loss_fake = static_cast<double>(bce<T>(p_fake, T(0)));
  m.d_accuracy = (detail::accuracy_at_half(p_real, true) + detail::accuracy_at_half(p_fake, false)) /
                 static_cast<double>(p_real.size() + p_fake.size());
  return m;
}

/// One alternating update: D on real vs G(z, y), then G to make D(G(z, y), y) -> 1.
/// `real` must already be in [-1, 1].
template <typename T>
StepMetrics train_step(ModelParams<T>& model, AdamState<T>& g_opt, AdamState<T>& d_opt, const AdamConfig& adam,
                       const nn::FeatureBatch<T>& real, std::span<const ClassLabel> real_labels, Rng& rng) {
  const Index n = real.batch;
  const Matrix<T> z = sample_latents<T>(n, model.config.latent_dim, rng);
  const std::vector<ClassLabel> fake_labels = sample_labels(n, rng);

  GeneratorTape<T> g_tape;
  const nn::FeatureBatch<T> fake = generator_forward_train(model.generator, z, fake_labels, g_tape);

  StepMetrics m = discriminator_step(model.discriminator, d_opt, adam, real, real_labels, fake, fake_labels, rng);

  // Generator update through the freshly updated discriminator; only G moves.
  DiscriminatorTape<T> d_tape;
  const Vector<T> p_gen = discriminator_forward_train(model.discriminator, fake, fake_labels, rng, d_tape);
  auto d_scratch = zeros_like(model.discriminator.params);
  const Matrix<T> d_image =
      discriminator_backward(model.discriminator, d_tape, bce_logit_gradient<T>(p_gen, T(1)), d_scratch);
  auto g_grads = zeros_like(model.generator.params);
  generator_backward(model.generator, g_tape, d_image, g_grads);
  adam_update(model.generator.params, g_grads, g_opt, adam);
  m.g_loss = static_cast<double>(bce<T>(p_gen, T(1)));

  if (!std::isfinite(m.d_loss_real) || !std::isfinite(m.d_loss_fake) || !std::isfinite(m.g_loss)) {
    throw TrainingDiverged("non-finite loss (d_real=" + std::to_string(m.d_loss_real) +
                           ", d_fake=" + std::to_string(m.d_loss_fake) + ", g=" + std::to_string(m.g_loss) + ")");
  }
  return m;
}

struct EpochEvent {
  int epoch = 0;
  const ModelCheckpoint* state = nullptr;
  const TrainHistory* history = nullptr;
};

/// Continues `state` until `state.epoch == target_epoch`, appending one history row per epoch.
/// Each epoch shuffles with the state rng and runs ceil(N / batch) steps.
void train_epochs(ModelCheckpoint& state, const Dataset& data, int target_epoch, TrainHistory& history,
                  const std::function<void(const EpochEvent&)>& on_epoch = {});

struct TrainResult {
  ModelCheckpoint checkpoint;
  TrainHistory history;
};

/// Full run. When `out_dir` is set, writes `checkpoint/` every checkpoint_every epochs and at the
/// end, and `history.csv` after every epoch.
TrainResult train(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Checkpoint directory: `meta` (key=value), `generator.bin`, `discriminator.bin`,
/// `optimizer.bin`, `rng.txt`. Written to a temporary directory and renamed into place.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir);
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

inline constexpr const char* kCheckpointSchema = "radiogan-checkpoint-1";

}  // namespace radiogan

#endif  // RADIOGAN_TRAINING_HPP_
