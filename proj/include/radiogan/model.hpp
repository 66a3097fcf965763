#ifndef RADIOGAN_MODEL_HPP_
#define RADIOGAN_MODEL_HPP_

#include "radiogan/nn.hpp"
#include "radiogan/random.hpp"
#include "radiogan/types.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace radiogan {

struct ModelConfig {
  int latent_dim = 100;
  int embed_dim = 50;
  Index seed_height = 5;
  Index seed_width = 3;
  int upsample_stages = 5;
  int seed_channels = 256;
  std::vector<int> gen_channels = {256, 128, 64, 32, 16};  // output channels per upsampling stage
  int disc_layers = 8;
  int disc_kernel = 3;
  int disc_stride = 2;
  std::vector<int> disc_channels = {32, 64, 128, 256, 256, 256, 256, 256};
  double leaky_slope = 0.2;
  double dropout_rate = 0.25;
  double bn_momentum = 0.8;
  double bn_epsilon = 1e-3;

  Index canvas_height() const { return seed_height << upsample_stages; }
  Index canvas_width() const { return seed_width << upsample_stages; }
  Index seed_pixels() const { return seed_height * seed_width; }
  Index canvas_pixels() const { return canvas_height() * canvas_width(); }

  /// Conv layers 2 .. L-2 (1-based) carry batch normalization.
  bool disc_has_norm(int layer) const { return layer >= 1 && layer <= disc_layers - 3; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& cfg);

/// Default channel plan for a given number of upsampling stages (3..5): the last
/// `stages` widths of the full generator and a matching seed width.
ModelConfig model_config_for_stages(int stages);

// Transposed conv k=4, s=2, p=1 doubles each spatial side exactly.
inline constexpr nn::ConvGeometry kUpsampleGeometry{4, 2, 1};
inline constexpr nn::ConvGeometry kOutputGeometry{3, 1, 1};

inline nn::ConvGeometry disc_geometry(const ModelConfig& cfg) {
  // Symmetric padding of kernel/2 gives ceil(in / stride) outputs.
  return {cfg.disc_kernel, cfg.disc_stride, cfg.disc_kernel / 2};
}

/// (height, width) entering each discriminator conv layer, plus the final map.
std::vector<std::pair<Index, Index>> discriminator_spatial_trace(const ModelConfig& cfg);

enum class TensorKind { weight, bias, scale, shift, statistic };

template <typename T>
struct GeneratorParams {
  using Scalar = T;
  nn::DenseParams<T> latent;      // latent -> seed_channels * seed pixels
  nn::BatchNormParams<T> seed_norm;
  Matrix<T> embedding;            // embed_dim x classes
  nn::DenseParams<T> condition;   // embed_dim -> seed pixels
  std::vector<nn::ConvParams<T>> stages;
  std::vector<nn::BatchNormParams<T>> stage_norms;
  nn::ConvParams<T> output;

  template <typename Self, typename F>
  static void visit(Self& p, F&& f) {
    f("latent.weight", p.latent.weight, TensorKind::weight);
    f("latent.bias", p.latent.bias, TensorKind::bias);
    f("seed_norm.gamma", p.seed_norm.gamma, TensorKind::scale);
    f("seed_norm.beta", p.seed_norm.beta, TensorKind::shift);
    f("embedding", p.embedding, TensorKind::weight);
    f("condition.weight", p.condition.weight, TensorKind::weight);
    f("condition.bias", p.condition.bias, TensorKind::bias);
    for (std::size_t i = 0; i < p.stages.size(); ++i) {
      const std::string s = "stage" + std::to_string(i);
      f(s + ".weight", p.stages[i].weight, TensorKind::weight);
      f(s + ".bias", p.stages[i].bias, TensorKind::bias);
      f(s + ".gamma", p.stage_norms[i].gamma, TensorKind::scale);
      f(s + ".beta", p.stage_norms[i].beta, TensorKind::shift);
    }
    f("output.weight", p.output.weight, TensorKind::weight);
    f("output.bias", p.output.bias, TensorKind::bias);
  }
  template <typename F> void for_each(F&& f) { visit(*this, f); }
  template <typename F> void for_each(F&& f) const { visit(*this, f); }
};

template <typename T>
struct DiscriminatorParams {
  using Scalar = T;
  Matrix<T> embedding;                // embed_dim x classes
  nn::DenseParams<T> condition;       // embed_dim -> canvas pixels
  std::vector<nn::ConvParams<T>> layers;
  std::vector<nn::BatchNormParams<T>> norms;  // one per layer; empty when the layer has none
  nn::DenseParams<T> head;            // flattened features -> 1 logit

  template <typename Self, typename F>
  static void visit(Self& p, F&& f) {
    f("embedding", p.embedding, TensorKind::weight);
    f("condition.weight", p.condition.weight, TensorKind::weight);
    f("condition.bias", p.condition.bias, TensorKind::bias);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      const std::string s = "conv" + std::to_string(i);
      f(s + ".weight", p.layers[i].weight, TensorKind::weight);
      f(s + ".bias", p.layers[i].bias, TensorKind::bias);
      if (p.norms[i].gamma.size() > 0) {
        f(s + ".gamma", p.norms[i].gamma, TensorKind::scale);
        f(s + ".beta", p.norms[i].beta, TensorKind::shift);
      }
    }
    f("head.weight", p.head.weight, TensorKind::weight);
    f("head.bias", p.head.bias, TensorKind::bias);
  }
  template <typename F> void for_each(F&& f) { visit(*this, f); }
  template <typename F> void for_each(F&& f) const { visit(*this, f); }
};

/// Batch-norm running statistics, visited in a fixed order.
template <typename T>
struct RunningStats {
  using Scalar = T;
  std::vector<nn::BatchNormStats<T>> norms;  // may contain empty entries for layers without one

  template <typename Self, typename F>
  static void visit(Self& s, F&& f) {
    for (std::size_t i = 0; i < s.norms.size(); ++i) {
      if (s.norms[i].mean.size() == 0) continue;
      const std::string n = "norm" + std::to_string(i);
      f(n + ".mean", s.norms[i].mean, TensorKind::statistic);
      f(n + ".var", s.norms[i].var, TensorKind::statistic);
    }
  }
  template <typename F> void for_each(F&& f) { visit(*this, f); }
  template <typename F> void for_each(F&& f) const { visit(*this, f); }
};

template <typename T>
struct Generator {
  ModelConfig config;
  GeneratorParams<T> params;
  RunningStats<T> stats;  // [0] seed norm, [1 + i] stage i
};

template <typename T>
struct Discriminator {
  ModelConfig config;
  DiscriminatorParams<T> params;
  RunningStats<T> stats;  // one slot per conv layer
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  Generator<T> generator;
  Discriminator<T> discriminator;
  std::uint64_t init_seed = 0;
};

/// Non-owning view of one tensor's storage.
template <typename T>
struct TensorView {
  std::string name;
  T* data;
  Index size;
  TensorKind kind;
};

template <typename P>
auto tensor_views(P& params) {
  std::vector<TensorView<typename P::Scalar>> views;
  params.for_each([&](const std::string& name, auto& t, TensorKind kind) {
    views.push_back({name, t.data(), t.size(), kind});
  });
  return views;
}

template <typename P>
Index parameter_count(const P& params) {
  Index n = 0;
  params.for_each([&](const std::string&, const auto& t, TensorKind) { n += t.size(); });
  return n;
}

/// Same shapes, all zeros.
template <typename P>
P zeros_like(const P& params) {
  P out = params;
  out.for_each([](const std::string&, auto& t, TensorKind) { t.setZero(); });
  return out;
}

// --- construction -----------------------------------------------------------------------

template <typename T>
Generator<T> make_generator(const ModelConfig& cfg) {
  validate(cfg);
  Generator<T> g;
  g.config = cfg;
  auto& p = g.params;
  const Index seed_features = Index(cfg.seed_channels) * cfg.seed_pixels();
  p.latent = {Matrix<T>::Zero(seed_features, cfg.latent_dim), Vector<T>::Zero(seed_features)};
  p.seed_norm = {Vector<T>::Ones(cfg.seed_channels), Vector<T>::Zero(cfg.seed_channels)};
  p.embedding = Matrix<T>::Zero(cfg.embed_dim, kNumClasses);
  p.condition = {Matrix<T>::Zero(cfg.seed_pixels(), cfg.embed_dim), Vector<T>::Zero(cfg.seed_pixels())};
  g.stats.norms.push_back({Vector<T>::Zero(cfg.seed_channels), Vector<T>::Ones(cfg.seed_channels)});
  const Index k = kUpsampleGeometry.kernel;
  Index in = cfg.seed_channels + 1;  // + condition channel
  for (int s = 0; s < cfg.upsample_stages; ++s) {
    const Index out = cfg.gen_channels[s];
    p.stages.push_back({Matrix<T>::Zero(k * k * out, in), Vector<T>::Zero(out)});
    p.stage_norms.push_back({Vector<T>::Ones(out), Vector<T>::Zero(out)});
    g.stats.norms.push_back({Vector<T>::Zero(out), Vector<T>::Ones(out)});
    in = out;
  }
  const Index ko = kOutputGeometry.kernel;
  p.output = {Matrix<T>::Zero(1, ko * ko * in), Vector<T>::Zero(1)};
  return g;
}

template <typename T>
Discriminator<T> make_discriminator(const ModelConfig& cfg) {
  validate(cfg);
  Discriminator<T> d;
  d.config = cfg;
  auto& p = d.params;
  p.embedding = Matrix<T>::Zero(cfg.embed_dim, kNumClasses);
  p.condition = {Matrix<T>::Zero(cfg.canvas_pixels(), cfg.embed_dim), Vector<T>::Zero(cfg.canvas_pixels())};
  const Index k = cfg.disc_kernel;
  Index in = 2;  // image + condition channel
  for (int l = 0; l < cfg.disc_layers; ++l) {
    const Index out = cfg.disc_channels[l];
    p.layers.push_back({Matrix<T>::Zero(out, k * k * in), Vector<T>::Zero(out)});
    if (cfg.disc_has_norm(l)) {
      p.norms.push_back({Vector<T>::Ones(out), Vector<T>::Zero(out)});
      d.stats.norms.push_back({Vector<T>::Zero(out), Vector<T>::Ones(out)});
    } else {
      p.norms.push_back({});
      d.stats.norms.push_back({});
    }
    in = out;
  }
  const auto trace = discriminator_spatial_trace(cfg);
  const Index flat = in * trace.back().first * trace.back().second;
  p.head = {Matrix<T>::Zero(1, flat), Vector<T>::Zero(1)};
  return d;
}

/// Weights and embeddings ~ Normal(0, 0.02); biases and shifts 0; scales 1.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<T> m{cfg, make_generator<T>(cfg), make_discriminator<T>(cfg), seed};
  Rng rng(derive_seed(seed, 0x1417));
  auto init = [&](const std::string&, auto& t, TensorKind kind) {
    if (kind != TensorKind::weight) return;
    for (Index n = 0; n < t.size(); ++n) t.data()[n] = static_cast<T>(draw_normal<double>(rng, 0.0, 0.02));
  };
  m.generator.params.for_each(init);
  m.discriminator.params.for_each(init);
  return m;
}

// --- generator -------------------------------------------------------------------------

template <typename T>
struct GeneratorTape {
  Matrix<T> latent;
  Matrix<T> embeddings;  // embed_dim x N
  std::vector<ClassLabel> labels;
  nn::BatchNormCache<T> seed_norm;
  std::vector<nn::FeatureBatch<T>> inputs;  // input of stage i; inputs[stages] feeds the output conv
  std::vector<nn::BatchNormCache<T>> stage_norms;
  Matrix<T> output;  // tanh output, 1 x (N * H * W)
};

inline void check_labels(std::span<const ClassLabel> labels) {
  for (ClassLabel l : labels) {
    if (class_code(l) < 0 || class_code(l) >= kNumClasses) {
      throw std::invalid_argument("unknown class label code " + std::to_string(class_code(l)));
    }
  }
}

template <typename T>
Matrix<T> gather_embeddings(const Matrix<T>& table, std::span<const ClassLabel> labels) {
  check_labels(labels);
  Matrix<T> out(table.rows(), static_cast<Index>(labels.size()));
  for (std::size_t n = 0; n < labels.size(); ++n) out.col(static_cast<Index>(n)) = table.col(class_code(labels[n]));
  return out;
}

/// Generator condition maps (seed pixels x N): embedding lookup then linear projection.
template <typename T>
Matrix<T> generator_condition(const Generator<T>& g, std::span<const ClassLabel> labels) {
  return nn::dense(gather_embeddings(g.params.embedding, labels), g.params.condition);
}

namespace detail {

template <typename T>
nn::FeatureBatch<T> generator_run(const Generator<T>& g, RunningStats<T>* stats, const Matrix<T>& latent,
                                  const Matrix<T>& condition_maps, GeneratorTape<T>* tape) {
  const ModelConfig& cfg = g.config;
  const auto& p = g.params;
  if (latent.rows() != cfg.latent_dim) {
    throw std::invalid_argument("latent length " + std::to_string(latent.rows()) + " != " +
                                std::to_string(cfg.latent_dim));
  }
  if (condition_maps.rows() != cfg.seed_pixels() || condition_maps.cols() != latent.cols()) {
    throw std::invalid_argument("generator condition map shape mismatch");
  }
  const bool train = stats != nullptr;
  const T momentum = static_cast<T>(cfg.bn_momentum), eps = static_cast<T>(cfg.bn_epsilon);

  nn::FeatureBatch<T> x = nn::unflatten<T>(nn::dense(latent, p.latent), cfg.seed_channels, cfg.seed_height,
                                           cfg.seed_width);
  if (train) {
    x.data = nn::batch_norm_train(x.data, p.seed_norm, stats->norms[0], momentum, eps, tape->seed_norm);
  } else {
    x.data = nn::batch_norm_eval(x.data, p.seed_norm, g.stats.norms[0], eps);
  }
  nn::relu_inplace(x.data);
  x = nn::concat_channels(x, nn::maps_to_channel<T>(condition_maps, cfg.seed_height, cfg.seed_width));

  if (tape) {
    tape->latent = latent;
    tape->inputs.clear();
    tape->stage_norms.assign(static_cast<std::size_t>(cfg.upsample_stages), {});
  }
  for (int s = 0; s < cfg.upsample_stages; ++s) {
    nn::FeatureBatch<T> y = nn::conv_transpose2d(x, p.stages[s], kUpsampleGeometry);
    if (train) {
      y.data = nn::batch_norm_train(y.data, p.stage_norms[s], stats->norms[s + 1], momentum, eps,
                                    tape->stage_norms[s]);
    } else {
      y.data = nn::batch_norm_eval(y.data, p.stage_norms[s], g.stats.norms[s + 1], eps);
    }
    nn::relu_inplace(y.data);
    if (tape) tape->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  nn::FeatureBatch<T> out = nn::conv2d(x, p.output, kOutputGeometry);
  out.data = out.data.array().tanh().matrix();
  if (tape) {
    tape->inputs.push_back(std::move(x));
    tape->output = out.data;
  }
  return out;
}

}  // namespace detail

/// Eval-mode generation from explicit condition maps (used for blended conditions).
template <typename T>
nn::FeatureBatch<T> generator_forward_conditioned(const Generator<T>& g, const Matrix<T>& latent,
                                                  const Matrix<T>& condition_maps) {
  return detail::generator_run<T>(g, nullptr, latent, condition_maps, nullptr);
}

/// Eval mode: running batch-norm statistics, deterministic, const.
template <typename T>
nn::FeatureBatch<T> generator_forward(const Generator<T>& g, const Matrix<T>& latent,
                                      std::span<const ClassLabel> labels) {
  if (static_cast<Index>(labels.size()) != latent.cols()) throw std::invalid_argument("label count mismatch");
  return generator_forward_conditioned(g, latent, generator_condition(g, labels));
}

/// Train mode: batch statistics, updates running statistics, records a tape for backward.
template <typename T>
nn::FeatureBatch<T> generator_forward_train(Generator<T>& g, const Matrix<T>& latent,
                                            std::span<const ClassLabel> labels, GeneratorTape<T>& tape) {
  if (static_cast<Index>(labels.size()) != latent.cols()) throw std::invalid_argument("label count mismatch");
  tape.labels.assign(labels.begin(), labels.end());
  tape.embeddings = gather_embeddings(g.params.embedding, labels);
  const Matrix<T> cond = nn::dense(tape.embeddings, g.params.condition);
  return detail::generator_run<T>(g, &g.stats, latent, cond, &tape);
}

/// Accumulates into `grads` the gradient given dLoss/dOutput (1 x N*H*W, tanh output).
template <typename T>
void generator_backward(const Generator<T>& g, const GeneratorTape<T>& tape, const Matrix<T>& d_output,
                        GeneratorParams<T>& grads) {
  const ModelConfig& cfg = g.config;
  const auto& p = g.params;

  nn::FeatureBatch<T> d;
  d.batch = tape.inputs.back().batch;
  d.height = cfg.canvas_height();
  d.width = cfg.canvas_width();
  d.data = (d_output.array() * (T(1) - tape.output.array().square())).matrix();
  d = nn::conv2d_backward(tape.inputs.back(), d, p.output, kOutputGeometry, grads.output);

  for (int s = cfg.upsample_stages - 1; s >= 0; --s) {
    const auto& post = tape.inputs[s + 1];  // ReLU output of stage s
    d.data = nn::relu_backward(post.data, d.data);
    d.data = nn::batch_norm_backward(d.data, p.stage_norms[s], tape.stage_norms[s], grads.stage_norms[s]);
    d = nn::conv_transpose2d_backward(tape.inputs[s], d, p.stages[s], kUpsampleGeometry, grads.stages[s]);
  }

  const Index c0 = cfg.seed_channels;
  const auto& in0 = tape.inputs[0];
  Matrix<T> d_seed = nn::relu_backward<T>(in0.data.topRows(c0), d.data.topRows(c0));
  d_seed = nn::batch_norm_backward(d_seed, p.seed_norm, tape.seed_norm, grads.seed_norm);
  nn::FeatureBatch<T> seed_grad;
  seed_grad.batch = d.batch;
  seed_grad.height = cfg.seed_height;
  seed_grad.width = cfg.seed_width;
  seed_grad.data = std::move(d_seed);
  nn::dense_backward(tape.latent, nn::flatten(seed_grad), p.latent, grads.latent);

  const Matrix<T> d_cond_row = d.data.bottomRows(1);
  const Matrix<T> d_cond = nn::channel_to_maps<T>(d_cond_row, cfg.seed_height, cfg.seed_width);
  const Matrix<T> d_emb = nn::dense_backward(tape.embeddings, d_cond, p.condition, grads.condition);
  for (std::size_t n = 0; n < tape.labels.size(); ++n) {
    grads.embedding.col(class_code(tape.labels[n])) += d_emb.col(static_cast<Index>(n));
  }
}

// --- discriminator ---------------------------------------------------------------------

template <typename T>
struct DiscriminatorTape {
  Matrix<T> embeddings;
  std::vector<ClassLabel> labels;
  std::vector<nn::FeatureBatch<T>> inputs;  // conv layer inputs
  std::vector<Matrix<T>> pre_activations;   // conv outputs
  std::vector<Matrix<T>> dropout_masks;
  std::vector<nn::BatchNormCache<T>> norms;
  Matrix<T> flat;     // head input
  Matrix<T> logits;   // 1 x N
};

template <typename T>
Matrix<T> discriminator_condition(const Discriminator<T>& d, std::span<const ClassLabel> labels) {
  return nn::dense(gather_embeddings(d.params.embedding, labels), d.params.condition);
}

namespace detail {

template <typename T>
Vector<T> discriminator_run(const Discriminator<T>& d, RunningStats<T>* stats, const nn::FeatureBatch<T>& image,
                            const Matrix<T>& condition_maps, Rng* rng, DiscriminatorTape<T>* tape) {
  const ModelConfig& cfg = d.config;
  const auto& p = d.params;
  if (image.channels() != 1 || image.height != cfg.canvas_height() || image.width != cfg.canvas_width()) {
    throw std::invalid_argument("discriminator expects a 1-channel " + std::to_string(cfg.canvas_height()) + "x" +
                                std::to_string(cfg.canvas_width()) + " image");
  }
  if (condition_maps.rows() != cfg.canvas_pixels() || condition_maps.cols() != image.batch) {
    throw std::invalid_argument("discriminator condition map shape mismatch");
  }
  const bool train = stats != nullptr;
  const T slope = static_cast<T>(cfg.leaky_slope);
  const T momentum = static_cast<T>(cfg.bn_momentum), eps = static_cast<T>(cfg.bn_epsilon);
  const nn::ConvGeometry geom = disc_geometry(cfg);

  nn::FeatureBatch<T> x =
      nn::concat_channels(image, nn::maps_to_channel<T>(condition_maps, image.height, image.width));
  if (tape) {
    tape->inputs.clear();
    tape->pre_activations.clear();
    tape->dropout_masks.clear();
    tape->norms.assign(static_cast<std::size_t>(cfg.disc_layers), {});
  }
  for (int l = 0; l < cfg.disc_layers; ++l) {
    nn::FeatureBatch<T> y = nn::conv2d(x, p.layers[l], geom);
    if (tape) tape->pre_activations.push_back(y.data);
    nn::leaky_relu_inplace(y.data, slope);
    if (train && cfg.dropout_rate > 0) {
      Matrix<T> mask = nn::dropout_mask<T>(y.data.rows(), y.data.cols(), cfg.dropout_rate, *rng);
      y.data.array() *= mask.array();
      if (tape) tape->dropout_masks.push_back(std::move(mask));
    } else if (tape) {
      tape->dropout_masks.emplace_back();
    }
    if (cfg.disc_has_norm(l)) {
      if (train) {
        y.data = nn::batch_norm_train(y.data, p.norms[l], stats->norms[l], momentum, eps, tape->norms[l]);
      } else {
        y.data = nn::batch_norm_eval(y.data, p.norms[l], d.stats.norms[l], eps);
      }
    }
    if (tape) tape->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  Matrix<T> flat = nn::flatten(x);
  Matrix<T> logits = nn::dense(flat, p.head);
  Vector<T> prob = logits.row(0).transpose().unaryExpr([](T v) { return nn::sigmoid(v); });
  if (tape) {
    tape->flat = std::move(flat);
    tape->logits = std::move(logits);
  }
  return prob;
}

}  // namespace detail

/// Eval mode with explicit condition maps (canvas pixels x N).
template <typename T>
Vector<T> discriminator_forward_conditioned(const Discriminator<T>& d, const nn::FeatureBatch<T>& image,
                                            const Matrix<T>& condition_maps) {
  return detail::discriminator_run<T>(d, nullptr, image, condition_maps, nullptr, nullptr);
}

/// Eval mode: no dropout, running batch-norm statistics. Returns probabilities in (0, 1).
template <typename T>
Vector<T> discriminator_forward(const Discriminator<T>& d, const nn::FeatureBatch<T>& image,
                                std::span<const ClassLabel> labels) {
  if (static_cast<Index>(labels.size()) != image.batch) throw std::invalid_argument("label count mismatch");
  return discriminator_forward_conditioned(d, image, discriminator_condition(d, labels));
}

template <typename T>
Vector<T> discriminator_forward_train(Discriminator<T>& d, const nn::FeatureBatch<T>& image,
                                      std::span<const ClassLabel> labels, Rng& rng, DiscriminatorTape<T>& tape) {
  if (static_cast<Index>(labels.size()) != image.batch) throw std::invalid_argument("label count mismatch");
  tape.labels.assign(labels.begin(), labels.end());
  tape.embeddings = gather_embeddings(d.params.embedding, labels);
  const Matrix<T> cond = nn::dense(tape.embeddings, d.params.condition);
  return detail::discriminator_run<T>(d, &d.stats, image, cond, &rng, &tape);
}

/// Accumulates parameter gradients from dLoss/dLogit (1 x N); returns dLoss/dImage (1 x N*H*W).
template <typename T>
Matrix<T> discriminator_backward(const Discriminator<T>& d, const DiscriminatorTape<T>& tape,
                                 const Matrix<T>& d_logits, DiscriminatorParams<T>& grads) {
  const ModelConfig& cfg = d.config;
  const auto& p = d.params;
  const T slope = static_cast<T>(cfg.leaky_slope);
  const nn::ConvGeometry geom = disc_geometry(cfg);
  const auto trace = discriminator_spatial_trace(cfg);

  const Matrix<T> d_flat = nn::dense_backward(tape.flat, d_logits, p.head, grads.head);
  nn::FeatureBatch<T> grad =
      nn::unflatten<T>(d_flat, cfg.disc_channels.back(), trace.back().first, trace.back().second);

  for (int l = cfg.disc_layers - 1; l >= 0; --l) {
    if (cfg.disc_has_norm(l)) {
      grad.data = nn::batch_norm_backward(grad.data, p.norms[l], tape.norms[l], grads.norms[l]);
    }
    if (tape.dropout_masks[l].size() > 0) grad.data.array() *= tape.dropout_masks[l].array();
    grad.data = nn::leaky_relu_backward(tape.pre_activations[l], grad.data, slope);
    grad = nn::conv2d_backward(tape.inputs[l], grad, p.layers[l], geom, grads.layers[l]);
  }

  const Matrix<T> d_cond_row = grad.data.bottomRows(1);
  const Matrix<T> d_cond = nn::channel_to_maps<T>(d_cond_row, cfg.canvas_height(), cfg.canvas_width());
  const Matrix<T> d_emb = nn::dense_backward(tape.embeddings, d_cond, p.condition, grads.condition);
  for (std::size_t n = 0; n < tape.labels.size(); ++n) {
    grads.embedding.col(class_code(tape.labels[n])) += d_emb.col(static_cast<Index>(n));
  }
  return grad.data.topRows(1);
}

// --- pixel scale -----------------------------------------------------------------------

/// [0, 1] data range to the generator's [-1, 1] range: x -> 2x - 1.
template <typename Derived>
auto pixel_scale(const Eigen::MatrixBase<Derived>& image01) {
  using T = typename Derived::Scalar;
  return (T(2) * image01.array() - T(1)).matrix();
}

template <typename Derived>
auto pixel_unscale(const Eigen::MatrixBase<Derived>& image_pm1) {
  using T = typename Derived::Scalar;
  return ((image_pm1.array() + T(1)) / T(2)).matrix();
}

/// Packs images (each H x W) into a single-channel batch.
template <typename T>
nn::FeatureBatch<T> images_to_batch(std::span<const Image<T>> images) {
  if (images.empty()) throw std::invalid_argument("empty image batch");
  const Index h = images[0].rows(), w = images[0].cols();
  nn::FeatureBatch<T> b(1, static_cast<Index>(images.size()), h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].rows() != h || images[n].cols() != w) throw std::invalid_argument("image size mismatch");
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        b.data.data() + static_cast<Index>(n) * h * w, h, w) = images[n];
  }
  return b;
}

template <typename T>
Image<T> batch_image(const nn::FeatureBatch<T>& b, Index n) {
  return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      b.data.data() + n * b.pixels(), b.height, b.width);
}

}  // namespace radiogan

#endif  // RADIOGAN_MODEL_HPP_
