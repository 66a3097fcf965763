#ifndef RADIOGAN_TEST_SUPPORT_HPP_
#define RADIOGAN_TEST_SUPPORT_HPP_

// Independent reference implementations used as oracles by the unit and acceptance tests.
// They are written as plain loops on purpose and share no code with the library kernels.

#include "radiogan/io.hpp"
#include "radiogan/latent_walk.hpp"
#include "radiogan/model.hpp"
#include "radiogan/pipeline.hpp"
#include "radiogan/training.hpp"
#include "radiogan/volume.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>

namespace radiogan::fixtures {

inline Volume random_volume(Rng& rng, Dims3 dims, Spacing3 spacing, double max_value = 40.0) {
  Volume v;
  v.dims = dims;
  v.spacing = spacing;
  v.voxels.resize(dims.count());
  for (Index n = 0; n < v.voxels.size(); ++n) v.voxels[n] = draw_uniform<float>(rng, 0.0f, static_cast<float>(max_value));
  return v;
}

/// Nearest input index by scanning every candidate; ties go to the lower index.
inline Index brute_nearest(Index n_in, double s_in, Index o, double t) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n_in; ++i) {
    const double d = std::abs((static_cast<double>(i) + 0.5) * s_in - (static_cast<double>(o) + 0.5) * t);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline Volume brute_resample(const Volume& v, double t) {
  auto extent = [&](Index n, double s) {
    return std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(n) * s / t)));
  };
  Volume out;
  out.dims = {extent(v.dims.z, v.spacing.z), extent(v.dims.y, v.spacing.y), extent(v.dims.x, v.spacing.x)};
  out.spacing = {t, t, t};
  out.voxels.resize(out.dims.count());
  for (Index k = 0; k < out.dims.z; ++k)
    for (Index j = 0; j < out.dims.y; ++j)
      for (Index i = 0; i < out.dims.x; ++i)
        out.voxels[(k * out.dims.y + j) * out.dims.x + i] =
            v.voxels[(brute_nearest(v.dims.z, v.spacing.z, k, t) * v.dims.y +
                      brute_nearest(v.dims.y, v.spacing.y, j, t)) * v.dims.x +
                     brute_nearest(v.dims.x, v.spacing.x, i, t)];
  return out;
}

/// MIP over y (rows z, cols x) or x (rows z, cols y), as an explicit max loop.
inline Image<double> brute_mip(const Volume& v, Axis axis) {
  const Index cols = axis == Axis::y ? v.dims.x : v.dims.y;
  Image<double> out = Image<double>::Constant(v.dims.z, cols, -std::numeric_limits<double>::infinity());
  for (Index k = 0; k < v.dims.z; ++k)
    for (Index j = 0; j < v.dims.y; ++j)
      for (Index i = 0; i < v.dims.x; ++i) {
        const double value = v.voxels[(k * v.dims.y + j) * v.dims.x + i];
        double& cell = axis == Axis::y ? out(k, i) : out(k, j);
        cell = std::max(cell, value);
      }
  return out;
}

template <typename T>
T feature(const nn::FeatureBatch<T>& x, Index c, Index n, Index y, Index xx) {
  return x.data(c, (n * x.height + y) * x.width + xx);
}

/// Direct convolution: out[co](y, x) = b[co] + sum w[co, (ky, kx, ci)] in[ci](y*s - p + ky, x*s - p + kx).
template <typename T>
nn::FeatureBatch<T> brute_conv2d(const nn::FeatureBatch<T>& x, const nn::ConvParams<T>& p, const nn::ConvGeometry& g) {
  const Index k = g.kernel, cin = x.channels(), cout = p.weight.rows();
  const Index ho = (x.height + 2 * g.pad - k) / g.stride + 1, wo = (x.width + 2 * g.pad - k) / g.stride + 1;
  nn::FeatureBatch<T> out(cout, x.batch, ho, wo);
  for (Index n = 0; n < x.batch; ++n)
    for (Index co = 0; co < cout; ++co)
      for (Index oy = 0; oy < ho; ++oy)
        for (Index ox = 0; ox < wo; ++ox) {
          T acc = p.bias[co];
          for (Index ky = 0; ky < k; ++ky)
            for (Index kx = 0; kx < k; ++kx)
              for (Index ci = 0; ci < cin; ++ci) {
                const Index iy = oy * g.stride - g.pad + ky, ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) continue;
                acc += p.weight(co, (ky * k + kx) * cin + ci) * feature(x, ci, n, iy, ix);
              }
          out.data(co, (n * ho + oy) * wo + ox) = acc;
        }
  return out;
}

/// Transposed convolution as a scatter: every input pixel stamps its weighted kernel onto the output.
template <typename T>
nn::FeatureBatch<T> brute_conv_transpose2d(const nn::FeatureBatch<T>& x, const nn::ConvParams<T>& p,
                                           const nn::ConvGeometry& g) {
  const Index k = g.kernel, cin = x.channels(), cout = p.weight.rows() / (k * k);
  const Index ho = (x.height - 1) * g.stride - 2 * g.pad + k, wo = (x.width - 1) * g.stride - 2 * g.pad + k;
  nn::FeatureBatch<T> out(cout, x.batch, ho, wo);
  for (Index n = 0; n < x.batch; ++n)
    for (Index iy = 0; iy < x.height; ++iy)
      for (Index ix = 0; ix < x.width; ++ix)
        for (Index ky = 0; ky < k; ++ky)
          for (Index kx = 0; kx < k; ++kx) {
            const Index oy = iy * g.stride - g.pad + ky, ox = ix * g.stride - g.pad + kx;
            if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
            for (Index co = 0; co < cout; ++co)
              for (Index ci = 0; ci < cin; ++ci)
                out.data(co, (n * ho + oy) * wo + ox) +=
                    p.weight((ky * k + kx) * cout + co, ci) * feature(x, ci, n, iy, ix);
          }
  for (Index co = 0; co < cout; ++co) out.data.row(co).array() += p.bias[co];
  return out;
}

/// Textbook Adam on one scalar, kept in double.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0, v = 0;
  long t = 0;

  double step(double param, double grad) {
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double m_hat = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double v_hat = v / (1 - std::pow(b2, static_cast<double>(t)));
    return param - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

inline double scalar_bce(double p, double t) {
  const double eps = 1e-7;
  p = std::min(std::max(p, eps), 1 - eps);
  return -(t * std::log(p) + (1 - t) * std::log(1 - p));
}

/// 8x8 canvas, one generator stage, two discriminator layers, latent length 4.
inline ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.latent_dim = 4;
  cfg.embed_dim = 3;
  cfg.seed_height = 4;
  cfg.seed_width = 4;
  cfg.upsample_stages = 1;
  cfg.seed_channels = 3;
  cfg.gen_channels = {2};
  cfg.disc_layers = 2;
  cfg.disc_channels = {3, 2};
  return cfg;
}

/// A small 80x48 configuration used for training-loop tests.
inline ModelConfig small_config() {
  ModelConfig cfg = model_config_for_stages(4);
  cfg.seed_channels = 64;
  cfg.gen_channels = {64, 32, 16, 8};
  cfg.disc_channels = {16, 32, 64, 64, 64, 64, 64, 64};
  return cfg;
}

/// Tiny configuration (20x12 canvas) for fast loop and checkpoint tests.
inline ModelConfig tiny_config() {
  ModelConfig cfg = model_config_for_stages(3);
  cfg.latent_dim = 8;
  cfg.embed_dim = 4;
  cfg.upsample_stages = 2;
  cfg.seed_channels = 8;
  cfg.gen_channels = {6, 4};
  cfg.disc_layers = 3;
  cfg.disc_channels = {4, 6, 6};
  return cfg;
}

/// Random [0, 1] images with every class present, on the given canvas.
inline Dataset random_dataset(Index count, Index h, Index w, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (Index n = 0; n < count; ++n) {
    Image<float> img(h, w);
    for (Index p = 0; p < img.size(); ++p) img.data()[p] = draw_uniform<float>(rng, 0.0f, 1.0f);
    d.images.push_back(img);
    d.labels.push_back(static_cast<ClassLabel>(n % kNumClasses));
  }
  return d;
}

/// Byte-level file comparison.
inline std::string file_bytes(const std::filesystem::path& p) { return io::read_file(p); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("radiogan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst;      // "<objective>:<tensor>[<index>]"
  Index checked = 0;      // parameters compared
  double max_abs_grad = 0;
};

/// Relative error with a floor so that exactly-zero gradients (e.g. conv biases feeding a
/// batch norm) compare on an absolute scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central-difference check of both adversarial objectives on the micro configuration in double
/// precision, over every generator and discriminator parameter. Dropout masks are reproduced by
/// reseeding the mask stream for every evaluation; batch norm runs in training mode.
inline GradCheckResult gradient_check(std::uint64_t seed, double h = 1e-5, Index batch = 3) {
  const ModelConfig cfg = micro_config();
  ModelParams<double> model = init_params<double>(cfg, seed);
  Rng prng(derive_seed(seed, 0x9C));
  auto redraw = [&](const std::string&, auto& t, TensorKind kind) {
    const double center = kind == TensorKind::scale ? 1.0 : 0.0;
    for (Index n = 0; n < t.size(); ++n) t.data()[n] = center + draw_normal<double>(prng, 0.0, 0.3);
  };
  model.generator.params.for_each(redraw);
  model.discriminator.params.for_each(redraw);

  nn::FeatureBatch<double> real(1, batch, cfg.canvas_height(), cfg.canvas_width());
  for (Index n = 0; n < real.data.size(); ++n) real.data.data()[n] = draw_uniform<double>(prng, -1.0, 1.0);
  const Matrix<double> z = sample_latents<double>(batch, cfg.latent_dim, prng);
  std::vector<ClassLabel> real_labels, fake_labels;
  for (Index n = 0; n < batch; ++n) {
    real_labels.push_back(static_cast<ClassLabel>(n % kNumClasses));
    fake_labels.push_back(static_cast<ClassLabel>((n + 2) % kNumClasses));
  }
  const std::uint64_t mask_seed = derive_seed(seed, 0xD0);

  auto& g = model.generator;
  auto& d = model.discriminator;
  GeneratorTape<double> fixed_tape;
  const nn::FeatureBatch<double> fake = generator_forward_train(g, z, fake_labels, fixed_tape);

  auto d_objective = [&]() {
    Rng masks(mask_seed);
    DiscriminatorTape<double> tape;
    const Vector<double> pr = discriminator_forward_train(d, real, real_labels, masks, tape);
    const Vector<double> pf = discriminator_forward_train(d, fake, fake_labels, masks, tape);
    return bce<double>(pr, 1.0) + bce<double>(pf, 0.0);
  };
  auto g_objective = [&]() {
    GeneratorTape<double> gt;
    const nn::FeatureBatch<double> out = generator_forward_train(g, z, fake_labels, gt);
    Rng masks(mask_seed);
    DiscriminatorTape<double> tape;
    return bce<double>(discriminator_forward_train(d, out, fake_labels, masks, tape), 1.0);
  };

  // Analytic gradients.
  auto d_grads = zeros_like(d.params);
  {
    Rng masks(mask_seed);
    DiscriminatorTape<double> tape;
    const Vector<double> pr = discriminator_forward_train(d, real, real_labels, masks, tape);
    discriminator_backward(d, tape, bce_logit_gradient<double>(pr, 1.0), d_grads);
    const Vector<double> pf = discriminator_forward_train(d, fake, fake_labels, masks, tape);
    discriminator_backward(d, tape, bce_logit_gradient<double>(pf, 0.0), d_grads);
  }
  auto g_grads = zeros_like(g.params);
  {
    GeneratorTape<double> gt;
    const nn::FeatureBatch<double> out = generator_forward_train(g, z, fake_labels, gt);
    Rng masks(mask_seed);
    DiscriminatorTape<double> tape;
    const Vector<double> p = discriminator_forward_train(d, out, fake_labels, masks, tape);
    auto scratch = zeros_like(d.params);
    const Matrix<double> d_image = discriminator_backward(d, tape, bce_logit_gradient<double>(p, 1.0), scratch);
    generator_backward(g, gt, d_image, g_grads);
  }

  GradCheckResult result;
  auto compare = [&](const std::string& objective, auto& params, auto& grads, const auto& loss) {
    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      for (Index n = 0; n < pv[i].size; ++n) {
        double& theta = pv[i].data[n];
        const double saved = theta;
        theta = saved + h;
        const double up = loss();
        theta = saved - h;
        const double down = loss();
        theta = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = gv[i].data[n];
        const double err = relative_error(analytic, numeric);
        result.max_abs_grad = std::max(result.max_abs_grad, std::abs(analytic));
        ++result.checked;
        if (err > result.max_rel_error) {
          result.max_rel_error = err;
          result.worst = objective + ":" + pv[i].name + "[" + std::to_string(n) + "]";
        }
      }
    }
  };
  compare("discriminator", d.params, d_grads, d_objective);
  compare("generator", g.params, g_grads, g_objective);
  return result;
}

}  // namespace radiogan::fixtures

#endif  // RADIOGAN_TEST_SUPPORT_HPP_
