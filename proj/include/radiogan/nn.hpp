#ifndef RADIOGAN_NN_HPP_
#define RADIOGAN_NN_HPP_

#include "radiogan/random.hpp"
#include "radiogan/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

// Layer primitives on batched feature maps. Every function is a free template over the
// scalar type so the same code runs in float for training and double for gradient checks.
namespace radiogan::nn {

enum class Mode { train, eval };

/// A batch of feature maps stored as channels x (batch * height * width).
/// Column index is (n * height + y) * width + x, so each pixel's channel vector is contiguous.
template <typename T>
struct FeatureBatch {
  Index batch = 0, height = 0, width = 0;
  Matrix<T> data;

  FeatureBatch() = default;
  FeatureBatch(Index channels, Index n, Index h, Index w)
      : batch(n), height(h), width(w), data(Matrix<T>::Zero(channels, n * h * w)) {}

  Index channels() const { return data.rows(); }
  Index pixels() const { return height * width; }
};

template <typename T>
FeatureBatch<T> concat_channels(const FeatureBatch<T>& a, const FeatureBatch<T>& b) {
  if (a.batch != b.batch || a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("concat_channels: spatial shape mismatch");
  }
  FeatureBatch<T> out;
  out.batch = a.batch;
  out.height = a.height;
  out.width = a.width;
  out.data.resize(a.channels() + b.channels(), a.data.cols());
  out.data.topRows(a.channels()) = a.data;
  out.data.bottomRows(b.channels()) = b.data;
  return out;
}

/// Per-sample column vectors (features x batch) viewed as a 1-channel-per-row map and back.
/// A dense output of size C*h*w per sample reshapes to C x (batch*h*w) without copying order.
template <typename T>
FeatureBatch<T> unflatten(const Matrix<T>& flat, Index channels, Index h, Index w) {
  FeatureBatch<T> out;
  out.batch = flat.cols();
  out.height = h;
  out.width = w;
  out.data = Eigen::Map<const Matrix<T>>(flat.data(), channels, flat.cols() * h * w);
  return out;
}

template <typename T>
Matrix<T> flatten(const FeatureBatch<T>& x) {
  return Eigen::Map<const Matrix<T>>(x.data.data(), x.channels() * x.pixels(), x.batch);
}

/// Per-sample scalar maps (h*w x batch) to a single-channel batch and back.
template <typename T>
FeatureBatch<T> maps_to_channel(const Matrix<T>& maps, Index h, Index w) {
  FeatureBatch<T> out;
  out.batch = maps.cols();
  out.height = h;
  out.width = w;
  out.data = Eigen::Map<const Matrix<T>>(maps.data(), 1, maps.size());
  return out;
}

template <typename T>
Matrix<T> channel_to_maps(const Matrix<T>& row, Index h, Index w) {
  return Eigen::Map<const Matrix<T>>(row.data(), h * w, row.size() / (h * w));
}

struct ConvGeometry {
  Index kernel = 3, stride = 1, pad = 1;

  Index out(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }
  /// Size produced by the transposed operation.
  Index transposed_out(Index in) const { return (in - 1) * stride - 2 * pad + kernel; }
};

/// Patch matrix with rows ordered (ky, kx, channel) and one column per output pixel.
template <typename T>
Matrix<T> im2col(const FeatureBatch<T>& x, const ConvGeometry& g) {
  const Index c = x.channels(), k = g.kernel;
  const Index ho = g.out(x.height), wo = g.out(x.width);
  Matrix<T> cols = Matrix<T>::Zero(k * k * c, x.batch * ho * wo);
  for (Index n = 0; n < x.batch; ++n) {
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        T* dst = cols.data() + ((n * ho + oy) * wo + ox) * cols.rows();
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= x.width) continue;
            const T* src = x.data.data() + ((n * x.height + iy) * x.width + ix) * c;
            std::memcpy(dst + (ky * k + kx) * c, src, sizeof(T) * static_cast<std::size_t>(c));
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds patch columns back onto an h x w map.
template <typename T>
FeatureBatch<T> col2im(const Matrix<T>& cols, const ConvGeometry& g, Index channels, Index batch, Index h,
                       Index w) {
  const Index k = g.kernel, ho = g.out(h), wo = g.out(w);
  FeatureBatch<T> x(channels, batch, h, w);
  for (Index n = 0; n < batch; ++n) {
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        const T* src = cols.data() + ((n * ho + oy) * wo + ox) * cols.rows();
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= w) continue;
            T* dst = x.data.data() + ((n * h + iy) * w + ix) * channels;
            Eigen::Map<Vector<T>>(dst, channels) += Eigen::Map<const Vector<T>>(src + (ky * k + kx) * channels, channels);
          }
        }
      }
    }
  }
  return x;
}

/// Convolution weights: weight is out x (k*k*in), rows of the patch ordered (ky, kx, in).
/// For transposed convolutions weight is (k*k*out) x in.
template <typename T>
struct ConvParams {
  Matrix<T> weight;
  Vector<T> bias;
};

template <typename T>
FeatureBatch<T> conv2d(const FeatureBatch<T>& x, const ConvParams<T>& p, const ConvGeometry& g) {
  FeatureBatch<T> y;
  y.batch = x.batch;
  y.height = g.out(x.height);
  y.width = g.out(x.width);
  y.data.noalias() = p.weight * im2col(x, g);
  y.data.colwise() += p.bias;
  return y;
}

/// Accumulates parameter gradients and returns the input gradient.
template <typename T>
FeatureBatch<T> conv2d_backward(const FeatureBatch<T>& x, const FeatureBatch<T>& dy, const ConvParams<T>& p,
                                const ConvGeometry& g, ConvParams<T>& grad) {
  const Matrix<T> cols = im2col(x, g);
  grad.weight.noalias() += dy.data * cols.transpose();
  grad.bias += dy.data.rowwise().sum();
  const Matrix<T> dcols = p.weight.transpose() * dy.data;
  return col2im(dcols, g, x.channels(), x.batch, x.height, x.width);
}

template <typename T>
FeatureBatch<T> conv_transpose2d(const FeatureBatch<T>& x, const ConvParams<T>& p, const ConvGeometry& g) {
  const Index out_channels = p.bias.size();
  const Matrix<T> cols = p.weight * x.data;
  FeatureBatch<T> y = col2im(cols, g, out_channels, x.batch, g.transposed_out(x.height), g.transposed_out(x.width));
  y.data.colwise() += p.bias;
  return y;
}

template <typename T>
FeatureBatch<T> conv_transpose2d_backward(const FeatureBatch<T>& x, const FeatureBatch<T>& dy,
                                          const ConvParams<T>& p, const ConvGeometry& g, ConvParams<T>& grad) {
  const Matrix<T> dcols = im2col(dy, g);
  grad.weight.noalias() += dcols * x.data.transpose();
  grad.bias += dy.data.rowwise().sum();
  FeatureBatch<T> dx;
  dx.batch = x.batch;
  dx.height = x.height;
  dx.width = x.width;
  dx.data.noalias() = p.weight.transpose() * dcols;
  return dx;
}

/// Affine layer on column vectors: weight is out x in.
template <typename T>
struct DenseParams {
  Matrix<T> weight;
  Vector<T> bias;
};

template <typename T>
Matrix<T> dense(const Matrix<T>& x, const DenseParams<T>& p) {
  Matrix<T> y = p.weight * x;
  y.colwise() += p.bias;
  return y;
}

template <typename T>
Matrix<T> dense_backward(const Matrix<T>& x, const Matrix<T>& dy, const DenseParams<T>& p, DenseParams<T>& grad) {
  grad.weight.noalias() += dy * x.transpose();
  grad.bias += dy.rowwise().sum();
  return p.weight.transpose() * dy;
}

template <typename T>
struct BatchNormParams {
  Vector<T> gamma;
  Vector<T> beta;
};

template <typename T>
struct BatchNormStats {
  Vector<T> mean;
  Vector<T> var;
};

template <typename T>
struct BatchNormCache {
  Matrix<T> normalized;
  Vector<T> inv_std;
};

/// Normalizes each row (channel) over all columns with batch statistics and folds them into
/// the running averages: running = momentum * running + (1 - momentum) * batch.
template <typename T>
Matrix<T> batch_norm_train(const Matrix<T>& x, const BatchNormParams<T>& p, BatchNormStats<T>& stats, T momentum,
                           T epsilon, BatchNormCache<T>& cache) {
  const Vector<T> mean = x.rowwise().mean();
  Matrix<T> centered = x.colwise() - mean;
  const Vector<T> var = centered.array().square().rowwise().mean();
  cache.inv_std = (var.array() + epsilon).rsqrt();
  cache.normalized = cache.inv_std.asDiagonal() * centered;
  stats.mean = momentum * stats.mean + (T(1) - momentum) * mean;
  stats.var = momentum * stats.var + (T(1) - momentum) * var;
  Matrix<T> y = p.gamma.asDiagonal() * cache.normalized;
  y.colwise() += p.beta;
  return y;
}

template <typename T>
Matrix<T> batch_norm_eval(const Matrix<T>& x, const BatchNormParams<T>& p, const BatchNormStats<T>& stats,
                          T epsilon) {
  const Vector<T> scale = p.gamma.array() * (stats.var.array() + epsilon).rsqrt();
  const Vector<T> shift = p.beta.array() - stats.mean.array() * scale.array();
  Matrix<T> y = scale.asDiagonal() * x;
  y.colwise() += shift;
  return y;
}

template <typename T>
Matrix<T> batch_norm_backward(const Matrix<T>& dy, const BatchNormParams<T>& p, const BatchNormCache<T>& cache,
                              BatchNormParams<T>& grad) {
  const T m = static_cast<T>(dy.cols());
  grad.gamma += (dy.array() * cache.normalized.array()).rowwise().sum().matrix();
  grad.beta += dy.rowwise().sum();
  const Matrix<T> dxhat = p.gamma.asDiagonal() * dy;
  const Vector<T> sum_dxhat = dxhat.rowwise().sum();
  const Vector<T> sum_dxhat_xhat = (dxhat.array() * cache.normalized.array()).rowwise().sum();
  Matrix<T> dx = (m * dxhat).colwise() - sum_dxhat;
  dx -= sum_dxhat_xhat.asDiagonal() * cache.normalized;
  return (cache.inv_std / m).asDiagonal() * dx;
}

template <typename T>
void relu_inplace(Matrix<T>& x) {
  x = x.cwiseMax(T(0));
}

// Gradient through ReLU given its output.
template <typename T>
Matrix<T> relu_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  return (y.array() > T(0)).select(dy.array(), T(0)).matrix();
}

template <typename T>
void leaky_relu_inplace(Matrix<T>& x, T slope) {
  x = (x.array() > T(0)).select(x.array(), slope * x.array()).matrix();
}

// Gradient through LeakyReLU given its input.
template <typename T>
Matrix<T> leaky_relu_backward(const Matrix<T>& x, const Matrix<T>& dy, T slope) {
  return (x.array() > T(0)).select(dy.array(), slope * dy.array()).matrix();
}

/// Inverted dropout mask: 0 with probability `rate`, otherwise 1 / (1 - rate).
/// Sixteen random bits per decision, four decisions per engine draw.
template <typename T>
Matrix<T> dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
  Matrix<T> mask(rows, cols);
  const auto threshold = static_cast<std::uint32_t>(std::llround(rate * 65536.0));
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  std::uint64_t bits = 0;
  int left = 0;
  T* m = mask.data();
  for (Index n = 0; n < mask.size(); ++n) {
    if (left == 0) {
      bits = rng();
      left = 4;
    }
    const auto sample = static_cast<std::uint32_t>(bits & 0xFFFFu);
    bits >>= 16;
    --left;
    m[n] = sample < threshold ? T(0) : keep;
  }
  return mask;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace radiogan::nn

#endif  // RADIOGAN_NN_HPP_
