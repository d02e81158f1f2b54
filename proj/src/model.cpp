#include "vps/model.hpp"

#include <random>

namespace vps {

namespace {

// out[o] += sum_i w[o][i] (*) in[i], 3x3 kernel, zero padding.
void conv3x3(const RealTensor& in, std::span<const double> weights, std::span<const double> bias,
             std::size_t out_channels, RealTensor& out) {
  const std::size_t ci = in.dim(0), h = in.dim(1), w = in.dim(2), plane = h * w;
  out = RealTensor({out_channels, h, w});
  for (std::size_t o = 0; o < out_channels; ++o) {
    double* dst = &out[o * plane];
    for (std::size_t p = 0; p < plane; ++p) dst[p] = bias[o];
    for (std::size_t i = 0; i < ci; ++i) {
      const double* src = &in[i * plane];
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wt = weights[((o * ci + i) * 3 + ky) * 3 + kx];
          const std::size_t y_lo = ky == 0 ? 1 : 0, y_hi = ky == 2 ? h - 1 : h;
          const std::size_t x_lo = kx == 0 ? 1 : 0, x_hi = kx == 2 ? w - 1 : w;
          for (std::size_t y = y_lo; y < y_hi; ++y) {
            const double* row = src + (y + ky - 1) * w + (kx - 1);
            double* out_row = dst + y * w;
            for (std::size_t x = x_lo; x < x_hi; ++x) out_row[x] += wt * row[x];
          }
        }
      }
    }
  }
}

void conv3x3_backward(const RealTensor& in, std::span<const double> weights,
                      const RealTensor& grad_out, std::span<double> grad_weights,
                      std::span<double> grad_bias, RealTensor* grad_in) {
  const std::size_t ci = in.dim(0), h = in.dim(1), w = in.dim(2), plane = h * w;
  const std::size_t co = grad_out.dim(0);
  if (grad_in) *grad_in = RealTensor(in.shape());
  for (std::size_t o = 0; o < co; ++o) {
    const double* g = &grad_out[o * plane];
    double gb = 0.0;
    for (std::size_t p = 0; p < plane; ++p) gb += g[p];
    grad_bias[o] += gb;
    for (std::size_t i = 0; i < ci; ++i) {
      const double* src = &in[i * plane];
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t widx = ((o * ci + i) * 3 + ky) * 3 + kx;
          const double wt = weights[widx];
          const std::size_t y_lo = ky == 0 ? 1 : 0, y_hi = ky == 2 ? h - 1 : h;
          const std::size_t x_lo = kx == 0 ? 1 : 0, x_hi = kx == 2 ? w - 1 : w;
          double gw = 0.0;
          for (std::size_t y = y_lo; y < y_hi; ++y) {
            const std::size_t off = (y + ky - 1) * w + (kx - 1);
            const double* row = src + off;
            const double* g_row = g + y * w;
            for (std::size_t x = x_lo; x < x_hi; ++x) gw += g_row[x] * row[x];
            if (grad_in) {
              double* gi = &(*grad_in)[i * plane] + off;
              for (std::size_t x = x_lo; x < x_hi; ++x) gi[x] += wt * g_row[x];
            }
          }
          grad_weights[widx] += gw;
        }
      }
    }
  }
}

}  // namespace

RealTensor encode_input(const Image& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ArgumentError("encode_input: expected H x W x 3");
  const std::size_t h = image.dim(0), w = image.dim(1), plane = h * w;
  RealTensor in({ToyModel::kInputChannels, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      for (std::size_t c = 0; c < 3; ++c) in[c * plane + p] = image(y, x, c);
      in[3 * plane + p] = w > 1 ? 2.0 * static_cast<double>(x) / static_cast<double>(w - 1) - 1.0 : 0.0;
      in[4 * plane + p] = h > 1 ? 2.0 * static_cast<double>(y) / static_cast<double>(h - 1) - 1.0 : 0.0;
    }
  }
  return in;
}

ToyModel::ToyModel(std::size_t feature_dim, SegmentRegistry binding)
    : feature_dim_(feature_dim), binding_(std::move(binding)) {
  if (feature_dim_ == 0) throw ConfigError("toy model: feature_dim must be >= 1");
  if (binding_.size() == 0) throw ConfigError("toy model: registry binding is empty");
  params_.assign(layout().total, 0.0);
}

ToyModel ToyModel::initialize(std::size_t feature_dim, SegmentRegistry binding, std::uint64_t seed) {
  ToyModel m(feature_dim, std::move(binding));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  for (double& p : m.params_) p = init(rng);
  return m;
}

ToyModel::Layout ToyModel::layout() const {
  const std::size_t d = feature_dim_, n = binding_.size();
  Layout l{};
  l.w1 = 0;
  l.b1 = l.w1 + d * kInputChannels * 9;
  l.w2 = l.b1 + d;
  l.b2 = l.w2 + d * d * 9;
  l.wh = l.b2 + d;
  l.bh = l.wh + n * d;
  l.total = l.bh + n;
  return l;
}

ToyModel::Activations ToyModel::forward(const Image& image, int frame_index) const {
  const auto l = layout();
  const std::span<const double> p(params_);
  const std::size_t d = feature_dim_, n = binding_.size();
  Activations act;
  act.input = encode_input(image);
  const std::size_t h = act.input.dim(1), w = act.input.dim(2), plane = h * w;

  conv3x3(act.input, p.subspan(l.w1, d * kInputChannels * 9), p.subspan(l.b1, d), d, act.pre_hidden);
  act.hidden = act.pre_hidden;
  for (double& v : act.hidden.values()) v = v > 0.0 ? v : 0.0;
  conv3x3(act.hidden, p.subspan(l.w2, d * d * 9), p.subspan(l.b2, d), d, act.features.data);

  act.logits.frame_index = frame_index;
  act.logits.data = RealTensor({n, h, w});
  for (std::size_t c = 0; c < n; ++c) {
    double* dst = &act.logits.data[c * plane];
    for (std::size_t q = 0; q < plane; ++q) dst[q] = p[l.bh + c];
    for (std::size_t k = 0; k < d; ++k) {
      const double wt = p[l.wh + c * d + k];
      const double* src = &act.features.data[k * plane];
      for (std::size_t q = 0; q < plane; ++q) dst[q] += wt * src[q];
    }
  }
  return act;
}

std::vector<double> ToyModel::backward(const Activations& act, const RealTensor& grad_features,
                                       const RealTensor& grad_logits) const {
  require_same_shape(act.features.data, grad_features, "ToyModel::backward features");
  require_same_shape(act.logits.data, grad_logits, "ToyModel::backward logits");
  const auto l = layout();
  const std::span<const double> p(params_);
  const std::size_t d = feature_dim_, n = binding_.size();
  const std::size_t plane = act.features.height() * act.features.width();
  std::vector<double> grad(params_.size(), 0.0);
  std::span<double> g(grad);

  RealTensor grad_feat = grad_features;
  for (std::size_t c = 0; c < n; ++c) {
    const double* gl = &grad_logits[c * plane];
    double gb = 0.0;
    for (std::size_t q = 0; q < plane; ++q) gb += gl[q];
    g[l.bh + c] += gb;
    for (std::size_t k = 0; k < d; ++k) {
      const double* f = &act.features.data[k * plane];
      double* gf = &grad_feat[k * plane];
      const double wt = p[l.wh + c * d + k];
      double gw = 0.0;
      for (std::size_t q = 0; q < plane; ++q) {
        gw += gl[q] * f[q];
        gf[q] += wt * gl[q];
      }
      g[l.wh + c * d + k] += gw;
    }
  }

  RealTensor grad_hidden;
  conv3x3_backward(act.hidden, p.subspan(l.w2, d * d * 9), grad_feat, g.subspan(l.w2, d * d * 9),
                   g.subspan(l.b2, d), &grad_hidden);
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    if (!(act.pre_hidden[i] > 0.0)) grad_hidden[i] = 0.0;
  }
  conv3x3_backward(act.input, p.subspan(l.w1, d * kInputChannels * 9), grad_hidden,
                   g.subspan(l.w1, d * kInputChannels * 9), g.subspan(l.b1, d), nullptr);
  return grad;
}

}  // namespace vps
