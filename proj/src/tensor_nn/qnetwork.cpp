#include "qtransfer/qnetwork.hpp"

#include <cmath>

#include "qtransfer/errors.hpp"
#include "qtransfer/rng.hpp"

namespace qtransfer {

QNetworkSpec QNetworkSpec::standard(std::size_t actions) {
  QNetworkSpec spec;
  spec.conv = {{4, 32, 8, 4, 0}, {32, 64, 4, 2, 0}, {64, 64, 3, 1, 0}};
  spec.hidden = 512;
  spec.actions = actions;
  return spec;
}

QNetworkSpec QNetworkSpec::reduced_width(std::size_t actions, int c1, int c2,
                                         int c3, std::size_t hidden) {
  QNetworkSpec spec;
  spec.conv = {{4, c1, 8, 4, 0}, {c1, c2, 4, 2, 0}, {c2, c3, 3, 1, 0}};
  spec.hidden = hidden;
  spec.actions = actions;
  return spec;
}

QNetworkSpec QNetworkSpec::features_only(std::size_t inputs, std::size_t hidden,
                                         std::size_t actions) {
  QNetworkSpec spec;
  spec.input_channels = inputs;
  spec.input_height = 1;
  spec.input_width = 1;
  spec.hidden = hidden;
  spec.actions = actions;
  return spec;
}

Shape QNetworkSpec::input_shape() const {
  if (conv.empty()) return {input_channels * input_height * input_width};
  return {input_channels, input_height, input_width};
}

std::vector<Shape> QNetworkSpec::conv_output_shapes() const {
  std::vector<Shape> shapes;
  std::size_t c = input_channels, h = input_height, w = input_width;
  for (const auto& layer : conv) {
    const int oh = layer.output_extent(static_cast<int>(h));
    const int ow = layer.output_extent(static_cast<int>(w));
    if (oh < 1 || ow < 1) {
      throw ConfigError("conv layer with kernel " +
                        std::to_string(layer.kernel) + " does not fit input " +
                        shape_to_string({c, h, w}));
    }
    c = static_cast<std::size_t>(layer.out_channels);
    h = static_cast<std::size_t>(oh);
    w = static_cast<std::size_t>(ow);
    shapes.push_back({c, h, w});
  }
  return shapes;
}

std::size_t QNetworkSpec::feature_count() const {
  if (conv.empty()) return input_channels * input_height * input_width;
  return shape_size(conv_output_shapes().back());
}

void QNetworkSpec::validate() const {
  if (actions < 2) {
    throw ConfigError("network needs at least 2 actions, got " +
                      std::to_string(actions));
  }
  if (hidden < 1) throw ConfigError("hidden width must be positive");
  std::size_t c = input_channels;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto& layer = conv[i];
    if (layer.in_channels < 1 || layer.out_channels < 1 || layer.kernel < 1 ||
        layer.stride < 1 || layer.padding < 0) {
      throw ConfigError("conv" + std::to_string(i + 1) +
                        ": channels, kernel and stride must be positive");
    }
    if (static_cast<std::size_t>(layer.in_channels) != c) {
      throw ConfigError("conv" + std::to_string(i + 1) + " expects " +
                        std::to_string(layer.in_channels) +
                        " input channels but receives " + std::to_string(c));
    }
    c = static_cast<std::size_t>(layer.out_channels);
  }
  (void)conv_output_shapes();
}

std::vector<std::string> QNetwork::parameter_names(const QNetworkSpec& spec) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.conv.size(); ++i) {
    const std::string layer = "conv" + std::to_string(i + 1);
    names.push_back(layer + ".w");
    names.push_back(layer + ".b");
  }
  for (const char* n : {"head1.w", "head1.b", "head2.w", "head2.b"}) {
    names.emplace_back(n);
  }
  return names;
}

QNetwork::QNetwork(QNetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto names = parameter_names(spec_);
  std::size_t k = 0;
  for (const auto& layer : spec_.conv) {
    params_.push_back({names[k++], Tensor(layer.weight_shape())});
    params_.push_back(
        {names[k++], Tensor({static_cast<std::size_t>(layer.out_channels)})});
  }
  const std::size_t features = spec_.feature_count();
  params_.push_back({names[k++], Tensor({spec_.hidden, features})});
  params_.push_back({names[k++], Tensor({spec_.hidden})});
  params_.push_back({names[k++], Tensor({spec_.actions, spec_.hidden})});
  params_.push_back({names[k++], Tensor({spec_.actions})});
}

QNetwork QNetwork::initialized(QNetworkSpec spec, std::uint64_t seed) {
  QNetwork net(std::move(spec));
  Rng rng(seed);
  for (auto& p : net.params_) {
    if (p.value.rank() == 1) continue;  // biases stay zero
    std::size_t fan_in = 1;
    for (std::size_t a = 1; a < p.value.rank(); ++a) fan_in *= p.value.dim(a);
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (float& v : p.value.values()) v = uniform_float(rng, -bound, bound);
  }
  return net;
}

std::size_t QNetwork::parameter_index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

Parameter& QNetwork::parameter(std::string_view name) {
  return params_[parameter_index(name)];
}

const Parameter& QNetwork::parameter(std::string_view name) const {
  return params_[parameter_index(name)];
}

bool QNetwork::is_encoder_parameter(std::size_t index) const {
  return index < head1_index();
}

void QNetwork::set_encoder_frozen(bool frozen) {
  for (std::size_t i = 0; i < head1_index(); ++i) params_[i].frozen = frozen;
}

void QNetwork::set_all_frozen(bool frozen) {
  for (auto& p : params_) p.frozen = frozen;
}

bool QNetwork::layer_trainable(std::size_t weight_index) const {
  return !params_[weight_index].frozen || !params_[weight_index + 1].frozen;
}

Tensor QNetwork::forward(const Tensor& input) const {
  ForwardCache cache;
  return forward(input, cache);
}

Tensor QNetwork::forward(const Tensor& input, ForwardCache& cache) const {
  const Shape in_shape = spec_.input_shape();
  const bool single = input.shape() == in_shape;
  if (!single) {
    Shape tail(input.shape().begin() + (input.rank() ? 1 : 0),
               input.shape().end());
    if (input.rank() != in_shape.size() + 1 || tail != in_shape) {
      throw ConfigError("qnet_forward: expected state " +
                        shape_to_string(in_shape) + " or a batch of them, got " +
                        shape_to_string(input.shape()));
    }
  }
  const std::size_t batch = single ? 1 : input.dim(0);
  cache.single = single;
  cache.conv_inputs.resize(spec_.conv.size());
  cache.conv_outputs.resize(spec_.conv.size());

  Tensor x = input;
  if (!spec_.conv.empty()) {
    Shape batched{batch};
    batched.insert(batched.end(), in_shape.begin(), in_shape.end());
    x.reshape(batched);
  }
  for (std::size_t i = 0; i < spec_.conv.size(); ++i) {
    cache.conv_inputs[i] = x;
    Tensor y = conv2d_forward(x, spec_.conv[i], params_[2 * i].value,
                              params_[2 * i + 1].value);
    relu_inplace(y);
    cache.conv_outputs[i] = y;
    x = std::move(y);
  }
  x.reshape({batch, spec_.feature_count()});
  cache.features = x;
  Tensor h = linear_forward(x, params_[head1_index()].value,
                            params_[head1_index() + 1].value);
  relu_inplace(h);
  cache.hidden = h;
  Tensor q = linear_forward(h, params_[head2_index()].value,
                            params_[head2_index() + 1].value);
  q.check_finite("qnet_forward output");
  if (single) q.reshape({spec_.actions});
  return q;
}

std::vector<Tensor> QNetwork::backward(const ForwardCache& cache,
                                       const Tensor& grad_q) const {
  const std::size_t batch = cache.features.dim(0);
  Tensor g = grad_q;
  if (cache.single) g.reshape({1, spec_.actions});
  require_shape(g, {batch, spec_.actions}, "qnet_backward grad_q");

  std::vector<Tensor> grads(params_.size());
  const std::size_t nconv = spec_.conv.size();

  // Index of the lowest layer (in weight-index units) that needs gradients.
  std::size_t lowest = params_.size();
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    if (layer_trainable(i)) {
      lowest = i;
      break;
    }
  }
  if (lowest == params_.size()) return grads;

  auto keep = [&](std::size_t index, LayerGradients& lg) {
    if (!params_[index].frozen) grads[index] = std::move(lg.weights);
    if (!params_[index + 1].frozen) grads[index + 1] = std::move(lg.bias);
  };

  const std::size_t h2 = head2_index(), h1 = head1_index();
  LayerGradients lg =
      linear_backward(g, cache.hidden, params_[h2].value, lowest < h2);
  keep(h2, lg);
  if (lowest == h2) return grads;

  Tensor gh = relu_backward(lg.input, cache.hidden);
  lg = linear_backward(gh, cache.features, params_[h1].value, lowest < h1);
  keep(h1, lg);
  if (lowest == h1) return grads;

  Tensor gx = std::move(lg.input);
  gx.reshape(cache.conv_outputs[nconv - 1].shape());
  for (std::size_t i = nconv; i-- > 0;) {
    Tensor gy = relu_backward(gx, cache.conv_outputs[i]);
    lg = conv2d_backward(gy, cache.conv_inputs[i], spec_.conv[i],
                         params_[2 * i].value, lowest < 2 * i);
    keep(2 * i, lg);
    if (lowest == 2 * i) break;
    gx = std::move(lg.input);
  }
  for (const auto& t : grads) {
    if (!t.empty()) t.check_finite("qnet_backward gradient");
  }
  return grads;
}

std::uint64_t QNetwork::hash() const {
  std::uint64_t h = 0;
  for (const auto& p : params_) h = splitmix64(h ^ tensor_hash(p.value));
  return h;
}

}  // namespace qtransfer
