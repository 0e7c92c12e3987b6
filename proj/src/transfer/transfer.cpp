#include <algorithm>
#include <array>
#include <cmath>

#include "qtransfer/errors.hpp"
#include "qtransfer/transfer.hpp"

namespace qtransfer {
namespace {

struct ModeName {
  TransferMode mode;
  const char* name;
};

constexpr std::array<ModeName, 4> kModeNames{{
    {TransferMode::kWithinFrozenNewHead, "WITHIN_FROZEN_NEW_HEAD"},
    {TransferMode::kCrossFrozenHeadInit, "CROSS_FROZEN_HEAD_INIT"},
    {TransferMode::kCrossFrozenHeadScratch, "CROSS_FROZEN_HEAD_SCRATCH"},
    {TransferMode::kEndToEnd, "END_TO_END"},
}};

// Kernel and stride of each encoder layer in the standard pipeline.
constexpr std::array<std::array<int, 2>, 3> kConvGeometry{{{8, 4}, {4, 2}, {3, 1}}};

void copy_from(Parameter& p, const Checkpoint& ckpt) {
  const Tensor& src = ckpt.get(p.name);
  if (src.shape() != p.value.shape()) {
    throw ConfigError("checkpoint entry " + p.name + " has shape " +
                      shape_to_string(src.shape()) + " but the target network expects " +
                      shape_to_string(p.value.shape()));
  }
  p.value = src;
}

}  // namespace

QNetwork network_from_checkpoint(const Checkpoint& ckpt) {
  QNetworkSpec spec;
  std::size_t conv_layers = 0;
  while (ckpt.has("conv" + std::to_string(conv_layers + 1) + ".w")) ++conv_layers;
  if (conv_layers > kConvGeometry.size()) {
    throw ConfigError("checkpoint has more encoder layers than supported");
  }
  const Tensor& head1 = ckpt.get("head1.w");
  const Tensor& head2 = ckpt.get("head2.w");
  if (head1.rank() != 2 || head2.rank() != 2) {
    throw ConfigError("checkpoint head weights must be matrices");
  }
  if (conv_layers == 0) {
    spec = QNetworkSpec::features_only(head1.dim(1), head1.dim(0), head2.dim(0));
  } else {
    for (std::size_t i = 0; i < conv_layers; ++i) {
      const Tensor& w = ckpt.get("conv" + std::to_string(i + 1) + ".w");
      if (w.rank() != 4) throw ConfigError("checkpoint conv weights must be rank 4");
      if (i == 0) spec.input_channels = w.dim(1);
      ConvSpec layer{static_cast<int>(w.dim(1)), static_cast<int>(w.dim(0)),
                     kConvGeometry[i][0], kConvGeometry[i][1], 0};
      spec.conv.push_back(layer);
    }
    spec.hidden = head1.dim(0);
    spec.actions = head2.dim(0);
  }
  QNetwork net(spec);
  for (auto& p : net.parameters()) copy_from(p, ckpt);
  if (ckpt.entries.size() != net.parameters().size()) {
    throw ConfigError("checkpoint has " + std::to_string(ckpt.entries.size()) +
                      " entries, expected " + std::to_string(net.parameters().size()));
  }
  return net;
}

std::pair<Tensor, Tensor> resize_output_layer(const Tensor& weights,
                                              const Tensor& bias,
                                              std::size_t new_actions,
                                              std::uint64_t seed) {
  if (weights.rank() != 2) throw ConfigError("resize: weights must be [A, in]");
  const std::size_t old_actions = weights.dim(0);
  const std::size_t fan_in = weights.dim(1);
  require_shape(bias, {old_actions}, "resize bias");
  if (old_actions < 2 || new_actions < 2) {
    throw ConfigError("resize: action counts must be at least 2");
  }
  Tensor w({new_actions, fan_in});
  Tensor b({new_actions});
  const std::size_t shared = std::min(old_actions, new_actions);
  std::copy_n(weights.data(), shared * fan_in, w.data());
  std::copy_n(bias.data(), shared, b.data());
  Rng rng(seed);
  const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  for (std::size_t i = shared * fan_in; i < w.size(); ++i) {
    w[i] = uniform_float(rng, -bound, bound);
  }
  return {std::move(w), std::move(b)};
}

TransferMode parse_transfer_mode(std::string_view text) {
  for (const auto& m : kModeNames) {
    if (text == m.name) return m.mode;
  }
  throw ConfigError("unknown transfer mode '" + std::string(text) +
                    "' (expected WITHIN_FROZEN_NEW_HEAD, CROSS_FROZEN_HEAD_INIT, "
                    "CROSS_FROZEN_HEAD_SCRATCH or END_TO_END)");
}

std::string to_string(TransferMode mode) {
  for (const auto& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "UNKNOWN";
}

QNetwork build_transfer_network(const Checkpoint& ckpt, const QNetworkSpec& target,
                                TransferMode mode, std::uint64_t seed) {
  const QNetwork source = network_from_checkpoint(ckpt);
  const QNetworkSpec& s = source.spec();
  if (s.conv != target.conv || s.input_shape() != target.input_shape()) {
    throw ConfigError("checkpoint encoder does not match the target network");
  }
  if (s.hidden != target.hidden) {
    throw ConfigError("checkpoint hidden width " + std::to_string(s.hidden) +
                      " does not match the target's " + std::to_string(target.hidden));
  }
  if (mode == TransferMode::kWithinFrozenNewHead && s.actions != target.actions) {
    throw ConfigError("WITHIN_FROZEN_NEW_HEAD needs matching action counts (checkpoint " +
                      std::to_string(s.actions) + ", target " +
                      std::to_string(target.actions) + ")");
  }

  QNetwork net = QNetwork::initialized(target, seed);
  auto params = net.parameters();
  const std::size_t head1 = net.parameter_index("head1.w");
  const std::size_t head2 = net.parameter_index("head2.w");
  for (std::size_t i = 0; i < head1; ++i) copy_from(params[i], ckpt);

  const bool copy_head = mode == TransferMode::kCrossFrozenHeadInit ||
                         mode == TransferMode::kEndToEnd;
  if (copy_head) {
    copy_from(params[head1], ckpt);
    copy_from(params[head1 + 1], ckpt);
    auto [w, b] = resize_output_layer(ckpt.get("head2.w"), ckpt.get("head2.b"),
                                      target.actions, seed);
    params[head2].value = std::move(w);
    params[head2 + 1].value = std::move(b);
  }
  net.set_encoder_frozen(mode != TransferMode::kEndToEnd);
  return net;
}

DqnAgent build_transfer_agent(const Checkpoint& ckpt, const QNetworkSpec& target,
                              TransferMode mode, std::uint64_t seed,
                              const AgentConfig& config,
                              const PreprocessConfig& preprocess) {
  return DqnAgent(build_transfer_network(ckpt, target, mode, seed), config,
                  preprocess);
}

}  // namespace qtransfer
