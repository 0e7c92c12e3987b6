#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qtransfer/errors.hpp"
#include "qtransfer/transfer.hpp"
#include "transfer_checks.hpp"

using namespace qtransfer;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qtransfer_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const CheckpointMetadata kMeta{"shooter7", 7, 123456789012ULL, 0xfeedULL};

// A 7-action checkpoint whose parameters differ from any fresh init used
// below.
const Checkpoint& shooter7_checkpoint() {
  static const Checkpoint ckpt = [] {
    QNetwork net = QNetwork::initialized(QNetworkSpec::standard(7), 9001);
    // Non-zero biases so copied and fresh (zero) biases are distinguishable.
    for (auto& p : net.parameters()) {
      if (p.name.ends_with(".b")) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = 0.01f * (i % 7 + 1);
      }
    }
    return decode_checkpoint(encode_checkpoint(net, kMeta));
  }();
  return ckpt;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  const QNetwork net = QNetwork::initialized(QNetworkSpec::reduced_width(7, 3, 4, 5, 16), 3);
  const fs::path path = scratch_dir("roundtrip") / "net.dqnc";
  save_checkpoint(net, path, kMeta);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.metadata == kMeta);
  CHECK(back.metadata.action_count == 7);
  REQUIRE(back.entries.size() == net.parameters().size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].name == net.parameters()[i].name);
    CHECK(back.entries[i].value == net.parameters()[i].value);
  }
  const QNetwork rebuilt = network_from_checkpoint(back);
  CHECK(rebuilt.spec() == net.spec());
  CHECK(rebuilt.hash() == net.hash());

  // Re-encoding gives the same bytes, and loading never touches the file.
  const auto bytes = read_bytes(path);
  CHECK(encode_checkpoint(rebuilt, kMeta) == bytes);
  const auto hash = file_hash(path);
  load_checkpoint(path);
  CHECK(file_hash(path) == hash);
  CHECK(read_bytes(path) == bytes);
  // No temporary files left behind.
  CHECK(std::distance(fs::directory_iterator(path.parent_path()), fs::directory_iterator()) == 1);
}

TEST_CASE("checkpoint layout") {
  QNetwork net(QNetworkSpec::features_only(2, 3, 2));
  net.parameter("head2.b").value[1] = 1.0f;
  const auto bytes = encode_checkpoint(net, {"brick", 2, 5, 6});
  REQUIRE(bytes.size() > 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DQNC");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  // Last four bytes: little-endian 1.0f.
  const std::vector<std::uint8_t> one{0x00, 0x00, 0x80, 0x3f};
  CHECK(std::vector<std::uint8_t>(bytes.end() - 4, bytes.end()) == one);
  const auto back = network_from_checkpoint(decode_checkpoint(bytes));
  CHECK(back.spec() == net.spec());
}

TEST_CASE("malformed checkpoints report the failing offset") {
  const QNetwork net = QNetwork::initialized(QNetworkSpec::features_only(3, 4, 2), 1);
  const auto good = encode_checkpoint(net, kMeta);

  auto error_offset = [](std::vector<std::uint8_t> bytes) -> std::int64_t {
    try {
      decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
      return static_cast<std::int64_t>(e.offset());
    }
    return -1;
  };

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(error_offset(bad_magic) == 0);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(error_offset(bad_version) == 4);

  CHECK(error_offset({good.begin(), good.begin() + 6}) == 4);
  for (std::size_t cut : {good.size() - 1, good.size() / 2, std::size_t{9}}) {
    const auto offset = error_offset({good.begin(), good.begin() + cut});
    CHECK(offset >= 0);
    CHECK(offset <= static_cast<std::int64_t>(cut));
  }

  auto trailing = good;
  trailing.push_back(0);
  CHECK(error_offset(trailing) == static_cast<std::int64_t>(good.size()));

  // A checkpoint error is a configuration error for exit-code purposes.
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), ConfigError);
}

TEST_CASE("file errors are I/O errors") {
  const fs::path dir = scratch_dir("io");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.dqnc"), IoError);
  const QNetwork net(QNetworkSpec::features_only(2, 2, 2));
  std::ofstream(dir / "short.dqnc") << "DQ";
  // A regular file where a directory is needed.
  CHECK_THROWS_AS(save_checkpoint(net, dir / "short.dqnc" / "x.dqnc", kMeta), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.dqnc"), CheckpointError);
}

TEST_CASE("output layer resizing") {
  const auto& ckpt = shooter7_checkpoint();
  const Tensor& w7 = ckpt.get("head2.w");
  const Tensor& b7 = ckpt.get("head2.b");
  const std::size_t fan_in = w7.dim(1);

  SUBCASE("equal sizes copy") {
    const auto [w, b] = resize_output_layer(w7, b7, 7, 1);
    CHECK(w == w7);
    CHECK(b == b7);
  }
  SUBCASE("7 -> 6 keeps the first six rows") {
    const auto [w, b] = resize_output_layer(w7, b7, 6, 1);
    CHECK(w.shape() == Shape{6, fan_in});
    CHECK(std::equal(w.values().begin(), w.values().end(), w7.data()));
    CHECK(std::equal(b.values().begin(), b.values().end(), b7.data()));
  }
  SUBCASE("6 -> 7 -> 6 restores the original") {
    const auto [w6, b6] = resize_output_layer(w7, b7, 6, 1);
    const auto [w, b] = resize_output_layer(w6, b6, 7, 2);
    CHECK(std::equal(w6.values().begin(), w6.values().end(), w.data()));
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    float largest = 0.0f;
    for (std::size_t i = 6 * fan_in; i < w.size(); ++i) largest = std::max(largest, std::abs(w[i]));
    CHECK(largest <= bound);
    CHECK(largest > 0.5f * bound);
    CHECK(b[6] == 0.0f);
    const auto [w_back, b_back] = resize_output_layer(w, b, 6, 3);
    CHECK(w_back == w6);
    CHECK(b_back == b6);
  }
  SUBCASE("fresh rows depend only on the seed") {
    const auto [w6, b6] = resize_output_layer(w7, b7, 6, 1);
    CHECK(resize_output_layer(w6, b6, 7, 5).first == resize_output_layer(w6, b6, 7, 5).first);
    CHECK_FALSE(resize_output_layer(w6, b6, 7, 5).first ==
                resize_output_layer(w6, b6, 7, 6).first);
  }
  CHECK_THROWS_AS(resize_output_layer(w7, b7, 1, 0), ConfigError);
}

TEST_CASE("transfer mode names") {
  for (TransferMode m : transfer_checks::kModes) CHECK(parse_transfer_mode(to_string(m)) == m);
  CHECK(parse_transfer_mode("END_TO_END") == TransferMode::kEndToEnd);
  CHECK_THROWS_AS(parse_transfer_mode("end_to_end"), ConfigError);
}

TEST_CASE("every mode assembles parameters from the right source") {
  const auto& ckpt = shooter7_checkpoint();
  for (TransferMode mode : transfer_checks::kModes) {
    CAPTURE(to_string(mode));
    const std::size_t actions = mode == TransferMode::kWithinFrozenNewHead ? 7 : 6;
    const QNetwork net =
        build_transfer_network(ckpt, QNetworkSpec::standard(actions), mode, 77);
    const auto errors = transfer_checks::provenance_errors(net, ckpt, mode, 77);
    for (const auto& e : errors) CAPTURE(e);
    CHECK(errors.empty());
  }
}

TEST_CASE("cross mode from 7 actions to 6 keeps the first six output rows") {
  const auto& ckpt = shooter7_checkpoint();
  const QNetwork net = build_transfer_network(ckpt, QNetworkSpec::standard(6),
                                              TransferMode::kCrossFrozenHeadInit, 4);
  const Tensor& w = net.parameter("head2.w").value;
  CHECK(w.dim(0) == 6);
  CHECK(std::equal(w.values().begin(), w.values().end(), ckpt.get("head2.w").data()));
}

TEST_CASE("end to end on the same game reproduces the checkpoint") {
  const auto& ckpt = shooter7_checkpoint();
  const QNetwork net = build_transfer_network(ckpt, QNetworkSpec::standard(7),
                                              TransferMode::kEndToEnd, 4);
  CHECK(net.hash() == network_from_checkpoint(ckpt).hash());
  for (const auto& p : net.parameters()) CHECK_FALSE(p.frozen);
}

TEST_CASE("transfer rejects incompatible targets") {
  const auto& ckpt = shooter7_checkpoint();
  CHECK_THROWS_AS(build_transfer_network(ckpt, QNetworkSpec::standard(6),
                                         TransferMode::kWithinFrozenNewHead, 1),
                  ConfigError);
  CHECK_THROWS_AS(build_transfer_network(ckpt, QNetworkSpec::reduced_width(7, 16, 64, 64, 512),
                                         TransferMode::kEndToEnd, 1),
                  ConfigError);
  CHECK_THROWS_AS(build_transfer_network(ckpt, QNetworkSpec::reduced_width(7, 32, 64, 64, 256),
                                         TransferMode::kCrossFrozenHeadInit, 1),
                  ConfigError);
}

TEST_CASE("frozen encoders survive training; heads move") {
  const auto& ckpt = shooter7_checkpoint();
  ReplayBuffer buffer(200, {4, 84, 84});
  transfer_checks::fill_from_env(buffer, "shooter7", 40, 3);
  AgentConfig config;
  config.batch_size = 4;
  config.warmup_transitions = 8;
  config.lr = 1e-3;
  DqnAgent agent = build_transfer_agent(ckpt, QNetworkSpec::standard(7),
                                        TransferMode::kWithinFrozenNewHead, 5, config);
  CHECK(agent.target().hash() == agent.policy().hash());
  const auto r = transfer_checks::train_and_check_freeze(agent, buffer, ckpt, 10, 6);
  CHECK(r.frozen_checked == 6);
  CHECK(r.frozen_changed == 0);
  CHECK(r.trainable == 4);
  CHECK(r.trainable_changed == 4);
  CHECK(agent.train_steps() == 10);
}

TEST_CASE("transferred agents start with an empty optimizer") {
  const auto& ckpt = shooter7_checkpoint();
  const DqnAgent agent = build_transfer_agent(ckpt, QNetworkSpec::standard(6),
                                              TransferMode::kCrossFrozenHeadScratch, 5, {});
  REQUIRE(agent.optimizer().has_value());
  CHECK(agent.optimizer()->steps() == 0);
  // Moments only for the trainable head.
  CHECK(agent.optimizer()->state_count() == 4);
  CHECK(agent.steps() == 0);
}
