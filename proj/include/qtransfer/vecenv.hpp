#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtransfer/agent.hpp"
#include "qtransfer/envs.hpp"
#include "qtransfer/preprocess.hpp"
#include "qtransfer/qnetwork.hpp"
#include "qtransfer/replay.hpp"

namespace qtransfer {

// Read-only copy of the policy parameters that actors evaluate. A snapshot is
// never modified after publication; sync replaces the pointer.
struct PolicySnapshot {
  std::shared_ptr<const QNetwork> net;
  std::uint64_t version = 0;
};

struct VecEnvConfig {
  std::string env_name;
  EnvOptions env_options;
  PreprocessConfig preprocess;
  std::size_t num_envs = 1;
  std::uint64_t base_seed = 0;
  // Snapshot fixed per collect call and transitions pushed in a fixed order,
  // so the buffer contents do not depend on thread scheduling.
  bool deterministic = true;
  // One thread per instance during collect; otherwise instances are stepped
  // one after another on the caller's thread.
  bool threaded = true;
};

struct CompletedEpisode {
  std::size_t instance = 0;
  std::uint64_t episode = 0;  // per-instance episode counter
  double reward = 0.0;
  int duration = 0;           // environment ticks
  // Position of the final transition in the round-robin order j * N + i of
  // the collect call that finished the episode.
  std::uint64_t order = 0;
};

// A worker failed; the whole collect call was abandoned.
class CollectError : public std::runtime_error {
 public:
  CollectError(std::size_t instance, const std::string& what,
               std::exception_ptr cause = nullptr)
      : std::runtime_error("instance " + std::to_string(instance) + ": " + what),
        instance_(instance),
        cause_(std::move(cause)) {}
  std::size_t instance() const { return instance_; }
  // The exception the worker raised.
  std::exception_ptr cause() const { return cause_; }

 private:
  std::size_t instance_;
  std::exception_ptr cause_;
};

// Seeding shared by the vectorized and the plain single-environment loops:
// instance i uses base_seed + i, its k-th episode resets with
// derive_seed(base_seed + i, k) and its exploration draws come from
// Rng(actor_seed(base_seed + i)).
std::uint64_t actor_seed(std::uint64_t instance_seed);

// N independent copies of one environment feeding a shared replay buffer.
class VectorEnv {
 public:
  explicit VectorEnv(VecEnvConfig config);
  ~VectorEnv();

  VectorEnv(const VectorEnv&) = delete;
  VectorEnv& operator=(const VectorEnv&) = delete;

  const VecEnvConfig& config() const { return config_; }
  std::size_t size() const { return config_.num_envs; }
  int action_count() const;

  // Publishes a copy of `net` as the new snapshot. Workers see either the
  // old or the new parameters, never a mixture.
  void sync_policy(const QNetwork& net);
  void sync_policy(const DqnAgent& agent) { sync_policy(agent.policy()); }
  PolicySnapshot snapshot() const;

  // Steps the instances until exactly n transitions have been generated and
  // pushed: instance i takes the steps j with j * N + i < n. Step j of
  // instance i explores with epsilon(t_base + j * N + i, schedule). Episodes
  // that end are reset automatically and reported in completion order.
  //
  // Throws CollectError naming the failing instance.
  std::vector<CompletedEpisode> collect(ReplayBuffer& buffer, std::size_t n,
                                        std::uint64_t t_base,
                                        const AgentConfig& schedule);

  // Called after each actor forward pass with the snapshot it used. May be
  // invoked concurrently from several workers.
  void set_forward_hook(std::function<void(const PolicySnapshot&)> hook);

  std::uint64_t total_pushed() const { return pushed_; }

 private:
  struct Instance;

  void run_instance(std::size_t i, std::size_t quota, std::uint64_t t_base,
                    const AgentConfig& schedule, const PolicySnapshot& fixed,
                    ReplayBuffer& buffer, std::vector<Transition>* sink,
                    std::vector<CompletedEpisode>& done);

  VecEnvConfig config_;
  std::vector<std::unique_ptr<Instance>> instances_;
  mutable std::mutex snapshot_mutex_;
  PolicySnapshot snapshot_;
  std::function<void(const PolicySnapshot&)> hook_;
  std::uint64_t pushed_ = 0;
};

}  // namespace qtransfer
