#include <doctest.h>

#include <cmath>

#include "chain_experiment.hpp"
#include "oracles.hpp"
#include "qtransfer/agent.hpp"
#include "qtransfer/envs.hpp"
#include "qtransfer/errors.hpp"
#include "qtransfer/loss.hpp"
#include "qtransfer/replay.hpp"

using namespace qtransfer;

namespace {

// Head-only network whose output is exactly `bias` for every input.
QNetwork constant_net(std::vector<float> bias, std::size_t inputs = 3) {
  const std::size_t actions = bias.size();
  QNetwork net(QNetworkSpec::features_only(inputs, 4, actions));
  net.parameter("head2.b").value = Tensor({actions}, std::move(bias));
  return net;
}

SampledBatch batch_of(std::vector<Transition> ts) {
  const std::size_t n = ts.size(), d = ts[0].state.size();
  SampledBatch b;
  b.states = Tensor({n, d});
  b.next_states = Tensor({n, d});
  b.rewards = Tensor({n});
  b.weights = Tensor({n}, 1.0f);
  for (std::size_t i = 0; i < n; ++i) {
    b.indices.push_back(i);
    std::copy_n(ts[i].state.data(), d, b.states.data() + i * d);
    std::copy_n(ts[i].next_state.data(), d, b.next_states.data() + i * d);
    b.actions.push_back(ts[i].action);
    b.rewards[i] = ts[i].reward;
    b.dones.push_back(ts[i].done);
  }
  return b;
}

AgentConfig small_config() {
  AgentConfig c;
  c.batch_size = 8;
  c.warmup_transitions = 16;
  return c;
}

void fill(ReplayBuffer& buffer, std::size_t inputs, int n, std::uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.state = Tensor({inputs});
    t.next_state = Tensor({inputs});
    for (float& v : t.state.values()) v = static_cast<float>(uniform01(rng));
    for (float& v : t.next_state.values()) v = static_cast<float>(uniform01(rng));
    t.action = static_cast<int>(uniform_index(rng, 2));
    t.reward = static_cast<float>(uniform01(rng));
    t.done = uniform01(rng) < 0.2;
    buffer.push(t);
  }
}

bool same_params(const QNetwork& a, const QNetwork& b) {
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    if (!(a.parameters()[i].value == b.parameters()[i].value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  const AgentConfig c;
  CHECK(epsilon(0, c) == doctest::Approx(0.9));
  CHECK(epsilon(1000, c) == doctest::Approx(0.05 + 0.85 * std::exp(-1.0)));
  CHECK(epsilon(1000, c) == doctest::Approx(0.3627).epsilon(1e-4));
  CHECK(epsilon(1000000, c) == doctest::Approx(0.05));
  double prev = 1.0;
  for (std::uint64_t t = 0; t < 20000; t += 37) {
    CHECK(epsilon(t, c) <= prev);
    prev = epsilon(t, c);
  }
}

TEST_CASE("greedy action picks the argmax, lowest index on ties") {
  const std::vector<float> a{1.0f, 3.0f, 2.0f}, b{5.0f, 5.0f, 1.0f}, c{-1.0f, -1.0f};
  CHECK(greedy_action(a) == 1);
  CHECK(greedy_action(b) == 0);
  CHECK(greedy_action(c) == 0);
}

TEST_CASE("epsilon 1 explores uniformly without evaluating Q") {
  Rng rng(17);
  std::vector<double> counts(4, 0.0);
  int calls = 0;
  for (int i = 0; i < 10000; ++i) {
    counts[epsilon_greedy(1.0, 4, rng, [&] {
      ++calls;
      return Tensor({4});
    })] += 1;
  }
  CHECK(calls == 0);
  CHECK(oracle::chi_square_p(counts, std::vector<double>(4, 0.25)) > 0.01);
}

TEST_CASE("epsilon 0 is greedy") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    CHECK(epsilon_greedy(0.0, 3, rng, [] {
      return Tensor({3}, std::vector<float>{1.0f, 3.0f, 2.0f});
    }) == 1);
  }
}

TEST_CASE("select_action advances the step counter") {
  DqnAgent agent(constant_net({0.0f, 1.0f}), small_config());
  Rng rng(2);
  CHECK(agent.steps() == 0);
  for (int i = 0; i < 5; ++i) agent.select_action(Tensor({3}), rng);
  CHECK(agent.steps() == 5);
  agent.advance_steps(10);
  CHECK(agent.steps() == 15);
}

TEST_CASE("Bellman targets") {
  DqnAgent agent(constant_net({0.0f, 0.0f}), small_config());
  agent.mutable_target() = constant_net({1.0f, 2.0f});
  const Tensor s({3});
  const auto b = batch_of({{s, 0, 10.0f, s, true}, {s, 1, 0.0f, s, false}, {s, 0, 0.5f, s, false}});
  const auto y = agent.compute_targets(b);
  CHECK(y[0] == 10.0f);
  CHECK(y[1] == doctest::Approx(1.98));
  CHECK(y[2] == doctest::Approx(0.5 + 1.98));

  agent.mutable_target() = constant_net({0.0f, 0.0f});
  const auto z = agent.compute_targets(b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(z[i] == b.rewards[i]);
}

TEST_CASE("targets come from the target network, not the policy") {
  DqnAgent agent(constant_net({7.0f, 9.0f}), small_config());
  agent.mutable_target() = constant_net({1.0f, 2.0f});
  const Tensor s({3});
  const auto y = agent.compute_targets(batch_of({{s, 0, 0.0f, s, false}}));
  CHECK(y[0] == doctest::Approx(0.99 * 2.0));
}

TEST_CASE("soft update blends, copies at tau 1, and contracts geometrically") {
  const auto spec = QNetworkSpec::features_only(3, 6, 2);
  DqnAgent agent(QNetwork::initialized(spec, 1), small_config());
  agent.mutable_target() = QNetwork::initialized(spec, 2);
  const QNetwork before = agent.target();

  agent.soft_update(0.0);
  CHECK(same_params(agent.target(), before));

  auto gap = [&] {
    double worst = 0.0;
    for (std::size_t i = 0; i < agent.policy().parameters().size(); ++i) {
      const auto& p = agent.policy().parameters()[i].value;
      const auto& t = agent.target().parameters()[i].value;
      for (std::size_t k = 0; k < p.size(); ++k)
        worst = std::max(worst, std::abs(static_cast<double>(p[k]) - t[k]));
    }
    return worst;
  };
  const double g0 = gap();
  REQUIRE(g0 > 0.1);
  const double tau = 0.005;
  for (int n = 1; n <= 500; ++n) {
    agent.soft_update(tau);
    if (n % 50 == 0) CHECK(std::abs(gap() - g0 * std::pow(1 - tau, n)) <= 1e-6);
  }
  agent.soft_update(1.0);
  CHECK(same_params(agent.target(), agent.policy()));
}

TEST_CASE("train_step waits for warmup and the batch size") {
  DqnAgent agent(QNetwork::initialized(QNetworkSpec::features_only(3, 6, 2), 1), small_config());
  ReplayBuffer buffer(100, {3});
  Rng rng(1);
  fill(buffer, 3, 15, 1);
  const QNetwork before = agent.policy();
  CHECK_FALSE(agent.train_step(buffer, rng).has_value());
  CHECK(same_params(agent.policy(), before));
  CHECK(agent.train_steps() == 0);
  fill(buffer, 3, 1, 2);
  CHECK(agent.train_step(buffer, rng).has_value());
  CHECK(agent.train_steps() == 1);
}

TEST_CASE("lr 0 and tau 0 make train_step a no-op") {
  AgentConfig c = small_config();
  c.lr = 0.0;
  c.tau = 0.0;
  DqnAgent agent(QNetwork::initialized(QNetworkSpec::features_only(3, 6, 2), 3), c);
  agent.mutable_target() = QNetwork::initialized(QNetworkSpec::features_only(3, 6, 2), 4);
  const auto p = agent.policy().hash(), t = agent.target().hash();
  ReplayBuffer buffer(100, {3});
  fill(buffer, 3, 50, 3);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) CHECK(agent.train_step(buffer, rng).has_value());
  CHECK(agent.policy().hash() == p);
  CHECK(agent.target().hash() == t);
  CHECK_FALSE(agent.optimizer().has_value());
}

TEST_CASE("config validation") {
  AgentConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.eps_end = 0.95;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(DqnAgent(QNetwork(QNetworkSpec::features_only(3, 4, 2)), c), ConfigError);
}

TEST_CASE("a perfect network has zero loss and stays put") {
  DqnAgent agent(QNetwork(QNetworkSpec::features_only(3, 4, 2)), small_config());
  const Tensor s({3}, 0.5f);
  const auto b = batch_of({{s, 0, 0.0f, s, true}, {s, 1, 0.0f, s, true}});
  const auto before = agent.policy().hash();
  CHECK(agent.learn(b) == 0.0);
  CHECK(agent.policy().hash() == before);
}

TEST_CASE("learn reports the Huber loss against the computed targets") {
  const auto spec = QNetworkSpec::features_only(3, 6, 2);
  DqnAgent agent(QNetwork::initialized(spec, 5), small_config());
  agent.mutable_target() = QNetwork::initialized(spec, 6);
  ReplayBuffer buffer(64, {3});
  fill(buffer, 3, 64, 9);
  Rng rng(3);
  const auto b = buffer.sample(8, rng);
  const auto y = agent.compute_targets(b);
  const auto q = agent.q_values(b.states);
  Tensor pred({8});
  for (std::size_t i = 0; i < 8; ++i) pred[i] = q[i * 2 + b.actions[i]];
  const double expected = huber_loss(pred, y).loss;
  CHECK(agent.learn(b) == doctest::Approx(expected));
}

TEST_CASE("target parameters change only through the soft update") {
  const auto spec = QNetworkSpec::features_only(3, 6, 2);
  DqnAgent agent(QNetwork::initialized(spec, 5), small_config());
  agent.mutable_target() = QNetwork::initialized(spec, 6);
  ReplayBuffer buffer(64, {3});
  fill(buffer, 3, 64, 9);
  Rng rng(3);
  const QNetwork target_before = agent.target();
  REQUIRE(agent.train_step(buffer, rng));
  const float tau = static_cast<float>(agent.config().tau);
  for (std::size_t i = 0; i < spec.conv.size() * 2 + 4; ++i) {
    const auto& p = agent.policy().parameters()[i].value;
    const auto& t0 = target_before.parameters()[i].value;
    const auto& t1 = agent.target().parameters()[i].value;
    for (std::size_t k = 0; k < p.size(); ++k)
      CHECK(t1[k] == doctest::Approx(tau * p[k] + (1 - tau) * t0[k]).epsilon(1e-6));
  }
}

TEST_CASE("frozen parameters survive training bit for bit") {
  auto net = QNetwork::initialized(QNetworkSpec::features_only(3, 6, 2), 8);
  net.parameter("head1.w").frozen = true;
  net.parameter("head1.b").frozen = true;
  DqnAgent agent(std::move(net), small_config());
  const Tensor w = agent.policy().parameter("head1.w").value;
  ReplayBuffer buffer(100, {3});
  fill(buffer, 3, 100, 4);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) agent.train_step(buffer, rng);
  CHECK(agent.policy().parameter("head1.w").value == w);
  CHECK_FALSE(agent.policy().parameter("head2.w").value ==
              QNetwork::initialized(QNetworkSpec::features_only(3, 6, 2), 8).parameter("head2.w").value);
  CHECK(agent.optimizer()->state_count() == 2);
}

TEST_CASE("prioritized learning writes |y - pred| back") {
  const auto spec = QNetworkSpec::features_only(3, 6, 2);
  DqnAgent agent(QNetwork::initialized(spec, 5), small_config());
  PrioritizedReplayBuffer buffer(64, {3});
  fill(buffer, 3, 64, 9);
  Rng rng(3);
  const auto b = buffer.sample(8, rng);
  const auto y = agent.compute_targets(b);
  const auto q = agent.q_values(b.states);
  agent.learn(b, &buffer);
  for (std::size_t i = 0; i < 8; ++i) {
    const double td = std::abs(y[i] - q[i * 2 + b.actions[i]]);
    CHECK(buffer.priority(b.indices[i]) == doctest::Approx(td + 0.01).epsilon(1e-5));
  }
}

TEST_CASE("chain MDP learning matches value iteration") {
  const auto r = chain::run(0, 20000, 0.05);
  INFO("max error " << r.max_error);
  CHECK(r.max_error <= 0.05);
}

TEST_CASE("chain MDP transitions") {
  const ChainMdp mdp(5);
  CHECK(mdp.step(0, 0).next == 0);
  CHECK(mdp.step(2, 0).next == 1);
  CHECK(mdp.step(2, 1).next == 3);
  CHECK(mdp.step(2, 1).reward == 0.0f);
  const auto end = mdp.step(4, 1);
  CHECK(end.done);
  CHECK(end.reward == 1.0f);
  CHECK_FALSE(mdp.step(4, 0).done);
  CHECK(mdp.one_hot(3)[3] == 1.0f);
  CHECK_THROWS_AS(mdp.step(5, 0), EnvError);
}

TEST_CASE("value iteration oracle sanity") {
  const auto q = oracle::chain_q_star(5, 0.99, 1e-10);
  CHECK(q[4][1] == doctest::Approx(1.0));
  CHECK(q[0][1] == doctest::Approx(std::pow(0.99, 4)));
  CHECK(q[0][0] == doctest::Approx(std::pow(0.99, 5)));
  CHECK(q[3][0] == doctest::Approx(std::pow(0.99, 3)));
}

TEST_CASE("evaluation is deterministic and leaves the network alone") {
  auto env = make_env("shooter6", {300});
  const auto net = QNetwork::initialized(QNetworkSpec::standard(6), 4);
  const auto before = net.hash();
  const auto a = evaluate(net, {}, *env, 3, 21);
  const auto b = evaluate(net, {}, *env, 3, 21);
  CHECK(a.mean_reward == b.mean_reward);
  CHECK(a.rewards == b.rewards);
  CHECK(a.durations == b.durations);
  CHECK(net.hash() == before);
  CHECK_THROWS_AS(evaluate(QNetwork(QNetworkSpec::standard(4)), {}, *env, 1, 0), ConfigError);
}

TEST_CASE("a zero network on brick scores like the noop script") {
  auto env = make_env("brick", {400});
  const QNetwork zero(QNetworkSpec::standard(4));
  const auto zeros = [](const Tensor&) { return Tensor({4}); };
  const auto net_eval = evaluate(zero, {}, *env, 3, 5);
  const auto script = evaluate_policy(*env, zeros, 3, 5, kEvalEpsilon, 4);
  CHECK(net_eval.rewards == script.rewards);
  CHECK(net_eval.durations == script.durations);
  // Without exploration the ball is never launched.
  const auto noop = evaluate_policy(*env, zeros, 3, 5, 0.0, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(noop.rewards[i] == 0.0);
    CHECK(noop.durations[i] == 400);
  }
}

TEST_CASE("random baseline is reproducible") {
  auto env = make_env("shooter6", {200});
  const auto a = random_baseline(*env, 5, 3, 4);
  const auto b = random_baseline(*env, 5, 3, 4);
  CHECK(a.rewards == b.rewards);
  CHECK(a.rewards.size() == 5);
}
