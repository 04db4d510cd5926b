#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "shoal/checkpoint.hpp"
#include "shoal/train.hpp"

using namespace shoal;

namespace {

PolicyCheckpoint sample_checkpoint() {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.ppo.hidden = {8, 6};
  auto c = initial_checkpoint(cfg);
  c.curve = {{0, -0.25}, {1000, 0.125}, {2000, 0.5}};
  return c;
}

template <class T>
T read_le(const std::string& s, std::size_t at) {
  T v{};
  std::memcpy(&v, s.data() + at, sizeof(T));
  static_assert(std::endian::native == std::endian::little);
  return v;
}

std::vector<Observation> probe_set() {
  Rng rng(77, Stream::Environment);
  std::vector<Observation> out;
  for (int i = 0; i < 100; ++i) out.push_back({{rng.uniform(), rng.uniform()}, {rng.uniform(), rng.uniform()}});
  return out;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("byte round trip") {
    const auto c = sample_checkpoint();
    const auto bytes = serialize_checkpoint(c);
    const auto back = deserialize_checkpoint(bytes);
    CHECK(back == c);
    CHECK(serialize_checkpoint(back) == bytes);
    CHECK(checkpoint_digest(back) == fnv1a64(bytes));
  }

  TEST_CASE("documented layout") {
    const auto c = sample_checkpoint();
    const auto s = serialize_checkpoint(c);
    CHECK(s.substr(0, 8) == "SHOALPOL");
    CHECK(read_le<std::uint32_t>(s, 8) == 1);
    const auto n = read_le<std::uint32_t>(s, 12);
    CHECK(s.substr(16, n) == to_text(c.config));
    std::size_t at = 16 + n;
    const auto layers = read_le<std::uint32_t>(s, at);
    at += 4;
    REQUIRE(layers == 4);  // 4->8, 8->6, 6->8, 6->1
    const std::uint32_t expect[4][2] = {{8, 4}, {6, 8}, {8, 6}, {1, 6}};
    for (std::uint32_t l = 0; l < layers; ++l) {
      CHECK(read_le<std::uint32_t>(s, at) == expect[l][0]);
      CHECK(read_le<std::uint32_t>(s, at + 4) == expect[l][1]);
      at += 8;
    }
    // first weight, row-major W_0(0,0) then W_0(0,1)
    CHECK(read_le<double>(s, at) == c.net.weight(0)(0, 0));
    CHECK(read_le<double>(s, at + 8) == c.net.weight(0)(0, 1));
    // biases follow the weight block
    CHECK(read_le<double>(s, at + 8 * 32) == c.net.bias(0)(0));
    at += 8 * static_cast<std::size_t>(c.net.params().size());
    CHECK(read_le<std::uint32_t>(s, at) == 3);
    CHECK(read_le<std::uint64_t>(s, at + 4) == 0);
    CHECK(read_le<double>(s, at + 12) == -0.25);
    CHECK(read_le<std::uint64_t>(s, at + 4 + 16 * 2) == 2000);
    at += 4 + 16 * 3;
    CHECK(at + 8 == s.size());
    CHECK(read_le<std::uint64_t>(s, at) == fnv1a64(std::string_view(s).substr(0, at)));
  }

  TEST_CASE("file round trip keeps the probe-set distribution") {
    auto c = sample_checkpoint();
    Rng rng(5, Stream::WeightInit);
    for (auto& w : c.net.params()) w += 0.5 * rng.normal();
    const auto path = std::filesystem::temp_directory_path() / "shoal_test_ckpt.bin";
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    std::filesystem::remove(path);
    Policy a(c.net), b(back.net);
    for (const auto& o : probe_set()) CHECK(a.probabilities(o) == b.probabilities(o));
  }

  TEST_CASE("corruption is detected") {
    const auto bytes = serialize_checkpoint(sample_checkpoint());
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(flipped), "checkpoint checksum mismatch", Error);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), Error);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(magic), "not a policy checkpoint (bad magic)", Error);
    CHECK_THROWS_AS(deserialize_checkpoint(""), Error);
  }

  TEST_CASE("missing file is an io error") {
    try {
      load_checkpoint("/nonexistent/dir/ckpt.bin");
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Io);
    }
  }
}

TEST_SUITE("train") {
  TEST_CASE("zero budget returns the initialized network") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.ppo.total_steps = 0;
    cfg.ppo.eval_len = 50;
    const auto c = train(cfg);
    const auto init = initial_checkpoint(cfg);
    CHECK(c.net == init.net);
    REQUIRE(c.curve.size() == 1);
    CHECK(c.curve[0].step == 0);
  }

  TEST_CASE("training is bitwise deterministic") {
    RunConfig cfg;
    cfg.seed = 9;
    cfg.ppo.total_steps = 1024;
    cfg.ppo.rollout_len = 256;
    cfg.ppo.eval_len = 100;
    cfg.ppo.eval_points = 4;
    std::vector<std::uint64_t> seen;
    const auto a = train(cfg, [&](const TrainProgress& p) {
      CHECK(p.total_steps == 1024);
      if (p.r_bar) seen.push_back(p.steps_done);
    });
    const auto b = train(cfg);
    CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
    CHECK(seen == std::vector<std::uint64_t>{256, 512, 768, 1024});
    REQUIRE(a.curve.size() == 5);
    for (const auto& p : a.curve) {
      CHECK(p.r_bar >= -1.0);
      CHECK(p.r_bar <= 1.0);
    }
    CHECK_FALSE(a.net == initial_checkpoint(cfg).net);
    cfg.seed = 10;
    CHECK_FALSE(serialize_checkpoint(train(cfg)) == serialize_checkpoint(a));
  }

  TEST_CASE("evaluation of a school held at the target end") {
    RunConfig cfg;
    const auto c = initial_checkpoint(cfg);
    for (auto [x, expect] : {std::pair{1.0, 1.0}, std::pair{0.5, 0.0}, std::pair{0.0, -1.0}}) {
      Environment env(cfg, 1, Stream::EvalEnvironment);
      env.reset();
      env.pin_school({x, 0.4});
      Rng rng(1, Stream::EvalPolicy);
      CHECK(evaluate_in(Policy(c.net), env, 200, rng, false) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("evaluation stays in range and is repeatable") {
    RunConfig cfg;
    const auto c = initial_checkpoint(cfg);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const double r = evaluate(c.net, cfg, 300, seed);
      CHECK(r >= -1.0);
      CHECK(r <= 1.0);
      CHECK(evaluate(c.net, cfg, 300, seed) == r);
    }
    CHECK_THROWS_AS(evaluate(c.net, cfg, 0, 1), Error);
  }

  TEST_CASE("greedy evaluation ignores the policy stream") {
    RunConfig cfg;
    cfg.ppo.eval_greedy = true;
    auto c = initial_checkpoint(cfg);
    Environment e1(cfg, 4, Stream::EvalEnvironment), e2(cfg, 4, Stream::EvalEnvironment);
    e1.reset();
    e2.reset();
    Rng r1(1, Stream::EvalPolicy), r2(2, Stream::EvalPolicy);
    CHECK(evaluate_in(Policy(c.net), e1, 300, r1, true) == evaluate_in(Policy(c.net), e2, 300, r2, true));
  }

  TEST_CASE("mirrored policy reflects observation and action") {
    RunConfig cfg;
    auto c = initial_checkpoint(cfg);
    Rng rng(8, Stream::WeightInit);
    for (auto& w : c.net.params()) w += 0.5 * rng.normal();
    Policy plain(c.net), mirror(c.net, true);
    for (const auto& o : probe_set()) {
      const Observation m{{1.0 - o.reference_point.x, o.reference_point.y}, {1.0 - o.own_position.x, o.own_position.y}};
      const auto p = plain.probabilities(m);
      const auto q = mirror.probabilities(o);
      for (int a = 0; a < 8; ++a) CHECK(q[static_cast<std::size_t>(a)] == p[static_cast<std::size_t>(mirror_action(a))]);
      Rng g(1, Stream::PolicySampling);
      CHECK(mirror.act(o, g, true).action == mirror_action(plain.act(m, g, true).action));
    }
  }

  TEST_CASE("training needs a single agent") {
    RunConfig cfg;
    cfg.sim.n_virtual = 2;
    CHECK_THROWS_AS(train(cfg), Error);
  }
}
