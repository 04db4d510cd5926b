#include <doctest.h>

#include <cmath>

#include "shoal/config.hpp"
#include "shoal/dynamics.hpp"

using namespace shoal;

TEST_SUITE("dynamics") {
  TEST_CASE("lag step matches the analytic solution") {
    const LagState s{{0, 0}, {1, 0}};
    const LagState n = lag_step(s, 1.0, 1.0);
    CHECK(std::abs(n.pos.x - (1.0 - std::exp(-1.0))) <= 1e-9);
    CHECK(n.pos.y == 0.0);
    CHECK(n.target == s.target);

    Rng r(5, 1);
    for (int i = 0; i < 1000; ++i) {
      const LagState a{{r.uniform(), r.uniform()}, {r.uniform(), r.uniform()}};
      const double tau = r.uniform(0.05, 3.0), dt = r.uniform(0.01, 2.0);
      const LagState b = lag_step(a, tau, dt);
      const double k = std::exp(-dt / tau);
      REQUIRE(std::abs(b.pos.x - (a.target.x + k * (a.pos.x - a.target.x))) <= 1e-9);
      REQUIRE(std::abs(b.pos.y - (a.target.y + k * (a.pos.y - a.target.y))) <= 1e-9);
    }
  }

  TEST_CASE("lag step fixed point and asymptote") {
    const LagState s{{0.3, 0.7}, {0.3, 0.7}};
    CHECK(lag_step(s, 0.5, 0.1) == s);
    const LagState far = lag_step({{0, 1}, {0.8, 0.2}}, 0.5, 500.0);
    CHECK(std::abs(far.pos.x - 0.8) <= 1e-9);
    CHECK(std::abs(far.pos.y - 0.2) <= 1e-9);
  }

  TEST_CASE("lag step composes") {
    Rng r(6, 1);
    for (int i = 0; i < 1000; ++i) {
      const LagState a{{r.uniform(), r.uniform()}, {r.uniform(), r.uniform()}};
      const double tau = r.uniform(0.05, 3.0), dt = r.uniform(0.01, 1.0);
      const LagState twice = lag_step(lag_step(a, tau, dt), tau, dt);
      const LagState once = lag_step(a, tau, 2 * dt);
      REQUIRE(std::abs(twice.pos.x - once.pos.x) <= 1e-12);
      REQUIRE(std::abs(twice.pos.y - once.pos.y) <= 1e-12);
    }
  }

  TEST_CASE("phase samples are uniform on (0, phase_max]") {
    Rng r(7, 1);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
      const double p = sample_phase(r, 2.0);
      REQUIRE(p > 0.0);
      REQUIRE(p <= 2.0);
      sum += p;
    }
    CHECK(std::abs(sum / 100000 - 1.0) <= 0.02);
    Rng a(8, 1), b(8, 1);
    CHECK(sample_phase(a, 2.0) == sample_phase(b, 2.0));
  }

  TEST_CASE("target update: deterministic reaction when p is zero") {
    SimParams p;
    p.p_ignore = 0.0;
    Rng r(9, 1);
    const std::vector<Vec2> agents{{0.6, 0.5}};
    for (int i = 0; i < 1000; ++i) REQUIRE(update_school_target({0.5, 0.5}, agents, p, r) == agents[0]);
  }

  TEST_CASE("target update: ignore branch stays within the displacement box") {
    SimParams p;
    p.p_ignore = 1.0;
    Rng r(10, 1);
    const std::vector<Vec2> agents{{0.55, 0.5}};
    double max_dx = 0, max_dy = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec2 t = update_school_target({0.5, 0.5}, agents, p, r);
      max_dx = std::max(max_dx, std::abs(t.x - 0.5));
      max_dy = std::max(max_dy, std::abs(t.y - 0.5));
    }
    CHECK(max_dx <= p.delta_x_max);
    CHECK(max_dy <= p.delta_y_max);
    CHECK(max_dx > 0.9 * p.delta_x_max);
  }

  TEST_CASE("target update: reaction frequency is 1 - p") {
    SimParams p;
    p.p_ignore = 0.6;
    Rng r(11, 1);
    const std::vector<Vec2> agents{{0.6, 0.5}};
    int reacted = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) reacted += update_school_target({0.5, 0.5}, agents, p, r) == agents[0];
    CHECK(std::abs(reacted / double(n) - 0.4) <= 0.01);
  }

  TEST_CASE("target update: out of range agents are ignored, nearest agent wins") {
    SimParams p;
    p.p_ignore = 0.0;
    p.delta_x_max = p.delta_y_max = 0.0;
    Rng r(12, 1);
    const std::vector<Vec2> far{{0.95, 0.95}};
    CHECK(update_school_target({0.1, 0.1}, far, p, r) == Vec2{0.1, 0.1});
    const std::vector<Vec2> two{{0.9, 0.9}, {0.2, 0.1}};
    CHECK(update_school_target({0.1, 0.1}, two, p, r) == Vec2{0.2, 0.1});
    CHECK_THROWS_AS(update_school_target({0.1, 0.1}, std::vector<Vec2>{}, p, r), Error);
  }

  TEST_CASE("school step mid-phase and at the boundary") {
    SimParams p;
    Rng r(13, 1);
    const std::vector<Vec2> agents{{0.9, 0.9}};
    SchoolCentroidState s{{{0.5, 0.5}, {0.6, 0.5}}, 1.5};
    const auto mid = step_school(s, agents, p, 0.1, r);
    CHECK(mid.phase_remaining == doctest::Approx(1.4));
    CHECK(mid.lag.target == s.lag.target);
    CHECK(r.blocks_consumed() == 0);

    s.phase_remaining = 0.05;
    const auto b = step_school(s, agents, p, 0.1, r);
    CHECK(b.phase_remaining > 0.0);
    CHECK(b.phase_remaining <= p.phase_max);
    CHECK(r.blocks_consumed() > 0);
  }

  TEST_CASE("school converges to a stationary agent when it always reacts") {
    SimParams p;
    p.p_ignore = 0.0;
    Rng r(14, 1);
    const std::vector<Vec2> agents{{0.6, 0.55}};
    SchoolCentroidState s{{{0.45, 0.4}, {0.45, 0.4}}, 0.0};
    double prev = distance(s.lag.pos, agents[0]);
    for (int k = 0; k < 100 * 10; ++k) {
      s = step_school(s, agents, p, 0.1, r);
      const double d = distance(s.lag.pos, agents[0]);
      REQUIRE(d <= prev + 1e-15);
      prev = d;
    }
    CHECK(prev < 1e-3);
  }

  TEST_CASE("with p = 1 the school ignores agent paths") {
    SimParams p;
    p.p_ignore = 1.0;
    Rng ra(15, 1), rb(15, 1), moves(16, 1);
    SchoolCentroidState a{{{0.5, 0.5}, {0.5, 0.5}}, 0.0}, b = a;
    for (int k = 0; k < 2000; ++k) {
      const std::vector<Vec2> pa{{moves.uniform(), moves.uniform()}};
      const std::vector<Vec2> pb{{0.5, 0.5}};
      a = step_school(a, pa, p, 0.1, ra);
      b = step_school(b, pb, p, 0.1, rb);
      REQUIRE(a == b);
    }
  }

  TEST_CASE("positions stay in the unit square under random actions") {
    SimParams p;
    Rng r(17, 1);
    LagState agent{{0.5, 0.5}, {0.5, 0.5}};
    SchoolCentroidState school{{{0.5, 0.5}, {0.5, 0.5}}, 0.0};
    SwarmState swarm;
    for (int i = 0; i < 5; ++i) swarm.fish.push_back({{{r.uniform(), r.uniform()}, {0.5, 0.5}}, 0.0});
    for (int k = 0; k < 10000; ++k) {
      agent.target = action_to_target(agent.pos, static_cast<int>(r.uniform_index(8)), 0.3);
      for (int s = 0; s < 10; ++s) {
        const std::vector<Vec2> ag{agent.pos};
        school = step_school(school, ag, p, 0.1, r);
        swarm = step_swarm(swarm, ag, p, 0.1, r);
        agent = lag_step(agent, p.tau_v, 0.1);
      }
      REQUIRE(in_unit_square(agent.pos));
      REQUIRE(in_unit_square(school.lag.pos));
      REQUIRE(in_unit_square(school.lag.target));
      for (const auto& f : swarm.fish) REQUIRE(in_unit_square(f.lag.pos));
    }
  }

  TEST_CASE("one-fish swarm reproduces the centroid model") {
    SimParams p;
    Rng a(18, 1), b(18, 1), moves(19, 1);
    SchoolCentroidState s{{{0.3, 0.6}, {0.3, 0.6}}, 0.0};
    SwarmState w{{s}};
    for (int k = 0; k < 5000; ++k) {
      const std::vector<Vec2> ag{{moves.uniform(), moves.uniform()}};
      s = step_school(s, ag, p, 0.1, a);
      w = step_swarm(w, ag, p, 0.1, b);
      REQUIRE(w.fish[0] == s);
    }
  }

  TEST_CASE("swarm fixed point and cohesion") {
    SimParams p;
    p.p_ignore = 0.0;
    Rng r(20, 1);
    const Vec2 c{0.4, 0.6};
    SwarmState w;
    for (int i = 0; i < 4; ++i) w.fish.push_back({{c, c}, 0.0});
    const std::vector<Vec2> ag{c};
    for (int k = 0; k < 200; ++k) w = step_swarm(w, ag, p, 0.1, r);
    for (const auto& f : w.fish) CHECK(f.lag.pos == c);

    // two distant fish, no agent in range: mean displacement points inward
    SimParams q;
    q.p_ignore = 1.0;
    double left_dx = 0, right_dx = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      SwarmState two{{{{{0.1, 0.5}, {0.1, 0.5}}, 0.0}, {{{0.9, 0.5}, {0.9, 0.5}}, 0.0}}};
      two = step_swarm(two, std::vector<Vec2>{{0.5, 0.0}}, q, 0.1, r);
      left_dx += two.fish[0].lag.target.x - 0.1;
      right_dx += two.fish[1].lag.target.x - 0.9;
    }
    CHECK(left_dx / n > 0.1);
    CHECK(right_dx / n < -0.1);
  }

  TEST_CASE("action directions") {
    CHECK(action_to_target({0.5, 0.5}, 0, 0.15) == Vec2{0.65, 0.5});
    CHECK(action_to_target({0.5, 0.5}, 2, 0.15) == Vec2{0.5, 0.65});
    CHECK(action_to_target({0.5, 0.5}, 4, 0.15) == Vec2{0.35, 0.5});
    CHECK(action_to_target({0.5, 0.5}, 6, 0.15).y == doctest::Approx(0.35));
    CHECK(action_to_target({0.99, 0.5}, 0, 0.15) == Vec2{1.0, 0.5});
    const Vec2 diag = action_to_target({0.5, 0.5}, 1, 0.15);
    CHECK(diag.x == doctest::Approx(0.5 + 0.15 / std::sqrt(2.0)));
    CHECK(diag.y == doctest::Approx(0.5 + 0.15 / std::sqrt(2.0)));
    CHECK_THROWS_AS(action_to_target({0.5, 0.5}, 8, 0.15), Error);
    CHECK_THROWS_AS(action_to_target({0.5, 0.5}, -1, 0.15), Error);
  }

  TEST_CASE("mirrored action reflects x") {
    for (int a = 0; a < 8; ++a) {
      const Vec2 t = action_to_target({0.5, 0.5}, a, 0.15);
      const Vec2 m = action_to_target({0.5, 0.5}, mirror_action(a), 0.15);
      CHECK(m.x == doctest::Approx(1.0 - t.x));
      CHECK(m.y == doctest::Approx(t.y));
      CHECK(mirror_action(mirror_action(a)) == a);
    }
  }
}
