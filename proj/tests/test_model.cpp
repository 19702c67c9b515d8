#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wncs/model.hpp"

using namespace wncs;

namespace {

bool same_set(std::vector<Action> got, std::vector<Action> want) {
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  return got == want;
}

}  // namespace

TEST_CASE("admissible actions follow battery and control-packet availability") {
  CHECK(same_set(admissible_actions(0, 0), {Action::Idle}));
  CHECK(same_set(admissible_actions(1, 0), {Action::Idle, Action::Downlink}));
  CHECK(same_set(admissible_actions(0, 2), {Action::Idle, Action::Uplink}));
  CHECK(same_set(admissible_actions(1, 2), {Action::Idle, Action::Uplink, Action::Downlink}));
  CHECK_FALSE(is_admissible(Action::Uplink, 1, 0));
  CHECK_FALSE(is_admissible(Action::Downlink, 0, 3));
}

TEST_CASE("battery step") {
  CHECK(battery_step(2, 1, Action::Uplink, 3) == 2);
  CHECK(battery_step(3, 2, Action::Idle, 3) == 3);
  CHECK(battery_step(0, 1, Action::Downlink, 3) == 1);
  CHECK_THROWS_AS(battery_step(0, 1, Action::Uplink, 3), InadmissibleAction);
}

TEST_CASE("battery stays in range for every admissible input") {
  for (int B = 1; B <= 5; ++B) {
    for (int b = 0; b <= B; ++b) {
      for (int ell = 0; ell <= 3; ++ell) {
        for (int y = 0; y <= 1; ++y) {
          for (Action u : admissible_actions(y, b)) {
            const int next = battery_step(b, ell, u, B);
            CHECK(next >= 0);
            CHECK(next <= B);
          }
        }
      }
    }
  }
}

TEST_CASE("age step") {
  CHECK(tau_step(5, Action::Uplink, true) == 1);
  CHECK(tau_step(5, Action::Uplink, false) == 6);
  CHECK(tau_step(0, Action::Idle, false) == 1);
  for (int tau = 0; tau < 20; ++tau) {
    CHECK(tau_step(tau, Action::Downlink, true) == tau + 1);
    CHECK(tau_step(tau, Action::Idle, false) == tau + 1);
  }
}

TEST_CASE("control-packet flag step") {
  CHECK(y_step(1, Action::Downlink, true) == 0);
  CHECK(y_step(0, Action::Uplink, true) == 1);
  CHECK(y_step(1, Action::Idle, false) == 1);
  CHECK(y_step(1, Action::Downlink, false) == 1);
  CHECK(y_step(0, Action::Uplink, false) == 0);
  CHECK_THROWS_AS(y_step(0, Action::Downlink, true), InadmissibleAction);
}

TEST_CASE("control input and plant step") {
  CHECK(control_input(2.0, 0.8, Action::Downlink, true) == doctest::Approx(oracle::kControlInput).epsilon(1e-15));
  CHECK(control_input(2.0, 0.8, Action::Idle, false) == 0.0);
  CHECK(control_input(2.0, 0.8, Action::Downlink, false) == 0.0);
  CHECK(control_input(0.0, 0.8, Action::Downlink, true) == 0.0);

  CHECK(plant_step(1.0, 0.8, 0.0, 0.1) == doctest::Approx(oracle::kPlantStep).epsilon(1e-15));
  CHECK(plant_step(0.0, 0.8, 0.0, 0.0) == 0.0);
  const double v = control_input(1.0, 0.8, Action::Downlink, true);
  CHECK(plant_step(1.0, 0.8, v, 0.0) == 0.0);
}

TEST_CASE("post-control variance") {
  CHECK(eps_tau(0, 0.8, 1.0) == doctest::Approx(1.0));
  CHECK(eps_tau(0, 1.7, 1.0) == doctest::Approx(1.0));
  CHECK(eps_tau(1, 0.5, 1.0) == doctest::Approx(oracle::kEpsTau1Half));
  CHECK(eps_tau(3, 1.0, 2.0) == doctest::Approx(8.0));
  CHECK(eps_tau(3, -1.0, 2.0) == doctest::Approx(8.0));
  CHECK_THROWS_AS(eps_tau(-1, 0.8, 1.0), DomainError);

  // Equals the variance of sum_{k <= tau} a^k w.
  for (double a : {0.3, 0.8, 1.2, -0.9}) {
    double direct = 0.0;
    for (int tau = 0; tau < 12; ++tau) {
      direct += std::pow(a, 2 * tau) * 1.5;
      CHECK(eps_tau(tau, a, 1.5) == doctest::Approx(direct).epsilon(1e-12));
      if (tau > 0) CHECK(eps_tau(tau, a, 1.5) > eps_tau(tau - 1, a, 1.5));
    }
  }
  for (int tau = 0; tau < 10; ++tau) CHECK(eps_tau(tau, 0.0, 2.5) == 2.5);
}

TEST_CASE("parameter validation") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.K() == -p.a);
  CHECK(p.max_harvest() == 2);
  CHECK(p.uplink_drop() == p.p);
  p.p_down = 0.5;
  CHECK(p.downlink_drop() == 0.5);

  auto bad = [](auto mutate) {
    ModelParams q;
    mutate(q);
    CHECK_THROWS_AS(q.validate(), ConfigError);
  };
  bad([](ModelParams& q) { q.p = 1.5; });
  bad([](ModelParams& q) { q.beta = 1.0; });
  bad([](ModelParams& q) { q.beta = 0.0; });
  bad([](ModelParams& q) { q.B = 0; });
  bad([](ModelParams& q) { q.sigma2 = 0.0; });
  bad([](ModelParams& q) { q.harvest_probs = {0.5, 0.4}; });
  bad([](ModelParams& q) { q.harvest_probs = {1.2, -0.2}; });
  bad([](ModelParams& q) { q.p_up = 2.0; });
}

TEST_CASE("action names") {
  CHECK(std::string(to_string(Action::Idle)) == "idle");
  CHECK(std::string(to_string(Action::Uplink)) == "uplink");
  CHECK(std::string(to_string(Action::Downlink)) == "downlink");
}
