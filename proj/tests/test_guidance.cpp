#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "spateval/error.hpp"
#include "spateval/guidance.hpp"
#include "spateval/rng.hpp"

using namespace spateval;

namespace {

// Independent oracle: central finite differences through the full
// softmax -> box-focus pipeline, never touching loss_gradient.
double numeric_gradient_entry(const Grid& z,
                              const std::vector<BoundingBox>& boxes,
                              std::size_t index, double step = 1e-5) {
  Grid plus = z;
  plus.values[index] += step;
  Grid minus = z;
  minus.values[index] -= step;
  const double lp = box_focus_loss(attention_from_scores(plus), boxes);
  const double lm = box_focus_loss(attention_from_scores(minus), boxes);
  return (lp - lm) / (2.0 * step);
}

Grid random_grid(SplitMix64& rng, int tokens, int h, int w, double scale = 2.0) {
  Grid g(tokens, h, w);
  for (double& v : g.values) v = (rng.next_double() - 0.5) * scale;
  return g;
}

BoundingBox random_box(SplitMix64& rng, int h, int w, int token) {
  const int x0 = static_cast<int>(rng.below(w - 1));
  const int y0 = static_cast<int>(rng.below(h - 1));
  const int x1 = x0 + 1 + static_cast<int>(rng.below(w - x0));
  const int y1 = y0 + 1 + static_cast<int>(rng.below(h - y0));
  return {x0, y0, x1, y1, token};
}

}  // namespace

TEST_CASE("attention normalization") {
  Grid zeros(1, 2, 2);
  const Grid uniform = attention_from_scores(zeros);
  for (double v : uniform.values) CHECK(v == doctest::Approx(0.25));

  Grid skewed(1, 2, 2);
  skewed.values = {std::log(3.0), 0.0, 0.0, 0.0};
  const Grid map = attention_from_scores(skewed);
  CHECK(map.values[0] == doctest::Approx(0.5));
  CHECK(map.values[1] == doctest::Approx(1.0 / 6.0));
  CHECK(map.values[2] == doctest::Approx(1.0 / 6.0));
  CHECK(map.values[3] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("attention normalization is shift invariant") {
  SplitMix64 rng(11);
  Grid z = random_grid(rng, 2, 4, 4);
  Grid shifted = z;
  for (double& v : shifted.values) v += 17.25;
  const Grid a = attention_from_scores(z);
  const Grid b = attention_from_scores(shifted);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("attention rejects non-finite scores") {
  Grid z(1, 2, 2);
  z.values[1] = std::numeric_limits<double>::infinity();
  try {
    attention_from_scores(z);
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteInput);
  }
}

TEST_CASE("box focus loss on closed-form cases") {
  Grid uniform(1, 2, 2, 0.25);
  CHECK(box_focus_loss(uniform, {{0, 0, 1, 1, 0}}) == doctest::Approx(0.5625));
  CHECK(box_focus_loss(uniform, {{0, 0, 2, 2, 0}}) == doctest::Approx(0.0));

  // two tokens capturing fractions 0.5 and 0.25
  Grid two(2, 2, 2, 0.25);
  const double loss =
      box_focus_loss(two, {{0, 0, 2, 1, 0}, {0, 0, 1, 1, 1}});
  CHECK(loss == doctest::Approx(0.25 + 0.5625));
}

TEST_CASE("box focus loss is scale invariant on raw grids") {
  SplitMix64 rng(30);
  for (int round = 0; round < 50; ++round) {
    Grid raw(2, 4, 4);
    for (double& v : raw.values) v = rng.next_double() + 0.01;
    const std::vector<BoundingBox> boxes = {random_box(rng, 4, 4, 0),
                                            random_box(rng, 4, 4, 1)};
    const double base = box_focus_loss(raw, boxes);
    const double c = 0.001 + rng.next_double() * 1000.0;
    Grid scaled = raw;
    for (double& v : scaled.values) v *= c;
    CHECK(box_focus_loss(scaled, boxes) == doctest::Approx(base).epsilon(1e-9));
    CHECK(base >= 0.0);
    CHECK(base <= static_cast<double>(boxes.size()));
  }
}

TEST_CASE("box focus loss rejects a zero attention map") {
  Grid zero(1, 2, 2, 0.0);
  try {
    box_focus_loss(zero, {{0, 0, 1, 1, 0}});
    FAIL("expected ZeroAttentionDenominator");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroAttentionDenominator);
  }
}

TEST_CASE("box focus loss validates boxes") {
  Grid g(1, 2, 2, 0.25);
  CHECK_THROWS_AS(box_focus_loss(g, {{0, 0, 3, 1, 0}}), Error);
  CHECK_THROWS_AS(box_focus_loss(g, {{0, 0, 1, 1, 5}}), Error);
  CHECK_THROWS_AS(box_focus_loss(g, {{1, 0, 1, 1, 0}}), Error);
}

TEST_CASE("total loss weights the two terms") {
  CHECK(total_loss(0.2, 0.3, 1.0, 1.0) == doctest::Approx(0.5));
  CHECK(total_loss(0.2, 0.3, 1.0, 0.0) == doctest::Approx(0.2));
  CHECK(total_loss(0.0, 0.0, 3.5, 7.25) == 0.0);
}

TEST_CASE("gradient is symmetric when the box holds half the mass") {
  // uniform 2x2, box covering the left column: s = 0.5
  Grid z(1, 2, 2);
  const Grid g = loss_gradient(z, {{0, 0, 1, 2, 0}});
  // in-box entries: -2*(0.5)*(0.25*0.5), out-of-box: +2*(0.5)*(0.25*0.5)
  CHECK(g.at(0, 0, 0) == doctest::Approx(-0.125));
  CHECK(g.at(0, 1, 0) == doctest::Approx(-0.125));
  CHECK(g.at(0, 0, 1) == doctest::Approx(+0.125));
  CHECK(g.at(0, 1, 1) == doctest::Approx(+0.125));
}

TEST_CASE("gradient vanishes when the box already holds all mass") {
  Grid z(1, 2, 2);
  z.values = {40.0, 40.0, -40.0, -40.0};  // top row holds ~all mass
  const Grid g = loss_gradient(z, {{0, 0, 2, 1, 0}});
  for (double v : g.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("analytic gradient matches central finite differences") {
  SplitMix64 rng(777);
  int instances = 0;
  for (const int size : {4, 8}) {
    for (int round = 0; round < 60; ++round) {
      const int tokens = 1 + static_cast<int>(rng.below(2));
      const Grid z = random_grid(rng, tokens, size, size);
      std::vector<BoundingBox> boxes;
      for (int t = 0; t < tokens; ++t) boxes.push_back(random_box(rng, size, size, t));

      const Grid analytic = loss_gradient(z, boxes);
      // spot-check a third of the entries per instance
      for (std::size_t i = 0; i < analytic.values.size(); i += 3) {
        const double numeric = numeric_gradient_entry(z, boxes, i);
        const double a = analytic.values[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-10});
        CHECK(std::abs(a - numeric) / denom < 1e-5);
      }
      ++instances;
    }
  }
  CHECK(instances == 120);
}

TEST_CASE("one plain gradient step with zero momentum") {
  const auto scenario = make_scenario("single");
  GuidanceConfig cfg;
  cfg.momentum = 0.0;
  cfg.learning_rate = 0.1;
  cfg.max_iters = 1;
  cfg.loss_threshold = 1e-9;

  const Grid g0 = [&] {
    Grid sum(scenario.z0.tokens, scenario.z0.height, scenario.z0.width);
    const Grid gu = loss_gradient(scenario.z0, scenario.unet_boxes);
    const Grid gc = loss_gradient(scenario.z0, scenario.control_boxes);
    for (std::size_t i = 0; i < sum.values.size(); ++i)
      sum.values[i] = cfg.alpha * gu.values[i] + cfg.beta * gc.values[i];
    return sum;
  }();

  const GuidanceState state = run_guidance(scenario.z0, scenario.unet_boxes,
                                           scenario.control_boxes, cfg);
  REQUIRE(state.iterations == 1);
  for (std::size_t i = 0; i < state.latent.values.size(); ++i)
    CHECK(state.latent.values[i] ==
          doctest::Approx(scenario.z0.values[i] - 0.1 * g0.values[i])
              .epsilon(1e-12));
}

TEST_CASE("momentum composes velocities per the update rule") {
  const auto scenario = make_scenario("single");
  GuidanceConfig cfg;
  cfg.max_iters = 2;
  cfg.loss_threshold = 1e-9;

  // replicate two iterations by hand
  Grid z = scenario.z0;
  Grid v(z.tokens, z.height, z.width);
  for (int iter = 0; iter < 2; ++iter) {
    const Grid gu = loss_gradient(z, scenario.unet_boxes);
    const Grid gc = loss_gradient(z, scenario.control_boxes);
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      const double g = cfg.alpha * gu.values[i] + cfg.beta * gc.values[i];
      v.values[i] = cfg.momentum * v.values[i] - cfg.learning_rate * g;
      z.values[i] += v.values[i];
    }
  }

  const GuidanceState state = run_guidance(scenario.z0, scenario.unet_boxes,
                                           scenario.control_boxes, cfg);
  REQUIRE(state.iterations == 2);
  for (std::size_t i = 0; i < z.values.size(); ++i) {
    CHECK(state.latent.values[i] == doctest::Approx(z.values[i]).epsilon(1e-15));
    CHECK(state.velocity.values[i] == doctest::Approx(v.values[i]).epsilon(1e-15));
  }
}

TEST_CASE("standard scenario converges below the threshold with defaults") {
  const auto scenario = make_scenario("standard");
  const GuidanceState state = run_guidance(
      scenario.z0, scenario.unet_boxes, scenario.control_boxes, GuidanceConfig{});
  CHECK(state.outcome == GuidanceOutcome::Converged);
  CHECK(state.iterations <= 50);
  CHECK(state.trace.front().total == doctest::Approx(3.515625).epsilon(1e-12));
  CHECK(state.trace.back().total < 0.5);
  CHECK(state.trace.back().total < state.trace.front().total);
  CHECK(state.trace.size() == static_cast<std::size_t>(state.iterations) + 1);
}

// Regression fixture recorded from the kernel's standard run.
TEST_CASE("standard and single runs match the recorded traces") {
  {
    const auto s = make_scenario("standard");
    const GuidanceState state =
        run_guidance(s.z0, s.unet_boxes, s.control_boxes, GuidanceConfig{});
    CHECK(state.iterations == 43);
    CHECK(state.trace.front().total == 3.515625);  // (15/16)^2 * 4 exactly
    CHECK(state.trace.back().total ==
          doctest::Approx(0.429632055).epsilon(1e-8));
    CHECK(state.trace.back().unet ==
          doctest::Approx(0.214816028).epsilon(1e-8));
    const Grid attn = attention_from_scores(state.latent);
    CHECK(in_box_mass(attn, s.unet_boxes, 0) ==
          doctest::Approx(0.672268).epsilon(1e-5));
    CHECK(in_box_mass(attn, s.unet_boxes, 1) ==
          doctest::Approx(0.672268).epsilon(1e-5));
  }
  {
    const auto s = make_scenario("single");
    const GuidanceState state =
        run_guidance(s.z0, s.unet_boxes, s.control_boxes, GuidanceConfig{});
    CHECK(state.iterations == 38);
    CHECK(state.trace.back().total ==
          doctest::Approx(0.463093721).epsilon(1e-8));
  }
}

TEST_CASE("zero momentum with a small step is monotone") {
  const auto scenario = make_scenario("standard");
  GuidanceConfig cfg;
  cfg.momentum = 0.0;
  cfg.learning_rate = 0.05;
  const GuidanceState state = run_guidance(scenario.z0, scenario.unet_boxes,
                                           scenario.control_boxes, cfg);
  for (std::size_t i = 1; i < state.trace.size(); ++i)
    CHECK(state.trace[i].total <= state.trace[i - 1].total);
}

TEST_CASE("guidance runs are bit-identical") {
  const auto scenario = make_scenario("standard");
  const GuidanceState a = run_guidance(scenario.z0, scenario.unet_boxes,
                                       scenario.control_boxes, GuidanceConfig{});
  const GuidanceState b = run_guidance(scenario.z0, scenario.unet_boxes,
                                       scenario.control_boxes, GuidanceConfig{});
  REQUIRE(a.trace.size() == b.trace.size());
  CHECK(std::memcmp(a.latent.values.data(), b.latent.values.data(),
                    a.latent.values.size() * sizeof(double)) == 0);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].unet == b.trace[i].unet);
    CHECK(a.trace[i].control == b.trace[i].control);
    CHECK(a.trace[i].total == b.trace[i].total);
  }
}

TEST_CASE("overflowing updates stop with outcome Diverged") {
  const auto scenario = make_scenario("single");
  GuidanceConfig cfg;
  cfg.learning_rate = 1e15;
  cfg.alpha = 1e300;
  cfg.beta = 1e300;
  cfg.loss_threshold = 1e-300;
  const GuidanceState state = run_guidance(scenario.z0, scenario.unet_boxes,
                                           scenario.control_boxes, cfg);
  CHECK(state.outcome == GuidanceOutcome::Diverged);
  CHECK(state.trace.size() >= 1);
}

TEST_CASE("guidance config is validated") {
  const auto scenario = make_scenario("single");
  GuidanceConfig bad;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(run_guidance(scenario.z0, scenario.unet_boxes,
                               scenario.control_boxes, bad),
                  Error);
  GuidanceConfig negative;
  negative.loss_threshold = 0.0;
  CHECK_THROWS_AS(run_guidance(scenario.z0, scenario.unet_boxes,
                               scenario.control_boxes, negative),
                  Error);
  CHECK_THROWS_AS(make_scenario("nope"), Error);
}
