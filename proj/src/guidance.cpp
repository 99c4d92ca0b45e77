#include "spateval/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spateval/error.hpp"

namespace spateval {

namespace {

void validate_boxes(const Grid& grid, const std::vector<BoundingBox>& boxes) {
  for (const auto& b : boxes) {
    if (b.token < 0 || b.token >= grid.tokens)
      throw Error(ErrorCode::InvalidArgument,
                  "box token " + std::to_string(b.token) + " out of range");
    if (!(0 <= b.x0 && b.x0 < b.x1 && b.x1 <= grid.width) ||
        !(0 <= b.y0 && b.y0 < b.y1 && b.y1 <= grid.height))
      throw Error(ErrorCode::InvalidArgument, "box exceeds grid bounds");
  }
}

double token_total(const Grid& g, int t) {
  double sum = 0.0;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) sum += g.at(t, y, x);
  return sum;
}

double box_sum(const Grid& g, const BoundingBox& b) {
  double sum = 0.0;
  for (int y = b.y0; y < b.y1; ++y)
    for (int x = b.x0; x < b.x1; ++x) sum += g.at(b.token, y, x);
  return sum;
}

bool all_finite(const Grid& g) {
  for (double v : g.values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

const char* guidance_outcome_name(GuidanceOutcome o) {
  switch (o) {
    case GuidanceOutcome::Converged: return "converged";
    case GuidanceOutcome::MaxIters:  return "max_iters";
    case GuidanceOutcome::Diverged:  return "diverged";
  }
  return "unknown";
}

Grid attention_from_scores(const Grid& scores) {
  if (!all_finite(scores))
    throw Error(ErrorCode::NonFiniteInput, "latent scores are not finite");

  Grid attn(scores.tokens, scores.height, scores.width);
  for (int t = 0; t < scores.tokens; ++t) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < scores.height; ++y)
      for (int x = 0; x < scores.width; ++x)
        max_score = std::max(max_score, scores.at(t, y, x));
    double denom = 0.0;
    for (int y = 0; y < scores.height; ++y)
      for (int x = 0; x < scores.width; ++x) {
        const double e = std::exp(scores.at(t, y, x) - max_score);
        attn.at(t, y, x) = e;
        denom += e;
      }
    for (int y = 0; y < scores.height; ++y)
      for (int x = 0; x < scores.width; ++x) attn.at(t, y, x) /= denom;
  }
  return attn;
}

double box_focus_loss(const Grid& attention,
                      const std::vector<BoundingBox>& boxes) {
  validate_boxes(attention, boxes);
  for (double v : attention.values)
    if (v < 0.0)
      throw Error(ErrorCode::InvalidArgument,
                  "attention values must be non-negative");

  double loss = 0.0;
  for (const auto& b : boxes) {
    const double denom = token_total(attention, b.token);
    if (denom == 0.0)
      throw Error(ErrorCode::ZeroAttentionDenominator,
                  "attention map of token " + std::to_string(b.token) +
                      " sums to zero");
    const double ratio = box_sum(attention, b) / denom;
    loss += (1.0 - ratio) * (1.0 - ratio);
  }
  return loss;
}

double total_loss(double l_unet, double l_control, double alpha, double beta) {
  return alpha * l_unet + beta * l_control;
}

Grid loss_gradient(const Grid& scores, const std::vector<BoundingBox>& boxes) {
  validate_boxes(scores, boxes);
  const Grid attn = attention_from_scores(scores);

  Grid grad(scores.tokens, scores.height, scores.width);
  for (const auto& b : boxes) {
    const double s = box_sum(attn, b);  // normalized maps sum to 1
    const double coeff = -2.0 * (1.0 - s);
    for (int y = 0; y < scores.height; ++y)
      for (int x = 0; x < scores.width; ++x) {
        const bool inside = (b.x0 <= x && x < b.x1 && b.y0 <= y && y < b.y1);
        const double indicator = inside ? 1.0 : 0.0;
        grad.at(b.token, y, x) +=
            coeff * attn.at(b.token, y, x) * (indicator - s);
      }
  }
  return grad;
}

double in_box_mass(const Grid& attention, const std::vector<BoundingBox>& boxes,
                   int token) {
  std::vector<char> mask(attention.pixels(), 0);
  for (const auto& b : boxes) {
    if (b.token != token) continue;
    for (int y = b.y0; y < b.y1; ++y)
      for (int x = b.x0; x < b.x1; ++x)
        mask[static_cast<std::size_t>(y) * attention.width + x] = 1;
  }
  double mass = 0.0;
  for (int y = 0; y < attention.height; ++y)
    for (int x = 0; x < attention.width; ++x)
      if (mask[static_cast<std::size_t>(y) * attention.width + x])
        mass += attention.at(token, y, x);
  return mass;
}

GuidanceState run_guidance(const Grid& z0,
                           const std::vector<BoundingBox>& unet_boxes,
                           const std::vector<BoundingBox>& control_boxes,
                           const GuidanceConfig& cfg) {
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw Error(ErrorCode::InvalidArgument, "momentum must be in [0, 1)");
  if (cfg.learning_rate < 0.0)
    throw Error(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (cfg.max_iters <= 0)
    throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (cfg.loss_threshold <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "loss threshold must be positive");
  if (cfg.alpha < 0.0 || cfg.beta < 0.0)
    throw Error(ErrorCode::InvalidArgument, "alpha and beta must be >= 0");
  validate_boxes(z0, unet_boxes);
  validate_boxes(z0, control_boxes);

  GuidanceState state;
  state.latent = z0;
  state.velocity = Grid(z0.tokens, z0.height, z0.width);

  auto losses_at = [&](const Grid& z) {
    const Grid attn = attention_from_scores(z);
    TraceEntry e;
    e.unet = box_focus_loss(attn, unet_boxes);
    e.control = box_focus_loss(attn, control_boxes);
    e.total = total_loss(e.unet, e.control, cfg.alpha, cfg.beta);
    return e;
  };

  TraceEntry current = losses_at(state.latent);
  state.trace.push_back(current);
  if (current.total < cfg.loss_threshold) {
    state.outcome = GuidanceOutcome::Converged;
    return state;
  }

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Grid g_unet = loss_gradient(state.latent, unet_boxes);
    const Grid g_control = loss_gradient(state.latent, control_boxes);
    for (std::size_t i = 0; i < state.latent.values.size(); ++i) {
      const double g =
          cfg.alpha * g_unet.values[i] + cfg.beta * g_control.values[i];
      state.velocity.values[i] =
          cfg.momentum * state.velocity.values[i] - cfg.learning_rate * g;
      state.latent.values[i] += state.velocity.values[i];
    }

    if (!all_finite(state.latent)) {
      state.outcome = GuidanceOutcome::Diverged;
      return state;
    }
    current = losses_at(state.latent);
    if (!std::isfinite(current.total)) {
      state.outcome = GuidanceOutcome::Diverged;
      return state;
    }
    state.trace.push_back(current);
    state.iterations = iter;
    if (current.total < cfg.loss_threshold) {
      state.outcome = GuidanceOutcome::Converged;
      return state;
    }
  }
  state.outcome = GuidanceOutcome::MaxIters;
  return state;
}

GuidanceScenario make_scenario(const std::string& name) {
  GuidanceScenario s;
  s.name = name;
  if (name == "standard") {
    s.z0 = Grid(2, 8, 8);
    s.unet_boxes = {{1, 1, 3, 3, 0}, {4, 4, 6, 6, 1}};
    s.control_boxes = s.unet_boxes;
  } else if (name == "single") {
    s.z0 = Grid(1, 8, 8);
    s.unet_boxes = {{3, 3, 5, 5, 0}};
    s.control_boxes = s.unet_boxes;
  } else {
    throw Error(ErrorCode::InvalidArgument,
                "unknown guidance scenario '" + name + "'");
  }
  return s;
}

}  // namespace spateval
