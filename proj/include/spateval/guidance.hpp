#pragma once

#include <string>
#include <vector>

namespace spateval {

/// Dense tokens x height x width grid of doubles, row-major per token.
/// Used both for raw latent scores and for normalized attention maps.
struct Grid {
  int tokens = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int tokens_, int height_, int width_, double fill = 0.0)
      : tokens(tokens_), height(height_), width(width_),
        values(static_cast<std::size_t>(tokens_) * height_ * width_, fill) {}

  std::size_t index(int t, int y, int x) const {
    return (static_cast<std::size_t>(t) * height + y) * width + x;
  }
  double& at(int t, int y, int x) { return values[index(t, y, x)]; }
  double at(int t, int y, int x) const { return values[index(t, y, x)]; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

/// Half-open pixel box [x0,x1) x [y0,y1) bound to one token's map.
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  int token = 0;
};

struct GuidanceConfig {
  double momentum = 0.9;
  double learning_rate = 0.1;
  int max_iters = 50;
  double loss_threshold = 0.5;
  double alpha = 1.0;  // weight of the primary-model loss term
  double beta = 1.0;   // weight of the conditioning-model loss term
};

enum class GuidanceOutcome { Converged, MaxIters, Diverged };

const char* guidance_outcome_name(GuidanceOutcome o);

struct TraceEntry {
  double unet = 0.0;
  double control = 0.0;
  double total = 0.0;
};

struct GuidanceState {
  Grid latent;    // final score grid z
  Grid velocity;  // final momentum buffer v
  int iterations = 0;
  std::vector<TraceEntry> trace;  // initial loss plus one entry per iteration
  GuidanceOutcome outcome = GuidanceOutcome::MaxIters;
};

/// Per-token exp-normalization over all pixels: each token's map sums to 1.
/// Shift-invariant; throws NonFiniteInput on non-finite scores.
Grid attention_from_scores(const Grid& scores);

/// Sum over boxes of (1 - in-box mass / total mass)^2. Accepts raw
/// (unnormalized) grids; invariant under positive scaling. Throws
/// ZeroAttentionDenominator when a referenced token's map sums to zero.
double box_focus_loss(const Grid& attention, const std::vector<BoundingBox>& boxes);

double total_loss(double l_unet, double l_control, double alpha, double beta);

/// Analytic gradient of box_focus_loss(attention_from_scores(z), boxes) with
/// respect to z: per box with in-box mass s,
///   dL/dz_q = -2 (1 - s) A_q (1[q in box] - s).
Grid loss_gradient(const Grid& scores, const std::vector<BoundingBox>& boxes);

/// Momentum guidance loop:
///   v <- m v - eta grad(alpha L_unet + beta L_control),  z <- z + v
/// starting from v = 0, stopping after max_iters or once the total loss drops
/// below the threshold. A non-finite latent or loss stops the run with
/// outcome Diverged and the trace collected so far.
GuidanceState run_guidance(const Grid& z0,
                           const std::vector<BoundingBox>& unet_boxes,
                           const std::vector<BoundingBox>& control_boxes,
                           const GuidanceConfig& cfg);

/// Fraction of a token's normalized attention mass inside the union of that
/// token's boxes.
double in_box_mass(const Grid& attention, const std::vector<BoundingBox>& boxes,
                   int token);

struct GuidanceScenario {
  std::string name;
  Grid z0;
  std::vector<BoundingBox> unet_boxes;
  std::vector<BoundingBox> control_boxes;
};

/// Built-in demo scenarios:
///   "standard": two tokens on a uniform 8x8 grid, one 2x2 box per token,
///               shared by both loss terms.
///   "single":   one token on a uniform 8x8 grid with a 2x2 box.
/// Throws InvalidArgument for unknown names.
GuidanceScenario make_scenario(const std::string& name);

}  // namespace spateval
