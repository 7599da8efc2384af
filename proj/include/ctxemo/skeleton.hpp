#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctxemo/rng.hpp"
#include "ctxemo/types.hpp"

namespace ctxemo::data {

inline constexpr std::size_t kJointChannels = 3;  // x, y, confidence
inline constexpr std::size_t kNumJoints = 18;

/// Pose sequence stored channel-major as (3, T, 18).
struct SkeletonSequence {
  std::string clip_id;
  std::size_t frames = 0;
  std::vector<double> joints;
  EmotionAnnotation annotation;

  SkeletonSequence() = default;
  SkeletonSequence(std::string id, std::size_t t);

  double& at(std::size_t c, std::size_t t, std::size_t v) {
    return joints[(c * frames + t) * kNumJoints + v];
  }
  double at(std::size_t c, std::size_t t, std::size_t v) const {
    return joints[(c * frames + t) * kNumJoints + v];
  }

  /// Throws on shape errors or confidences outside [0,1].
  void validate() const;
  bool operator==(const SkeletonSequence&) const = default;
};

/// Maps x,y into [0,1] using the largest-area per-frame bounding box of the
/// joints with positive confidence. A zero-extent axis is divided by 1.
SkeletonSequence normalize_joints(const SkeletonSequence& seq);

enum class PadMode { kTrain, kEval };

/// Zero-pads to (3, t_max, 18). Eval places the data at frame 0; train at an
/// offset drawn uniformly from [0, t_max - T]. Writes the offset if asked.
std::vector<double> pad_sequence(const SkeletonSequence& seq, std::size_t t_max, PadMode mode,
                                 Rng* rng = nullptr, std::size_t* offset = nullptr);

struct AffineLimits {
  double max_rotation_deg = 10.0;
  double max_scale_delta = 0.1;
  double max_translation = 0.1;
  std::size_t anchors = 3;
};

/// One similarity transform about the point (0.5, 0.5).
struct AffineParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
  bool identity() const { return rotation_deg == 0.0 && scale == 1.0 && tx == 0.0 && ty == 0.0; }
};

/// Per-frame parameters, linearly interpolated between anchors placed at
/// frames round(i (T-1) / (A-1)). A single anchor applies to every frame.
std::vector<AffineParams> interpolate_affine(const std::vector<AffineParams>& anchors,
                                             std::size_t frames);

/// Applies per-frame transforms to x,y and clamps to [0,1].
SkeletonSequence apply_affine(const SkeletonSequence& seq,
                              const std::vector<AffineParams>& per_frame);

std::vector<AffineParams> sample_affine_anchors(const AffineLimits& limits, Rng& rng);

SkeletonSequence random_affine(const SkeletonSequence& seq, const AffineLimits& limits, Rng& rng);

/// Dense optical-flow field (horizontal and vertical displacements).
struct FlowField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> dx;
  std::vector<double> dy;
};

inline constexpr std::size_t kFlowStack = 5;
inline constexpr std::size_t kFlowChannels = 2 * kFlowStack;

/// (10, H, W) volume, channel order h1, v1, ..., h5, v5, values in [0, 255].
struct FlowVolume {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;
  std::size_t replicated = 0;  // tail fields filled by repeating the last one
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
};

/// Linear map of [-bound, bound] onto [0, 255], clamped, rounded to integers.
double discretize_flow(double displacement, double bound = 20.0);

/// Stacks up to 5 consecutive fields; fewer are padded by repeating the last.
FlowVolume stack_flow(std::span<const FlowField> fields, double bound = 20.0);

}  // namespace ctxemo::data
