#include "ctxemo/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ctxemo::data {

SkeletonSequence::SkeletonSequence(std::string id, std::size_t t)
    : clip_id(std::move(id)), frames(t), joints(kJointChannels * t * kNumJoints, 0.0) {}

void SkeletonSequence::validate() const {
  if (frames == 0) throw std::invalid_argument("clip '" + clip_id + "' has no frames");
  if (joints.size() != kJointChannels * frames * kNumJoints) {
    throw std::invalid_argument("clip '" + clip_id + "' joint array has " +
                                std::to_string(joints.size()) + " values, expected 3x" +
                                std::to_string(frames) + "x18");
  }
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < kNumJoints; ++v) {
      const double c = at(2, t, v);
      if (!(c >= 0.0 && c <= 1.0)) {
        throw std::invalid_argument("clip '" + clip_id + "' has joint confidence " +
                                    std::to_string(c) + " outside [0,1]");
      }
      if (!std::isfinite(at(0, t, v)) || !std::isfinite(at(1, t, v))) {
        throw std::invalid_argument("clip '" + clip_id + "' has non-finite joint coordinates");
      }
    }
  }
  annotation.validate(clip_id);
}

SkeletonSequence normalize_joints(const SkeletonSequence& seq) {
  struct Box {
    double x0, y0, x1, y1;
    double area() const { return (x1 - x0) * (y1 - y0); }
  };
  bool found = false;
  Box best{0, 0, 0, 0};
  for (std::size_t t = 0; t < seq.frames; ++t) {
    bool any = false;
    Box b{0, 0, 0, 0};
    for (std::size_t v = 0; v < kNumJoints; ++v) {
      if (seq.at(2, t, v) <= 0.0) continue;
      const double x = seq.at(0, t, v), y = seq.at(1, t, v);
      if (!any) {
        b = {x, y, x, y};
        any = true;
      } else {
        b = {std::min(b.x0, x), std::min(b.y0, y), std::max(b.x1, x), std::max(b.y1, y)};
      }
    }
    if (any && (!found || b.area() > best.area())) {
      best = b;
      found = true;
    }
  }
  SkeletonSequence out = seq;
  if (!found) {
    spdlog::warn("clip '{}' has no confident joints; coordinates left unnormalized", seq.clip_id);
    return out;
  }
  double w = best.x1 - best.x0, h = best.y1 - best.y0;
  if (w == 0.0 || h == 0.0) {
    spdlog::warn("clip '{}' has a degenerate joint bounding box ({} x {})", seq.clip_id, w, h);
    if (w == 0.0) w = 1.0;
    if (h == 0.0) h = 1.0;
  }
  for (std::size_t t = 0; t < seq.frames; ++t) {
    for (std::size_t v = 0; v < kNumJoints; ++v) {
      out.at(0, t, v) = std::clamp((seq.at(0, t, v) - best.x0) / w, 0.0, 1.0);
      out.at(1, t, v) = std::clamp((seq.at(1, t, v) - best.y0) / h, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<double> pad_sequence(const SkeletonSequence& seq, std::size_t t_max, PadMode mode,
                                 Rng* rng, std::size_t* offset) {
  if (seq.frames > t_max) {
    throw std::invalid_argument("clip '" + seq.clip_id + "' has " + std::to_string(seq.frames) +
                                " frames, more than the padded length " + std::to_string(t_max));
  }
  std::size_t o = 0;
  if (mode == PadMode::kTrain && seq.frames < t_max) {
    if (rng == nullptr) throw std::invalid_argument("training-mode padding needs a random generator");
    o = rng->uniform_int(t_max - seq.frames + 1);
  }
  if (offset) *offset = o;
  std::vector<double> out(kJointChannels * t_max * kNumJoints, 0.0);
  for (std::size_t c = 0; c < kJointChannels; ++c)
    for (std::size_t t = 0; t < seq.frames; ++t)
      for (std::size_t v = 0; v < kNumJoints; ++v)
        out[(c * t_max + t + o) * kNumJoints + v] = seq.at(c, t, v);
  return out;
}

std::vector<AffineParams> interpolate_affine(const std::vector<AffineParams>& anchors,
                                             std::size_t frames) {
  if (anchors.empty()) throw std::invalid_argument("affine schedule needs at least one anchor");
  if (anchors.size() == 1 || frames <= 1) return std::vector<AffineParams>(frames, anchors[0]);
  const std::size_t a = anchors.size();
  std::vector<AffineParams> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    // Anchor i sits at position i (T-1)/(A-1).
    const double pos = static_cast<double>(t) * static_cast<double>(a - 1) /
                       static_cast<double>(frames - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(pos), a - 2);
    const double f = pos - static_cast<double>(i);
    const auto& p = anchors[i];
    const auto& q = anchors[i + 1];
    auto lerp = [f](double u, double v) { return f == 0.0 ? u : (f == 1.0 ? v : u + f * (v - u)); };
    out[t] = {lerp(p.rotation_deg, q.rotation_deg), lerp(p.scale, q.scale), lerp(p.tx, q.tx),
              lerp(p.ty, q.ty)};
  }
  return out;
}

SkeletonSequence apply_affine(const SkeletonSequence& seq,
                              const std::vector<AffineParams>& per_frame) {
  if (per_frame.size() != seq.frames) {
    throw std::invalid_argument("affine schedule length differs from the clip length");
  }
  SkeletonSequence out = seq;
  for (std::size_t t = 0; t < seq.frames; ++t) {
    const auto& p = per_frame[t];
    if (p.identity()) continue;
    const double theta = p.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta) * p.scale, s = std::sin(theta) * p.scale;
    for (std::size_t v = 0; v < kNumJoints; ++v) {
      const double x = seq.at(0, t, v) - 0.5, y = seq.at(1, t, v) - 0.5;
      out.at(0, t, v) = std::clamp(c * x - s * y + 0.5 + p.tx, 0.0, 1.0);
      out.at(1, t, v) = std::clamp(s * x + c * y + 0.5 + p.ty, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<AffineParams> sample_affine_anchors(const AffineLimits& limits, Rng& rng) {
  if (limits.anchors == 0) throw std::invalid_argument("affine augmentation needs anchors >= 1");
  std::vector<AffineParams> anchors(limits.anchors);
  for (auto& p : anchors) {
    // Zero limits yield exact identity parameters.
    auto draw = [&](double m) { return m == 0.0 ? 0.0 : rng.uniform(-m, m); };
    p.rotation_deg = draw(limits.max_rotation_deg);
    p.scale = 1.0 + draw(limits.max_scale_delta);
    p.tx = draw(limits.max_translation);
    p.ty = draw(limits.max_translation);
  }
  return anchors;
}

SkeletonSequence random_affine(const SkeletonSequence& seq, const AffineLimits& limits, Rng& rng) {
  return apply_affine(seq, interpolate_affine(sample_affine_anchors(limits, rng), seq.frames));
}

double discretize_flow(double displacement, double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("flow bound must be positive");
  const double u = (std::clamp(displacement, -bound, bound) + bound) / (2.0 * bound);
  return std::round(u * 255.0);
}

FlowVolume stack_flow(std::span<const FlowField> fields, double bound) {
  if (fields.empty()) throw std::invalid_argument("stack_flow needs at least one flow field");
  if (fields.size() > kFlowStack) {
    throw std::invalid_argument("stack_flow takes at most 5 fields, got " +
                                std::to_string(fields.size()));
  }
  const std::size_t h = fields[0].height, w = fields[0].width;
  for (const auto& f : fields) {
    if (f.height != h || f.width != w || f.dx.size() != h * w || f.dy.size() != h * w) {
      throw std::invalid_argument("flow fields differ in spatial size");
    }
  }
  FlowVolume vol;
  vol.height = h;
  vol.width = w;
  vol.replicated = kFlowStack - fields.size();
  vol.data.resize(kFlowChannels * h * w);
  for (std::size_t l = 0; l < kFlowStack; ++l) {
    const auto& f = fields[std::min(l, fields.size() - 1)];
    for (std::size_t i = 0; i < h * w; ++i) {
      vol.data[(2 * l) * h * w + i] = discretize_flow(f.dx[i], bound);
      vol.data[(2 * l + 1) * h * w + i] = discretize_flow(f.dy[i], bound);
    }
  }
  return vol;
}

}  // namespace ctxemo::data
