#pragma once

#include "sata/kinematics.hpp"

namespace sata::metrics {

struct MetricReport {
  double jr = 0.0;  // mean geodesic joint-rotation error, radians
  double rt = 0.0;  // mean root position error, centimeters
  double jp = 0.0;  // mean global joint position error, centimeters
  double fs = 0.0;  // mean horizontal foot drift per frame on contact frames
  double gp = 0.0;  // mean ground penetration, centimeters
};

enum class FsVariant { Plain, HeightWeighted };

// Ground level is estimated from the ground-truth clip (2nd percentile of
// contact-joint heights), matching the contact derivation.
MetricReport geometric_metrics(const bvh::MotionClip& gt, const bvh::MotionClip& pred,
                               const std::vector<int>& contact_joints,
                               FsVariant fs_variant = FsVariant::Plain);

// Character-normalized MSE of global joint positions, scaled by 1000:
//   E = 1000 / (T*J) * sum ||p - p_hat||^2 / H^2
double retarget_error(const bvh::MotionClip& gt, const bvh::MotionClip& pred,
                      double target_height_m);

}  // namespace sata::metrics
