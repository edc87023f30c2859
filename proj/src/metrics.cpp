#include "sata/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sata/graphrepr.hpp"

namespace sata::metrics {

namespace {

void check_compatible(const bvh::MotionClip& gt, const bvh::MotionClip& pred) {
  if (gt.skeleton.joint_count() != pred.skeleton.joint_count())
    throw Error("SkeletonMismatch", "joint counts differ");
  for (int i = 0; i < gt.skeleton.joint_count(); ++i)
    if (gt.skeleton.joints[i].name != pred.skeleton.joints[i].name ||
        gt.skeleton.joints[i].parent != pred.skeleton.joints[i].parent)
      throw Error("SkeletonMismatch", "joint '" + gt.skeleton.joints[i].name +
                                          "' differs between clips");
  if (gt.frame_count() != pred.frame_count())
    throw Error("LengthMismatch", std::to_string(gt.frame_count()) + " vs " +
                                      std::to_string(pred.frame_count()) + " frames");
}

}  // namespace

MetricReport geometric_metrics(const bvh::MotionClip& gt, const bvh::MotionClip& pred,
                               const std::vector<int>& contact_joints,
                               FsVariant fs_variant) {
  check_compatible(gt, pred);
  const int T = gt.frame_count();
  const int J = gt.skeleton.joint_count();
  const int root = gt.skeleton.root();

  MetricReport rep;
  auto gt_pos = kin::global_positions(gt);
  auto pred_pos = kin::global_positions(pred);

  double jr = 0.0, rt = 0.0, jp = 0.0;
  for (int t = 0; t < T; ++t) {
    rt += (gt.root_positions[t] - pred.root_positions[t]).norm();
    for (int j = 0; j < J; ++j) {
      jr += kin::geodesic_angle(gt.rotations[t][j], pred.rotations[t][j]);
      jp += (gt_pos[t][j] - pred_pos[t][j]).norm();
    }
  }
  rep.jr = jr / (static_cast<double>(T) * J);
  rep.rt = 100.0 * rt / T;
  rep.jp = 100.0 * jp / (static_cast<double>(T) * J);

  if (!contact_joints.empty()) {
    // ground and contact frames come from the ground truth
    const double height = std::max(gt.skeleton.rest_height(), 1e-9);
    auto contacts = repr::derive_contacts(gt_pos, gt.frame_time, contact_joints, height);
    std::vector<double> heights;
    for (int t = 0; t < T; ++t)
      for (int j : contact_joints) heights.push_back(gt_pos[t][j].y());
    std::sort(heights.begin(), heights.end());
    double ground = heights[static_cast<size_t>(0.02 * (heights.size() - 1))];

    double fs = 0.0;
    int fs_n = 0;
    for (int t = 1; t < T; ++t)
      for (int j : contact_joints) {
        if (!contacts[t][j]) continue;
        Eigen::Vector3d d = pred_pos[t][j] - pred_pos[t - 1][j];
        double drift = std::hypot(d.x(), d.z());
        if (fs_variant == FsVariant::HeightWeighted) {
          double h = std::max(0.0, pred_pos[t][j].y() - ground);
          drift *= std::max(0.0, 2.0 - std::pow(2.0, h / (0.05 * height)));
        }
        fs += drift;
        ++fs_n;
      }
    rep.fs = fs_n > 0 ? fs / fs_n : 0.0;

    double gp = 0.0;
    for (int t = 0; t < T; ++t)
      for (int j : contact_joints) gp += std::max(0.0, ground - pred_pos[t][j].y());
    rep.gp = 100.0 * gp / (static_cast<double>(T) * contact_joints.size());
  }
  return rep;
}

double retarget_error(const bvh::MotionClip& gt, const bvh::MotionClip& pred,
                      double target_height_m) {
  if (target_height_m <= 0.0) throw Error("NonPositiveHeight", "height must be > 0");
  check_compatible(gt, pred);
  const int T = gt.frame_count();
  const int J = gt.skeleton.joint_count();
  auto gt_pos = kin::global_positions(gt);
  auto pred_pos = kin::global_positions(pred);
  double acc = 0.0;
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < J; ++j) acc += (gt_pos[t][j] - pred_pos[t][j]).squaredNorm();
  return 1000.0 * acc / (static_cast<double>(T) * J * target_height_m * target_height_m);
}

}  // namespace sata::metrics
