#pragma once

#include "aerialign/geometry.hpp"
#include "aerialign/pointcloud.hpp"
#include "aerialign/rng.hpp"

namespace aer::testing {

inline Twist6 random_twist(Rng& rng, double max_angle, double max_trans) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  Vec3 w = axis * rng.uniform(0.0, max_angle);
  Vec3 t(rng.uniform(-max_trans, max_trans), rng.uniform(-max_trans, max_trans),
         rng.uniform(-max_trans, max_trans));
  return Twist6(w, t);
}

inline Pose3 random_pose(Rng& rng, double max_angle, double max_trans) {
  return exp_se3(random_twist(rng, max_angle, max_trans));
}

inline Mat6 random_spd_cov(Rng& rng, double rot_scale, double trans_scale) {
  Vec6 d;
  for (int i = 0; i < 3; ++i) d[i] = rot_scale * rng.uniform(0.5, 2.0);
  for (int i = 3; i < 6; ++i) d[i] = trans_scale * rng.uniform(0.5, 2.0);
  return d.cwiseAbs2().asDiagonal();
}

/// Two offset boxes plus a ground patch; anisotropic enough to pin all six
/// degrees of freedom in a registration.
inline PointCloud two_building_scene(Rng& rng, int points_per_face = 400) {
  PointCloud cloud;
  auto add_box = [&](const Vec3& center, const Vec3& size) {
    for (int i = 0; i < points_per_face; ++i) {
      // sample each face of the box
      for (int axis = 0; axis < 3; ++axis) {
        for (int side = -1; side <= 1; side += 2) {
          Vec3 p;
          for (int a = 0; a < 3; ++a) {
            p[a] = (a == axis) ? 0.5 * side * size[a]
                               : rng.uniform(-0.5, 0.5) * size[a];
          }
          cloud.points.push_back(center + p);
        }
      }
    }
  };
  add_box(Vec3(5.0, 3.0, 4.0), Vec3(8.0, 6.0, 8.0));
  add_box(Vec3(-6.0, -5.0, 2.5), Vec3(5.0, 9.0, 5.0));
  for (int i = 0; i < 6 * points_per_face; ++i) {
    cloud.points.emplace_back(rng.uniform(-15.0, 15.0),
                              rng.uniform(-15.0, 15.0), 0.0);
  }
  return cloud;
}

}  // namespace aer::testing
