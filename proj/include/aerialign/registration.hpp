#pragma once

#include <memory>
#include <vector>

#include "aerialign/geometry.hpp"
#include "aerialign/pointcloud.hpp"

namespace aer {

struct RegistrationParams {
  double voxel = 0.4;            // downsample cell, <= 0 disables
  double max_corr_dist = 2.0;    // hard correspondence gate (m)
  double mahalanobis_trim = 3.0; // per-iteration trimming, in sigmas
  int max_iterations = 64;
  double update_norm_tol = 1e-6;
  std::size_t cov_neighbors = 20;
  double cov_eps = 1e-3;
  std::size_t min_points = 50;   // after downsampling, per side
  double condition_threshold = 1e10;
  /// When set, covariance is this fixed diagonal instead of the
  /// Hessian-derived estimate: [rot_var x3, trans_var x3].
  bool fixed_covariance = false;
  double fixed_rot_var = 1e-4;
  double fixed_trans_var = 1e-2;
};

/// Transform estimate source -> target with uncertainty. `degenerate` is a
/// flag, not an error: unconstrained geometry (e.g. a single plane) is
/// reported and left to the caller to skip.
struct RegistrationResult {
  Pose3 transform;
  Mat6 covariance = Mat6::Identity();
  double fitness = 0.0;  // inlier fraction in [0, 1]
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  std::vector<double> cost_history;  // accepted objective values
};

/// Downsampled cloud with its index and per-point plane-to-plane
/// covariances; build once and reuse across registrations.
struct PreparedCloud {
  PointCloud cloud;
  std::shared_ptr<const SpatialIndex> index;
  std::vector<Mat3> covariances;
  std::vector<Vec3> normals;  // smallest-eigenvector of each covariance
};

PreparedCloud prepare_cloud(const PointCloud& cloud,
                            const RegistrationParams& params);

/// Plane-to-plane GICP, Gauss-Newton with step halving on the Mahalanobis
/// objective. Pure function of its inputs; callers may run many
/// registrations in parallel.
RegistrationResult gicp_register(const PreparedCloud& source,
                                 const PreparedCloud& target,
                                 const Pose3& init,
                                 const RegistrationParams& params);

RegistrationResult gicp_register(const PointCloud& source,
                                 const PointCloud& target, const Pose3& init,
                                 const RegistrationParams& params);

}  // namespace aer
