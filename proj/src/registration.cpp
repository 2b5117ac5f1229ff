#include "aerialign/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "aerialign/errors.hpp"

namespace aer {

PreparedCloud prepare_cloud(const PointCloud& cloud,
                            const RegistrationParams& params) {
  PreparedCloud out;
  out.cloud = params.voxel > 0.0 ? voxel_downsample(cloud, params.voxel) : cloud;
  if (out.cloud.size() < params.min_points) {
    throw TooFewPoints("cloud has " + std::to_string(out.cloud.size()) +
                       " points after downsampling, need " +
                       std::to_string(params.min_points));
  }
  std::size_t k = std::min(params.cov_neighbors, out.cloud.size());
  out.covariances = local_covariances(out.cloud, k, params.cov_eps);
  out.normals.reserve(out.covariances.size());
  for (const Mat3& cov : out.covariances) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    out.normals.push_back(eig.eigenvectors().col(0));
  }
  out.index = std::make_shared<SpatialIndex>(out.cloud);
  return out;
}

namespace {

struct Correspondence {
  std::uint32_t src = 0;
  std::uint32_t tgt = 0;
  Mat3 info = Mat3::Identity();  // inv(C_tgt + R C_src R^T)
  Vec3 residual = Vec3::Zero();  // q - T p
};

struct Objective {
  std::vector<Correspondence> corr;
  double cost = 0.0;    // sum of squared Mahalanobis residuals
  double mean_sq = 0.0; // cost / (3 n - 6)
};

Objective build_objective(const PreparedCloud& source,
                          const PreparedCloud& target, const Pose3& pose,
                          const RegistrationParams& params) {
  Objective obj;
  Mat3 r = pose.rotation.toRotationMatrix();
  double gate_sq = params.max_corr_dist * params.max_corr_dist;
  std::vector<Correspondence> candidates;
  std::vector<double> m2s;
  candidates.reserve(source.cloud.size());
  for (std::uint32_t i = 0; i < source.cloud.size(); ++i) {
    Vec3 pw = r * source.cloud.points[i] + pose.translation;
    auto [j, d2] = target.index->nearest(pw);
    if (d2 > gate_sq) continue;
    Correspondence c;
    c.src = i;
    c.tgt = j;
    Mat3 combined = target.covariances[j] + r * source.covariances[i] * r.transpose();
    c.info = combined.inverse();
    c.residual = target.cloud.points[j] - pw;
    m2s.push_back(c.residual.dot(c.info * c.residual));
    candidates.push_back(c);
  }
  if (candidates.empty()) return obj;

  // trim at `mahalanobis_trim` sigmas of the current error level: the
  // threshold anneals with the median so a large initial offset does not
  // reject every informative correspondence
  std::vector<double> sorted = m2s;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  double med = sorted[sorted.size() / 2];
  double trim_sq = params.mahalanobis_trim * params.mahalanobis_trim;
  double threshold = trim_sq * std::max(1.0, med);

  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (m2s[i] > threshold) continue;
    sum += m2s[i];
    obj.corr.push_back(candidates[i]);
  }
  std::size_t n = obj.corr.size();
  // mean objective: comparable across iterations even as the trim set changes
  obj.cost = n > 0 ? sum / static_cast<double>(n) : 0.0;
  obj.mean_sq = n > 2 ? sum / static_cast<double>(3 * n - 6) : 0.0;
  return obj;
}

double condition_number(const Mat6& h) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(h);
  double lo = eig.eigenvalues()[0];
  double hi = eig.eigenvalues()[5];
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// Conditioning probe built from normal-direction information only. The
// in-plane weight left by the (1,1,eps) regularization would hide
// unconstrained sliding along a single plane, so it is excluded here.
double geometric_condition(const PreparedCloud& source,
                           const PreparedCloud& target, const Pose3& pose,
                           const std::vector<Correspondence>& corr) {
  Mat3 r = pose.rotation.toRotationMatrix();
  Mat6 h = Mat6::Zero();
  for (const Correspondence& c : corr) {
    Eigen::Matrix<double, 3, 6> j;
    j.leftCols<3>() = r * skew(source.cloud.points[c.src]);
    j.rightCols<3>() = -r;
    const Vec3& n = target.normals[c.tgt];
    Vec6 jn = j.transpose() * n;
    h += jn * jn.transpose();
  }
  return condition_number(h);
}

}  // namespace

RegistrationResult gicp_register(const PreparedCloud& source,
                                 const PreparedCloud& target, const Pose3& init,
                                 const RegistrationParams& params) {
  if (!init.translation.allFinite()) {
    throw InvalidParameter("non-finite initial transform");
  }
  RegistrationResult result;
  result.transform = init;

  Pose3 pose = init;
  Objective obj = build_objective(source, target, pose, params);
  result.cost_history.push_back(obj.cost);
  Mat6 h = Mat6::Zero();

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (obj.corr.size() < 6) {
      result.degenerate = true;
      break;
    }
    Mat3 r = pose.rotation.toRotationMatrix();
    h.setZero();
    Vec6 b = Vec6::Zero();
    for (const Correspondence& c : obj.corr) {
      // residual d = q - (R p + t); right-multiplicative tangent [w | v]
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = r * skew(source.cloud.points[c.src]);
      j.rightCols<3>() = -r;
      Mat3 info = c.info;
      h += j.transpose() * info * j;
      b -= j.transpose() * info * c.residual;
    }
    if (iter == 0 && geometric_condition(source, target, pose, obj.corr) >
                         params.condition_threshold) {
      result.degenerate = true;
      break;
    }
    Eigen::LDLT<Mat6> ldlt(h);
    if (ldlt.info() != Eigen::Success) {
      result.degenerate = true;
      break;
    }
    Vec6 delta = ldlt.solve(b);
    if (!delta.allFinite()) {
      result.degenerate = true;
      break;
    }

    // step halving keeps the objective non-increasing under fresh
    // correspondences
    bool accepted = false;
    Objective next;
    Pose3 next_pose;
    double step = 1.0;
    for (int half = 0; half < 8; ++half) {
      next_pose = retract(pose, step * delta);
      next = build_objective(source, target, next_pose, params);
      if (next.corr.size() >= 6 && next.cost <= obj.cost) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.converged = true;
      break;
    }
    pose = next_pose;
    obj = std::move(next);
    result.cost_history.push_back(obj.cost);
    result.iterations = iter + 1;
    if ((step * delta).norm() < params.update_norm_tol) {
      result.converged = true;
      break;
    }
  }

  if (!result.degenerate && !obj.corr.empty() &&
      geometric_condition(source, target, pose, obj.corr) >
          params.condition_threshold) {
    result.degenerate = true;
  }

  result.transform = pose;
  result.fitness = source.cloud.empty()
                       ? 0.0
                       : static_cast<double>(obj.corr.size()) /
                             static_cast<double>(source.cloud.size());
  if (params.fixed_covariance || result.degenerate) {
    Vec6 d;
    d << params.fixed_rot_var, params.fixed_rot_var, params.fixed_rot_var,
        params.fixed_trans_var, params.fixed_trans_var, params.fixed_trans_var;
    result.covariance = d.asDiagonal();
  } else {
    // scaled inverse Hessian; floor keeps the matrix usable as a factor
    // covariance even on near-perfect fits
    double scale = std::max(obj.mean_sq, 1e-8);
    result.covariance = scale * h.inverse();
    Eigen::SelfAdjointEigenSolver<Mat6> eig(result.covariance);
    if (eig.eigenvalues()[0] < 1e-12) {
      result.covariance += (1e-12 - eig.eigenvalues()[0]) * Mat6::Identity();
    }
  }
  return result;
}

RegistrationResult gicp_register(const PointCloud& source,
                                 const PointCloud& target, const Pose3& init,
                                 const RegistrationParams& params) {
  return gicp_register(prepare_cloud(source, params),
                       prepare_cloud(target, params), init, params);
}

}  // namespace aer
