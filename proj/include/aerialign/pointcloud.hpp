#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "aerialign/geometry.hpp"

namespace aer {

/// 3D points with optional per-point intensity in [0, 1].
/// Immutable by convention once built; transforms return new clouds.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<float> intensity;  // empty, or one value per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_intensity() const { return !intensity.empty(); }

  /// Throws InvalidParameter if the intensity length or finiteness
  /// invariants are violated.
  void validate() const;
};

PointCloud transform_cloud(const Pose3& pose, const PointCloud& cloud);

/// k-d tree over a cloud's points. Build is single-threaded; queries are
/// const and safe to run concurrently.
class SpatialIndex {
 public:
  explicit SpatialIndex(const PointCloud& cloud);

  /// k nearest neighbors sorted by ascending squared distance.
  /// Throws EmptyCloud on an empty cloud, InvalidParameter for bad k.
  std::vector<std::pair<std::uint32_t, double>> nearest_neighbors(
      const Vec3& query, std::size_t k) const;

  /// Neighbors with squared distance <= max_sq_dist, sorted ascending.
  std::vector<std::pair<std::uint32_t, double>> radius_neighbors(
      const Vec3& query, double max_sq_dist) const;

  /// Single nearest neighbor; (index, squared distance).
  std::pair<std::uint32_t, double> nearest(const Vec3& query) const;

  std::size_t size() const { return pts_.size(); }

 private:
  struct Node {
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;  // leaf range into order_
    std::uint32_t end = 0;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// One centroid per occupied voxel; intensity averaged when present.
PointCloud voxel_downsample(const PointCloud& cloud, double cell);

/// Per-point covariance of the k nearest neighbors, regularized
/// plane-to-plane: eigenvalues replaced by (1, 1, eps) in the local
/// eigenbasis. Boundary points with fewer than k neighbors use all
/// available if at least 3.
std::vector<Mat3> local_covariances(const PointCloud& cloud, std::size_t k,
                                    double eps = 1e-3);

}  // namespace aer
