#include "aerialign/pointcloud.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>

#include "aerialign/errors.hpp"

namespace aer {

void PointCloud::validate() const {
  if (!intensity.empty() && intensity.size() != points.size()) {
    throw InvalidParameter("intensity must have one value per point");
  }
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw InvalidParameter("non-finite point coordinate");
  }
}

PointCloud transform_cloud(const Pose3& pose, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  Mat3 r = pose.rotation.toRotationMatrix();
  for (const Vec3& p : cloud.points) out.points.push_back(r * p + pose.translation);
  out.intensity = cloud.intensity;
  return out;
}

namespace {
constexpr std::uint32_t kLeafSize = 16;
}

SpatialIndex::SpatialIndex(const PointCloud& cloud) : pts_(cloud.points) {
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!pts_.empty()) {
    nodes_.reserve(2 * pts_.size() / kLeafSize + 4);
    root_ = build(0, static_cast<std::uint32_t>(pts_.size()));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(pts_[order_[i]]);
    hi = hi.cwiseMax(pts_[order_[i]]);
  }
  Vec3 extent = hi - lo;
  int axis = 0;
  extent.maxCoeff(&axis);
  std::uint32_t mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return pts_[a][axis] < pts_[b][axis];
                   });
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = pts_[order_[mid]][axis];
  std::int32_t self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  std::int32_t left = build(begin, mid);
  std::int32_t right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::vector<std::pair<std::uint32_t, double>> SpatialIndex::nearest_neighbors(
    const Vec3& query, std::size_t k) const {
  if (pts_.empty()) throw EmptyCloud("nearest_neighbors on empty cloud");
  if (k < 1 || k > pts_.size()) {
    throw InvalidParameter("k must be in [1, cloud size]");
  }
  // max-heap of the best k candidates by squared distance
  using Cand = std::pair<double, std::uint32_t>;
  std::priority_queue<Cand> heap;

  auto visit = [&](auto&& self, std::int32_t ni) -> void {
    const Node& node = nodes_[ni];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        std::uint32_t id = order_[i];
        double d2 = (pts_[id] - query).squaredNorm();
        if (heap.size() < k) {
          heap.emplace(d2, id);
        } else if (d2 < heap.top().first) {
          heap.pop();
          heap.emplace(d2, id);
        }
      }
      return;
    }
    double diff = query[node.axis] - node.split;
    std::int32_t near = diff < 0.0 ? node.left : node.right;
    std::int32_t far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().first) {
      self(self, far);
    }
  };
  visit(visit, root_);

  std::vector<std::pair<std::uint32_t, double>> out(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    out[i] = {heap.top().second, heap.top().first};
    heap.pop();
  }
  return out;
}

std::vector<std::pair<std::uint32_t, double>> SpatialIndex::radius_neighbors(
    const Vec3& query, double max_sq_dist) const {
  std::vector<std::pair<std::uint32_t, double>> out;
  if (pts_.empty()) return out;
  auto visit = [&](auto&& self, std::int32_t ni) -> void {
    const Node& node = nodes_[ni];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        std::uint32_t id = order_[i];
        double d2 = (pts_[id] - query).squaredNorm();
        if (d2 <= max_sq_dist) out.emplace_back(id, d2);
      }
      return;
    }
    double diff = query[node.axis] - node.split;
    std::int32_t near = diff < 0.0 ? node.left : node.right;
    std::int32_t far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (diff * diff <= max_sq_dist) self(self, far);
  };
  visit(visit, root_);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

std::pair<std::uint32_t, double> SpatialIndex::nearest(const Vec3& query) const {
  return nearest_neighbors(query, 1).front();
}

PointCloud voxel_downsample(const PointCloud& cloud, double cell) {
  if (!(cell > 0.0)) throw InvalidParameter("voxel cell must be positive");
  struct Acc {
    Vec3 sum = Vec3::Zero();
    double intensity = 0.0;
    std::size_t n = 0;
  };
  // ordered map keeps the output deterministic
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, Acc> cells;
  bool with_intensity = cloud.has_intensity();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    auto key = std::make_tuple(
        static_cast<std::int64_t>(std::floor(p.x() / cell)),
        static_cast<std::int64_t>(std::floor(p.y() / cell)),
        static_cast<std::int64_t>(std::floor(p.z() / cell)));
    Acc& acc = cells[key];
    acc.sum += p;
    if (with_intensity) acc.intensity += cloud.intensity[i];
    acc.n += 1;
  }
  PointCloud out;
  out.points.reserve(cells.size());
  if (with_intensity) out.intensity.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    out.points.push_back(acc.sum / static_cast<double>(acc.n));
    if (with_intensity) {
      out.intensity.push_back(
          static_cast<float>(acc.intensity / static_cast<double>(acc.n)));
    }
  }
  return out;
}

std::vector<Mat3> local_covariances(const PointCloud& cloud, std::size_t k,
                                    double eps) {
  if (k < 3) throw InvalidParameter("covariance needs k >= 3");
  if (cloud.size() < k) {
    throw InsufficientPoints("cloud smaller than neighborhood size k");
  }
  SpatialIndex index(cloud);
  std::vector<Mat3> out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud.points) {
    auto nn = index.nearest_neighbors(p, k);
    Vec3 mean = Vec3::Zero();
    for (const auto& [id, d2] : nn) mean += cloud.points[id];
    mean /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& [id, d2] : nn) {
      Vec3 d = cloud.points[id] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nn.size());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // plane-to-plane regularization: unit disc with eps thickness along
    // the local normal (smallest eigenvector)
    Vec3 vals(eps, 1.0, 1.0);  // solver returns eigenvalues ascending
    out.push_back(eig.eigenvectors() * vals.asDiagonal() *
                  eig.eigenvectors().transpose());
  }
  return out;
}

}  // namespace aer
