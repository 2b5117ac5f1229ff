#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "aerialign/pointcloud.hpp"
#include "aerialign/rng.hpp"

using namespace aer;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double extent) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(rng.uniform(-extent, extent),
                          rng.uniform(-extent, extent),
                          rng.uniform(-extent, extent));
  }
  return c;
}

std::vector<std::pair<std::uint32_t, double>> brute_force_knn(
    const PointCloud& c, const Vec3& q, std::size_t k) {
  std::vector<std::pair<std::uint32_t, double>> all;
  for (std::uint32_t i = 0; i < c.size(); ++i) {
    all.emplace_back(i, (c.points[i] - q).squaredNorm());
  }
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  all.resize(k);
  return all;
}

// independent grid binning used as the downsample oracle
PointCloud naive_grid_downsample(const PointCloud& c, double cell) {
  struct Bin {
    Vec3 sum = Vec3::Zero();
    int n = 0;
  };
  std::map<std::tuple<long, long, long>, Bin> bins;
  for (const Vec3& p : c.points) {
    auto key = std::make_tuple(static_cast<long>(std::floor(p.x() / cell)),
                               static_cast<long>(std::floor(p.y() / cell)),
                               static_cast<long>(std::floor(p.z() / cell)));
    Bin& bin = bins[key];
    bin.sum += p;
    bin.n += 1;
  }
  PointCloud out;
  for (auto& [key, acc] : bins) out.points.push_back(acc.sum / acc.n);
  return out;
}

// cyclic Jacobi eigen solver for symmetric 3x3, used as the eigen oracle
void jacobi_eigen(Mat3 a, Mat3& vecs, Vec3& vals) {
  vecs = Mat3::Identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        Mat3 rot = Mat3::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        vecs = vecs * rot;
      }
    }
  }
  vals = a.diagonal();
}

}  // namespace

TEST_CASE("exact query returns the point itself at distance zero") {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}};
  SpatialIndex idx(c);
  auto nn = idx.nearest_neighbors(Vec3(1, 0, 0), 1);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].first == 1);
  CHECK(nn[0].second == doctest::Approx(0.0));
}

TEST_CASE("knn matches exhaustive scan on a random 200-point cloud") {
  Rng rng(21);
  PointCloud c = random_cloud(rng, 200, 10.0);
  SpatialIndex idx(c);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 q(rng.uniform(-12, 12), rng.uniform(-12, 12), rng.uniform(-12, 12));
    auto got = idx.nearest_neighbors(q, 5);
    auto expected = brute_force_knn(c, q, 5);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].first == expected[i].first);
      CHECK(got[i].second == doctest::Approx(expected[i].second));
    }
  }
}

TEST_CASE("k beyond cloud size and empty clouds are rejected") {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}};
  SpatialIndex idx(c);
  CHECK_THROWS_AS(idx.nearest_neighbors(Vec3::Zero(), 3), InvalidParameter);
  PointCloud empty;
  SpatialIndex eidx(empty);
  CHECK_THROWS_AS(eidx.nearest_neighbors(Vec3::Zero(), 1), EmptyCloud);
}

TEST_CASE("radius query matches brute force") {
  Rng rng(22);
  PointCloud c = random_cloud(rng, 300, 5.0);
  SpatialIndex idx(c);
  Vec3 q(0.5, -0.25, 1.0);
  double r2 = 4.0;
  auto got = idx.radius_neighbors(q, r2);
  std::size_t expected = 0;
  for (const Vec3& p : c.points)
    if ((p - q).squaredNorm() <= r2) ++expected;
  CHECK(got.size() == expected);
  for (std::size_t i = 1; i < got.size(); ++i)
    CHECK(got[i - 1].second <= got[i].second);
}

TEST_CASE("single-cell cloud collapses to its mean") {
  PointCloud c;
  c.points = {{0.1, 0.1, 0.1}, {0.2, 0.3, 0.1}, {0.3, 0.2, 0.2}};
  PointCloud d = voxel_downsample(c, 1.0);
  REQUIRE(d.size() == 1);
  CHECK((d.points[0] - Vec3(0.2, 0.2, 4.0 / 30.0)).norm() < 1e-12);
}

TEST_CASE("separated clusters stay separate") {
  PointCloud c;
  c.points = {{0.1, 0.1, 0.0}, {0.2, 0.2, 0.0}, {5.1, 0.1, 0.0}, {5.2, 0.2, 0.0}};
  PointCloud d = voxel_downsample(c, 1.0);
  CHECK(d.size() == 2);
}

TEST_CASE("downsample matches the naive grid oracle and is idempotent") {
  Rng rng(23);
  PointCloud c = random_cloud(rng, 2000, 8.0);
  PointCloud got = voxel_downsample(c, 0.5);
  PointCloud expected = naive_grid_downsample(c, 0.5);
  REQUIRE(got.size() == expected.size());
  // both outputs are sorted by cell key, so rows line up after sorting
  auto sorter = [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(),
                                        b.data() + 3);
  };
  std::sort(got.points.begin(), got.points.end(), sorter);
  std::sort(expected.points.begin(), expected.points.end(), sorter);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK((got.points[i] - expected.points[i]).norm() < 1e-12);
  }
  PointCloud twice = voxel_downsample(got, 0.5);
  REQUIRE(twice.size() == got.size());
  std::sort(twice.points.begin(), twice.points.end(), sorter);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK((twice.points[i] - got.points[i]).norm() < 1e-12);
  }
}

TEST_CASE("non-positive cell is rejected") {
  PointCloud c;
  c.points = {{0, 0, 0}};
  CHECK_THROWS_AS(voxel_downsample(c, 0.0), InvalidParameter);
  CHECK_THROWS_AS(voxel_downsample(c, -1.0), InvalidParameter);
}

TEST_CASE("planar cloud yields +/-z as the smallest eigenvector") {
  Rng rng(24);
  PointCloud c;
  for (int i = 0; i < 100; ++i) {
    c.points.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0);
  }
  auto covs = local_covariances(c, 10);
  for (const Mat3& cov : covs) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0);
    CHECK(std::abs(std::abs(normal.z()) - 1.0) < 1e-9);
  }
}

TEST_CASE("regularized eigenvalues are exactly (eps, 1, 1)") {
  Rng rng(25);
  PointCloud c = random_cloud(rng, 200, 3.0);
  auto covs = local_covariances(c, 20);
  for (const Mat3& cov : covs) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    CHECK(eig.eigenvalues()[0] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(eig.eigenvalues()[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(eig.eigenvalues()[2] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(eig.eigenvalues()[0] >= 1e-3 - 1e-12);
  }
}

TEST_CASE("covariances match a Jacobi eigen solver oracle") {
  Rng rng(26);
  PointCloud c = random_cloud(rng, 120, 4.0);
  std::size_t k = 12;
  auto covs = local_covariances(c, k);
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto nn = brute_force_knn(c, c.points[i], k);
    Vec3 mean = Vec3::Zero();
    for (auto& [id, d2] : nn) mean += c.points[id];
    mean /= static_cast<double>(k);
    Mat3 raw = Mat3::Zero();
    for (auto& [id, d2] : nn) {
      Vec3 d = c.points[id] - mean;
      raw += d * d.transpose();
    }
    raw /= static_cast<double>(k);
    Mat3 vecs;
    Vec3 vals;
    jacobi_eigen(raw, vecs, vals);
    // rebuild the plane-to-plane regularized matrix from the oracle basis
    int smallest = 0;
    vals.minCoeff(&smallest);
    Mat3 expected = Mat3::Zero();
    for (int j = 0; j < 3; ++j) {
      double lam = (j == smallest) ? 1e-3 : 1.0;
      expected += lam * vecs.col(j) * vecs.col(j).transpose();
    }
    CHECK((covs[i] - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("covariance neighborhood larger than cloud is rejected") {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(local_covariances(c, 3), InsufficientPoints);
}
