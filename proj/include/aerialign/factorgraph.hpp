#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "aerialign/geometry.hpp"

namespace aer {

/// Unary pose prior. Houses GNSS anchors and per-node/per-tile scan-match
/// measurements; `robust` enables a Huber loss on the whitened residual.
struct PriorFactor {
  std::string id;
  Pose3 measured;
  Mat6 covariance = Mat6::Identity();
  bool robust = false;
};

/// Relative pose measurement a -> b (odometry, loop closures).
struct BetweenFactor {
  std::string a;
  std::string b;
  Pose3 measured;
  Mat6 covariance = Mat6::Identity();
};

/// Penalizes the difference between two variables' tangent vectors.
///
/// LogDifference computes log(A) - log(B) componentwise, which couples the
/// variables through the global log map; RelativeLog computes log(A^-1 B).
/// The two agree to first order for nearby poses.
struct SmoothnessFactor {
  enum class Mode { kLogDifference, kRelativeLog };
  std::string a;
  std::string b;
  Mat6 covariance = Mat6::Identity();
  Mode mode = Mode::kLogDifference;
};

using Factor = std::variant<PriorFactor, BetweenFactor, SmoothnessFactor>;

struct OptimizeParams {
  int max_iterations = 100;
  double relative_cost_tol = 1e-9;
  double update_norm_tol = 1e-8;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  double huber_delta = 1.0;  // whitened units
  int max_rejects = 16;
};

struct OptimizeReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  /// L2 norm of the stacked whitened residuals per factor class.
  std::map<std::string, double> residual_norms;
};

/// Nonlinear least squares over Pose3 variables, Levenberg-Marquardt with
/// right-multiplicative manifold updates and dense Cholesky solves.
/// Single-threaded during optimize; graphs may be moved between threads.
class FactorGraph {
 public:
  void add_variable(const std::string& id, const Pose3& initial);
  void add_factor(Factor factor);

  bool has_variable(const std::string& id) const;
  const Pose3& variable(const std::string& id) const;
  void set_variable(const std::string& id, const Pose3& value);

  const std::map<std::string, Pose3>& variables() const { return variables_; }
  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_factors() const { return factors_.size(); }

  /// Throws GaugeUnfixed if any connected component lacks a prior,
  /// NumericalFailure on non-finite cost.
  OptimizeReport optimize(const OptimizeParams& params = {});

  /// Line-oriented text format, one variable or factor per line:
  ///   VAR <id> qw qx qy qz tx ty tz
  ///   PRIOR <id> <robust> <pose 7> <cov 36 row-major>
  ///   BETWEEN <a> <b> <pose 7> <cov 36>
  ///   SMOOTH <a> <b> <mode> <cov 36>
  void save(std::ostream& os) const;
  static FactorGraph load(std::istream& is);
  void save_file(const std::string& path) const;
  static FactorGraph load_file(const std::string& path);

 private:
  std::map<std::string, Pose3> variables_;
  std::vector<Factor> factors_;
};

/// Residual and Jacobians of a factor at given variable values; used by the
/// solver and exposed for the derivative checks in the test suite.
struct FactorLinearization {
  Vec6 residual = Vec6::Zero();       // unwhitened
  Mat6 jacobian_a = Mat6::Zero();     // d residual / d delta_a
  Mat6 jacobian_b = Mat6::Zero();     // d residual / d delta_b (binary only)
  int num_vars = 1;
};

FactorLinearization linearize_prior(const PriorFactor& f, const Pose3& x);
FactorLinearization linearize_between(const BetweenFactor& f, const Pose3& a,
                                      const Pose3& b);
FactorLinearization linearize_smoothness(const SmoothnessFactor& f,
                                         const Pose3& a, const Pose3& b);

}  // namespace aer
