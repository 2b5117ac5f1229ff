#include "aerialign/factorgraph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "aerialign/errors.hpp"

namespace aer {

void FactorGraph::add_variable(const std::string& id, const Pose3& initial) {
  auto [it, inserted] = variables_.emplace(id, initial);
  if (!inserted) throw DuplicateVariable(id);
}

namespace {

void check_spd(const Mat6& cov) {
  Eigen::LLT<Mat6> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidParameter("factor covariance is not positive definite");
  }
}

// L^-1 for whitening, from cov = L L^T
Mat6 whitener(const Mat6& cov) {
  Eigen::LLT<Mat6> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidParameter("factor covariance is not positive definite");
  }
  return Mat6(llt.matrixL()).triangularView<Eigen::Lower>().solve(
      Mat6::Identity());
}

}  // namespace

void FactorGraph::add_factor(Factor factor) {
  auto require = [&](const std::string& id) {
    if (!variables_.count(id)) throw UnknownVariable(id);
  };
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PriorFactor>) {
          require(f.id);
        } else {
          require(f.a);
          require(f.b);
        }
        check_spd(f.covariance);
      },
      factor);
  factors_.push_back(std::move(factor));
}

bool FactorGraph::has_variable(const std::string& id) const {
  return variables_.count(id) > 0;
}

const Pose3& FactorGraph::variable(const std::string& id) const {
  auto it = variables_.find(id);
  if (it == variables_.end()) throw UnknownVariable(id);
  return it->second;
}

void FactorGraph::set_variable(const std::string& id, const Pose3& value) {
  auto it = variables_.find(id);
  if (it == variables_.end()) throw UnknownVariable(id);
  it->second = value;
}

FactorLinearization linearize_prior(const PriorFactor& f, const Pose3& x) {
  FactorLinearization lin;
  Twist6 r = log_se3(compose(inverse(f.measured), x));
  lin.residual = r.vec();
  lin.jacobian_a = se3_log_right_jacobian(r);
  lin.num_vars = 1;
  return lin;
}

FactorLinearization linearize_between(const BetweenFactor& f, const Pose3& a,
                                      const Pose3& b) {
  FactorLinearization lin;
  Pose3 a_inv_b = compose(inverse(a), b);
  Twist6 r = log_se3(compose(inverse(f.measured), a_inv_b));
  lin.residual = r.vec();
  Mat6 jr_inv = se3_log_right_jacobian(r);
  lin.jacobian_b = jr_inv;
  lin.jacobian_a = -jr_inv * adjoint(inverse(a_inv_b));
  lin.num_vars = 2;
  return lin;
}

FactorLinearization linearize_smoothness(const SmoothnessFactor& f,
                                         const Pose3& a, const Pose3& b) {
  FactorLinearization lin;
  lin.num_vars = 2;
  if (f.mode == SmoothnessFactor::Mode::kRelativeLog) {
    Pose3 a_inv_b = compose(inverse(a), b);
    Twist6 r = log_se3(a_inv_b);
    lin.residual = r.vec();
    Mat6 jr_inv = se3_log_right_jacobian(r);
    lin.jacobian_b = jr_inv;
    lin.jacobian_a = -jr_inv * adjoint(inverse(a_inv_b));
    return lin;
  }
  Twist6 la = log_se3(a);
  Twist6 lb = log_se3(b);
  lin.residual = la.vec() - lb.vec();
  lin.jacobian_a = se3_log_right_jacobian(la);
  lin.jacobian_b = -se3_log_right_jacobian(lb);
  return lin;
}

namespace {

struct IndexedFactor {
  const Factor* factor;
  Mat6 white;  // L^-1 of the covariance
  int ia = -1;
  int ib = -1;
  const char* cls = "";
  bool robust = false;
};

struct Evaluation {
  double cost = 0.0;
  std::map<std::string, double> sq_norms;
};

FactorLinearization linearize(const IndexedFactor& idxf,
                              const std::vector<Pose3>& values) {
  return std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PriorFactor>) {
          return linearize_prior(f, values[idxf.ia]);
        } else if constexpr (std::is_same_v<T, BetweenFactor>) {
          return linearize_between(f, values[idxf.ia], values[idxf.ib]);
        } else {
          return linearize_smoothness(f, values[idxf.ia], values[idxf.ib]);
        }
      },
      *idxf.factor);
}

double robust_cost(double sq_norm, bool robust, double delta) {
  if (!robust) return 0.5 * sq_norm;
  double s = std::sqrt(sq_norm);
  if (s <= delta) return 0.5 * sq_norm;
  return delta * (s - 0.5 * delta);
}

Evaluation evaluate(const std::vector<IndexedFactor>& factors,
                    const std::vector<Pose3>& values, double huber_delta) {
  Evaluation ev;
  for (const auto& idxf : factors) {
    FactorLinearization lin = linearize(idxf, values);
    Vec6 wr = idxf.white * lin.residual;
    double sq = wr.squaredNorm();
    ev.cost += robust_cost(sq, idxf.robust, huber_delta);
    ev.sq_norms[idxf.cls] += sq;
  }
  return ev;
}

}  // namespace

OptimizeReport FactorGraph::optimize(const OptimizeParams& params) {
  if (factors_.empty()) {
    throw InvalidParameter("graph has no factors; residual dimension is zero");
  }

  // stable ordering: ids sorted lexicographically (map order), so the
  // solution does not depend on insertion order
  std::vector<std::string> ids;
  std::vector<Pose3> values;
  std::map<std::string, int> index;
  for (const auto& [id, pose] : variables_) {
    index[id] = static_cast<int>(ids.size());
    ids.push_back(id);
    values.push_back(pose);
  }
  const int n = static_cast<int>(ids.size());

  // gauge check: every connected component must see at least one prior
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

  std::vector<IndexedFactor> factors;
  factors.reserve(factors_.size());
  for (const Factor& f : factors_) {
    IndexedFactor idxf;
    idxf.factor = &f;
    std::visit(
        [&](const auto& ff) {
          using T = std::decay_t<decltype(ff)>;
          idxf.white = whitener(ff.covariance);
          if constexpr (std::is_same_v<T, PriorFactor>) {
            idxf.ia = index.at(ff.id);
            idxf.cls = "prior";
            idxf.robust = ff.robust;
          } else if constexpr (std::is_same_v<T, BetweenFactor>) {
            idxf.ia = index.at(ff.a);
            idxf.ib = index.at(ff.b);
            idxf.cls = "between";
          } else {
            idxf.ia = index.at(ff.a);
            idxf.ib = index.at(ff.b);
            idxf.cls = "smoothness";
          }
        },
        f);
    if (idxf.ib >= 0) unite(idxf.ia, idxf.ib);
    factors.push_back(idxf);
  }
  std::vector<bool> anchored(n, false);
  for (const auto& idxf : factors) {
    if (idxf.ib < 0) anchored[find(idxf.ia)] = true;
  }
  // re-root anchors after all unions
  std::vector<bool> root_anchored(n, false);
  for (const auto& idxf : factors) {
    if (idxf.ib < 0) root_anchored[find(idxf.ia)] = true;
  }
  for (int i = 0; i < n; ++i) {
    if (!root_anchored[find(i)]) {
      throw GaugeUnfixed("variable '" + ids[i] +
                         "' is not connected to any prior");
    }
  }

  const int dim = 6 * n;
  OptimizeReport report;
  Evaluation ev = evaluate(factors, values, params.huber_delta);
  if (!std::isfinite(ev.cost)) throw NumericalFailure("non-finite initial cost");
  report.initial_cost = ev.cost;
  double cost = ev.cost;
  double lambda = params.lambda_init;

  Eigen::MatrixXd h(dim, dim);
  Eigen::VectorXd g(dim);

  int iter = 0;
  for (; iter < params.max_iterations; ++iter) {
    h.setZero();
    g.setZero();
    for (const auto& idxf : factors) {
      FactorLinearization lin = linearize(idxf, values);
      Vec6 wr = idxf.white * lin.residual;
      Mat6 ja = idxf.white * lin.jacobian_a;
      Mat6 jb;
      double w = 1.0;
      if (idxf.robust) {
        double s = wr.norm();
        if (s > params.huber_delta) w = params.huber_delta / s;
      }
      ja *= std::sqrt(w);
      wr *= std::sqrt(w);
      int ia = idxf.ia * 6;
      h.block<6, 6>(ia, ia) += ja.transpose() * ja;
      g.segment<6>(ia) -= ja.transpose() * wr;
      if (idxf.ib >= 0) {
        jb = idxf.white * lin.jacobian_b * std::sqrt(w);
        int ib = idxf.ib * 6;
        h.block<6, 6>(ib, ib) += jb.transpose() * jb;
        h.block<6, 6>(ia, ib) += ja.transpose() * jb;
        h.block<6, 6>(ib, ia) += jb.transpose() * ja;
        g.segment<6>(ib) -= jb.transpose() * wr;
      }
    }

    bool accepted = false;
    double update_norm = 0.0;
    for (int reject = 0; reject <= params.max_rejects; ++reject) {
      Eigen::MatrixXd damped = h;
      for (int d = 0; d < dim; ++d) {
        damped(d, d) += lambda * std::max(h(d, d), 1e-12);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        lambda *= params.lambda_up;
        continue;
      }
      Eigen::VectorXd delta = ldlt.solve(g);
      if (!delta.allFinite()) {
        lambda *= params.lambda_up;
        continue;
      }
      std::vector<Pose3> candidate = values;
      for (int i = 0; i < n; ++i) {
        candidate[i] = retract(values[i], delta.segment<6>(6 * i));
      }
      Evaluation cand_ev = evaluate(factors, candidate, params.huber_delta);
      if (!std::isfinite(cand_ev.cost)) {
        throw NumericalFailure("non-finite cost during optimization");
      }
      if (cand_ev.cost <= cost) {
        update_norm = delta.norm();
        values = std::move(candidate);
        double prev = cost;
        cost = cand_ev.cost;
        lambda = std::max(lambda * params.lambda_down, 1e-12);
        accepted = true;
        report.converged =
            (prev - cost) <= params.relative_cost_tol * std::max(prev, 1e-30) ||
            update_norm < params.update_norm_tol;
        break;
      }
      lambda *= params.lambda_up;
    }
    if (!accepted) {
      report.converged = true;  // no descent direction left at max damping
      break;
    }
    if (report.converged) {
      ++iter;
      break;
    }
  }

  report.iterations = iter;
  report.final_cost = cost;
  Evaluation final_ev = evaluate(factors, values, params.huber_delta);
  for (const auto& [cls, sq] : final_ev.sq_norms) {
    report.residual_norms[cls] = std::sqrt(sq);
  }
  for (int i = 0; i < n; ++i) variables_[ids[i]] = values[i];
  return report;
}

namespace {

void write_pose(std::ostream& os, const Pose3& p) {
  const auto& q = p.rotation;
  os << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' '
     << p.translation.x() << ' ' << p.translation.y() << ' '
     << p.translation.z();
}

void write_cov(std::ostream& os, const Mat6& m) {
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) os << ' ' << m(r, c);
}

Pose3 read_pose(std::istringstream& is) {
  double qw, qx, qy, qz, tx, ty, tz;
  if (!(is >> qw >> qx >> qy >> qz >> tx >> ty >> tz)) {
    throw ParseError("truncated pose");
  }
  return Pose3(Eigen::Quaterniond(qw, qx, qy, qz), Vec3(tx, ty, tz));
}

Mat6 read_cov(std::istringstream& is) {
  Mat6 m;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      if (!(is >> m(r, c))) throw ParseError("truncated covariance");
  return m;
}

}  // namespace

void FactorGraph::save(std::ostream& os) const {
  os << std::setprecision(17);
  os << "# aerialign factor graph v1\n";
  for (const auto& [id, pose] : variables_) {
    os << "VAR " << id;
    write_pose(os, pose);
    os << '\n';
  }
  for (const Factor& f : factors_) {
    std::visit(
        [&](const auto& ff) {
          using T = std::decay_t<decltype(ff)>;
          if constexpr (std::is_same_v<T, PriorFactor>) {
            os << "PRIOR " << ff.id << ' ' << (ff.robust ? 1 : 0);
            write_pose(os, ff.measured);
            write_cov(os, ff.covariance);
          } else if constexpr (std::is_same_v<T, BetweenFactor>) {
            os << "BETWEEN " << ff.a << ' ' << ff.b;
            write_pose(os, ff.measured);
            write_cov(os, ff.covariance);
          } else {
            os << "SMOOTH " << ff.a << ' ' << ff.b << ' '
               << (ff.mode == SmoothnessFactor::Mode::kLogDifference
                       ? "logdiff"
                       : "rellog");
            write_cov(os, ff.covariance);
          }
          os << '\n';
        },
        f);
  }
}

FactorGraph FactorGraph::load(std::istream& is) {
  FactorGraph g;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    try {
      if (tag == "VAR") {
        std::string id;
        ls >> id;
        g.add_variable(id, read_pose(ls));
      } else if (tag == "PRIOR") {
        PriorFactor f;
        int robust = 0;
        ls >> f.id >> robust;
        f.robust = robust != 0;
        f.measured = read_pose(ls);
        f.covariance = read_cov(ls);
        g.add_factor(f);
      } else if (tag == "BETWEEN") {
        BetweenFactor f;
        ls >> f.a >> f.b;
        f.measured = read_pose(ls);
        f.covariance = read_cov(ls);
        g.add_factor(f);
      } else if (tag == "SMOOTH") {
        SmoothnessFactor f;
        std::string mode;
        ls >> f.a >> f.b >> mode;
        f.mode = mode == "rellog" ? SmoothnessFactor::Mode::kRelativeLog
                                  : SmoothnessFactor::Mode::kLogDifference;
        f.covariance = read_cov(ls);
        g.add_factor(f);
      } else {
        throw ParseError("unknown record '" + tag + "'");
      }
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return g;
}

void FactorGraph::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw InvalidParameter("cannot open '" + path + "' for writing");
  save(os);
}

FactorGraph FactorGraph::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return load(is);
}

}  // namespace aer
