#pragma once

// Gradient projection routines of GEM and A-GEM.
//
// Both act on gradients only: they never see the loss, so the objective being
// optimized is unchanged and only the update direction is altered.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "stabgap/core.hpp"

namespace stabgap {

/// One reference gradient per past task, stored as the rows of a k x p matrix.
struct ReferenceGradients {
  Matrix rows;

  ReferenceGradients() = default;
  explicit ReferenceGradients(Matrix r) : rows(std::move(r)) {}
  ReferenceGradients(Eigen::Index k, Eigen::Index dim) : rows(k, dim) {}

  [[nodiscard]] Eigen::Index count() const { return rows.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return rows.cols(); }
};

struct GemConfig {
  double gamma = 0.5;
  bool always_solve = false;  // false reproduces the reference GEM code: solve only on violation
  double qp_tolerance = 1e-10;
  int qp_max_iters = 10000;

  void validate() const {
    if (!(gamma >= 0)) throw std::invalid_argument("GemConfig: gamma must be >= 0");
    if (!(qp_tolerance > 0)) throw std::invalid_argument("GemConfig: qp_tolerance must be > 0");
    if (qp_max_iters < 1) throw std::invalid_argument("GemConfig: qp_max_iters must be >= 1");
  }
};

struct ProjectionOutcome {
  ParamVector g_bar;
  bool projected = false;
  bool degenerate_ref = false;
  std::optional<Vector> dual_solution;
};

class QpNonConvergence : public std::runtime_error {
 public:
  QpNonConvergence(double residual, int iters)
      : std::runtime_error("GEM dual QP did not converge after " + std::to_string(iters) +
                           " iterations (KKT residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  [[nodiscard]] double residual() const { return residual_; }

 private:
  double residual_;
};

/// If g . g_ref >= 0 return g, else remove the component of g along g_ref.
/// A zero reference is passed through and flagged.
inline ProjectionOutcome project_agem(const ParamVector& g, const ParamVector& g_ref) {
  if (g.size() != g_ref.size()) throw std::invalid_argument("project_agem: length mismatch");
  ProjectionOutcome out;
  const double ref_sq = g_ref.squaredNorm();
  if (ref_sq == 0.0) {
    out.g_bar = g;
    out.degenerate_ref = true;
    return out;
  }
  const double dot = g.dot(g_ref);
  if (dot >= 0.0) {
    out.g_bar = g;
    return out;
  }
  out.g_bar = g - (dot / ref_sq) * g_ref;
  out.projected = true;
  return out;
}

/// The bound-constrained dual, reduced to the k x k problem
///   minimize 0.5 v'Qv + c'v  s.t.  v >= gamma,   Q = G G', c = G g.
struct GemDual {
  Eigen::MatrixXd Q;
  Vector c;

  static GemDual from(const ParamVector& g, const ReferenceGradients& G) {
    if (G.dim() != g.size()) throw std::invalid_argument("GEM: reference gradient length mismatch");
    GemDual d;
    d.Q = G.rows * G.rows.transpose();
    d.c = G.rows * g;
    return d;
  }

  [[nodiscard]] Eigen::Index size() const { return c.size(); }
  [[nodiscard]] double objective(const Vector& v) const { return 0.5 * v.dot(Q * v) + c.dot(v); }
  [[nodiscard]] Vector gradient(const Vector& v) const { return Q * v + c; }

  /// Natural residual of the KKT system, max_i |v_i - max(gamma, v_i - grad_i)|,
  /// plus any bound violation. Zero exactly at the optimum.
  [[nodiscard]] double kkt_residual(const Vector& v, double gamma) const {
    const Vector grad = gradient(v);
    double r = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      r = std::max(r, gamma - v[i]);
      r = std::max(r, std::abs(v[i] - std::max(gamma, v[i] - grad[i])));
    }
    return r;
  }

  /// Residual threshold: qp_tolerance relative to |Gg| (|Q| when Gg = 0).
  [[nodiscard]] double tolerance(double rel) const {
    double scale = c.norm();
    if (scale == 0.0) scale = Q.norm();
    if (scale == 0.0) scale = 1.0;
    return rel * scale;
  }
};

inline double kkt_residual(const ParamVector& g, const ReferenceGradients& G, double gamma, const Vector& v) {
  const auto dual = GemDual::from(g, G);
  if (v.size() != dual.size()) throw std::invalid_argument("kkt_residual: dual vector length mismatch");
  return dual.kkt_residual(v, gamma);
}

namespace detail {

// Solve the equality-constrained subproblem with the variables outside
// `free_set` pinned at gamma. Returns nullopt if the reduced system is
// singular or the solution leaves the feasible box.
inline std::optional<Vector> solve_on_face(const GemDual& d, const std::vector<Eigen::Index>& free_set, double gamma) {
  const Eigen::Index k = d.size();
  Vector v = Vector::Constant(k, gamma);
  if (free_set.empty()) return v;
  const auto f = static_cast<Eigen::Index>(free_set.size());
  Eigen::MatrixXd Qff(f, f);
  Vector rhs(f);
  for (Eigen::Index a = 0; a < f; ++a) {
    const auto i = free_set[static_cast<std::size_t>(a)];
    double pinned = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (std::find(free_set.begin(), free_set.end(), j) == free_set.end()) pinned += d.Q(i, j) * gamma;
    rhs[a] = -(d.c[i] + pinned);
    for (Eigen::Index b = 0; b < f; ++b) Qff(a, b) = d.Q(i, free_set[static_cast<std::size_t>(b)]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Qff);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Vector vf = ldlt.solve(rhs);
  if (!vf.allFinite()) return std::nullopt;
  for (Eigen::Index a = 0; a < f; ++a) {
    if (vf[a] < gamma) return std::nullopt;
    v[free_set[static_cast<std::size_t>(a)]] = vf[a];
  }
  return v;
}

}  // namespace detail

/// Spectral projected gradient on the dual with an exact line search along
/// each projected step, followed by a face solve once the active set has
/// settled.
inline Vector solve_gem_dual(const GemDual& d, const GemConfig& cfg) {
  cfg.validate();
  const Eigen::Index k = d.size();
  if (k == 0) throw std::invalid_argument("solve_gem_dual: need at least one reference gradient");
  const double gamma = cfg.gamma;
  if (d.Q.isZero(0.0)) return Vector::Constant(k, gamma);

  const double tol = d.tolerance(cfg.qp_tolerance);
  const double q_norm = d.Q.norm();

  auto project = [gamma](Vector v) { return v.cwiseMax(gamma); };

  Vector v = Vector::Constant(k, gamma);
  Vector grad = d.gradient(v);
  double step = 1.0 / q_norm;
  std::vector<Eigen::Index> last_face{-1};
  double residual = d.kkt_residual(v, gamma);

  for (int it = 0; it < cfg.qp_max_iters; ++it) {
    if (residual <= tol) return v;

    std::vector<Eigen::Index> face;
    for (Eigen::Index i = 0; i < k; ++i)
      if (v[i] > gamma || grad[i] < 0.0) face.push_back(i);
    if (face != last_face) {
      last_face = face;
      if (auto cand = detail::solve_on_face(d, face, gamma)) {
        const double r = d.kkt_residual(*cand, gamma);
        if (r <= tol) return *cand;
        if (r < residual && d.objective(*cand) <= d.objective(v)) {
          v = *cand;
          grad = d.gradient(v);
          residual = r;
          continue;
        }
      }
    }

    const Vector dir = project(v - step * grad) - v;
    const double curv = dir.dot(d.Q * dir);
    const double slope = grad.dot(dir);
    if (slope >= 0.0 || dir.squaredNorm() == 0.0) {
      step = 1.0 / q_norm;
      const Vector fallback = project(v - step * grad) - v;
      if (fallback.squaredNorm() == 0.0) break;
      v += fallback;
    } else {
      const double t = curv > 0.0 ? std::min(1.0, -slope / curv) : 1.0;
      const Vector s = t * dir;
      v = project(v + s);
      const double sQs = s.dot(d.Q * s);
      step = sQs > 0.0 ? s.squaredNorm() / sQs : 1.0 / q_norm;
      step = std::clamp(step, 1e-12 / q_norm, 1e12 / q_norm);
    }
    grad = d.gradient(v);
    residual = d.kkt_residual(v, gamma);
  }
  if (residual <= tol) return v;
  throw QpNonConvergence(residual, cfg.qp_max_iters);
}

inline Vector solve_gem_dual(const ParamVector& g, const ReferenceGradients& G, const GemConfig& cfg) {
  for (Eigen::Index i = 0; i < G.count(); ++i)
    if (!G.rows.row(i).allFinite()) throw std::invalid_argument("solve_gem_dual: non-finite reference gradient");
  return solve_gem_dual(GemDual::from(g, G), cfg);
}

/// GEM projection with gamma applied as the dual lower bound v >= gamma.
/// Unless cfg.always_solve is set, g is returned untouched whenever it already
/// has a non-negative inner product with every reference gradient.
inline ProjectionOutcome project_gem(const ParamVector& g, const ReferenceGradients& G, const GemConfig& cfg) {
  cfg.validate();
  ProjectionOutcome out;
  if (G.count() == 0) {
    out.g_bar = g;
    return out;
  }
  const auto dual = GemDual::from(g, G);
  for (Eigen::Index i = 0; i < G.count(); ++i)
    if (dual.Q(i, i) == 0.0) out.degenerate_ref = true;

  if (!cfg.always_solve && (dual.c.array() >= 0.0).all()) {
    out.g_bar = g;
    return out;
  }
  Vector v = solve_gem_dual(dual, cfg);
  out.g_bar = g;
  out.g_bar.noalias() += G.rows.transpose() * v;
  out.projected = cfg.always_solve ? (out.g_bar - g).norm() > 0.0 : true;
  out.dual_solution = std::move(v);
  return out;
}

}  // namespace stabgap
