#pragma once

// Counterfactual benchmark trajectory: the smoothest trajectory that keeps
// the reference's endpoints, endpoint velocities and accelerations, never
// passes the reference, and never falls more than a gap budget behind it.
//
//   min  ||D1 x - vbar 1||^2 + lambda ||D2 x||^2
//   s.t. x_0, x_N, (D1 x)_0, (D1 x)_{N-1}, (D2 x)_0, (D2 x)_{N-2} fixed
//        x_ref - gap <= x <= x_ref,   D1 x >= 0
//
// Solved by operator splitting (OSQP-style ADMM) on the shifted/scaled
// problem, with a KKT polish on the detected active set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wavebench/banded.hpp"
#include "wavebench/errors.hpp"
#include "wavebench/trajectory.hpp"

namespace wavebench {

inline constexpr double kDefaultLambda = 10.0;

enum class ConstraintKind { kBoundary, kNoOverpass, kMaxGap, kNoReversing };

/// One linear constraint lo <= sum_k coef[k] * x[first + k] <= hi.
struct ConstraintRow {
  ConstraintKind kind;
  std::size_t first = 0;
  std::size_t len = 0;
  std::array<double, 3> coef{};
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  double Apply(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < len; ++k) acc += coef[k] * x[first + k];
    return acc;
  }
};

struct SmoothingProblem {
  std::vector<double> x_ref;
  double dt = 1.0;
  double lambda = kDefaultLambda;
  double gap = 0.0;  // meters
  double v_bar = 0.0;
  double v_start = 0.0, v_end = 0.0;
  double a_start = 0.0, a_end = 0.0;

  std::size_t intervals() const { return x_ref.size() - 1; }
  double horizon() const { return static_cast<double>(intervals()) * dt; }

  /// All constraint rows: 6 boundary, N+1 no-overpass, N+1 max-gap, N no-reversing.
  std::vector<ConstraintRow> Constraints() const {
    const std::size_t n = intervals();
    const double inv = 1.0 / dt;
    const double inv2 = inv * inv;
    std::vector<ConstraintRow> rows;
    rows.reserve(6 + 3 * n + 2);
    auto eq = [&](std::size_t first, std::size_t len, std::array<double, 3> c, double value) {
      rows.push_back({ConstraintKind::kBoundary, first, len, c, value, value});
    };
    eq(0, 1, {1.0, 0, 0}, x_ref[0]);
    eq(n, 1, {1.0, 0, 0}, x_ref[n]);
    eq(0, 2, {-inv, inv, 0}, v_start);
    eq(n - 1, 2, {-inv, inv, 0}, v_end);
    eq(0, 3, {inv2, -2.0 * inv2, inv2}, a_start);
    eq(n - 2, 3, {inv2, -2.0 * inv2, inv2}, a_end);
    for (std::size_t i = 0; i <= n; ++i) {
      rows.push_back({ConstraintKind::kNoOverpass, i, 1, {1.0, 0, 0},
                      -std::numeric_limits<double>::infinity(), x_ref[i]});
    }
    for (std::size_t i = 0; i <= n; ++i) {
      rows.push_back({ConstraintKind::kMaxGap, i, 1, {1.0, 0, 0}, x_ref[i] - gap,
                      std::numeric_limits<double>::infinity()});
    }
    for (std::size_t k = 0; k < n; ++k) {
      rows.push_back({ConstraintKind::kNoReversing, k, 2, {-inv, inv, 0}, 0.0,
                      std::numeric_limits<double>::infinity()});
    }
    return rows;
  }
};

inline SmoothingProblem BuildProblem(const Trajectory& ref, double lambda, double gap) {
  if (ref.intervals() < kMinIntervals) throw DegenerateTrajectory("smoothing problem needs N >= 3");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw RejectedInput("lambda must be >= 0");
  if (!(gap >= 0.0) || !std::isfinite(gap)) throw RejectedInput("gap budget must be >= 0");
  if (!(ref.dt > 0.0)) throw RejectedInput("dt must be positive");
  for (std::size_t i = 1; i < ref.positions.size(); ++i) {
    if (ref.positions[i] < ref.positions[i - 1]) {
      throw RejectedInput("reference must be non-decreasing; run PreprocessReference first");
    }
  }
  const Kinematics kin = ComputeKinematics(ref);
  SmoothingProblem p;
  p.x_ref = ref.positions;
  p.dt = ref.dt;
  p.lambda = lambda;
  p.gap = gap;
  p.v_bar = kin.mean_speed;
  p.v_start = kin.velocities.front();
  p.v_end = kin.velocities.back();
  p.a_start = kin.accelerations.front();
  p.a_end = kin.accelerations.back();
  return p;
}

/// ||D1 x - vbar||^2 + lambda ||D2 x||^2
inline double ObjectiveValue(const SmoothingProblem& p, std::span<const double> x) {
  if (x.size() != p.x_ref.size()) throw RejectedInput("position count does not match problem");
  const std::size_t n = p.intervals();
  double speed_dev = 0.0, accel = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = (x[k + 1] - x[k]) / p.dt - p.v_bar;
    speed_dev += d * d;
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a = (x[k + 2] - 2.0 * x[k + 1] + x[k]) / (p.dt * p.dt);
    accel += a * a;
  }
  return speed_dev + p.lambda * accel;
}

/// ||D2 x||^2 alone.
inline double AccelerationEnergy(std::span<const double> x, double dt) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 2 < x.size(); ++k) {
    const double a = (x[k + 2] - 2.0 * x[k + 1] + x[k]) / (dt * dt);
    acc += a * a;
  }
  return acc;
}

/// Largest violation over all constraints, in each row's own units (m or m/s, m/s^2).
inline double MaxConstraintViolation(const SmoothingProblem& p, std::span<const double> x) {
  double worst = 0.0;
  for (const ConstraintRow& row : p.Constraints()) {
    const double v = row.Apply(x);
    worst = std::max({worst, row.lo - v, v - row.hi});
  }
  return worst;
}

enum class SolveStatus { kOptimal, kMaxIterations, kInfeasible };

inline std::string ToString(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIterations: return "max_iterations";
    case SolveStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

struct SolverSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  double eps_abs = 1e-6;
  double eps_rel = 0.0;
  double eps_infeasible = 1e-7;
  int max_iterations = 50000;
  bool adaptive_rho = true;
  int adapt_interval = 25;
  double rho_equality_scale = 1e3;
  bool polish = true;
  int polish_interval = 25;
  double polish_delta = 1e-7;
  int polish_refine_iterations = 40;
  double constraint_tolerance = 1e-6;  // meters (or m/s, m/s^2) for an unpolished optimum
};

struct QpSolution {
  std::vector<double> x;  // meters
  SolveStatus status = SolveStatus::kMaxIterations;
  double objective = 0.0;
  double primal_residual = 0.0;  // scaled units
  double dual_residual = 0.0;    // scaled units
  int iterations = 0;
  bool polished = false;
};

namespace detail {

// ADMM on the problem shifted by x_ref[0] and divided by `scale`. Rows are
// the boundary equalities, one two-sided box per position, and no-reversing.
class AdmmSolver {
 public:
  AdmmSolver(const SmoothingProblem& p, const SolverSettings& s) : settings_(s) {
    n_ = p.x_ref.size();
    const std::size_t intervals = n_ - 1;
    offset_ = p.x_ref.front();
    scale_ = std::max(1.0, p.x_ref.back() - p.x_ref.front());
    ref_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) ref_[i] = (p.x_ref[i] - offset_) / scale_;
    const double gap = p.gap / scale_;
    const double vbar = p.v_bar / scale_;
    const double inv = 1.0 / p.dt;
    const double inv2 = inv * inv;

    auto apply_ref = [&](const ConstraintRow& r) { return r.Apply(ref_); };
    auto add_eq = [&](std::size_t first, std::size_t len, std::array<double, 3> c) {
      ConstraintRow r{ConstraintKind::kBoundary, first, len, c};
      r.lo = r.hi = apply_ref(r);
      rows_.push_back(r);
    };
    add_eq(0, 1, {1.0, 0, 0});
    add_eq(intervals, 1, {1.0, 0, 0});
    add_eq(0, 2, {-inv, inv, 0});
    add_eq(intervals - 1, 2, {-inv, inv, 0});
    add_eq(0, 3, {inv2, -2.0 * inv2, inv2});
    add_eq(intervals - 2, 3, {inv2, -2.0 * inv2, inv2});
    // x_0..x_2 and x_{N-2}..x_N are fixed by the boundary rows; inequality
    // rows touching only those are implied by reference feasibility and
    // would make the polish active set degenerate.
    auto pinned = [&](std::size_t i) { return i <= 2 || i + 2 >= intervals; };
    for (std::size_t i = 0; i < n_; ++i) {
      if (pinned(i)) continue;
      const double hi = ref_[i];
      const double lo = gap == 0.0 ? hi : ref_[i] - gap;
      rows_.push_back({ConstraintKind::kMaxGap, i, 1, {1.0, 0, 0}, lo, hi});
    }
    for (std::size_t k = 0; k < intervals; ++k) {
      if (pinned(k) && pinned(k + 1)) continue;
      rows_.push_back({ConstraintKind::kNoReversing, k, 2, {-inv, inv, 0}, 0.0,
                       std::numeric_limits<double>::infinity()});
    }
    m_ = rows_.size();

    // P = 2 (D1'D1 + lambda D2'D2), q = -2 vbar D1' 1
    p_.Resize(n_);
    for (std::size_t k = 0; k < intervals; ++k) AddOuter(p_, k, 2, {-inv, inv, 0}, 2.0);
    for (std::size_t k = 0; k + 1 < intervals; ++k) {
      AddOuter(p_, k, 3, {inv2, -2.0 * inv2, inv2}, 2.0 * p.lambda);
    }
    q_.assign(n_, 0.0);
    for (std::size_t k = 0; k < intervals; ++k) {
      q_[k] += 2.0 * vbar * inv;
      q_[k + 1] -= 2.0 * vbar * inv;
    }
  }

  QpSolution Solve(std::optional<std::span<const double>> warm_start) {
    x_.assign(n_, 0.0);
    if (warm_start && warm_start->size() == n_) {
      for (std::size_t i = 0; i < n_; ++i) x_[i] = ((*warm_start)[i] - offset_) / scale_;
    } else {
      x_ = ref_;
    }
    z_.resize(m_);
    Multiply(x_, z_);
    for (std::size_t i = 0; i < m_; ++i) z_[i] = std::clamp(z_[i], rows_[i].lo, rows_[i].hi);
    y_.assign(m_, 0.0);
    rho_ = settings_.rho;
    SetRho();
    Factor();

    std::vector<double> rhs(n_), xt(n_), zt(m_), ax(m_), y_prev(m_);
    std::vector<std::int8_t> last_polish_set;
    QpSolution out;
    int iter = 0;
    for (; iter < settings_.max_iterations; ++iter) {
      y_prev = y_;
      // rhs = sigma x - q + A'(rho z - y)
      for (std::size_t i = 0; i < m_; ++i) zt[i] = rho_vec_[i] * z_[i] - y_[i];
      MultiplyTranspose(zt, rhs);
      for (std::size_t i = 0; i < n_; ++i) rhs[i] += settings_.sigma * x_[i] - q_[i];
      xt = rhs;
      ldlt_.Solve(xt);
      Multiply(xt, zt);
      const double a = settings_.alpha;
      for (std::size_t i = 0; i < n_; ++i) x_[i] = a * xt[i] + (1.0 - a) * x_[i];
      for (std::size_t i = 0; i < m_; ++i) {
        const double zh = a * zt[i] + (1.0 - a) * z_[i];
        const double zn = std::clamp(zh + y_[i] / rho_vec_[i], rows_[i].lo, rows_[i].hi);
        y_[i] += rho_vec_[i] * (zh - zn);
        z_[i] = zn;
      }

      const Residuals res = ComputeResiduals(x_, z_, y_);
      if (res.primal <= res.eps_primal && res.dual <= res.eps_dual) {
        out = Finish(res, iter + 1);
        if (settings_.polish) TryPolish(out);
        // An unpolished iterate must also meet the constraints in meters.
        if (out.polished || RowViolation(x_) * scale_ <= settings_.constraint_tolerance) return out;
      }

      const bool checkpoint = (iter + 1) % settings_.adapt_interval == 0;
      if (checkpoint && Infeasible(y_prev)) {
        out = Finish(res, iter + 1);
        out.status = SolveStatus::kInfeasible;
        return out;
      }
      if (settings_.polish && (iter + 1) % settings_.polish_interval == 0) {
        auto active = ActiveSet(z_, y_);
        if (active != last_polish_set) {
          last_polish_set = active;
          QpSolution candidate;
          if (Polish(active, candidate)) {
            candidate.iterations = iter + 1;
            return candidate;
          }
        }
      }
      if (settings_.adaptive_rho && checkpoint) AdaptRho(res);
    }
    const Residuals res = ComputeResiduals(x_, z_, y_);
    out = Finish(res, iter);
    out.status = SolveStatus::kMaxIterations;
    if (settings_.polish) TryPolish(out);
    return out;
  }

 private:
  struct Residuals {
    double primal, dual, eps_primal, eps_dual;
    double ax_norm, z_norm, px_norm, aty_norm, q_norm;
  };

  static void AddOuter(linalg::BandedSymmetric<2>& m, std::size_t first, std::size_t len,
                       const std::array<double, 3>& c, double w) {
    for (std::size_t a = 0; a < len; ++a) {
      for (std::size_t b = a; b < len; ++b) m.Add(first + a, first + b, w * c[a] * c[b]);
    }
  }

  void Multiply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < m_; ++i) out[i] = rows_[i].Apply(x);
  }

  void MultiplyTranspose(std::span<const double> w, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const ConstraintRow& r = rows_[i];
      for (std::size_t k = 0; k < r.len; ++k) out[r.first + k] += r.coef[k] * w[i];
    }
  }

  static double NormInf(std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  }

  void SetRho() {
    rho_vec_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      rho_vec_[i] = rows_[i].lo == rows_[i].hi ? rho_ * settings_.rho_equality_scale : rho_;
    }
  }

  void Factor() {
    kkt_ = p_;
    kkt_.AddDiagonal(settings_.sigma);
    for (std::size_t i = 0; i < m_; ++i) {
      const ConstraintRow& r = rows_[i];
      AddOuter(kkt_, r.first, r.len, r.coef, rho_vec_[i]);
    }
    if (!ldlt_.Compute(kkt_)) throw SolverError("ADMM linear system is not positive definite");
  }

  Residuals ComputeResiduals(std::span<const double> x, std::span<const double> z,
                             std::span<const double> y) const {
    std::vector<double> ax(m_), px(n_), aty(n_);
    Multiply(x, ax);
    p_.Multiply(x, px);
    MultiplyTranspose(y, aty);
    Residuals r{};
    r.primal = 0.0;
    for (std::size_t i = 0; i < m_; ++i) r.primal = std::max(r.primal, std::abs(ax[i] - z[i]));
    r.dual = 0.0;
    for (std::size_t i = 0; i < n_; ++i) r.dual = std::max(r.dual, std::abs(px[i] + q_[i] + aty[i]));
    r.ax_norm = NormInf(ax);
    r.z_norm = NormInf(z);
    r.px_norm = NormInf(px);
    r.aty_norm = NormInf(aty);
    r.q_norm = NormInf(q_);
    r.eps_primal = settings_.eps_abs + settings_.eps_rel * std::max(r.ax_norm, r.z_norm);
    r.eps_dual = settings_.eps_abs + settings_.eps_rel * std::max({r.px_norm, r.aty_norm, r.q_norm});
    return r;
  }

  void AdaptRho(const Residuals& r) {
    constexpr double kTiny = 1e-30;
    const double prim = r.primal / std::max(std::max(r.ax_norm, r.z_norm), kTiny);
    const double dual = r.dual / std::max({r.px_norm, r.aty_norm, r.q_norm, kTiny});
    if (dual <= kTiny || prim <= kTiny) return;
    const double proposed = std::clamp(rho_ * std::sqrt(prim / dual), 1e-6, 1e6);
    if (proposed > 5.0 * rho_ || proposed < 0.2 * rho_) {
      rho_ = proposed;
      SetRho();
      Factor();
    }
  }

  // Primal infeasibility certificate from the dual step dy.
  bool Infeasible(std::span<const double> y_prev) const {
    std::vector<double> dy(m_), atdy(n_);
    for (std::size_t i = 0; i < m_; ++i) dy[i] = y_[i] - y_prev[i];
    const double dy_norm = NormInf(dy);
    if (dy_norm <= 1e-30) return false;
    MultiplyTranspose(dy, atdy);
    if (NormInf(atdy) > settings_.eps_infeasible * dy_norm) return false;
    double support = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (dy[i] > 0.0) {
        if (std::isinf(rows_[i].hi)) return false;
        support += rows_[i].hi * dy[i];
      } else if (dy[i] < 0.0) {
        if (std::isinf(rows_[i].lo)) return false;
        support += rows_[i].lo * dy[i];
      }
    }
    return support < -settings_.eps_infeasible * dy_norm;
  }

  // +1 upper active, -1 lower active, 2 equality, 0 inactive.
  std::vector<std::int8_t> ActiveSet(std::span<const double> z, std::span<const double> y) const {
    std::vector<std::int8_t> active(m_, 0);
    for (std::size_t i = 0; i < m_; ++i) {
      const ConstraintRow& r = rows_[i];
      if (r.lo == r.hi) active[i] = 2;
      else if (z[i] - r.lo < -y[i]) active[i] = -1;
      else if (r.hi - z[i] < y[i]) active[i] = 1;
    }
    return active;
  }

  // Solves the equality-constrained QP on the active rows by iterative
  // refinement of a regularized, Schur-reduced KKT system. Accepts only a
  // KKT-certified point.
  bool Polish(std::vector<std::int8_t> active, QpSolution& out) const {
    // Degenerate stops can shed one redundant row per round.
    const std::size_t rounds = 8 + m_;
    for (std::size_t round = 0; round < rounds; ++round) {
      const PolishOutcome r = PolishOnce(active, out);
      if (r == PolishOutcome::kCertified) return true;
      if (r == PolishOutcome::kFailed) return false;
    }
    return false;
  }

  enum class PolishOutcome { kCertified, kRepaired, kFailed };

  // One equality-constrained solve on `active`. On a failed certificate the
  // active set is repaired in place: wrong-signed rows are released and
  // violated rows are bound.
  PolishOutcome PolishOnce(std::vector<std::int8_t>& active, QpSolution& out) const {
    std::vector<std::size_t> act;
    std::vector<double> b;
    for (std::size_t i = 0; i < m_; ++i) {
      if (active[i] == 0) continue;
      act.push_back(i);
      b.push_back(active[i] == -1 ? rows_[i].lo : rows_[i].hi);
    }
    const double delta = settings_.polish_delta;
    linalg::BandedSymmetric<2> reduced = p_;
    reduced.AddDiagonal(delta);
    for (std::size_t i : act) AddOuter(reduced, rows_[i].first, rows_[i].len, rows_[i].coef, 1.0 / delta);
    linalg::BandedLdlt<2> fac;
    if (!fac.Compute(reduced)) return PolishOutcome::kFailed;

    const std::size_t na = act.size();
    std::vector<double> x(n_, 0.0), mu(na, 0.0), r1(n_), r2(na), dx(n_), px(n_);
    auto active_apply = [&](std::span<const double> v, std::size_t k) { return rows_[act[k]].Apply(v); };
    auto active_transpose_add = [&](std::span<const double> w, std::span<double> outv) {
      for (std::size_t k = 0; k < na; ++k) {
        const ConstraintRow& r = rows_[act[k]];
        for (std::size_t c = 0; c < r.len; ++c) outv[r.first + c] += r.coef[c] * w[k];
      }
    };
    double prev_norm = std::numeric_limits<double>::infinity();
    for (int it = 0; it < settings_.polish_refine_iterations; ++it) {
      // r1 = -q - P x - A' mu ; r2 = b - A x
      p_.Multiply(x, px);
      for (std::size_t i = 0; i < n_; ++i) r1[i] = -q_[i] - px[i];
      std::vector<double> atmu(n_, 0.0);
      active_transpose_add(mu, atmu);
      for (std::size_t i = 0; i < n_; ++i) r1[i] -= atmu[i];
      for (std::size_t k = 0; k < na; ++k) r2[k] = b[k] - active_apply(x, k);
      const double norm = std::max(NormInf(r1), NormInf(r2));
      if (norm < 1e-14 || norm >= prev_norm) break;
      prev_norm = norm;
      // (P + dI + A'A/d) dx = r1 + A' r2 / d ; dmu = (A dx - r2) / d
      dx = r1;
      std::vector<double> scaled(na);
      for (std::size_t k = 0; k < na; ++k) scaled[k] = r2[k] / delta;
      active_transpose_add(scaled, dx);
      fac.Solve(dx);
      for (std::size_t i = 0; i < n_; ++i) x[i] += dx[i];
      for (std::size_t k = 0; k < na; ++k) mu[k] += (active_apply(dx, k) - r2[k]) / delta;
    }

    // Certificate: primal feasibility and correct dual signs.
    constexpr double kFeasTol = 1e-9;
    constexpr double kSignTol = 1e-9;
    double primal = 0.0;
    bool repaired = false;
    for (std::size_t i = 0; i < m_; ++i) {
      const double v = rows_[i].Apply(x);
      const double below = rows_[i].lo - v;
      const double above = v - rows_[i].hi;
      primal = std::max({primal, below, above});
      if (active[i] == 0 && below > kFeasTol) active[i] = -1, repaired = true;
      if (active[i] == 0 && above > kFeasTol) active[i] = 1, repaired = true;
    }
    std::vector<double> y(m_, 0.0);
    for (std::size_t k = 0; k < na; ++k) {
      const std::int8_t kind = active[act[k]];
      if ((kind == -1 && mu[k] > kSignTol) || (kind == 1 && mu[k] < -kSignTol)) {
        active[act[k]] = 0;
        repaired = true;
      }
      y[act[k]] = mu[k];
    }
    if (repaired) return PolishOutcome::kRepaired;
    std::vector<double> px2(n_), aty(n_);
    p_.Multiply(x, px2);
    MultiplyTranspose(y, aty);
    double dual = 0.0;
    for (std::size_t i = 0; i < n_; ++i) dual = std::max(dual, std::abs(px2[i] + q_[i] + aty[i]));
    if (dual > settings_.eps_abs) return PolishOutcome::kFailed;

    out.x.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) out.x[i] = x[i] * scale_ + offset_;
    out.status = SolveStatus::kOptimal;
    out.primal_residual = std::max(primal, 0.0);
    out.dual_residual = dual;
    out.polished = true;
    return PolishOutcome::kCertified;
  }

  double RowViolation(std::span<const double> x) const {
    double worst = 0.0;
    for (const ConstraintRow& r : rows_) {
      const double v = r.Apply(x);
      worst = std::max({worst, r.lo - v, v - r.hi});
    }
    return worst;
  }

  void TryPolish(QpSolution& out) const {
    QpSolution candidate;
    if (Polish(ActiveSet(z_, y_), candidate)) {
      candidate.iterations = out.iterations;
      out = std::move(candidate);
    }
  }

  QpSolution Finish(const Residuals& r, int iterations) const {
    QpSolution out;
    out.x.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) out.x[i] = x_[i] * scale_ + offset_;
    out.status = SolveStatus::kOptimal;
    out.primal_residual = r.primal;
    out.dual_residual = r.dual;
    out.iterations = iterations;
    return out;
  }

  SolverSettings settings_;
  std::size_t n_ = 0, m_ = 0;
  double offset_ = 0.0, scale_ = 1.0;
  std::vector<double> ref_;
  std::vector<ConstraintRow> rows_;
  linalg::BandedSymmetric<2> p_, kkt_;
  linalg::BandedLdlt<2> ldlt_;
  std::vector<double> q_, x_, z_, y_, rho_vec_;
  double rho_ = 0.1;
};

}  // namespace detail

/// Global minimizer of the smoothing QP. A warm start (meters) seeds the
/// ADMM iterate; the result does not depend on it beyond solver tolerance.
inline QpSolution Solve(const SmoothingProblem& problem, const SolverSettings& settings = {},
                        std::optional<std::span<const double>> warm_start = std::nullopt) {
  if (problem.x_ref.size() < kMinIntervals + 1) throw DegenerateTrajectory("smoothing problem needs N >= 3");
  if (problem.gap == 0.0) {
    // Upper and lower position bounds coincide: the feasible set is {x_ref}.
    QpSolution sol;
    sol.x = problem.x_ref;
    sol.status = SolveStatus::kOptimal;
    sol.objective = ObjectiveValue(problem, sol.x);
    return sol;
  }
  detail::AdmmSolver solver(problem, settings);
  QpSolution sol = solver.Solve(warm_start);
  sol.objective = ObjectiveValue(problem, sol.x);
  return sol;
}

struct SmoothResult {
  Trajectory reference;  // after preprocessing
  Trajectory benchmark;
  QpSolution solution;
  double reference_objective = 0.0;
};

/// Preprocess, build, solve. Never throws on a non-optimal status; callers
/// inspect result.solution.status.
inline SmoothResult SmoothDetailed(const Trajectory& ref, double lambda, double gap,
                                   const SolverSettings& settings = {},
                                   std::optional<std::span<const double>> warm_start = std::nullopt) {
  SmoothResult r;
  r.reference = PreprocessReference(ref);
  const SmoothingProblem problem = BuildProblem(r.reference, lambda, gap);
  r.reference_objective = ObjectiveValue(problem, problem.x_ref);
  r.solution = Solve(problem, settings, warm_start);
  r.benchmark = r.reference;
  r.benchmark.positions = r.solution.x;
  r.benchmark.source = TrajectorySource::kBenchmark;
  r.benchmark.gap_budget = gap;
  r.benchmark.max_correction = 0.0;
  return r;
}

inline Trajectory Smooth(const Trajectory& ref, double lambda, double gap, const SolverSettings& settings = {}) {
  SmoothResult r = SmoothDetailed(ref, lambda, gap, settings);
  if (r.solution.status != SolveStatus::kOptimal) {
    throw SolverError("smoothing did not converge: " + ToString(r.solution.status) + " after " +
                      std::to_string(r.solution.iterations) + " iterations");
  }
  return r.benchmark;
}

}  // namespace wavebench
