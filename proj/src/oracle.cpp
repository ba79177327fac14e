#include "kmp/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace kmp {

namespace {

/// All weight vectors w = n/S on the m-simplex with integer compositions.
std::vector<Vector> simplex_mesh(Eigen::Index m, double step) {
  if (!(step > 0.0) || step > 1.0) throw ConfigError("oracle: simplex step must be in (0,1]");
  const int s = static_cast<int>(std::llround(1.0 / step));
  std::vector<Vector> out;
  Vector w(m);
  std::function<void(Eigen::Index, int)> rec = [&](Eigen::Index i, int rest) {
    if (i == m - 1) {
      w[i] = static_cast<double>(rest) / s;
      out.push_back(w);
      return;
    }
    for (int n = 0; n <= rest; ++n) {
      w[i] = static_cast<double>(n) / s;
      rec(i + 1, rest - n);
    }
  };
  rec(0, s);
  return out;
}

std::size_t simplex_mesh_count(Eigen::Index m, double step) {
  const int s = static_cast<int>(std::llround(1.0 / step));
  // C(s + m - 1, m - 1), saturating
  long double c = 1.0L;
  for (Eigen::Index i = 1; i <= m - 1; ++i) c = c * (s + i) / i;
  return c > 1e18L ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(c);
}

std::vector<double> axis_values(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 1e-12; x += step) v.push_back(x);
  return v;
}

/// Product mesh over `dim` axes with identical value lists.
std::vector<Vector> product_mesh(const std::vector<double>& axis, Eigen::Index dim,
                                 std::size_t cap) {
  std::size_t count = 1;
  for (Eigen::Index i = 0; i < dim; ++i) {
    count *= axis.size();
    if (count > cap) throw ConfigError("oracle: evaluation cap exceeded");
  }
  std::vector<Vector> out;
  out.reserve(count);
  Vector x(dim);
  std::function<void(Eigen::Index)> rec = [&](Eigen::Index i) {
    if (i == dim) {
      out.push_back(x);
      return;
    }
    for (double v : axis) {
      x[i] = v;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

std::vector<Vector> box_mesh(const Box& box, double step, std::size_t cap) {
  std::size_t count = 1;
  std::vector<std::vector<double>> axes;
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    axes.push_back(axis_values(box.lo[i], box.hi[i], step));
    count *= axes.back().size();
    if (count > cap) throw ConfigError("oracle: evaluation cap exceeded");
  }
  std::vector<Vector> out;
  out.reserve(count);
  Vector x(box.dim());
  std::function<void(Eigen::Index)> rec = [&](Eigen::Index i) {
    if (i == box.dim()) {
      out.push_back(x);
      return;
    }
    for (double v : axes[static_cast<std::size_t>(i)]) {
      x[i] = v;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

struct MinCandidate {
  std::optional<Vector> theta;
  std::optional<RkhsFunction> f;
};
struct MaxCandidate {
  std::optional<DiscreteMeasure> mu;
  std::optional<RkhsFunction> h;
};

}  // namespace

SaddleScanResult brute_force_saddle(const SaddleProblem& problem, const MeshSpec& mesh) {
  const BlockActive act = problem.blocks();
  const FeasibleSets fs = problem.feasible();
  const std::vector<Vector>& grid = problem.grid();
  const Eigen::Index m = static_cast<Eigen::Index>(grid.size());

  // Enumerate candidates per side; the cap guards the product count.
  std::vector<MinCandidate> mins;
  {
    std::vector<Vector> thetas;
    if (act.theta) {
      if (!fs.theta_box) throw ConfigError("oracle: theta block without box");
      thetas = box_mesh(*fs.theta_box, mesh.theta_step, mesh.max_evals);
    }
    std::vector<RkhsFunction> fns;
    if (act.f) {
      const auto axis = axis_values(mesh.coeff_lo, mesh.coeff_hi, mesh.coeff_step);
      for (const Vector& c : product_mesh(axis, m, mesh.max_evals)) {
        RkhsFunction f(problem.kernel(), grid, c);
        if (!fs.f_ball || fs.f_ball->contains(f)) fns.push_back(std::move(f));
      }
    }
    if (act.theta && act.f) {
      if (thetas.size() * fns.size() > mesh.max_evals)
        throw ConfigError("oracle: evaluation cap exceeded");
      for (const auto& t : thetas)
        for (const auto& f : fns) mins.push_back({t, f});
    } else if (act.theta) {
      for (const auto& t : thetas) mins.push_back({t, std::nullopt});
    } else {
      for (const auto& f : fns) mins.push_back({std::nullopt, f});
    }
  }
  std::vector<MaxCandidate> maxs;
  {
    std::vector<DiscreteMeasure> mus;
    if (act.mu) {
      if (simplex_mesh_count(m, mesh.simplex_step) > mesh.max_evals)
        throw ConfigError("oracle: evaluation cap exceeded");
      for (const Vector& w : simplex_mesh(m, mesh.simplex_step))
        mus.push_back(DiscreteMeasure::from_weights(grid, w));
    }
    std::vector<RkhsFunction> hs;
    if (act.h) {
      const auto axis = axis_values(mesh.coeff_lo, mesh.coeff_hi, mesh.coeff_step);
      for (const Vector& c : product_mesh(axis, m, mesh.max_evals)) {
        RkhsFunction h(problem.kernel(), grid, c);
        if (h.norm() <= 1.0) hs.push_back(std::move(h));
      }
    }
    if (act.mu && act.h) {
      if (mus.size() * hs.size() > mesh.max_evals)
        throw ConfigError("oracle: evaluation cap exceeded");
      for (const auto& mu : mus)
        for (const auto& h : hs) maxs.push_back({mu, h});
    } else if (act.mu) {
      for (const auto& mu : mus) maxs.push_back({mu, std::nullopt});
    } else {
      for (const auto& h : hs) maxs.push_back({std::nullopt, h});
    }
  }
  if (mins.empty() || maxs.empty()) throw ConfigError("oracle: empty mesh");
  if (mins.size() * maxs.size() > mesh.max_evals)
    throw ConfigError("oracle: evaluation cap exceeded");

  SaddleScanResult res;
  res.value = std::numeric_limits<double>::infinity();
  SaddleState state;
  std::size_t evals = 0;
  for (const auto& lo : mins) {
    state.theta = lo.theta;
    state.f = lo.f;
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t worst_idx = 0;
    for (std::size_t j = 0; j < maxs.size(); ++j) {
      state.mu = maxs[j].mu;
      state.h = maxs[j].h;
      const double v = problem.value(state);
      ++evals;
      if (v > worst) {
        worst = v;
        worst_idx = j;
      }
    }
    if (worst < res.value) {
      res.value = worst;
      res.arg_min.theta = lo.theta;
      res.arg_min.f = lo.f;
      res.arg_min.mu = maxs[worst_idx].mu;
      res.arg_min.h = maxs[worst_idx].h;
    }
  }
  res.evaluations = evals;

  // Local variation probe around the found saddle; reported as an estimate
  // of the mesh truncation error.
  double var = 0.0;
  const SaddleState& s0 = res.arg_min;
  const double v0 = problem.value(s0);
  auto probe = [&](const SaddleState& s) { var = std::max(var, std::abs(problem.value(s) - v0)); };
  if (act.f && s0.f) {
    for (Eigen::Index j = 0; j < m; ++j) {
      Vector e = Vector::Zero(m);
      e[j] = mesh.coeff_step;
      SaddleState s = s0;
      s.f = combine(1.0, *s0.f, 1.0, RkhsFunction(problem.kernel(), grid, e));
      if (!fs.f_ball || fs.f_ball->contains(*s.f)) probe(s);
    }
  }
  if (act.mu && s0.mu) {
    const Vector w = s0.mu->weights();
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
      Vector w2 = w;
      const double delta = std::min(mesh.simplex_step, w2[j + 1]);
      w2[j] += delta;
      w2[j + 1] -= delta;
      SaddleState s = s0;
      s.mu = DiscreteMeasure::from_weights(grid, w2);
      probe(s);
    }
  }
  if (act.theta && s0.theta) {
    for (Eigen::Index i = 0; i < s0.theta->size(); ++i) {
      Vector t = *s0.theta;
      t[i] = std::min(t[i] + mesh.theta_step, fs.theta_box->hi[i]);
      SaddleState s = s0;
      s.theta = t;
      probe(s);
    }
  }
  res.error_bound = 4.0 * var + 1e-9;
  return res;
}

double brute_force_dro_risk(const DroProblem& p, const Vector& theta, const MeshSpec& mesh) {
  const Eigen::Index m = static_cast<Eigen::Index>(p.grid().size());
  if (simplex_mesh_count(m, mesh.simplex_step) > mesh.max_evals)
    throw ConfigError("oracle: evaluation cap exceeded");
  const Vector c = p.loss_values(theta);
  const Vector& what = p.empirical_weights();
  const Matrix& k = p.grid_gram();
  const double eps_sq = p.epsilon() * p.epsilon();
  double best = c.dot(what);  // the center itself is always feasible
  for (const Vector& w : simplex_mesh(m, mesh.simplex_step)) {
    const Vector d = w - what;
    if (d.dot(k * d) <= eps_sq + 1e-12) best = std::max(best, c.dot(w));
  }
  return best;
}

double finite_difference_check(const SaddleProblem& problem, const SaddleState& u, Block block,
                               double step) {
  if (!(step > 0.0)) throw ConfigError("finite_difference_check: step must be positive");
  const BlockDerivatives d = problem.derivatives(u);
  const std::vector<Vector>& grid = problem.grid();
  auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); };
  double worst = 0.0;

  switch (block) {
    case Block::Theta: {
      if (!u.theta || !d.d_theta) throw ConfigError("fd check: theta block inactive");
      for (Eigen::Index i = 0; i < u.theta->size(); ++i) {
        SaddleState sp = u, sm = u;
        Vector tp = *u.theta, tm = *u.theta;
        tp[i] += step;
        tm[i] -= step;
        sp.theta = tp;
        sm.theta = tm;
        const double fd = (problem.value(sp) - problem.value(sm)) / (2.0 * step);
        worst = std::max(worst, rel(fd, (*d.d_theta)[i]));
      }
      break;
    }
    case Block::F: {
      if (!u.f || !d.d_f) throw ConfigError("fd check: f block inactive");
      // Directions k(z_j, .) over the grid dictionary; the analytic value is
      // <F'_f, k(z_j,.)> = F'_f(z_j) by reproduction.
      for (const Vector& z : grid) {
        const RkhsFunction dir(problem.kernel(), {z}, Vector::Ones(1));
        SaddleState sp = u, sm = u;
        sp.f = combine(1.0, *u.f, step, dir);
        sm.f = combine(1.0, *u.f, -step, dir);
        const double fd = (problem.value(sp) - problem.value(sm)) / (2.0 * step);
        worst = std::max(worst, rel(fd, d.d_f->eval(z)));
      }
      break;
    }
    case Block::Mu: {
      if (!u.mu || !d.d_mu) throw ConfigError("fd check: mu block inactive");
      // Zero-sum tangent basis e_i - e_{i+1}: F'_mu is defined up to an
      // additive constant on the simplex, only tangential action is testable.
      const Vector w = u.mu->weights();
      for (Eigen::Index i = 0; i + 1 < w.size(); ++i) {
        Vector wp = w, wm = w;
        wp[i] += step;
        wp[i + 1] -= step;
        wm[i] -= step;
        wm[i + 1] += step;
        if (wp.minCoeff() <= 0.0 || wm.minCoeff() <= 0.0)
          throw NumericalError("fd check: state too close to the simplex boundary");
        SaddleState sp = u, sm = u;
        sp.mu = DiscreteMeasure::from_weights(u.mu->atoms(), wp);
        sm.mu = DiscreteMeasure::from_weights(u.mu->atoms(), wm);
        const double fd = (problem.value(sp) - problem.value(sm)) / (2.0 * step);
        const double an = d.d_mu->values[i] - d.d_mu->values[i + 1];
        worst = std::max(worst, rel(fd, an));
      }
      break;
    }
    case Block::H: {
      if (!u.h || !d.d_h) throw ConfigError("fd check: h block inactive");
      for (const Vector& z : grid) {
        const RkhsFunction dir(problem.kernel(), {z}, Vector::Ones(1));
        SaddleState sp = u, sm = u;
        sp.h = combine(1.0, *u.h, step, dir);
        sm.h = combine(1.0, *u.h, -step, dir);
        const double fd = (problem.value(sp) - problem.value(sm)) / (2.0 * step);
        worst = std::max(worst, rel(fd, d.d_h->eval(z)));
      }
      break;
    }
  }
  return worst;
}

Vector oracle_dro_minimizer(const DroProblem& p, const MeshSpec& mesh, const Vector& center_w,
                            double epsilon) {
  const Box& box = p.config().theta_box;
  auto risk = [&](const Vector& t) { return dro_risk_with_center(p, t, center_w, epsilon); };
  const auto candidates = box_mesh(box, mesh.theta_step, mesh.max_evals);
  Vector best = candidates.front();
  double best_v = risk(best);
  for (const Vector& t : candidates) {
    const double v = risk(t);
    if (v < best_v) {
      best_v = v;
      best = t;
    }
  }
  if (box.dim() == 1) {
    // Ternary refinement inside the winning bracket.
    double lo = std::max(box.lo[0], best[0] - mesh.theta_step);
    double hi = std::min(box.hi[0], best[0] + mesh.theta_step);
    for (int it = 0; it < 200 && (hi - lo) > 1e-11; ++it) {
      const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
      Vector ta(1), tb(1);
      ta[0] = a;
      tb[0] = b;
      if (risk(ta) <= risk(tb))
        hi = b;
      else
        lo = a;
    }
    Vector mid(1);
    mid[0] = 0.5 * (lo + hi);
    if (risk(mid) < best_v) best = mid;
  }
  return best;
}

Vector oracle_dro_minimizer(const DroProblem& p, const MeshSpec& mesh) {
  return oracle_dro_minimizer(p, mesh, p.empirical_weights(), p.epsilon());
}

}  // namespace kmp
