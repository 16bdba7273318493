#include "sdfilter/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const Objective &f, const Vec &x) {
  double v = f(x);
  return std::isfinite(v) ? v : kInf;
}

}  // namespace

Vec fd_gradient(const Objective &f, const Vec &x, double fd_step) {
  const auto k = x.size();
  Vec grad(k);
  Vec probe = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double h = fd_step * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + h;
    const double up = guarded(f, probe);
    probe(i) = x(i) - h;
    const double down = guarded(f, probe);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

MinimizeResult minimize_bfgs(const Objective &f, const Vec &x0,
                             const MinimizeOptions &opts) {
  const auto k = x0.size();
  MinimizeResult res;
  res.method = "bfgs";
  res.x = x0;
  res.value = guarded(f, x0);
  if (!std::isfinite(res.value)) return res;  // unusable start

  Mat Hinv = Mat::Identity(k, k);
  Vec grad = fd_gradient(f, res.x, opts.fd_step);
  if (!grad.allFinite()) return res;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    res.gradient_norm = grad.cwiseAbs().maxCoeff();
    if (res.gradient_norm < opts.gradient_tol) {
      res.converged = true;
      return res;
    }

    Vec direction = -(Hinv * grad);
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {  // stale curvature; reset to steepest descent
      Hinv = Mat::Identity(k, k);
      direction = -grad;
      slope = grad.dot(direction);
    }

    // Backtracking Armijo line search.
    double step = 1.0;
    double f_new = kInf;
    Vec x_new;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = res.x + step * direction;
      f_new = guarded(f, x_new);
      if (f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return res;  // no descent; caller may fall back

    Vec grad_new = fd_gradient(f, x_new, opts.fd_step);
    if (!grad_new.allFinite()) return res;

    const double f_old = res.value;
    Vec s = x_new - res.x;
    Vec y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      Mat I = Mat::Identity(k, k);
      Hinv = (I - rho * s * y.transpose()) * Hinv *
                 (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    res.x = x_new;
    res.value = f_new;
    grad = grad_new;

    if (std::abs(f_old - f_new) <=
        opts.relative_obj_tol * (std::abs(f_old) + 1e-12)) {
      res.gradient_norm = grad.cwiseAbs().maxCoeff();
      res.converged = true;
      return res;
    }
  }
  // Iteration limit: accept if the gradient became small enough.
  res.gradient_norm = grad.cwiseAbs().maxCoeff();
  res.converged = res.gradient_norm < 1e2 * opts.gradient_tol;
  return res;
}

MinimizeResult minimize_nelder_mead(const Objective &f, const Vec &x0,
                                    const MinimizeOptions &opts) {
  const auto k = x0.size();
  MinimizeResult res;
  res.method = "nelder_mead";

  std::vector<Vec> simplex;
  std::vector<double> values;
  simplex.reserve(k + 1);
  simplex.push_back(x0);
  values.push_back(guarded(f, x0));
  for (Eigen::Index i = 0; i < k; ++i) {
    Vec v = x0;
    v(i) += 0.1 * std::max(1.0, std::abs(x0(i)));
    simplex.push_back(v);
    values.push_back(guarded(f, v));
  }

  auto order = [&]() {
    std::vector<int> idx(simplex.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<Vec> s2;
    std::vector<double> v2;
    for (int i : idx) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex.swap(s2);
    values.swap(v2);
  };

  const int max_evals = opts.max_iterations * static_cast<int>(k + 1) * 4;
  int evals = static_cast<int>(k + 1);
  while (evals < max_evals) {
    order();
    ++res.iterations;
    const double best = values.front();
    const double worst = values.back();
    if (std::isfinite(best) &&
        (worst - best <=
         opts.relative_obj_tol * (std::abs(best) + 1e-12) + 1e-14)) {
      res.converged = true;
      break;
    }

    Vec centroid = Vec::Zero(k);
    for (size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i];
    centroid /= static_cast<double>(k);

    Vec reflected = centroid + (centroid - simplex.back());
    double f_r = guarded(f, reflected);
    ++evals;
    if (f_r < values.front()) {
      Vec expanded = centroid + 2.0 * (centroid - simplex.back());
      double f_e = guarded(f, expanded);
      ++evals;
      if (f_e < f_r) {
        simplex.back() = expanded;
        values.back() = f_e;
      } else {
        simplex.back() = reflected;
        values.back() = f_r;
      }
    } else if (f_r < values[values.size() - 2]) {
      simplex.back() = reflected;
      values.back() = f_r;
    } else {
      Vec contracted = centroid + 0.5 * (simplex.back() - centroid);
      double f_c = guarded(f, contracted);
      ++evals;
      if (f_c < values.back()) {
        simplex.back() = contracted;
        values.back() = f_c;
      } else {
        for (size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = simplex.front() + 0.5 * (simplex[i] - simplex.front());
          values[i] = guarded(f, simplex[i]);
          ++evals;
        }
      }
    }
  }
  order();
  res.x = simplex.front();
  res.value = values.front();
  res.gradient_norm =
      fd_gradient(f, res.x, opts.fd_step).cwiseAbs().maxCoeff();
  if (!std::isfinite(res.value)) res.converged = false;
  return res;
}

}  // namespace sdfilter
