#ifndef SDFILTER_OPTIMIZE_HPP_
#define SDFILTER_OPTIMIZE_HPP_

#include <functional>
#include <string>

#include "sdfilter/numerics.hpp"

namespace sdfilter {

using Objective = std::function<double(const Vec &)>;

struct MinimizeOptions {
  int max_iterations = 300;
  double gradient_tol = 1e-6;      // infinity norm
  double relative_obj_tol = 1e-10;
  double fd_step = 1e-6;           // relative central-difference step
};

struct MinimizeResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::string method;
};

// Central finite-difference gradient with step fd_step * max(1, |x_i|).
Vec fd_gradient(const Objective &f, const Vec &x, double fd_step);

// Quasi-Newton (BFGS) line-search minimizer with finite-difference
// gradients. Non-finite objective values are treated as +inf.
MinimizeResult minimize_bfgs(const Objective &f, const Vec &x0,
                             const MinimizeOptions &opts = {});

// Derivative-free Nelder-Mead simplex minimizer.
MinimizeResult minimize_nelder_mead(const Objective &f, const Vec &x0,
                                    const MinimizeOptions &opts = {});

}  // namespace sdfilter

#endif  // SDFILTER_OPTIMIZE_HPP_
