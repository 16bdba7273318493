#include "sdfilter/particle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

// Weighted mean and diagonal variance of an N x m cloud.
void weighted_moments(const Mat &cloud, const Vec &w, Eigen::Ref<Eigen::RowVectorXd> mean,
                      Eigen::Ref<Eigen::RowVectorXd> var) {
  mean = w.transpose() * cloud;
  var = (cloud.rowwise() - mean).array().square().matrix().transpose() * w;
}

std::vector<int> systematic_resample_indices(const Vec &w, double u01) {
  const int n = static_cast<int>(w.size());
  std::vector<int> idx(n);
  double cum = w(0);
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + u01) / static_cast<double>(n);
    while (u > cum && j + 1 < n) cum += w(++j);
    idx[i] = j;
  }
  return idx;
}

}  // namespace

ParticleFilterResult particle_filter(const ObservationModel &model,
                                     const TransitionSpec &trans, const Mat &y,
                                     int particle_count, std::uint64_t seed,
                                     bool store_clouds,
                                     const std::optional<GaussianState> &init) {
  trans.validate();
  if (particle_count < 100)
    throw InvalidInputError("particle filter requires at least 100 particles");
  if (y.rows() < 1) throw InvalidInputError("observation sequence is empty");
  if (y.cols() != model.obs_dim())
    throw InvalidInputError("observation dimension does not match model");

  const auto m = trans.state_dim();
  const int n = static_cast<int>(y.rows());
  const int N = particle_count;

  GaussianState start = init ? *init
                             : stationary_initial_state(trans.T, trans.Q,
                                                        trans.c);
  Mat init_chol = psd_cholesky(start.P);
  Mat q_chol = psd_cholesky(trans.Q);

  RngEngine rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Mat cloud(N, m);
  for (int i = 0; i < N; ++i) {
    Vec z(m);
    for (Eigen::Index d = 0; d < m; ++d) z(d) = gauss(rng);
    cloud.row(i) = (start.a + init_chol * z).transpose();
  }
  Vec weights = Vec::Constant(N, 1.0 / N);

  ParticleFilterResult out;
  out.predictive_mean.resize(n, m);
  out.predictive_var.resize(n, m);
  out.filtered_mean.resize(n, m);
  out.filtered_var.resize(n, m);
  out.ess.resize(n);
  if (store_clouds) {
    out.clouds.reserve(n);
    out.cloud_weights.reserve(n);
  }

  Vec logw(N);
  Mat zero_p = Mat::Zero(m, m);
  for (int t = 0; t < n; ++t) {
    weighted_moments(cloud, weights, out.predictive_mean.row(t),
                     out.predictive_var.row(t));

    Vec y_t = y.row(t).transpose();
    for (int i = 0; i < N; ++i)
      logw(i) = model.log_density(y_t, cloud.row(i).transpose(), zero_p);
    const double max_lw = logw.maxCoeff();
    if (!std::isfinite(max_lw))
      throw ParticleDegeneracyError("all particle weights underflowed", t);
    Vec incr = (logw.array() - max_lw).exp();
    const double marginal = weights.dot(incr);
    if (!(marginal > 0.0))
      throw ParticleDegeneracyError("total particle weight underflowed", t);
    out.loglik += max_lw + std::log(marginal);

    weights = (weights.array() * incr.array()) / marginal;
    weighted_moments(cloud, weights, out.filtered_mean.row(t),
                     out.filtered_var.row(t));
    const double ess = 1.0 / weights.squaredNorm();
    out.ess(t) = ess;
    if (store_clouds) {
      out.clouds.push_back(cloud);
      out.cloud_weights.push_back(weights);
    }

    if (ess < 0.5 * N) {
      auto idx = systematic_resample_indices(weights, unif(rng));
      Mat resampled(N, m);
      for (int i = 0; i < N; ++i) resampled.row(i) = cloud.row(idx[i]);
      cloud.swap(resampled);
      weights.setConstant(1.0 / N);
    }

    if (t + 1 < n) {
      for (int i = 0; i < N; ++i) {
        Vec z(m);
        for (Eigen::Index d = 0; d < m; ++d) z(d) = gauss(rng);
        cloud.row(i) =
            (trans.c + trans.T * cloud.row(i).transpose() + q_chol * z)
                .transpose();
      }
    }
  }
  return out;
}

ParticleSmootherResult particle_smoother(const ParticleFilterResult &filter,
                                         const TransitionSpec &trans,
                                         int trajectories, std::uint64_t seed,
                                         int first_step) {
  const int n = static_cast<int>(filter.clouds.size());
  if (n == 0)
    throw InvalidInputError(
        "particle smoother requires a filter run with stored clouds");
  if (trajectories < 1)
    throw InvalidInputError("need at least one backward trajectory");
  if (first_step < 0 || first_step >= n)
    throw InvalidInputError("first_step out of range");

  const auto m = trans.state_dim();
  const int N = static_cast<int>(filter.clouds[0].rows());
  const int M = trajectories;

  // Transition precision for the backward reweighting.
  Mat q_inv;
  const bool univariate = m == 1;
  double q_scalar = 0.0;
  if (univariate) {
    q_scalar = trans.Q(0, 0);
    if (!(q_scalar > 0.0))
      throw InvalidInputError("backward smoothing requires Q > 0");
  } else {
    q_inv = detail::spd_inverse(trans.Q, -1).inverse;
  }

  RngEngine rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto sample_categorical = [&](const Vec &w) {
    const double u = unif(rng) * w.sum();
    double cum = 0.0;
    for (int i = 0; i < static_cast<int>(w.size()); ++i) {
      cum += w(i);
      if (u <= cum) return i;
    }
    return static_cast<int>(w.size()) - 1;
  };

  ParticleSmootherResult out;
  out.first_step = first_step;
  out.trajectories = M;
  out.smoothed_mean = Mat::Zero(n, m);
  out.smoothed_var = Mat::Zero(n, m);
  Mat sum = Mat::Zero(n, m);
  Mat sumsq = Mat::Zero(n, m);

  Vec back_w(N);
  for (int j = 0; j < M; ++j) {
    int idx = sample_categorical(filter.cloud_weights[n - 1]);
    Vec state = filter.clouds[n - 1].row(idx).transpose();
    sum.row(n - 1) += state.transpose();
    sumsq.row(n - 1) += state.array().square().matrix().transpose();

    for (int t = n - 2; t >= first_step; --t) {
      const Mat &cloud = filter.clouds[t];
      const Vec &w = filter.cloud_weights[t];
      if (univariate) {
        const double target = state(0) - trans.c(0);
        back_w = (w.array() *
                  (-(target - trans.T(0, 0) * cloud.col(0).array())
                        .square() /
                   (2.0 * q_scalar))
                      .exp())
                     .matrix();
      } else {
        for (int i = 0; i < N; ++i) {
          Vec diff =
              state - trans.c - trans.T * cloud.row(i).transpose();
          back_w(i) = w(i) * std::exp(-0.5 * diff.dot(q_inv * diff));
        }
      }
      const double total = back_w.sum();
      if (!(total > 0.0)) {
        // All transition weights underflowed; fall back to the nearest
        // particle under the transition metric.
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < N; ++i) {
          Vec diff = state - trans.c - trans.T * cloud.row(i).transpose();
          const double d = diff.squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        idx = best;
      } else {
        idx = sample_categorical(back_w);
      }
      state = cloud.row(idx).transpose();
      sum.row(t) += state.transpose();
      sumsq.row(t) += state.array().square().matrix().transpose();
    }
  }

  for (int t = first_step; t < n; ++t) {
    out.smoothed_mean.row(t) = sum.row(t) / static_cast<double>(M);
    out.smoothed_var.row(t) =
        sumsq.row(t) / static_cast<double>(M) -
        out.smoothed_mean.row(t).array().square().matrix();
  }
  return out;
}

}  // namespace sdfilter
