#ifndef SDFILTER_PARTICLE_HPP_
#define SDFILTER_PARTICLE_HPP_

#include <cstdint>
#include <vector>

#include "sdfilter/observation_model.hpp"
#include "sdfilter/score_engine.hpp"

namespace sdfilter {

// Bootstrap particle filter output. Per-step moments are weighted moments of
// the particle cloud; clouds and weights are retained for the backward
// smoother when requested.
struct ParticleFilterResult {
  Mat predictive_mean;   // n x m, E[alpha_t | Y_{t-1}]
  Mat predictive_var;    // n x m, diagonal of the weighted covariance
  Mat filtered_mean;     // n x m, E[alpha_t | Y_t]
  Mat filtered_var;      // n x m
  Vec ess;               // effective sample size per step
  double loglik = 0.0;

  // Post-update (pre-resampling) clouds; empty unless store_clouds.
  std::vector<Mat> clouds;          // per step: N x m
  std::vector<Vec> cloud_weights;   // per step: N, normalized
};

// Bootstrap proposal from the transition, weighting by the observation
// density, systematic resampling when ESS < N/2.
ParticleFilterResult particle_filter(const ObservationModel &model,
                                     const TransitionSpec &trans, const Mat &y,
                                     int particle_count, std::uint64_t seed,
                                     bool store_clouds = true,
                                     const std::optional<GaussianState> &init = {});

struct ParticleSmootherResult {
  Mat smoothed_mean;  // n x m; rows before first_step are zero
  Mat smoothed_var;   // n x m
  int first_step = 0;
  int trajectories = 0;
};

// Backward-simulation smoother: draws M state trajectories by reweighting
// filtered clouds with the Gaussian transition density. The backward pass
// stops at first_step (inclusive).
ParticleSmootherResult particle_smoother(const ParticleFilterResult &filter,
                                         const TransitionSpec &trans,
                                         int trajectories, std::uint64_t seed,
                                         int first_step = 0);

}  // namespace sdfilter

#endif  // SDFILTER_PARTICLE_HPP_
