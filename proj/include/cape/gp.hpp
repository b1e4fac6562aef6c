#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cape/interval.hpp"

namespace cape::gp {

// Trailing moving average: out[t] is the mean of ys[max(0, t-omega+1) .. t].
std::vector<double> moving_average(std::span<const double> ys, int omega);

struct Normalized {
  std::vector<double> zs;
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
};

// z-scores; a series with sigma < 1e-12 maps to all zeros.
Normalized normalize(std::span<const double> ys);

struct SmoothedSeries {
  std::vector<double> xs;
  std::vector<double> ys;
  double mu = 0.0;
  double sigma = 0.0;
};

// moving_average then normalize, on xs = 1..n.
SmoothedSeries smooth_series(std::span<const double> ys, int omega);

struct KernelParams {
  double signal_variance = 1.0;
  double length_scale = 1.0;
  double noise_variance = 1e-5;
};

struct KernelBounds {
  double signal_lo = 1e-3, signal_hi = 1e3;
  double length_lo = 0.1, length_hi = 100.0;
  double noise_lo = 1e-5, noise_hi = 1.0;
};

inline constexpr double kJitter = 1e-8;
inline constexpr double kMaxJitter = 1e-4;

// signal * exp(-(x - x')^2 / (2 l^2)), plus noise when `same_point`.
double kernel(const KernelParams& p, double x, double xp, bool same_point);

// Log marginal likelihood of zero-mean GP data; the Gram diagonal carries
// kJitter. When `grad` is non-null it receives d/d(log signal, log length,
// log noise). Uses the Toeplitz route for uniformly spaced xs.
double log_marginal_likelihood(std::span<const double> xs, std::span<const double> ys,
                               const KernelParams& p, std::vector<double>* grad = nullptr);

// Same quantity through a dense Cholesky factorisation, for any xs.
double log_marginal_likelihood_dense(std::span<const double> xs, std::span<const double> ys,
                                     const KernelParams& p, std::vector<double>* grad = nullptr);

struct FitOptions {
  KernelBounds bounds;
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 200;
};

struct GprPosterior {
  std::vector<double> query;
  std::vector<double> mean;
  std::vector<double> variance;  // latent f variance, clamped at 0
  KernelParams params;
  double log_marginal_likelihood = 0.0;
};

// Maximises the log marginal likelihood over KernelParams in log space
// (multi-start projected BFGS), then conditions on the data at `query`.
GprPosterior fit_gpr(std::span<const double> xs, std::span<const double> ys,
                     std::span<const double> query, const FitOptions& options = {});

// Posterior for fixed hyperparameters.
GprPosterior condition(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> query, const KernelParams& params);

// [mean - z sd, mean + z sd] at every query point.
std::vector<Interval> support_interval(const GprPosterior& post, double z = 1.96);

// n evenly spaced points covering [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace cape::gp
