#include "cape/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include "cape/error.hpp"

namespace cape::gp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " contains non-finite values");
  }
}

void check_training(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("gpr: xs and ys differ in length");
  if (xs.size() < 2) throw InvalidArgument("gpr: need at least two training points");
  check_finite(xs, "gpr xs");
  check_finite(ys, "gpr ys");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw InvalidArgument("gpr: xs must be strictly increasing");
  }
}

bool uniformly_spaced(std::span<const double> xs) {
  const double h = xs[1] - xs[0];
  const double tol = 1e-9 * std::max(1.0, std::abs(xs.back() - xs.front()));
  for (std::size_t i = 2; i < xs.size(); ++i) {
    if (std::abs((xs[i] - xs[i - 1]) - h) > tol) return false;
  }
  return true;
}

// Inverse and log-determinant of a symmetric positive definite Toeplitz
// matrix with first column r, via Durbin's recursion and Trench's algorithm.
// Returns false when a leading minor is not positive.
bool toeplitz_inverse(const std::vector<double>& r, MatrixXd& inv, double& logdet) {
  const std::size_t n = r.size();
  const double r0 = r[0];
  if (!(r0 > 0)) return false;
  inv.resize(n, n);
  if (n == 1) {
    inv(0, 0) = 1.0 / r0;
    logdet = std::log(r0);
    return true;
  }
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = r[k] / r0;

  // Durbin: T_{n-1} y = -t[1..n-1] on the unit-diagonal matrix.
  std::vector<double> y(n - 1), z(n - 1);
  double ld = 0.0;
  double beta = 1.0;
  double alpha = -t[1];
  y[0] = -t[1];
  for (std::size_t k = 1; k + 1 < n; ++k) {
    beta *= (1.0 - alpha * alpha);
    if (!(beta > 0) || !std::isfinite(beta)) return false;
    ld += std::log(beta);
    double acc = t[k + 1];
    for (std::size_t i = 0; i < k; ++i) acc += t[k - i] * y[i];
    alpha = -acc / beta;
    for (std::size_t i = 0; i < k; ++i) z[i] = y[i] + alpha * y[k - 1 - i];
    for (std::size_t i = 0; i < k; ++i) y[i] = z[i];
    y[k] = alpha;
  }
  double last = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) last += t[i + 1] * y[i];
  if (!(last > 0) || !std::isfinite(last)) return false;
  ld += std::log(last);
  logdet = ld + static_cast<double>(n) * std::log(r0);

  // Trench, 1-based indices as in the classical statement.
  const double gamma = 1.0 / last;
  auto nu = [&](std::size_t k) { return gamma * y[n - k - 1]; };  // k in 1..n-1
  auto B = [&](std::size_t i, std::size_t j) -> double& { return inv(i - 1, j - 1); };
  auto put = [&](std::size_t i, std::size_t j, double v) {
    B(i, j) = v;
    B(j, i) = v;
    B(n + 1 - j, n + 1 - i) = v;
    B(n + 1 - i, n + 1 - j) = v;
  };
  put(1, 1, gamma);
  for (std::size_t j = 2; j <= n; ++j) put(1, j, nu(n + 1 - j));
  for (std::size_t i = 2; i <= (n - 1) / 2 + 1; ++i) {
    for (std::size_t j = i; j <= n - i + 1; ++j) {
      put(i, j, B(i - 1, j - 1) + (nu(n + 1 - j) * nu(n + 1 - i) - nu(i - 1) * nu(j - 1)) / gamma);
    }
  }
  inv /= r0;
  return true;
}

double lml_toeplitz(std::span<const double> xs, std::span<const double> ys, const KernelParams& p,
                    std::vector<double>* grad) {
  const std::size_t n = xs.size();
  const double h = (xs.back() - xs.front()) / static_cast<double>(n - 1);
  const double inv_l2 = 1.0 / (p.length_scale * p.length_scale);
  std::vector<double> c(n), d2(n);
  for (std::size_t k = 0; k < n; ++k) {
    d2[k] = (k * h) * (k * h);
    c[k] = p.signal_variance * std::exp(-0.5 * d2[k] * inv_l2);
  }
  MatrixXd inv;
  double logdet = 0.0;
  for (double jitter = kJitter; jitter <= kMaxJitter * (1 + 1e-9); jitter *= 10.0) {
    std::vector<double> r = c;
    r[0] += p.noise_variance + jitter;
    if (!toeplitz_inverse(r, inv, logdet)) continue;

    const Eigen::Map<const VectorXd> y(ys.data(), static_cast<Eigen::Index>(n));
    const VectorXd alpha = inv * y;
    const double lml = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
    if (!std::isfinite(lml)) continue;
    if (grad) {
      // Diagonal-offset sums of alpha alpha^T and of the inverse.
      std::vector<double> a(n, 0.0), b(n, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) {
          sa += alpha[i] * alpha[i + k];
          sb += inv(i, i + k);
        }
        a[k] = k == 0 ? sa : 2.0 * sa;
        b[k] = k == 0 ? sb : 2.0 * sb;
      }
      double g_signal = 0.0, g_length = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double diff = a[k] - b[k];
        g_signal += c[k] * diff;
        g_length += c[k] * d2[k] * inv_l2 * diff;
      }
      const double g_noise = p.noise_variance * (a[0] - b[0]);
      *grad = {0.5 * g_signal, 0.5 * g_length, 0.5 * g_noise};
    }
    return lml;
  }
  throw NumericalError("gpr: Toeplitz factorisation failed after jitter escalation");
}

MatrixXd gram(std::span<const double> xs, const KernelParams& p) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  MatrixXd K(n, n);
  const double inv_l2 = 1.0 / (p.length_scale * p.length_scale);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = xs[i] - xs[j];
      K(i, j) = K(j, i) = p.signal_variance * std::exp(-0.5 * d * d * inv_l2);
    }
  }
  return K;
}

// Cholesky of K + (noise + jitter) I with jitter escalation.
std::optional<Eigen::LLT<MatrixXd>> factor(const MatrixXd& K, double noise) {
  for (double jitter = kJitter; jitter <= kMaxJitter * (1 + 1e-9); jitter *= 10.0) {
    MatrixXd A = K;
    A.diagonal().array() += noise + jitter;
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt;
  }
  return std::nullopt;
}

struct Box {
  std::array<double, 3> lo, hi;
};

Box log_box(const KernelBounds& b) {
  return {{std::log(b.signal_lo), std::log(b.length_lo), std::log(b.noise_lo)},
          {std::log(b.signal_hi), std::log(b.length_hi), std::log(b.noise_hi)}};
}

KernelParams from_log(const std::array<double, 3>& v) {
  return {std::exp(v[0]), std::exp(v[1]), std::exp(v[2])};
}

struct Eval {
  double f = -std::numeric_limits<double>::infinity();
  std::array<double, 3> g{};
};

Eval evaluate(std::span<const double> xs, std::span<const double> ys, bool toeplitz,
              const std::array<double, 3>& theta) {
  Eval e;
  std::vector<double> grad;
  try {
    e.f = toeplitz ? lml_toeplitz(xs, ys, from_log(theta), &grad)
                   : log_marginal_likelihood_dense(xs, ys, from_log(theta), &grad);
    e.g = {grad[0], grad[1], grad[2]};
  } catch (const NumericalError&) {
    e.f = -std::numeric_limits<double>::infinity();
  }
  return e;
}

// Projected BFGS ascent inside the log-space box.
std::pair<std::array<double, 3>, double> ascend(std::span<const double> xs, std::span<const double> ys,
                                                bool toeplitz, std::array<double, 3> x, const Box& box,
                                                int max_iterations) {
  auto clamp = [&](std::array<double, 3> v) {
    for (int i = 0; i < 3; ++i) v[i] = std::clamp(v[i], box.lo[i], box.hi[i]);
    return v;
  };
  x = clamp(x);
  Eval cur = evaluate(xs, ys, toeplitz, x);
  if (!std::isfinite(cur.f)) return {x, cur.f};

  using Mat3 = std::array<std::array<double, 3>, 3>;
  auto identity = [] {
    Mat3 m{};
    for (int i = 0; i < 3; ++i) m[i][i] = 1.0;
    return m;
  };
  Mat3 H = identity();  // inverse Hessian of -f

  for (int iter = 0; iter < max_iterations; ++iter) {
    std::array<bool, 3> active{};
    std::array<double, 3> pg{};
    double pg_norm = 0.0;
    for (int i = 0; i < 3; ++i) {
      // Ascent direction pushes past a bound: freeze that coordinate.
      active[i] = (x[i] <= box.lo[i] + 1e-12 && cur.g[i] < 0) || (x[i] >= box.hi[i] - 1e-12 && cur.g[i] > 0);
      pg[i] = active[i] ? 0.0 : cur.g[i];
      pg_norm = std::max(pg_norm, std::abs(pg[i]));
    }
    if (pg_norm < 1e-7) break;

    std::array<double, 3> d{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) d[i] += H[i][j] * pg[j];
      if (active[i]) d[i] = 0.0;
    }
    double slope = d[0] * pg[0] + d[1] * pg[1] + d[2] * pg[2];
    if (!(slope > 0)) {
      H = identity();
      d = pg;
      slope = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    }
    const double dmax = std::max({std::abs(d[0]), std::abs(d[1]), std::abs(d[2])});
    if (dmax > 2.0) {
      for (double& v : d) v *= 2.0 / dmax;
    }

    double step = 1.0;
    bool accepted = false;
    std::array<double, 3> xn{};
    Eval next;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      for (int i = 0; i < 3; ++i) xn[i] = x[i] + step * d[i];
      xn = clamp(xn);
      next = evaluate(xs, ys, toeplitz, xn);
      double gain = 0.0;
      for (int i = 0; i < 3; ++i) gain += cur.g[i] * (xn[i] - x[i]);
      if (std::isfinite(next.f) && next.f >= cur.f + 1e-4 * gain) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    std::array<double, 3> s{}, yv{};
    double sy = 0.0, s_norm = 0.0;
    for (int i = 0; i < 3; ++i) {
      s[i] = xn[i] - x[i];
      yv[i] = -(next.g[i] - cur.g[i]);  // gradient change of -f
      sy += s[i] * yv[i];
      s_norm = std::max(s_norm, std::abs(s[i]));
    }
    const double improvement = next.f - cur.f;
    x = xn;
    cur = next;
    if (sy > 1e-12) {
      // BFGS update of the inverse Hessian.
      std::array<double, 3> Hy{};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) Hy[i] += H[i][j] * yv[j];
      double yHy = yv[0] * Hy[0] + yv[1] * Hy[1] + yv[2] * Hy[2];
      const double rho = 1.0 / sy;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          H[i][j] += (1.0 + yHy * rho) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
    }
    if (improvement < 1e-12 * (1.0 + std::abs(cur.f)) && s_norm < 1e-9) break;
  }
  return {x, cur.f};
}

}  // namespace

std::vector<double> moving_average(std::span<const double> ys, int omega) {
  if (omega < 1) throw InvalidArgument("moving_average: window must be >= 1");
  if (ys.empty()) throw InvalidArgument("moving_average: empty series");
  std::vector<double> out(ys.size());
  for (std::size_t t = 0; t < ys.size(); ++t) {
    const std::size_t begin = t + 1 >= static_cast<std::size_t>(omega) ? t + 1 - omega : 0;
    double sum = 0.0;
    for (std::size_t j = begin; j <= t; ++j) sum += ys[j];
    out[t] = sum / static_cast<double>(t - begin + 1);
  }
  return out;
}

Normalized normalize(std::span<const double> ys) {
  if (ys.empty()) throw InvalidArgument("normalize: empty series");
  const double n = static_cast<double>(ys.size());
  double mu = 0.0;
  for (double y : ys) mu += y;
  mu /= n;
  double var = 0.0;
  for (double y : ys) var += (y - mu) * (y - mu);
  const double sigma = std::sqrt(var / n);
  Normalized out{std::vector<double>(ys.size(), 0.0), mu, sigma};
  if (sigma >= 1e-12) {
    for (std::size_t i = 0; i < ys.size(); ++i) out.zs[i] = (ys[i] - mu) / sigma;
  }
  return out;
}

SmoothedSeries smooth_series(std::span<const double> ys, int omega) {
  auto smoothed = moving_average(ys, omega);
  auto norm = normalize(smoothed);
  SmoothedSeries s;
  s.xs.resize(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) s.xs[i] = static_cast<double>(i + 1);
  s.ys = std::move(norm.zs);
  s.mu = norm.mu;
  s.sigma = norm.sigma;
  return s;
}

double kernel(const KernelParams& p, double x, double xp, bool same_point) {
  const double d = x - xp;
  double k = p.signal_variance * std::exp(-0.5 * d * d / (p.length_scale * p.length_scale));
  if (same_point) k += p.noise_variance;
  return k;
}

double log_marginal_likelihood(std::span<const double> xs, std::span<const double> ys,
                               const KernelParams& p, std::vector<double>* grad) {
  check_training(xs, ys);
  if (uniformly_spaced(xs)) return lml_toeplitz(xs, ys, p, grad);
  return log_marginal_likelihood_dense(xs, ys, p, grad);
}

double log_marginal_likelihood_dense(std::span<const double> xs, std::span<const double> ys,
                                     const KernelParams& p, std::vector<double>* grad) {
  check_training(xs, ys);
  const MatrixXd Kf = gram(xs, p);
  auto llt = factor(Kf, p.noise_variance);
  if (!llt) throw NumericalError("gpr: Cholesky failed after jitter escalation");
  const Eigen::Map<const VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const VectorXd alpha = llt->solve(y);
  const MatrixXd L = llt->matrixL();
  const double n = static_cast<double>(ys.size());
  const double lml = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
  if (grad) {
    const auto m = static_cast<Eigen::Index>(ys.size());
    const MatrixXd W = alpha * alpha.transpose() - llt->solve(MatrixXd::Identity(m, m));
    const double inv_l2 = 1.0 / (p.length_scale * p.length_scale);
    double g_signal = 0.0, g_length = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double d = xs[i] - xs[j];
        g_signal += W(i, j) * Kf(i, j);
        g_length += W(i, j) * Kf(i, j) * d * d * inv_l2;
      }
    }
    const double g_noise = p.noise_variance * W.trace();
    *grad = {0.5 * g_signal, 0.5 * g_length, 0.5 * g_noise};
  }
  return lml;
}

GprPosterior condition(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> query, const KernelParams& params) {
  check_training(xs, ys);
  check_finite(query, "gpr query");
  const MatrixXd Kf = gram(xs, params);
  auto llt = factor(Kf, params.noise_variance);
  if (!llt) throw NumericalError("gpr: Cholesky failed after jitter escalation");

  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto g = static_cast<Eigen::Index>(query.size());
  MatrixXd Ks(n, g);
  const double inv_l2 = 1.0 / (params.length_scale * params.length_scale);
  for (Eigen::Index j = 0; j < g; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = xs[i] - query[j];
      Ks(i, j) = params.signal_variance * std::exp(-0.5 * d * d * inv_l2);
    }
  }
  const Eigen::Map<const VectorXd> y(ys.data(), n);
  const VectorXd alpha = llt->solve(y);
  const VectorXd mean = Ks.transpose() * alpha;
  const MatrixXd V = llt->matrixL().solve(Ks);
  const VectorXd reduction = V.colwise().squaredNorm().transpose();

  GprPosterior post;
  post.query.assign(query.begin(), query.end());
  post.mean.resize(query.size());
  post.variance.resize(query.size());
  for (Eigen::Index j = 0; j < g; ++j) {
    post.mean[j] = mean[j];
    post.variance[j] = std::max(0.0, params.signal_variance - reduction[j]);
  }
  post.params = params;
  post.log_marginal_likelihood = log_marginal_likelihood(xs, ys, params);
  return post;
}

GprPosterior fit_gpr(std::span<const double> xs, std::span<const double> ys,
                     std::span<const double> query, const FitOptions& options) {
  check_training(xs, ys);
  const Box box = log_box(options.bounds);
  const bool toeplitz = uniformly_spaced(xs);

  std::vector<std::array<double, 3>> starts;
  {
    double var = 0.0, mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    for (double y : ys) var += (y - mean) * (y - mean);
    var = std::max(var / static_cast<double>(ys.size()), 1e-2);
    const double span_x = xs.back() - xs.front();
    starts.push_back({std::log(var), std::log(std::max(span_x / 10.0, 1.0)), std::log(0.1 * var)});
  }
  std::mt19937_64 rng(options.seed);
  while (static_cast<int>(starts.size()) < std::max(1, options.restarts)) {
    std::array<double, 3> s{};
    for (int i = 0; i < 3; ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      s[i] = box.lo[i] + u * (box.hi[i] - box.lo[i]);
    }
    starts.push_back(s);
  }

  std::array<double, 3> best_theta{};
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    auto [theta, f] = ascend(xs, ys, toeplitz, s, box, options.max_iterations);
    if (f > best) {
      best = f;
      best_theta = theta;
    }
  }
  if (!std::isfinite(best)) throw NumericalError("gpr: no feasible hyperparameters found");
  return condition(xs, ys, query, from_log(best_theta));
}

std::vector<Interval> support_interval(const GprPosterior& post, double z) {
  std::vector<Interval> out(post.mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double sd = std::sqrt(std::max(0.0, post.variance[i]));
    const double a = post.mean[i] - z * sd;
    const double b = post.mean[i] + z * sd;
    out[i] = {std::min(a, b), std::max(a, b)};
  }
  return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

}  // namespace cape::gp
