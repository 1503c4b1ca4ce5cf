// Metropolis-Hastings kernel over AR(1) proposals: quadratic acceptance path
// for symmetric splittings of Gaussian targets, generic density-ratio path
// otherwise, streamed chain statistics, deterministic seeding.

#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "splitmcmc/gaussian.hpp"
#include "splitmcmc/linalg.hpp"
#include "splitmcmc/random.hpp"
#include "splitmcmc/splitting.hpp"

namespace splitmcmc {

struct ChainConfig {
  enum class Start { ExactSample, Explicit, ProposalTarget };

  std::int64_t n_steps = 0;
  std::int64_t burn_in = 0;
  Start start = Start::ExactSample;
  Vector start_point;  // used when start == Explicit
  bool store_trace = false;
  std::vector<Vector> esjd_directions;

  void validate() const {
    if (n_steps < 0 || burn_in < 0 || burn_in > n_steps) {
      throw ConfigError("require 0 <= burn_in <= n_steps");
    }
  }
};

// Streamed per-direction statistics plus the projected scalar trace
// (needed for autocorrelation-time estimation).
struct DirectionStats {
  Vector direction;
  std::string label;
  Index single_index = -1;  // >= 0 when the direction is a basis vector

  std::int64_t n_jumps = 0;
  double sum_jump_sq = 0.0;    // sum of (w^T dx)^2
  double sum_jump_quad = 0.0;  // sum of (w^T dx)^4, for the ESJD standard error
  double sum_lag = 0.0;        // sum of s_k * s_{k+1}
  std::vector<double> projected;  // s_k = w^T x_k, post burn-in (incl. boundary)

  double project(const Eigen::Ref<const Vector>& x) const {
    if (single_index >= 0) return direction[single_index] * x[single_index];
    return direction.dot(x);
  }
};

struct ChainResult {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Index dim = 0;
  std::int64_t n_steps = 0;
  std::int64_t burn_in = 0;
  std::int64_t accept_count = 0;
  std::int64_t n_samples = 0;  // retained states

  Vector mean_sum;      // sum of x
  Vector diag_sq_sum;   // sum of x.^2
  Matrix cov_sum;       // sum of x x^T, only when dim <= trace cap

  std::vector<DirectionStats> directions;

  // log acceptance ratio moments
  std::int64_t z_count = 0;
  double z_sum = 0.0;
  double z_sq_sum = 0.0;

  // Full-state trace; rows only when store_trace and dim <= trace cap.
  std::vector<std::int64_t> trace_step;
  std::vector<char> trace_accepted;
  std::vector<double> trace_z;
  Matrix trace_x;

  double accept_rate() const {
    return n_steps > 0 ? static_cast<double>(accept_count) / n_steps : 0.0;
  }
  Vector empirical_mean() const {
    return n_samples > 0 ? Vector(mean_sum / n_samples) : Vector::Zero(dim);
  }
  Vector empirical_variance() const {
    if (n_samples < 2) return Vector::Zero(dim);
    Vector m = empirical_mean();
    Vector raw = diag_sq_sum / n_samples - m.cwiseProduct(m);
    return raw * (static_cast<double>(n_samples) / (n_samples - 1));
  }
  Matrix empirical_covariance() const {
    if (cov_sum.size() == 0 || n_samples < 2) return Matrix();
    Vector m = empirical_mean();
    Matrix raw = cov_sum / n_samples - m * m.transpose();
    return raw * (static_cast<double>(n_samples) / (n_samples - 1));
  }
  double z_mean() const { return z_count > 0 ? z_sum / z_count : 0.0; }
  double z_variance() const {
    if (z_count < 2) return 0.0;
    double m = z_mean();
    return (z_sq_sum / z_count - m * m) *
           (static_cast<double>(z_count) / (z_count - 1));
  }
};

// Z = -1/2 y^T (A - calA) y + 1/2 x^T (A - calA) x + (b - beta)^T (y - x).
// Valid only for symmetric splittings.
class QuadraticAcceptance {
 public:
  QuadraticAcceptance(const GaussianTarget& target, const MatrixSplitting& s)
      : delta_(make_delta(target, s)), shift_(target.shift() - s.beta()) {}

  double operator()(const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& y) const {
    return 0.5 * (delta_.quadratic_form(x) - delta_.quadratic_form(y)) +
           shift_.dot(y - x);
  }

 private:
  static SymmetricOperator make_delta(const GaussianTarget& target,
                                      const MatrixSplitting& s) {
    if (target.dim() != s.dim()) {
      throw DimensionMismatch("target/splitting size mismatch");
    }
    if (!s.symmetric()) {
      throw NotSymmetricSplitting(
          "quadratic acceptance requires a symmetric splitting");
    }
    SquareOperator diff = subtract(target.precision().as_square(),
                                   s.proposal_precision().as_square());
    return SymmetricOperator::from_square(diff);
  }

  SymmetricOperator delta_;
  Vector shift_;
};

inline double log_accept_ratio_quadratic(const GaussianTarget& target,
                                         const MatrixSplitting& s,
                                         const Eigen::Ref<const Vector>& x,
                                         const Eigen::Ref<const Vector>& y) {
  return QuadraticAcceptance(target, s)(x, y);
}

// log pi(y) - log pi(x) + log q(y, x) - log q(x, y); the shared Gaussian
// normalizers cancel.
inline double log_accept_ratio_generic(const LogDensity& logpi,
                                       const Ar1Proposal& p,
                                       const Eigen::Ref<const Vector>& x,
                                       const Eigen::Ref<const Vector>& y) {
  return logpi(y) - logpi(x) + p.log_transition_unnorm(y, x) -
         p.log_transition_unnorm(x, y);
}

namespace detail {

inline Index detect_single_index(const Vector& w) {
  Index idx = -1;
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) {
      if (idx >= 0) return -1;
      idx = i;
    }
  }
  return idx;
}

// Core MH loop shared by the Gaussian and generic paths.
template <typename ZFunc>
ChainResult run_chain_impl(const Ar1Proposal& prop, const ChainConfig& cfg,
                           RandomStream& rng, Vector x, ZFunc&& log_ratio) {
  cfg.validate();
  const Index d = prop.dim();
  if (x.size() != d) throw DimensionMismatch("start point dimension");

  ChainResult res;
  res.seed = rng.seed();
  res.stream = rng.stream();
  res.dim = d;
  res.n_steps = cfg.n_steps;
  res.burn_in = cfg.burn_in;
  res.mean_sum = Vector::Zero(d);
  res.diag_sq_sum = Vector::Zero(d);
  const bool track_cov = d <= numerics().trace_dim_cap;
  if (track_cov) res.cov_sum = Matrix::Zero(d, d);
  // Scalar columns are kept whenever a trace is requested; x coordinates
  // only below the dimension cap.
  const bool keep_trace = cfg.store_trace;
  const bool keep_x = cfg.store_trace && d <= numerics().trace_dim_cap;
  const std::int64_t retained = cfg.n_steps - cfg.burn_in;
  if (keep_trace && retained > 0) {
    res.trace_step.reserve(retained);
    res.trace_accepted.reserve(retained);
    res.trace_z.reserve(retained);
    if (keep_x) res.trace_x.resize(retained, d);
  }

  res.directions.reserve(cfg.esjd_directions.size());
  for (std::size_t k = 0; k < cfg.esjd_directions.size(); ++k) {
    DirectionStats ds;
    ds.direction = cfg.esjd_directions[k];
    if (ds.direction.size() != d) {
      throw DimensionMismatch("ESJD direction dimension");
    }
    ds.label = "w" + std::to_string(k);
    ds.single_index = detect_single_index(ds.direction);
    if (retained >= 0) ds.projected.reserve(retained + 1);
    res.directions.push_back(std::move(ds));
  }

  std::vector<double> s_prev(res.directions.size(), 0.0);
  for (std::int64_t step = 0; step < cfg.n_steps; ++step) {
    if (step == cfg.burn_in) {
      for (std::size_t k = 0; k < res.directions.size(); ++k) {
        s_prev[k] = res.directions[k].project(x);
        res.directions[k].projected.push_back(s_prev[k]);
      }
    }
    Vector y = prop.propose(x, rng);
    double z = log_ratio(x, y);
    double u = rng.uniform01();
    bool accepted = std::log(u) < z;
    if (accepted) {
      x = std::move(y);
      ++res.accept_count;
    }

    if (step >= cfg.burn_in) {
      ++res.n_samples;
      res.mean_sum += x;
      res.diag_sq_sum += x.cwiseProduct(x);
      if (track_cov) res.cov_sum += x * x.transpose();
      ++res.z_count;
      res.z_sum += z;
      res.z_sq_sum += z * z;
      for (std::size_t k = 0; k < res.directions.size(); ++k) {
        DirectionStats& ds = res.directions[k];
        double s = ds.project(x);
        double jump = s - s_prev[k];
        double j2 = jump * jump;
        ds.sum_jump_sq += j2;
        ds.sum_jump_quad += j2 * j2;
        ds.sum_lag += s_prev[k] * s;
        ++ds.n_jumps;
        ds.projected.push_back(s);
        s_prev[k] = s;
      }
      if (keep_trace) {
        res.trace_step.push_back(step);
        res.trace_accepted.push_back(accepted ? 1 : 0);
        res.trace_z.push_back(z);
        if (keep_x) res.trace_x.row(res.trace_step.size() - 1) = x;
      }
    }
  }
  return res;
}

inline Vector initial_state(const GaussianTarget& target,
                            const MatrixSplitting& s, const ChainConfig& cfg,
                            RandomStream& rng) {
  switch (cfg.start) {
    case ChainConfig::Start::ExactSample:
      return target.exact_sample(rng);
    case ChainConfig::Start::Explicit:
      return cfg.start_point;
    case ChainConfig::Start::ProposalTarget: {
      ProposalTarget pt = proposal_target(s);
      return GaussianTarget(pt.precision, s.beta()).exact_sample(rng);
    }
  }
  throw ConfigError("unknown start mode");
}

}  // namespace detail

// MH chain on a Gaussian target.  Uses the quadratic acceptance path when
// the splitting is symmetric, the generic density-ratio path otherwise.
inline ChainResult run_chain(const GaussianTarget& target,
                             const ProposalPair& pp, const ChainConfig& cfg,
                             RandomStream& rng) {
  Vector x0 = detail::initial_state(target, pp.splitting, cfg, rng);
  if (pp.splitting.symmetric()) {
    QuadraticAcceptance q(target, pp.splitting);
    return detail::run_chain_impl(pp.proposal, cfg, rng, std::move(x0), q);
  }
  LogDensity logpi = LogDensity::from_target(target);
  const Ar1Proposal& prop = pp.proposal;
  auto z = [&](const Vector& x, const Vector& y) {
    return log_accept_ratio_generic(logpi, prop, x, y);
  };
  return detail::run_chain_impl(prop, cfg, rng, std::move(x0), z);
}

// Generic-target MH chain over a fixed AR(1) proposal.  Requires an explicit
// start (there is no exact sampler for an arbitrary density).
inline ChainResult run_chain(const LogDensity& logpi, const Ar1Proposal& prop,
                             const ChainConfig& cfg, RandomStream& rng) {
  if (cfg.start != ChainConfig::Start::Explicit) {
    throw ConfigError("generic-target chains require an explicit start point");
  }
  auto z = [&](const Vector& x, const Vector& y) {
    return log_accept_ratio_generic(logpi, prop, x, y);
  };
  return detail::run_chain_impl(prop, cfg, rng, cfg.start_point, z);
}

// Chain k uses stream id base_stream + k; the result vector is indexed by k
// and bitwise independent of scheduling order.
inline std::vector<ChainResult> run_parallel_chains(
    const GaussianTarget& target, const ProposalPair& pp,
    const ChainConfig& cfg, std::uint64_t seed, std::uint64_t base_stream,
    int n_chains, int max_threads = 0) {
  if (n_chains < 1) throw ConfigError("n_chains must be >= 1");
  std::vector<ChainResult> results(n_chains);
  unsigned hw = std::thread::hardware_concurrency();
  int workers = max_threads > 0 ? max_threads : (hw > 0 ? static_cast<int>(hw) : 1);
  workers = std::min(workers, n_chains);
  if (workers <= 1) {
    for (int k = 0; k < n_chains; ++k) {
      RandomStream rng(seed, base_stream + static_cast<std::uint64_t>(k));
      results[k] = run_chain(target, pp, cfg, rng);
    }
    return results;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int k = w; k < n_chains; k += workers) {
        RandomStream rng(seed, base_stream + static_cast<std::uint64_t>(k));
        results[k] = run_chain(target, pp, cfg, rng);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

// Trace CSV: one row per retained step, `step,accepted,z,x_0,...`.
inline void write_trace_csv(std::ostream& out, const ChainResult& res) {
  out << "step,accepted,z";
  for (Index j = 0; j < res.trace_x.cols(); ++j) out << ",x_" << j;
  out << "\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < res.trace_step.size(); ++i) {
    out << res.trace_step[i] << ',' << static_cast<int>(res.trace_accepted[i])
        << ',' << res.trace_z[i];
    for (Index j = 0; j < res.trace_x.cols(); ++j) {
      out << ',' << res.trace_x(i, j);
    }
    out << "\n";
  }
}

}  // namespace splitmcmc
