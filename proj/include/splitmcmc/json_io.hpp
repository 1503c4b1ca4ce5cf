// JSON schemas: target specs, proposal specs, experiment configs, and the
// prediction report.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "splitmcmc/gaussian.hpp"
#include "splitmcmc/proposals.hpp"
#include "splitmcmc/spectral.hpp"

namespace splitmcmc {

using Json = nlohmann::json;

namespace detail {

inline const Json& require_field(const Json& j, const std::string& key,
                                 const std::string& context) {
  if (!j.contains(key)) {
    throw ConfigError(context + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

inline Vector parse_vector(const Json& j, const std::string& context) {
  if (!j.is_array()) throw ConfigError(context + ": expected an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ConfigError(context + "[" + std::to_string(i) + "]: not a number");
    }
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Matrix parse_matrix(const Json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(context + ": expected a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ConfigError(context + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace detail

// Diagonal eigenvalue spec.  kind=power sets lambda_i = i^kappa, so the
// precision entries are i^(2 kappa); kind=explicit lists the precision
// eigenvalues lambda_i^2 directly.
inline Vector parse_eigenvalues(const Json& j, std::optional<Index> d_override,
                                const std::string& context) {
  std::string kind =
      detail::require_field(j, "kind", context).get<std::string>();
  if (kind == "power") {
    double kappa = detail::require_field(j, "kappa", context).get<double>();
    Index d = d_override
                  ? *d_override
                  : detail::require_field(j, "d", context).get<Index>();
    if (d < 1) throw ConfigError(context + ": d must be >= 1");
    Vector v(d);
    for (Index i = 0; i < d; ++i) {
      v[i] = std::pow(static_cast<double>(i + 1), 2.0 * kappa);
    }
    return v;
  }
  if (kind == "explicit") {
    if (d_override) {
      throw ConfigError(context +
                        ": cannot sweep d with explicit eigenvalues");
    }
    return detail::parse_vector(detail::require_field(j, "values", context),
                                context + ".values");
  }
  throw ConfigError(context + ": unknown eigenvalue kind \"" + kind + "\"");
}

// {"type":"diagonal","eigenvalues":{...},"b":"zero"|[...]} or
// {"type":"dense","A":[[...]],"b":[...]}.
inline GaussianTarget parse_target(const Json& j,
                                   std::optional<Index> d_override =
                                       std::nullopt) {
  const std::string context = "target";
  std::string type =
      detail::require_field(j, "type", context).get<std::string>();
  if (type == "diagonal") {
    Vector eig = parse_eigenvalues(
        detail::require_field(j, "eigenvalues", context), d_override,
        context + ".eigenvalues");
    Vector b;
    const Json& bj = detail::require_field(j, "b", context);
    if (bj.is_string() && bj.get<std::string>() == "zero") {
      b = Vector::Zero(eig.size());
    } else {
      b = detail::parse_vector(bj, context + ".b");
      if (b.size() != eig.size()) {
        throw ConfigError(context + ".b: length mismatch with eigenvalues");
      }
    }
    return GaussianTarget(SymmetricOperator::from_diagonal(std::move(eig)),
                          std::move(b));
  }
  if (type == "dense") {
    if (d_override) {
      throw ConfigError(context + ": cannot sweep d with a dense target");
    }
    Matrix a = detail::parse_matrix(detail::require_field(j, "A", context),
                                    context + ".A");
    Vector b = detail::parse_vector(detail::require_field(j, "b", context),
                                    context + ".b");
    return GaussianTarget(SymmetricOperator::from_dense(std::move(a)),
                          std::move(b));
  }
  throw ConfigError(context + ": unknown target type \"" + type + "\"");
}

// Power-law exponent kappa of a target spec, 0 when not a power target.
inline double target_kappa(const Json& j) {
  if (j.contains("eigenvalues") && j["eigenvalues"].contains("kind") &&
      j["eigenvalues"]["kind"] == "power") {
    return j["eigenvalues"].value("kappa", 0.0);
  }
  return 0.0;
}

// Operator spec for a preconditioner / mass matrix: "identity",
// {"type":"diagonal","values":[...]}, or {"type":"dense","A":[[...]]}.
inline std::optional<SymmetricOperator> parse_operator(
    const Json& j, const std::string& context) {
  if (j.is_string()) {
    if (j.get<std::string>() == "identity") return std::nullopt;
    throw ConfigError(context + ": unknown operator \"" +
                      j.get<std::string>() + "\"");
  }
  std::string type =
      detail::require_field(j, "type", context).get<std::string>();
  if (type == "diagonal") {
    return SymmetricOperator::from_diagonal(detail::parse_vector(
        detail::require_field(j, "values", context), context + ".values"));
  }
  if (type == "dense") {
    return SymmetricOperator::from_dense(detail::parse_matrix(
        detail::require_field(j, "A", context), context + ".A"));
  }
  throw ConfigError(context + ": unknown operator type \"" + type + "\"");
}

// Proposal spec.  Step size comes either from "h" directly or from "l"
// through the family scaling law h = l^2 d^-r (Langevin, r = 1/3 + 2 kappa)
// or h = l d^-r (HMC, r = 1/4 + kappa).  Trajectory length comes from "L"
// directly or from "T" through L = floor(T / h).
struct ProposalSpec {
  Family family = Family::Mala;
  std::optional<double> h;
  std::optional<double> l;
  double theta = 0.0;
  std::optional<std::int64_t> steps;
  std::optional<double> integration_time;
  std::optional<SymmetricOperator> preconditioner;
};

inline ProposalSpec parse_proposal(const Json& j) {
  const std::string context = "proposal";
  ProposalSpec spec;
  std::string family =
      detail::require_field(j, "family", context).get<std::string>();
  if (family == "mala") {
    spec.family = Family::Mala;
  } else if (family == "theta_langevin") {
    spec.family = Family::ThetaLangevin;
  } else if (family == "hmc") {
    spec.family = Family::Hmc;
  } else if (family == "ula") {
    spec.family = Family::Ula;
  } else {
    throw ConfigError(context + ": unknown family \"" + family + "\"");
  }
  if (j.contains("h")) spec.h = j["h"].get<double>();
  if (j.contains("l")) spec.l = j["l"].get<double>();
  if (!spec.h && !spec.l) {
    throw ConfigError(context + ": needs \"h\" or \"l\"");
  }
  spec.theta = j.value("theta", 0.0);
  if (j.contains("L")) spec.steps = j["L"].get<std::int64_t>();
  if (j.contains("T")) spec.integration_time = j["T"].get<double>();
  if (spec.family == Family::Hmc && !spec.steps && !spec.integration_time) {
    throw ConfigError(context + ": hmc needs \"L\" or \"T\"");
  }
  if (j.contains("V")) {
    spec.preconditioner = parse_operator(j["V"], context + ".V");
  }
  return spec;
}

inline double scaling_exponent(Family family, double kappa) {
  return family == Family::Hmc ? 0.25 + kappa : 1.0 / 3.0 + 2.0 * kappa;
}

// Resolved per-run parameters after applying sweeps and scaling laws.
struct ResolvedProposal {
  double h = 0.0;
  double theta = 0.0;
  std::int64_t steps = 1;
  double l = 0.0;  // informational; 0 when not derived from a scaling law
};

inline ResolvedProposal resolve_proposal(const ProposalSpec& spec, Index d,
                                         double kappa) {
  ResolvedProposal r;
  r.theta = spec.theta;
  if (spec.h) {
    r.h = *spec.h;
    if (spec.l) throw ConfigError("proposal: give \"h\" or \"l\", not both");
  } else {
    double expn = scaling_exponent(spec.family, kappa);
    double dr = std::pow(static_cast<double>(d), -expn);
    r.l = *spec.l;
    r.h = spec.family == Family::Hmc ? r.l * dr : r.l * r.l * dr;
  }
  if (spec.family == Family::Hmc) {
    if (spec.steps) {
      r.steps = *spec.steps;
    } else {
      r.steps = static_cast<std::int64_t>(
          std::floor(*spec.integration_time / r.h));
      if (r.steps < 1) r.steps = 1;
    }
  }
  return r;
}

// Builds the runnable pair for a resolved spec; ULA has no MH pair and is
// driven separately.
inline ProposalPair build_proposal(const GaussianTarget& target,
                                   const ProposalSpec& spec,
                                   const ResolvedProposal& r) {
  switch (spec.family) {
    case Family::Mala:
      return mala(target, r.h);
    case Family::ThetaLangevin: {
      LangevinConfig cfg;
      cfg.h = r.h;
      cfg.theta = r.theta;
      cfg.preconditioner = spec.preconditioner;
      return theta_langevin(target, cfg);
    }
    case Family::Hmc: {
      HmcConfig cfg;
      cfg.h = r.h;
      cfg.steps = r.steps;
      cfg.preconditioner = spec.preconditioner;
      return hmc_proposal(target, cfg);
    }
    case Family::Ula:
      throw ConfigError("ULA is a chain runner, not an MH proposal");
  }
  throw ConfigError("unknown family");
}

struct ChainSpec {
  std::int64_t n_steps = 10000;
  std::int64_t burn_in = 0;
  int n_chains = 1;
  std::uint64_t seed = 1;
  std::vector<Index> modes;  // 1-based eigenmode indices
};

struct SweepSpec {
  std::string parameter;  // "h" | "l" | "d" | "theta" | "L"
  std::vector<double> values;
};

struct ExperimentConfig {
  Json target_spec;
  ProposalSpec proposal;
  ChainSpec chain;
  std::optional<SweepSpec> sweep;
  std::string out_dir;
  double kappa = 0.0;  // from the target's power law
};

inline ExperimentConfig parse_experiment(const Json& j) {
  ExperimentConfig cfg;
  cfg.target_spec = detail::require_field(j, "target", "config");
  cfg.kappa = target_kappa(cfg.target_spec);
  cfg.proposal = parse_proposal(detail::require_field(j, "proposal", "config"));
  if (j.contains("chain")) {
    const Json& c = j["chain"];
    cfg.chain.n_steps = c.value("n_steps", cfg.chain.n_steps);
    cfg.chain.burn_in = c.value("burn_in", cfg.chain.burn_in);
    cfg.chain.n_chains = c.value("n_chains", cfg.chain.n_chains);
    cfg.chain.seed = c.value("seed", cfg.chain.seed);
    if (c.contains("directions")) {
      for (const auto& v : c["directions"]) {
        Index mode = v.get<Index>();
        if (mode < 1) throw ConfigError("chain.directions: modes are 1-based");
        cfg.chain.modes.push_back(mode);
      }
    }
  }
  if (cfg.chain.modes.empty()) cfg.chain.modes.push_back(1);
  if (j.contains("sweep")) {
    SweepSpec s;
    s.parameter = detail::require_field(j["sweep"], "parameter", "sweep")
                      .get<std::string>();
    for (const auto& v :
         detail::require_field(j["sweep"], "values", "sweep")) {
      s.values.push_back(v.get<double>());
    }
    if (s.values.empty()) throw ConfigError("sweep.values must be non-empty");
    cfg.sweep = std::move(s);
  }
  cfg.out_dir = j.value("output", "");
  return cfg;
}

// Eigen-structure of VA: ascending eigenvalues and the jump directions
// w_i = V^{-1/2} q_i used for directional ESJD.
struct ModeBasis {
  Vector lambda2;                 // ascending eigenvalues of VA
  std::vector<Vector> directions;  // per requested mode

  static ModeBasis build(const GaussianTarget& target,
                         const std::optional<SymmetricOperator>& v,
                         const std::vector<Index>& modes) {
    ModeBasis basis;
    const Index d = target.dim();
    for (Index mode : modes) {
      if (mode < 1 || mode > d) {
        throw ConfigError("mode index out of range for dimension " +
                          std::to_string(d));
      }
    }
    SymmetricOperator vv = v ? *v : SymmetricOperator::identity(d);
    if (target.precision().is_diagonal() && vv.is_diagonal()) {
      Vector va = vv.diagonal_values().cwiseProduct(
          target.precision().diagonal_values());
      SpectralDecomposition eig =
          spectral_decompose(SymmetricOperator::from_diagonal(va));
      basis.lambda2 = eig.eigenvalues();
      for (Index mode : modes) {
        Vector q = eig.eigenvector(mode - 1);
        Index coord = 0;
        for (Index i = 0; i < d; ++i) {
          if (q[i] != 0.0) coord = i;
        }
        q[coord] /= std::sqrt(vv.diagonal_values()[coord]);
        basis.directions.push_back(std::move(q));
      }
      return basis;
    }
    SpectralDecomposition v_eig = spectral_decompose(vv);
    if (v_eig.eigenvalues().minCoeff() <= 0.0) {
      throw NotPositiveDefinite("preconditioner must be SPD");
    }
    Matrix q = v_eig.q_dense();
    Vector vs = v_eig.eigenvalues().cwiseSqrt();
    Matrix v_half = q * vs.asDiagonal() * q.transpose();
    Matrix v_mhalf = q * vs.cwiseInverse().asDiagonal() * q.transpose();
    Matrix b = v_half * target.precision().to_dense() * v_half;
    SpectralDecomposition b_eig =
        spectral_decompose(SymmetricOperator::from_dense(std::move(b)));
    basis.lambda2 = b_eig.eigenvalues();
    for (Index mode : modes) {
      basis.directions.push_back(v_mhalf * b_eig.eigenvector(mode - 1));
    }
    return basis;
  }
};

// Prediction report: {mu, sigma2, acceptance, lyapunov:[...], per_mode:[...]}.
inline Json prediction_report(const AcceptancePrediction& pred) {
  Json out;
  out["mu"] = pred.mu;
  out["sigma2"] = pred.sigma2;
  out["acceptance"] = pred.acceptance;
  out["lyapunov"] = pred.lyapunov;
  if (pred.per_mode.size() > 0) {
    Json modes = Json::array();
    for (Index i = 0; i < pred.per_mode.rows(); ++i) {
      Json entry;
      entry["i"] = i + 1;
      entry["T"] = {pred.per_mode(i, 0), pred.per_mode(i, 1),
                    pred.per_mode(i, 2), pred.per_mode(i, 3),
                    pred.per_mode(i, 4), pred.per_mode(i, 5)};
      modes.push_back(std::move(entry));
    }
    out["per_mode"] = std::move(modes);
  }
  return out;
}

}  // namespace splitmcmc
