#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pottsseg/grid.hpp"
#include "pottsseg/observation.hpp"
#include "pottsseg/posterior_lbp.hpp"
#include "pottsseg/potts_prior.hpp"

namespace pottsseg {

struct CmeConfig {
  int q = 2;
  Boundary boundary = Boundary::free;
  double outer_tol = 1e-5;    // on max(|du|, theta drift)
  int max_outer = 200;
  double inner_tol = 1e-8;    // posterior message sweeps
  int inner_max_iter = 5000;
  double alpha_tol = 1e-10;
  double damping = 0.0;
  std::uint64_t seed = 0;
};

struct CmeTraceRow {
  int t;
  double u;        // disagreement fed to the coupling solve
  double alpha;    // coupling matching it
  double u_post;   // disagreement measured from the posterior
  double residual; // posterior message residual
};

struct EstimateReport {
  double u_hat = 0.0;
  double alpha_hat = 0.0;
  GaussianParams theta;
  std::vector<int> labels;
  std::vector<double> node_marginals;  // beliefs behind the labeling
  std::vector<CmeTraceRow> trace;
  int outer_iterations = 0;
  bool converged = false;
};

inline double step2_solve_alpha(int q, double u, double k_start, double tol = 1e-10) {
  return solve_alpha_for_u(q, u, AlphaMethod::paper_multiplicative, tol, k_start);
}

struct Step3Result {
  GaussianParams params;
  double u = 0.0;
  PosteriorState posterior;
  int retained_labels = 0;
};

// One observation-side update: posterior sweeps at a fixed coupling, then the
// label statistics refit from the resulting node beliefs.
inline Step3Result step3_update(const Grid& g, const ColorImage& img, int q, double coupling,
                                const GaussianParams& params, const std::vector<double>& messages,
                                const SweepOptions& opts = {}) {
  const auto table = likelihood_table(img, params);
  Step3Result r;
  r.params = params;
  r.posterior = solve_posterior_fixed_point(g, q, coupling, table, opts, &messages);
  r.u = r.posterior.u;
  r.retained_labels = update_params_weighted(img, r.posterior.node_marginals, r.params);
  return r;
}

inline EstimateReport run_cme(const ColorImage& img, const CmeConfig& cfg,
                              const GaussianParams* init_override = nullptr) {
  if (cfg.q < 2) throw std::invalid_argument("need at least two labels");
  Grid g = Grid::lattice(img.width, img.height, cfg.boundary);
  if (g.m() < 1) throw std::invalid_argument("image has no pixel pairs");
  const int q = cfg.q;
  const double u_max = max_disagreement(q);

  GaussianParams theta = init_override ? *init_override : init_params(img, q, cfg.seed);

  // initial disagreement from the hard labeling of the data term alone
  auto hard = argmax_labels(likelihood_table(img, theta), q);
  int differ = 0;
  for (const auto& e : g.edges()) differ += hard[e[0]] != hard[e[1]];
  double u = std::clamp(double(differ) / g.m(), 0.01, u_max - 0.01);

  auto msgs = posterior_messages_uniform(g, q);
  const SweepOptions inner{cfg.inner_tol, cfg.inner_max_iter, cfg.damping};
  EstimateReport rep;
  double alpha = 1.0;
  for (int t = 1; t <= cfg.max_outer; ++t) {
    alpha = step2_solve_alpha(q, u, alpha > 0.0 ? alpha : 1.0, cfg.alpha_tol);
    auto s3 = step3_update(g, img, q, alpha, theta, msgs, inner);
    rep.trace.push_back({t, u, alpha, s3.u, s3.posterior.residual});
    const double du = std::abs(s3.u - u);
    const double dtheta = params_distance(theta, s3.params);
    theta = std::move(s3.params);
    msgs = std::move(s3.posterior.log_messages);
    u = std::clamp(s3.u, 1e-9, u_max - 1e-9);
    rep.outer_iterations = t;
    if (du < cfg.outer_tol && dtheta < cfg.outer_tol) {
      rep.converged = true;
      break;
    }
  }

  rep.u_hat = u;
  rep.alpha_hat = step2_solve_alpha(q, u, alpha > 0.0 ? alpha : 1.0, cfg.alpha_tol);
  rep.theta = std::move(theta);

  // labeling straight from the final messages and fitted model
  const auto final_table = likelihood_table(img, rep.theta);
  rep.node_marginals.resize(static_cast<size_t>(g.n()) * q);
  std::vector<double> row(q);
  for (int i = 0; i < g.n(); ++i) {
    for (int s = 0; s < q; ++s) row[s] = final_table[static_cast<size_t>(i) * q + s];
    for (int k : g.incoming(i))
      for (int s = 0; s < q; ++s) row[s] += msgs[static_cast<size_t>(k) * q + s];
    const double lse = detail::log_sum_exp(row.data(), q);
    for (int s = 0; s < q; ++s)
      rep.node_marginals[static_cast<size_t>(i) * q + s] = std::exp(row[s] - lse);
  }
  rep.labels = argmax_labels(rep.node_marginals, q);
  return rep;
}

}  // namespace pottsseg
