#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pottsseg/grid.hpp"
#include "pottsseg/observation.hpp"
#include "pottsseg/posterior_lbp.hpp"
#include "pottsseg/potts_prior.hpp"

namespace pottsseg {

struct MlOptions {
  Boundary boundary = Boundary::free;
  double theta_tol = 1e-6;     // fixed-point drift of the label model
  int theta_max_iter = 200;
  double inner_tol = 1e-8;     // posterior message sweeps
  int inner_max_iter = 5000;
  double damping = 0.0;
  std::uint64_t seed = 0;
  bool refine = true;
};

struct MlSweepRow {
  double coupling = 0.0;
  double loglik = 0.0;   // per-pixel log marginal likelihood
  double u_post = 0.0;
  double u_prior = 0.0;
  bool converged = false;
  GaussianParams theta;
};

struct MlEstimate {
  double coupling_hat = 0.0;
  double loglik_hat = 0.0;
  GaussianParams theta;
  std::vector<int> labels;
  std::vector<double> node_marginals;
  double u_post = 0.0;
  double u_prior = 0.0;
  double stationarity_residual = 0.0;  // |u_prior - u_post| at the argmax
  double slope_left = 0.0;             // one-sided secants at the argmax
  double slope_right = 0.0;
  bool kink_detected = false;
  double kink_location = 0.0;
  double kink_slope_gap = 0.0;
  double kink_noise_floor = 0.0;
};

struct MlSweepResult {
  std::vector<MlSweepRow> rows;  // ascending in coupling, refinement included
  MlEstimate estimate;
};

struct ThetaFit {
  GaussianParams params;
  PosteriorState posterior;
  bool converged = false;
  int iterations = 0;
};

// data-side fixed point at a fixed coupling: posterior sweeps alternating with
// the belief-weighted model refit
inline ThetaFit fit_theta_at_K(const Grid& g, const ColorImage& img, int q, double coupling,
                               GaussianParams init, const MlOptions& opts = {},
                               const std::vector<double>* warm_messages = nullptr) {
  ThetaFit fit;
  fit.params = std::move(init);
  const SweepOptions inner{opts.inner_tol, opts.inner_max_iter, opts.damping};
  std::vector<double> msgs =
      warm_messages ? *warm_messages : posterior_messages_uniform(g, q);
  for (int it = 0; it < opts.theta_max_iter; ++it) {
    fit.posterior =
        solve_posterior_fixed_point(g, q, coupling, likelihood_table(img, fit.params), inner, &msgs);
    msgs = fit.posterior.log_messages;
    GaussianParams next = fit.params;
    update_params_weighted(img, fit.posterior.node_marginals, next);
    const double drift = params_distance(fit.params, next);
    fit.params = std::move(next);
    fit.iterations = it + 1;
    if (drift < opts.theta_tol) {
      fit.converged = true;
      break;
    }
  }
  // re-evaluate so the reported posterior pairs the final parameters
  fit.posterior =
      solve_posterior_fixed_point(g, q, coupling, likelihood_table(img, fit.params), inner, &msgs);
  fit.converged = fit.converged && fit.posterior.converged;
  return fit;
}

namespace detail {

struct PriorSide {
  double log_partition_per_node = 0.0;
  double u = 0.0;
  bool converged = true;
  Branch branch = Branch::disordered;
};

// branch-resolved data-free quantities; closed forms where the lattice is
// homogeneous, message passing for the ordered branch otherwise
class PriorCurveTracker {
 public:
  PriorCurveTracker(const Grid& g, int q, Boundary boundary)
      : g_(g), q_(q), homogeneous_(boundary == Boundary::periodic) {}

  PriorSide eval(double coupling) {
    PriorSide side;
    const double edge_per_node = double(g_.m()) / g_.n();
    const double x = std::exp(0.5 * coupling);
    const double f_dis =
        -(edge_per_node * std::log(x + q_ - 1.0) + (1.0 - edge_per_node) * std::log(double(q_)));
    const double u_dis = (q_ - 1.0) / (x + q_ - 1.0);
    if (homogeneous_) {
      auto ord = hom::ordered_point_for_coupling(q_, coupling);
      if (ord && ord->free_energy < f_dis) {
        side.log_partition_per_node = -ord->free_energy;
        side.u = ord->u;
        side.branch = Branch::ordered;
      } else {
        side.log_partition_per_node = -f_dis;
        side.u = u_dis;
      }
      return side;
    }
    side.log_partition_per_node = -f_dis;
    side.u = u_dis;
    if (hom::ordered_point_for_coupling(q_, coupling)) {
      const SweepOptions opts{1e-10, 20000, 0.0};
      auto rep = ordered_msgs_.empty()
                     ? solve_prior_fixed_point(g_, q_, coupling, PriorInit::ordered, opts)
                     : solve_prior_fixed_point(g_, q_, coupling, PriorInit::given, opts,
                                               &ordered_msgs_);
      if (rep.converged && rep.branch == Branch::ordered) {
        ordered_msgs_ = rep.messages;
        if (rep.free_energy < f_dis) {
          side.log_partition_per_node = -rep.free_energy;
          side.u = rep.u;
          side.branch = Branch::ordered;
        }
      } else {
        ordered_msgs_.clear();
        side.converged = rep.converged;
      }
    }
    return side;
  }

 private:
  const Grid& g_;
  int q_;
  bool homogeneous_;
  std::vector<double> ordered_msgs_;
};

inline double median_abs(std::vector<double> v) {
  if (v.empty()) return 0.0;
  for (auto& x : v) x = std::abs(x);
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace detail

inline double log_marginal_likelihood(const Grid& g, const ColorImage& img, int q,
                                      double coupling, const GaussianParams& params,
                                      const MlOptions& opts = {}) {
  const SweepOptions inner{opts.inner_tol, opts.inner_max_iter, opts.damping};
  auto post = solve_posterior_fixed_point(g, q, coupling, likelihood_table(img, params), inner);
  detail::PriorCurveTracker prior(g, q, opts.boundary);
  return post.bethe_log_partition / g.n() - prior.eval(coupling).log_partition_per_node;
}

inline MlSweepResult ml_sweep(const ColorImage& img, int q, const std::vector<double>& k_grid,
                              const MlOptions& opts = {},
                              const GaussianParams* init_override = nullptr) {
  if (q < 2) throw std::invalid_argument("need at least two labels");
  if (k_grid.empty()) throw std::invalid_argument("empty coupling grid");
  for (size_t i = 0; i < k_grid.size(); ++i) {
    if (k_grid[i] < 0.0) throw std::invalid_argument("couplings must be nonnegative");
    if (i > 0 && k_grid[i] <= k_grid[i - 1])
      throw std::invalid_argument("coupling grid must ascend");
  }
  Grid g = Grid::lattice(img.width, img.height, opts.boundary);
  detail::PriorCurveTracker prior(g, q, opts.boundary);

  GaussianParams theta = init_override ? *init_override : init_params(img, q, opts.seed);
  std::vector<double> msgs = posterior_messages_uniform(g, q);

  MlSweepResult out;
  MlEstimate& est = out.estimate;
  double best = -std::numeric_limits<double>::infinity();
  auto run_point = [&](double k) {
    auto fit = fit_theta_at_K(g, img, q, k, theta, opts, &msgs);
    theta = fit.params;
    msgs = fit.posterior.log_messages;
    auto ps = prior.eval(k);
    MlSweepRow row;
    row.coupling = k;
    row.loglik = fit.posterior.bethe_log_partition / g.n() - ps.log_partition_per_node;
    row.u_post = fit.posterior.u;
    row.u_prior = ps.u;
    row.converged = fit.converged && ps.converged;
    row.theta = theta;
    out.rows.push_back(row);
    if (row.loglik > best) {
      best = row.loglik;
      est.coupling_hat = k;
      est.loglik_hat = row.loglik;
      est.theta = theta;
      est.node_marginals = fit.posterior.node_marginals;
      est.u_post = row.u_post;
      est.u_prior = row.u_prior;
    }
  };
  for (double k : k_grid) run_point(k);
  if (std::none_of(out.rows.begin(), out.rows.end(),
                   [](const MlSweepRow& r) { return r.converged; }))
    throw std::runtime_error("no coupling in the grid reached both fixed points");

  // kink test at the data-free crossing, on the uniform part of the grid
  const size_t n_base = out.rows.size();
  auto trans = transition_point(q);
  if (trans.kind == TransitionKind::first_order && n_base >= 6) {
    const double kc = trans.coupling_c;
    const double h = k_grid[1] - k_grid[0];
    size_t c = n_base;  // cell index with kc inside
    for (size_t i = 0; i + 1 < n_base; ++i)
      if (k_grid[i] <= kc && kc < k_grid[i + 1]) c = i;
    if (c != n_base && c >= 2 && c + 2 < n_base) {
      const double left = (out.rows[c].loglik - out.rows[c - 1].loglik) /
                          (k_grid[c] - k_grid[c - 1]);
      const double right = (out.rows[c + 2].loglik - out.rows[c + 1].loglik) /
                           (k_grid[c + 2] - k_grid[c + 1]);
      std::vector<double> second;
      for (size_t i = 1; i + 1 < n_base; ++i) {
        if (i + 2 >= c && i <= c + 2) continue;
        second.push_back(out.rows[i + 1].loglik - 2 * out.rows[i].loglik +
                         out.rows[i - 1].loglik);
      }
      const double noise = detail::median_abs(std::move(second));
      est.kink_location = kc;
      est.kink_slope_gap = std::abs(right - left);
      est.kink_noise_floor = noise;
      est.kink_detected = est.kink_slope_gap * h > 10.0 * noise;
    }
  }

  // refine around the leading grid points and the crossing
  if (opts.refine && n_base >= 2) {
    std::vector<size_t> order(n_base);
    for (size_t i = 0; i < n_base; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return out.rows[a].loglik > out.rows[b].loglik;
    });
    std::vector<double> centers;
    for (size_t i = 0; i < std::min<size_t>(3, n_base); ++i)
      centers.push_back(out.rows[order[i]].coupling);
    if (trans.kind == TransitionKind::first_order) centers.push_back(trans.coupling_c);
    const double h = k_grid[1] - k_grid[0];
    std::vector<double> extra;
    for (double center : centers)
      for (double k = center - h; k <= center + h + 1e-12; k += 0.002) {
        if (k < k_grid.front() || k > k_grid.back()) continue;
        bool known = false;
        for (const auto& row : out.rows)
          if (std::abs(row.coupling - k) < 5e-4) known = true;
        if (!known) extra.push_back(k);
      }
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end(),
                            [](double a, double b) { return std::abs(a - b) < 5e-4; }),
                extra.end());
    for (double k : extra) {
      // restart continuation from the nearest already-solved point below
      const MlSweepRow* anchor = nullptr;
      for (const auto& row : out.rows)
        if (row.coupling <= k && (!anchor || row.coupling > anchor->coupling)) anchor = &row;
      if (anchor) theta = anchor->theta;
      run_point(k);
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const MlSweepRow& a, const MlSweepRow& b) { return a.coupling < b.coupling; });
  }

  est.labels = argmax_labels(est.node_marginals, q);
  est.stationarity_residual = std::abs(est.u_prior - est.u_post);
  for (size_t i = 0; i < out.rows.size(); ++i) {
    if (out.rows[i].coupling != est.coupling_hat) continue;
    if (i > 0)
      est.slope_left = (out.rows[i].loglik - out.rows[i - 1].loglik) /
                       (out.rows[i].coupling - out.rows[i - 1].coupling);
    if (i + 1 < out.rows.size())
      est.slope_right = (out.rows[i + 1].loglik - out.rows[i].loglik) /
                        (out.rows[i + 1].coupling - out.rows[i].coupling);
    break;
  }
  return out;
}

inline std::vector<double> default_coupling_grid(double lo = 0.0, double hi = 4.0,
                                                 double step = 0.02) {
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double k = lo + i * step;
    if (k > hi + 1e-12) break;
    grid.push_back(k);
  }
  return grid;
}

}  // namespace pottsseg
