#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pottsseg/grid.hpp"
#include "pottsseg/potts_prior.hpp"

namespace pottsseg {

namespace detail {

inline double log_sum_exp(const double* v, int n) {
  double m = v[0];
  for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace detail

// data-conditioned messages, kept in log form with log-sum-exp zero per row
struct PosteriorState {
  std::vector<double> log_messages;   // n_dir * q
  std::vector<double> node_marginals; // n * q
  std::vector<double> edge_marginals; // m * q * q, [e*q+s_first]*q+s_second
  double bethe_log_partition = 0.0;
  double u = 0.0;  // mean label disagreement across edges
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline std::vector<double> posterior_messages_uniform(const Grid& g, int q) {
  return std::vector<double>(static_cast<size_t>(g.n_dir()) * q, -std::log(double(q)));
}

inline std::vector<double> posterior_sweep(const Grid& g, int q, double coupling,
                                           const std::vector<double>& log_table,
                                           const std::vector<double>& log_msgs,
                                           double damping = 0.0) {
  const double xm1 = std::expm1(0.5 * coupling);
  std::vector<double> out(log_msgs.size());
  std::vector<double> cav(q);
  for (int d = 0; d < g.n_dir(); ++d) {
    const int j = g.dir_src(d);
    const int rev = g.dir_reverse(d);
    for (int s = 0; s < q; ++s) cav[s] = log_table[static_cast<size_t>(j) * q + s];
    for (int k : g.incoming(j))
      if (k != rev)
        for (int s = 0; s < q; ++s) cav[s] += log_msgs[static_cast<size_t>(k) * q + s];
    double m = cav[0];
    for (int s = 1; s < q; ++s) m = std::max(m, cav[s]);
    double tot = 0.0;
    for (int s = 0; s < q; ++s) tot += std::exp(cav[s] - m);
    double* row = &out[static_cast<size_t>(d) * q];
    for (int s = 0; s < q; ++s) row[s] = std::log(tot + xm1 * std::exp(cav[s] - m));
    if (damping > 0.0) {
      const double* old = &log_msgs[static_cast<size_t>(d) * q];
      for (int s = 0; s < q; ++s) row[s] = (1.0 - damping) * row[s] + damping * old[s];
    }
    const double lse = detail::log_sum_exp(row, q);
    for (int s = 0; s < q; ++s) row[s] -= lse;
  }
  return out;
}

inline PosteriorState solve_posterior_fixed_point(const Grid& g, int q, double coupling,
                                                  const std::vector<double>& log_table,
                                                  const SweepOptions& opts = {},
                                                  const std::vector<double>* warm_start = nullptr) {
  if (log_table.size() != static_cast<size_t>(g.n()) * q)
    throw std::invalid_argument("likelihood table has wrong size");
  PosteriorState st;
  st.log_messages = warm_start ? *warm_start : posterior_messages_uniform(g, q);
  if (st.log_messages.size() != static_cast<size_t>(g.n_dir()) * q)
    throw std::invalid_argument("warm start has wrong size");
  st.residual = g.n_dir() > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  st.converged = g.n_dir() == 0;
  for (int it = 0; it < opts.max_iter && !st.converged; ++it) {
    auto next = posterior_sweep(g, q, coupling, log_table, st.log_messages, opts.damping);
    double diff = 0.0;
    for (size_t i = 0; i < next.size(); ++i)
      diff = std::max(diff, std::abs(next[i] - st.log_messages[i]));
    st.log_messages.swap(next);
    st.residual = diff;
    st.iterations = it + 1;
    st.converged = diff < opts.tol;
  }

  // Bethe assembly on the (possibly unconverged) messages
  st.node_marginals.resize(static_cast<size_t>(g.n()) * q);
  std::vector<double> full(static_cast<size_t>(g.n()) * q);
  double log_y = 0.0;
  std::vector<double> row(q);
  for (int i = 0; i < g.n(); ++i) {
    for (int s = 0; s < q; ++s) row[s] = log_table[static_cast<size_t>(i) * q + s];
    for (int k : g.incoming(i))
      for (int s = 0; s < q; ++s) row[s] += st.log_messages[static_cast<size_t>(k) * q + s];
    const double lse = detail::log_sum_exp(row.data(), q);
    log_y += (1.0 - g.degree(i)) * lse;
    for (int s = 0; s < q; ++s) {
      full[static_cast<size_t>(i) * q + s] = row[s];
      st.node_marginals[static_cast<size_t>(i) * q + s] = std::exp(row[s] - lse);
    }
  }
  st.edge_marginals.resize(static_cast<size_t>(g.m()) * q * q);
  std::vector<double> ca(q), cb(q), joint(static_cast<size_t>(q) * q);
  double u_sum = 0.0;
  for (int e = 0; e < g.m(); ++e) {
    const int a = g.edges()[e][0], b = g.edges()[e][1];
    const int d_ab = g.dir_from(e, a), d_ba = g.dir_from(e, b);
    for (int s = 0; s < q; ++s) {
      ca[s] = full[static_cast<size_t>(a) * q + s] - st.log_messages[static_cast<size_t>(d_ba) * q + s];
      cb[s] = full[static_cast<size_t>(b) * q + s] - st.log_messages[static_cast<size_t>(d_ab) * q + s];
    }
    for (int s = 0; s < q; ++s)
      for (int t = 0; t < q; ++t)
        joint[static_cast<size_t>(s) * q + t] = ca[s] + cb[t] + (s == t ? 0.5 * coupling : 0.0);
    const double lse = detail::log_sum_exp(joint.data(), q * q);
    log_y += lse;
    double agree = 0.0;
    for (int s = 0; s < q; ++s)
      for (int t = 0; t < q; ++t) {
        const double p = std::exp(joint[static_cast<size_t>(s) * q + t] - lse);
        st.edge_marginals[(static_cast<size_t>(e) * q + s) * q + t] = p;
        if (s == t) agree += p;
      }
    u_sum += 1.0 - agree;
  }
  st.bethe_log_partition = log_y;
  st.u = g.m() > 0 ? u_sum / g.m() : 0.0;
  return st;
}

inline std::vector<int> argmax_labels(const std::vector<double>& node_marginals, int q) {
  std::vector<int> labels(node_marginals.size() / q);
  for (size_t i = 0; i < labels.size(); ++i) {
    int arg = 0;
    for (int s = 1; s < q; ++s)
      if (node_marginals[i * q + s] > node_marginals[i * q + arg]) arg = s;
    labels[i] = arg;
  }
  return labels;
}

}  // namespace pottsseg
