#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pottsseg/grid.hpp"

namespace pottsseg {

struct ExactResult {
  double log_partition = 0.0;
  std::vector<double> node_marginals;  // n * q, row-major per node
  std::vector<double> edge_marginals;  // m * q * q, row-major (a_i, a_j) per stored edge
};

// Brute-force sums over all q^n label configurations with pairwise factor
// e^{(K/2)[a_i=a_j]} and optional per-node log factors (n * q, row-major).
// Two passes: the first finds the peak log weight so the second can
// accumulate exp(w - w_max) without overflow.
inline ExactResult enumerate_graph(const Grid& g, int q, double K,
                                   const std::vector<double>* log_factors = nullptr) {
  if (q < 2) throw std::invalid_argument("enumerate_graph: q must be >= 2");
  const int n = g.n(), m = g.m();
  double states = std::pow(static_cast<double>(q), n);
  if (states > double(1 << 24))
    throw std::invalid_argument("enumerate_graph: state space exceeds 2^24");
  if (log_factors && static_cast<int>(log_factors->size()) != n * q)
    throw std::invalid_argument("enumerate_graph: log factor table has wrong shape");
  const std::int64_t total = static_cast<std::int64_t>(states + 0.5);
  const double half_k = 0.5 * K;

  std::vector<int> a(n, 0);
  auto weight = [&](const std::vector<int>& cfg) {
    double w = 0.0;
    for (const auto& e : g.edges())
      if (cfg[e[0]] == cfg[e[1]]) w += half_k;
    if (log_factors)
      for (int i = 0; i < n; ++i) w += (*log_factors)[i * q + cfg[i]];
    return w;
  };
  auto advance = [&](std::vector<int>& cfg) {
    for (int i = 0; i < n; ++i) {
      if (++cfg[i] < q) return;
      cfg[i] = 0;
    }
  };

  double w_max = -std::numeric_limits<double>::infinity();
  for (std::int64_t s = 0; s < total; ++s, advance(a))
    w_max = std::max(w_max, weight(a));

  ExactResult r;
  r.node_marginals.assign(static_cast<size_t>(n) * q, 0.0);
  r.edge_marginals.assign(static_cast<size_t>(m) * q * q, 0.0);
  double z = 0.0;
  a.assign(n, 0);
  for (std::int64_t s = 0; s < total; ++s, advance(a)) {
    const double p = std::exp(weight(a) - w_max);
    z += p;
    for (int i = 0; i < n; ++i) r.node_marginals[i * q + a[i]] += p;
    for (int e = 0; e < m; ++e)
      r.edge_marginals[(static_cast<size_t>(e) * q + a[g.edges()[e][0]]) * q +
                       a[g.edges()[e][1]]] += p;
  }
  r.log_partition = w_max + std::log(z);
  for (double& v : r.node_marginals) v /= z;
  for (double& v : r.edge_marginals) v /= z;
  return r;
}

// Exact chain quantities via log-scaled forward/backward products of the
// q x q pairwise factor with optional per-node factors.
inline ExactResult transfer_matrix_chain(int n, int q, double K,
                                         const std::vector<double>* log_factors = nullptr) {
  if (n < 1) throw std::invalid_argument("transfer_matrix_chain: n must be >= 1");
  if (q < 2) throw std::invalid_argument("transfer_matrix_chain: q must be >= 2");
  if (log_factors && static_cast<int>(log_factors->size()) != n * q)
    throw std::invalid_argument("transfer_matrix_chain: log factor table has wrong shape");
  const double x = std::exp(0.5 * K);
  auto node_factor = [&](int i, int s) {
    return log_factors ? std::exp((*log_factors)[i * q + s]) : 1.0;
  };
  // fwd[i]: scaled partial sums over a_0..a_i with node factors through i;
  // bwd[i]: over a_i..a_{n-1} with node factors strictly after i.
  std::vector<std::vector<double>> fwd(n, std::vector<double>(q));
  std::vector<std::vector<double>> bwd(n, std::vector<double>(q));
  std::vector<double> fscale(n, 0.0), bscale(n, 0.0);
  for (int s = 0; s < q; ++s) fwd[0][s] = node_factor(0, s);
  auto rescale = [&](std::vector<double>& v, double& acc) {
    double sum = 0.0;
    for (double t : v) sum += t;
    for (double& t : v) t /= sum;
    acc += std::log(sum);
  };
  rescale(fwd[0], fscale[0]);
  for (int i = 1; i < n; ++i) {
    double sum_prev = 0.0;
    for (int s = 0; s < q; ++s) sum_prev += fwd[i - 1][s];
    for (int s = 0; s < q; ++s)
      fwd[i][s] = node_factor(i, s) * (sum_prev + (x - 1.0) * fwd[i - 1][s]);
    fscale[i] = fscale[i - 1];
    rescale(fwd[i], fscale[i]);
  }
  for (int s = 0; s < q; ++s) bwd[n - 1][s] = 1.0;
  for (int i = n - 2; i >= 0; --i) {
    double sum_next = 0.0;
    std::vector<double> gb(q);
    for (int s = 0; s < q; ++s) {
      gb[s] = node_factor(i + 1, s) * bwd[i + 1][s];
      sum_next += gb[s];
    }
    for (int s = 0; s < q; ++s) bwd[i][s] = sum_next + (x - 1.0) * gb[s];
    bscale[i] = bscale[i + 1];
    rescale(bwd[i], bscale[i]);
  }

  ExactResult r;
  double z_tail = 0.0;
  for (int s = 0; s < q; ++s) z_tail += fwd[n - 1][s] * bwd[n - 1][s];
  r.log_partition = fscale[n - 1] + bscale[n - 1] + std::log(z_tail);

  r.node_marginals.assign(static_cast<size_t>(n) * q, 0.0);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int s = 0; s < q; ++s) {
      r.node_marginals[i * q + s] = fwd[i][s] * bwd[i][s];
      sum += r.node_marginals[i * q + s];
    }
    for (int s = 0; s < q; ++s) r.node_marginals[i * q + s] /= sum;
  }
  r.edge_marginals.assign(static_cast<size_t>(n - 1) * q * q, 0.0);
  for (int e = 0; e + 1 < n; ++e) {
    double sum = 0.0;
    for (int s = 0; s < q; ++s)
      for (int t = 0; t < q; ++t) {
        const double v = fwd[e][s] * (s == t ? x : 1.0) * node_factor(e + 1, t) * bwd[e + 1][t];
        r.edge_marginals[(static_cast<size_t>(e) * q + s) * q + t] = v;
        sum += v;
      }
    for (int s = 0; s < q * q; ++s)
      r.edge_marginals[static_cast<size_t>(e) * q * q + s] /= sum;
  }
  return r;
}

}  // namespace pottsseg
