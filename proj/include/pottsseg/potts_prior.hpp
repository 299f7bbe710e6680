#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pottsseg/grid.hpp"

namespace pottsseg {

enum class Branch { disordered, ordered };

inline const char* to_string(Branch b) {
  return b == Branch::ordered ? "ordered" : "disordered";
}

enum class PriorInit { uniform, ordered, given };

struct SweepOptions {
  double tol = 1e-9;
  int max_iter = 10000;
  double damping = 0.0;  // weight kept on the old message; 0 = plain Jacobi
};

struct PriorFixedPointReport {
  std::vector<double> messages;        // n_dir * q, normalized per directed edge
  std::vector<double> node_marginals;  // n * q
  std::vector<double> edge_marginals;  // m * q * q
  double free_energy = 0.0;            // per pixel
  double u = 0.0;                      // mean edge disagreement
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  Branch branch = Branch::disordered;
};

namespace detail {

inline void cavity_product(const Grid& g, int q, const std::vector<double>& msgs,
                           int node, int excluded_dir, double* out) {
  for (int s = 0; s < q; ++s) out[s] = 1.0;
  for (int d : g.incoming(node)) {
    if (d == excluded_dir) continue;
    const double* m = &msgs[static_cast<size_t>(d) * q];
    for (int s = 0; s < q; ++s) out[s] *= m[s];
  }
}

}  // namespace detail

// One synchronous application of the prior message rule to every directed
// edge: out(s) proportional to (e^{K/2}-1) * cavity(s) + sum(cavity).
inline std::vector<double> prior_sweep(const Grid& g, int q, double coupling,
                                       const std::vector<double>& msgs,
                                       double damping = 0.0) {
  const double xm1 = std::expm1(0.5 * coupling);
  std::vector<double> out(msgs.size());
  std::vector<double> cav(q);
  for (int d = 0; d < g.n_dir(); ++d) {
    const int sender = g.dir_src(d);
    detail::cavity_product(g, q, msgs, sender, g.dir_reverse(d), cav.data());
    double cav_sum = 0.0;
    for (int s = 0; s < q; ++s) cav_sum += cav[s];
    double* o = &out[static_cast<size_t>(d) * q];
    double norm = 0.0;
    for (int s = 0; s < q; ++s) {
      o[s] = xm1 * cav[s] + cav_sum;
      norm += o[s];
    }
    for (int s = 0; s < q; ++s) o[s] /= norm;
    if (damping > 0.0) {
      const double* old = &msgs[static_cast<size_t>(d) * q];
      for (int s = 0; s < q; ++s) o[s] = (1.0 - damping) * o[s] + damping * old[s];
    }
  }
  return out;
}

inline std::vector<double> prior_messages_uniform(const Grid& g, int q) {
  return std::vector<double>(static_cast<size_t>(g.n_dir()) * q, 1.0 / q);
}

inline std::vector<double> prior_messages_ordered(const Grid& g, int q, double bias = 0.9) {
  std::vector<double> msgs(static_cast<size_t>(g.n_dir()) * q, (1.0 - bias) / (q - 1));
  for (int d = 0; d < g.n_dir(); ++d) msgs[static_cast<size_t>(d) * q] = bias;
  return msgs;
}

namespace detail {

// Bethe assembly with messages normalized to sum 1:
//   ln Z = sum_edges ln Z_ij + sum_i (1 - |di|) ln Z_i
// where Z_i sums the full incoming product and Z_ij pairs the two
// cavity products across the edge factor.
inline void prior_report_quantities(const Grid& g, int q, double coupling,
                                    const std::vector<double>& msgs,
                                    PriorFixedPointReport& r) {
  const double xm1 = std::expm1(0.5 * coupling);
  const int n = g.n(), m = g.m();
  r.node_marginals.assign(static_cast<size_t>(n) * q, 0.0);
  r.edge_marginals.assign(static_cast<size_t>(m) * q * q, 0.0);
  double log_z = 0.0;
  std::vector<double> full(q);
  for (int i = 0; i < n; ++i) {
    detail::cavity_product(g, q, msgs, i, -1, full.data());
    double zi = 0.0;
    for (int s = 0; s < q; ++s) zi += full[s];
    for (int s = 0; s < q; ++s) r.node_marginals[i * q + s] = full[s] / zi;
    log_z += (1.0 - g.degree(i)) * std::log(zi);
  }
  double u_sum = 0.0;
  std::vector<double> ca(q), cb(q);
  for (int e = 0; e < m; ++e) {
    const int a = g.edges()[e][0], b = g.edges()[e][1];
    detail::cavity_product(g, q, msgs, a, g.dir_from(e, b), ca.data());
    detail::cavity_product(g, q, msgs, b, g.dir_from(e, a), cb.data());
    double sa = 0.0, sb = 0.0, agree = 0.0;
    for (int s = 0; s < q; ++s) {
      sa += ca[s];
      sb += cb[s];
      agree += ca[s] * cb[s];
    }
    const double ze = xm1 * agree + sa * sb;
    double* em = &r.edge_marginals[static_cast<size_t>(e) * q * q];
    for (int s = 0; s < q; ++s)
      for (int t = 0; t < q; ++t)
        em[s * q + t] = ca[s] * cb[t] * (s == t ? xm1 + 1.0 : 1.0) / ze;
    u_sum += (sa * sb - agree) / ze;
    log_z += std::log(ze);
  }
  r.free_energy = -log_z / n;
  r.u = m > 0 ? u_sum / m : 0.0;
}

inline Branch classify_branch(int q, const std::vector<double>& msgs) {
  double dev = 0.0;
  for (double v : msgs) dev = std::max(dev, std::abs(v - 1.0 / q));
  return dev > 1e-5 ? Branch::ordered : Branch::disordered;
}

}  // namespace detail

inline PriorFixedPointReport solve_prior_fixed_point(
    const Grid& g, int q, double coupling, PriorInit init, const SweepOptions& opts = {},
    const std::vector<double>* given = nullptr) {
  if (opts.tol <= 0) throw std::invalid_argument("solve_prior_fixed_point: tol must be > 0");
  std::vector<double> msgs;
  switch (init) {
    case PriorInit::uniform: msgs = prior_messages_uniform(g, q); break;
    case PriorInit::ordered: msgs = prior_messages_ordered(g, q); break;
    case PriorInit::given:
      if (!given || given->size() != static_cast<size_t>(g.n_dir()) * q)
        throw std::invalid_argument("solve_prior_fixed_point: bad given messages");
      msgs = *given;
      break;
  }
  PriorFixedPointReport r;
  r.residual = std::numeric_limits<double>::infinity();
  for (r.iterations = 0; r.iterations < opts.max_iter; ) {
    std::vector<double> next = prior_sweep(g, q, coupling, msgs, opts.damping);
    ++r.iterations;
    double diff = 0.0;
    for (size_t i = 0; i < msgs.size(); ++i) diff = std::max(diff, std::abs(next[i] - msgs[i]));
    msgs.swap(next);
    r.residual = diff;
    if (diff < opts.tol) {
      r.converged = true;
      break;
    }
  }
  r.branch = detail::classify_branch(q, msgs);
  detail::prior_report_quantities(g, q, coupling, msgs, r);
  r.messages = std::move(msgs);
  return r;
}

// Runs from both the uniform and the ordered initialization and returns the
// lower-free-energy fixed point (ties go to the disordered solution).
inline PriorFixedPointReport solve_prior_branch_resolved(const Grid& g, int q, double coupling,
                                                         const SweepOptions& opts = {}) {
  PriorFixedPointReport dis = solve_prior_fixed_point(g, q, coupling, PriorInit::uniform, opts);
  PriorFixedPointReport ord = solve_prior_fixed_point(g, q, coupling, PriorInit::ordered, opts);
  if (ord.branch == Branch::ordered && ord.converged &&
      ord.free_energy < dis.free_energy - 1e-14)
    return ord;
  return dis;
}

// ---------------------------------------------------------------------------
// Homogeneous analyzer: on the periodic lattice every message equals the same
// q-vector at the symmetric fixed points, so the full-lattice LBP reduces to a
// single-message map with a three-fold cavity product.
// ---------------------------------------------------------------------------

struct HomReport {
  std::vector<double> message;
  double free_energy = 0.0;
  double u = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  Branch branch = Branch::disordered;
};

namespace hom {

inline std::vector<double> sweep(int q, double coupling, const std::vector<double>& lam) {
  const double xm1 = std::expm1(0.5 * coupling);
  std::vector<double> cav(q), out(q);
  double cav_sum = 0.0;
  for (int s = 0; s < q; ++s) {
    cav[s] = lam[s] * lam[s] * lam[s];
    cav_sum += cav[s];
  }
  double norm = 0.0;
  for (int s = 0; s < q; ++s) {
    out[s] = xm1 * cav[s] + cav_sum;
    norm += out[s];
  }
  for (int s = 0; s < q; ++s) out[s] /= norm;
  return out;
}

// Free energy per pixel and edge disagreement at a (not necessarily fixed)
// message; exact for the symmetric fixed points of the periodic lattice.
inline void stats(int q, double coupling, const std::vector<double>& lam, double& f, double& u) {
  const double xm1 = std::expm1(0.5 * coupling);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int s = 0; s < q; ++s) {
    const double l3 = lam[s] * lam[s] * lam[s];
    s1 += l3;
    s2 += l3 * l3;
    s4 += l3 * lam[s];
  }
  const double ze = xm1 * s2 + s1 * s1;
  u = (s1 * s1 - s2) / ze;
  f = -2.0 * std::log(ze) + 3.0 * std::log(s4);
}

inline HomReport solve(int q, double coupling, PriorInit init, double tol = 1e-13,
                       int max_iter = 200000, double bias = 0.9) {
  std::vector<double> lam(q, 1.0 / q);
  if (init == PriorInit::ordered) {
    lam.assign(q, (1.0 - bias) / (q - 1));
    lam[0] = bias;
  }
  HomReport r;
  r.residual = std::numeric_limits<double>::infinity();
  for (r.iterations = 0; r.iterations < max_iter; ) {
    std::vector<double> next = sweep(q, coupling, lam);
    ++r.iterations;
    double diff = 0.0;
    for (int s = 0; s < q; ++s) diff = std::max(diff, std::abs(next[s] - lam[s]));
    lam.swap(next);
    r.residual = diff;
    if (diff < tol) {
      r.converged = true;
      break;
    }
    // Once inside the uniform attractor the remaining flow is a pure decay;
    // cut it short so near-spinodal scans stay cheap.
    if (init == PriorInit::ordered && r.iterations % 32 == 0) {
      double dev = 0.0;
      for (int s = 0; s < q; ++s) dev = std::max(dev, std::abs(lam[s] - 1.0 / q));
      if (dev < 1e-9) {
        lam.assign(q, 1.0 / q);
        r.converged = true;
        r.residual = 0.0;
        break;
      }
    }
  }
  double dev = 0.0;
  for (int s = 0; s < q; ++s) dev = std::max(dev, std::abs(lam[s] - 1.0 / q));
  r.branch = dev > 1e-7 ? Branch::ordered : Branch::disordered;
  stats(q, coupling, lam, r.free_energy, r.u);
  r.message = std::move(lam);
  return r;
}

// Closed forms for the two symmetric branches. The ordered branch is
// parametrized by the ratio r in (0,1) of the minority to the majority
// message component; the uniform branch exists for every coupling.
inline double x_of_r(int q, double r) {
  return (1.0 + r + r * r + (q - 1.0) * r * r * r) / (r * (1.0 + r));
}

struct OrderedPoint {
  double coupling, u, free_energy, ratio;
};

inline OrderedPoint ordered_point(int q, double r) {
  const double x = x_of_r(q, r);
  const double a = 1.0 / (1.0 + (q - 1.0) * r);
  const double a3 = a * a * a;
  const double r3 = r * r * r;
  const double s1 = a3 * (1.0 + (q - 1.0) * r3);
  const double s2 = a3 * a3 * (1.0 + (q - 1.0) * r3 * r3);
  const double s4 = a3 * a * (1.0 + (q - 1.0) * r3 * r);
  const double ze = (x - 1.0) * s2 + s1 * s1;
  OrderedPoint p;
  p.ratio = r;
  p.coupling = 2.0 * std::log(x);
  p.u = (s1 * s1 - s2) / ze;
  p.free_energy = -2.0 * std::log(ze) + 3.0 * std::log(s4);
  return p;
}

// Fold point of the ordered branch: the ratio minimizing x(r) on (0,1).
// Below the corresponding coupling no ordered fixed point exists.
inline double spinodal_ratio(int q) {
  double lo = 1e-12, hi = 1.0 - 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (x_of_r(q, m1) < x_of_r(q, m2))
      hi = m2;
    else
      lo = m1;
  }
  return 0.5 * (lo + hi);
}

inline double disordered_free_energy(int q, double coupling) {
  return std::log(static_cast<double>(q)) - 2.0 * std::log(std::exp(0.5 * coupling) + q - 1.0);
}

inline double disordered_u(int q, double coupling) {
  return (q - 1.0) / (std::exp(0.5 * coupling) + q - 1.0);
}

inline double disordered_coupling_for_u(int q, double u) {
  return 2.0 * std::log((q - 1.0) * (1.0 - u) / u);
}

// Stable-ordered-branch coupling for a target disagreement, if reachable.
inline std::optional<OrderedPoint> ordered_point_for_u(int q, double u) {
  const double r_sp = spinodal_ratio(q);
  if (u > ordered_point(q, r_sp).u) return std::nullopt;
  double lo = 1e-14, hi = r_sp;  // u increases with r on the stable branch
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ordered_point(q, mid).u < u)
      lo = mid;
    else
      hi = mid;
  }
  return ordered_point(q, 0.5 * (lo + hi));
}

inline std::optional<OrderedPoint> ordered_point_for_coupling(int q, double coupling) {
  const double r_sp = spinodal_ratio(q);
  const double x = std::exp(0.5 * coupling);
  if (x < x_of_r(q, r_sp)) return std::nullopt;
  double lo = 1e-14, hi = r_sp;  // x decreases with r on the stable branch
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (x_of_r(q, mid) > x)
      lo = mid;
    else
      hi = mid;
  }
  return ordered_point(q, 0.5 * (lo + hi));
}

}  // namespace hom

// ---------------------------------------------------------------------------
// alpha(u): the coupling at which the prior's mean edge disagreement equals u.
// ---------------------------------------------------------------------------

enum class AlphaMethod { paper_multiplicative, bisection };

inline double max_disagreement(int q) { return (q - 1.0) / q; }

namespace detail {

inline void check_u_domain(int q, double u) {
  if (!(u > 0.0))
    throw std::invalid_argument("solve_alpha_for_u: u must be positive (coupling diverges)");
  if (u > max_disagreement(q) + 1e-12)
    throw std::invalid_argument(
        "solve_alpha_for_u: u above the uniform-prior disagreement (q-1)/q is unreachable");
}

// The ordered solution is preferred whenever the target disagreement is
// reachable on the stable ordered branch; it is the branch the estimation
// loop's non-uniform messages settle on, and the one with the larger
// constrained entropy. Otherwise only the uniform solution exists.
inline double alpha_bisection(int q, double u) {
  if (auto p = hom::ordered_point_for_u(q, u)) return p->coupling;
  return hom::disordered_coupling_for_u(q, u);
}

inline double alpha_multiplicative(int q, double u, double k_start, double tol, int max_iter) {
  double k = k_start > 0 ? k_start : 1.0;
  std::vector<double> lam(q, 0.1 / (q - 1.0));
  lam[0] = 0.9;
  double prev_k = k;
  int stalled = 0;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> next = hom::sweep(q, k, lam);
    double f, u_cur;
    hom::stats(q, k, next, f, u_cur);
    const double k_next = k * std::pow(u_cur / u, 0.25);
    double msg_diff = 0.0;
    for (int s = 0; s < q; ++s) msg_diff = std::max(msg_diff, std::abs(next[s] - lam[s]));
    const double k_diff = std::abs(k_next - k);
    lam.swap(next);
    k = k_next;
    if (msg_diff < tol && k_diff < tol) {
      // The co-iteration can lock onto the unstable fold branch when the
      // target is unreachable on the stable ordered one; accept only fixed
      // points that one of the stable branches reproduces.
      if (std::abs(u - hom::disordered_u(q, k)) < 3e-6) return k;
      if (auto p = hom::ordered_point_for_coupling(q, k); p && std::abs(u - p->u) < 3e-6)
        return k;
      break;
    }
    // Oscillation around the ordered branch's fold never settles; detect the
    // stall and fall back to the bracketing solver.
    if (it > 200) {
      if (std::abs(k - prev_k) < 1e2 * tol) ++stalled; else stalled = 0;
      prev_k = k;
      if (stalled > 50 && k_diff > 1e3 * tol) break;
    }
  }
  return alpha_bisection(q, u);
}

}  // namespace detail

inline double solve_alpha_for_u(int q, double u, AlphaMethod method = AlphaMethod::bisection,
                                double tol = 1e-10, double k_start = 1.0) {
  if (q < 2) throw std::invalid_argument("solve_alpha_for_u: q must be >= 2");
  detail::check_u_domain(q, u);
  if (u >= max_disagreement(q) - 1e-15) return 0.0;
  if (method == AlphaMethod::bisection) return detail::alpha_bisection(q, u);
  return detail::alpha_multiplicative(q, u, k_start, tol, 400000);
}

// ---------------------------------------------------------------------------
// Phase-transition analyzer.
// ---------------------------------------------------------------------------

enum class TransitionKind { first_order, none_detected };

struct TransitionReport {
  TransitionKind kind = TransitionKind::none_detected;
  double coupling_c = 0.0;        // crossing of the two branch free energies
  double onset_coupling = 0.0;    // smallest coupling with an ordered fixed point
};

inline TransitionReport transition_point(int q, double lo = 0.0, double hi = 6.0,
                                         double tol = 1e-7) {
  if (q < 2) throw std::invalid_argument("transition_point: q must be >= 2");
  if (lo < 0.0 || hi > 6.0 || lo >= hi)
    throw std::invalid_argument("transition_point: bracket must satisfy 0 <= lo < hi <= 6");
  TransitionReport r;

  // Smallest coupling at which the biased initialization settles away from
  // uniform; for q = 2 this is the symmetry-breaking onset.
  auto has_ordered = [&](double k) {
    return hom::solve(q, k, PriorInit::ordered, 1e-12, 400000).branch == Branch::ordered;
  };
  double a = lo, b = hi;
  if (!has_ordered(b)) return r;  // no ordered branch anywhere in the bracket
  if (has_ordered(a + 1e-12)) {
    r.onset_coupling = a;
  } else {
    while (b - a > tol) {
      const double mid = 0.5 * (a + b);
      (has_ordered(mid) ? b : a) = mid;
    }
    r.onset_coupling = 0.5 * (a + b);
  }

  // Free-energy gap between the branches where both exist.
  auto gap = [&](double k) {
    HomReport ord = hom::solve(q, k, PriorInit::ordered, 1e-13, 400000);
    return hom::disordered_free_energy(q, k) - ord.free_energy;
  };
  a = r.onset_coupling + tol;
  b = hi;
  double ga = gap(a), gb = gap(b);
  if (!(ga < 0.0 && gb > 0.0)) return r;  // branches never cross in the bracket
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    (gap(mid) > 0.0 ? b : a) = mid;
  }
  const double kc = 0.5 * (a + b);

  // First order means the disagreement jumps at the crossing. A continuous
  // transition (q = 2) has the branches merging there, and the sign change
  // found above is only rounding noise in a zero gap.
  auto ord = hom::ordered_point_for_coupling(q, kc);
  if (!ord || std::abs(ord->u - hom::disordered_u(q, kc)) < 1e-3) return r;
  r.kind = TransitionKind::first_order;
  r.coupling_c = kc;
  return r;
}

// ---------------------------------------------------------------------------
// Curve emitters behind the CLI.
// ---------------------------------------------------------------------------

struct FreeEnergyRow {
  double coupling, free_energy, dfdK, u;
  Branch branch;
};

// Branch-resolved free energy on the periodic lattice; the derivative column
// is the stationarity identity -(|E|/2|V|)(1-u) = -(1-u).
inline std::vector<FreeEnergyRow> free_energy_curve(int q, const std::vector<double>& k_grid) {
  std::vector<FreeEnergyRow> rows;
  rows.reserve(k_grid.size());
  for (size_t i = 0; i < k_grid.size(); ++i) {
    const double k = k_grid[i];
    if (k < 0.0) throw std::invalid_argument("free_energy_curve: couplings must be >= 0");
    if (i > 0 && k <= k_grid[i - 1])
      throw std::invalid_argument("free_energy_curve: grid must be ascending");
    FreeEnergyRow row;
    row.coupling = k;
    const double f_dis = hom::disordered_free_energy(q, k);
    auto ord = hom::ordered_point_for_coupling(q, k);
    if (ord && ord->free_energy < f_dis) {
      row.free_energy = ord->free_energy;
      row.u = ord->u;
      row.branch = Branch::ordered;
    } else {
      row.free_energy = f_dis;
      row.u = hom::disordered_u(q, k);
      row.branch = Branch::disordered;
    }
    row.dfdK = -(1.0 - row.u);
    rows.push_back(row);
  }
  return rows;
}

struct AlphaCurveRow {
  double u, alpha, free_energy;
};

inline std::vector<AlphaCurveRow> alpha_curve(int q, const std::vector<double>& u_grid) {
  std::vector<AlphaCurveRow> rows;
  rows.reserve(u_grid.size());
  for (double u : u_grid) {
    if (!(u > 0.0) || u >= max_disagreement(q)) continue;  // row outside the domain
    AlphaCurveRow row;
    row.u = u;
    if (auto p = hom::ordered_point_for_u(q, u)) {
      row.alpha = p->coupling;
      row.free_energy = p->free_energy;
    } else {
      row.alpha = hom::disordered_coupling_for_u(q, u);
      row.free_energy = hom::disordered_free_energy(q, row.alpha);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pottsseg
