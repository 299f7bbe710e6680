#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace pottsseg {

struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> pixels;  // row-major, values in [0, 1]

  int n() const { return width * height; }
};

// per-label Gaussian observation model in RGB space
struct GaussianParams {
  std::vector<Eigen::Vector3d> mean;
  std::vector<Eigen::Matrix3d> cov;

  int q() const { return static_cast<int>(mean.size()); }
};

// max-norm change across means and covariances
inline double params_distance(const GaussianParams& a, const GaussianParams& b) {
  double d = 0.0;
  for (int s = 0; s < a.q(); ++s) {
    d = std::max(d, (a.mean[s] - b.mean[s]).cwiseAbs().maxCoeff());
    d = std::max(d, (a.cov[s] - b.cov[s]).cwiseAbs().maxCoeff());
  }
  return d;
}

// lifts the smallest eigenvalue to a scale-aware floor so LLT always succeeds
inline void regularize_spd(Eigen::Matrix3d& cov) {
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const double floor_val = 1e-6 * std::max(cov.trace() / 3.0, 1e-6);
  const double lambda_min = es.eigenvalues()(0);
  if (lambda_min < floor_val)
    cov += (floor_val - lambda_min) * Eigen::Matrix3d::Identity();
}

inline double log_gaussian(const Eigen::Vector3d& d, const Eigen::Vector3d& mean,
                           const Eigen::Matrix3d& cov) {
  Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance not positive definite");
  const Eigen::Vector3d z = llt.matrixL().solve(d - mean);
  double half_log_det = 0.0;
  for (int i = 0; i < 3; ++i) half_log_det += std::log(llt.matrixL()(i, i));
  return -1.5 * std::log(2.0 * std::numbers::pi) - half_log_det - 0.5 * z.squaredNorm();
}

// n*q table of log g(d_i | s, params)
inline std::vector<double> likelihood_table(const ColorImage& img, const GaussianParams& params) {
  const int q = params.q();
  std::vector<Eigen::LLT<Eigen::Matrix3d>> llts;
  std::vector<double> constants(q);
  llts.reserve(q);
  for (int s = 0; s < q; ++s) {
    llts.emplace_back(params.cov[s]);
    if (llts[s].info() != Eigen::Success)
      throw std::invalid_argument("covariance not positive definite");
    double half_log_det = 0.0;
    for (int i = 0; i < 3; ++i) half_log_det += std::log(llts[s].matrixL()(i, i));
    constants[s] = -1.5 * std::log(2.0 * std::numbers::pi) - half_log_det;
  }
  std::vector<double> table(static_cast<size_t>(img.n()) * q);
  for (int i = 0; i < img.n(); ++i)
    for (int s = 0; s < q; ++s) {
      const Eigen::Vector3d z = llts[s].matrixL().solve(img.pixels[i] - params.mean[s]);
      table[static_cast<size_t>(i) * q + s] = constants[s] - 0.5 * z.squaredNorm();
    }
  return table;
}

// weighted mean/covariance refit; weights is n*q, rows need not be normalized.
// Labels whose total weight is negligible keep their previous parameters.
// Returns how many labels were retained that way.
inline int update_params_weighted(const ColorImage& img, const std::vector<double>& weights,
                                  GaussianParams& params) {
  const int q = params.q();
  if (weights.size() != static_cast<size_t>(img.n()) * q)
    throw std::invalid_argument("weight table has wrong size");
  int retained = 0;
  for (int s = 0; s < q; ++s) {
    double w_tot = 0.0;
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (int i = 0; i < img.n(); ++i) {
      const double w = weights[static_cast<size_t>(i) * q + s];
      w_tot += w;
      m += w * img.pixels[i];
    }
    if (!(w_tot > 1e-12 * img.n())) {
      ++retained;
      continue;
    }
    m /= w_tot;
    Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
    for (int i = 0; i < img.n(); ++i) {
      const Eigen::Vector3d r = img.pixels[i] - m;
      c += weights[static_cast<size_t>(i) * q + s] * (r * r.transpose());
    }
    c /= w_tot;
    regularize_spd(c);
    params.mean[s] = m;
    params.cov[s] = c;
  }
  return retained;
}

// farthest-point seeding plus a few hard reassignment rounds; deterministic for a seed
inline GaussianParams init_params(const ColorImage& img, int q, std::uint64_t seed) {
  if (q < 1) throw std::invalid_argument("need at least one label");
  if (img.n() < 1) throw std::invalid_argument("empty image");
  std::mt19937_64 rng(seed);

  std::vector<Eigen::Vector3d> centers;
  centers.reserve(q);
  std::uniform_int_distribution<int> first(0, img.n() - 1);
  centers.push_back(img.pixels[first(rng)]);
  std::vector<double> nearest(img.n());
  for (int s = 1; s < q; ++s) {
    int best = 0;
    double best_d = -1.0;
    for (int i = 0; i < img.n(); ++i) {
      double d = (img.pixels[i] - centers[0]).squaredNorm();
      for (size_t c = 1; c < centers.size(); ++c)
        d = std::min(d, (img.pixels[i] - centers[c]).squaredNorm());
      nearest[i] = d;
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    Eigen::Vector3d next = img.pixels[best];
    if (best_d < 1e-12) {
      // fewer distinct colors than labels; split off a jittered copy
      std::normal_distribution<double> jitter(0.0, 1e-3);
      for (int k = 0; k < 3; ++k) next(k) += jitter(rng);
    }
    centers.push_back(next);
  }

  std::vector<int> assign(img.n());
  for (int round = 0; round < 10; ++round) {
    for (int i = 0; i < img.n(); ++i) {
      int arg = 0;
      double best = (img.pixels[i] - centers[0]).squaredNorm();
      for (int s = 1; s < q; ++s) {
        const double d = (img.pixels[i] - centers[s]).squaredNorm();
        if (d < best) {
          best = d;
          arg = s;
        }
      }
      assign[i] = arg;
    }
    for (int s = 0; s < q; ++s) {
      Eigen::Vector3d m = Eigen::Vector3d::Zero();
      int cnt = 0;
      for (int i = 0; i < img.n(); ++i)
        if (assign[i] == s) {
          m += img.pixels[i];
          ++cnt;
        }
      if (cnt > 0) centers[s] = m / cnt;
    }
  }

  GaussianParams params;
  params.mean = centers;
  params.cov.assign(q, 1e-2 * Eigen::Matrix3d::Identity());
  for (int s = 0; s < q; ++s) {
    Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
    int cnt = 0;
    for (int i = 0; i < img.n(); ++i)
      if (assign[i] == s) {
        const Eigen::Vector3d r = img.pixels[i] - centers[s];
        c += r * r.transpose();
        ++cnt;
      }
    if (cnt >= 2) {
      c /= cnt;
      regularize_spd(c);
      params.cov[s] = c;
    }
  }
  return params;
}

}  // namespace pottsseg
