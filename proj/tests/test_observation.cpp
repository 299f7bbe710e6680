#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "pottsseg/observation.hpp"

using namespace pottsseg;

namespace {

ColorImage two_blob_image(int w, int h, std::uint64_t seed) {
  ColorImage img{w, h, {}};
  img.pixels.resize(static_cast<size_t>(w) * h);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.03);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double base = x < w / 2 ? 0.2 : 0.8;
      Eigen::Vector3d p(base + noise(rng), base + noise(rng), base + noise(rng));
      img.pixels[static_cast<size_t>(y) * w + x] = p;
    }
  return img;
}

}  // namespace

TEST_CASE("isotropic log density matches the closed form") {
  const double sigma2 = 0.04;
  const Eigen::Vector3d mean(0.3, 0.5, 0.7);
  const Eigen::Vector3d d(0.35, 0.42, 0.71);
  const Eigen::Matrix3d cov = sigma2 * Eigen::Matrix3d::Identity();
  const double expect = -1.5 * std::log(2.0 * std::numbers::pi * sigma2) -
                        (d - mean).squaredNorm() / (2.0 * sigma2);
  CHECK(log_gaussian(d, mean, cov) == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("log density is invariant under rotations and shifts") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = nd(rng);
  Eigen::Matrix3d rot = Eigen::HouseholderQR<Eigen::Matrix3d>(a).householderQ();

  Eigen::Vector3d mean(0.1, 0.2, 0.3), d(0.15, 0.4, 0.2), shift(1.0, -2.0, 0.5);
  Eigen::Matrix3d cov;
  cov << 0.05, 0.01, 0.0, 0.01, 0.04, -0.005, 0.0, -0.005, 0.06;
  const double base = log_gaussian(d, mean, cov);
  const Eigen::Matrix3d cov_rot = rot * cov * rot.transpose();
  CHECK(log_gaussian(rot * d, rot * mean, cov_rot) == Catch::Approx(base).margin(1e-10));
  CHECK(log_gaussian(d + shift, mean + shift, cov) == Catch::Approx(base).margin(1e-10));
}

TEST_CASE("likelihood table matches per-pixel evaluation") {
  ColorImage img = two_blob_image(6, 4, 1);
  GaussianParams params;
  params.mean = {Eigen::Vector3d(0.2, 0.2, 0.2), Eigen::Vector3d(0.8, 0.8, 0.8)};
  params.cov = {0.01 * Eigen::Matrix3d::Identity(), 0.02 * Eigen::Matrix3d::Identity()};
  auto table = likelihood_table(img, params);
  REQUIRE(table.size() == static_cast<size_t>(img.n()) * 2);
  for (int i = 0; i < img.n(); ++i)
    for (int s = 0; s < 2; ++s)
      REQUIRE(table[static_cast<size_t>(i) * 2 + s] ==
              Catch::Approx(log_gaussian(img.pixels[i], params.mean[s], params.cov[s]))
                  .margin(1e-12));
}

TEST_CASE("regularization lifts degenerate covariances") {
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  c(0, 0) = 1.0;  // rank one
  regularize_spd(c);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
  CHECK(es.eigenvalues()(0) >= 1e-6 * (c.trace() / 3.0) * 0.99);
  CHECK(Eigen::LLT<Eigen::Matrix3d>(c).info() == Eigen::Success);

  Eigen::Matrix3d z = Eigen::Matrix3d::Zero();
  regularize_spd(z);
  CHECK(Eigen::LLT<Eigen::Matrix3d>(z).info() == Eigen::Success);
}

TEST_CASE("seeded initialization is deterministic and finds both blobs") {
  ColorImage img = two_blob_image(16, 16, 3);
  auto a = init_params(img, 2, 42);
  auto b = init_params(img, 2, 42);
  REQUIRE(a.q() == 2);
  for (int s = 0; s < 2; ++s) {
    CHECK((a.mean[s] - b.mean[s]).norm() == 0.0);
    CHECK((a.cov[s] - b.cov[s]).norm() == 0.0);
  }
  const double lo = std::min(a.mean[0](0), a.mean[1](0));
  const double hi = std::max(a.mean[0](0), a.mean[1](0));
  CHECK(lo == Catch::Approx(0.2).margin(0.1));
  CHECK(hi == Catch::Approx(0.8).margin(0.1));
  for (int s = 0; s < 2; ++s)
    CHECK(Eigen::LLT<Eigen::Matrix3d>(a.cov[s]).info() == Eigen::Success);
}

TEST_CASE("initialization survives fewer colors than labels") {
  ColorImage img{4, 4, std::vector<Eigen::Vector3d>(16, Eigen::Vector3d(0.5, 0.5, 0.5))};
  auto params = init_params(img, 3, 9);
  REQUIRE(params.q() == 3);
  for (int s = 0; s < 3; ++s) {
    CHECK((params.mean[s] - Eigen::Vector3d(0.5, 0.5, 0.5)).norm() < 0.05);
    CHECK(Eigen::LLT<Eigen::Matrix3d>(params.cov[s]).info() == Eigen::Success);
  }
}

TEST_CASE("weighted refit reproduces hard-label statistics") {
  ColorImage img = two_blob_image(10, 10, 5);
  const int q = 2;
  std::vector<double> weights(static_cast<size_t>(img.n()) * q, 0.0);
  Eigen::Vector3d m0 = Eigen::Vector3d::Zero(), m1 = Eigen::Vector3d::Zero();
  int c0 = 0, c1 = 0;
  for (int i = 0; i < img.n(); ++i) {
    const int s = img.pixels[i](0) < 0.5 ? 0 : 1;
    weights[static_cast<size_t>(i) * q + s] = 1.0;
    if (s == 0) {
      m0 += img.pixels[i];
      ++c0;
    } else {
      m1 += img.pixels[i];
      ++c1;
    }
  }
  m0 /= c0;
  m1 /= c1;
  GaussianParams params;
  params.mean = {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  params.cov = {Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()};
  const int retained = update_params_weighted(img, weights, params);
  CHECK(retained == 0);
  CHECK((params.mean[0] - m0).norm() < 1e-12);
  CHECK((params.mean[1] - m1).norm() < 1e-12);

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (int i = 0; i < img.n(); ++i)
    if (img.pixels[i](0) < 0.5) {
      const Eigen::Vector3d r = img.pixels[i] - m0;
      scatter += r * r.transpose();
    }
  scatter /= c0;
  CHECK((params.cov[0] - scatter).norm() < 1e-8);
}

TEST_CASE("labels with no weight keep their previous parameters") {
  ColorImage img = two_blob_image(8, 8, 6);
  const int q = 3;
  std::vector<double> weights(static_cast<size_t>(img.n()) * q, 0.0);
  for (int i = 0; i < img.n(); ++i) weights[static_cast<size_t>(i) * q] = 1.0;
  GaussianParams params;
  params.mean = {Eigen::Vector3d::Zero(), Eigen::Vector3d(9, 9, 9), Eigen::Vector3d(-1, -1, -1)};
  params.cov.assign(3, 0.5 * Eigen::Matrix3d::Identity());
  const int retained = update_params_weighted(img, weights, params);
  CHECK(retained == 2);
  CHECK((params.mean[1] - Eigen::Vector3d(9, 9, 9)).norm() == 0.0);
  CHECK((params.mean[2] - Eigen::Vector3d(-1, -1, -1)).norm() == 0.0);
  CHECK((params.cov[1] - 0.5 * Eigen::Matrix3d::Identity()).norm() == 0.0);
}
