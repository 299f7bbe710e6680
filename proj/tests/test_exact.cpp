#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pottsseg/exact.hpp"
#include "pottsseg/grid.hpp"

using namespace pottsseg;

TEST_CASE("single edge partition function by hand") {
  Grid g = Grid::from_edges(2, {{0, 1}});
  const double K = 0.9;
  ExactResult r = enumerate_graph(g, 2, K);
  CHECK(r.log_partition == Catch::Approx(std::log(2 * std::exp(K / 2) + 2)).epsilon(1e-14));
}

TEST_CASE("2x2 free grid at K=0 is uniform") {
  Grid g = Grid::lattice(2, 2, Boundary::free);
  ExactResult r = enumerate_graph(g, 2, 0.0);
  CHECK(r.log_partition == Catch::Approx(4 * std::log(2.0)).epsilon(1e-14));
  for (double v : r.node_marginals) CHECK(v == Catch::Approx(0.5).epsilon(1e-13));
  for (double v : r.edge_marginals) CHECK(v == Catch::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("chain n=6 q=3: enumeration equals transfer matrix") {
  const int n = 6, q = 3;
  const double K = 1.3;
  std::vector<std::array<int, 2>> pairs;
  for (int i = 0; i + 1 < n; ++i) pairs.push_back({i, i + 1});
  Grid g = Grid::from_edges(n, pairs);
  ExactResult a = enumerate_graph(g, q, K);
  ExactResult b = transfer_matrix_chain(n, q, K);
  CHECK(a.log_partition == Catch::Approx(b.log_partition).epsilon(1e-12));
  for (size_t i = 0; i < a.node_marginals.size(); ++i)
    CHECK(a.node_marginals[i] == Catch::Approx(b.node_marginals[i]).margin(1e-12));
  for (size_t i = 0; i < a.edge_marginals.size(); ++i)
    CHECK(a.edge_marginals[i] == Catch::Approx(b.edge_marginals[i]).margin(1e-12));
}

TEST_CASE("chain with node factors: enumeration equals transfer matrix") {
  const int n = 7, q = 3;
  const double K = 0.8;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-300.0, 5.0);
  std::vector<double> logg(n * q);
  for (double& v : logg) v = unif(rng);
  std::vector<std::array<int, 2>> pairs;
  for (int i = 0; i + 1 < n; ++i) pairs.push_back({i, i + 1});
  Grid g = Grid::from_edges(n, pairs);
  ExactResult a = enumerate_graph(g, q, K, &logg);
  ExactResult b = transfer_matrix_chain(n, q, K, &logg);
  CHECK(a.log_partition == Catch::Approx(b.log_partition).epsilon(1e-12));
  for (size_t i = 0; i < a.node_marginals.size(); ++i)
    CHECK(a.node_marginals[i] == Catch::Approx(b.node_marginals[i]).margin(1e-11));
  for (size_t i = 0; i < a.edge_marginals.size(); ++i)
    CHECK(a.edge_marginals[i] == Catch::Approx(b.edge_marginals[i]).margin(1e-11));
}

TEST_CASE("n=1 chain gives ln q") {
  ExactResult r = transfer_matrix_chain(1, 5, 2.0);
  CHECK(r.log_partition == Catch::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("n=2 chain matches the single-edge formula") {
  const double K = 1.7;
  ExactResult r = transfer_matrix_chain(2, 4, K);
  CHECK(r.log_partition ==
        Catch::Approx(std::log(4 * std::exp(K / 2) + 12)).epsilon(1e-14));
}

TEST_CASE("marginals normalize and edge marginals reduce to node marginals") {
  Grid g = Grid::lattice(3, 3, Boundary::free);
  const int q = 3;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<double> logg(g.n() * q);
  for (double& v : logg) v = unif(rng);
  ExactResult r = enumerate_graph(g, q, 1.1, &logg);
  for (int i = 0; i < g.n(); ++i) {
    double s = 0.0;
    for (int a = 0; a < q; ++a) s += r.node_marginals[i * q + a];
    CHECK(s == Catch::Approx(1.0).epsilon(1e-12));
  }
  for (int e = 0; e < g.m(); ++e) {
    const auto& pr = g.edges()[e];
    for (int a = 0; a < q; ++a) {
      double left = 0.0, right = 0.0;
      for (int b = 0; b < q; ++b) {
        left += r.edge_marginals[(static_cast<size_t>(e) * q + a) * q + b];
        right += r.edge_marginals[(static_cast<size_t>(e) * q + b) * q + a];
      }
      CHECK(left == Catch::Approx(r.node_marginals[pr[0] * q + a]).margin(1e-12));
      CHECK(right == Catch::Approx(r.node_marginals[pr[1] * q + a]).margin(1e-12));
    }
  }
}

TEST_CASE("oversized state space is rejected") {
  std::vector<std::array<int, 2>> pairs;
  for (int i = 0; i + 1 < 30; ++i) pairs.push_back({i, i + 1});
  Grid g = Grid::from_edges(30, pairs);
  CHECK_THROWS(enumerate_graph(g, 4, 1.0));
}
