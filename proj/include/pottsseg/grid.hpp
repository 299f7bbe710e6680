#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace pottsseg {

enum class Boundary { free, periodic };

inline const char* to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "free";
}

// Square-lattice (or explicit small) graph with a deterministic row-major
// ordering of nodes, edges, and directed edges. Directed edge 2e carries
// edge e from its first stored endpoint to the second, 2e+1 the reverse.
class Grid {
 public:
  int width = 0;
  int height = 0;
  Boundary boundary = Boundary::free;

  static Grid lattice(int width, int height, Boundary boundary) {
    if (width < 1 || height < 1)
      throw std::invalid_argument("lattice: width and height must be >= 1");
    if (boundary == Boundary::periodic && (width < 3 || height < 3))
      throw std::invalid_argument(
          "lattice: periodic boundary requires width >= 3 and height >= 3");
    Grid g;
    g.width = width;
    g.height = height;
    g.boundary = boundary;
    std::vector<std::array<int, 2>> pairs;
    const bool wrap = boundary == Boundary::periodic;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const int i = y * width + x;
        if (x + 1 < width)
          pairs.push_back({i, i + 1});
        else if (wrap)
          pairs.push_back({i, y * width});
        if (y + 1 < height)
          pairs.push_back({i, i + width});
        else if (wrap)
          pairs.push_back({i, x});
      }
    }
    g.finish(width * height, pairs);
    return g;
  }

  // Explicit graph for oracle tests (chains, random trees).
  static Grid from_edges(int n_nodes, const std::vector<std::array<int, 2>>& pairs) {
    if (n_nodes < 1) throw std::invalid_argument("from_edges: need n_nodes >= 1");
    Grid g;
    g.width = n_nodes;
    g.height = 1;
    g.finish(n_nodes, pairs);
    return g;
  }

  int n() const { return static_cast<int>(neighbors_.size()); }
  int m() const { return static_cast<int>(edges_.size()); }
  int n_dir() const { return 2 * m(); }

  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }
  int degree(int i) const { return static_cast<int>(neighbors_[i].size()); }
  // Directed edges (k -> i) for each receiving node i.
  const std::vector<int>& incoming(int i) const { return incoming_[i]; }

  int dir_src(int d) const { return d % 2 == 0 ? edges_[d / 2][0] : edges_[d / 2][1]; }
  int dir_dst(int d) const { return d % 2 == 0 ? edges_[d / 2][1] : edges_[d / 2][0]; }
  int dir_reverse(int d) const { return d ^ 1; }
  int dir_edge(int d) const { return d / 2; }
  // Directed edge carrying edge e out of endpoint `from`.
  int dir_from(int e, int from) const {
    if (edges_[e][0] == from) return 2 * e;
    if (edges_[e][1] == from) return 2 * e + 1;
    throw std::invalid_argument("dir_from: node is not an endpoint of edge");
  }

 private:
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> incoming_;

  void finish(int n_nodes, const std::vector<std::array<int, 2>>& pairs) {
    neighbors_.assign(n_nodes, {});
    incoming_.assign(n_nodes, {});
    edges_.reserve(pairs.size());
    for (const auto& p : pairs) {
      const int a = p[0], b = p[1];
      if (a < 0 || a >= n_nodes || b < 0 || b >= n_nodes)
        throw std::invalid_argument("edge endpoint out of range");
      if (a == b) throw std::invalid_argument("self-loop edge rejected");
      for (int k : neighbors_[a])
        if (k == b) throw std::invalid_argument("duplicate edge rejected");
      const int e = static_cast<int>(edges_.size());
      edges_.push_back({a, b});
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
      incoming_[b].push_back(2 * e);      // a -> b
      incoming_[a].push_back(2 * e + 1);  // b -> a
    }
  }
};

}  // namespace pottsseg
