// Prints the phase structure of the homogeneous Potts prior for a given
// label count: transition point, free-energy curve, and the u -> alpha map.

#include <cstdlib>
#include <iostream>
#include <vector>

#include "pottsseg/potts_prior.hpp"

using namespace pottsseg;

int main(int argc, char** argv) {
  const int q = argc > 1 ? std::atoi(argv[1]) : 5;
  if (q < 2) {
    std::cerr << "usage: phase_curves [q >= 2]\n";
    return 2;
  }

  const auto t = transition_point(q);
  if (t.kind == TransitionKind::first_order)
    std::cout << "q=" << q << ": first-order transition at K_C=" << t.coupling_c
              << " (ordered branch appears at K=" << t.onset_coupling << ")\n";
  else
    std::cout << "q=" << q << ": no first-order transition; ordered branch appears at K="
              << t.onset_coupling << "\n";

  std::cout << "\nK,f,dfdK,u,branch\n";
  std::vector<double> grid;
  for (int i = 0; i <= 24; ++i) grid.push_back(0.25 * i / 2.0 + 1.0);
  for (const auto& row : free_energy_curve(q, grid))
    std::cout << row.coupling << "," << row.free_energy << "," << row.dfdK << "," << row.u << ","
              << (row.branch == Branch::ordered ? "ordered" : "disordered") << "\n";

  std::cout << "\nu,alpha,f\n";
  std::vector<double> us;
  for (int i = 1; i <= 16; ++i) us.push_back(i * (q - 1.0) / q / 17.0);
  for (const auto& row : alpha_curve(q, us))
    std::cout << row.u << "," << row.alpha << "," << row.free_energy << "\n";
  return 0;
}
