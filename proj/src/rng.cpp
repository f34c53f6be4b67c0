#include "drocc/rng.hpp"

#include <cmath>

namespace drocc {

void Rng::unit_vector(std::span<double> out) {
  if (out.empty()) return;
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : out) {
      v = normal();
      n2 += v * v;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : out) v *= inv;
}

}  // namespace drocc
