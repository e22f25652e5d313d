#include "geosynth/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace geosynth {

double beta_draw(Rng& rng, double a, double b) {
  const double x = gamma_draw(rng, a, 1.0);
  const double y = gamma_draw(rng, b, 1.0);
  if (x + y <= 0.0) {
    // Both gamma draws underflowed; only possible for tiny shapes.
    return a / (a + b);
  }
  return x / (x + y);
}

void dirichlet_draw(Rng& rng, std::span<const double> alpha, std::span<double> out) {
  if (alpha.size() != out.size() || alpha.empty()) {
    throw std::invalid_argument("dirichlet_draw: size mismatch");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < alpha.size(); ++c) {
    out[c] = gamma_draw(rng, alpha[c], 1.0);
    total += out[c];
  }
  if (total <= 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    out[std::distance(alpha.begin(), std::max_element(alpha.begin(), alpha.end()))] = 1.0;
    return;
  }
  for (double& v : out) v /= total;
}

}  // namespace geosynth
