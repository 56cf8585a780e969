#include "rwlp/outputs.hpp"

#include <chrono>

#include "rwlp/loss.hpp"

namespace rwlp {

PropagationOutputs computeOutputs(const GridLattice& lattice, const SparseLabels& labels,
                                  const BoundaryField& boundary, double alpha,
                                  const SolverOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Propagation prop = propagateLabels(lattice, labels, boundary, options);
  const auto stop = std::chrono::steady_clock::now();

  std::vector<double> h(lattice.size());
  for (PixelIndex x = 0; x < h.size(); ++x) h[x] = entropy(prop.p.row(x));
  auto w = uncertaintyWeights(prop.p, alpha, prop.unreached);
  auto map = mapLabels(prop.p);
  const double millis = std::chrono::duration<double, std::milli>(stop - start).count();
  return {std::move(prop), std::move(map), std::move(h), std::move(w), millis};
}

}  // namespace rwlp
