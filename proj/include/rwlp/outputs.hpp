#pragma once

#include <vector>

#include "rwlp/lattice.hpp"
#include "rwlp/propagate.hpp"

namespace rwlp {

/// Everything the propagate command and the HTTP service report for one
/// propagation request.
struct PropagationOutputs {
  Propagation propagation;
  std::vector<ClassId> map;
  std::vector<double> entropy;
  std::vector<double> weights;
  double solveMillis = 0.0;
};

PropagationOutputs computeOutputs(const GridLattice& lattice, const SparseLabels& labels,
                                  const BoundaryField& boundary, double alpha,
                                  const SolverOptions& options = {});

}  // namespace rwlp
