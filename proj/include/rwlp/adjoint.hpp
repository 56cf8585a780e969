#pragma once

#include <span>
#include <vector>

#include "rwlp/lattice.hpp"
#include "rwlp/propagate.hpp"

namespace rwlp {

/// dL/dB per pixel. Exactly zero at absorbing pixels.
struct BoundaryGradient {
  std::vector<double> values;
};

/// Chains dL/dP through the normalisation P = Z / S, S(x) = sum_l Z(x, l):
///   dL/dZ(x, l) = (dL/dP(x, l) - sum_m dL/dP(x, m) P(x, m)) / S(x).
/// Pixels with S(x) <= kReachEpsilon get zero.
ClassField gradPfromLoss(const LabelField& p, std::span<const double> mass,
                         const ClassField& dLdP);

ClassField gradPfromLoss(const Propagation& propagation, const ClassField& dLdP);

/// Gradient of a loss with respect to the boundary field, given dL/dZ.
/// For each label solves A^T u_l = dL/dZ_l, then
///   dL/dC_i = -sum_l u_l(i) z_l(i),   dL/dB(x_i) = C_i dL/dC_i
/// on free rows. Labels are reduced in ascending order.
BoundaryGradient backpropBoundary(const RwSystem& system, const PartitionField& z,
                                  const ClassField& dLdZ, const BoundaryField& boundary,
                                  const SolverOptions& options = {});

BoundaryGradient backpropBoundary(const RwSystem& system, const LinearSolver& solver,
                                  const PartitionField& z, const ClassField& dLdZ);

}  // namespace rwlp
