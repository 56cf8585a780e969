#include "rwlp/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rwlp/errors.hpp"

namespace rwlp {

ClassField gradPfromLoss(const LabelField& p, std::span<const double> mass,
                         const ClassField& dLdP) {
  const std::size_t n = p.pixelCount();
  const std::size_t k = p.numClasses();
  if (mass.size() != n || dLdP.pixelCount() != n || dLdP.numClasses() != k) {
    throw ContractError("gradPfromLoss: shape mismatch");
  }
  ClassField out(n, k);
  for (PixelIndex x = 0; x < n; ++x) {
    if (mass[x] <= kReachEpsilon) continue;
    double projected = 0.0;
    for (ClassId m = 0; m < k; ++m) projected += dLdP.at(x, m) * p.at(x, m);
    for (ClassId l = 0; l < k; ++l) out.at(x, l) = (dLdP.at(x, l) - projected) / mass[x];
  }
  return out;
}

ClassField gradPfromLoss(const Propagation& propagation, const ClassField& dLdP) {
  std::vector<double> mass(propagation.z.pixelCount());
  for (PixelIndex x = 0; x < mass.size(); ++x) mass[x] = propagation.z.mass(x);
  return gradPfromLoss(propagation.p, mass, dLdP);
}

BoundaryGradient backpropBoundary(const RwSystem& system, const LinearSolver& solver,
                                  const PartitionField& z, const ClassField& dLdZ) {
  const std::size_t n = system.size();
  const std::size_t k = system.numClasses;
  if (z.pixelCount() != n || z.numClasses() != k || dLdZ.pixelCount() != n ||
      dLdZ.numClasses() != k) {
    throw ContractError("backpropBoundary: shape mismatch");
  }

  // Per-label contributions to dL/dC, reduced in ascending label order.
  std::vector<double> dLdC(n, 0.0);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (ClassId l = 0; l < k; ++l) {
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // Absorbing rows have no off-diagonals, so their adjoint entries never
      // reach a free row; zero them to keep the right-hand side tidy.
      const double g = system.isAbsorbing(i) ? 0.0 : dLdZ.at(i, l);
      rhs[static_cast<Eigen::Index>(i)] = g;
      scale = std::max(scale, std::abs(g));
    }
    if (scale == 0.0) continue;
    // Pixels barely above the reach threshold carry dL/dZ near 1e300. Solve
    // for u / scale so nothing overflows, and apply the scale after the
    // product with the tiny z it pairs with.
    rhs /= scale;
    const Eigen::VectorXd u = solver.solveTransposed(rhs);
    for (std::size_t i = 0; i < n; ++i) {
      if (!system.isAbsorbing(i)) {
        dLdC[i] -= (u[static_cast<Eigen::Index>(i)] * z.at(i, l)) * scale;
      }
    }
  }

  BoundaryGradient grad{std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (system.isAbsorbing(i)) continue;
    const double g = dLdC[i] * system.diag[i];
    if (!std::isfinite(g)) {
      throw SolverError("non-finite boundary gradient at pixel " + std::to_string(i),
                        std::nan(""));
    }
    grad.values[i] = g;
  }
  return grad;
}

BoundaryGradient backpropBoundary(const RwSystem& system, const PartitionField& z,
                                  const ClassField& dLdZ, const BoundaryField& boundary,
                                  const SolverOptions& options) {
  if (boundary.size() != system.size()) {
    throw ContractError("backpropBoundary: boundary field does not match the system");
  }
  const LinearSolver solver(system, options);
  return backpropBoundary(system, solver, z, dLdZ);
}

}  // namespace rwlp
