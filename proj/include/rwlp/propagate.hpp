#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rwlp/lattice.hpp"

namespace rwlp {

/// Partition-function values: z(x, l) is the total weight of walks from x
/// that are absorbed at a pixel labelled l. Entries are nonnegative and
/// absorbing rows hold exact indicators.
class PartitionField {
 public:
  explicit PartitionField(ClassField z);

  std::size_t pixelCount() const { return z_.pixelCount(); }
  std::size_t numClasses() const { return z_.numClasses(); }
  double at(PixelIndex p, ClassId l) const { return z_.at(p, l); }
  std::span<const double> row(PixelIndex p) const { return z_.row(p); }
  const ClassField& field() const { return z_; }

  /// Sum over labels at pixel p.
  double mass(PixelIndex p) const;

 private:
  ClassField z_;
};

/// Linear system A z_l = b_l shared by every label l. Free rows encode
///   4 e^{B(x)} z(x) - sum_{x' ~ x} z(x') = 0
/// with off-grid neighbours dropped; absorbing rows are identity rows.
struct RwSystem {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t numClasses = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  std::vector<double> diag;              // C_i; 1 on absorbing rows
  std::vector<std::int32_t> absorbing;   // class id, or -1 on free rows

  std::size_t size() const { return diag.size(); }
  bool isAbsorbing(PixelIndex i) const { return absorbing[i] >= 0; }
  Eigen::VectorXd rhs(ClassId l) const;
};

RwSystem assembleSystem(const GridLattice& lattice, const SparseLabels& labels,
                        const BoundaryField& boundary);

enum class SolverKind { automatic, sor, sparseLu };

struct SolverOptions {
  SolverKind kind = SolverKind::automatic;
  double tolerance = 1e-10;             // relative residual target
  // automatic: LU at or below this size. SOR stops on a residual relative
  // to |b|, so it cannot resolve P where Z is below about 1e-12; LU can.
  std::size_t directThreshold = 262144;
  double omega = 0.0;                   // SOR relaxation; 0 selects from the lattice shape
  std::size_t maxIterations = 0;        // 0 means 100 * size
};

/// Solves A x = b and A^T x = b for one assembled system. Either holds a
/// sparse LU factorisation or runs successive over-relaxation sweeps. The
/// system must outlive the solver.
class LinearSolver {
 public:
  LinearSolver(const RwSystem& system, const SolverOptions& options = {});
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXd solveTransposed(const Eigen::VectorXd& b) const;

  SolverKind kind() const { return kind_; }
  double omega() const { return omega_; }

 private:
  Eigen::VectorXd sor(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m,
                      const Eigen::VectorXd& b, bool reverse) const;
  Eigen::VectorXd direct(const Eigen::VectorXd& b, bool transposed) const;

  const RwSystem* system_;
  SolverOptions options_;
  SolverKind kind_;
  double omega_ = 1.0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> transposed_;
  struct Lu;
  std::unique_ptr<Lu> lu_;
};

double relativeResidual(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& b);

PartitionField solvePartition(const RwSystem& system, const SparseLabels& labels,
                              const SolverOptions& options = {});

PartitionField solvePartition(const RwSystem& system, const SparseLabels& labels,
                              const LinearSolver& solver);

/// Pixels whose total mass falls at or below this are treated as unreached.
inline constexpr double kReachEpsilon = 1e-300;

struct Propagation {
  LabelField p;
  PartitionField z;
  std::vector<PixelIndex> unreached;  // ascending
};

/// Hitting-probability label distributions P(x) = Z(x, .) / sum_l Z(x, l).
/// Unreached pixels get the uniform distribution.
Propagation normalizePartition(PartitionField z);

Propagation propagateLabels(const GridLattice& lattice, const SparseLabels& labels,
                            const BoundaryField& boundary,
                            const SolverOptions& options = {});

}  // namespace rwlp
