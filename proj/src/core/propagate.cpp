#include "rwlp/propagate.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/SparseLU>

#include "rwlp/errors.hpp"

namespace rwlp {

namespace {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

// Solver outputs in [-kNegativeSlack, 0) are rounding noise and are clamped.
constexpr double kNegativeSlack = 1e-12;

constexpr int kResidualCheckInterval = 8;
constexpr int kRefinementSteps = 3;

}  // namespace

PartitionField::PartitionField(ClassField z) : z_(std::move(z)) {
  for (double v : z_.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractError("partition values must be finite and nonnegative");
    }
  }
}

double PartitionField::mass(PixelIndex p) const {
  double s = 0.0;
  for (double v : z_.row(p)) s += v;
  return s;
}

Eigen::VectorXd RwSystem::rhs(ClassId l) const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    if (absorbing[i] == static_cast<std::int32_t>(l)) b[static_cast<Eigen::Index>(i)] = 1.0;
  }
  return b;
}

RwSystem assembleSystem(const GridLattice& lattice, const SparseLabels& labels,
                        const BoundaryField& boundary) {
  if (boundary.size() != lattice.size() || labels.pixelCount() != lattice.size()) {
    throw ContractError("lattice, labels and boundary field disagree on pixel count");
  }
  if (labels.empty()) {
    throw ValidationError("no absorbing pixels");
  }

  const std::size_t n = lattice.size();
  RwSystem sys;
  sys.width = lattice.width();
  sys.height = lattice.height();
  sys.numClasses = labels.numClasses();
  sys.diag.assign(n, 1.0);
  sys.absorbing.assign(n, -1);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(5 * n);
  for (PixelIndex i = 0; i < n; ++i) {
    const auto label = labels.labelAt(i);
    const auto row = static_cast<Eigen::Index>(i);
    if (label) {
      sys.absorbing[i] = static_cast<std::int32_t>(*label);
      triplets.emplace_back(row, row, 1.0);
      continue;
    }
    const double c = 4.0 * std::exp(boundary[i]);
    sys.diag[i] = c;
    triplets.emplace_back(row, row, c);
    for (PixelIndex j : lattice.neighbors(i)) {
      triplets.emplace_back(row, static_cast<Eigen::Index>(j), -1.0);
    }
  }
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

double relativeResidual(const RowMatrix& m, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const double r = (m * x - b).norm();
  const double bn = b.norm();
  return bn > 0.0 ? r / bn : r;
}

struct LinearSolver::Lu {
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> factor;
};

LinearSolver::LinearSolver(const RwSystem& system, const SolverOptions& options)
    : system_(&system), options_(options), kind_(options.kind) {
  const std::size_t n = system.size();
  if (kind_ == SolverKind::automatic) {
    kind_ = n <= options_.directThreshold ? SolverKind::sparseLu : SolverKind::sor;
  }
  if (options_.maxIterations == 0) options_.maxIterations = 100 * n;
  transposed_ = system.matrix.transpose();

  if (kind_ == SolverKind::sparseLu) {
    lu_ = std::make_unique<Lu>();
    ColMatrix a = system.matrix;
    lu_->factor.analyzePattern(a);
    lu_->factor.factorize(a);
    if (lu_->factor.info() != Eigen::Success) {
      throw SolverError("sparse LU factorisation failed: " + lu_->factor.lastErrorMessage(),
                        std::nan(""));
    }
    return;
  }

  if (options_.omega > 0.0) {
    omega_ = options_.omega;
  } else {
    // Jacobi spectral radius of the all-free lattice with a zero exterior
    // bounds the radius of every system assembled on that lattice.
    const double pi = std::numbers::pi;
    const double rho = 0.5 * (std::cos(pi / static_cast<double>(system.width + 1)) +
                              std::cos(pi / static_cast<double>(system.height + 1)));
    omega_ = 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));
  }
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& b) const {
  return kind_ == SolverKind::sparseLu ? direct(b, false) : sor(system_->matrix, b, false);
}

Eigen::VectorXd LinearSolver::solveTransposed(const Eigen::VectorXd& b) const {
  return kind_ == SolverKind::sparseLu ? direct(b, true) : sor(transposed_, b, true);
}

Eigen::VectorXd LinearSolver::direct(const Eigen::VectorXd& b, bool transposed) const {
  const RowMatrix& op = transposed ? transposed_ : system_->matrix;
  if (b.norm() == 0.0) return Eigen::VectorXd::Zero(b.size());

  auto apply = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
    return transposed ? Eigen::VectorXd(lu_->factor.transpose().solve(rhs))
                      : Eigen::VectorXd(lu_->factor.solve(rhs));
  };
  Eigen::VectorXd x = apply(b);
  double res = relativeResidual(op, x, b);
  for (int k = 0; k < kRefinementSteps && res > options_.tolerance; ++k) {
    x += apply(b - op * x);
    res = relativeResidual(op, x, b);
  }
  if (!(res <= options_.tolerance)) {
    std::ostringstream os;
    os << "sparse LU solve reached relative residual " << res << " (target "
       << options_.tolerance << ")";
    throw SolverError(os.str(), res);
  }
  return x;
}

Eigen::VectorXd LinearSolver::sor(const RowMatrix& m, const Eigen::VectorXd& b,
                                  bool reverse) const {
  const Eigen::Index n = b.size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (b.norm() == 0.0) return x;

  const std::vector<double>& diag = system_->diag;
  double res = relativeResidual(m, x, b);
  for (std::size_t sweep = 1; sweep <= options_.maxIterations; ++sweep) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index i = reverse ? n - 1 - k : k;
      double off = 0.0;
      for (RowMatrix::InnerIterator it(m, i); it; ++it) {
        if (it.col() != i) off += it.value() * x[it.col()];
      }
      const double target = (b[i] - off) / diag[static_cast<std::size_t>(i)];
      x[i] += omega_ * (target - x[i]);
    }
    if (sweep % kResidualCheckInterval == 0 || sweep == options_.maxIterations) {
      res = relativeResidual(m, x, b);
      if (res <= options_.tolerance) return x;
    }
  }
  std::ostringstream os;
  os << "SOR did not converge in " << options_.maxIterations
     << " sweeps; relative residual " << res;
  throw SolverError(os.str(), res);
}

PartitionField solvePartition(const RwSystem& system, const SparseLabels& labels,
                              const SolverOptions& options) {
  if (labels.empty()) throw ValidationError("no absorbing pixels");
  return solvePartition(system, labels, LinearSolver(system, options));
}

PartitionField solvePartition(const RwSystem& system, const SparseLabels& labels,
                              const LinearSolver& solver) {
  if (labels.pixelCount() != system.size() || labels.numClasses() != system.numClasses) {
    throw ContractError("labels do not match the assembled system");
  }
  if (labels.empty()) throw ValidationError("no absorbing pixels");

  const std::size_t n = system.size();
  const std::size_t k = system.numClasses;
  ClassField z(n, k);
  for (ClassId l = 0; l < k; ++l) {
    const Eigen::VectorXd x = solver.solve(system.rhs(l));
    for (std::size_t i = 0; i < n; ++i) {
      double v = x[static_cast<Eigen::Index>(i)];
      if (system.isAbsorbing(i)) {
        v = system.absorbing[i] == static_cast<std::int32_t>(l) ? 1.0 : 0.0;
      } else if (v < 0.0) {
        if (v < -kNegativeSlack) {
          std::ostringstream os;
          os << "partition value " << v << " at pixel " << i << ", class " << l
             << " is negative beyond rounding";
          throw SolverError(os.str(), -v);
        }
        v = 0.0;
      }
      z.at(i, l) = v;
    }
  }
  return PartitionField(std::move(z));
}

Propagation normalizePartition(PartitionField z) {
  const std::size_t n = z.pixelCount();
  const std::size_t k = z.numClasses();
  ClassField p(n, k);
  std::vector<PixelIndex> unreached;
  for (PixelIndex x = 0; x < n; ++x) {
    const double s = z.mass(x);
    if (s <= kReachEpsilon) {
      unreached.push_back(x);
      for (ClassId l = 0; l < k; ++l) p.at(x, l) = 1.0 / static_cast<double>(k);
      continue;
    }
    for (ClassId l = 0; l < k; ++l) p.at(x, l) = z.at(x, l) / s;
  }
  return {LabelField(std::move(p)), std::move(z), std::move(unreached)};
}

Propagation propagateLabels(const GridLattice& lattice, const SparseLabels& labels,
                            const BoundaryField& boundary, const SolverOptions& options) {
  const RwSystem system = assembleSystem(lattice, labels, boundary);
  return normalizePartition(solvePartition(system, labels, options));
}

}  // namespace rwlp
