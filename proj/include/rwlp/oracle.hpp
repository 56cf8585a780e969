#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "rwlp/lattice.hpp"
#include "rwlp/propagate.hpp"

// Independent reference computations used to check the propagation, adjoint
// and loss code paths. Nothing in here calls into the sparse solver.
namespace rwlp::oracle {

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit Mersenne
/// Twister draw. std::mt19937_64 is fully specified by the standard, so the
/// stream is identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection, platform independent.
std::uint64_t uniformBelow(std::mt19937_64& rng, std::uint64_t n);

struct McEstimate {
  ClassField probs;
  ClassField stderrs;
  std::vector<double> deaths;          // fraction of walks that never hit a label
  std::vector<std::uint64_t> hits;     // walks absorbed at a label, per start pixel
};

/// Simulates walks from every pixel. At a free pixel the walk survives with
/// probability e^{-B(x)} and then moves in one of four directions uniformly;
/// leaving the grid or exceeding maxSteps kills it.
McEstimate mcHittingProbabilities(const GridLattice& lattice, const SparseLabels& labels,
                                  const BoundaryField& boundary, std::size_t walksPerPixel,
                                  std::size_t maxSteps, std::uint64_t seed);

inline constexpr std::size_t kDefaultMaxSteps = 1'000'000;

/// Largest |p_mc - p| / se over all (pixel, class) entries. se is the Monte
/// Carlo binomial standard error; where that degenerates to zero the
/// standard error implied by the reference probability is used instead.
struct ZScoreReport {
  double maxZ = 0.0;
  PixelIndex pixel = 0;
  ClassId label = 0;
  double estimate = 0.0;
  double reference = 0.0;
};
ZScoreReport maxZScore(const McEstimate& mc, const LabelField& p);

struct DenseSolution {
  PartitionField z;
  std::vector<PixelIndex> flagged;  // pixels left at zero (no absorbing pixel reachable)
};

/// Builds the full dense matrix and solves with Gaussian elimination and
/// partial pivoting.
DenseSolution denseSolvePartition(const GridLattice& lattice, const SparseLabels& labels,
                                  const BoundaryField& boundary);

inline constexpr std::size_t kDenseMaxPixels = 4096;

using BoundaryLoss = std::function<double(const BoundaryField&)>;

/// Central differences of loss(B) at every pixel, labelled ones included.
/// Where B(x) < step the stencil is one-sided:
/// (-3 L(B) + 4 L(B + h) - L(B + 2h)) / 2h, mirrored near kBoundaryMax.
std::vector<double> finiteDiffBoundaryGrad(const BoundaryLoss& loss, const GridLattice& lattice,
                                           const BoundaryField& boundary, double step);

struct Marginalization {
  double lhs = 0.0;  // expected dense cross-entropy over enumerated labellings
  double rhs = 0.0;  // sum_x H(P(x), Q(x))
};

inline constexpr std::size_t kMarginalizationMaxFree = 9;

Marginalization marginalizationCheck(const GridLattice& lattice, const SparseLabels& labels,
                                     const BoundaryField& boundary, const LabelField& q);

/// Random test instance: B ~ U[lo, hi), labelled pixels drawn without
/// replacement, the first min(K, count) labels covering every class.
struct Instance {
  GridLattice lattice;
  SparseLabels labels;
  BoundaryField boundary;
};

Instance randomInstance(std::size_t width, std::size_t height, std::size_t numClasses,
                        std::size_t labelCount, std::mt19937_64& rng, double lo = 0.0,
                        double hi = 2.0);

/// Random strictly positive simplex rows.
LabelField randomLabelField(std::size_t pixels, std::size_t numClasses, std::mt19937_64& rng);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double maxRelativeError(std::span<const double> a, std::span<const double> b, double floor);

/// Entries smaller than this fraction of the largest reference magnitude are
/// measured against that fraction instead of their own size; below it the
/// finite-difference noise (about eps * |L| / h) dominates.
inline constexpr double kGradientFloorFraction = 1e-3;

struct GradientComparison {
  double maxRelError = 0.0;
  PixelIndex worst = 0;
};

GradientComparison compareGradients(std::span<const double> analytic,
                                    std::span<const double> reference);

}  // namespace rwlp::oracle
