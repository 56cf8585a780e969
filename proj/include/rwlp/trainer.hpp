#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rwlp/lattice.hpp"
#include "rwlp/loss.hpp"
#include "rwlp/propagate.hpp"

namespace rwlp {

enum class LinkFunction { softplus, exp };

struct TrainConfig {
  std::size_t steps = 500;
  double learningRatePhi = 0.5;
  double learningRateTheta = 0.5;
  double alpha = kDefaultAlpha;
  std::uint64_t seed = 7;
  LinkFunction link = LinkFunction::softplus;
  bool flowThroughWeights = false;
  bool normalize = false;   // divide loss and gradients by the pixel count
  double initJitter = 0.0;  // seeded uniform noise added to the initial fields
  SolverOptions solver{};
};

void validate(const TrainConfig& config);

/// Boundary field B = min(link(phi), kBoundaryMax) and its derivative.
double applyLink(LinkFunction link, double phi);
double linkDerivative(LinkFunction link, double phi);

/// Per-pixel stand-ins for the boundary and label predictors.
struct TrainState {
  std::vector<double> phi;  // boundary parameters, one per pixel
  ClassField theta;         // label logits; Q(x) = softmax(theta(x))
};

inline constexpr double kInitialPhi = -2.0;

TrainState initialState(const GridLattice& lattice, std::size_t numClasses,
                        const TrainConfig& config,
                        const std::optional<std::vector<double>>& initialPhi = std::nullopt);

LabelField softmax(const ClassField& logits);

struct ForwardResult {
  BoundaryField boundary;
  Propagation propagation;
  LabelField q;
  LossReport loss;
};

ForwardResult forward(const TrainState& state, const GridLattice& lattice,
                      const SparseLabels& labels, const TrainConfig& config);

struct Gradients {
  std::vector<double> phi;
  ClassField theta;
};

/// Loss and its gradients with respect to both parameter fields.
struct Evaluation {
  ForwardResult forward;
  Gradients gradients;
};

Evaluation evaluate(const TrainState& state, const GridLattice& lattice,
                    const SparseLabels& labels, const TrainConfig& config);

struct StepResult {
  TrainState next;
  ForwardResult before;
};

/// One full-batch gradient-descent update on both fields.
StepResult step(const TrainState& state, const GridLattice& lattice,
                const SparseLabels& labels, const TrainConfig& config);

struct SyntheticScenario {
  std::string name;
  GridLattice lattice;
  SparseLabels labels;
  std::vector<ClassId> groundTruth;  // empty when unknown
  std::optional<std::vector<double>> initialPhi;
};

/// Built-ins: twoRegions, threeRegionsDiagonal, ringRegion.
SyntheticScenario makeScenario(std::string_view name);
std::vector<std::string> scenarioNames();

/// Pixels that touch a 4-neighbour of a different ground-truth class.
std::vector<bool> borderMask(const GridLattice& lattice, std::span<const ClassId> truth);

/// Fraction of matching pixels; NaN when no ground truth is available.
double mapAccuracy(std::span<const ClassId> predicted, std::span<const ClassId> truth);

struct TraceRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double mapAccuracy = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  TrainState finalState;
  BoundaryField finalBoundary;
  LabelField finalP;
  LabelField finalQ;
  std::vector<ClassId> finalMap;
  double finalAccuracy = 0.0;
  double finalLoss = 0.0;
  std::vector<PixelIndex> unreached;
};

TrainTrace trainDemo(const SyntheticScenario& scenario, const TrainConfig& config);

}  // namespace rwlp
