#include "rwlp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rwlp/adjoint.hpp"
#include "rwlp/errors.hpp"
#include "rwlp/oracle.hpp"

namespace rwlp {

void validate(const TrainConfig& config) {
  if (config.steps < 1) throw ValidationError("steps must be at least 1");
  if (!(config.learningRatePhi > 0.0) || !(config.learningRateTheta > 0.0)) {
    throw ValidationError("learning rates must be positive");
  }
  if (!(config.alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
  if (!(config.initJitter >= 0.0)) throw ValidationError("initJitter must be nonnegative");
}

namespace {

double rawLink(LinkFunction link, double phi) {
  if (link == LinkFunction::exp) return std::exp(phi);
  return phi > 0.0 ? phi + std::log1p(std::exp(-phi)) : std::log1p(std::exp(phi));
}

struct Pass {
  RwSystem system;
  LinearSolver solver;
  ForwardResult result;
};

Pass runForward(const TrainState& state, const GridLattice& lattice,
                const SparseLabels& labels, const TrainConfig& config) {
  if (state.phi.size() != lattice.size() || state.theta.pixelCount() != lattice.size() ||
      state.theta.numClasses() != labels.numClasses()) {
    throw ContractError("training state does not match the lattice and labels");
  }
  std::vector<double> b(lattice.size());
  for (PixelIndex x = 0; x < b.size(); ++x) b[x] = applyLink(config.link, state.phi[x]);
  BoundaryField boundary(lattice, std::move(b));

  RwSystem system = assembleSystem(lattice, labels, boundary);
  LinearSolver solver(system, config.solver);
  Propagation prop = normalizePartition(solvePartition(system, labels, solver));
  LabelField q = softmax(state.theta);
  LossReport loss = weightedLoss(prop.p, q, config.alpha, config.flowThroughWeights,
                                 prop.unreached);
  if (config.normalize) {
    const double scale = 1.0 / static_cast<double>(lattice.size());
    loss.total *= scale;
    for (double& v : loss.perPixel) v *= scale;
    for (double& v : loss.dLdP.mutableValues()) v *= scale;
    for (double& v : loss.dLdQ.mutableValues()) v *= scale;
  }
  return {std::move(system), std::move(solver),
          ForwardResult{std::move(boundary), std::move(prop), std::move(q), std::move(loss)}};
}

}  // namespace

double applyLink(LinkFunction link, double phi) {
  return std::min(rawLink(link, phi), kBoundaryMax);
}

double linkDerivative(LinkFunction link, double phi) {
  if (rawLink(link, phi) > kBoundaryMax) return 0.0;
  if (link == LinkFunction::exp) return std::exp(phi);
  return 1.0 / (1.0 + std::exp(-phi));
}

TrainState initialState(const GridLattice& lattice, std::size_t numClasses,
                        const TrainConfig& config,
                        const std::optional<std::vector<double>>& initialPhi) {
  TrainState s{std::vector<double>(lattice.size(), kInitialPhi),
               ClassField(lattice.size(), numClasses, 0.0)};
  if (initialPhi) {
    if (initialPhi->size() != lattice.size()) {
      throw ContractError("initial boundary parameters do not match the lattice");
    }
    s.phi = *initialPhi;
  }
  if (config.initJitter > 0.0) {
    std::mt19937_64 rng(config.seed);
    auto noise = [&] { return config.initJitter * (2.0 * oracle::uniform01(rng) - 1.0); };
    for (double& v : s.phi) v += noise();
    for (double& v : s.theta.mutableValues()) v += noise();
  }
  return s;
}

LabelField softmax(const ClassField& logits) {
  ClassField q(logits.pixelCount(), logits.numClasses());
  for (PixelIndex x = 0; x < logits.pixelCount(); ++x) {
    const auto row = logits.row(x);
    const double top = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (ClassId l = 0; l < row.size(); ++l) s += q.at(x, l) = std::exp(row[l] - top);
    for (ClassId l = 0; l < row.size(); ++l) q.at(x, l) /= s;
  }
  return LabelField(std::move(q));
}

ForwardResult forward(const TrainState& state, const GridLattice& lattice,
                      const SparseLabels& labels, const TrainConfig& config) {
  return runForward(state, lattice, labels, config).result;
}

Evaluation evaluate(const TrainState& state, const GridLattice& lattice,
                    const SparseLabels& labels, const TrainConfig& config) {
  Pass pass = runForward(state, lattice, labels, config);
  const ForwardResult& f = pass.result;
  const std::size_t n = lattice.size();
  const std::size_t k = labels.numClasses();

  const ClassField dLdZ = gradPfromLoss(f.propagation, f.loss.dLdP);
  const BoundaryGradient dLdB =
      backpropBoundary(pass.system, pass.solver, f.propagation.z, dLdZ);

  Gradients g{std::vector<double>(n, 0.0), ClassField(n, k)};
  for (PixelIndex x = 0; x < n; ++x) {
    g.phi[x] = dLdB.values[x] * linkDerivative(config.link, state.phi[x]);
    double mean = 0.0;
    for (ClassId m = 0; m < k; ++m) mean += f.loss.dLdQ.at(x, m) * f.q.at(x, m);
    for (ClassId l = 0; l < k; ++l) {
      g.theta.at(x, l) = f.q.at(x, l) * (f.loss.dLdQ.at(x, l) - mean);
    }
  }
  return {std::move(pass.result), std::move(g)};
}

StepResult step(const TrainState& state, const GridLattice& lattice, const SparseLabels& labels,
                const TrainConfig& config) {
  Evaluation e = evaluate(state, lattice, labels, config);
  const std::size_t k = labels.numClasses();
  for (PixelIndex x = 0; x < lattice.size(); ++x) {
    bool finite = std::isfinite(e.gradients.phi[x]);
    for (ClassId l = 0; l < k; ++l) finite = finite && std::isfinite(e.gradients.theta.at(x, l));
    if (!finite) {
      std::ostringstream os;
      const Point c = lattice.coords(x);
      os << "non-finite gradient at pixel " << x << " (" << c.x << ", " << c.y << ")";
      throw SolverError(os.str(), std::nan(""));
    }
  }

  TrainState next = state;
  for (PixelIndex x = 0; x < lattice.size(); ++x) {
    next.phi[x] -= config.learningRatePhi * e.gradients.phi[x];
    for (ClassId l = 0; l < k; ++l) {
      next.theta.at(x, l) -= config.learningRateTheta * e.gradients.theta.at(x, l);
    }
  }
  return {std::move(next), std::move(e.forward)};
}

namespace {

struct ScenarioBuilder {
  GridLattice lattice;
  std::vector<ClassId> truth;
  std::vector<LabelEntry> scribbles;

  void scribble(std::size_t x, std::size_t y, ClassId label) {
    const PixelIndex p = lattice.index(x, y);
    for (const LabelEntry& e : scribbles) {
      if (e.pixel == p) return;
    }
    scribbles.push_back({p, label});
  }

  SyntheticScenario build(std::string name, std::size_t numClasses) {
    SparseLabels labels(lattice, numClasses, scribbles);
    return {std::move(name), lattice, std::move(labels), std::move(truth), std::nullopt};
  }
};

constexpr std::size_t kDemoSize = 16;

SyntheticScenario twoRegions() {
  ScenarioBuilder b{GridLattice(kDemoSize, kDemoSize), {}, {}};
  b.truth.resize(b.lattice.size());
  for (PixelIndex p = 0; p < b.lattice.size(); ++p) {
    b.truth[p] = b.lattice.coords(p).x < kDemoSize / 2 ? 0 : 1;
  }
  // One vertical stroke per region, mirror images about the border.
  for (std::size_t y = 3; y <= 12; ++y) {
    b.scribble(3, y, 0);
    b.scribble(12, y, 1);
  }
  return b.build("twoRegions", 2);
}

SyntheticScenario threeRegionsDiagonal() {
  ScenarioBuilder b{GridLattice(kDemoSize, kDemoSize), {}, {}};
  b.truth.resize(b.lattice.size());
  auto band = [](std::size_t s) -> ClassId { return s < 10 ? 0 : (s < 21 ? 1 : 2); };
  for (PixelIndex p = 0; p < b.lattice.size(); ++p) {
    const Point c = b.lattice.coords(p);
    b.truth[p] = band(c.x + c.y);
  }
  // Anti-diagonal strokes centred between the band borders at 9.5 and 20.5.
  const std::pair<std::size_t, ClassId> strokes[] = {{4, 0}, {15, 1}, {26, 2}};
  for (const auto& [sum, label] : strokes) {
    for (std::size_t x = 0; x < kDemoSize; ++x) {
      if (sum < x || sum - x >= kDemoSize) continue;
      const std::size_t y = sum - x;
      if (x >= 1 && y >= 1 && x + 1 < kDemoSize && y + 1 < kDemoSize) b.scribble(x, y, label);
    }
  }
  return b.build("threeRegionsDiagonal", 3);
}

SyntheticScenario ringRegion() {
  ScenarioBuilder b{GridLattice(kDemoSize, kDemoSize), {}, {}};
  b.truth.resize(b.lattice.size());
  const double centre = 0.5 * static_cast<double>(kDemoSize - 1);
  auto radius = [&](const Point& c) {
    return std::hypot(static_cast<double>(c.x) - centre, static_cast<double>(c.y) - centre);
  };
  for (PixelIndex p = 0; p < b.lattice.size(); ++p) {
    const double r = radius(b.lattice.coords(p));
    b.truth[p] = (r >= 3.5 && r < 6.0) ? 1 : 0;
  }
  // Core, ring and exterior each get a circular stroke.
  for (PixelIndex p = 0; p < b.lattice.size(); ++p) {
    const Point c = b.lattice.coords(p);
    const double r = radius(c);
    if (r < 1.0) b.scribble(c.x, c.y, 0);
    if (std::abs(r - 4.75) < 0.4) b.scribble(c.x, c.y, 1);
    if (r >= 7.3 && r < 7.9) b.scribble(c.x, c.y, 0);
  }
  return b.build("ringRegion", 2);
}

}  // namespace

std::vector<std::string> scenarioNames() {
  return {"twoRegions", "threeRegionsDiagonal", "ringRegion"};
}

SyntheticScenario makeScenario(std::string_view name) {
  if (name == "twoRegions") return twoRegions();
  if (name == "threeRegionsDiagonal") return threeRegionsDiagonal();
  if (name == "ringRegion") return ringRegion();
  throw ValidationError("unknown scenario '" + std::string(name) + "'");
}

std::vector<bool> borderMask(const GridLattice& lattice, std::span<const ClassId> truth) {
  if (truth.size() != lattice.size()) throw ContractError("borderMask: shape mismatch");
  std::vector<bool> mask(lattice.size(), false);
  for (PixelIndex p = 0; p < lattice.size(); ++p) {
    for (PixelIndex q : lattice.neighbors(p)) {
      if (truth[q] != truth[p]) mask[p] = true;
    }
  }
  return mask;
}

double mapAccuracy(std::span<const ClassId> predicted, std::span<const ClassId> truth) {
  if (truth.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (predicted.size() != truth.size()) {
    throw ContractError("mapAccuracy: shape mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

TrainTrace trainDemo(const SyntheticScenario& scenario, const TrainConfig& config) {
  validate(config);
  const GridLattice& lattice = scenario.lattice;
  if (!scenario.groundTruth.empty() && scenario.groundTruth.size() != lattice.size()) {
    throw ContractError("scenario ground truth does not match the lattice");
  }
  TrainState state =
      initialState(lattice, scenario.labels.numClasses(), config, scenario.initialPhi);

  std::vector<TraceRecord> records;
  records.reserve(config.steps);
  for (std::size_t s = 0; s < config.steps; ++s) {
    StepResult r = step(state, lattice, scenario.labels, config);
    records.push_back({s, r.before.loss.total,
                       mapAccuracy(mapLabels(r.before.q), scenario.groundTruth)});
    state = std::move(r.next);
  }

  ForwardResult f = forward(state, lattice, scenario.labels, config);
  auto map = mapLabels(f.q);
  const double accuracy = mapAccuracy(map, scenario.groundTruth);
  return {std::move(records),
          std::move(state),
          std::move(f.boundary),
          std::move(f.propagation.p),
          std::move(f.q),
          std::move(map),
          accuracy,
          f.loss.total,
          std::move(f.propagation.unreached)};
}

}  // namespace rwlp
