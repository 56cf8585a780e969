#include "rwlp/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rwlp/adjoint.hpp"
#include "rwlp/errors.hpp"
#include "rwlp/formats.hpp"
#include "rwlp/loss.hpp"
#include "rwlp/oracle.hpp"
#include "rwlp/outputs.hpp"
#include "rwlp/service.hpp"
#include "rwlp/trainer.hpp"
#include "rwlp/version.hpp"

namespace fs = std::filesystem;

namespace rwlp::cli {

namespace {

struct Size {
  std::size_t width = 0;
  std::size_t height = 0;
};

Size parseSize(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t a = 0;
    std::size_t b = 0;
    const auto w = std::stoul(text.substr(0, x), &a);
    const auto h = std::stoul(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1 || w == 0 || h == 0) {
      throw std::invalid_argument(text);
    }
    return {w, h};
  } catch (const std::exception&) {
    throw ValidationError("--size must look like WxH with positive integers, got '" + text + "'");
  }
}

SolverKind parseSolver(const std::string& name) {
  if (name == "auto") return SolverKind::automatic;
  if (name == "sor") return SolverKind::sor;
  if (name == "lu") return SolverKind::sparseLu;
  throw ValidationError("unknown solver '" + name + "'");
}

BoundaryField loadBoundary(const fs::path& path, const GridLattice& lattice, std::ostream& err) {
  const io::FieldFile f = io::readField(path);
  if (f.channels != 1) throw ValidationError(path.string() + ": boundary must have 1 channel");
  if (f.width != lattice.width() || f.height != lattice.height()) {
    throw ValidationError(path.string() + ": boundary is " + std::to_string(f.width) + "x" +
                          std::to_string(f.height) + ", labels are " +
                          std::to_string(lattice.width()) + "x" +
                          std::to_string(lattice.height()));
  }
  std::vector<double> values(f.data.begin(), f.data.end());
  BoundaryField b = [&] {
    try {
      return BoundaryField(lattice, std::move(values));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }();
  if (b.clampedCount() > 0) {
    err << "warning: " << b.clampedCount() << " boundary values above " << kBoundaryMax
        << " were clamped\n";
  }
  return b;
}

// ---------------------------------------------------------------- propagate

struct PropagateArgs {
  std::string labels;
  std::string boundary;
  std::string outP;
  std::string outMap;
  std::string outEntropy;
  std::string outWeights;
  double alpha = kDefaultAlpha;
  std::string solver = "auto";
};

int cmdPropagate(const PropagateArgs& a, std::ostream& out, std::ostream& err) {
  const io::LabelsDocument doc = io::readLabels(a.labels);
  const BoundaryField boundary = loadBoundary(a.boundary, doc.lattice, err);
  if (!(a.alpha >= 0.0)) throw ValidationError("--alpha must be nonnegative");
  SolverOptions options;
  options.kind = parseSolver(a.solver);

  const PropagationOutputs o = computeOutputs(doc.lattice, doc.labels, boundary, a.alpha, options);
  const std::size_t k = doc.labels.numClasses();
  if (!a.outP.empty()) {
    io::writeField(a.outP, io::toField(doc.lattice, k, o.propagation.p.field().values()));
  }
  if (!a.outMap.empty()) io::writePgm(a.outMap, io::mapImage(doc.lattice, o.map));
  if (!a.outEntropy.empty()) io::writeField(a.outEntropy, io::toField(doc.lattice, 1, o.entropy));
  if (!a.outWeights.empty()) io::writeField(a.outWeights, io::toField(doc.lattice, 1, o.weights));
  err << "unreached: " << o.propagation.unreached.size() << "\n";
  out << "propagated " << doc.lattice.width() << "x" << doc.lattice.height() << ", " << k
      << " classes, " << doc.labels.entries().size() << " labelled pixels\n";
  return kExitOk;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  std::string labels;
  std::string image;
  std::string scenario;
  std::string outDir;
  std::string link = "softplus";
  std::string solver = "auto";
  TrainConfig config;
};

nlohmann::json traceLine(const TraceRecord& r) {
  nlohmann::json j{{"step", r.step}, {"loss", r.loss}};
  if (std::isnan(r.mapAccuracy)) {
    j["mapAccuracy"] = nullptr;
  } else {
    j["mapAccuracy"] = r.mapAccuracy;
  }
  return j;
}

int cmdTrain(TrainArgs a, std::ostream& out, std::ostream& err) {
  if (a.link == "softplus") {
    a.config.link = LinkFunction::softplus;
  } else if (a.link == "exp") {
    a.config.link = LinkFunction::exp;
  } else {
    throw ValidationError("--link must be softplus or exp");
  }
  a.config.solver.kind = parseSolver(a.solver);
  validate(a.config);

  std::optional<SyntheticScenario> scenario;
  if (!a.scenario.empty()) {
    scenario = makeScenario(a.scenario);
  } else if (!a.labels.empty()) {
    io::LabelsDocument doc = io::readLabels(a.labels);
    scenario = SyntheticScenario{"labels", doc.lattice, std::move(doc.labels), {}, std::nullopt};
  } else {
    throw ValidationError("one of --labels or --scenario is required");
  }
  if (!a.image.empty()) {
    const io::GrayImage img = io::readPgm(a.image);
    if (img.width != scenario->lattice.width() || img.height != scenario->lattice.height()) {
      throw ValidationError(a.image + ": image size does not match the lattice");
    }
  }

  const TrainTrace trace = trainDemo(*scenario, a.config);

  const fs::path dir(a.outDir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + a.outDir + "'");

  std::string lines;
  for (const TraceRecord& r : trace.records) lines += traceLine(r).dump() + "\n";
  lines += traceLine({trace.records.size(), trace.finalLoss, trace.finalAccuracy}).dump() + "\n";
  io::writeFile(dir / "trace.jsonl", lines);

  const GridLattice& lattice = scenario->lattice;
  const std::size_t k = scenario->labels.numClasses();
  io::writeField(dir / "boundary.rwf", io::toField(lattice, 1, trace.finalBoundary.values()));
  io::writeField(dir / "p.rwf", io::toField(lattice, k, trace.finalP.field().values()));
  io::writeField(dir / "q.rwf", io::toField(lattice, k, trace.finalQ.field().values()));
  io::writePgm(dir / "map.pgm", io::mapImage(lattice, trace.finalMap));

  err << "unreached: " << trace.unreached.size() << "\n";
  out << "trained " << scenario->name << " for " << a.config.steps << " steps; final loss "
      << trace.finalLoss;
  if (!std::isnan(trace.finalAccuracy)) out << ", MAP accuracy " << trace.finalAccuracy;
  out << "\n";
  return kExitOk;
}

// ------------------------------------------------------- gradcheck, mccheck

struct CheckArgs {
  std::string size;
  std::size_t classes = 2;
  std::uint64_t seed = 1;
  std::size_t walks = 100000;
  std::size_t maxSteps = oracle::kDefaultMaxSteps;
  double fdStep = 1e-5;
  double alpha = kDefaultAlpha;
};

oracle::Instance checkInstance(const CheckArgs& a, std::mt19937_64& rng) {
  const Size s = parseSize(a.size);
  if (a.classes < 1 || a.classes > io::kMaxClasses) {
    throw ValidationError("--classes must be in [1, 255]");
  }
  const std::size_t extra = oracle::uniformBelow(rng, 3);
  return oracle::randomInstance(s.width, s.height, a.classes, a.classes + extra, rng);
}

std::string describePixel(const GridLattice& lattice, PixelIndex p) {
  const Point c = lattice.coords(p);
  std::ostringstream os;
  os << "pixel " << p << " (" << c.x << ", " << c.y << ")";
  return os.str();
}

int cmdGradcheck(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.fdStep > 0.0)) throw ValidationError("--fd-step must be positive");
  std::mt19937_64 rng(a.seed);
  const oracle::Instance inst = checkInstance(a, rng);
  const LabelField q = oracle::randomLabelField(inst.lattice.size(), a.classes, rng);

  auto lossAt = [&](const BoundaryField& b) {
    const Propagation pr = propagateLabels(inst.lattice, inst.labels, b);
    return weightedLoss(pr.p, q, a.alpha, true, pr.unreached).total;
  };
  const Propagation pr = propagateLabels(inst.lattice, inst.labels, inst.boundary);
  const LossReport rep = weightedLoss(pr.p, q, a.alpha, true, pr.unreached);
  const RwSystem sys = assembleSystem(inst.lattice, inst.labels, inst.boundary);
  const BoundaryGradient g =
      backpropBoundary(sys, pr.z, gradPfromLoss(pr, rep.dLdP), inst.boundary);
  const std::vector<double> fd =
      oracle::finiteDiffBoundaryGrad(lossAt, inst.lattice, inst.boundary, a.fdStep);

  bool labeledZero = true;
  for (const LabelEntry& e : inst.labels.entries()) {
    labeledZero = labeledZero && g.values[e.pixel] == 0.0;
  }
  const oracle::GradientComparison cmp = oracle::compareGradients(g.values, fd);
  const double worst = cmp.maxRelError;
  const PixelIndex worstPixel = cmp.worst;
  out << std::setprecision(6) << "max relative error: " << worst << "\n";
  const bool ok = worst < kGradcheckTolerance && labeledZero;
  if (!ok) {
    err << "gradient check failed at " << describePixel(inst.lattice, worstPixel)
        << ": adjoint " << std::setprecision(12) << g.values[worstPixel] << ", finite difference "
        << fd[worstPixel] << (labeledZero ? "" : "; nonzero gradient at a labelled pixel") << "\n";
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmdMccheck(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.walks < 1) throw ValidationError("--walks must be at least 1");
  std::mt19937_64 rng(a.seed);
  const oracle::Instance inst = checkInstance(a, rng);
  const Propagation pr = propagateLabels(inst.lattice, inst.labels, inst.boundary);
  const oracle::McEstimate mc = oracle::mcHittingProbabilities(
      inst.lattice, inst.labels, inst.boundary, a.walks, a.maxSteps, a.seed);
  const oracle::ZScoreReport z = oracle::maxZScore(mc, pr.p);
  out << std::setprecision(6) << "max z-score: " << z.maxZ << "\n";
  if (!(z.maxZ <= kMccheckMaxZ)) {
    err << "Monte Carlo check failed at " << describePixel(inst.lattice, z.pixel) << ", class "
        << z.label << ": estimate " << std::setprecision(12) << z.estimate << ", propagated "
        << z.reference << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random-walk label propagation with adjoint gradients", "rwlp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  PropagateArgs prop;
  auto* propagate = app.add_subcommand("propagate", "Propagate sparse labels over a boundary field");
  propagate->add_option("--labels", prop.labels, "Labels JSON file")->required();
  propagate->add_option("--boundary", prop.boundary, "Boundary RWF1 field (1 channel)")->required();
  propagate->add_option("--out-p", prop.outP, "Write P (K channels, RWF1)");
  propagate->add_option("--out-map", prop.outMap, "Write the MAP labelling (PGM)");
  propagate->add_option("--out-entropy", prop.outEntropy, "Write per-pixel entropy (RWF1)");
  propagate->add_option("--out-weights", prop.outWeights, "Write uncertainty weights (RWF1)");
  propagate->add_option("--alpha", prop.alpha, "Uncertainty weight exponent");
  propagate->add_option("--solver", prop.solver, "auto, sor or lu");

  TrainArgs train;
  auto* trainCmd = app.add_subcommand("train", "Jointly learn boundary and label fields");
  auto* labelsOpt = trainCmd->add_option("--labels", train.labels, "Labels JSON file");
  auto* scenarioOpt =
      trainCmd->add_option("--scenario", train.scenario, "twoRegions, threeRegionsDiagonal or ringRegion");
  labelsOpt->excludes(scenarioOpt);
  trainCmd->add_option("--image", train.image, "PGM image (display only, size checked)");
  trainCmd->add_option("--steps", train.config.steps, "Gradient steps");
  trainCmd->add_option("--lr-phi", train.config.learningRatePhi, "Boundary learning rate");
  trainCmd->add_option("--lr-theta", train.config.learningRateTheta, "Predictor learning rate");
  trainCmd->add_option("--alpha", train.config.alpha, "Uncertainty weight exponent");
  trainCmd->add_option("--seed", train.config.seed, "Seed for the initial jitter");
  trainCmd->add_option("--init-jitter", train.config.initJitter, "Uniform init noise amplitude");
  trainCmd->add_option("--link", train.link, "softplus or exp");
  trainCmd->add_option("--solver", train.solver, "auto, sor or lu");
  trainCmd->add_flag("--flow-through-weights", train.config.flowThroughWeights,
                     "Differentiate through the uncertainty weights");
  trainCmd->add_flag("--normalize", train.config.normalize, "Divide the loss by the pixel count");
  trainCmd->add_option("--out-dir", train.outDir, "Output directory")->required();

  CheckArgs grad;
  auto* gradcheck = app.add_subcommand("gradcheck", "Adjoint gradient vs finite differences");
  gradcheck->add_option("--size", grad.size, "Lattice size WxH")->required();
  gradcheck->add_option("--classes", grad.classes, "Number of classes")->required();
  gradcheck->add_option("--seed", grad.seed, "Instance seed");
  gradcheck->add_option("--fd-step", grad.fdStep, "Finite-difference step");
  gradcheck->add_option("--alpha", grad.alpha, "Uncertainty weight exponent");

  CheckArgs mc;
  auto* mccheck = app.add_subcommand("mccheck", "Propagation vs Monte Carlo random walks");
  mccheck->add_option("--size", mc.size, "Lattice size WxH")->required();
  mccheck->add_option("--classes", mc.classes, "Number of classes")->required();
  mccheck->add_option("--seed", mc.seed, "Instance and walk seed");
  mccheck->add_option("--walks", mc.walks, "Walks per pixel");
  mccheck->add_option("--max-steps", mc.maxSteps, "Step cap per walk");

  std::string host = service::kDefaultHost;
  int port = service::kDefaultPort;
  auto* serveCmd = app.add_subcommand("serve", "Run the HTTP propagation service");
  serveCmd->add_option("--host", host, "Bind address");
  serveCmd->add_option("--port", port, "Port");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*propagate) return cmdPropagate(prop, out, err);
    if (*trainCmd) return cmdTrain(train, out, err);
    if (*gradcheck) return cmdGradcheck(grad, out, err);
    if (*mccheck) return cmdMccheck(mc, out, err);
    if (*serveCmd) {
      if (!service::serve(host, port)) {
        err << "error: cannot listen on " << host << ":" << port << "\n";
        return kExitValidation;
      }
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolverError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace rwlp::cli
