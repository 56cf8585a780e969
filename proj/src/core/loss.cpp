#include "rwlp/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rwlp/errors.hpp"

namespace rwlp {

namespace {

// Stand-in for ln 0 in derivatives of p ln p. Only reached for classes whose
// probability is identically zero, where the value is multiplied by zero
// further down the chain.
constexpr double kLogFloor = 1e-300;

double logQ(double q) { return std::log(std::max(q, kProbabilityFloor)); }

void requireSimplex(std::span<const double> p, const char* what) {
  if (!inSimplex(p)) throw ContractError(std::string(what) + ": input is not in the simplex");
}

void requireSameShape(const LabelField& p, const LabelField& q) {
  if (p.pixelCount() != q.pixelCount() || p.numClasses() != q.numClasses()) {
    throw ContractError("P and Q have different shapes");
  }
}

std::vector<bool> unreachedMask(std::size_t n, std::span<const PixelIndex> unreached) {
  std::vector<bool> mask(n, false);
  for (PixelIndex x : unreached) {
    if (x >= n) throw ContractError("unreached pixel index out of range");
    mask[x] = true;
  }
  return mask;
}

double entropyUnchecked(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double klUnchecked(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    if (p[l] > 0.0) d += p[l] * (std::log(p[l]) - logQ(q[l]));
  }
  return d;
}

}  // namespace

double entropy(std::span<const double> p) {
  requireSimplex(p, "entropy");
  return entropyUnchecked(p);
}

double crossEntropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractError("crossEntropy: length mismatch");
  double h = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    if (p[l] > 0.0) h -= p[l] * logQ(q[l]);
  }
  return h;
}

double klDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractError("klDivergence: length mismatch");
  return klUnchecked(p, q);
}

LossReport crossEntropyLoss(const LabelField& p, const LabelField& q) {
  requireSameShape(p, q);
  const std::size_t n = p.pixelCount();
  const std::size_t k = p.numClasses();
  LossReport r;
  r.perPixel.assign(n, 0.0);
  r.weights.assign(n, 1.0);
  r.dLdP = ClassField(n, k);
  r.dLdQ = ClassField(n, k);
  for (PixelIndex x = 0; x < n; ++x) {
    r.perPixel[x] = crossEntropy(p.row(x), q.row(x));
    r.total += r.perPixel[x];
    for (ClassId l = 0; l < k; ++l) {
      const double qv = std::max(q.at(x, l), kProbabilityFloor);
      r.dLdP.at(x, l) = -std::log(qv);
      r.dLdQ.at(x, l) = -p.at(x, l) / qv;
    }
  }
  return r;
}

double denseCrossEntropy(std::span<const ClassId> truth, const LabelField& q) {
  if (truth.size() != q.pixelCount()) throw ContractError("denseCrossEntropy: shape mismatch");
  double total = 0.0;
  for (PixelIndex x = 0; x < truth.size(); ++x) {
    if (truth[x] >= q.numClasses()) throw ContractError("denseCrossEntropy: class out of range");
    total -= logQ(q.at(x, truth[x]));
  }
  return total;
}

std::vector<double> uncertaintyWeights(const LabelField& p, double alpha,
                                       std::span<const PixelIndex> unreached) {
  if (!(alpha >= 0.0)) throw ContractError("alpha must be nonnegative");
  const auto skip = unreachedMask(p.pixelCount(), unreached);
  std::vector<double> w(p.pixelCount(), 0.0);
  for (PixelIndex x = 0; x < w.size(); ++x) {
    if (!skip[x]) w[x] = std::exp(-alpha * entropyUnchecked(p.row(x)));
  }
  return w;
}

LossReport weightedLoss(const LabelField& p, const LabelField& q, double alpha,
                        bool flowThroughWeights, std::span<const PixelIndex> unreached) {
  if (!(alpha >= 0.0)) throw ContractError("alpha must be nonnegative");
  requireSameShape(p, q);
  const std::size_t n = p.pixelCount();
  const std::size_t k = p.numClasses();
  const auto skip = unreachedMask(n, unreached);

  LossReport r;
  r.perPixel.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  r.dLdP = ClassField(n, k);
  r.dLdQ = ClassField(n, k);
  for (PixelIndex x = 0; x < n; ++x) {
    const auto px = p.row(x);
    const auto qx = q.row(x);
    const double h = entropyUnchecked(px);
    if (skip[x]) {
      r.perPixel[x] = h;
      r.total += h;
      continue;
    }
    const double kl = klUnchecked(px, qx);
    const double w = std::exp(-alpha * h);
    r.weights[x] = w;
    r.perPixel[x] = w * kl + h;
    r.total += r.perPixel[x];

    // d/dp of: w * (sum p ln p - sum p ln q) + (-sum p ln p), w = exp(-alpha H).
    const double flow = flowThroughWeights ? 1.0 - alpha * w * kl : 1.0;
    for (ClassId l = 0; l < k; ++l) {
      const double lp = std::log(std::max(px[l], kLogFloor)) + 1.0;
      const double lq = logQ(qx[l]);
      r.dLdP.at(x, l) = w * (lp - lq) - flow * lp;
      r.dLdQ.at(x, l) = -w * px[l] / std::max(qx[l], kProbabilityFloor);
    }
  }
  return r;
}

}  // namespace rwlp
