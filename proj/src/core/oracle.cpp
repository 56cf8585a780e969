#include "rwlp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rwlp/errors.hpp"

namespace rwlp::oracle {

std::uint64_t uniformBelow(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("uniformBelow: empty range");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % n + 1) % n;
  std::uint64_t v = 0;
  do {
    v = rng();
  } while (v > limit);
  return v % n;
}

McEstimate mcHittingProbabilities(const GridLattice& lattice, const SparseLabels& labels,
                                  const BoundaryField& boundary, std::size_t walksPerPixel,
                                  std::size_t maxSteps, std::uint64_t seed) {
  if (walksPerPixel == 0) throw ContractError("walksPerPixel must be at least 1");
  const std::size_t n = lattice.size();
  const std::size_t k = labels.numClasses();
  const auto w = static_cast<std::int64_t>(lattice.width());
  const auto h = static_cast<std::int64_t>(lattice.height());

  std::vector<double> survive(n);
  for (PixelIndex x = 0; x < n; ++x) survive[x] = std::exp(-boundary[x]);

  constexpr std::int64_t dx[4] = {0, 0, -1, 1};
  constexpr std::int64_t dy[4] = {-1, 1, 0, 0};

  McEstimate est{ClassField(n, k), ClassField(n, k), std::vector<double>(n, 0.0),
                 std::vector<std::uint64_t>(n, 0)};
  std::vector<std::uint64_t> counts(k);
  for (PixelIndex start = 0; start < n; ++start) {
    std::mt19937_64 rng(seed + start);
    std::fill(counts.begin(), counts.end(), 0);
    std::uint64_t hits = 0;
    for (std::size_t walk = 0; walk < walksPerPixel; ++walk) {
      std::int64_t cx = static_cast<std::int64_t>(start) % w;
      std::int64_t cy = static_cast<std::int64_t>(start) / w;
      for (std::size_t t = 0;; ++t) {
        const auto here = static_cast<PixelIndex>(cy * w + cx);
        if (const auto label = labels.labelAt(here)) {
          ++counts[*label];
          ++hits;
          break;
        }
        if (t >= maxSteps) break;
        if (uniform01(rng) >= survive[here]) break;
        const auto dir = uniformBelow(rng, 4);
        cx += dx[dir];
        cy += dy[dir];
        if (cx < 0 || cy < 0 || cx >= w || cy >= h) break;
      }
    }
    est.hits[start] = hits;
    est.deaths[start] = static_cast<double>(walksPerPixel - hits) /
                        static_cast<double>(walksPerPixel);
    for (ClassId l = 0; l < k; ++l) {
      if (hits == 0) {
        est.probs.at(start, l) = 1.0 / static_cast<double>(k);
        est.stderrs.at(start, l) = std::numeric_limits<double>::infinity();
        continue;
      }
      const double p = static_cast<double>(counts[l]) / static_cast<double>(hits);
      est.probs.at(start, l) = p;
      est.stderrs.at(start, l) = std::sqrt(p * (1.0 - p) / static_cast<double>(hits));
    }
  }
  return est;
}

ZScoreReport maxZScore(const McEstimate& mc, const LabelField& p) {
  if (mc.probs.pixelCount() != p.pixelCount() || mc.probs.numClasses() != p.numClasses()) {
    throw ContractError("maxZScore: shape mismatch");
  }
  ZScoreReport worst;
  for (PixelIndex x = 0; x < p.pixelCount(); ++x) {
    for (ClassId l = 0; l < p.numClasses(); ++l) {
      const double est = mc.probs.at(x, l);
      const double ref = p.at(x, l);
      const double diff = std::abs(est - ref);
      double se = mc.stderrs.at(x, l);
      if (se == 0.0 && mc.hits[x] > 0) {
        se = std::sqrt(ref * (1.0 - ref) / static_cast<double>(mc.hits[x]));
      }
      double z = 0.0;
      if (se > 0.0) {
        z = diff / se;
      } else if (diff > 0.0) {
        z = std::numeric_limits<double>::infinity();
      }
      if (z > worst.maxZ || (x == 0 && l == 0)) worst = {z, x, l, est, ref};
    }
  }
  return worst;
}

DenseSolution denseSolvePartition(const GridLattice& lattice, const SparseLabels& labels,
                                  const BoundaryField& boundary) {
  const std::size_t n = lattice.size();
  const std::size_t k = labels.numClasses();
  if (n > kDenseMaxPixels) throw ContractError("dense oracle limited to 4096 pixels");
  const std::size_t w = lattice.width();
  const std::size_t h = lattice.height();
  const std::size_t cols = n + k;

  // Augmented matrix [A | b_0 ... b_{K-1}], row-major.
  std::vector<double> m(n * cols, 0.0);
  auto a = [&](std::size_t r, std::size_t c) -> double& { return m[r * cols + c]; };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t r = y * w + x;
      if (const auto label = labels.labelAt(r)) {
        a(r, r) = 1.0;
        a(r, n + *label) = 1.0;
        continue;
      }
      a(r, r) = 4.0 * std::exp(boundary[r]);
      if (y > 0) a(r, r - w) = -1.0;
      if (y + 1 < h) a(r, r + w) = -1.0;
      if (x > 0) a(r, r - 1) = -1.0;
      if (x + 1 < w) a(r, r + 1) = -1.0;
    }
  }

  std::vector<bool> singular(n, false);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
    }
    if (std::abs(a(pivot, c)) < 1e-300) {
      singular[c] = true;
      continue;
    }
    if (pivot != c) {
      for (std::size_t j = 0; j < cols; ++j) std::swap(a(c, j), a(pivot, j));
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      if (f == 0.0) continue;
      for (std::size_t j = c; j < cols; ++j) a(r, j) -= f * a(c, j);
    }
  }

  ClassField z(n, k);
  for (ClassId l = 0; l < k; ++l) {
    for (std::size_t i = n; i-- > 0;) {
      if (singular[i]) continue;
      double s = a(i, n + l);
      for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * z.at(j, l);
      z.at(i, l) = s / a(i, i);
    }
  }

  DenseSolution out{PartitionField(ClassField(n, k)), {}};
  for (std::size_t i = 0; i < n; ++i) {
    double mass = 0.0;
    for (ClassId l = 0; l < k; ++l) {
      double& v = z.at(i, l);
      if (v < 0.0) {
        if (v < -1e-12) throw SolverError("dense oracle produced a negative value", -v);
        v = 0.0;
      }
      mass += v;
    }
    if (singular[i] || mass <= kReachEpsilon) {
      for (ClassId l = 0; l < k; ++l) z.at(i, l) = 0.0;
      out.flagged.push_back(i);
    }
  }
  out.z = PartitionField(std::move(z));
  return out;
}

std::vector<double> finiteDiffBoundaryGrad(const BoundaryLoss& loss, const GridLattice& lattice,
                                           const BoundaryField& boundary, double step) {
  if (!(step > 0.0)) throw ContractError("finite-difference step must be positive");
  const std::size_t n = lattice.size();
  std::vector<double> base(boundary.values().begin(), boundary.values().end());
  auto at = [&](PixelIndex x, double b) {
    std::vector<double> v = base;
    v[x] = b;
    return loss(BoundaryField(lattice, std::move(v)));
  };

  std::vector<double> grad(n, 0.0);
  for (PixelIndex x = 0; x < n; ++x) {
    const double b = base[x];
    if (b - step >= 0.0 && b + step <= kBoundaryMax) {
      grad[x] = (at(x, b + step) - at(x, b - step)) / (2.0 * step);
    } else if (b - step < 0.0 && b + 2.0 * step <= kBoundaryMax) {
      grad[x] = (-3.0 * loss(boundary) + 4.0 * at(x, b + step) - at(x, b + 2.0 * step)) /
                (2.0 * step);
    } else {
      grad[x] = (3.0 * loss(boundary) - 4.0 * at(x, b - step) + at(x, b - 2.0 * step)) /
                (2.0 * step);
    }
  }
  return grad;
}

Marginalization marginalizationCheck(const GridLattice& lattice, const SparseLabels& labels,
                                     const BoundaryField& boundary, const LabelField& q) {
  const std::size_t n = lattice.size();
  const std::size_t k = labels.numClasses();
  if (k > 2) throw ContractError("marginalization check supports at most 2 classes");
  if (q.pixelCount() != n || q.numClasses() != k) {
    throw ContractError("marginalization check: Q shape mismatch");
  }
  std::vector<PixelIndex> free;
  for (PixelIndex x = 0; x < n; ++x) {
    if (!labels.isLabeled(x)) free.push_back(x);
  }
  if (free.size() > kMarginalizationMaxFree) {
    throw ContractError("marginalization check limited to 9 unlabelled pixels");
  }

  const DenseSolution dense = denseSolvePartition(lattice, labels, boundary);
  std::vector<double> p(n * k);
  for (PixelIndex x = 0; x < n; ++x) {
    const double s = dense.z.mass(x);
    for (ClassId l = 0; l < k; ++l) {
      p[x * k + l] = s > 0.0 ? dense.z.at(x, l) / s : 1.0 / static_cast<double>(k);
    }
  }
  auto negLogQ = [&](PixelIndex x, ClassId l) {
    return -std::log(std::max(q.at(x, l), 1e-12));
  };

  double labeledLoss = 0.0;
  for (const LabelEntry& e : labels.entries()) labeledLoss += negLogQ(e.pixel, e.label);

  Marginalization out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < free.size(); ++i) total *= k;
  std::vector<ClassId> assign(free.size(), 0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double prob = 1.0;
    double dense_loss = labeledLoss;
    for (std::size_t i = 0; i < free.size(); ++i) {
      assign[i] = c % k;
      c /= k;
      prob *= p[free[i] * k + assign[i]];
      dense_loss += negLogQ(free[i], assign[i]);
    }
    out.lhs += prob * dense_loss;
  }

  for (PixelIndex x = 0; x < n; ++x) {
    for (ClassId l = 0; l < k; ++l) {
      const double px = labels.isLabeled(x) ? (labels.labelAt(x) == l ? 1.0 : 0.0) : p[x * k + l];
      if (px > 0.0) out.rhs += px * negLogQ(x, l);
    }
  }
  return out;
}

Instance randomInstance(std::size_t width, std::size_t height, std::size_t numClasses,
                        std::size_t labelCount, std::mt19937_64& rng, double lo, double hi) {
  GridLattice lattice(width, height);
  const std::size_t n = lattice.size();
  std::vector<double> b(n);
  for (double& v : b) v = lo + (hi - lo) * uniform01(rng);

  std::vector<PixelIndex> order(n);
  std::iota(order.begin(), order.end(), PixelIndex{0});
  labelCount = std::min(labelCount, n);
  std::vector<LabelEntry> entries;
  for (std::size_t i = 0; i < labelCount; ++i) {
    const auto j = i + static_cast<std::size_t>(uniformBelow(rng, n - i));
    std::swap(order[i], order[j]);
    const ClassId label = i < numClasses ? i : static_cast<ClassId>(uniformBelow(rng, numClasses));
    entries.push_back({order[i], label});
  }
  SparseLabels labels(lattice, numClasses, std::move(entries));
  BoundaryField boundary(lattice, std::move(b));
  return {lattice, std::move(labels), std::move(boundary)};
}

LabelField randomLabelField(std::size_t pixels, std::size_t numClasses, std::mt19937_64& rng) {
  ClassField f(pixels, numClasses);
  for (PixelIndex x = 0; x < pixels; ++x) {
    double s = 0.0;
    for (ClassId l = 0; l < numClasses; ++l) s += f.at(x, l) = 0.05 + uniform01(rng);
    for (ClassId l = 0; l < numClasses; ++l) f.at(x, l) /= s;
  }
  return LabelField(std::move(f));
}

double maxRelativeError(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ContractError("maxRelativeError: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

GradientComparison compareGradients(std::span<const double> analytic,
                                    std::span<const double> reference) {
  if (analytic.size() != reference.size()) throw ContractError("compareGradients: length mismatch");
  double peak = 0.0;
  for (double v : reference) peak = std::max(peak, std::abs(v));
  const double floor = kGradientFloorFraction * peak;
  GradientComparison out;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double e = maxRelativeError(analytic.subspan(i, 1), reference.subspan(i, 1), floor);
    if (e > out.maxRelError) out = {e, i};
  }
  return out;
}

}  // namespace rwlp::oracle
