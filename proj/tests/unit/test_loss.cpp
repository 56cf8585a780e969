#include <doctest.h>

#include <cmath>
#include <random>

#include "rwlp/errors.hpp"
#include "rwlp/loss.hpp"
#include "rwlp/oracle.hpp"
#include "test_util.hpp"

using namespace rwlp;

namespace {

LabelField row(std::vector<double> v) {
  const std::size_t k = v.size();
  return LabelField(ClassField(1, k, std::move(v)));
}

// Per-pixel weighted loss written out directly, valid off the simplex so it
// can be differenced coordinate by coordinate.
double referenceLoss(const std::vector<double>& p, const std::vector<double>& q, double alpha) {
  double h = 0.0, kl = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    h -= p[l] * std::log(p[l]);
    kl += p[l] * std::log(p[l] / q[l]);
  }
  return std::exp(-alpha * h) * kl + h;
}

}  // namespace

TEST_CASE("entropy closed forms") {
  CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(entropy(std::vector<double>{0.9, 0.1}) == doctest::Approx(0.325083).epsilon(1e-6));
  CHECK(entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  CHECK(entropy(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(entropy(std::vector<double>{0.5, 0.6}), ContractError);
}

TEST_CASE("cross-entropy closed forms") {
  const std::vector<double> onehot{1.0, 0.0};
  CHECK(crossEntropy(onehot, std::vector<double>{0.9, 0.1}) == doctest::Approx(0.105361).epsilon(1e-6));
  const std::vector<double> p{0.2, 0.3, 0.5};
  CHECK(crossEntropy(p, p) == doctest::Approx(entropy(p)).epsilon(1e-14));
  CHECK(klDivergence(p, p) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(crossEntropy(p, onehot), ContractError);
}

TEST_CASE("zero q is floored inside the logarithm") {
  const double h = crossEntropy(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0});
  CHECK(h == doctest::Approx(-std::log(kProbabilityFloor)).epsilon(1e-14));
}

TEST_CASE("uncertainty weights closed forms") {
  const auto w1 = uncertaintyWeights(row({0.5, 0.5}), 1.0);
  CHECK(w1[0] == doctest::Approx(0.5).epsilon(1e-15));
  const auto w2 = uncertaintyWeights(row({1.0 / 3, 1.0 / 3, 1.0 / 3}), 2.0);
  CHECK(w2[0] == doctest::Approx(1.0 / 9).epsilon(1e-14));
  CHECK(uncertaintyWeights(row({0.0, 1.0}), 3.0)[0] == 1.0);
  CHECK(uncertaintyWeights(row({0.3, 0.7}), 0.0)[0] == 1.0);
  CHECK_THROWS_AS(uncertaintyWeights(row({0.3, 0.7}), -1.0), ContractError);
}

TEST_CASE("weights decrease with entropy") {
  double previous = 2.0;
  for (double a = 0.0; a <= 0.5; a += 0.05) {
    const double w = uncertaintyWeights(row({a, 1.0 - a}), 1.5)[0];
    CHECK(w < previous);
    previous = w;
  }
}

TEST_CASE("zero alpha reduces the weighted loss to cross-entropy") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = testing::randomIn(rng, 1, 20);
    const std::size_t k = testing::randomIn(rng, 1, 4);
    const LabelField p = oracle::randomLabelField(n, k, rng);
    const LabelField q = oracle::randomLabelField(n, k, rng);
    const LossReport a = weightedLoss(p, q, 0.0, false);
    const LossReport b = crossEntropyLoss(p, q);
    CHECK(std::abs(a.total - b.total) <= 1e-12 * std::max(1.0, std::abs(b.total)));
  }
}

TEST_CASE("Gibbs inequality and nonnegative divergence") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = testing::randomIn(rng, 1, 5);
    const LabelField p = oracle::randomLabelField(1, k, rng);
    const LabelField q = oracle::randomLabelField(1, k, rng);
    CHECK(crossEntropy(p.row(0), q.row(0)) >= entropy(p.row(0)) - 1e-15);
    CHECK(klDivergence(p.row(0), q.row(0)) >= -1e-15);
  }
}

TEST_CASE("one-hot propagation turns the loss into dense cross-entropy") {
  std::mt19937_64 rng(23);
  const std::size_t n = 12, k = 3;
  std::vector<ClassId> truth(n);
  ClassField onehot(n, k);
  for (PixelIndex x = 0; x < n; ++x) {
    truth[x] = static_cast<ClassId>(oracle::uniformBelow(rng, k));
    onehot.at(x, truth[x]) = 1.0;
  }
  const LabelField q = oracle::randomLabelField(n, k, rng);
  CHECK(crossEntropyLoss(LabelField(onehot), q).total ==
        doctest::Approx(denseCrossEntropy(truth, q)).epsilon(1e-14));
}

TEST_CASE("weighted loss matches the direct formula") {
  std::mt19937_64 rng(24);
  const LabelField p = oracle::randomLabelField(10, 3, rng);
  const LabelField q = oracle::randomLabelField(10, 3, rng);
  const LossReport r = weightedLoss(p, q, 1.3, false);
  double total = 0.0;
  for (PixelIndex x = 0; x < 10; ++x) {
    const std::vector<double> px(p.row(x).begin(), p.row(x).end());
    const std::vector<double> qx(q.row(x).begin(), q.row(x).end());
    CHECK(r.perPixel[x] == doctest::Approx(referenceLoss(px, qx, 1.3)).epsilon(1e-13));
    total += r.perPixel[x];
  }
  CHECK(r.total == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(25);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = testing::randomIn(rng, 2, 4);
    const double alpha = 2.0 * oracle::uniform01(rng);
    const LabelField pf = oracle::randomLabelField(1, k, rng);
    const LabelField qf = oracle::randomLabelField(1, k, rng);
    const std::vector<double> p(pf.row(0).begin(), pf.row(0).end());
    const std::vector<double> q(qf.row(0).begin(), qf.row(0).end());
    const LossReport flow = weightedLoss(pf, qf, alpha, true);
    const LossReport detached = weightedLoss(pf, qf, alpha, false);
    const double w = flow.weights[0];
    for (ClassId l = 0; l < k; ++l) {
      auto up = p, down = p;
      up[l] += h;
      down[l] -= h;
      const double dp = (referenceLoss(up, q, alpha) - referenceLoss(down, q, alpha)) / (2 * h);
      CHECK(flow.dLdP.at(0, l) == doctest::Approx(dp).epsilon(1e-7));
      // Detached: the weight is held at its current value.
      const double lp = std::log(p[l]) + 1.0;
      CHECK(detached.dLdP.at(0, l) == doctest::Approx(w * (lp - std::log(q[l])) - lp).epsilon(1e-12));

      auto qu = q, qd = q;
      qu[l] += h;
      qd[l] -= h;
      const double dq = (referenceLoss(p, qu, alpha) - referenceLoss(p, qd, alpha)) / (2 * h);
      CHECK(flow.dLdQ.at(0, l) == doctest::Approx(dq).epsilon(1e-7));
      CHECK(detached.dLdQ.at(0, l) == flow.dLdQ.at(0, l));
    }
  }
}

TEST_CASE("unreached pixels keep only the entropy term") {
  const LabelField p = LabelField(ClassField(2, 2, {0.5, 0.5, 0.8, 0.2}));
  const LabelField q = LabelField(ClassField(2, 2, {0.9, 0.1, 0.3, 0.7}));
  const std::vector<PixelIndex> unreached{0};
  const LossReport r = weightedLoss(p, q, 1.0, true, unreached);
  CHECK(r.weights[0] == 0.0);
  CHECK(r.perPixel[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.dLdP.at(0, 0) == 0.0);
  CHECK(r.dLdQ.at(0, 1) == 0.0);
  CHECK(r.weights[1] > 0.0);
  CHECK(uncertaintyWeights(p, 1.0, unreached)[0] == 0.0);
  const std::vector<PixelIndex> bad{5};
  CHECK_THROWS_AS(weightedLoss(p, q, 1.0, true, bad), ContractError);
}

TEST_CASE("shape mismatches are contract errors") {
  const LabelField p(ClassField(2, 2, 0.5));
  const LabelField q(ClassField(2, 3, 1.0 / 3));
  CHECK_THROWS_AS(weightedLoss(p, q, 1.0, false), ContractError);
  CHECK_THROWS_AS(crossEntropyLoss(p, q), ContractError);
  CHECK_THROWS_AS(weightedLoss(p, p, -0.5, false), ContractError);
  const std::vector<ClassId> truth{0, 7};
  CHECK_THROWS_AS(denseCrossEntropy(truth, p), ContractError);
}
