#pragma once

#include <span>
#include <vector>

#include "rwlp/lattice.hpp"

namespace rwlp {

/// Q entries are floored here inside logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

inline constexpr double kDefaultAlpha = 1.0;

/// Shannon entropy in nats, 0 ln 0 := 0.
double entropy(std::span<const double> p);

/// H(p, q) = -sum p ln q.
double crossEntropy(std::span<const double> p, std::span<const double> q);

/// KL(p || q) = sum p ln(p / q).
double klDivergence(std::span<const double> p, std::span<const double> q);

struct LossReport {
  double total = 0.0;
  std::vector<double> perPixel;
  std::vector<double> weights;
  ClassField dLdP;
  ClassField dLdQ;
};

/// Sum over pixels of H(P(x), Q(x)).
LossReport crossEntropyLoss(const LabelField& p, const LabelField& q);

/// Dense cross-entropy against a hard labelling: sum_x -ln Q(x, y(x)).
double denseCrossEntropy(std::span<const ClassId> truth, const LabelField& q);

/// w(x) = exp(-alpha H(P(x))), zero at the listed unreached pixels.
std::vector<double> uncertaintyWeights(const LabelField& p, double alpha,
                                       std::span<const PixelIndex> unreached = {});

/// Sum over pixels of w(x) KL(P(x) || Q(x)) + H(P(x)).
///
/// With flowThroughWeights false the weight is a constant factor in dL/dP;
/// with it true the derivative of w through H(P) is included as well. The
/// entropy regulariser is differentiated in both modes. Unreached pixels have
/// zero weight and contribute nothing to either gradient.
LossReport weightedLoss(const LabelField& p, const LabelField& q, double alpha,
                        bool flowThroughWeights,
                        std::span<const PixelIndex> unreached = {});

}  // namespace rwlp
