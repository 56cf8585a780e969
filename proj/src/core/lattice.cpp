#include "rwlp/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "rwlp/errors.hpp"

namespace rwlp {

GridLattice::GridLattice(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  if (width == 0 || height == 0) {
    throw ContractError("lattice dimensions must be positive");
  }
}

PixelIndex GridLattice::index(std::size_t x, std::size_t y) const {
  if (x >= width_ || y >= height_) {
    throw ContractError("pixel coordinate out of range");
  }
  return y * width_ + x;
}

Point GridLattice::coords(PixelIndex p) const {
  if (!contains(p)) {
    throw ContractError("pixel index " + std::to_string(p) + " out of range");
  }
  return {p % width_, p / width_};
}

NeighborList GridLattice::neighbors(PixelIndex p) const {
  const Point c = coords(p);
  NeighborList out;
  if (c.y > 0) out.push(p - width_);
  if (c.y + 1 < height_) out.push(p + width_);
  if (c.x > 0) out.push(p - 1);
  if (c.x + 1 < width_) out.push(p + 1);
  return out;
}

namespace {

std::string describe(const LabelEntry& e, std::size_t index) {
  std::ostringstream os;
  os << "entries[" << index << "] (pixel " << e.pixel << ", class " << e.label << ")";
  return os.str();
}

}  // namespace

SparseLabels::SparseLabels(const GridLattice& lattice, std::size_t numClasses,
                           std::vector<LabelEntry> entries)
    : numClasses_(numClasses), entries_(std::move(entries)), classOf_(lattice.size(), -1) {
  if (numClasses_ == 0) {
    throw ValidationError("numClasses must be positive");
  }
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const LabelEntry& e = entries_[k];
    if (!lattice.contains(e.pixel)) {
      throw ValidationError(describe(e, k) + ": pixel outside the " +
                            std::to_string(lattice.width()) + "x" +
                            std::to_string(lattice.height()) + " lattice");
    }
    if (e.label >= numClasses_) {
      throw ValidationError(describe(e, k) + ": class id not below numClasses " +
                            std::to_string(numClasses_));
    }
    if (classOf_[e.pixel] >= 0) {
      throw ValidationError(describe(e, k) + ": pixel labelled more than once");
    }
    classOf_[e.pixel] = static_cast<std::int32_t>(e.label);
  }
}

std::pair<SparseLabels, std::vector<std::int64_t>> SparseLabels::fromExternalIds(
    const GridLattice& lattice, std::span<const std::pair<PixelIndex, std::int64_t>> entries) {
  std::vector<std::int64_t> ids;
  ids.reserve(entries.size());
  for (const auto& [pixel, id] : entries) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<LabelEntry> dense;
  dense.reserve(entries.size());
  for (const auto& [pixel, id] : entries) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    dense.push_back({pixel, static_cast<ClassId>(it - ids.begin())});
  }
  const std::size_t k = std::max<std::size_t>(ids.size(), 1);
  return {SparseLabels(lattice, k, std::move(dense)), std::move(ids)};
}

std::optional<ClassId> SparseLabels::labelAt(PixelIndex p) const {
  if (!isLabeled(p)) return std::nullopt;
  return static_cast<ClassId>(classOf_[p]);
}

PixelPartition partition(const GridLattice& lattice, const SparseLabels& labels) {
  std::vector<bool> labeled(lattice.size(), false);
  for (std::size_t k = 0; k < labels.entries().size(); ++k) {
    const LabelEntry& e = labels.entries()[k];
    if (!lattice.contains(e.pixel)) {
      throw ValidationError(describe(e, k) + ": pixel outside the lattice");
    }
    labeled[e.pixel] = true;
  }
  PixelPartition out;
  for (PixelIndex p = 0; p < lattice.size(); ++p) {
    (labeled[p] ? out.labeled : out.unlabeled).push_back(p);
  }
  return out;
}

BoundaryField::BoundaryField(const GridLattice& lattice, std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() != lattice.size()) {
    throw ValidationError("boundary field has " + std::to_string(values_.size()) +
                          " values, lattice has " + std::to_string(lattice.size()) +
                          " pixels");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double& v = values_[i];
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("boundary value at pixel " + std::to_string(i) +
                            " is negative or not finite");
    }
    if (v > kBoundaryMax) {
      v = kBoundaryMax;
      ++clamped_;
    }
  }
}

BoundaryField BoundaryField::zeros(const GridLattice& lattice) {
  return BoundaryField(lattice, std::vector<double>(lattice.size(), 0.0));
}

ClassField::ClassField(std::size_t pixels, std::size_t numClasses, double fill)
    : pixels_(pixels), numClasses_(numClasses), values_(pixels * numClasses, fill) {}

ClassField::ClassField(std::size_t pixels, std::size_t numClasses, std::vector<double> values)
    : pixels_(pixels), numClasses_(numClasses), values_(std::move(values)) {
  if (values_.size() != pixels_ * numClasses_) {
    throw ContractError("class field size does not match pixels * classes");
  }
}

bool inSimplex(std::span<const double> p, double tolerance) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

LabelField::LabelField(ClassField probs) : probs_(std::move(probs)) {
  if (probs_.numClasses() == 0) {
    throw ContractError("label field needs at least one class");
  }
  for (PixelIndex p = 0; p < probs_.pixelCount(); ++p) {
    if (!inSimplex(probs_.row(p))) {
      throw ContractError("label field row " + std::to_string(p) + " is not in the simplex");
    }
  }
}

std::vector<ClassId> mapLabels(const LabelField& p) {
  std::vector<ClassId> out(p.pixelCount(), 0);
  for (PixelIndex x = 0; x < p.pixelCount(); ++x) {
    const auto row = p.row(x);
    // max_element returns the first maximum, i.e. the lowest class id.
    out[x] = static_cast<ClassId>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace rwlp
