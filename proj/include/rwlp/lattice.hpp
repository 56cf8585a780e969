#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace rwlp {

using PixelIndex = std::size_t;
using ClassId = std::size_t;

/// Upper clamp for boundary scores. exp(-50) is an effectively closed wall
/// that still stays clear of denormals.
inline constexpr double kBoundaryMax = 50.0;

struct Point {
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Up to four in-grid neighbours, in the order up, down, left, right.
class NeighborList {
 public:
  void push(PixelIndex p) { items_[count_++] = p; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  PixelIndex operator[](std::size_t i) const { return items_[i]; }
  const PixelIndex* begin() const { return items_.data(); }
  const PixelIndex* end() const { return items_.data() + count_; }

 private:
  std::array<PixelIndex, 4> items_{};
  std::size_t count_ = 0;
};

/// Rectangular 4-connected pixel lattice. Pixels are indexed row-major with
/// x fastest: index = y * width + x.
class GridLattice {
 public:
  GridLattice(std::size_t width, std::size_t height);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return width_ * height_; }

  bool contains(PixelIndex p) const { return p < size(); }
  PixelIndex index(std::size_t x, std::size_t y) const;
  Point coords(PixelIndex p) const;

  NeighborList neighbors(PixelIndex p) const;

  friend bool operator==(const GridLattice&, const GridLattice&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
};

inline NeighborList neighbors(const GridLattice& lattice, PixelIndex p) {
  return lattice.neighbors(p);
}

struct LabelEntry {
  PixelIndex pixel = 0;
  ClassId label = 0;
  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// Sparse labelling: a partial function from pixels to dense class ids in
/// [0, numClasses). Each pixel carries at most one label.
class SparseLabels {
 public:
  SparseLabels(const GridLattice& lattice, std::size_t numClasses,
               std::vector<LabelEntry> entries);

  /// Builds labels from arbitrary (possibly gapped) external class ids. The
  /// distinct ids are sorted ascending and mapped onto 0..K-1; the returned
  /// mapping gives the external id of each dense class.
  static std::pair<SparseLabels, std::vector<std::int64_t>> fromExternalIds(
      const GridLattice& lattice,
      std::span<const std::pair<PixelIndex, std::int64_t>> entries);

  std::size_t numClasses() const { return numClasses_; }
  std::size_t pixelCount() const { return classOf_.size(); }
  const std::vector<LabelEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  std::optional<ClassId> labelAt(PixelIndex p) const;
  bool isLabeled(PixelIndex p) const {
    return p < classOf_.size() && classOf_[p] >= 0;
  }

 private:
  std::size_t numClasses_;
  std::vector<LabelEntry> entries_;
  std::vector<std::int32_t> classOf_;  // -1 where unlabeled
};

struct PixelPartition {
  std::vector<PixelIndex> labeled;
  std::vector<PixelIndex> unlabeled;
};

/// Splits the lattice into labelled and unlabelled pixels, both ascending.
PixelPartition partition(const GridLattice& lattice, const SparseLabels& labels);

/// Nonnegative per-pixel boundary scores. Values above kBoundaryMax are
/// clamped on construction; clampedCount() reports how many were.
class BoundaryField {
 public:
  BoundaryField(const GridLattice& lattice, std::vector<double> values);

  static BoundaryField zeros(const GridLattice& lattice);

  std::size_t size() const { return values_.size(); }
  double operator[](PixelIndex p) const { return values_[p]; }
  std::span<const double> values() const { return values_; }
  std::size_t clampedCount() const { return clamped_; }

 private:
  std::vector<double> values_;
  std::size_t clamped_ = 0;
};

/// Dense per-pixel array of length-K real vectors, channel fastest.
class ClassField {
 public:
  ClassField() = default;
  ClassField(std::size_t pixels, std::size_t numClasses, double fill = 0.0);
  ClassField(std::size_t pixels, std::size_t numClasses, std::vector<double> values);

  std::size_t pixelCount() const { return pixels_; }
  std::size_t numClasses() const { return numClasses_; }

  double& at(PixelIndex p, ClassId l) { return values_[p * numClasses_ + l]; }
  double at(PixelIndex p, ClassId l) const { return values_[p * numClasses_ + l]; }
  std::span<double> row(PixelIndex p) {
    return {values_.data() + p * numClasses_, numClasses_};
  }
  std::span<const double> row(PixelIndex p) const {
    return {values_.data() + p * numClasses_, numClasses_};
  }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutableValues() { return values_; }

  friend bool operator==(const ClassField&, const ClassField&) = default;

 private:
  std::size_t pixels_ = 0;
  std::size_t numClasses_ = 0;
  std::vector<double> values_;
};

inline constexpr double kSimplexTolerance = 1e-9;

/// Per-pixel probability vectors; every row lies in the simplex (entries
/// nonnegative, sum 1 within kSimplexTolerance).
class LabelField {
 public:
  explicit LabelField(ClassField probs);

  std::size_t pixelCount() const { return probs_.pixelCount(); }
  std::size_t numClasses() const { return probs_.numClasses(); }
  double at(PixelIndex p, ClassId l) const { return probs_.at(p, l); }
  std::span<const double> row(PixelIndex p) const { return probs_.row(p); }
  const ClassField& field() const { return probs_; }

 private:
  ClassField probs_;
};

bool inSimplex(std::span<const double> p, double tolerance = kSimplexTolerance);

/// Per-pixel argmax with lowest-class-id tie-break.
std::vector<ClassId> mapLabels(const LabelField& p);

}  // namespace rwlp
