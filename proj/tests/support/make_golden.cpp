// Writes the propagate fixtures under tests/fixtures. expected_p.rwf comes
// from the dense elimination oracle; cli_p.rwf is the byte-exact regression
// output of `rwlp propagate` on the same inputs.
//
//   make_golden <fixture dir>

#include <filesystem>
#include <iostream>

#include "rwlp/cli.hpp"
#include "rwlp/formats.hpp"
#include "rwlp/oracle.hpp"

using namespace rwlp;

namespace {

void golden5x5(const std::filesystem::path& dir) {
  const GridLattice g(5, 5);
  const SparseLabels labels(g, 3, {{g.index(0, 0), 0}, {g.index(4, 0), 1}, {g.index(2, 4), 2}, {g.index(1, 2), 0}});
  std::vector<double> b(g.size());
  for (PixelIndex p = 0; p < g.size(); ++p) {
    const Point c = g.coords(p);
    b[p] = 0.25 * static_cast<double>((3 * c.x + 5 * c.y) % 7);
  }
  // Store B as float so the CLI reads back exactly what the oracle used.
  const io::FieldFile bf = io::toField(g, 1, b);
  for (PixelIndex p = 0; p < g.size(); ++p) b[p] = bf.data[p];
  const BoundaryField boundary(g, b);

  const auto dense = oracle::denseSolvePartition(g, labels, boundary);
  const auto prop = normalizePartition(dense.z);

  std::filesystem::create_directories(dir);
  io::writeLabels(dir / "labels.json", g, labels);
  io::writeField(dir / "boundary.rwf", bf);
  io::writeField(dir / "expected_p.rwf", io::toField(g, 3, prop.p.field().values()));
  io::writePgm(dir / "expected_map.pgm", io::mapImage(g, mapLabels(prop.p)));

  cli::run({"propagate", "--labels", (dir / "labels.json").string(), "--boundary",
            (dir / "boundary.rwf").string(), "--out-p", (dir / "cli_p.rwf").string()},
           std::cout, std::cerr);
}

// Two scribbles split by a vertical wall of B = 10, the service parity input.
void wall32(const std::filesystem::path& dir) {
  const GridLattice g(32, 32);
  std::vector<LabelEntry> entries;
  for (std::size_t y = 8; y < 24; ++y) {
    entries.push_back({g.index(6, y), 0});
    entries.push_back({g.index(25, y), 1});
  }
  std::vector<double> b(g.size(), 0.0);
  for (std::size_t y = 0; y < 32; ++y) b[g.index(16, y)] = 10.0;
  std::filesystem::create_directories(dir);
  io::writeLabels(dir / "labels.json", g, SparseLabels(g, 2, entries));
  io::writeField(dir / "boundary.rwf", io::toField(g, 1, b));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <fixture dir>\n";
    return 2;
  }
  const std::filesystem::path root = argv[1];
  golden5x5(root / "golden5x5");
  wall32(root / "wall32");
  return 0;
}
