#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "rwlp/cli.hpp"
#include "rwlp/formats.hpp"
#include "test_util.hpp"

using namespace rwlp;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run rwlpRun(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::filesystem::path kFixtures = RWLP_FIXTURE_DIR;

void writeLine(const testing::TempDir& dir, double middle) {
  io::writeFile(dir.file("labels.json"),
                R"({"width": 3, "height": 1, "numClasses": 2,
                    "entries": [{"x": 0, "y": 0, "class": 0}, {"x": 2, "y": 0, "class": 1}]})");
  io::writeField(dir.file("b.rwf"), {3, 1, 1, {0.0f, static_cast<float>(middle), 0.0f}});
}

std::string readAll(const std::filesystem::path& p) { return io::readFile(p); }

}  // namespace

TEST_CASE("propagate on a symmetric line") {
  testing::TempDir dir;
  writeLine(dir, 0.7);
  const Run r = rwlpRun({"propagate", "--labels", dir.file("labels.json"), "--boundary", dir.file("b.rwf"),
                         "--out-p", dir.file("p.rwf"), "--out-map", dir.file("m.pgm"), "--out-entropy",
                         dir.file("h.rwf"), "--out-weights", dir.file("w.rwf")});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.err.find("unreached: 0") != std::string::npos);
  const auto p = io::readField(dir.file("p.rwf"));
  CHECK(p.channels == 2);
  CHECK(p.data == std::vector<float>{1.0f, 0.0f, 0.5f, 0.5f, 0.0f, 1.0f});
  CHECK(io::readPgm(dir.file("m.pgm")).pixels == std::vector<std::uint8_t>{0, 0, 1});
  const auto h = io::readField(dir.file("h.rwf"));
  CHECK(h.data[1] == static_cast<float>(std::log(2.0)));
  const auto w = io::readField(dir.file("w.rwf"));
  CHECK(w.data[1] == 0.5f);
  CHECK(w.data[0] == 1.0f);
}

TEST_CASE("propagate error paths") {
  testing::TempDir dir;
  writeLine(dir, 0.0);
  Run r = rwlpRun({"propagate", "--labels", dir.file("nope.json"), "--boundary", dir.file("b.rwf")});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("nope.json") != std::string::npos);

  io::writeField(dir.file("small.rwf"), {2, 1, 1, {0.0f, 0.0f}});
  r = rwlpRun({"propagate", "--labels", dir.file("labels.json"), "--boundary", dir.file("small.rwf")});
  CHECK(r.code == cli::kExitValidation);

  io::writeField(dir.file("neg.rwf"), {3, 1, 1, {0.0f, -1.0f, 0.0f}});
  r = rwlpRun({"propagate", "--labels", dir.file("labels.json"), "--boundary", dir.file("neg.rwf")});
  CHECK(r.code == cli::kExitValidation);

  io::writeFile(dir.file("empty.json"), R"({"width": 3, "height": 1, "numClasses": 2, "entries": []})");
  r = rwlpRun({"propagate", "--labels", dir.file("empty.json"), "--boundary", dir.file("b.rwf")});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("no absorbing pixels") != std::string::npos);

  r = rwlpRun({"propagate", "--labels", dir.file("labels.json")});
  CHECK(r.code == cli::kExitValidation);
  CHECK(rwlpRun({"frobnicate"}).code == cli::kExitValidation);
  CHECK(rwlpRun({}).code == cli::kExitValidation);
}

TEST_CASE("propagate warns about clamped boundary values") {
  testing::TempDir dir;
  writeLine(dir, 80.0);
  const Run r = rwlpRun({"propagate", "--labels", dir.file("labels.json"), "--boundary", dir.file("b.rwf"),
                         "--out-p", dir.file("p.rwf")});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.err.find("clamp") != std::string::npos);
}

TEST_CASE("propagate reproduces the golden fixture") {
  testing::TempDir dir;
  const auto g = kFixtures / "golden5x5";
  const Run r = rwlpRun({"propagate", "--labels", (g / "labels.json").string(), "--boundary",
                         (g / "boundary.rwf").string(), "--out-p", dir.file("p.rwf"), "--out-map",
                         dir.file("m.pgm")});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(readAll(dir.file("p.rwf")) == readAll(g / "cli_p.rwf"));
  CHECK(readAll(dir.file("m.pgm")) == readAll(g / "expected_map.pgm"));
  // The oracle result agrees to float precision.
  const auto mine = io::readField(dir.file("p.rwf"));
  const auto oracleP = io::readField(g / "expected_p.rwf");
  REQUIRE(mine.data.size() == oracleP.data.size());
  for (std::size_t i = 0; i < mine.data.size(); ++i) CHECK(std::abs(mine.data[i] - oracleP.data[i]) <= 1e-7f);
}

TEST_CASE("propagate solvers agree") {
  testing::TempDir dir;
  const auto g = kFixtures / "wall32";
  for (const char* solver : {"lu", "sor"}) {
    const Run r = rwlpRun({"propagate", "--labels", (g / "labels.json").string(), "--boundary",
                           (g / "boundary.rwf").string(), "--out-p", dir.file(std::string(solver) + ".rwf"),
                           "--solver", solver});
    REQUIRE(r.code == cli::kExitOk);
  }
  const auto a = io::readField(dir.file("lu.rwf"));
  const auto b = io::readField(dir.file("sor.rwf"));
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) <= 1e-6f);
  CHECK(rwlpRun({"propagate", "--labels", (g / "labels.json").string(), "--boundary",
                 (g / "boundary.rwf").string(), "--solver", "cg"})
            .code == cli::kExitValidation);
}

TEST_CASE("train validates its arguments") {
  testing::TempDir dir;
  CHECK(rwlpRun({"train", "--scenario", "twoRegions", "--steps", "0", "--out-dir", dir.file("o")}).code ==
        cli::kExitValidation);
  CHECK(rwlpRun({"train", "--scenario", "nowhere", "--out-dir", dir.file("o")}).code == cli::kExitValidation);
  CHECK(rwlpRun({"train", "--out-dir", dir.file("o")}).code == cli::kExitValidation);
  CHECK(rwlpRun({"train", "--scenario", "twoRegions", "--link", "cubic", "--out-dir", dir.file("o")}).code ==
        cli::kExitValidation);
}

TEST_CASE("train on twoRegions writes a deterministic run") {
  testing::TempDir dir;
  const auto trainInto = [&](const std::string& out) {
    return rwlpRun({"train", "--scenario", "twoRegions", "--steps", "500", "--seed", "7", "--out-dir", out});
  };
  REQUIRE(trainInto(dir.file("a")).code == cli::kExitOk);
  REQUIRE(trainInto(dir.file("b")).code == cli::kExitOk);
  for (const char* f : {"trace.jsonl", "boundary.rwf", "p.rwf", "q.rwf", "map.pgm"}) {
    CHECK(readAll(dir.path() / "a" / f) == readAll(dir.path() / "b" / f));
  }

  std::istringstream trace(readAll(dir.path() / "a" / "trace.jsonl"));
  std::string line, last;
  std::size_t lines = 0;
  while (std::getline(trace, line)) {
    last = line;
    ++lines;
  }
  CHECK(lines == 501);
  const auto rec = nlohmann::json::parse(last);
  CHECK(rec["step"] == 500);
  CHECK(rec["mapAccuracy"].get<double>() >= 0.99);
  CHECK(io::readField(dir.path() / "a" / "q.rwf").channels == 2);
}

TEST_CASE("train from a labels file has no accuracy") {
  testing::TempDir dir;
  writeLine(dir, 0.0);
  const Run r = rwlpRun({"train", "--labels", dir.file("labels.json"), "--steps", "3", "--out-dir", dir.file("o")});
  REQUIRE(r.code == cli::kExitOk);
  std::istringstream trace(readAll(dir.path() / "o" / "trace.jsonl"));
  std::string line;
  std::getline(trace, line);
  CHECK(nlohmann::json::parse(line)["mapAccuracy"].is_null());
}

TEST_CASE("gradcheck exit codes") {
  Run r = rwlpRun({"gradcheck", "--size", "4x4", "--classes", "2", "--seed", "1"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("max relative error:") != std::string::npos);
  CHECK(rwlpRun({"gradcheck", "--size", "1x1", "--classes", "1"}).code == cli::kExitOk);
  CHECK(rwlpRun({"gradcheck", "--size", "4x4", "--classes", "2", "--fd-step", "10"}).code ==
        cli::kExitCheckFailed);
  CHECK(rwlpRun({"gradcheck", "--size", "0x4", "--classes", "2"}).code == cli::kExitValidation);
  CHECK(rwlpRun({"gradcheck", "--size", "4x4", "--classes", "0"}).code == cli::kExitValidation);
}

TEST_CASE("mccheck exit codes") {
  const Run r = rwlpRun({"mccheck", "--size", "4x4", "--classes", "2", "--seed", "3"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("max z-score:") != std::string::npos);
  CHECK(rwlpRun({"mccheck", "--size", "4by4", "--classes", "2"}).code == cli::kExitValidation);
}

TEST_CASE("check commands are deterministic") {
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{"gradcheck", "--size", "5x3", "--classes", "3", "--seed", "9"},
        std::vector<std::string>{"mccheck", "--size", "3x3", "--classes", "2", "--seed", "9", "--walks", "2000"}}) {
    const Run a = rwlpRun(args);
    const Run b = rwlpRun(args);
    CHECK(a.code == b.code);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("version and help") {
  const Run v = rwlpRun({"--version"});
  CHECK(v.code == cli::kExitOk);
  CHECK(v.out.find("0.1.0") != std::string::npos);
  CHECK(rwlpRun({"--help"}).code == cli::kExitOk);
}
