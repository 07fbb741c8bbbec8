#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "toothseg/cli.hpp"
#include "toothseg/mesh_io.hpp"

using namespace toothseg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("toothseg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTetraObj = "v 1 1 1\nv -1 -1 1\nv -1 1 -1\nv 1 -1 -1\nf 1 2 3\nf 1 4 2\nf 1 3 4\nf 2 4 3\n";

void write_bench_spec(const fs::path& file) {
  write_file(file, R"({"teeth": 3, "face_budget": 300,
    "labeled": [{"name": "L1", "seed": 1, "missing": []}, {"name": "L2", "seed": 2, "missing": [2]}],
    "unlabeled": [{"name": "U1", "seed": 3, "missing": []}, {"name": "U2", "seed": 4, "missing": [1]}],
    "test": [{"name": "T1", "seed": 5, "missing": []}, {"name": "T2", "seed": 6, "missing": [3]}]})");
}

void write_run_config(const fs::path& file, const std::string& out_dir) {
  write_file(file, "out_dir = \"" + out_dir + "\"\n[data]\nlabeled_dir = \"bench/labeled\"\n"
                   "unlabeled_dir = \"bench/unlabeled\"\ntest_dir = \"bench/test\"\n"
                   "[train]\nepochs = 3\n[loss]\npairs_per_step = 64\n[spectral]\nk = 8\n");
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"cluster"}).code == kExitUsage);
  CHECK(cli({"cluster", "/nonexistent.obj"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("cluster a tetrahedron into two components") {
  const auto dir = scratch("tetra");
  write_file(dir / "tetra.obj", kTetraObj);
  const auto r = cli({"cluster", (dir / "tetra.obj").string(), "--k", "2", "--seed", "7"});
  CHECK(r.code == kExitOk);
  const auto ids = read_labels(read_file(dir / "tetra.seg.clusters"));
  CHECK(ids.size() == 4);
  CHECK(std::set<int>(ids.begin(), ids.end()).size() == 2);
  const auto ply = load_mesh(dir / "tetra.seg.ply");
  CHECK(ply.face_count() == 4);
}

TEST_CASE("stage failures exit with 1 and name the stage") {
  const auto dir = scratch("fail");
  write_file(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  const auto r = cli({"cluster", (dir / "bad.obj").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("load") != std::string::npos);
  write_file(dir / "tetra.obj", kTetraObj);
  const auto k = cli({"cluster", (dir / "tetra.obj").string(), "--k", "9"});
  CHECK(k.code == kExitFailure);
  CHECK(k.err.find("cluster failed") != std::string::npos);
}

TEST_CASE("preprocess writes a normalized decimated OBJ") {
  const auto dir = scratch("pre");
  write_bench_spec(dir / "spec.json");
  REQUIRE(cli({"gen-data", (dir / "spec.json").string(), "--out-dir", (dir / "bench").string()}).code == kExitOk);
  const auto r = cli({"preprocess", (dir / "bench/test/T1.obj").string(), "--target-faces", "100", "--out",
                      (dir / "small.obj").string()});
  CHECK(r.code == kExitOk);
  CHECK(load_mesh(dir / "small.obj").face_count() <= 100);
}

TEST_CASE("gen-data, train, eval and export") {
  const auto dir = scratch("train");
  write_bench_spec(dir / "spec.json");
  REQUIRE(cli({"gen-data", (dir / "spec.json").string(), "--out-dir", (dir / "bench").string()}).code == kExitOk);
  CHECK(fs::exists(dir / "bench/labeled/L2.labels"));
  CHECK(fs::exists(dir / "bench/unlabeled/U1.obj"));
  CHECK(!fs::exists(dir / "bench/unlabeled/U1.labels"));
  CHECK(fs::exists(dir / "bench/test/manifest.json"));

  write_run_config(dir / "run.toml", "run1");
  write_run_config(dir / "run2.toml", "run2");
  const auto a = cli({"train", (dir / "run.toml").string()});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("T2") != std::string::npos);
  const auto b = cli({"train", (dir / "run2.toml").string()});
  REQUIRE(b.code == kExitOk);
  CHECK(read_file(dir / "run1/losses.csv") == read_file(dir / "run2/losses.csv"));
  CHECK(read_file(dir / "run1/checkpoint.txt") == read_file(dir / "run2/checkpoint.txt"));
  CHECK(read_file(dir / "run1/report.csv") == read_file(dir / "run2/report.csv"));
  CHECK(read_file(dir / "run1/config.toml").find("[seeds]") != std::string::npos);
  CHECK(read_file(dir / "run1/report.csv").find("T2,yes,") != std::string::npos);

  const auto e = cli({"eval", (dir / "run1/checkpoint.txt").string(), (dir / "bench/test").string(), "--out-dir",
                      (dir / "eval").string()});
  CHECK(e.code == kExitOk);
  CHECK(read_file(dir / "eval/report.csv") == read_file(dir / "run1/report.csv"));
  CHECK(fs::exists(dir / "eval/report.txt"));

  const auto x = cli({"export-colored", (dir / "bench/test/T1.obj").string(), (dir / "bench/test/T1.labels").string(),
                      "--out", (dir / "T1.ply").string()});
  CHECK(x.code == kExitOk);
  CHECK(load_mesh(dir / "T1.ply").face_count() == load_mesh(dir / "bench/test/T1.obj").face_count());
}

TEST_CASE("eval with mismatched labels names the arch") {
  const auto dir = scratch("mismatch");
  write_bench_spec(dir / "spec.json");
  REQUIRE(cli({"gen-data", (dir / "spec.json").string(), "--out-dir", (dir / "bench").string()}).code == kExitOk);
  write_run_config(dir / "run.toml", "run");
  REQUIRE(cli({"train", (dir / "run.toml").string()}).code == kExitOk);
  write_file(dir / "bench/test/T2.labels", "0\n1\n");
  const auto e = cli({"eval", (dir / "run/checkpoint.txt").string(), (dir / "bench/test").string()});
  CHECK(e.code == kExitFailure);
  CHECK(e.err.find("T2") != std::string::npos);
}

TEST_CASE("train reports config errors with the file and line") {
  const auto dir = scratch("badcfg");
  write_file(dir / "run.toml", "out_dir = o\n[data]\nlabeled_dir = l\n[loss]\nlamda = 3\n");
  const auto r = cli({"train", (dir / "run.toml").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("config failed") != std::string::npos);
  CHECK(r.err.find("line 5") != std::string::npos);
}

}
