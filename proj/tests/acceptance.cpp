// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance <data-dir> <work-dir> [criterion ...]
//
// With no criterion numbers every criterion runs. Exit status is 1 when any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "toothseg/cli.hpp"
#include "toothseg/eigen_solver.hpp"
#include "toothseg/kmeans.hpp"
#include "toothseg/mesh_io.hpp"
#include "toothseg/preprocess.hpp"
#include "toothseg/spectral.hpp"
#include "toothseg/synthetic.hpp"
#include "toothseg/train.hpp"

using namespace toothseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  if (code != kExitOk) {
    std::cerr << "  toothseg";
    for (const auto& a : args) std::cerr << ' ' << a;
    std::cerr << " exited " << code << "\n" << e.str();
  }
  return code;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

// Mean DSC over the rows of report.csv.
double mean_dsc(const fs::path& report) {
  std::istringstream in(read_file(report));
  std::string line;
  std::getline(in, line);
  double sum = 0.0;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    sum += std::stod(line.substr(line.rfind(',') + 1));
    ++n;
  }
  if (n == 0) throw Error("no rows in " + report.string());
  return sum / n;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_run(const fs::path& file, const fs::path& out_dir, const fs::path& bench, const fs::path& cache,
               bool unlabeled, int epochs, std::uint64_t seed) {
  std::string text = "out_dir = \"" + out_dir.string() + "\"\n[data]\nlabeled_dir = \"" + (bench / "labeled").string() +
                     "\"\ntest_dir = \"" + (bench / "test").string() + "\"\ncluster_cache = \"" + cache.string() +
                     "\"\n";
  if (unlabeled) text += "unlabeled_dir = \"" + (bench / "unlabeled").string() + "\"\n";
  text += "[train]\nepochs = " + std::to_string(epochs) + "\n[seeds]\nmodel = " + std::to_string(seed) +
          "\norder = " + std::to_string(seed + 100) + "\naugment = " + std::to_string(seed + 200) +
          "\npairs = " + std::to_string(seed + 300) + "\nkmeans = 0\n";
  write_file(file, text);
}

Outcome criterion1(const fs::path& data, const fs::path& work) {
  const auto start = Clock::now();
  const fs::path bench = work / "c1_bench";
  if (cli({"gen-data", (data / "benchmark.json").string(), "--out-dir", bench.string()}) != kExitOk) {
    return {false, "gen-data failed"};
  }
  std::vector<double> semi, sup;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (bool with_unlabeled : {true, false}) {
      const fs::path run = work / ((with_unlabeled ? "c1_semi_" : "c1_sup_") + std::to_string(seed));
      write_run(run.string() + ".toml", run, bench, work / "c1_cache", with_unlabeled, TrainConfig{}.epochs, seed);
      if (cli({"train", run.string() + ".toml"}) != kExitOk) return {false, "train failed"};
      (with_unlabeled ? semi : sup).push_back(mean_dsc(run / "report.csv"));
    }
  }
  const double elapsed = seconds_since(start);
  std::string detail = "median DSC semi " + fmt("%.4f", median(semi)) + " vs supervised " + fmt("%.4f", median(sup)) +
                       " (seeds:";
  for (std::size_t i = 0; i < semi.size(); ++i) detail += " " + fmt("%.3f", semi[i]) + "/" + fmt("%.3f", sup[i]);
  detail += "), " + fmt("%.0f", elapsed) + " s";
  return {median(semi) >= median(sup) && elapsed < 600.0, detail};
}

Outcome criterion2() {
  const auto start = Clock::now();
  const auto dice = oracle::check_dice_gradients(100, 1);
  const auto con = oracle::check_contrastive_gradients(100, 2);
  const auto model = oracle::check_model_gradients(100, 3);
  const double elapsed = seconds_since(start);
  const bool pass = dice.instances >= 100 && con.instances >= 100 && model.instances >= 100 && dice.worst < 1e-5 &&
                    con.worst < 1e-5 && model.worst < 1e-4 && elapsed < 60.0;
  return {pass, "worst relative error dice " + fmt("%.2e", dice.worst) + ", contrastive " + fmt("%.2e", con.worst) +
                    ", through model " + fmt("%.2e", model.worst) + "; " + fmt("%.1f", elapsed) + " s"};
}

Outcome criterion3() {
  Rng rng(77);
  double worst = 0.0;
  int meshes = 0;
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_small_mesh(rng, 12);
    if (m.face_count() > 12) return {false, "oracle mesh above 12 faces"};
    SpectralConfig cfg;
    const auto d = pairwise_distance(build_dual_graph(m, cfg.eta), cfg);
    worst = std::max(worst, (d - oracle::floyd_warshall(m, cfg.delta, cfg.eta)).cwiseAbs().maxCoeff());
    ++meshes;
  }
  return {meshes == 50 && worst <= 1e-9, std::to_string(meshes) + " meshes, max |difference| " + fmt("%.2e", worst)};
}

Outcome criterion4() {
  Rng rng(44);
  double residual = 0.0, ortho = 0.0;
  auto measure = [&](const Eigen::MatrixXd& a, const EigenDecomposition& e) {
    const double norm = a.norm();
    for (Eigen::Index k = 0; k < e.values.size(); ++k) {
      const double r = (a * e.vectors.col(k) - e.values[k] * e.vectors.col(k)).norm();
      residual = std::max(residual, norm > 0 ? r / norm : r);
    }
    const auto m = e.vectors.cols();
    ortho = std::max(ortho,
                     (e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff());
  };
  for (int n = 1; n <= 50; ++n) {
    const auto a = oracle::random_symmetric(rng, n);
    measure(a, symmetric_eigen(a));
    measure(a, symmetric_eigen_top(a, 1 + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)))));
  }
  const Eigen::MatrixXd two{{2, 1}, {1, 2}};
  double hand = 0.0;
  for (const auto& e : {symmetric_eigen(two), symmetric_eigen_top(two, 2)}) {
    hand = std::max({hand, std::abs(e.values[0] - 3.0), std::abs(e.values[1] - 1.0)});
  }
  return {residual <= 1e-8 && ortho <= 1e-8 && hand <= 1e-10,
          "residual/|A| " + fmt("%.2e", residual) + ", orthogonality " + fmt("%.2e", ortho) + ", [[2,1],[1,2]] error " +
              fmt("%.1e", hand)};
}

Outcome criterion5() {
  Rng rng(55);
  int monotone = 0, exact_k = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 5 + static_cast<int>(uniform_index(rng, 60));
    const int dim = 1 + static_cast<int>(uniform_index(rng, 5));
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(std::min(n, 10))));
    Eigen::MatrixXd p(n, dim);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = uniform(rng, -1, 1);
    // Every fifth instance collapses points onto a few sites to exercise the empty-cluster repair.
    if (t % 5 == 0) {
      for (int i = 0; i < n; ++i) p.row(i) = p.row(i % 3);
    }
    const auto r = kmeans_pp(p, k, rng());
    bool ok = true;
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      ok = ok && r.objective_history[i] <= r.objective_history[i - 1] * (1.0 + 1e-12);
    }
    monotone += ok;
    exact_k += std::set<int>(r.assignment.component.begin(), r.assignment.component.end()).size() ==
               static_cast<std::size_t>(k);
  }
  int recovered = 0;
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd p(40, 3);
    std::vector<int> planted(40);
    for (int i = 0; i < 40; ++i) {
      planted[static_cast<std::size_t>(i)] = i % 2;
      for (int d = 0; d < 3; ++d) p(i, d) = (i % 2) * 20.0 + uniform(rng, -1, 1);
    }
    recovered += same_partition(kmeans_pp(p, 2, static_cast<std::uint64_t>(t)).assignment.component, planted);
  }
  return {monotone == 1000 && exact_k == 1000 && recovered == 20,
          "monotone " + std::to_string(monotone) + "/1000, exactly K nonempty " + std::to_string(exact_k) +
              "/1000, two blobs recovered " + std::to_string(recovered) + "/20"};
}

bool edge_connected(const TriangleMesh& mesh, const std::vector<int>& ids, int id) {
  std::vector<std::uint32_t> members;
  for (std::size_t f = 0; f < ids.size(); ++f) {
    if (ids[f] == id) members.push_back(static_cast<std::uint32_t>(f));
  }
  if (members.empty()) return false;
  std::vector<bool> seen(ids.size(), false);
  std::queue<std::uint32_t> q;
  q.push(members[0]);
  seen[members[0]] = true;
  std::size_t reached = 0;
  while (!q.empty()) {
    const auto f = q.front();
    q.pop();
    ++reached;
    for (auto g : mesh.adjacency[f]) {
      if (!seen[g] && ids[g] == id) {
        seen[g] = true;
        q.push(g);
      }
    }
  }
  return reached == members.size();
}

Outcome criterion6(const fs::path& data) {
  int plates_ok = 0;
  for (int cells : {4, 6, 9}) {
    const auto plates = generate_crease_plates(cells);
    SpectralConfig cfg;
    cfg.k = 2;
    plates_ok += same_partition(cluster_mesh(normalize(plates.mesh).mesh, cfg).component, plates.labels.labels);
  }
  // The held-out benchmark arches, generated in memory.
  const auto spec = nlohmann::json::parse(read_file(data / "benchmark.json"));
  int clusters = 0, disconnected = 0, crossing = 0, arches = 0;
  for (const auto& entry : spec["test"]) {
    ArchSpec a;
    a.teeth = spec["teeth"].get<int>();
    a.face_budget = spec["face_budget"].get<std::size_t>();
    a.seed = entry["seed"].get<std::uint64_t>();
    a.missing = entry["missing"].get<std::vector<int>>();
    const auto arch = generate_synthetic_arch(a);
    const auto mesh = normalize(arch.mesh).mesh;
    const auto ids = cluster_mesh(mesh, SpectralConfig{}).component;
    std::map<int, std::set<int>> labels_in;
    for (std::size_t f = 0; f < ids.size(); ++f) labels_in[ids[f]].insert(arch.labels.labels[f]);
    for (const auto& [id, labels] : labels_in) {
      ++clusters;
      disconnected += !edge_connected(mesh, ids, id);
      // Tooth-base creases are exactly the label boundaries, so a cluster
      // holding two labels has faces on both sides of some loop.
      crossing += labels.size() > 1;
    }
    ++arches;
  }
  return {plates_ok == 3 && disconnected == 0 && crossing == 0,
          "crease plates split exactly " + std::to_string(plates_ok) + "/3; " + std::to_string(arches) + " arches, " +
              std::to_string(clusters) + " clusters, " + std::to_string(disconnected) + " not edge-connected, " +
              std::to_string(crossing) + " crossing a tooth-base loop"};
}

Outcome criterion7(const fs::path& data, const fs::path& work) {
  const fs::path input = data / "arch_3000.obj";
  const fs::path prefix = work / "c7_arch";
  const auto start = Clock::now();
  const int code = cli({"cluster", input.string(), "--k", "60", "--delta", "0.03", "--eta", "0.15", "--out",
                        prefix.string()});
  const double elapsed = seconds_since(start);
  if (code != kExitOk) return {false, "cluster exited " + std::to_string(code)};
  const auto original = load_mesh(input);
  const std::string ply = read_file(prefix.string() + ".ply");
  const auto ids = read_labels(read_file(prefix.string() + ".clusters"));
  const auto back = parse_mesh(ply, MeshFormat::Ply);
  const bool same_mesh = back.faces == original.faces && back.vertices == original.vertices;
  const bool rewrite = export_colored_ply(back, colors_for_ids(ids)) == ply;
  const std::size_t k = std::set<int>(ids.begin(), ids.end()).size();
  return {original.face_count() == 3000 && elapsed < 120.0 && same_mesh && rewrite && k == 60,
          std::to_string(original.face_count()) + " faces into " + std::to_string(k) + " clusters in " +
              fmt("%.1f", elapsed) + " s; PLY reparses to the input mesh " + (same_mesh ? "yes" : "no") +
              ", rewrites byte-identically " + (rewrite ? "yes" : "no")};
}

Outcome criterion8(const fs::path& data, const fs::path& work) {
  std::vector<std::string> differing;
  auto compare = [&](const fs::path& a, const fs::path& b) {
    if (!fs::exists(a) || !fs::exists(b) || read_file(a) != read_file(b)) differing.push_back(a.filename().string());
  };
  const fs::path input = data / "arch_3000.obj";
  for (const char* run : {"c8_cluster_a", "c8_cluster_b"}) {
    if (cli({"cluster", input.string(), "--seed", "5", "--out", (work / run).string()}) != kExitOk) {
      return {false, "cluster failed"};
    }
  }
  compare(work / "c8_cluster_a.clusters", work / "c8_cluster_b.clusters");
  compare(work / "c8_cluster_a.ply", work / "c8_cluster_b.ply");

  const fs::path bench = work / "c8_bench";
  if (cli({"gen-data", (data / "benchmark.json").string(), "--out-dir", bench.string()}) != kExitOk) {
    return {false, "gen-data failed"};
  }
  // Separate caches so the second run recomputes every clustering.
  for (const char* run : {"c8_train_a", "c8_train_b"}) {
    const fs::path dir = work / run;
    write_run(dir.string() + ".toml", dir, bench, dir / "cache", true, 10, 7);
    if (cli({"train", dir.string() + ".toml"}) != kExitOk) return {false, "train failed"};
  }
  int files = 2;
  for (const char* name : {"losses.csv", "report.csv", "report.txt", "checkpoint.txt"}) {
    compare(work / "c8_train_a" / name, work / "c8_train_b" / name);
    ++files;
  }
  for (const auto& entry : fs::directory_iterator(work / "c8_train_a" / "cache")) {
    compare(entry.path(), work / "c8_train_b" / "cache" / entry.path().filename());
    ++files;
  }
  std::string detail = std::to_string(files) + " output files compared";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

Outcome criterion9() {
  auto sample = [](const std::string& name, std::uint64_t seed, std::vector<int> missing) {
    ArchSpec spec;
    spec.teeth = 4;
    spec.face_budget = 600;
    spec.seed = seed;
    spec.missing = std::move(missing);
    const auto arch = generate_synthetic_arch(spec);
    LabeledSample s;
    s.name = name;
    s.mesh = prepare_mesh(arch.mesh, kDefaultDecimateTarget, false);
    s.labels = arch.labels;
    s.labels.num_classes = kDefaultClassCount;
    return s;
  };
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.spectral.k = 10;
  DatasetSplit labeled_only;
  labeled_only.labeled = {sample("L1", 1, {}), sample("L2", 2, {3})};
  labeled_only.test = {sample("T1", 9, {})};
  DatasetSplit with_unlabeled = labeled_only;
  ClusterCache cache;
  for (std::uint64_t i = 0; i < 4; ++i) {
    UnlabeledSample u;
    u.name = "U" + std::to_string(i);
    u.mesh = sample(u.name, 20 + i, {}).mesh;
    u.components = cache.get_or_compute(u.mesh, cfg.spectral);
    with_unlabeled.unlabeled.push_back(std::move(u));
  }

  const auto supervised = train(labeled_only, cfg);
  const bool u0 = oracle::same_params(supervised.params, oracle::supervised_reference(labeled_only, cfg));

  auto zero = cfg;
  zero.loss.lambda = 0.0;
  const auto lambda0 = train(with_unlabeled, zero);
  bool zero_terms = true;
  for (const auto& r : lambda0.history) {
    if (!r.labeled) zero_terms = zero_terms && r.total == 0.0;
  }
  const bool l0 = oracle::same_params(lambda0.params, supervised.params) && lambda0.opt.step == supervised.opt.step &&
                  zero_terms;
  const bool differs = !oracle::same_params(train(with_unlabeled, cfg).params, supervised.params);
  return {u0 && l0 && differs, std::string("u=0 equals supervised reference: ") + (u0 ? "yes" : "no") +
                                   "; lambda=0 equals u=0 with zero unlabeled terms: " + (l0 ? "yes" : "no") +
                                   "; lambda=10 changes the parameters: " + (differs ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <data-dir> <work-dir> [criterion ...]\n";
    return 2;
  }
  const fs::path data = argv[1], work = argv[2];
  std::set<int> selected;
  for (int i = 3; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, [&] { return criterion1(data, work); }},
      {2, criterion2},
      {3, criterion3},
      {4, criterion4},
      {5, criterion5},
      {6, [&] { return criterion6(data); }},
      {7, [&] { return criterion7(data, work); }},
      {8, [&] { return criterion8(data, work); }},
      {9, criterion9},
  };
  int failures = 0;
  for (const auto& [number, run] : criteria) {
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << number << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
