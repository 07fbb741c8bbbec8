#include "toothseg/cli.hpp"

#include <algorithm>
#include <functional>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "toothseg/config.hpp"
#include "toothseg/dataset.hpp"
#include "toothseg/mesh_io.hpp"
#include "toothseg/preprocess.hpp"
#include "toothseg/spectral.hpp"
#include "toothseg/synthetic.hpp"
#include "toothseg/train.hpp"

namespace toothseg {

namespace fs = std::filesystem;

namespace {

struct StageFailure {
  std::string stage;
  std::string message;
};

// Runs `fn`, tagging any failure with the stage name for the error message.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure{name, e.what()};
  }
}

fs::path with_suffix(const fs::path& mesh, const std::string& suffix) {
  fs::path p = mesh;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

TriangleMesh load_stage(const fs::path& path) {
  return stage("load " + path.string(), [&] { return load_mesh(path); });
}

struct ClusterArgs {
  std::string mesh;
  SpectralConfig spectral;
  std::string out;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
  const TriangleMesh mesh = load_stage(a.mesh);
  if (mesh.face_count() > kMaxSpectralFaces) {
    throw StageFailure{"cluster", "mesh has " + std::to_string(mesh.face_count()) + " faces, above the limit of " +
                                      std::to_string(kMaxSpectralFaces) + "; run `toothseg preprocess` first"};
  }
  const TriangleMesh normalized = stage("normalize", [&] { return normalize(mesh).mesh; });
  const ClusterAssignment result = stage("cluster", [&] { return cluster_mesh(normalized, a.spectral); });
  const fs::path prefix = a.out.empty() ? with_suffix(a.mesh, ".seg") : fs::path(a.out);
  const fs::path sidecar = prefix.string() + ".clusters";
  const fs::path ply = prefix.string() + ".ply";
  stage("write", [&] {
    write_file(sidecar, write_labels(result.component));
    write_file(ply, export_colored_ply(mesh, colors_for_ids(result.component)));
  });
  out << "clustered " << mesh.face_count() << " faces into " << result.k << " components\n"
      << "wrote " << sidecar.string() << "\nwrote " << ply.string() << "\n";
  return kExitOk;
}

int cmd_preprocess(const std::string& mesh_path, std::size_t target, const std::string& out_path,
                   std::ostream& out) {
  const TriangleMesh mesh = load_stage(mesh_path);
  const DecimateResult dec = stage("decimate", [&] { return decimate(mesh, target); });
  const NormalizeResult norm = stage("normalize", [&] { return normalize(dec.mesh); });
  const fs::path dest = out_path.empty() ? with_suffix(mesh_path, ".pre.obj") : fs::path(out_path);
  stage("write", [&] { write_file(dest, write_obj(norm.mesh)); });
  out << "faces " << mesh.face_count() << " -> " << norm.mesh.face_count();
  if (!dec.reached_target) out << " (no further legal collapse before " << target << ")";
  out << "\nwrote " << dest.string() << "\n";
  return kExitOk;
}

std::vector<int> json_int_list(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of integers");
  std::vector<int> v;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw ConfigError(what + " must be an array of integers");
    v.push_back(x.get<int>());
  }
  return v;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
  const nlohmann::json spec = stage("read spec", [&] {
    try {
      return nlohmann::json::parse(read_file(spec_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(spec_path + ": " + e.what());
    }
  });
  std::size_t written = 0;
  stage("generate", [&] {
    const int teeth = spec.value("teeth", 14);
    const std::size_t budget = spec.value("face_budget", std::size_t{3000});
    for (const char* split : {"labeled", "unlabeled", "test"}) {
      if (!spec.contains(split)) continue;
      const auto& entries = spec.at(split);
      if (!entries.is_array()) throw ConfigError(std::string(split) + " must be an array of arch entries");
      const fs::path dir = fs::path(out_dir) / split;
      fs::create_directories(dir);
      std::map<std::string, std::vector<int>> manifest;
      for (const auto& e : entries) {
        if (!e.contains("name") || !e.at("name").is_string()) {
          throw ConfigError(std::string(split) + ": every entry needs a string \"name\"");
        }
        ArchSpec arch;
        const std::string name = e.at("name").get<std::string>();
        arch.teeth = e.value("teeth", teeth);
        arch.face_budget = e.value("face_budget", budget);
        arch.seed = e.value("seed", std::uint64_t{0});
        if (e.contains("missing")) arch.missing = json_int_list(e.at("missing"), name + ".missing");
        LabeledArch generated;
        try {
          generated = generate_synthetic_arch(arch);
        } catch (const Error& err) {
          throw Error("arch '" + name + "': " + err.what());
        }
        write_file(dir / (name + ".obj"), write_obj(generated.mesh));
        if (std::string(split) != "unlabeled") {
          write_file(dir / (name + ".labels"), write_labels(generated.labels.labels));
        }
        manifest[name] = arch.missing;
        ++written;
      }
      write_manifest(dir, manifest);
    }
  });
  out << "wrote " << written << " arches under " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = stage("config", [&] { return load_run_config(config_path); });
  const TrainConfig& tc = cfg.train;
  DatasetSplit split;
  stage("load data", [&] {
    split.labeled = load_labeled_dir(cfg.labeled_dir, tc.model.classes, tc.decimate_target);
    if (cfg.unlabeled_dir) split.unlabeled = load_unlabeled_dir(*cfg.unlabeled_dir, tc.decimate_target);
    if (cfg.test_dir) split.test = load_labeled_dir(*cfg.test_dir, tc.model.classes, tc.decimate_target);
  });
  ClusterCache cache(cfg.cache_dir());
  stage("cluster", [&] {
    for (auto& s : split.unlabeled) {
      try {
        s.components = cache.get_or_compute(s.mesh, tc.spectral);
      } catch (const Error& e) {
        throw Error("arch '" + s.name + "': " + e.what());
      }
    }
  });
  out << split.labeled.size() << " labeled, " << split.unlabeled.size() << " unlabeled ("
      << cache.computations() << " clustered, " << cache.hits() << " cached), " << split.test.size()
      << " test arches\n";
  const TrainResult result = stage("train", [&] { return train(split, tc); });
  stage("write", [&] {
    write_file(cfg.out_dir / "config.toml", format_run_config(cfg));
    write_file(cfg.out_dir / "losses.csv", losses_csv(result.history));
    write_file(cfg.out_dir / "checkpoint.txt", save_checkpoint(result.params, result.opt));
  });
  out << "trained " << result.history.size() << " steps; wrote " << (cfg.out_dir / "checkpoint.txt").string()
      << " and " << (cfg.out_dir / "losses.csv").string() << "\n";
  if (!split.test.empty()) {
    const EvalReport report = stage("evaluate", [&] { return evaluate(result.params, split.test); });
    stage("write", [&] {
      write_file(cfg.out_dir / "report.csv", report_csv(report));
      write_file(cfg.out_dir / "report.txt", report_table(report));
    });
    out << report_table(report);
  }
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& test_dir, std::size_t target,
             const std::string& out_dir, std::ostream& out) {
  const Checkpoint ckpt = stage("load checkpoint", [&] { return load_checkpoint(read_file(checkpoint_path)); });
  const std::vector<LabeledSample> test =
      stage("load test data", [&] { return load_labeled_dir(test_dir, ckpt.params.shape.classes, target); });
  const EvalReport report = stage("evaluate", [&] { return evaluate(ckpt.params, test); });
  const fs::path dest = out_dir.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(out_dir);
  stage("write", [&] {
    write_file(dest / "report.csv", report_csv(report));
    write_file(dest / "report.txt", report_table(report));
  });
  out << report_table(report);
  return kExitOk;
}

int cmd_export_colored(const std::string& mesh_path, const std::string& labels_path, const std::string& out_path,
                       std::ostream& out) {
  const TriangleMesh mesh = load_stage(mesh_path);
  const std::vector<int> ids = stage("read labels", [&] { return read_labels(read_file(labels_path)); });
  const fs::path dest = out_path.empty() ? with_suffix(mesh_path, ".colored.ply") : fs::path(out_path);
  stage("export", [&] {
    if (ids.size() != mesh.face_count()) {
      throw Error(labels_path + " has " + std::to_string(ids.size()) + " entries for " +
                  std::to_string(mesh.face_count()) + " faces");
    }
    write_file(dest, export_colored_ply(mesh, colors_for_ids(ids)));
  });
  out << "wrote " << dest.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised dental arch segmentation toolkit", "toothseg"};
  app.require_subcommand(1);

  ClusterArgs cluster;
  auto* c = app.add_subcommand("cluster", "Spectral clustering of one mesh into K components");
  c->add_option("mesh", cluster.mesh, "Input mesh (.obj, .ply, .stl)")->required()->check(CLI::ExistingFile);
  c->add_option("--k", cluster.spectral.k, "Number of components")->capture_default_str();
  c->add_option("--delta", cluster.spectral.delta, "Geodesic share of the combined distance")->capture_default_str();
  c->add_option("--eta", cluster.spectral.eta, "Weight on convex dihedral terms")->capture_default_str();
  c->add_option("--embed-dims", cluster.spectral.embed_dims, "Eigenvectors used (default: K)");
  c->add_option("--seed", cluster.spectral.seed, "k-means++ seed")->capture_default_str();
  c->add_option("--out", cluster.out, "Output prefix for <prefix>.clusters and <prefix>.ply");

  std::string pre_mesh, pre_out;
  std::size_t pre_target = kDefaultDecimateTarget;
  auto* p = app.add_subcommand("preprocess", "Decimate and normalize a mesh");
  p->add_option("mesh", pre_mesh, "Input mesh")->required()->check(CLI::ExistingFile);
  p->add_option("--target-faces", pre_target, "Face budget")->capture_default_str();
  p->add_option("--out", pre_out, "Output OBJ (default: <mesh>.pre.obj)");

  std::string gen_spec, gen_out;
  auto* g = app.add_subcommand("gen-data", "Generate the synthetic arch benchmark from a JSON spec");
  g->add_option("spec", gen_spec, "Benchmark spec (JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--out-dir", gen_out, "Output directory")->required();

  std::string train_config;
  auto* t = app.add_subcommand("train", "Train from a run configuration file");
  t->add_option("config", train_config, "Run configuration")->required()->check(CLI::ExistingFile);

  std::string eval_ckpt, eval_dir, eval_out;
  std::size_t eval_target = kDefaultDecimateTarget;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled test directory");
  e->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("test_dir", eval_dir, "Directory of meshes with .labels sidecars")
      ->required()
      ->check(CLI::ExistingDirectory);
  e->add_option("--out-dir", eval_out, "Where to write report.csv and report.txt (default: next to checkpoint)");
  e->add_option("--target-faces", eval_target, "Largest accepted face count")->capture_default_str();

  std::string exp_mesh, exp_labels, exp_out;
  auto* x = app.add_subcommand("export-colored", "Write a PLY colored by per-face ids");
  x->add_option("mesh", exp_mesh, "Input mesh")->required()->check(CLI::ExistingFile);
  x->add_option("labels", exp_labels, "Per-face id sidecar")->required()->check(CLI::ExistingFile);
  x->add_option("--out", exp_out, "Output PLY (default: <mesh>.colored.ply)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c->parsed()) return cmd_cluster(cluster, out);
    if (p->parsed()) return cmd_preprocess(pre_mesh, pre_target, pre_out, out);
    if (g->parsed()) return cmd_gen_data(gen_spec, gen_out, out);
    if (t->parsed()) return cmd_train(train_config, out);
    if (e->parsed()) return cmd_eval(eval_ckpt, eval_dir, eval_target, eval_out, out);
    if (x->parsed()) return cmd_export_colored(exp_mesh, exp_labels, exp_out, out);
  } catch (const StageFailure& f) {
    err << "toothseg: " << f.stage << " failed: " << f.message << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace toothseg
