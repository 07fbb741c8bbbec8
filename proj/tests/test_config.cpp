#include <doctest.h>

#include "toothseg/config.hpp"

using namespace toothseg;

TEST_SUITE("config") {

TEST_CASE("minimal config resolves paths and keeps defaults") {
  const auto cfg = parse_run_config("out_dir = \"out\"\n[data]\nlabeled_dir = lab\n", "/base");
  CHECK(cfg.out_dir == "/base/out");
  CHECK(cfg.labeled_dir == "/base/lab");
  CHECK(!cfg.unlabeled_dir);
  CHECK(cfg.cache_dir() == "/base/out/cluster_cache");
  CHECK(cfg.train.loss.lambda == 10.0);
  CHECK(cfg.train.spectral.k == 60);
}

TEST_CASE("every key is read") {
  const char* text = R"(
out_dir = "/runs/x"   # trailing comment
[data]
labeled_dir = "/d/l"
unlabeled_dir = "/d/u"
test_dir = "/d/t"
cluster_cache = "/tmp/c"
[train]
epochs = 7
augment = false
[model]
hidden = 32
classes = 15
embed = 8
[optim]
learning_rate = 0.002
beta1 = 0.8
beta2 = 0.99
epsilon = 1e-7
[loss]
lambda = 2.5
margin = 0.75
pairs_per_step = 128
dice_epsilon = 1e-5
[augment]
rotation_max_rad = 0.2
translation_max = 0.05
scale_range = [0.95, 1.05]
[spectral]
k = 40
delta = 0.1
eta = 0.3
embed_dims = 20
[decimate]
target_faces = 2500
[seeds]
model = 11
order = 12
augment = 13
pairs = 14
kmeans = 15
)";
  const auto cfg = parse_run_config(text);
  const auto& t = cfg.train;
  CHECK(*cfg.unlabeled_dir == "/d/u");
  CHECK(*cfg.test_dir == "/d/t");
  CHECK(cfg.cache_dir() == "/tmp/c");
  CHECK(t.epochs == 7);
  CHECK(!t.augment);
  CHECK(t.model.hidden == 32);
  CHECK(t.model.embed == 8);
  CHECK(t.learning_rate == 0.002);
  CHECK(t.beta1 == 0.8);
  CHECK(t.beta2 == 0.99);
  CHECK(t.adam_epsilon == 1e-7);
  CHECK(t.loss.lambda == 2.5);
  CHECK(t.loss.margin == 0.75);
  CHECK(t.loss.pairs_per_step == 128);
  CHECK(t.loss.dice_epsilon == 1e-5);
  CHECK(t.augment_ranges.rotation_max_rad == 0.2);
  CHECK(t.augment_ranges.translation_max == 0.05);
  CHECK(t.augment_ranges.scale_min == 0.95);
  CHECK(t.augment_ranges.scale_max == 1.05);
  CHECK(t.spectral.k == 40);
  CHECK(t.spectral.delta == 0.1);
  CHECK(t.spectral.eta == 0.3);
  CHECK(t.spectral.embed_dims == 20);
  CHECK(t.decimate_target == 2500);
  CHECK(t.seeds.model == 11);
  CHECK(t.seeds.order == 12);
  CHECK(t.seeds.augment == 13);
  CHECK(t.loss.seed == 14);
  CHECK(t.spectral.seed == 15);

  SUBCASE("formatting round-trips") {
    const std::string written = format_run_config(cfg);
    const auto back = parse_run_config(written);
    CHECK(format_run_config(back) == written);
    CHECK(back.train.adam_epsilon == t.adam_epsilon);
    CHECK(back.train.spectral.embed_dims == 20);
    CHECK(written.find("kmeans = 15") != std::string::npos);
  }
}

TEST_CASE("errors name the line") {
  auto message = [](const char* text) {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("out_dir = o\n[data]\nlabeled_dir = l\nbogus = 1\n").find("line 4: unknown key 'data.bogus'") !=
        std::string::npos);
  CHECK(message("out_dir = o\n[data]\nlabeled_dir = l\n[train]\nepochs = many\n").find("line 5") !=
        std::string::npos);
  CHECK(message("out_dir = o\nout_dir = p\n").find("set twice") != std::string::npos);
  CHECK(message("out_dir = o\n").find("labeled_dir is required") != std::string::npos);
  CHECK(message("out_dir = o\n[data]\nlabeled_dir = l\n[loss]\nlambda = -1\n").find("lambda") != std::string::npos);
  CHECK(message("out_dir = o\n[data]\nlabeled_dir = l\n[spectral]\nk = 1\n").find("k must be") != std::string::npos);
  CHECK(message("[data\n").find("line 1") != std::string::npos);
  CHECK(message("just words\n").find("expected 'key = value'") != std::string::npos);
}

TEST_CASE("load_run_config prefixes the file name") {
  try {
    load_run_config("/nonexistent/run.toml");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.toml") != std::string::npos);
  }
}

}
