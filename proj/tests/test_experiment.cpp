#include <doctest.h>

#include "kgtrust/experiment.hpp"
#include "kgtrust/fixtures.hpp"
#include "support.hpp"

using namespace kgtrust;

namespace {

ExperimentConfig small_siot(const TempDir& dir) {
  SiotFixtureOptions f;
  f.users = 40;
  f.objects = 60;
  f.comments_per_user = 12;
  write_siot_fixture(dir / "data", make_siot_fixture(f));
  ExperimentConfig c;
  c.dataset.kind = DatasetKind::Siot;
  c.dataset.path = dir / "data";
  c.dataset.min_user_comments = 5;
  c.dataset.min_object_comments = 2;
  c.epochs = 4;
  c.input_dim = 8;
  c.latent_dim = 8;
  c.ppr.k = 3;
  c.triples.enabled = true;
  c.triples.epochs = 5;
  c.doc.epochs = 2;
  c.output_dir = dir / "out";
  return c;
}

}  // namespace

TEST_CASE("config json round trip") {
  ExperimentConfig c;
  c.dataset.kind = DatasetKind::Siot;
  c.dataset.path = "/data/siot";
  c.predictor_hidden = {16, 8};
  c.trainable_inputs = false;
  c.ppr.transition = PprTransition::Symmetric;
  c.fusion = FusionMode::Concat;
  c.optimizer.learning_rate = 0.01;
  ExperimentConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_diff(c, back).empty());
}

TEST_CASE("config reader is strict") {
  auto j = to_json(ExperimentConfig{});
  j["ppr"]["kk"] = 3;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  auto w = to_json(ExperimentConfig{});
  w["epochs"] = "many";
  CHECK_THROWS_AS(config_from_json(w), ConfigError);
  TempDir dir;
  write_file(dir / "c.json", "{\"epochs\": 3, \"fusion\": \"gate\"}");
  CHECK(load_config(dir / "c.json").epochs == 3);
  write_file(dir / "broken.json", "{epochs: ");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("validation") {
  ExperimentConfig c;
  c.dataset.path = "/data/filmtrust";
  c.triples.enabled = true;
  CHECK_THROWS_AS(validate(c), ConfigError);
  ExperimentConfig r;
  r.train_ratio = 1.0;
  CHECK_THROWS_AS(validate(r), ConfigError);
  ExperimentConfig ok;
  ok.dataset.path = "/data/filmtrust";
  CHECK_NOTHROW(validate(ok));
}

TEST_CASE("each ablation changes exactly one field") {
  ExperimentConfig base;
  base.dataset.kind = DatasetKind::Siot;
  base.triples.enabled = true;
  for (Variant v : {Variant::WoTriples, Variant::WoPpr, Variant::WoTrustee, Variant::WoTrustor, Variant::Concat}) {
    INFO(variant_name(v));
    CHECK(config_diff(base, apply_variant(base, v)).size() == 1);
    CHECK(parse_variant(variant_name(v)) == v);
  }
  ExperimentConfig film;
  CHECK_THROWS_AS(apply_variant(film, Variant::WoTriples), ConfigError);
  film.fusion = FusionMode::Concat;
  CHECK_THROWS_AS(apply_variant(film, Variant::Concat), ConfigError);
  CHECK_THROWS_AS(parse_variant("woEverything"), ConfigError);
}

TEST_CASE("sweep values") {
  ExperimentConfig c;
  CHECK(apply_sweep_value(c, SweepParam::PprK, 30).ppr.k == 30);
  CHECK(apply_sweep_value(c, SweepParam::LatentDim, 16).latent_dim == 16);
  CHECK(apply_sweep_value(c, SweepParam::TrainRatio, 0.6).train_ratio == 0.6);
  CHECK(config_diff(c, apply_sweep_value(c, SweepParam::PprK, 30)).size() == 1);
  CHECK(parse_sweep_param("ppr_k") == SweepParam::PprK);
  CHECK_THROWS_AS(parse_sweep_param("depth"), ConfigError);
}

TEST_CASE("metrics file is append safe") {
  TempDir dir;
  MetricsRow row{"SIoT", 0.9, "17", "full", 81.234567, 80.5};
  append_metrics(dir / "m.csv", {row});
  row.seed = "mean";
  append_metrics(dir / "m.csv", {row});
  CHECK(read_file(dir / "m.csv") == metrics_header() + "\nSIoT,0.90,17,full,81.2346,80.5000\nSIoT,0.90,mean,full,81.2346,80.5000\n");
}

TEST_CASE("runs are reproducible and sweeps of one value equal a run") {
  TempDir dir;
  ExperimentConfig c = small_siot(dir);
  c.repeats = 2;
  auto a = run(c);
  ExperimentConfig c2 = c;
  c2.output_dir = dir / "out2";
  c2.workers = 2;
  auto b = run(c2);
  CHECK(read_file(dir / "out" / "metrics.csv") == read_file(dir / "out2" / "metrics.csv"));
  CHECK(read_file(dir / "out" / "metrics.csv").find(",mean,") != std::string::npos);
  REQUIRE(a.size() == 1);
  CHECK(a[0].cells.size() == 2);
  ExperimentConfig c3 = c;
  c3.output_dir = dir / "out3";
  auto s = sweep(c3, SweepParam::PprK, {static_cast<double>(c.ppr.k)});
  REQUIRE(s.size() == 1);
  CHECK(s[0].mean.accuracy == a[0].mean.accuracy);
  CHECK(s[0].mean.f1 == a[0].mean.f1);
  CHECK(std::filesystem::exists(dir / "out" / "traces"));
}

TEST_CASE("checkpoints evaluate to the final metrics") {
  TempDir dir;
  ExperimentConfig c = small_siot(dir);
  PreparedData data = prepare_data(c);
  CHECK(data.transe.has_value());
  CHECK(data.graph.num_users() <= 40);
  auto cell = run_cell(data, c, 5, "full", {dir / "m.ckpt"});
  Metrics m = evaluate_checkpoint(data, c, 5, dir / "m.ckpt");
  CHECK(m.accuracy == doctest::Approx(cell.train.final.accuracy));
  CHECK(m.f1 == doctest::Approx(cell.train.final.f1));
}

TEST_CASE("missing triples are a data error") {
  TempDir dir;
  ExperimentConfig c = small_siot(dir);
  std::filesystem::remove(dir / "data" / "triples.csv");
  CHECK_THROWS_AS(prepare_data(c), DataError);
}

TEST_CASE("shipped configs parse and validate") {
  const std::filesystem::path root = KGTRUST_SOURCE_DIR;
  for (const char* name : {"filmtrust.json", "siot_fixture.json"}) {
    INFO(name);
    ExperimentConfig c = load_config(root / "configs" / name);
    CHECK_NOTHROW(validate(c));
    CHECK(c.repeats == 10);
  }
  ExperimentConfig s = load_config(root / "configs" / "siot_fixture.json");
  CHECK(s.triples.enabled);
  CHECK(s.predictor_hidden == std::vector<int>{32});
}
