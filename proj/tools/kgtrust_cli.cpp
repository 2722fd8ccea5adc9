// Command-line driver: run, ablate, sweep, gradcheck, fixtures.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgtrust/experiment.hpp"
#include "kgtrust/fixtures.hpp"
#include "kgtrust/seed.hpp"

using namespace kgtrust;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kNumerical = 3 };

// Every experiment option; unset ones leave the config file value alone.
struct Overrides {
  std::string config;
  std::string dataset;
  std::string kind;
  std::optional<double> ratio;
  std::optional<std::uint64_t> seed;
  std::optional<int> min_user_comments, min_object_comments;
  std::optional<int> repeats, epochs, workers, input_dim, latent_dim, layers;
  std::string out;
  std::optional<int> ppr_k;
  std::optional<double> ppr_lambda, ppr_epsilon;
  bool no_ppr = false, ppr_symmetric = false, ppr_weighted = false;
  std::string fusion;
  bool no_trustor = false, no_trustee = false;
  bool triples = false, no_triples = false, full_kg = false;
  std::string triples_path, user_vectors;
  bool checkpoints = false;
  std::optional<double> lr, weight_decay, dropout;
  std::vector<int> hidden;
  std::string trainable_inputs;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config, "JSON experiment config");
    app.add_option("--dataset", dataset, "dataset directory");
    app.add_option("--kind", kind, "filmtrust or siot")->check(CLI::IsMember({"filmtrust", "siot"}));
    app.add_option("--ratio", ratio, "train ratio");
    app.add_option("--min-user-comments", min_user_comments, "users need more comments than this");
    app.add_option("--min-object-comments", min_object_comments, "objects need more comments than this");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--repeats", repeats, "number of derived seeds");
    app.add_option("--epochs", epochs, "training epochs");
    app.add_option("--workers", workers, "parallel cells");
    app.add_option("--out", out, "output directory");
    app.add_option("--input-dim", input_dim, "initial embedding dim");
    app.add_option("--latent-dim", latent_dim, "shared latent dim");
    app.add_option("--layers", layers, "convolution layers per role");
    app.add_option("--ppr-k", ppr_k, "PPR neighbors per user");
    app.add_option("--ppr-lambda", ppr_lambda, "PPR reset probability");
    app.add_option("--ppr-epsilon", ppr_epsilon, "push threshold");
    app.add_flag("--no-ppr", no_ppr, "disable PPR augmentation");
    app.add_flag("--ppr-symmetric", ppr_symmetric, "symmetric-normalized push transitions");
    app.add_flag("--ppr-weighted", ppr_weighted, "weight augmented edges by their PPR score");
    app.add_option("--fusion", fusion, "gate or concat")->check(CLI::IsMember({"gate", "concat"}));
    app.add_flag("--no-trustor", no_trustor, "disable the trustor encoder");
    app.add_flag("--no-trustee", no_trustee, "disable the trustee encoder");
    app.add_flag("--triples", triples, "initialize objects from knowledge triples");
    app.add_flag("--no-triples", no_triples, "random object initialization");
    app.add_option("--triples-path", triples_path, "triples.csv location");
    app.add_flag("--full-kg", full_kg, "train TransE on every triple, not only object heads");
    app.add_option("--user-vectors", user_vectors, "precomputed user vectors");
    app.add_flag("--checkpoints", checkpoints, "save a checkpoint per cell");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--weight-decay", weight_decay, "L2 weight decay");
    app.add_option("--dropout", dropout, "dropout on layer inputs");
    app.add_option("--hidden", hidden, "predictor hidden widths");
    app.add_option("--trainable-inputs", trainable_inputs, "auto, true or false")
        ->check(CLI::IsMember({"auto", "true", "false"}));
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (!dataset.empty()) c.dataset.path = dataset;
    if (!kind.empty()) c.dataset.kind = kind == "siot" ? DatasetKind::Siot : DatasetKind::FilmTrust;
    if (ratio) c.train_ratio = *ratio;
    if (min_user_comments) c.dataset.min_user_comments = *min_user_comments;
    if (min_object_comments) c.dataset.min_object_comments = *min_object_comments;
    if (seed) c.seed = *seed;
    if (repeats) c.repeats = *repeats;
    if (epochs) c.epochs = *epochs;
    if (workers) c.workers = *workers;
    if (!out.empty()) c.output_dir = out;
    if (input_dim) c.input_dim = *input_dim;
    if (latent_dim) c.latent_dim = *latent_dim;
    if (layers) c.layers = *layers;
    if (ppr_k) c.ppr.k = *ppr_k;
    if (ppr_lambda) c.ppr.lambda = *ppr_lambda;
    if (ppr_epsilon) c.ppr.epsilon = *ppr_epsilon;
    if (no_ppr) c.ppr.enabled = false;
    if (ppr_symmetric) c.ppr.transition = PprTransition::Symmetric;
    if (ppr_weighted) c.ppr.weighted = true;
    if (!fusion.empty()) c.fusion = fusion == "gate" ? FusionMode::Gate : FusionMode::Concat;
    if (no_trustor) c.roles.trustor_enabled = false;
    if (no_trustee) c.roles.trustee_enabled = false;
    if (triples) c.triples.enabled = true;
    if (no_triples) c.triples.enabled = false;
    if (!triples_path.empty()) c.triples.path = triples_path;
    if (full_kg) c.triples.full_kg = true;
    if (!user_vectors.empty()) c.dataset.user_vectors = user_vectors;
    if (checkpoints) c.save_checkpoints = true;
    if (lr) c.optimizer.learning_rate = *lr;
    if (weight_decay) c.optimizer.weight_decay = *weight_decay;
    if (dropout) c.dropout = *dropout;
    if (!hidden.empty()) c.predictor_hidden = hidden;
    if (trainable_inputs == "auto") c.trainable_inputs.reset();
    if (trainable_inputs == "true") c.trainable_inputs = true;
    if (trainable_inputs == "false") c.trainable_inputs = false;
    validate(c);
    return c;
  }
};

void print(const std::vector<JobSummary>& summaries) {
  for (const auto& s : summaries) {
    std::printf("%-16s ratio %.2f  accuracy %.2f  f1 %.2f  (%zu seeds)\n", s.variant.c_str(), s.ratio,
                100.0 * s.mean.accuracy, 100.0 * s.mean.f1, s.cells.size());
  }
}

int gradcheck(std::uint64_t seed, double tolerance, int dim) {
  const HeteroGraph graph = tiny_graph();
  const GraphView tv = build_view(graph, {}, Role::Trustor);
  const GraphView ev = build_view(graph, {}, Role::Trustee);
  const ViewOperators to = prepare_view(tv);
  const ViewOperators eo = prepare_view(ev);
  const EmbeddingTable users = random_unit_table(graph.num_users(), dim, mix_seed(seed, 1));
  const EmbeddingTable objects = random_unit_table(graph.num_objects(), dim, mix_seed(seed, 2));
  ModelConfig mc;
  mc.user_input_dim = mc.object_input_dim = mc.latent_dim = dim;
  mc.predictor_hidden = {dim};
  mc.trainable_inputs = true;
  ModelParams params = init_model(mc, seed, &users, &objects);
  params.gate->raw_gate.setRandom();
  PipelineInputs in{&graph, &to, &eo, &users, &objects};
  const GradCheckReport report = grad_check(in, params, tiny_samples(), tolerance);
  for (const auto& g : report.groups) {
    std::printf("%-16s max relative error %.3e over %zu entries\n", group_name(g.group), g.max_relative_error,
                g.checked);
  }
  std::printf("gradcheck %s (max %.3e, tolerance %.1e)\n", report.passed ? "passed" : "FAILED",
              report.max_relative_error, tolerance);
  return report.passed ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust evaluation over heterogeneous user/object graphs"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run_cmd = app.add_subcommand("run", "train and evaluate over the derived seeds");
  run_opts.attach(*run_cmd);
  std::string eval_checkpoint;
  run_cmd->add_option("--eval-checkpoint", eval_checkpoint, "only evaluate this checkpoint");

  Overrides ablate_opts;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the base config and its variants");
  ablate_opts.attach(*ablate_cmd);
  std::vector<std::string> variants;
  ablate_cmd->add_option("--variants", variants, "woTriples woPPR woTrustee woTrustor concat");

  Overrides sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per parameter value");
  sweep_opts.attach(*sweep_cmd);
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "ppr_k, latent_dim or train_ratio")->required();
  sweep_cmd->add_option("--values", sweep_values, "values to sweep")->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check on a tiny fixture");
  std::uint64_t grad_seed = 1;
  double grad_tol = 1e-4;
  int grad_dim = 4;
  grad_cmd->add_option("--seed", grad_seed, "parameter seed");
  grad_cmd->add_option("--tolerance", grad_tol, "max relative error");
  grad_cmd->add_option("--dim", grad_dim, "embedding dim");

  auto* fix_cmd = app.add_subcommand("fixtures", "write a synthetic dataset");
  std::string fix_kind = "siot";
  std::string fix_out;
  std::uint64_t fix_seed = 7;
  std::optional<int> fix_users, fix_objects, fix_communities, fix_comments, fix_trust_out;
  std::optional<double> fix_trust_keep, fix_comment_affinity, fix_word_affinity;
  fix_cmd->add_option("--kind", fix_kind, "siot or filmtrust")->check(CLI::IsMember({"siot", "filmtrust"}));
  fix_cmd->add_option("--out", fix_out, "output directory")->required();
  fix_cmd->add_option("--seed", fix_seed, "generator seed");
  fix_cmd->add_option("--users", fix_users, "number of users");
  fix_cmd->add_option("--objects", fix_objects, "number of objects or items");
  fix_cmd->add_option("--communities", fix_communities, "planted communities (siot)");
  fix_cmd->add_option("--comments-per-user", fix_comments, "comments or ratings per user");
  fix_cmd->add_option("--trust-out", fix_trust_out, "ring successors each user may trust");
  fix_cmd->add_option("--trust-keep", fix_trust_keep, "chance each ring edge is kept");
  fix_cmd->add_option("--comment-affinity", fix_comment_affinity, "chance a comment stays in the community (siot)");
  fix_cmd->add_option("--word-affinity", fix_word_affinity, "chance a word is community-specific (siot)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run_cmd) {
      const ExperimentConfig c = run_opts.build();
      if (!eval_checkpoint.empty()) {
        const PreparedData data = prepare_data(c);
        const Metrics m = evaluate_checkpoint(data, c, derive_seeds(c.seed, 1).front(), eval_checkpoint);
        std::printf("checkpoint accuracy %.2f  f1 %.2f\n", 100.0 * m.accuracy, 100.0 * m.f1);
        return kOk;
      }
      print(run(c));
    } else if (*ablate_cmd) {
      const ExperimentConfig c = ablate_opts.build();
      std::vector<Variant> list;
      for (const auto& name : variants) list.push_back(parse_variant(name));
      if (list.empty()) {
        if (c.triples.enabled) list.push_back(Variant::WoTriples);
        for (Variant v : {Variant::WoPpr, Variant::WoTrustee, Variant::WoTrustor, Variant::Concat}) list.push_back(v);
      }
      print(ablate(c, list));
    } else if (*sweep_cmd) {
      const ExperimentConfig c = sweep_opts.build();
      print(sweep(c, parse_sweep_param(sweep_param), sweep_values));
    } else if (*grad_cmd) {
      return gradcheck(grad_seed, grad_tol, grad_dim);
    } else if (*fix_cmd) {
      if (fix_kind == "siot") {
        SiotFixtureOptions o;
        o.seed = fix_seed;
        if (fix_users) o.users = *fix_users;
        if (fix_objects) o.objects = *fix_objects;
        if (fix_communities) o.communities = *fix_communities;
        if (fix_comments) o.comments_per_user = *fix_comments;
        if (fix_trust_out) o.trust_out = *fix_trust_out;
        if (fix_trust_keep) o.trust_keep = *fix_trust_keep;
        if (fix_comment_affinity) o.comment_affinity = *fix_comment_affinity;
        if (fix_word_affinity) o.word_affinity = *fix_word_affinity;
        write_siot_fixture(fix_out, make_siot_fixture(o));
      } else {
        FilmTrustFixtureOptions o;
        o.seed = fix_seed;
        if (fix_users) o.users = *fix_users;
        if (fix_objects) o.items = *fix_objects;
        if (fix_comments) o.ratings_per_user = *fix_comments;
        if (fix_trust_out) o.trust_out = *fix_trust_out;
        if (fix_trust_keep) o.trust_keep = *fix_trust_keep;
        write_filmtrust_fixture(fix_out, o);
      }
      std::printf("wrote %s fixture to %s\n", fix_kind.c_str(), fix_out.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  }
  return kOk;
}
