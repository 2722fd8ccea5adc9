#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgtrust/embed.hpp"
#include "kgtrust/graph.hpp"
#include "kgtrust/ppr.hpp"
#include "kgtrust/train.hpp"

namespace kgtrust {

/// Invalid or inapplicable configuration; raised before any compute.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetKind { FilmTrust, Siot };

struct ExperimentConfig {
  struct Dataset {
    DatasetKind kind = DatasetKind::FilmTrust;
    std::filesystem::path path;  // directory
    std::string name;            // label in metrics.csv; defaults to the kind
    int min_user_comments = 15;
    int min_object_comments = 10;
    std::filesystem::path user_vectors;  // optional precomputed user vectors
  } dataset;

  double train_ratio = 0.9;
  std::uint64_t seed = 1;
  int repeats = 1;  // number of derived seeds
  int epochs = 200;
  int workers = 1;
  std::filesystem::path output_dir = "out";
  bool save_checkpoints = false;

  int input_dim = 64;
  int latent_dim = 64;
  int layers = 2;
  std::vector<int> predictor_hidden;
  double dropout = 0.0;
  std::optional<bool> trainable_inputs;  // unset: FilmTrust yes, SIoT no

  struct Ppr {
    bool enabled = true;
    int k = 20;
    double lambda = 0.15;
    double epsilon = 1e-6;
    PprTransition transition = PprTransition::RandomWalk;
    bool weighted = false;
  } ppr;

  struct Roles {
    bool trustor_enabled = true;
    bool trustee_enabled = true;
  } roles;

  FusionMode fusion = FusionMode::Gate;

  struct Triples {
    bool enabled = false;
    std::filesystem::path path;  // defaults to <dataset>/triples.csv
    bool full_kg = false;
    int epochs = 100;
    double margin = 1.0;
    double learning_rate = 0.01;
  } triples;

  struct Doc {
    int epochs = 10;
    int negatives = 5;
    int min_count = 2;
    double learning_rate = 0.025;
  } doc;

  AdamOptions optimizer;

  std::string dataset_label() const;
  bool resolved_trainable_inputs() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Raises ConfigError on out-of-range values.
void validate(const ExperimentConfig& config);

/// Dotted names of the fields that differ between two configs.
std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b);

enum class Variant { WoTriples, WoPpr, WoTrustee, WoTrustor, Concat };
const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// The base config with exactly one field changed. Inapplicable variants
/// raise ConfigError.
ExperimentConfig apply_variant(const ExperimentConfig& base, Variant v);

enum class SweepParam { PprK, LatentDim, TrainRatio };
SweepParam parse_sweep_param(const std::string& name);
const char* sweep_param_name(SweepParam p);
ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepParam p, double value);

/// Dataset state shared by every cell of an experiment: the loaded graph,
/// user features and the frozen TransE model, all computed once.
struct PreparedData {
  DatasetKind kind = DatasetKind::FilmTrust;
  HeteroGraph graph;  // all trust edges; cells rebuild from their train split
  std::vector<TrustSample> positives;
  std::optional<EmbeddingTable> user_features;
  std::vector<std::optional<int>> alignment;  // by object index
  std::optional<TransEModel> transe;
  LoadStats stats;
};

PreparedData prepare_data(const ExperimentConfig& config);

/// One (config, seed) cell.
struct CellResult {
  std::string variant;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  TrainResult train;
};

struct CellOptions {
  std::filesystem::path checkpoint_out;  // empty: no checkpoint
};

CellResult run_cell(const PreparedData& data, const ExperimentConfig& config, std::uint64_t seed,
                    const std::string& variant, const CellOptions& options = {});

/// Evaluates a saved checkpoint on the test split of `seed`.
Metrics evaluate_checkpoint(const PreparedData& data, const ExperimentConfig& config,
                            std::uint64_t seed, const std::filesystem::path& checkpoint);

struct MetricsRow {
  std::string dataset;
  double ratio = 0.0;
  std::string seed;  // a seed, or "mean"
  std::string variant;
  double accuracy = 0.0;  // percent
  double f1 = 0.0;        // percent
};

std::string metrics_header();
std::string format_row(const MetricsRow& row);
/// Appends rows, writing the header only when the file is new or empty.
void append_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
void write_trace(const std::filesystem::path& path, const std::vector<EpochRecord>& trace);

struct ExperimentJob {
  ExperimentConfig config;
  std::string variant;
};

struct JobSummary {
  std::string variant;
  double ratio = 0.0;
  std::vector<CellResult> cells;
  Metrics mean;
};

/// Runs every job over the derived seeds (cells in parallel up to
/// config.workers), writes metrics.csv, traces and checkpoints under the
/// first job's output_dir, and returns per-job summaries in job order.
std::vector<JobSummary> run_jobs(const PreparedData& data, const std::vector<ExperimentJob>& jobs);

std::vector<JobSummary> run(const ExperimentConfig& config);
std::vector<JobSummary> ablate(const ExperimentConfig& config, const std::vector<Variant>& variants,
                               bool include_base = true);
std::vector<JobSummary> sweep(const ExperimentConfig& config, SweepParam param,
                              const std::vector<double>& values);

}  // namespace kgtrust
