#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lranker/feature_store.hpp"
#include "lranker/objectives.hpp"
#include "lranker/optim.hpp"
#include "lranker/ranker.hpp"

namespace lranker {

inline constexpr std::uint64_t kDefaultSeed = 20250101;
inline constexpr std::size_t kDefaultGroupSize = 10;
inline constexpr double kDefaultValidationFraction = 0.1;

/// Full training recipe. Defaults follow the reference hyperparameter table:
/// batch 256, one epoch, AdamW(0.9, 0.999) at 1e-4, weight decay 1e-4,
/// constant schedule, d_proj 64, K = 10.
struct TrainConfig {
  RankerKind ranker = RankerKind::listwise;
  RelevanceKind relevance = RelevanceKind::cosine;
  LossKind loss = LossKind::classification;
  Variant variant = Variant::full;
  std::size_t blocks = 1;
  std::size_t d_proj = kDefaultProjDim;
  std::size_t d_hidden = kDefaultHiddenDim;
  bool logit_scale = false;

  /// Groups (listwise) or pairs (pointwise) per optimizer step.
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  OptimizerKind optimizer = OptimizerKind::adamw;
  double lr = 1e-4;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  Schedule schedule = Schedule::constant;

  std::size_t group_size = kDefaultGroupSize;
  std::size_t groups_per_query = kDefaultGroupsPerQuery;
  std::uint64_t seed = kDefaultSeed;
  /// Worker threads for the per-batch fan-out. Results are deterministic
  /// for a fixed (seed, threads) pair.
  std::size_t threads = 1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate_config(const TrainConfig& config);
RankerShape shape_for(const TrainConfig& config, std::size_t d_model);

std::string config_to_json(const TrainConfig& config);
/// Overlays the keys present in `json` onto `base`; unknown keys are rejected.
TrainConfig config_from_json(std::string_view json, TrainConfig base = {});

struct BatchLog {
  std::size_t step = 0;
  std::size_t batch_size = 0;
  double loss = 0.0;
  double lr = 0.0;
  /// False when a non-finite gradient aborted this step.
  bool applied = true;
};

struct TrainLog {
  std::vector<BatchLog> batches;
  std::size_t groups = 0;
  std::size_t units = 0;
  std::size_t skipped_records = 0;
  std::size_t short_queries = 0;
  std::size_t aborted_steps = 0;
  double seconds = 0.0;
};

struct TrainResult {
  Ranker ranker;
  TrainLog log;
};

/// One or more epochs over seeded-shuffled groups (listwise) or the pairs
/// flattened out of them (pointwise). The last partial batch is kept.
/// `initial` overrides the seeded initialization. Throws TrainingError when
/// no groups survive sampling.
TrainResult train(const TrainConfig& config, std::span<const FeatureRecord> records, const DatasetMeta& meta,
                  const Ranker* initial = nullptr);

struct QuerySplit {
  std::vector<FeatureRecord> train;
  std::vector<FeatureRecord> validation;
};

/// Splits whole queries (never groups) so no query leaks across the split.
QuerySplit split_by_query(std::span<const FeatureRecord> records, double validation_fraction, std::uint64_t seed);

struct OptimizerChoice {
  OptimizerKind kind = OptimizerKind::adamw;
  double lr = 1e-4;
  double momentum = 0.0;

  friend bool operator==(const OptimizerChoice&, const OptimizerChoice&) = default;
};

struct GridSpace {
  std::vector<std::size_t> batch_sizes;
  std::vector<OptimizerChoice> optimizers;
  std::vector<Schedule> schedules;
};

/// Batch {256, 1024} × {SGD lr {0.05, 0.1, 0.5, 1.0} × momentum {0, 0.9},
/// AdamW lr {1e-5, 1e-4}} × schedule {constant, cosine}: 40 points.
GridSpace default_grid();
/// Row-major enumeration: batch size, then optimizer, then schedule.
std::vector<TrainConfig> enumerate_grid(const GridSpace& space, const TrainConfig& base);

struct GridPoint {
  TrainConfig config;
  double accuracy = 0.0;
  bool failed = false;
  std::string error;
  double seconds = 0.0;
};

struct GridSearchReport {
  std::vector<GridPoint> points;
  std::optional<std::size_t> best_index;
  std::size_t train_queries = 0;
  std::size_t validation_queries = 0;
  std::size_t validation_groups = 0;
  std::string protocol;
};

/// Trains one ranker per grid point and scores it on a held-out query split.
/// Failing points are recorded and the search continues.
GridSearchReport grid_search(const GridSpace& space, const TrainConfig& base, std::span<const FeatureRecord> records,
                             const DatasetMeta& meta, double validation_fraction = kDefaultValidationFraction);

std::string grid_report_to_json(const GridSearchReport& report);
std::string grid_report_to_text(const GridSearchReport& report);

}  // namespace lranker
