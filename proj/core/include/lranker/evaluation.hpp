#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lranker/feature_store.hpp"
#include "lranker/ranker.hpp"
#include "lranker/training.hpp"

namespace lranker {

/// Regression success tolerance: the selected label must be within this of the group maximum.
inline constexpr double kRegressionTieTolerance = 1e-9;
inline constexpr std::size_t kDefaultCurveTrials = 8;

/// Whether candidate `selected` counts as a correct pick for the group.
bool is_success(const CandidateGroup& group, std::size_t selected, LabelMode mode);

double selection_accuracy(const Ranker& ranker, std::span<const CandidateGroup> groups, LabelMode mode,
                          std::size_t threads = 1);
/// Fraction of groups with at least one positive. Regression groups always
/// have a maximum, so the result is 1.0 and `caveat` is set.
double oracle_accuracy(std::span<const CandidateGroup> groups, LabelMode mode, bool* caveat = nullptr);
double first_sample_accuracy(std::span<const CandidateGroup> groups, LabelMode mode);
/// Expected accuracy of a uniformly random pick (exact, not sampled).
double random_accuracy(std::span<const CandidateGroup> groups, LabelMode mode);

struct GroupOutcome {
  std::uint64_t query_id = 0;
  std::size_t selected = 0;
  bool success = false;
  bool oracle = false;
  bool first_sample = false;
};

struct EvalReport {
  std::string dataset_id;
  std::string ranker_id;
  LabelMode mode = LabelMode::classification;
  std::size_t k = 0;
  std::size_t trials = 0;  // groups evaluated
  std::size_t queries = 0;
  double selection_accuracy = 0.0;
  double oracle_accuracy = 0.0;
  double first_sample_accuracy = 0.0;
  double random_accuracy = 0.0;
  bool oracle_caveat = false;
  std::optional<std::size_t> parameter_count;
  std::string variant;
  std::string protocol;
  std::vector<GroupOutcome> outcomes;
};

struct EvalContext {
  std::string dataset_id;
  std::string ranker_id;
  std::string protocol;
};

/// Scores every group and fills all accuracy fields. Outcomes keep group order.
EvalReport evaluate(const Ranker& ranker, std::span<const CandidateGroup> groups, LabelMode mode,
                    const EvalContext& context = {}, std::size_t threads = 1);

std::string report_to_json(const EvalReport& report, bool include_outcomes = true);
std::string report_to_text(const EvalReport& report);

struct CurvePoint {
  std::size_t k = 0;
  double mean = 0.0;
  /// Population standard deviation of per-query accuracy.
  double std = 0.0;
  double oracle_mean = 0.0;
  std::size_t queries = 0;
};

struct ScalingCurve {
  std::vector<CurvePoint> points;
  std::vector<std::size_t> skipped_k;
  std::string protocol;
};

/// Best-of-K accuracy as a function of K. For each query and trial one
/// seeded permutation of the response pool is drawn and its first K entries
/// form the K-group, so groups are nested across K. Groups are not filtered.
/// A K larger than some query's pool is skipped for every query.
ScalingCurve scaling_curve(const Ranker& ranker, std::span<const FeatureRecord> records, LabelMode mode,
                           std::span<const std::size_t> k_values, std::size_t trials_per_k, std::uint64_t seed,
                           std::size_t threads = 1);

/// "K,mean,std" rows with a '#' protocol comment line.
std::string curve_to_csv(const ScalingCurve& curve);

/// Trains the given architecture ablation on a query split and evaluates it
/// on the held-out queries. The report carries the variant's parameter count.
EvalReport ablation_run(Variant variant, TrainConfig config, std::span<const FeatureRecord> records,
                        const DatasetMeta& meta, double validation_fraction = kDefaultValidationFraction);

}  // namespace lranker
