#include "lranker/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lranker/errors.hpp"
#include "parallel.hpp"

namespace lranker {
namespace {

using nlohmann::json;

constexpr std::uint64_t kCurveStream = 6;
constexpr std::uint64_t kAblationStream = 7;

void require_groups(std::span<const CandidateGroup> groups, const char* who) {
  if (groups.empty()) throw ContractViolation(std::string(who) + ": no groups to evaluate");
  for (const auto& g : groups) {
    if (g.candidates.empty()) {
      throw ContractViolation(std::string(who) + ": group for query_id=" + std::to_string(g.query_id) + " is empty");
    }
  }
}

void check_dims(const Ranker& ranker, std::span<const CandidateGroup> groups) {
  const std::size_t d = ranker.shape().d_model;
  for (const auto& g : groups) {
    if (g.instruction.size() != d) {
      throw ContractViolation("dimension mismatch: ranker expects d_model=" + std::to_string(d) +
                              ", data has d_model=" + std::to_string(g.instruction.size()));
    }
  }
}

std::vector<std::size_t> select_all(const Ranker& ranker, std::span<const CandidateGroup> groups,
                                    std::size_t threads) {
  std::vector<std::size_t> selected(groups.size());
  detail::parallel_chunks(groups.size(), std::max<std::size_t>(threads, 1),
                          [&](std::size_t, std::size_t lo, std::size_t hi) {
                            for (std::size_t i = lo; i < hi; ++i) selected[i] = select_best(ranker.score(groups[i]));
                          });
  return selected;
}

double group_max(const CandidateGroup& g) {
  double m = -INFINITY;
  for (const auto& c : g.candidates) m = std::max(m, static_cast<double>(c.label));
  return m;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string curve_protocol(std::size_t trials, std::uint64_t seed) {
  return "per query and trial one seeded permutation of the full response pool is drawn (without replacement); "
         "the K-group is its first K entries, so groups are nested across K; groups are unfiltered; " +
         std::to_string(trials) + " trials per query; std across per-query means; seed " + std::to_string(seed);
}

}  // namespace

bool is_success(const CandidateGroup& group, std::size_t selected, LabelMode mode) {
  if (selected >= group.size()) {
    throw ContractViolation("is_success: index " + std::to_string(selected) + " outside a group of " +
                            std::to_string(group.size()));
  }
  const double label = group.candidates[selected].label;
  if (mode == LabelMode::classification) return label >= 0.5;
  return label >= group_max(group) - kRegressionTieTolerance;
}

double selection_accuracy(const Ranker& ranker, std::span<const CandidateGroup> groups, LabelMode mode,
                          std::size_t threads) {
  require_groups(groups, "selection_accuracy");
  check_dims(ranker, groups);
  const auto selected = select_all(ranker, groups, threads);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) hits += is_success(groups[i], selected[i], mode) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(groups.size());
}

double oracle_accuracy(std::span<const CandidateGroup> groups, LabelMode mode, bool* caveat) {
  require_groups(groups, "oracle_accuracy");
  if (caveat != nullptr) *caveat = mode == LabelMode::regression;
  if (mode == LabelMode::regression) return 1.0;
  const auto hits = std::count_if(groups.begin(), groups.end(), [](const CandidateGroup& g) { return g.has_positive(); });
  return static_cast<double>(hits) / static_cast<double>(groups.size());
}

double first_sample_accuracy(std::span<const CandidateGroup> groups, LabelMode mode) {
  require_groups(groups, "first_sample_accuracy");
  std::size_t hits = 0;
  for (const auto& g : groups) hits += is_success(g, 0, mode) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(groups.size());
}

double random_accuracy(std::span<const CandidateGroup> groups, LabelMode mode) {
  require_groups(groups, "random_accuracy");
  double total = 0.0;
  for (const auto& g : groups) {
    std::size_t good = 0;
    for (std::size_t k = 0; k < g.size(); ++k) good += is_success(g, k, mode) ? 1 : 0;
    total += static_cast<double>(good) / static_cast<double>(g.size());
  }
  return total / static_cast<double>(groups.size());
}

EvalReport evaluate(const Ranker& ranker, std::span<const CandidateGroup> groups, LabelMode mode,
                    const EvalContext& context, std::size_t threads) {
  require_groups(groups, "evaluate");
  check_dims(ranker, groups);

  EvalReport rep;
  rep.dataset_id = context.dataset_id;
  rep.ranker_id = context.ranker_id;
  rep.protocol = context.protocol;
  rep.mode = mode;
  rep.k = groups.front().size();
  for (const auto& g : groups) {
    if (g.size() != rep.k) rep.k = 0;  // mixed sizes
  }
  rep.trials = groups.size();
  rep.parameter_count = ranker.parameter_count();
  rep.variant = to_string(ranker.shape().variant);

  std::set<std::uint64_t> queries;
  const auto selected = select_all(ranker, groups, threads);
  std::size_t hits = 0, first = 0;
  rep.outcomes.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    queries.insert(g.query_id);
    GroupOutcome o;
    o.query_id = g.query_id;
    o.selected = selected[i];
    o.success = is_success(g, selected[i], mode);
    o.oracle = mode == LabelMode::regression || g.has_positive();
    o.first_sample = is_success(g, 0, mode);
    hits += o.success ? 1 : 0;
    first += o.first_sample ? 1 : 0;
    rep.outcomes.push_back(o);
  }
  const double n = static_cast<double>(groups.size());
  rep.queries = queries.size();
  rep.selection_accuracy = static_cast<double>(hits) / n;
  rep.first_sample_accuracy = static_cast<double>(first) / n;
  rep.oracle_accuracy = oracle_accuracy(groups, mode, &rep.oracle_caveat);
  rep.random_accuracy = random_accuracy(groups, mode);
  return rep;
}

std::string report_to_json(const EvalReport& r, bool include_outcomes) {
  json j;
  j["dataset_id"] = r.dataset_id;
  j["ranker_id"] = r.ranker_id;
  j["label_mode"] = to_string(r.mode);
  j["k"] = r.k;
  j["trials"] = r.trials;
  j["queries"] = r.queries;
  j["selection_accuracy"] = r.selection_accuracy;
  j["oracle_accuracy"] = r.oracle_accuracy;
  j["first_sample_accuracy"] = r.first_sample_accuracy;
  j["random_accuracy"] = r.random_accuracy;
  j["oracle_caveat"] = r.oracle_caveat;
  j["parameter_count"] = r.parameter_count ? json(*r.parameter_count) : json(nullptr);
  j["variant"] = r.variant;
  j["protocol"] = r.protocol;
  if (include_outcomes) {
    j["outcomes"] = json::array();
    for (const auto& o : r.outcomes) {
      j["outcomes"].push_back({{"query_id", o.query_id},
                               {"selected", o.selected},
                               {"success", o.success},
                               {"oracle", o.oracle},
                               {"first_sample", o.first_sample}});
    }
  }
  return j.dump(2);
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  if (!r.protocol.empty()) os << "# " << r.protocol << "\n";
  auto row = [&](const std::string& key, const std::string& value) {
    os << std::left << std::setw(24) << key << value << "\n";
  };
  row("dataset", r.dataset_id.empty() ? "-" : r.dataset_id);
  row("ranker", r.ranker_id.empty() ? "-" : r.ranker_id);
  row("variant", r.variant.empty() ? "-" : r.variant);
  if (r.parameter_count) row("parameters", std::to_string(*r.parameter_count));
  row("label mode", to_string(r.mode));
  row("K", r.k == 0 ? std::string("mixed") : std::to_string(r.k));
  row("groups", std::to_string(r.trials));
  row("queries", std::to_string(r.queries));
  row("selection accuracy", fixed(r.selection_accuracy, 4));
  row("oracle accuracy", fixed(r.oracle_accuracy, 4) + (r.oracle_caveat ? "  (regression: always 1)" : ""));
  row("first-sample accuracy", fixed(r.first_sample_accuracy, 4));
  row("random accuracy", fixed(r.random_accuracy, 4));
  return os.str();
}

ScalingCurve scaling_curve(const Ranker& ranker, std::span<const FeatureRecord> records, LabelMode mode,
                           std::span<const std::size_t> k_values, std::size_t trials_per_k, std::uint64_t seed,
                           std::size_t threads) {
  if (records.empty()) throw ContractViolation("scaling_curve: no records");
  if (trials_per_k < 1) throw ContractViolation("scaling_curve: trials_per_k must be >= 1");
  for (const auto& r : records) {
    if (r.instruction.size() != ranker.shape().d_model) {
      throw ContractViolation("dimension mismatch: ranker expects d_model=" + std::to_string(ranker.shape().d_model) +
                              ", data has d_model=" + std::to_string(r.instruction.size()));
    }
  }
  std::size_t min_pool = records.front().responses.size();
  for (const auto& r : records) min_pool = std::min(min_pool, r.responses.size());

  // perms[q][t] is the permutation shared by every K for query q, trial t.
  const std::uint64_t base = derive_seed(seed, kCurveStream);
  std::vector<std::vector<std::vector<std::size_t>>> perms(records.size());
  for (std::size_t q = 0; q < records.size(); ++q) {
    std::mt19937_64 rng(derive_seed(base, records[q].query_id));
    const std::size_t m = records[q].responses.size();
    perms[q].resize(trials_per_k);
    for (auto& p : perms[q]) {
      p.resize(m);
      std::iota(p.begin(), p.end(), std::size_t{0});
      for (std::size_t i = m; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(p[i - 1], p[pick(rng)]);
      }
    }
  }

  ScalingCurve curve;
  curve.protocol = curve_protocol(trials_per_k, seed);
  for (std::size_t k : k_values) {
    if (k < 1) throw ContractViolation("scaling_curve: K must be >= 1");
    if (k > min_pool) {
      curve.skipped_k.push_back(k);
      continue;
    }
    std::vector<double> per_query(records.size()), oracle(records.size());
    detail::parallel_chunks(records.size(), std::max<std::size_t>(threads, 1),
                            [&](std::size_t, std::size_t lo, std::size_t hi) {
                              for (std::size_t q = lo; q < hi; ++q) {
                                std::size_t hits = 0, reach = 0;
                                for (const auto& p : perms[q]) {
                                  CandidateGroup g = make_group(records[q], std::span(p.data(), k));
                                  hits += is_success(g, select_best(ranker.score(g)), mode) ? 1 : 0;
                                  reach += (mode == LabelMode::regression || g.has_positive()) ? 1 : 0;
                                }
                                per_query[q] = static_cast<double>(hits) / static_cast<double>(trials_per_k);
                                oracle[q] = static_cast<double>(reach) / static_cast<double>(trials_per_k);
                              }
                            });
    const double n = static_cast<double>(records.size());
    CurvePoint pt;
    pt.k = k;
    pt.queries = records.size();
    pt.mean = std::accumulate(per_query.begin(), per_query.end(), 0.0) / n;
    pt.oracle_mean = std::accumulate(oracle.begin(), oracle.end(), 0.0) / n;
    double var = 0.0;
    for (double a : per_query) var += (a - pt.mean) * (a - pt.mean);
    pt.std = std::sqrt(var / n);
    curve.points.push_back(pt);
  }
  return curve;
}

std::string curve_to_csv(const ScalingCurve& curve) {
  std::ostringstream os;
  os << "# " << curve.protocol << "\n";
  if (!curve.skipped_k.empty()) {
    os << "# skipped K (larger than some response pool):";
    for (auto k : curve.skipped_k) os << " " << k;
    os << "\n";
  }
  os << "K,mean,std\n";
  os << std::setprecision(17);
  for (const auto& p : curve.points) os << p.k << "," << p.mean << "," << p.std << "\n";
  return os.str();
}

EvalReport ablation_run(Variant variant, TrainConfig config, std::span<const FeatureRecord> records,
                        const DatasetMeta& meta, double validation_fraction) {
  config.variant = variant;
  if (variant == Variant::no_mlp_block) config.blocks = 0;
  validate_config(config);
  (void)shape_for(config, meta.d_model);  // rejects incompatible variant/kind pairs before any work

  QuerySplit split = split_by_query(records, validation_fraction, config.seed);
  TrainResult result = train(config, split.train, meta);
  GroupSampling val = sample_groups(split.validation, config.group_size, config.groups_per_query, meta.label_mode,
                                    derive_seed(config.seed, kAblationStream), GroupFilter::mixed_labels);
  if (val.groups.empty()) throw TrainingError("ablation_run: the held-out split produced no groups");

  EvalContext ctx;
  ctx.ranker_id = to_string(config.ranker) + "/" + to_string(variant);
  ctx.protocol = "ablation " + to_string(variant) + ": trained on " + std::to_string(split.train.size()) +
                 " queries, evaluated on " + std::to_string(split.validation.size()) + " held-out queries (" +
                 fixed(100.0 * validation_fraction, 0) + "% by query)";
  return evaluate(result.ranker, val.groups, meta.label_mode, ctx, config.threads);
}

}  // namespace lranker
