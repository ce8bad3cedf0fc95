#include "lranker/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <iomanip>

#include <json.hpp>

#include "lranker/errors.hpp"
#include "lranker/evaluation.hpp"
#include "parallel.hpp"

namespace lranker {
namespace {

using nlohmann::json;

// Seed streams carved out of TrainConfig::seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSamplingStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kSplitStream = 4;
constexpr std::uint64_t kValidationStream = 5;

void shuffle_in_place(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

// A training unit: a whole group (listwise) or one candidate of a group (pointwise).
struct Unit {
  std::size_t group = 0;
  std::size_t candidate = 0;
};

struct ChunkResult {
  num::ParamSet grads;
  double loss_sum = 0.0;
};

double unit_loss_and_backward(const Ranker& ranker, const CandidateGroup& group, const Unit& unit,
                              LossKind loss, double inv_batch, num::ParamSet& grads) {
  if (ranker.shape().kind == RankerKind::listwise) {
    ScoringTrace trace = ranker.forward(group, &grads);
    std::vector<double> labels(group.size());
    for (std::size_t k = 0; k < group.size(); ++k) labels[k] = group.candidates[k].label;
    const std::vector<std::vector<double>> s{trace.scores};
    const std::vector<std::vector<double>> y{labels};
    LossReport rep = loss == LossKind::classification ? list_cls_loss(s, y) : list_reg_loss(s, y);
    auto& g = rep.score_grads.front();
    for (auto& x : g) x *= inv_batch;
    trace.backward(g);
    return rep.loss;
  }
  const Candidate& c = group.candidates[unit.candidate];
  const std::span<const float> row[1] = {c.feature};
  ScoringTrace trace = ranker.forward(group.instruction, row, &grads);
  const double y[1] = {c.label};
  LossReport rep = loss == LossKind::classification ? point_cls_loss(trace.scores, y) : point_reg_loss(trace.scores, y);
  auto& g = rep.score_grads.front();
  for (auto& x : g) x *= inv_batch;
  trace.backward(g);
  return rep.loss;
}

template <typename T>
T required(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("config key '") + key + "': " + e.what());
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string describe_optimizer(const TrainConfig& c) {
  std::ostringstream os;
  os << to_string(c.optimizer) << "(lr=" << c.lr;
  if (c.optimizer == OptimizerKind::sgd) {
    os << ", momentum=" << c.momentum;
  } else {
    os << ", betas=(" << c.beta1 << ", " << c.beta2 << ")";
  }
  os << ")";
  return os.str();
}

}  // namespace

void validate_config(const TrainConfig& c) {
  auto fail = [](const std::string& what) { throw ContractViolation("train config: " + what); };
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.epochs < 1) fail("epochs must be >= 1");
  if (c.group_size < 2) fail("group size K must be >= 2, got " + std::to_string(c.group_size));
  if (c.groups_per_query < 1) fail("groups_per_query must be >= 1");
  if (!std::isfinite(c.lr) || c.lr < 0.0) fail("lr must be finite and >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (!std::isfinite(c.weight_decay) || c.weight_decay < 0.0) fail("weight_decay must be finite and >= 0");
  if (c.threads < 1) fail("threads must be >= 1");
}

RankerShape shape_for(const TrainConfig& c, std::size_t d_model) {
  RankerShape s;
  s.kind = c.ranker;
  s.relevance = c.relevance;
  s.d_model = d_model;
  s.d_proj = c.d_proj;
  s.d_hidden = c.d_hidden;
  s.blocks = c.blocks;
  s.variant = c.variant;
  s.logit_scale = c.logit_scale;
  return normalized(s);
}

std::string config_to_json(const TrainConfig& c) {
  json j;
  j["ranker"] = to_string(c.ranker);
  j["relevance"] = to_string(c.relevance);
  j["loss"] = to_string(c.loss);
  j["variant"] = to_string(c.variant);
  j["blocks"] = c.blocks;
  j["d_proj"] = c.d_proj;
  j["d_hidden"] = c.d_hidden;
  j["logit_scale"] = c.logit_scale;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["optimizer"] = to_string(c.optimizer);
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["betas"] = {c.beta1, c.beta2};
  j["weight_decay"] = c.weight_decay;
  j["schedule"] = to_string(c.schedule);
  j["group_size"] = c.group_size;
  j["groups_per_query"] = c.groups_per_query;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j.dump();
}

TrainConfig config_from_json(std::string_view text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ContractViolation("config JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "ranker") c.ranker = parse_ranker_kind(required<std::string>(j, "ranker"));
    else if (key == "relevance") c.relevance = parse_relevance_kind(required<std::string>(j, "relevance"));
    else if (key == "loss") c.loss = parse_loss_kind(required<std::string>(j, "loss"));
    else if (key == "variant") c.variant = parse_variant(required<std::string>(j, "variant"));
    else if (key == "blocks") c.blocks = required<std::size_t>(j, "blocks");
    else if (key == "d_proj") c.d_proj = required<std::size_t>(j, "d_proj");
    else if (key == "d_hidden") c.d_hidden = required<std::size_t>(j, "d_hidden");
    else if (key == "logit_scale") c.logit_scale = required<bool>(j, "logit_scale");
    else if (key == "batch_size") c.batch_size = required<std::size_t>(j, "batch_size");
    else if (key == "epochs") c.epochs = required<std::size_t>(j, "epochs");
    else if (key == "optimizer") c.optimizer = parse_optimizer(required<std::string>(j, "optimizer"));
    else if (key == "lr") c.lr = required<double>(j, "lr");
    else if (key == "momentum") c.momentum = required<double>(j, "momentum");
    else if (key == "betas") {
      const auto b = required<std::vector<double>>(j, "betas");
      if (b.size() != 2) throw ContractViolation("config key 'betas' must hold two numbers");
      c.beta1 = b[0];
      c.beta2 = b[1];
    } else if (key == "weight_decay") c.weight_decay = required<double>(j, "weight_decay");
    else if (key == "schedule") c.schedule = parse_schedule(required<std::string>(j, "schedule"));
    else if (key == "group_size") c.group_size = required<std::size_t>(j, "group_size");
    else if (key == "groups_per_query") c.groups_per_query = required<std::size_t>(j, "groups_per_query");
    else if (key == "seed") c.seed = required<std::uint64_t>(j, "seed");
    else if (key == "threads") c.threads = required<std::size_t>(j, "threads");
    else throw ContractViolation("unknown config key '" + key + "'");
  }
  return c;
}

TrainResult train(const TrainConfig& config, std::span<const FeatureRecord> records, const DatasetMeta& meta,
                  const Ranker* initial) {
  validate_config(config);
  if (config.loss == LossKind::classification && meta.label_mode == LabelMode::regression) {
    throw ContractViolation("train: classification loss needs a classification dataset, got regression labels");
  }
  for (const auto& r : records) {
    if (r.instruction.size() != meta.d_model) {
      throw ContractViolation("train: record query_id=" + std::to_string(r.query_id) + " has d_model " +
                              std::to_string(r.instruction.size()) + ", dataset declares " +
                              std::to_string(meta.d_model));
    }
  }
  const RankerShape shape = shape_for(config, meta.d_model);
  Ranker ranker = initial != nullptr ? *initial : Ranker::initialize(shape, derive_seed(config.seed, kInitStream));
  if (initial != nullptr && initial->shape() != shape) {
    throw ContractViolation("train: initial ranker shape does not match the config");
  }

  const auto start = std::chrono::steady_clock::now();
  GroupSampling sampling = sample_groups(records, config.group_size, config.groups_per_query, meta.label_mode,
                                         derive_seed(config.seed, kSamplingStream), GroupFilter::mixed_labels);
  TrainLog log;
  log.groups = sampling.groups.size();
  log.skipped_records = sampling.skipped_records;
  log.short_queries = sampling.short_queries;
  if (sampling.groups.empty()) {
    throw TrainingError(
        "train: no groups left after sampling (" + std::to_string(records.size()) + " records, " +
        std::to_string(sampling.skipped_records) + " with fewer than K=" + std::to_string(config.group_size) +
        " responses" +
        (meta.label_mode == LabelMode::classification ? "; the mixed-label filter rejected every other query" : "") +
        ")");
  }

  std::vector<Unit> units;
  for (std::size_t g = 0; g < sampling.groups.size(); ++g) {
    if (config.ranker == RankerKind::listwise) {
      units.push_back({g, 0});
    } else {
      for (std::size_t k = 0; k < sampling.groups[g].size(); ++k) units.push_back({g, k});
    }
  }
  log.units = units.size();

  const std::size_t batches_per_epoch = (units.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  OptimState state;
  std::vector<ChunkResult> chunks(config.threads);
  for (auto& ch : chunks) ch.grads = ranker.params().zeros_like();
  num::ParamSet grads = ranker.params().zeros_like();

  std::vector<std::size_t> order(units.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(derive_seed(config.seed, kShuffleStream), epoch));
    shuffle_in_place(order, rng);

    for (std::size_t b = 0; b < batches_per_epoch; ++b, ++step) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      const std::size_t n = end - begin;
      const double inv_batch = 1.0 / static_cast<double>(n);
      const std::size_t workers = std::min(config.threads, n);

      detail::parallel_chunks(n, workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        ChunkResult& ch = chunks[c];
        ch.grads.set_zero();
        ch.loss_sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
          const Unit& u = units[order[begin + i]];
          ch.loss_sum += unit_loss_and_backward(ranker, sampling.groups[u.group], u, config.loss, inv_batch, ch.grads);
        }
      });

      grads.set_zero();
      double loss_sum = 0.0;
      for (std::size_t c = 0; c < workers; ++c) {
        grads.accumulate(chunks[c].grads);
        loss_sum += chunks[c].loss_sum;
      }

      const double lr = lr_at(config.schedule, config.lr, step, total_steps);
      bool applied = false;
      if (config.optimizer == OptimizerKind::sgd) {
        applied = sgd_step(ranker.params(), grads, lr, config.momentum, config.weight_decay, state);
      } else {
        applied = adamw_step(ranker.params(), grads, lr, config.beta1, config.beta2, config.weight_decay, state);
      }
      if (!applied) ++log.aborted_steps;
      log.batches.push_back(BatchLog{step, n, loss_sum * inv_batch, lr, applied});
    }
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainResult{std::move(ranker), std::move(log)};
}

QuerySplit split_by_query(std::span<const FeatureRecord> records, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ContractViolation("split_by_query: validation fraction must lie in (0, 1)");
  }
  if (records.size() < 2) throw ContractViolation("split_by_query: need at least two queries");
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, kSplitStream));
  shuffle_in_place(idx, rng);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, records.size() - 1);

  std::vector<bool> is_val(records.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[idx[i]] = true;
  QuerySplit out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (is_val[i] ? out.validation : out.train).push_back(records[i]);
  }
  return out;
}

GridSpace default_grid() {
  GridSpace g;
  g.batch_sizes = {256, 1024};
  for (double lr : {0.05, 0.1, 0.5, 1.0}) {
    for (double m : {0.0, 0.9}) g.optimizers.push_back({OptimizerKind::sgd, lr, m});
  }
  for (double lr : {1e-5, 1e-4}) g.optimizers.push_back({OptimizerKind::adamw, lr, 0.0});
  g.schedules = {Schedule::constant, Schedule::cosine};
  return g;
}

std::vector<TrainConfig> enumerate_grid(const GridSpace& space, const TrainConfig& base) {
  std::vector<TrainConfig> out;
  for (std::size_t bs : space.batch_sizes) {
    for (const auto& opt : space.optimizers) {
      for (Schedule sched : space.schedules) {
        TrainConfig c = base;
        c.batch_size = bs;
        c.optimizer = opt.kind;
        c.lr = opt.lr;
        c.momentum = opt.kind == OptimizerKind::sgd ? opt.momentum : 0.0;
        c.schedule = sched;
        out.push_back(c);
      }
    }
  }
  return out;
}

GridSearchReport grid_search(const GridSpace& space, const TrainConfig& base, std::span<const FeatureRecord> records,
                             const DatasetMeta& meta, double validation_fraction) {
  validate_config(base);
  QuerySplit split = split_by_query(records, validation_fraction, base.seed);
  GroupSampling val = sample_groups(split.validation, base.group_size, base.groups_per_query, meta.label_mode,
                                    derive_seed(base.seed, kValidationStream), GroupFilter::mixed_labels);
  if (val.groups.empty()) {
    throw TrainingError("grid_search: the validation split produced no groups");
  }

  GridSearchReport report;
  report.train_queries = split.train.size();
  report.validation_queries = split.validation.size();
  report.validation_groups = val.groups.size();
  std::ostringstream proto;
  proto << "validation = " << fixed(100.0 * validation_fraction, 0)
        << "% of queries held out by query (seeded); selection accuracy on K=" << base.group_size << ", up to "
        << base.groups_per_query << " groups per query"
        << (meta.label_mode == LabelMode::classification ? ", mixed-label filtered" : "");
  report.protocol = proto.str();

  for (const TrainConfig& config : enumerate_grid(space, base)) {
    GridPoint point;
    point.config = config;
    const auto start = std::chrono::steady_clock::now();
    try {
      TrainResult result = train(config, split.train, meta);
      point.accuracy = selection_accuracy(result.ranker, val.groups, meta.label_mode, config.threads);
    } catch (const Error& e) {
      point.failed = true;
      point.error = e.what();
    }
    point.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!point.failed && (!report.best_index || point.accuracy > report.points[*report.best_index].accuracy)) {
      report.best_index = report.points.size();
    }
    report.points.push_back(std::move(point));
  }
  return report;
}

std::string grid_report_to_json(const GridSearchReport& report) {
  json j;
  j["protocol"] = report.protocol;
  j["train_queries"] = report.train_queries;
  j["validation_queries"] = report.validation_queries;
  j["validation_groups"] = report.validation_groups;
  j["best_index"] = report.best_index ? json(*report.best_index) : json(nullptr);
  j["points"] = json::array();
  for (const auto& p : report.points) {
    json row;
    row["config"] = json::parse(config_to_json(p.config));
    row["accuracy"] = p.failed ? json(nullptr) : json(p.accuracy);
    row["failed"] = p.failed;
    if (p.failed) row["error"] = p.error;
    row["seconds"] = p.seconds;
    j["points"].push_back(std::move(row));
  }
  return j.dump(2);
}

std::string grid_report_to_text(const GridSearchReport& report) {
  std::ostringstream os;
  os << "# " << report.protocol << "\n";
  os << "# train queries " << report.train_queries << ", validation queries " << report.validation_queries
     << ", validation groups " << report.validation_groups << "\n";
  os << std::left << std::setw(4) << "#" << std::setw(7) << "batch" << std::setw(36) << "optimizer" << std::setw(10)
     << "schedule" << std::setw(10) << "accuracy" << "seconds\n";
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    os << std::left << std::setw(4) << i << std::setw(7) << p.config.batch_size << std::setw(36)
       << describe_optimizer(p.config) << std::setw(10) << to_string(p.config.schedule) << std::setw(10)
       << (p.failed ? std::string("failed") : fixed(p.accuracy, 4)) << fixed(p.seconds, 1);
    if (report.best_index && *report.best_index == i) os << "  <- best";
    if (p.failed) os << "  (" << p.error << ")";
    os << "\n";
  }
  bool any = false;
  double lo = 1.0, hi = 0.0;
  for (const auto& p : report.points) {
    if (p.failed) continue;
    any = true;
    lo = std::min(lo, p.accuracy);
    hi = std::max(hi, p.accuracy);
  }
  if (any) os << "# accuracy spread " << fixed(100.0 * (hi - lo), 2) << " points\n";
  return os.str();
}

}  // namespace lranker
