#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lranker/checkpoint.hpp"
#include "lranker/errors.hpp"
#include "lranker/evaluation.hpp"
#include "lranker/feature_store.hpp"
#include "lranker/synthetic.hpp"
#include "lranker/training.hpp"

namespace lranker::cli {
namespace {

using nlohmann::json;

constexpr const char* kUsageText =
    "usage: lranker <train|eval|sweep|curve|ablate|inspect|synth> [options]\n"
    "       lranker <command> --help";

// Stream separating eval-time group sampling from the training seed streams.
constexpr std::uint64_t kEvalStream = 11;

std::string with_commas(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("failed while writing '" + path + "'");
}

std::optional<std::size_t> env_threads() {
  const char* v = std::getenv("LR_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) throw ContractViolation("LR_THREADS must be a positive integer, got '" + std::string(v) + "'");
  return static_cast<std::size_t>(n);
}

struct Output {
  std::string format = "text";
  std::string path;
};

void add_output(CLI::App* cmd, Output& o, const char* out_help) {
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  cmd->add_option("--out", o.path, out_help);
}

// Training flags shared by train, sweep and ablate. Values only reach the
// config when given explicitly, so they override --config.
struct TrainFlags {
  std::string config_path;
  TrainConfig scratch;
  std::string ranker, relevance, loss, variant, optimizer, schedule;
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> setters;

  template <typename T>
  CLI::Option* bind(CLI::App* cmd, const std::string& name, T& slot, const std::string& help, T TrainConfig::*field) {
    CLI::Option* opt = cmd->add_option(name, slot, help);
    setters.emplace_back(opt, [&slot, field](TrainConfig& c) { c.*field = slot; });
    return opt;
  }

  void attach(CLI::App* cmd, bool with_variant) {
    TrainConfig& s = scratch;
    cmd->add_option("--config", config_path, "JSON training config (flags override it)")->check(CLI::ExistingFile);
    auto* o = cmd->add_option("--ranker", ranker, "listwise | pointwise")->check(CLI::IsMember({"listwise", "pointwise"}));
    setters.emplace_back(o, [this](TrainConfig& c) { c.ranker = parse_ranker_kind(ranker); });
    o = cmd->add_option("--relevance", relevance, "cosine | learnable")->check(CLI::IsMember({"cosine", "learnable"}));
    setters.emplace_back(o, [this](TrainConfig& c) { c.relevance = parse_relevance_kind(relevance); });
    o = cmd->add_option("--loss", loss, "cls | reg")
            ->check(CLI::IsMember({"cls", "reg", "classification", "regression"}));
    setters.emplace_back(o, [this](TrainConfig& c) { c.loss = parse_loss_kind(loss); });
    if (with_variant) {
      o = cmd->add_option("--variant", variant, "full | no_projection | no_instruction | no_mlp_block")
              ->check(CLI::IsMember({"full", "no_projection", "no_instruction", "no_mlp_block"}));
      setters.emplace_back(o, [this](TrainConfig& c) { c.variant = parse_variant(variant); });
    }
    o = cmd->add_option("--optimizer", optimizer, "sgd | adamw")->check(CLI::IsMember({"sgd", "adamw"}));
    setters.emplace_back(o, [this](TrainConfig& c) { c.optimizer = parse_optimizer(optimizer); });
    o = cmd->add_option("--schedule", schedule, "constant | cosine")->check(CLI::IsMember({"constant", "cosine"}));
    setters.emplace_back(o, [this](TrainConfig& c) { c.schedule = parse_schedule(schedule); });

    bind(cmd, "--blocks", s.blocks, "Transformer/MLP blocks", &TrainConfig::blocks);
    bind(cmd, "--d-proj", s.d_proj, "Projection width", &TrainConfig::d_proj);
    bind(cmd, "--d-hidden", s.d_hidden, "Pointwise MLP hidden width", &TrainConfig::d_hidden);
    bind(cmd, "--batch-size", s.batch_size, "Groups or pairs per step", &TrainConfig::batch_size);
    bind(cmd, "--epochs", s.epochs, "Epochs", &TrainConfig::epochs);
    bind(cmd, "--lr", s.lr, "Base learning rate", &TrainConfig::lr);
    bind(cmd, "--momentum", s.momentum, "SGD momentum", &TrainConfig::momentum);
    bind(cmd, "--beta1", s.beta1, "AdamW beta1", &TrainConfig::beta1);
    bind(cmd, "--beta2", s.beta2, "AdamW beta2", &TrainConfig::beta2);
    bind(cmd, "--weight-decay", s.weight_decay, "Weight decay", &TrainConfig::weight_decay);
    bind(cmd, "--group-size", s.group_size, "Candidates per group (K)", &TrainConfig::group_size);
    bind(cmd, "--groups-per-query", s.groups_per_query, "Groups drawn per query (N)", &TrainConfig::groups_per_query);
    bind(cmd, "--seed", s.seed, "Seed for every random choice", &TrainConfig::seed);
    bind(cmd, "--threads", s.threads, "Worker threads (env LR_THREADS)", &TrainConfig::threads);
    auto* flag = cmd->add_flag("--logit-scale", s.logit_scale, "Learnable multiplier on cosine scores");
    setters.emplace_back(flag, [&s](TrainConfig& c) { c.logit_scale = s.logit_scale; });
  }

  TrainConfig resolve() const {
    TrainConfig c;
    if (auto t = env_threads()) c.threads = *t;
    if (!config_path.empty()) c = config_from_json(read_text(config_path), c);
    for (const auto& [opt, set] : setters) {
      if (opt->count() > 0) set(c);
    }
    validate_config(c);
    return c;
  }
};

struct DataFlags {
  std::string path;
  bool standardize = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data,--dataset", path, "LRFD feature file")->required();
    cmd->add_flag("--standardize", standardize, "Z-score features with this dataset's statistics");
  }
  Dataset load() const { return read_dataset(path, LoadOptions{standardize}); }
  json stanza() const {
    return {{"path", path}, {"fingerprint", file_fingerprint(path)}, {"standardize", standardize}};
  }
};

std::size_t resolve_threads(const CLI::Option* opt, std::size_t flag_value) {
  if (opt->count() > 0) return flag_value;
  if (auto t = env_threads()) return *t;
  return 1;
}

void check_dims(const Checkpoint& ck, const Dataset& ds) {
  if (ck.shape.d_model != ds.meta.d_model) {
    throw FormatError("d_model mismatch: checkpoint has d_model=" + std::to_string(ck.shape.d_model) +
                      ", dataset has d_model=" + std::to_string(ds.meta.d_model));
  }
}

void emit(const Output& o, std::ostream& out, const std::string& text, const std::string& json_text) {
  const std::string& body = o.format == "json" ? json_text : text;
  if (o.path.empty()) {
    out << body;
    if (!body.empty() && body.back() != '\n') out << '\n';
  } else {
    write_text(o.path, json_text + "\n");
    out << text;
  }
}

std::string repro_line(const json& stanza) { return "# repro: " + stanza.dump() + "\n"; }

// ---- commands ---------------------------------------------------------------

struct TrainCmd {
  TrainFlags flags;
  DataFlags data;
  std::string ckpt_out;
  std::string log_csv;
  Output output;

  void attach(CLI::App* cmd) {
    data.attach(cmd);
    flags.attach(cmd, true);
    cmd->add_option("--out,-o", ckpt_out, "Checkpoint to write (.lrck)")->required();
    cmd->add_option("--log-csv", log_csv, "Per-batch log as CSV");
    cmd->add_option("--format", output.format, "Summary format")->check(CLI::IsMember({"text", "json"}));
  }

  int run(std::ostream& out, std::ostream& err) {
    const TrainConfig config = flags.resolve();
    const Dataset ds = data.load();
    TrainResult result = train(config, ds.records, ds.meta);
    const std::string config_json = config_to_json(config);
    const std::string fingerprint = file_fingerprint(data.path);
    save_checkpoint(Checkpoint::from_ranker(result.ranker, config_json, fingerprint), ckpt_out);

    const TrainLog& log = result.log;
    if (!log_csv.empty()) {
      std::ostringstream csv;
      csv << "step,batch_size,loss,lr,applied\n" << std::setprecision(17);
      for (const auto& b : log.batches) {
        csv << b.step << "," << b.batch_size << "," << b.loss << "," << b.lr << "," << (b.applied ? 1 : 0) << "\n";
      }
      write_text(log_csv, csv.str());
    }
    if (log.aborted_steps > 0) err << "warning: " << log.aborted_steps << " steps skipped on non-finite gradients\n";

    json stanza = {{"command", "train"},
                   {"config", json::parse(config_json)},
                   {"seed", config.seed},
                   {"dataset", data.stanza()},
                   {"checkpoint", {{"path", ckpt_out}, {"fingerprint", file_fingerprint(ckpt_out)}}}};
    json summary = {{"repro", stanza},
                    {"parameter_count", result.ranker.parameter_count()},
                    {"groups", log.groups},
                    {"units", log.units},
                    {"steps", log.batches.size()},
                    {"aborted_steps", log.aborted_steps},
                    {"skipped_records", log.skipped_records},
                    {"short_queries", log.short_queries},
                    {"first_loss", log.batches.front().loss},
                    {"last_loss", log.batches.back().loss},
                    {"seconds", log.seconds}};
    if (output.format == "json") {
      out << summary.dump(2) << "\n";
      return kOk;
    }
    out << repro_line(stanza);
    out << "trained " << to_string(config.ranker) << " ranker (" << with_commas(result.ranker.parameter_count())
        << " parameters) on " << log.groups << " groups / " << log.units << " units\n";
    out << "steps " << log.batches.size() << ", loss " << std::fixed << std::setprecision(4)
        << log.batches.front().loss << " -> " << log.batches.back().loss << ", " << std::setprecision(1)
        << log.seconds << " s\n";
    out << "checkpoint written to " << ckpt_out << "\n";
    return kOk;
  }
};

struct EvalCmd {
  std::string ckpt;
  DataFlags data;
  std::size_t group_size = kDefaultGroupSize;
  std::size_t groups_per_query = kDefaultGroupsPerQuery;
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  CLI::Option* threads_opt = nullptr;
  bool unfiltered = false;
  bool no_outcomes = false;
  Output output;

  void attach(CLI::App* cmd) {
    cmd->add_option("--ckpt,--checkpoint", ckpt, "Checkpoint (.lrck)")->required()->check(CLI::ExistingFile);
    data.attach(cmd);
    cmd->add_option("--group-size,-k", group_size, "Candidates per group (K)")->capture_default_str();
    cmd->add_option("--groups-per-query", groups_per_query, "Groups per query (N)")->capture_default_str();
    cmd->add_option("--seed", seed, "Group sampling seed")->capture_default_str();
    threads_opt = cmd->add_option("--threads", threads, "Worker threads (env LR_THREADS)");
    cmd->add_flag("--unfiltered", unfiltered, "Keep groups without a correct (or incorrect) candidate");
    cmd->add_flag("--no-outcomes", no_outcomes, "Omit per-group outcomes from JSON");
    add_output(cmd, output, "Also write the JSON report here");
  }

  int run(std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(ckpt);
    const Dataset ds = data.load();
    check_dims(ck, ds);
    const Ranker ranker = ck.ranker();
    const GroupFilter filter = unfiltered ? GroupFilter::none : GroupFilter::mixed_labels;
    GroupSampling gs =
        sample_groups(ds.records, group_size, groups_per_query, ds.meta.label_mode, derive_seed(seed, kEvalStream), filter);
    if (gs.groups.empty()) throw TrainingError("eval: no groups could be drawn with K=" + std::to_string(group_size));

    json stanza = {{"command", "eval"},
                   {"seed", seed},
                   {"group_size", group_size},
                   {"groups_per_query", groups_per_query},
                   {"unfiltered", unfiltered},
                   {"dataset", data.stanza()},
                   {"checkpoint", {{"path", ckpt}, {"fingerprint", file_fingerprint(ckpt)}}}};
    EvalContext ctx;
    ctx.dataset_id = data.path;
    ctx.ranker_id = ckpt;
    ctx.protocol = "K=" + std::to_string(group_size) + ", up to " + std::to_string(groups_per_query) +
                   " groups per query drawn without replacement, " +
                   (unfiltered ? std::string("unfiltered") : std::string("mixed-label filtered")) + ", seed " +
                   std::to_string(seed);
    EvalReport rep = evaluate(ranker, gs.groups, ds.meta.label_mode, ctx, resolve_threads(threads_opt, threads));
    json j = json::parse(report_to_json(rep, !no_outcomes));
    j["repro"] = stanza;
    emit(output, out, repro_line(stanza) + report_to_text(rep), j.dump(2));
    return kOk;
  }
};

struct SweepCmd {
  TrainFlags flags;
  DataFlags data;
  std::string grid = "default";
  double validation_fraction = kDefaultValidationFraction;
  std::string best_out;
  Output output;

  void attach(CLI::App* cmd) {
    data.attach(cmd);
    flags.attach(cmd, true);
    cmd->add_option("--grid", grid, "default (hyperparameter table) | single (base config only)")
        ->check(CLI::IsMember({"default", "single"}))
        ->capture_default_str();
    cmd->add_option("--validation-fraction", validation_fraction, "Held-out share of queries")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--best-out", best_out, "Write the best config as JSON");
    add_output(cmd, output, "Also write the JSON table here");
  }

  int run(std::ostream& out, std::ostream& err) {
    const TrainConfig base = flags.resolve();
    const Dataset ds = data.load();
    GridSpace space;
    if (grid == "default") {
      space = default_grid();
    } else {
      space.batch_sizes = {base.batch_size};
      space.optimizers = {{base.optimizer, base.lr, base.momentum}};
      space.schedules = {base.schedule};
    }
    GridSearchReport rep = grid_search(space, base, ds.records, ds.meta, validation_fraction);
    for (const auto& p : rep.points) {
      if (p.failed) err << "warning: grid point failed: " << p.error << "\n";
    }
    json stanza = {{"command", "sweep"},
                   {"grid", grid},
                   {"base_config", json::parse(config_to_json(base))},
                   {"seed", base.seed},
                   {"validation_fraction", validation_fraction},
                   {"dataset", data.stanza()}};
    json j = json::parse(grid_report_to_json(rep));
    j["repro"] = stanza;
    emit(output, out, repro_line(stanza) + grid_report_to_text(rep), j.dump(2));
    if (!rep.best_index) throw TrainingError("sweep: every grid point failed");
    if (!best_out.empty()) write_text(best_out, config_to_json(rep.points[*rep.best_index].config) + "\n");
    return kOk;
  }
};

struct CurveCmd {
  std::string ckpt;
  DataFlags data;
  std::vector<std::size_t> ks = {1, 2, 4, 8, 10, 16};
  std::size_t trials = kDefaultCurveTrials;
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  CLI::Option* threads_opt = nullptr;
  std::string out_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--ckpt,--checkpoint", ckpt, "Checkpoint (.lrck)")->required()->check(CLI::ExistingFile);
    data.attach(cmd);
    cmd->add_option("--k", ks, "Comma-separated K values")->delimiter(',')->capture_default_str();
    cmd->add_option("--trials", trials, "Resamples per query and K")->capture_default_str();
    cmd->add_option("--seed", seed, "Resampling seed")->capture_default_str();
    threads_opt = cmd->add_option("--threads", threads, "Worker threads (env LR_THREADS)");
    cmd->add_option("--out", out_path, "Write CSV here instead of stdout");
  }

  int run(std::ostream& out, std::ostream& err) {
    const Checkpoint ck = load_checkpoint(ckpt);
    const Dataset ds = data.load();
    check_dims(ck, ds);
    const ScalingCurve curve =
        scaling_curve(ck.ranker(), ds.records, ds.meta.label_mode, ks, trials, seed, resolve_threads(threads_opt, threads));
    for (auto k : curve.skipped_k) err << "warning: K=" << k << " skipped (exceeds a response pool)\n";
    json stanza = {{"command", "curve"},
                   {"k", ks},
                   {"trials", trials},
                   {"seed", seed},
                   {"dataset", data.stanza()},
                   {"checkpoint", {{"path", ckpt}, {"fingerprint", file_fingerprint(ckpt)}}}};
    const std::string csv = repro_line(stanza) + curve_to_csv(curve);
    if (out_path.empty()) {
      out << csv;
    } else {
      write_text(out_path, csv);
      out << "curve written to " << out_path << "\n";
    }
    if (curve.points.empty()) throw TrainingError("curve: every K exceeded some response pool");
    return kOk;
  }
};

struct AblateCmd {
  TrainFlags flags;
  DataFlags data;
  std::string variant;
  double validation_fraction = kDefaultValidationFraction;
  Output output;

  void attach(CLI::App* cmd) {
    data.attach(cmd);
    flags.attach(cmd, false);
    cmd->add_option("--variant", variant, "full | no_projection | no_instruction | no_mlp_block")
        ->required()
        ->check(CLI::IsMember({"full", "no_projection", "no_instruction", "no_mlp_block"}));
    cmd->add_option("--validation-fraction", validation_fraction, "Held-out share of queries")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    add_output(cmd, output, "Also write the JSON report here");
  }

  int run(std::ostream& out, std::ostream&) {
    const TrainConfig config = flags.resolve();
    const Dataset ds = data.load();
    EvalReport rep = ablation_run(parse_variant(variant), config, ds.records, ds.meta, validation_fraction);
    rep.dataset_id = data.path;
    json stanza = {{"command", "ablate"},
                   {"variant", variant},
                   {"config", json::parse(config_to_json(config))},
                   {"seed", config.seed},
                   {"validation_fraction", validation_fraction},
                   {"dataset", data.stanza()}};
    json j = json::parse(report_to_json(rep, false));
    j["repro"] = stanza;
    emit(output, out, repro_line(stanza) + report_to_text(rep), j.dump(2));
    return kOk;
  }
};

struct InspectCmd {
  std::string ckpt;
  std::string format = "text";

  void attach(CLI::App* cmd) {
    cmd->add_option("--ckpt,--checkpoint", ckpt, "Checkpoint (.lrck)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));
  }

  int run(std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(ckpt);
    const RankerShape& s = ck.shape;
    const std::size_t count = ck.params.scalar_count();
    if (format == "json") {
      json j = {{"ranker_kind", to_string(s.kind)},
                {"relevance_kind", to_string(s.relevance)},
                {"variant", to_string(s.variant)},
                {"d_model", s.d_model},
                {"d_proj", s.d_proj},
                {"d_hidden", s.d_hidden},
                {"blocks", s.blocks},
                {"logit_scale", s.logit_scale},
                {"parameter_count", count},
                {"config", json::parse(ck.config_json)},
                {"dataset_fingerprint", ck.dataset_fingerprint},
                {"tensors", json::array()}};
      for (const auto& t : ck.params) j["tensors"].push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
      out << j.dump(2) << "\n";
      return kOk;
    }
    auto row = [&](const std::string& k, const std::string& v) { out << std::left << std::setw(20) << k << v << "\n"; };
    row("ranker", to_string(s.kind));
    row("relevance", to_string(s.relevance));
    row("variant", to_string(s.variant));
    row("d_model", std::to_string(s.d_model));
    row("d_proj", std::to_string(s.d_proj));
    row("d_hidden", std::to_string(s.d_hidden));
    row("blocks", std::to_string(s.blocks));
    row("logit_scale", s.logit_scale ? "on" : "off");
    row("parameters", with_commas(count));
    row("dataset", ck.dataset_fingerprint.empty() ? "-" : ck.dataset_fingerprint);
    row("config", ck.config_json);
    out << "tensors:\n";
    for (const auto& t : ck.params) out << "  " << std::left << std::setw(28) << t.name << t.value.shape_string() << "\n";
    return kOk;
  }
};

struct SynthCmd {
  SyntheticSpec spec;
  std::string label_mode = "classification";
  std::string out_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out,-o", out_path, "LRFD file to write")->required();
    cmd->add_option("--queries", spec.queries, "Queries")->capture_default_str();
    cmd->add_option("--responses", spec.responses_per_query, "Responses per query")->capture_default_str();
    cmd->add_option("--d-model", spec.d_model, "Feature width")->capture_default_str();
    cmd->add_option("--label-mode", label_mode, "classification | regression")
        ->check(CLI::IsMember({"classification", "regression", "cls", "reg"}));
    cmd->add_option("--instruction-signal", spec.instruction_signal, "Planted direction strength in instructions")
        ->capture_default_str();
    cmd->add_option("--response-signal", spec.response_signal, "Planted direction strength in responses")
        ->capture_default_str();
    cmd->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream&) {
    spec.label_mode = parse_label_mode(label_mode);
    const Dataset ds = generate_synthetic(spec);
    write_dataset(ds.records, ds.meta, out_path);
    out << "wrote " << ds.records.size() << " queries x " << spec.responses_per_query << " responses (d_model "
        << spec.d_model << ") to " << out_path << "\n";
    return kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lightweight best-of-K response rankers over cached hidden-state features", "lranker"};
  app.require_subcommand(1);
  app.fallthrough(false);

  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  SweepCmd sweep_cmd;
  CurveCmd curve_cmd;
  AblateCmd ablate_cmd;
  InspectCmd inspect_cmd;
  SynthCmd synth_cmd;
  auto* c_train = app.add_subcommand("train", "Train a ranker and write a checkpoint");
  auto* c_eval = app.add_subcommand("eval", "Best-of-K selection accuracy of a checkpoint");
  auto* c_sweep = app.add_subcommand("sweep", "Grid search over training hyperparameters");
  auto* c_curve = app.add_subcommand("curve", "Selection accuracy as a function of K (CSV)");
  auto* c_ablate = app.add_subcommand("ablate", "Train and evaluate an architecture ablation");
  auto* c_inspect = app.add_subcommand("inspect", "Describe a checkpoint");
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic planted-rule feature file");
  train_cmd.attach(c_train);
  eval_cmd.attach(c_eval);
  sweep_cmd.attach(c_sweep);
  curve_cmd.attach(c_curve);
  ablate_cmd.attach(c_ablate);
  inspect_cmd.attach(c_inspect);
  synth_cmd.attach(c_synth);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "lranker: " << e.what() << "\n" << kUsageText << "\n";
    return kUsage;
  }

  try {
    if (c_train->parsed()) return train_cmd.run(out, err);
    if (c_eval->parsed()) return eval_cmd.run(out, err);
    if (c_sweep->parsed()) return sweep_cmd.run(out, err);
    if (c_curve->parsed()) return curve_cmd.run(out, err);
    if (c_ablate->parsed()) return ablate_cmd.run(out, err);
    if (c_inspect->parsed()) return inspect_cmd.run(out, err);
    if (c_synth->parsed()) return synth_cmd.run(out, err);
  } catch (const FormatError& e) {
    err << "lranker: " << e.what() << "\n";
    return kDataError;
  } catch (const IoError& e) {
    err << "lranker: " << e.what() << "\n";
    return kDataError;
  } catch (const ContractViolation& e) {
    err << "lranker: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "lranker: " << e.what() << "\n";
    return kRunError;
  }
  err << kUsageText << "\n";
  return kUsage;
}

}  // namespace lranker::cli
