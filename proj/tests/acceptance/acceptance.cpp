// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_cases.hpp"
#include "lranker/checkpoint.hpp"
#include "lranker/evaluation.hpp"
#include "lranker/objectives.hpp"
#include "lranker/optim.hpp"
#include "lranker/synthetic.hpp"
#include "lranker/training.hpp"
#include "test_support.hpp"

namespace {

using namespace lranker;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Collects failed sub-checks for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + ("FAILED " + f);
    return out;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

int failures = 0;
std::string only;

void report(const std::string& name, const std::function<void(Checks&)>& body) {
  if (!only.empty() && name.find(only) == std::string::npos) return;
  Checks c;
  const auto start = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const bool ok = c.ok();
  if (!ok) ++failures;
  std::printf("%s %s (%.1f s): %s\n", ok ? "PASS" : "FAIL", name.c_str(), seconds_since(start), c.summary().c_str());
  std::fflush(stdout);
}

RankerShape shape(RankerKind kind, RelevanceKind rel, std::size_t d_model, Variant v = Variant::full,
                  std::size_t d_proj = kDefaultProjDim) {
  RankerShape s;
  s.kind = kind;
  s.relevance = rel;
  s.d_model = d_model;
  s.d_proj = d_proj;
  s.variant = v;
  return normalized(s);
}

// ---------------------------------------------------------------------------

void parameter_budgets(Checks& c) {
  const std::size_t lw = parameter_count(shape(RankerKind::listwise, RelevanceKind::cosine, 4096));
  const std::size_t pw = parameter_count(shape(RankerKind::pointwise, RelevanceKind::cosine, 4096));
  c.note("listwise " + std::to_string(lw) + ", pointwise " + std::to_string(pw));
  c.expect(within(static_cast<double>(lw), 0.30e6, 0.10), "listwise within 10% of 0.30M");
  c.expect(within(static_cast<double>(pw), 0.28e6, 0.10), "pointwise within 10% of 0.28M");

  for (auto kind : {RankerKind::listwise, RankerKind::pointwise}) {
    for (auto rel : {RelevanceKind::cosine, RelevanceKind::learnable}) {
      const RankerShape s = shape(kind, rel, 4096);
      const std::size_t n = parameter_count(s);
      c.expect(n < 500'000, to_string(kind) + "/" + to_string(rel) + " default below 0.5M");
      c.expect(Ranker::initialize(s, 1).parameter_count() == n, to_string(kind) + "/" + to_string(rel) +
                                                                     " allocated count equals closed form");
    }
  }

  const std::size_t np = parameter_count(shape(RankerKind::listwise, RelevanceKind::cosine, 4096, Variant::no_projection));
  const std::size_t nm = parameter_count(shape(RankerKind::pointwise, RelevanceKind::cosine, 4096, Variant::no_mlp_block));
  c.note("no_projection listwise " + std::to_string(np) + ", no_mlp_block pointwise " + std::to_string(nm));
  c.expect(within(static_cast<double>(np), 192e6, 0.10), "no_projection listwise within 10% of 192M");
  c.expect(within(static_cast<double>(nm), 0.25e6, 0.10), "no_mlp_block pointwise within 10% of 0.25M");
}

// ---------------------------------------------------------------------------

void gradient_oracle(Checks& c) {
  constexpr int kSeeds = 20;
  constexpr double kStep = 1e-4, kTol = 1e-4;
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t checks = 0;
  for (auto kind : {RankerKind::listwise, RankerKind::pointwise}) {
    for (auto rel : {RelevanceKind::cosine, RelevanceKind::learnable}) {
      for (auto loss : {LossKind::classification, LossKind::regression}) {
        for (int seed = 0; seed < kSeeds; ++seed) {
          const auto probe = testing::composition_probe(kind, rel, loss, 9000 + static_cast<std::uint64_t>(seed));
          const auto r = num::grad_check(probe.fn, probe.point, kStep, kTol);
          worst = std::max(worst, r.max_relative_error);
          ++checks;
          c.expect(r.passed, to_string(kind) + "/" + to_string(rel) + "/" + to_string(loss) + " seed " +
                                 std::to_string(seed) + " err " + fmt(r.max_relative_error, 8));
        }
      }
    }
  }
  for (const auto& pc : testing::primitive_cases()) {
    for (int seed = 0; seed < kSeeds; ++seed) {
      std::mt19937_64 rng(5000 + static_cast<std::uint64_t>(seed));
      auto probe = testing::probe_program(pc.inputs(rng), pc.program, 300 + static_cast<std::uint64_t>(seed));
      const auto r = num::grad_check(probe.fn, probe.point, kStep, kTol);
      worst = std::max(worst, r.max_relative_error);
      ++checks;
      c.expect(r.passed, std::string(pc.name) + " seed " + std::to_string(seed) + " err " + fmt(r.max_relative_error, 8));
    }
  }
  const double t = seconds_since(start);
  c.note(std::to_string(checks) + " checks (8 compositions + " + std::to_string(testing::primitive_cases().size()) +
         " primitives, " + std::to_string(kSeeds) + " seeds), worst relative error " + fmt(worst, 8));
  c.expect(t < 120.0, "runtime under 2 minutes (took " + fmt(t, 1) + " s)");
}

// ---------------------------------------------------------------------------

void loss_oracles(Checks& c) {
  using G = std::vector<std::vector<double>>;
  const double matched = list_cls_loss(G{{0.3, 0.3, -60.0}}, G{{1, 1, 0}}).loss;
  c.expect(std::abs(matched) < 1e-8, "KL on matched distributions " + fmt(matched, 12));
  const double two = list_cls_loss(G{{0, 0}}, G{{1, 0}}).loss;
  c.expect(std::abs(two - std::log(2.0)) <= 1e-6, "KL on y=[1,0], s=[0,0] equals log 2");
  const double bce = point_cls_loss(std::vector<double>{0.0}, std::vector<double>{1.0}).loss;
  c.expect(std::abs(bce - std::log(2.0)) <= 1e-9, "BCE at s=0 equals ln 2");

  // Freshly initialized listwise ranker on one-positive K=10 groups.
  std::mt19937_64 rng(17);
  std::vector<FeatureRecord> recs;
  for (std::uint64_t q = 0; q < 200; ++q)
    recs.push_back(testing::random_record(q, 256, 10, rng, LabelMode::classification, 1));
  const auto groups = sample_groups(recs, 10, 1, LabelMode::classification, 3).groups;
  const Ranker r = Ranker::initialize(shape(RankerKind::listwise, RelevanceKind::cosine, 256), 4);
  G scores, labels;
  double max_abs = 0.0;
  for (const auto& g : groups) {
    scores.push_back(r.score(g));
    for (double s : scores.back()) max_abs = std::max(max_abs, std::abs(s));
    labels.emplace_back();
    for (const auto& cand : g.candidates) labels.back().push_back(cand.label);
  }
  const double init = list_cls_loss(scores, labels).loss;
  c.note("init listwise loss " + fmt(init) + " vs log 10 = " + fmt(std::log(10.0)) + " (max |s| " + fmt(max_abs, 3) + ")");
  c.expect(std::abs(init - std::log(10.0)) <= 0.05, "listwise-cls init loss within 0.05 of log 10");
}

// ---------------------------------------------------------------------------

void structural_invariants(Checks& c) {
  std::mt19937_64 rng(23);
  const RankerShape ls = shape(RankerKind::listwise, RelevanceKind::cosine, 16, Variant::full, 8);
  const Ranker lw = Ranker::initialize(ls, 5);
  std::size_t perms = 0;
  double worst = 0.0;
  for (std::size_t k : {3u, 4u}) {
    for (int trial = 0; trial < 10; ++trial) {
      const FeatureRecord rec = testing::random_record(static_cast<std::uint64_t>(trial), 16, k, rng,
                                                       LabelMode::classification, 1);
      std::vector<std::size_t> idx(k);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      const auto base = lw.score(make_group(rec, idx));
      const std::size_t chosen = select_best(base);
      do {
        const auto s = lw.score(make_group(rec, idx));
        for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(s[i] - base[idx[i]]));
        c.expect(idx[select_best(s)] == chosen, "listwise selection invariant under permutation");
        ++perms;
      } while (std::next_permutation(idx.begin(), idx.end()));
    }
  }
  c.note(std::to_string(perms) + " permutations, max score deviation " + fmt(worst, 15));
  c.expect(worst <= 1e-12, "listwise scores permutation equivariant");

  const RankerShape ps = shape(RankerKind::pointwise, RelevanceKind::cosine, 16, Variant::full, 8);
  const Ranker pw = Ranker::initialize(ps, 6);
  bool independent = true;
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureRecord rec = testing::random_record(static_cast<std::uint64_t>(trial), 16, 8, rng);
    const std::vector<std::size_t> a{0, 1, 2, 3}, b{5, 0, 7};
    const auto sa = pw.score(make_group(rec, a)), sb = pw.score(make_group(rec, b));
    independent = independent && sa[0] == sb[1] && sa[0] == pw.score_pair(rec.instruction, rec.responses[0].feature);
  }
  c.expect(independent, "pointwise scores independent of the batch");

  bool scale_ok = true;
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> pos(1e-3, 1e3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(12), b(12), sa(12), sb(12);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const double ca = pos(rng), cb = pos(rng);
    for (std::size_t i = 0; i < 12; ++i) {
      sa[i] = ca * a[i];
      sb[i] = cb * b[i];
    }
    scale_ok = scale_ok && std::abs(cosine_relevance(sa, sb) - cosine_relevance(a, b)) <= 1e-12;
  }
  c.expect(scale_ok, "cosine relevance invariant under positive scaling");

  bool shift_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(10), t(10);
    for (auto& x : s) x = n(rng);
    const double shift = 100.0 * n(rng);
    for (std::size_t i = 0; i < 10; ++i) t[i] = s[i] + shift;
    shift_ok = shift_ok && select_best(s) == select_best(t);
  }
  c.expect(shift_ok, "argmax invariant under a constant shift");

  // Optimizer recursions.
  auto one = [](double v) {
    num::ParamSet p;
    p.add("w", num::Tensor2(1, 1, v));
    return p;
  };
  num::ParamSet p = one(0.0);
  OptimState st;
  sgd_step(p, one(1.0), 0.0, 0.9, 0.0, st);
  for (int i = 0; i < 3; ++i) sgd_step(p, one(0.0), 0.0, 0.9, 0.0, st);
  c.expect(std::abs(st.first[0](0, 0) - 0.729) <= 1e-12, "momentum buffer 0.9^3");
  p = one(1.0);
  st = {};
  sgd_step(p, one(1.0), 0.1, 0.9, 0.0, st);
  sgd_step(p, one(2.0), 0.1, 0.9, 0.0, st);
  c.expect(std::abs(p[0].value(0, 0) - 0.61) <= 1e-12, "two-step SGD momentum trace");
  p = one(0.0);
  st = {};
  adamw_step(p, one(1.0), 1e-3, 0.9, 0.999, 0.0, st);
  c.expect(std::abs(p[0].value(0, 0) + 1e-3 / (1.0 + 1e-8)) <= 1e-12, "first AdamW step");
  p = one(2.0);
  st = {};
  adamw_step(p, one(0.0), 0.01, 0.9, 0.999, 0.1, st);
  c.expect(std::abs(p[0].value(0, 0) - 2.0 * (1.0 - 0.001)) <= 1e-12, "decoupled weight decay");
}

// ---------------------------------------------------------------------------

void synthetic_separability(Checks& c) {
  const auto start = Clock::now();
  SyntheticSpec spec;  // d_model 256, 500 queries, 32 responses
  const Dataset ds = generate_synthetic(spec);
  const QuerySplit split = split_by_query(ds.records, kDefaultValidationFraction, 1);
  const auto held = sample_groups(split.validation, kDefaultGroupSize, kDefaultGroupsPerQuery,
                                  LabelMode::classification, 2);
  c.note(std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()) +
         " train/held-out queries, " + std::to_string(held.groups.size()) + " held-out groups");

  testing::ElementwiseLogisticOracle oracle;
  oracle.fit(split.train);
  const double lr_acc = oracle.selection_accuracy(held.groups);
  c.note("logistic oracle " + fmt(lr_acc));
  c.expect(lr_acc >= 0.99, "logistic-regression oracle at least 0.99");

  for (auto kind : {RankerKind::listwise, RankerKind::pointwise}) {
    TrainConfig cfg;  // one epoch, K=10, N=16, AdamW 1e-4
    cfg.ranker = kind;
    const TrainResult trained = train(cfg, split.train, ds.meta);
    const double acc = selection_accuracy(trained.ranker, held.groups, LabelMode::classification);
    c.note(to_string(kind) + " " + fmt(acc) + " after " + std::to_string(trained.log.batches.size()) + " steps");
    c.expect(acc >= 0.95, to_string(kind) + " held-out accuracy at least 0.95");

    const std::vector<std::size_t> ks{1, 2, 4, 8, 10, 16};
    const auto curve = scaling_curve(trained.ranker, split.validation, LabelMode::classification, ks,
                                     kDefaultCurveTrials, 3);
    double at2 = -1.0, at10 = -1.0, prev_oracle = -1.0;
    bool monotone = true;
    for (const auto& pt : curve.points) {
      if (pt.k == 2) at2 = pt.mean;
      if (pt.k == 10) at10 = pt.mean;
      monotone = monotone && pt.oracle_mean >= prev_oracle;
      prev_oracle = pt.oracle_mean;
    }
    c.note(to_string(kind) + " curve K=2 " + fmt(at2) + ", K=10 " + fmt(at10));
    c.expect(at2 >= 0.0 && at10 >= at2, to_string(kind) + " accuracy(K=10) >= accuracy(K=2)");
    c.expect(monotone && curve.points.size() == ks.size(), to_string(kind) + " oracle curve non-decreasing in K");
  }
  const double t = seconds_since(start);
  c.expect(t < 180.0, "runtime under 3 minutes (took " + fmt(t, 1) + " s)");
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void cpu_speed_and_serialization(Checks& c) {
  SyntheticSpec spec;
  spec.queries = 374;
  spec.responses_per_query = 20;
  spec.d_model = 4096;
  spec.seed = 31;
  const Dataset ds = generate_synthetic(spec);
  for (auto kind : {RankerKind::listwise, RankerKind::pointwise}) {
    TrainConfig cfg;
    cfg.ranker = kind;
    cfg.group_size = 10;
    cfg.groups_per_query = 16;
    const auto start = Clock::now();
    const TrainResult r = train(cfg, ds.records, ds.meta);
    const double t = seconds_since(start);
    c.note(to_string(kind) + " " + std::to_string(r.log.groups) + " groups in " + fmt(t, 1) + " s");
    c.expect(t < 300.0, to_string(kind) + " trains in under 5 minutes");
  }

  testing::TempDir dir("acceptance");
  std::mt19937_64 rng(41);
  std::size_t exact = 0;
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<int> coin(0, 1), dim(4, 24), count(0, 5), resp(1, 6);
    // Checkpoint.
    RankerShape s;
    s.kind = coin(rng) != 0 ? RankerKind::listwise : RankerKind::pointwise;
    s.relevance = coin(rng) != 0 ? RelevanceKind::cosine : RelevanceKind::learnable;
    s.d_model = static_cast<std::size_t>(dim(rng));
    s.d_proj = std::min<std::size_t>(s.d_model, 4);
    s.d_hidden = 6;
    Ranker ranker = Ranker::initialize(s, rng());
    testing::jitter_params(ranker, rng, 0.5);
    const Checkpoint ck = Checkpoint::from_ranker(ranker, "{}", "fnv1a64:" + std::to_string(i));
    const auto cpath = dir / "c.lrck";
    save_checkpoint(ck, cpath);
    const Checkpoint back = load_checkpoint(cpath);
    const auto first = slurp(cpath);
    save_checkpoint(back, cpath);
    const bool ck_ok = back.shape == ck.shape && back.params == ck.params && slurp(cpath) == first;

    // Dataset.
    DatasetMeta meta;
    meta.d_model = static_cast<std::uint32_t>(dim(rng));
    meta.label_mode = coin(rng) != 0 ? LabelMode::classification : LabelMode::regression;
    meta.layer_index = count(rng);
    std::vector<FeatureRecord> recs;
    const int nq = count(rng);
    for (int q = 0; q < nq; ++q)
      recs.push_back(testing::random_record(static_cast<std::uint64_t>(rng() >> 1), meta.d_model,
                                            static_cast<std::size_t>(resp(rng)), rng, meta.label_mode));
    const auto dpath = dir / "d.lrfd";
    write_dataset(recs, meta, dpath);
    const Dataset loaded = read_dataset(dpath);
    const bool ds_ok = loaded.records == recs && loaded.meta == meta;
    if (ck_ok && ds_ok) ++exact;
  }
  c.note(std::to_string(exact) + "/1000 checkpoint and dataset round trips bit-exact");
  c.expect(exact == 1000, "all round trips bit-exact");
}

}  // namespace

// An optional argument runs only the criteria whose name contains it.
int main(int argc, char** argv) {
  if (argc > 1) only = argv[1];
  report("parameter budgets", parameter_budgets);
  report("gradient oracle", gradient_oracle);
  report("loss unit oracles", loss_oracles);
  report("structural invariants", structural_invariants);
  report("end-to-end synthetic separability", synthetic_separability);
  report("CPU speed and serialization", cpu_speed_and_serialization);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
