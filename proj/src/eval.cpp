#include "autoseqrec/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

namespace {

InteractionLog concat(const InteractionLog& a, const InteractionLog& b) {
  InteractionLog out = a;
  out.events.insert(out.events.end(), b.events.begin(), b.events.end());
  return out;
}

std::string format_lambda(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << v;
  return s.str();
}

double select(const GridCell& c, SelectionMetric m, bool test) {
  if (test) return m == SelectionMetric::mrr ? c.test_mrr : c.test_recall;
  return m == SelectionMetric::mrr ? c.val_mrr : c.val_recall;
}

std::string_view two_hop_factors_name(TwoHopFactors f) {
  switch (f) {
    case TwoHopFactors::both: return "both";
    case TwoHopFactors::source_only: return "source_only";
    case TwoHopFactors::collab_only: return "collab_only";
  }
  return "?";
}

}  // namespace

double mrr(std::span<const std::int64_t> ranks) {
  if (ranks.empty()) throw Error("mrr of an empty rank list");
  double sum = 0.0;
  for (auto r : ranks) {
    if (r < 1) throw Error("ranks must be >= 1");
    sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

double recall_at_k(std::span<const std::int64_t> ranks, int k) {
  if (ranks.empty()) throw Error("recall of an empty rank list");
  if (k < 1) throw Error("recall needs K >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::int64_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<std::int64_t> ranks_of(const std::vector<ReplayRecord>& records) {
  std::vector<std::int64_t> ranks;
  ranks.reserve(records.size());
  for (const auto& r : records) ranks.push_back(r.rank);
  return ranks;
}

nlohmann::json config_json(const InferenceConfig& cfg) {
  return {{"lambda1", cfg.lambda1},
          {"lambda2", cfg.lambda2},
          {"hops", cfg.hops},
          {"normalization", normalization_name(cfg.normalization)},
          {"components", cfg.components.to_string()},
          {"two_hop_factors", two_hop_factors_name(cfg.two_hop_factors)},
          {"filter_seen", cfg.filter_seen},
          {"skip_cold_users", cfg.skip_cold_users},
          {"k", cfg.top_k}};
}

nlohmann::json config_json(const TrainConfig& cfg) {
  return {{"hidden", cfg.hidden},
          {"lr", cfg.learning_rate},
          {"epochs", cfg.epochs},
          {"batch", cfg.batch_size},
          {"seed", cfg.seed},
          {"transform", transform_name(cfg.transform)},
          {"decoder_activation", activation_name(cfg.decoder_activation)},
          {"early_stop_patience", cfg.early_stop_patience}};
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"events", r.events},
          {"mrr", r.mrr},
          {"recall_at_k", r.recall_at_k},
          {"k", r.k},
          {"fallback_count", r.fallback_count},
          {"latency_us", {{"mean", r.latency.mean_us}, {"p50", r.latency.p50_us}, {"p95", r.latency.p95_us}}},
          {"config", r.config}};
}

MetricReport report_from(const ReplayResult& replay, const InferenceConfig& cfg) {
  MetricReport r;
  r.k = cfg.top_k;
  r.events = replay.records.size();
  r.fallback_count = replay.fallback_count;
  r.latency = replay.latency;
  r.config = config_json(cfg);
  if (!replay.records.empty()) {
    const auto ranks = ranks_of(replay.records);
    r.mrr = mrr(ranks);
    r.recall_at_k = recall_at_k(ranks, cfg.top_k);
  }
  return r;
}

EvaluationRun evaluate_model(const SplitLog& split, const ModelParams& params, const InferenceConfig& cfg,
                             bool count_self_transitions) {
  cfg.validate();
  MatrixState state = build_state(split.train, count_self_transitions);
  EmbeddingCache cache = warm_cache(state, params);
  EvaluationRun run;
  run.validation = report_from(replay(split.validation, state, cache, params, cfg), cfg);
  run.test_replay = replay(split.test, state, cache, params, cfg);
  run.test = report_from(run.test_replay, cfg);
  return run;
}

double validation_mrr(const SplitLog& split, const ModelParams& params, const InferenceConfig& cfg) {
  MatrixState state = build_state(split.train);
  EmbeddingCache cache = warm_cache(state, params);
  return report_from(replay(split.validation, state, cache, params, cfg), cfg).mrr;
}

FutureInteractionResult run_future_interaction(const SplitLog& split, const TrainConfig& train_cfg,
                                               const InferenceConfig& infer_cfg, const EpochObserver& observer) {
  infer_cfg.validate();
  const MatrixState train_state = build_state(split.train);
  FutureInteractionResult out;
  out.training = train(
      train_state, train_cfg, [&](const ModelParams& p) { return validation_mrr(split, p, infer_cfg); }, observer);
  out.evaluation = evaluate_model(split, out.training.params, infer_cfg);
  return out;
}

std::vector<double> default_lambda_values() {
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(i / 10.0);
  return v;
}

std::vector<std::pair<double, double>> admissible_lambda_pairs(const std::vector<double>& values) {
  std::vector<std::pair<double, double>> pairs;
  for (double a : values)
    for (double b : values)
      if (lambdas_admissible(a, b)) pairs.emplace_back(a, b);
  return pairs;
}

LambdaSweep::LambdaSweep(std::vector<std::pair<double, double>> pairs, InferenceConfig base)
    : pairs_(std::move(pairs)), base_(std::move(base)), rr_sum_(pairs_.size(), 0.0), hits_(pairs_.size(), 0) {
  if (pairs_.empty()) throw ConfigError("lambda sweep needs at least one admissible pair");
  base_.validate();
}

StepObserver LambdaSweep::observer() {
  return [this](std::size_t, const Event& e, const MatrixState& state, const PredictionComponents& parts,
                const ScoreVector&) { observe(e, state, parts); };
}

void LambdaSweep::observe(const Event& event, const MatrixState& state, const PredictionComponents& parts) {
  ++events_;
  // Normalize once; finalize_scores then performs the same arithmetic combine() would.
  PredictionComponents normalized = parts;
  InferenceConfig cfg = base_;
  if (cfg.normalization == Normalization::minmax) {
    minmax_normalize(normalized.collab.values);
    minmax_normalize(normalized.one_hop.values);
    minmax_normalize(normalized.two_hop.values);
    cfg.normalization = Normalization::none;
  }
  if (parts.fallback()) {
    const auto rank = rank_of(finalize_scores(event.user, normalized, state, cfg), event.item);
    for (std::size_t c = 0; c < pairs_.size(); ++c) {
      rr_sum_[c] += 1.0 / static_cast<double>(rank);
      hits_[c] += rank <= cfg.top_k ? 1 : 0;
    }
    return;
  }
  for (std::size_t c = 0; c < pairs_.size(); ++c) {
    cfg.lambda1 = pairs_[c].first;
    cfg.lambda2 = pairs_[c].second;
    const auto rank = rank_of(finalize_scores(event.user, normalized, state, cfg), event.item);
    rr_sum_[c] += 1.0 / static_cast<double>(rank);
    hits_[c] += rank <= cfg.top_k ? 1 : 0;
  }
}

std::vector<LambdaCell> LambdaSweep::cells() const {
  std::vector<LambdaCell> out;
  for (std::size_t c = 0; c < pairs_.size(); ++c) {
    LambdaCell cell{pairs_[c].first, pairs_[c].second, 0.0, 0.0};
    if (events_ > 0) {
      cell.mrr = rr_sum_[c] / static_cast<double>(events_);
      cell.recall_at_k = static_cast<double>(hits_[c]) / static_cast<double>(events_);
    }
    out.push_back(cell);
  }
  return out;
}

GridResult grid_search(const SplitLog& split, const GridSpec& grid, const TrainConfig& train_cfg,
                       const InferenceConfig& infer_cfg, int jobs, const EpochObserver& observer) {
  if (grid.hidden_sizes.empty() || grid.lambda_values.empty()) throw ConfigError("grid must not be empty");
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  infer_cfg.validate();
  const auto pairs = admissible_lambda_pairs(grid.lambda_values);
  const MatrixState train_state = build_state(split.train);

  struct HiddenOutcome {
    GridModel model;
    std::vector<GridCell> cells;
  };
  auto run_one = [&](Eigen::Index hidden) {
    TrainConfig cfg = train_cfg;
    cfg.hidden = hidden;
    HiddenOutcome out;
    const TrainResult trained = train(train_state, cfg, {}, observer);
    out.model.hidden = hidden;
    out.model.train_ms = trained.wall_ms;
    out.model.params = trained.params;
    out.model.checksum_before = params_checksum(trained.params);

    MatrixState state = train_state;
    EmbeddingCache cache = warm_cache(state, trained.params);
    LambdaSweep val_sweep(pairs, infer_cfg);
    replay(split.validation, state, cache, trained.params, infer_cfg, val_sweep.observer());
    LambdaSweep test_sweep(pairs, infer_cfg);
    replay(split.test, state, cache, trained.params, infer_cfg, test_sweep.observer());
    out.model.checksum_after = params_checksum(trained.params);

    const auto vc = val_sweep.cells();
    const auto tc = test_sweep.cells();
    for (std::size_t c = 0; c < vc.size(); ++c) {
      out.cells.push_back(GridCell{hidden, vc[c].lambda1, vc[c].lambda2, vc[c].mrr, vc[c].recall_at_k, tc[c].mrr,
                                   tc[c].recall_at_k});
    }
    return out;
  };

  std::vector<HiddenOutcome> outcomes;
  for (std::size_t start = 0; start < grid.hidden_sizes.size(); start += static_cast<std::size_t>(jobs)) {
    std::vector<std::future<HiddenOutcome>> running;
    const auto end = std::min(grid.hidden_sizes.size(), start + static_cast<std::size_t>(jobs));
    for (std::size_t h = start; h < end; ++h) {
      running.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, run_one,
                                   grid.hidden_sizes[h]));
    }
    for (auto& f : running) outcomes.push_back(f.get());
  }

  GridResult result;
  for (auto& o : outcomes) {
    result.cells.insert(result.cells.end(), o.cells.begin(), o.cells.end());
    result.models.push_back(std::move(o.model));
  }
  result.best_by_validation = result.cells.front();
  result.best_by_test = result.cells.front();
  for (const auto& c : result.cells) {
    if (select(c, grid.metric, false) > select(result.best_by_validation, grid.metric, false)) {
      result.best_by_validation = c;
    }
    if (select(c, grid.metric, true) > select(result.best_by_test, grid.metric, true)) result.best_by_test = c;
  }
  return result;
}

nlohmann::json to_json(const GridCell& c) {
  return {{"hidden", c.hidden},         {"lambda1", c.lambda1},   {"lambda2", c.lambda2},
          {"val_mrr", c.val_mrr},       {"val_recall", c.val_recall}, {"test_mrr", c.test_mrr},
          {"test_recall", c.test_recall}};
}

nlohmann::json to_json(const GridResult& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models) {
    models.push_back({{"hidden", m.hidden},
                      {"train_ms", m.train_ms},
                      {"weights_unchanged_by_sweep", m.checksum_before == m.checksum_after}});
  }
  return {{"cells", r.cells.size()},
          {"models", models},
          {"best_by_validation", to_json(r.best_by_validation)},
          {"best_by_test", to_json(r.best_by_test)}};
}

std::string grid_table_csv(const GridResult& r) {
  std::ostringstream out;
  out << "hidden,lambda1,lambda2,val_mrr,val_recall,test_mrr,test_recall\n";
  out << std::setprecision(6);
  for (const auto& c : r.cells) {
    out << c.hidden << ',' << format_lambda(c.lambda1) << ',' << format_lambda(c.lambda2) << ',' << c.val_mrr << ','
        << c.val_recall << ',' << c.test_mrr << ',' << c.test_recall << '\n';
  }
  return out.str();
}

std::string heatmap_csv(const GridResult& r, Eigen::Index hidden, const std::vector<double>& lambda_values,
                        bool test_stream) {
  std::map<std::pair<long, long>, double> value;
  auto key = [](double a, double b) { return std::pair<long, long>(std::lround(a * 1e6), std::lround(b * 1e6)); };
  for (const auto& c : r.cells) {
    if (c.hidden == hidden) value[key(c.lambda1, c.lambda2)] = test_stream ? c.test_recall : c.val_recall;
  }
  std::ostringstream out;
  out << "lambda1\\lambda2";
  for (double b : lambda_values) out << ',' << format_lambda(b);
  out << '\n' << std::setprecision(6);
  for (double a : lambda_values) {
    out << format_lambda(a);
    for (double b : lambda_values) {
      out << ',';
      const auto it = value.find(key(a, b));
      if (it != value.end()) out << it->second;
    }
    out << '\n';
  }
  return out.str();
}

AblationVariant parse_ablation(std::string_view tag) {
  for (auto v : kAblationVariants)
    if (ablation_name(v) == tag) return v;
  throw ConfigError("unknown ablation variant '" + std::string(tag) + "'");
}

std::string_view ablation_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::b_c: return "b.c";
    case AblationVariant::a_c: return "a.c";
    case AblationVariant::ab_c: return "(a*b).c";
    case AblationVariant::only_hidden: return "only-hidden";
    case AblationVariant::hidden_interaction: return "hidden+interaction";
    case AblationVariant::hidden_transition: return "hidden+transition";
    case AblationVariant::all: return "all";
  }
  return "?";
}

InferenceConfig ablation_config(AblationVariant variant, const InferenceConfig& base) {
  InferenceConfig cfg = base;
  const ComponentSet hidden_only{false, false, true};
  switch (variant) {
    case AblationVariant::b_c:
      cfg.components = hidden_only;
      cfg.two_hop_factors = TwoHopFactors::source_only;
      break;
    case AblationVariant::a_c:
      cfg.components = hidden_only;
      cfg.two_hop_factors = TwoHopFactors::collab_only;
      break;
    case AblationVariant::ab_c:
    case AblationVariant::only_hidden:
      cfg.components = hidden_only;
      cfg.two_hop_factors = TwoHopFactors::both;
      break;
    case AblationVariant::hidden_interaction:
      cfg.components = ComponentSet{true, false, true};
      break;
    case AblationVariant::hidden_transition:
      cfg.components = ComponentSet{false, true, true};
      break;
    case AblationVariant::all:
      break;
  }
  return cfg;
}

EvaluationRun run_ablation(const SplitLog& split, const ModelParams& params, AblationVariant variant,
                           const InferenceConfig& base) {
  return evaluate_model(split, params, ablation_config(variant, base));
}

LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw Error("linear fit needs at least two paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return fit;
}

BenchReport bench_efficiency(const SplitLog& split, const ModelParams& params, const InferenceConfig& cfg,
                             std::size_t naive_events) {
  BenchReport report;
  const InteractionLog history = concat(split.train, split.validation);
  const MatrixState base_state = build_state(history);
  {
    MatrixState state = base_state;
    EmbeddingCache cache = warm_cache(state, params);
    const auto full = replay(split.test, state, cache, params, cfg);
    report.incremental_events = full.records.size();
    report.incremental = full.latency;
  }
  const InteractionLog prefix = slice(split.test, 0, std::min(naive_events, split.test.size()));
  report.compared_events = prefix.size();
  if (!prefix.empty()) {
    MatrixState state = base_state;
    EmbeddingCache cache = warm_cache(state, params);
    report.incremental_compared_mean_us = replay(prefix, state, cache, params, cfg).latency.mean_us;
    report.naive_mean_us = naive_replay(history, prefix, params, cfg).latency.mean_us;
    if (report.incremental_compared_mean_us > 0.0) {
      report.speedup = report.naive_mean_us / report.incremental_compared_mean_us;
    }
  }
  return report;
}

std::vector<ScalingPoint> bench_latency_scaling(const SplitLog& split, const std::vector<Eigen::Index>& hidden_sizes,
                                                const InferenceConfig& cfg, std::size_t events, int repeats,
                                                std::uint64_t seed) {
  const MatrixState base_state = build_state(concat(split.train, split.validation));
  const InteractionLog stream = slice(split.test, 0, std::min(events, split.test.size()));
  std::vector<ScalingPoint> points;
  for (auto k : hidden_sizes) {
    const ModelParams params = init_params(base_state.num_items(), k, seed);
    double best = 0.0;
    for (int r = 0; r < std::max(1, repeats); ++r) {
      MatrixState state = base_state;
      EmbeddingCache cache = warm_cache(state, params);
      const double mean = replay(stream, state, cache, params, cfg).latency.mean_us;
      best = r == 0 ? mean : std::min(best, mean);
    }
    points.push_back(ScalingPoint{k, best});
  }
  return points;
}

nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json scaling = nlohmann::json::array();
  for (const auto& p : r.scaling) scaling.push_back({{"hidden", p.hidden}, {"mean_us", p.mean_us}});
  return {{"train_ms", r.train_ms},
          {"incremental", {{"events", r.incremental_events},
                           {"mean_us", r.incremental.mean_us},
                           {"p50_us", r.incremental.p50_us},
                           {"p95_us", r.incremental.p95_us}}},
          {"naive_comparison", {{"events", r.compared_events},
                                {"incremental_mean_us", r.incremental_compared_mean_us},
                                {"naive_mean_us", r.naive_mean_us},
                                {"speedup", r.speedup}}},
          {"scaling", scaling},
          {"scaling_fit", {{"slope_us_per_k", r.scaling_fit.slope},
                           {"intercept_us", r.scaling_fit.intercept},
                           {"r2", r.scaling_fit.r2}}}};
}

}  // namespace autoseqrec
