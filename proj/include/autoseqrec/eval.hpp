#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autoseqrec/incremental.hpp"
#include "autoseqrec/ingest.hpp"
#include "autoseqrec/model.hpp"
#include "autoseqrec/scoring.hpp"

namespace autoseqrec {

double mrr(std::span<const std::int64_t> ranks);
double recall_at_k(std::span<const std::int64_t> ranks, int k);

std::vector<std::int64_t> ranks_of(const std::vector<ReplayRecord>& records);

struct MetricReport {
  double mrr = 0.0;
  double recall_at_k = 0.0;
  int k = 10;
  std::size_t events = 0;
  std::size_t fallback_count = 0;
  LatencyStats latency;
  nlohmann::json config;
};

nlohmann::json config_json(const InferenceConfig& cfg);
nlohmann::json config_json(const TrainConfig& cfg);
nlohmann::json to_json(const MetricReport& report);

MetricReport report_from(const ReplayResult& replay, const InferenceConfig& cfg);

struct EvaluationRun {
  MetricReport validation;
  MetricReport test;
  ReplayResult test_replay;
};

/// Builds matrices from the training split, replays validation then test with frozen weights.
EvaluationRun evaluate_model(const SplitLog& split, const ModelParams& params, const InferenceConfig& cfg,
                             bool count_self_transitions = true);

struct FutureInteractionResult {
  TrainResult training;
  EvaluationRun evaluation;
};

/// Train on the training split, then evaluate. Early stopping (if configured) scores validation MRR.
FutureInteractionResult run_future_interaction(const SplitLog& split, const TrainConfig& train_cfg,
                                               const InferenceConfig& infer_cfg, const EpochObserver& observer = {});

/// Validation MRR of `params` under `cfg`; usable as a ValidationScorer for early stopping.
double validation_mrr(const SplitLog& split, const ModelParams& params, const InferenceConfig& cfg);

// ---- lambda sweep -------------------------------------------------------------------

/// All (lambda1, lambda2) pairs from `values` with lambda1 + lambda2 <= 1.
std::vector<std::pair<double, double>> admissible_lambda_pairs(const std::vector<double>& values);
std::vector<double> default_lambda_values();

struct LambdaCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double mrr = 0.0;
  double recall_at_k = 0.0;
};

/// Evaluates every lambda pair from one replay: combine() is the only lambda-dependent stage,
/// so each event's components are combined once per pair and ranked.
class LambdaSweep {
 public:
  LambdaSweep(std::vector<std::pair<double, double>> pairs, InferenceConfig base);

  StepObserver observer();
  void observe(const Event& event, const MatrixState& state, const PredictionComponents& parts);
  std::vector<LambdaCell> cells() const;
  std::size_t events() const { return events_; }

 private:
  std::vector<std::pair<double, double>> pairs_;
  InferenceConfig base_;
  std::vector<double> rr_sum_;
  std::vector<std::size_t> hits_;
  std::size_t events_ = 0;
};

// ---- grid search --------------------------------------------------------------------

enum class SelectionMetric { mrr, recall };

struct GridSpec {
  std::vector<Eigen::Index> hidden_sizes = {32, 64, 128, 256};
  std::vector<double> lambda_values = default_lambda_values();
  SelectionMetric metric = SelectionMetric::mrr;
};

struct GridCell {
  Eigen::Index hidden = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double val_mrr = 0.0;
  double val_recall = 0.0;
  double test_mrr = 0.0;
  double test_recall = 0.0;
};

struct GridModel {
  Eigen::Index hidden = 0;
  double train_ms = 0.0;
  std::uint64_t checksum_before = 0;
  std::uint64_t checksum_after = 0;
  ModelParams params;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::vector<GridModel> models;
  GridCell best_by_validation;
  GridCell best_by_test;
};

/// Trains one model per hidden size (up to `jobs` concurrently) and sweeps the lambda grid
/// on validation and test without retraining.
GridResult grid_search(const SplitLog& split, const GridSpec& grid, const TrainConfig& train_cfg,
                       const InferenceConfig& infer_cfg, int jobs = 1, const EpochObserver& observer = {});

nlohmann::json to_json(const GridCell& cell);
nlohmann::json to_json(const GridResult& result);
/// CSV of every cell.
std::string grid_table_csv(const GridResult& result);
/// lambda1 x lambda2 matrix of Recall@K (test stream by default) for one hidden size; inadmissible cells are empty.
std::string heatmap_csv(const GridResult& result, Eigen::Index hidden, const std::vector<double>& lambda_values,
                        bool test_stream = true);

// ---- ablations ----------------------------------------------------------------------

enum class AblationVariant { b_c, a_c, ab_c, only_hidden, hidden_interaction, hidden_transition, all };

AblationVariant parse_ablation(std::string_view tag);
std::string_view ablation_name(AblationVariant v);
inline constexpr std::array<AblationVariant, 7> kAblationVariants = {
    AblationVariant::b_c,         AblationVariant::a_c,
    AblationVariant::ab_c,        AblationVariant::only_hidden,
    AblationVariant::hidden_interaction, AblationVariant::hidden_transition,
    AblationVariant::all};

/// Scoring configuration realizing `variant`, keeping the lambdas of `base`.
InferenceConfig ablation_config(AblationVariant variant, const InferenceConfig& base);

EvaluationRun run_ablation(const SplitLog& split, const ModelParams& params, AblationVariant variant,
                           const InferenceConfig& base);

// ---- efficiency ---------------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

struct ScalingPoint {
  Eigen::Index hidden = 0;
  double mean_us = 0.0;
};

struct BenchReport {
  double train_ms = 0.0;
  std::size_t incremental_events = 0;
  LatencyStats incremental;
  std::size_t compared_events = 0;
  double incremental_compared_mean_us = 0.0;
  double naive_mean_us = 0.0;
  double speedup = 0.0;
  std::vector<ScalingPoint> scaling;
  LinearFit scaling_fit;
};

/// Incremental replay over the test stream, plus incremental vs. full-rebuild latency on the
/// first `naive_events` test events.
BenchReport bench_efficiency(const SplitLog& split, const ModelParams& params, const InferenceConfig& cfg,
                             std::size_t naive_events = 200);

/// Mean per-event incremental latency for each hidden size, using freshly initialized weights
/// (latency depends on shapes, not values). Best of `repeats` runs over `events` test events.
std::vector<ScalingPoint> bench_latency_scaling(const SplitLog& split, const std::vector<Eigen::Index>& hidden_sizes,
                                                const InferenceConfig& cfg, std::size_t events, int repeats = 3,
                                                std::uint64_t seed = 7);

nlohmann::json to_json(const BenchReport& report);

}  // namespace autoseqrec
