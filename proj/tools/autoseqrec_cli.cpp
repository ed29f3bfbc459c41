// Command-line front end: prepare, train, eval, grid, recommend, bench.
// Metric output is JSON on stdout; progress logs go to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "autoseqrec/error.hpp"
#include "autoseqrec/eval.hpp"
#include "autoseqrec/incremental.hpp"
#include "autoseqrec/ingest.hpp"
#include "autoseqrec/persist.hpp"

namespace fs = std::filesystem;
using namespace autoseqrec;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct TrainFlags {
  TrainConfig cfg;
  std::string transform = "log1p";
  std::string decoder_activation = "identity";

  void add(CLI::App* app, bool with_hidden = true) {
    if (with_hidden) app->add_option("--hidden", cfg.hidden, "Hidden (embedding) size k")->capture_default_str();
    app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    app->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--batch", cfg.batch_size, "Rows per mini-batch")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Seed for initialization and shuffling")->capture_default_str();
    app->add_option("--transform", transform, "Transition count transform: log1p or raw")->capture_default_str();
    app->add_option("--decoder-activation", decoder_activation, "Decoder activation: identity or sigmoid")
        ->capture_default_str();
    app->add_option("--early-stop-patience", cfg.early_stop_patience,
                    "Stop after this many validation checks without MRR improvement (0 = off)")
        ->capture_default_str();
    app->add_option("--eval-every", cfg.eval_every, "Epochs between validation checks")->capture_default_str();
  }

  TrainConfig resolve() {
    cfg.transform = parse_transform(transform);
    cfg.decoder_activation = parse_decoder_activation(decoder_activation);
    cfg.validate();
    return cfg;
  }
};

struct InferFlags {
  InferenceConfig cfg;
  std::string normalize = "minmax";
  std::string components = "collab,one_hop,two_hop";

  void add(CLI::App* app, bool with_lambdas = true) {
    if (with_lambdas) {
      app->add_option("--lambda1", cfg.lambda1, "Weight of the collaborative score")->capture_default_str();
      app->add_option("--lambda2", cfg.lambda2, "Weight of the one-hop transition score")->capture_default_str();
    }
    app->add_option("--hops", cfg.hops, "Transition hops for the embedding-based score (>= 2)")
        ->capture_default_str();
    app->add_option("--normalize", normalize, "Per-component normalization: minmax or none")->capture_default_str();
    app->add_option("--components", components, "Enabled score components (comma list of collab,one_hop,two_hop)")
        ->capture_default_str();
    app->add_flag("--filter-seen,!--no-filter-seen", cfg.filter_seen,
                  "Exclude items the user already interacted with (default on)");
    app->add_flag("--skip-cold", cfg.skip_cold_users, "Skip events of users without history instead of falling back");
    app->add_option("--k", cfg.top_k, "Cutoff K for Recall@K / number of recommendations")->capture_default_str();
  }

  InferenceConfig resolve() {
    cfg.normalization = parse_normalization(normalize);
    cfg.components = ComponentSet::parse(components);
    cfg.validate();
    return cfg;
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

SplitLog load_split(const std::string& dir, PreparedDataset& data) {
  data = read_prepared(dir);
  return chronological_split(data.log);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

EpochObserver epoch_logger() {
  return [](const EpochLog& e) {
    std::ostringstream line;
    line << std::setprecision(8) << "epoch=" << e.epoch << " L_c=" << e.loss.collab << " L_s=" << e.loss.source
         << " L_t=" << e.loss.target << " L=" << e.loss.total << " fro_c=" << std::sqrt(e.loss.collab)
         << " fro_s=" << std::sqrt(e.loss.source) << " fro_t=" << std::sqrt(e.loss.target)
         << " ms=" << std::setprecision(6) << e.wall_ms;
    if (e.validation_score) line << " val_mrr=" << *e.validation_score;
    std::cerr << line.str() + "\n";
  };
}

std::string per_event_csv(const std::vector<ReplayRecord>& records, const Vocabulary& vocab) {
  std::ostringstream out;
  out << "event_index,user,item,rank,reciprocal_rank,hit,latency_us,fallback\n";
  for (const auto& r : records) {
    out << r.event_index << ',' << vocab.user_key(r.user) << ',' << vocab.item_key(r.item) << ',' << r.rank << ','
        << r.reciprocal_rank << ',' << (r.hit ? 1 : 0) << ',' << r.latency_us << ',' << (r.fallback ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental autoencoder-based sequential recommender"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Parse, filter, index and write the canonical dataset");
  std::string format, input, out;
  int min_count = 5;
  bool iterative = false;
  prepare->add_option("--format", format, "Raw layout: ml100k, ml1m or amazon-csv")->required();
  prepare->add_option("--input", input, "Raw ratings file")->required();
  prepare->add_option("--out", out, "Output directory")->required();
  prepare->add_option("--min-count", min_count, "Minimum interactions per user and per item")->capture_default_str();
  prepare->add_flag("--iterative-filter", iterative, "Repeat min-count filtering until stable");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on the training split and write a checkpoint");
  TrainFlags train_flags;
  InferFlags train_infer;
  train_cmd->add_option("--input", input, "Prepared dataset directory")->required();
  train_cmd->add_option("--out", out, "Checkpoint path")->required();
  train_flags.add(train_cmd);
  train_infer.add(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Replay validation and test streams with a trained checkpoint");
  InferFlags eval_infer;
  std::string model, per_event, variant = "all";
  eval_cmd->add_option("--input", input, "Prepared dataset directory")->required();
  eval_cmd->add_option("--model", model, "Checkpoint path")->required();
  eval_cmd->add_option("--variant", variant,
                       "Ablation variant: all, only-hidden, hidden+interaction, hidden+transition, b.c, a.c, (a*b).c")
      ->capture_default_str();
  eval_cmd->add_option("--per-event-csv", per_event, "Write per-event test records to this CSV");
  eval_infer.add(eval_cmd);

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "Grid search over hidden sizes and lambda weights");
  TrainFlags grid_train;
  InferFlags grid_infer;
  std::vector<Eigen::Index> hidden_sizes = {32, 64, 128, 256};
  int jobs = 1;
  std::string heatmap, table, select_metric = "mrr", save_best;
  grid_cmd->add_option("--input", input, "Prepared dataset directory")->required();
  grid_cmd->add_option("--hidden", hidden_sizes, "Hidden sizes to train (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  grid_cmd->add_option("--jobs", jobs, "Models trained concurrently")->capture_default_str();
  grid_cmd->add_option("--emit-heatmap", heatmap, "Write lambda1 x lambda2 Recall@K CSV for the best hidden size");
  grid_cmd->add_option("--table", table, "Write every grid cell to this CSV");
  grid_cmd->add_option("--select", select_metric, "Validation selection metric: mrr or recall")->capture_default_str();
  grid_cmd->add_option("--save-best", save_best, "Write the checkpoint of the selected hidden size");
  grid_train.add(grid_cmd, false);
  grid_infer.add(grid_cmd, false);

  // recommend
  auto* rec_cmd = app.add_subcommand("recommend", "Top-K next items for a user after all known interactions");
  InferFlags rec_infer;
  std::string user;
  rec_cmd->add_option("--input", input, "Prepared dataset directory")->required();
  rec_cmd->add_option("--model", model, "Checkpoint path")->required();
  rec_cmd->add_option("--user", user, "External user key")->required();
  rec_infer.add(rec_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Incremental vs. full-recompute inference latency");
  TrainFlags bench_train;
  InferFlags bench_infer;
  std::size_t naive_events = 200, scaling_events = 1000;
  std::vector<Eigen::Index> scaling_hidden = {32, 64, 128, 256};
  bench_cmd->add_option("--input", input, "Prepared dataset directory")->required();
  bench_cmd->add_option("--model", model, "Checkpoint path (trains a fresh model and times it when omitted)");
  bench_cmd->add_option("--naive-events", naive_events, "Test events replayed on the full-recompute path")
      ->capture_default_str();
  bench_cmd->add_option("--scaling-hidden", scaling_hidden, "Hidden sizes for the latency scaling fit (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--scaling-events", scaling_events, "Test events per scaling measurement")
      ->capture_default_str();
  bench_train.add(bench_cmd);
  bench_infer.add(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (prepare->parsed()) {
      const auto fmt = parse_format(format);
      if (min_count < 1) throw ConfigError("--min-count must be >= 1");
      const auto parsed = parse_dataset(input, fmt);
      const auto filtered = filter_min_count(parsed.events, min_count, iterative);
      const auto data = index_and_sort(filtered);
      write_prepared(data, out);
      std::cerr << "parsed=" << parsed.events.size() << " malformed=" << parsed.malformed_lines
                << " kept=" << filtered.size() << " vocab_digest=" << data.vocab.digest_hex() << "\n";
      std::cout << "users=" << data.log.num_users << " items=" << data.log.num_items
                << " events=" << data.log.size() << std::endl;
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto tcfg = train_flags.resolve();
      const auto icfg = train_infer.resolve();
      PreparedDataset data;
      const auto split = load_split(input, data);
      const auto state = build_state(split.train);
      const auto result = train(
          state, tcfg, [&](const ModelParams& p) { return validation_mrr(split, p, icfg); }, epoch_logger());
      save_checkpoint(result.params, CheckpointMeta{data.log.num_users, tcfg.seed, data.vocab.digest_hex()}, out);
      const auto loss = reconstruction_loss(state, round_to_f32(result.params));
      std::ostringstream checksum;
      checksum << std::hex << params_checksum(round_to_f32(result.params));
      print_json({{"checkpoint", out},
                  {"train_ms", result.wall_ms},
                  {"epochs_run", result.epochs.size()},
                  {"best_epoch", result.best_epoch},
                  {"params_checksum", checksum.str()},
                  {"loss", {{"L_c", loss.collab}, {"L_s", loss.source}, {"L_t", loss.target}, {"L", loss.total}}},
                  {"config", config_json(tcfg)}});
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto base = eval_infer.resolve();
      const auto v = parse_ablation(variant);
      PreparedDataset data;
      const auto split = load_split(input, data);
      const auto ckpt = load_checkpoint(model, data.vocab.digest_hex());
      const auto run = run_ablation(split, ckpt.params, v, base);
      if (!per_event.empty()) write_text(per_event, per_event_csv(run.test_replay.records, data.vocab));
      print_json({{"variant", ablation_name(v)},
                  {"validation", to_json(run.validation)},
                  {"test", to_json(run.test)}});
      return 0;
    }

    if (grid_cmd->parsed()) {
      const auto tcfg = grid_train.resolve();
      const auto icfg = grid_infer.resolve();
      GridSpec spec;
      spec.hidden_sizes = hidden_sizes;
      if (select_metric == "mrr") spec.metric = SelectionMetric::mrr;
      else if (select_metric == "recall") spec.metric = SelectionMetric::recall;
      else throw ConfigError("--select must be mrr or recall");
      for (auto k : hidden_sizes)
        if (k < 1) throw ConfigError("--hidden values must be >= 1");
      if (jobs < 1) throw ConfigError("--jobs must be >= 1");
      PreparedDataset data;
      const auto split = load_split(input, data);
      const auto result = grid_search(split, spec, tcfg, icfg, jobs, epoch_logger());
      if (!table.empty()) write_text(table, grid_table_csv(result));
      if (!heatmap.empty()) {
        write_text(heatmap, heatmap_csv(result, result.best_by_validation.hidden, spec.lambda_values));
      }
      if (!save_best.empty()) {
        for (const auto& m : result.models) {
          if (m.hidden == result.best_by_validation.hidden) {
            save_checkpoint(m.params, CheckpointMeta{data.log.num_users, tcfg.seed, data.vocab.digest_hex()},
                            save_best);
          }
        }
      }
      print_json(to_json(result));
      return 0;
    }

    if (rec_cmd->parsed()) {
      const auto icfg = rec_infer.resolve();
      PreparedDataset data;
      data = read_prepared(input);
      const auto ckpt = load_checkpoint(model, data.vocab.digest_hex());
      const UserIndex u = data.vocab.find_user(user);
      if (u < 0) throw Error("unknown user '" + user + "'");
      if (icfg.top_k > data.log.num_items) throw ConfigError("--k exceeds the number of items");
      const auto state = build_state(data.log);
      const auto cache = warm_cache(state, ckpt.params);
      const auto p = predict_next(u, state, cache, ckpt.params, icfg);
      const auto items = top_k(p.scores, icfg.top_k);
      std::cout << std::setprecision(9);
      for (std::size_t r = 0; r < items.size(); ++r) {
        std::cout << (r + 1) << '\t' << data.vocab.item_key(items[r]) << '\t' << p.scores[items[r]] << '\n';
      }
      if (p.fallback) std::cerr << "user has no previous item; collaborative score only\n";
      return 0;
    }

    if (bench_cmd->parsed()) {
      const auto tcfg = bench_train.resolve();
      const auto icfg = bench_infer.resolve();
      PreparedDataset data;
      const auto split = load_split(input, data);
      ModelParams params;
      double train_ms = 0.0;
      if (!model.empty()) {
        params = load_checkpoint(model, data.vocab.digest_hex()).params;
      } else {
        const auto trained = train(build_state(split.train), tcfg, {}, epoch_logger());
        params = trained.params;
        train_ms = trained.wall_ms;
      }
      auto report = bench_efficiency(split, params, icfg, naive_events);
      report.train_ms = train_ms;
      report.scaling = bench_latency_scaling(split, scaling_hidden, icfg, scaling_events);
      if (report.scaling.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& p : report.scaling) {
          xs.push_back(static_cast<double>(p.hidden));
          ys.push_back(p.mean_us);
        }
        report.scaling_fit = fit_line(xs, ys);
      }
      print_json(to_json(report));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
