#pragma once

// Command-line front end: synth, train, score, eval, correlate.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.
// Every subcommand echoes its resolved options (defaults included) before
// doing any work.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rankmil/data.hpp"
#include "rankmil/detail/bytes.hpp"
#include "rankmil/detail/csv.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/losses.hpp"
#include "rankmil/metrics.hpp"
#include "rankmil/model.hpp"
#include "rankmil/synth.hpp"
#include "rankmil/trainer.hpp"

namespace rankmil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Input that is structurally wrong for the subcommand (e.g. a score file
/// without a label column); reported with the usage exit code.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct ScoreRow {
  std::string bag_id;
  double score = 0.0;
  std::optional<int> label;
};

/// "bag_id,score,label" with scores at 6 decimal places.
inline std::string format_scores_csv(std::span<const BagScore> scores, const Dataset& ds) {
  std::string out = "bag_id,score,label\n";
  char buf[64];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.6f,%d\n", scores[i].score, to_int(ds.bags[i].label));
    out += scores[i].bag_id + buf;
  }
  return out;
}

/// Reads a score CSV. Columns are located by header name; `label` is
/// optional unless `need_labels` is set.
inline std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path, bool need_labels) {
  const auto lines = detail::parse_csv(detail::read_text(path));
  const std::string where = path.string();
  if (lines.empty()) throw UsageError(where + ": empty score file");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < lines[0].cells.size(); ++i) {
    col[std::string(detail::trim(lines[0].cells[i]))] = i;
  }
  if (!col.count("bag_id") || !col.count("score")) {
    throw UsageError(where + ": header must contain bag_id and score columns");
  }
  if (need_labels && !col.count("label")) throw UsageError(where + ": missing label column");
  std::vector<ScoreRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const std::string at = where + ": line " + std::to_string(line.number);
    if (line.cells.size() != lines[0].cells.size()) throw FormatError(at + ": wrong field count");
    ScoreRow row;
    row.bag_id = std::string(detail::trim(line.cells[col["bag_id"]]));
    const auto score = detail::parse_double(line.cells[col["score"]]);
    if (!score) throw FormatError(at + ": bad score '" + line.cells[col["score"]] + "'");
    row.score = *score;
    if (col.count("label")) {
      const auto label = detail::trim(line.cells[col["label"]]);
      if (label == "0" || label == "1") {
        row.label = label == "1" ? 1 : 0;
      } else if (!label.empty()) {
        throw DataError(at + ": label '" + std::string(label) + "' is not in {0,1}");
      } else if (need_labels) {
        throw DataError(at + ": missing label");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace internal {

inline void echo_config(const CLI::App& sub, std::ostream& out) {
  out << "# " << sub.get_name() << " configuration\n" << sub.config_to_str(true, false);
}

/// Rejects 0 as well as values above 1.
inline CLI::Validator unit_interval_open_left() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (...) {
          return "not a number: " + s;
        }
        if (!(v > 0.0 && v <= 1.0)) return "value " + s + " not in (0, 1]";
        return {};
      },
      "(0,1]");
}

}  // namespace internal

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
  std::size_t val_pos = 8;
  std::size_t val_neg = 20;
  std::size_t test_pos = 0;
  std::size_t test_neg = 0;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthGenerator gen(a.cfg);
  const std::filesystem::path root(a.out);
  auto train = gen.draw(a.cfg.n_pos, a.cfg.n_neg, "train_");
  write_dataset(train, root / "train");
  out << "train: " << train.count(Label::Positive) << " positive, "
      << train.count(Label::Negative) << " negative bags -> " << (root / "train").string() << "\n";
  if (a.val_pos + a.val_neg > 0) {
    auto val = gen.draw(a.val_pos, a.val_neg, "val_");
    write_dataset(val, root / "val");
    out << "val: " << a.val_pos << " positive, " << a.val_neg << " negative bags -> "
        << (root / "val").string() << "\n";
  }
  if (a.test_pos + a.test_neg > 0) {
    auto test = gen.draw(a.test_pos, a.test_neg, "test_");
    write_dataset(test, root / "test");
    out << "test: " << a.test_pos << " positive, " << a.test_neg << " negative bags -> "
        << (root / "test").string() << "\n";
  }
  out << "D=" << a.cfg.dim << " seed=" << a.cfg.seed << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string train;
  std::string val;
  std::string loss = "triplet-ranking";
  std::string optimizer = "adam";
  std::string out;
  std::string log;
  TrainConfig cfg;
};

inline LossVariant parse_loss_name(const std::string& name) {
  if (name == "triplet-ranking") return LossVariant::TripletRanking;
  if (name == "pairwise") return LossVariant::PairwiseRanking;
  if (name == "ce") return LossVariant::CrossEntropy;
  if (name == "mse") return LossVariant::MSE;
  throw UsageError("unknown loss '" + name + "'");
}

inline int cmd_train(TrainArgs a, std::ostream& out) {
  a.cfg.loss.variant = parse_loss_name(a.loss);
  a.cfg.optimizer.kind = a.optimizer == "sgd" ? OptimizerKind::SGD : OptimizerKind::Adam;
  const auto train_set = load_dataset(a.train);
  const auto val_set = load_dataset(a.val);
  const auto report = train(train_set, val_set, a.cfg);
  save_checkpoint(a.out, report.params);
  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  detail::write_text(log_path, format_train_log(report));
  char buf[128];
  std::snprintf(buf, sizeof buf, "best epoch %zu of %zu: validation AUC %.4f\n", report.best_epoch,
                report.history.size(), report.best_val_auc);
  out << "checkpoint: " << a.out << "\nlog: " << log_path << "\n" << buf;
  return kExitOk;
}

struct ScoreArgs {
  std::string model;
  std::string data;
  std::string out;
  double topk = 0.1;
};

inline int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const auto params = load_checkpoint(a.model);
  const auto ds = load_dataset(a.data);
  if (!ds.empty() && ds.dim != params.dim()) {
    throw DataError("dimension mismatch: model D=" + std::to_string(params.dim()) +
                    ", data D=" + std::to_string(ds.dim));
  }
  const auto scores = score_dataset(params, ds, a.topk);
  detail::write_text(a.out, format_scores_csv(scores, ds));
  out << "scored " << scores.size() << " bags -> " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string scores;
  std::string curves;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto rows = read_scores_csv(a.scores, true);
  Vector scores;
  std::vector<int> labels;
  for (const auto& r : rows) {
    scores.push_back(r.score);
    labels.push_back(*r.label);
  }
  const auto report = evaluate(scores, labels);
  if (!a.curves.empty()) {
    std::filesystem::create_directories(a.curves);
    auto dump = [](const std::vector<CurvePoint>& pts, const char* header) {
      std::string text = header;
      char buf[64];
      for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.x, p.y);
        text += buf;
      }
      return text;
    };
    const std::filesystem::path dir(a.curves);
    detail::write_text(dir / "roc.csv", dump(report.roc_points, "fpr,tpr\n"));
    detail::write_text(dir / "pr.csv", dump(report.pr_points, "recall,precision\n"));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "AUC %.4f AP %.4f\n", report.auc, report.ap);
  out << "n_pos=" << report.n_pos << " n_neg=" << report.n_neg << "\n" << buf;
  return kExitOk;
}

struct CorrelateArgs {
  std::string scores;
  std::string covariates;
  std::string out;
};

inline int cmd_correlate(const CorrelateArgs& a, std::ostream& out, std::ostream& err) {
  const auto rows = read_scores_csv(a.scores, false);
  std::vector<BagScore> scores;
  for (const auto& r : rows) scores.push_back({r.bag_id, r.score, {}, {}});
  const auto table = load_covariates(a.covariates);
  const auto report = correlate_table(scores, table);
  std::string text = "name,rho,p_value,n\n";
  char buf[96];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6g,%zu\n", e.corr.rho, e.corr.p_value, e.corr.n);
    text += e.name + buf;
  }
  detail::write_text(a.out, text);
  for (const auto& [name, why] : report.excluded) {
    err << "warning: column '" << name << "' excluded: " << why << "\n";
  }
  out << "joined " << report.joined_rows << " rows (" << report.unmatched_rows
      << " unmatched), " << report.entries.size() << " columns correlated, "
      << report.excluded.size() << " excluded -> " << a.out << "\n";
  return kExitOk;
}

/// Parses argv and runs one subcommand. argv[0] is the program name.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Ranking-based multiple instance learning on bags of feature vectors", "rankmil"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic witness-rate dataset");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--dim", synth_args.cfg.dim, "Feature dimension D")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  synth->add_option("--pos", synth_args.cfg.n_pos, "Positive training bags");
  synth->add_option("--neg", synth_args.cfg.n_neg, "Negative training bags");
  synth->add_option("--val-pos", synth_args.val_pos, "Positive validation bags");
  synth->add_option("--val-neg", synth_args.val_neg, "Negative validation bags");
  synth->add_option("--test-pos", synth_args.test_pos, "Positive test bags");
  synth->add_option("--test-neg", synth_args.test_neg, "Negative test bags");
  synth->add_option("--witness-rate", synth_args.cfg.witness_rate,
                    "Fraction of witness patches in positive bags")
      ->check(internal::unit_interval_open_left());
  synth->add_option("--shift", synth_args.cfg.shift, "Witness shift along the signal direction")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--patches-min", synth_args.cfg.patches_min, "Smallest bag size")
      ->check(CLI::PositiveNumber);
  synth->add_option("--patches-max", synth_args.cfg.patches_max, "Largest bag size")
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_args.cfg.seed, "Random seed");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the MIL scorer");
  train_cmd->add_option("--train", train_args.train, "Training manifest")->required();
  train_cmd->add_option("--val", train_args.val, "Validation manifest")->required();
  train_cmd->add_option("--loss", train_args.loss, "Objective")
      ->check(CLI::IsMember({"triplet-ranking", "pairwise", "ce", "mse"}));
  train_cmd->add_option("--alpha1", train_args.cfg.loss.alpha1, "Inter-class margin")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--alpha2", train_args.cfg.loss.alpha2, "Negative spread bound")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--hidden", train_args.cfg.hidden, "Hidden width H")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_args.cfg.learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_args.cfg.epochs, "Maximum epochs")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--patience", train_args.cfg.patience,
                        "Epochs without validation improvement before stopping");
  train_cmd->add_option("--topk", train_args.cfg.topk_fraction, "Top-K fraction")
      ->check(internal::unit_interval_open_left());
  train_cmd->add_option("--seed", train_args.cfg.seed, "Random seed");
  train_cmd->add_option("--optimizer", train_args.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train_args.log, "Training log path (default: <out>.log)");

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Score every bag of a manifest");
  score->add_option("--model", score_args.model, "Checkpoint")->required();
  score->add_option("--data", score_args.data, "Manifest")->required();
  score->add_option("--out", score_args.out, "Output CSV")->required();
  score->add_option("--topk", score_args.topk, "Top-K fraction")
      ->check(internal::unit_interval_open_left());

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "AUC and AP of a score file");
  eval->add_option("--scores", eval_args.scores, "Score CSV")->required();
  eval->add_option("--curves", eval_args.curves, "Directory for roc.csv and pr.csv");

  CorrelateArgs corr_args;
  auto* corr = app.add_subcommand("correlate", "Pearson correlation of scores with covariates");
  corr->add_option("--scores", corr_args.scores, "Score CSV")->required();
  corr->add_option("--covariates", corr_args.covariates, "Covariate CSV")->required();
  corr->add_option("--out", corr_args.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth) {
      internal::echo_config(*synth, out);
      if (synth_args.cfg.patches_min > synth_args.cfg.patches_max) {
        throw UsageError("--patches-min exceeds --patches-max");
      }
      return cmd_synth(synth_args, out);
    }
    if (*train_cmd) {
      internal::echo_config(*train_cmd, out);
      return cmd_train(train_args, out);
    }
    if (*score) {
      internal::echo_config(*score, out);
      return cmd_score(score_args, out);
    }
    if (*eval) {
      internal::echo_config(*eval, out);
      return cmd_eval(eval_args, out);
    }
    if (*corr) {
      internal::echo_config(*corr, out);
      return cmd_correlate(corr_args, out, err);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rankmil::cli
