// Command-line front end: train, eval, fuse, metrics, gradcheck, plus
// helpers to write a synthetic dataset and dump default configs.

#include <cstdio>
#include <iostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "ctxemo/config.hpp"
#include "ctxemo/formats.hpp"
#include "ctxemo/fusion.hpp"
#include "ctxemo/gradcheck.hpp"
#include "ctxemo/metrics.hpp"
#include "ctxemo/synthetic.hpp"
#include "ctxemo/training.hpp"

using namespace ctxemo;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    io::write_text_file(out, text.back() == '\n' ? text : text + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware video emotion recognition: training and evaluation"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  // train
  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  std::string config_path, out_dir = "run";
  std::string manifest_override;
  long long seed_override = -1;
  long long epochs_override = -1;
  train->add_option("--config", config_path, "Run configuration (JSON)")->required();
  train->add_option("--out", out_dir, "Output directory for checkpoints and log");
  train->add_option("--seed", seed_override, "Override the config seed");
  train->add_option("--manifest", manifest_override, "Override data.manifest");
  train->add_option("--epochs", epochs_override, "Override optimizer.epochs");

  // eval
  auto* eval = app.add_subcommand("eval", "Write video-level predictions for a split");
  std::string checkpoint, manifest, split = "test", eval_out;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  eval->add_option("--manifest", manifest, "Dataset manifest")->required();
  eval->add_option("--split", split, "Split to predict");
  eval->add_option("--out", eval_out, "Prediction file (default stdout)");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Late fusion of prediction files");
  std::vector<std::string> fuse_inputs;
  std::string scheme = "weighted_average";
  std::vector<double> weights;
  std::string fuse_out;
  fuse->add_option("predictions", fuse_inputs, "Prediction files")->required();
  fuse->add_option("--scheme", scheme, "maximum, average or weighted_average");
  fuse->add_option("--weights", weights, "Comma-separated weights, one per file")->delimiter(',');
  fuse->add_option("--out", fuse_out, "Fused prediction file (default stdout)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Evaluate predictions against annotations");
  std::string pred_path, ann_path, metrics_manifest, metrics_out;
  bool metrics_json = false;
  metrics->add_option("--predictions", pred_path, "Prediction file")->required();
  metrics->add_option("--annotations", ann_path, "Annotation file")->required();
  metrics->add_option("--manifest", metrics_manifest, "Manifest for category names");
  metrics->add_flag("--json", metrics_json, "Machine-readable report");
  metrics->add_option("--out", metrics_out, "Report file (default stdout)");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  std::size_t grad_seeds = 50;
  bool grad_json = false;
  grad->add_option("--seeds", grad_seeds, "Random instances per check");
  grad->add_flag("--json", grad_json, "Machine-readable output");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic two-class dataset");
  synthetic::Options synth_opts;
  std::string synth_out = "synthetic";
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--train", synth_opts.train, "Training clips");
  synth->add_option("--val", synth_opts.val, "Validation clips");
  synth->add_option("--test", synth_opts.test, "Test clips");
  synth->add_option("--seed", synth_opts.seed, "Generator seed");
  synth->add_flag("!--no-features", synth_opts.with_features, "Skip TSN feature files");

  // dump-config
  auto* dump = app.add_subcommand("dump-config", "Print the default config for a model type");
  std::string dump_type = "stgcn";
  dump->add_option("--type", dump_type, "stgcn, tsn-rgb or tsn-flow");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (*train) {
      auto cfg = config::load_config(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      if (epochs_override > 0) cfg.optimizer.epochs = static_cast<std::size_t>(epochs_override);
      if (!manifest_override.empty()) cfg.data.manifest = manifest_override;
      const auto result = train::run_training(cfg, out_dir);
      spdlog::info("best val loss {} at epoch {}", result.best.attributes.at("val_loss"),
                   result.best.attributes.at("epoch"));
    } else if (*eval) {
      const auto preds = train::run_eval(checkpoint, manifest, split);
      if (eval_out.empty()) {
        io::write_predictions(std::cout, preds);
      } else {
        io::save_predictions(eval_out, preds);
      }
    } else if (*fuse) {
      std::vector<PredictionSet> sets;
      for (const auto& p : fuse_inputs) sets.push_back(io::load_predictions(p));
      fusion::FusionSpec spec;
      spec.scheme = fusion::parse_scheme(scheme);
      if (spec.scheme == fusion::Scheme::kWeightedAverage) {
        spec.weights = weights.empty() ? fusion::FusionSpec::default_weighted().weights : weights;
      } else if (!weights.empty()) {
        spdlog::warn("--weights is ignored for the {} scheme", scheme);
      }
      const auto fused = fusion::fuse(sets, spec);
      if (fuse_out.empty()) {
        io::write_predictions(std::cout, fused);
      } else {
        io::save_predictions(fuse_out, fused);
      }
    } else if (*metrics) {
      const auto preds = io::load_predictions(pred_path);
      // Annotation files usually cover every split; keep the predicted clips.
      std::vector<AnnotatedClip> anns;
      {
        std::unordered_map<std::string, AnnotatedClip> by_id;
        for (auto& a : io::load_annotations(ann_path)) by_id.emplace(a.clip_id, std::move(a));
        for (const auto& p : preds.items) {
          auto it = by_id.find(p.clip_id);
          if (it == by_id.end()) {
            throw std::invalid_argument("no annotation for predicted clip '" + p.clip_id + "'");
          }
          anns.push_back(it->second);
        }
        spdlog::debug("evaluating {} of {} annotated clips", anns.size(), by_id.size());
      }
      std::vector<std::string> names;
      if (!metrics_manifest.empty()) names = io::load_manifest(metrics_manifest).categories;
      const auto report = metrics::evaluate(preds, anns, names);
      emit(metrics_json ? metrics::report_to_json(report) : metrics::report_to_text(report),
           metrics_out);
    } else if (*grad) {
      const auto results = gradcheck::run_suite(grad_seeds);
      std::cout << (grad_json ? gradcheck::format_json(results) + "\n"
                              : gradcheck::format_table(results));
      for (const auto& r : results)
        if (!r.passed) return 1;
    } else if (*synth) {
      const auto path = synthetic::write_dataset(synth_out, synth_opts);
      std::cout << path.string() << '\n';
    } else if (*dump) {
      std::cout << config::dump_config(config::default_config(config::parse_model_type(dump_type)));
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
