// drseg — per-lesion binary segmentation pipeline for fundus images.
//
// Subcommands cover the full flow: preprocess -> split -> augment ->
// train -> evaluate -> infer -> fuse -> report. Each stage reads and
// writes only its own directory under --out and records a JSON manifest
// of the effective configuration and seeds.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "drseg/pipeline.hpp"

namespace {

std::vector<drseg::LesionClass> parse_lesions(const std::vector<std::string>& names) {
  std::vector<drseg::LesionClass> out;
  for (const std::string& name : names) {
    if (name == "all") {
      return {drseg::kAllLesions.begin(), drseg::kAllLesions.end()};
    }
    out.push_back(drseg::lesion_from_string(name));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diabetic retinopathy lesion segmentation pipeline"};
  app.require_subcommand(1);

  std::string root;
  std::string out_dir;
  std::vector<std::string> lesion_names = {"all"};
  std::string config_file;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool overwrite = false;

  app.add_option("--root", root, "Dataset root (images/ + masks/<LESION>/); env DRSEG_DATA_ROOT");
  app.add_option("--out", out_dir, "Output directory for all pipeline artifacts")->required();
  app.add_option("--lesion", lesion_names, "Lesion selection: EX, HE, MA, SE or all");
  app.add_option("--config", config_file, "Key=value configuration file");
  app.add_option("--set", overrides, "Inline configuration override key=value (repeatable)");
  app.add_option("--seed", seed, "Master seed for splits, augmentation and training");
  app.add_flag("--overwrite", overwrite, "Rebuild stage outputs that already exist");

  CLI::App* cmd_preprocess = app.add_subcommand("preprocess", "Crop the fundus region of every image/mask pair");
  CLI::App* cmd_split = app.add_subcommand("split", "Shuffle and partition into train/validation/test");
  CLI::App* cmd_augment = app.add_subcommand("augment", "Write 9 rotated/flipped copies per training image");
  CLI::App* cmd_train = app.add_subcommand("train", "Train one binary segmentation model per lesion");
  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "Score the trained model on the test split");
  bool oracle = false;
  cmd_evaluate->add_flag("--oracle", oracle,
                         "Self-test: replay the ground truth as the prediction (must score 1.0)");
  CLI::App* cmd_infer = app.add_subcommand("infer", "Run inference and write probability/mask images");
  std::vector<std::string> infer_inputs;
  cmd_infer->add_option("--input", infer_inputs, "Input image files or one directory (default: test split)");
  CLI::App* cmd_fuse = app.add_subcommand("fuse", "Combine per-class masks into composite images");
  CLI::App* cmd_report = app.add_subcommand("report", "Aggregate the per-class metric reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    drseg::RunConfig cfg;
    if (const char* env_root = std::getenv("DRSEG_DATA_ROOT"); env_root && root.empty()) {
      root = env_root;
    }
    cfg.dataset_root = root;
    cfg.output_dir = out_dir;
    cfg.lesions = parse_lesions(lesion_names);
    cfg.seed = seed;
    cfg.overwrite = overwrite;
    if (!config_file.empty()) drseg::apply_config_file(cfg, config_file);
    for (const std::string& entry : overrides) {
      const std::size_t eq = entry.find('=');
      if (eq == std::string::npos) throw drseg::ConfigError("--set expects key=value, got '" + entry + "'");
      drseg::apply_config_entry(cfg, entry.substr(0, eq), entry.substr(eq + 1));
    }

    auto emit = [](const drseg::StageStatus& status) { std::cout << status.message << "\n"; };

    if (cmd_preprocess->parsed()) {
      for (drseg::LesionClass lesion : cfg.lesions) emit(drseg::run_preprocess(cfg, lesion));
    } else if (cmd_split->parsed()) {
      for (drseg::LesionClass lesion : cfg.lesions) emit(drseg::run_split(cfg, lesion));
    } else if (cmd_augment->parsed()) {
      for (drseg::LesionClass lesion : cfg.lesions) emit(drseg::run_augment(cfg, lesion));
    } else if (cmd_train->parsed()) {
      for (drseg::LesionClass lesion : cfg.lesions) emit(drseg::run_train(cfg, lesion));
    } else if (cmd_evaluate->parsed()) {
      drseg::EvaluateOptions opts;
      opts.oracle = oracle;
      for (drseg::LesionClass lesion : cfg.lesions) emit(drseg::run_evaluate(cfg, lesion, opts));
    } else if (cmd_infer->parsed()) {
      drseg::InferOptions opts;
      for (const std::string& input : infer_inputs) opts.inputs.emplace_back(input);
      for (drseg::LesionClass lesion : cfg.lesions) emit(drseg::run_infer(cfg, lesion, opts));
    } else if (cmd_fuse->parsed()) {
      emit(drseg::run_fuse(cfg));
    } else if (cmd_report->parsed()) {
      emit(drseg::run_report(cfg));
    }
    return 0;
  } catch (const drseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
