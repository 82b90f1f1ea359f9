#include "drseg/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drseg/clahe.hpp"
#include "drseg/crop.hpp"
#include "drseg/fusion.hpp"
#include "drseg/geometry.hpp"
#include "drseg/image_io.hpp"
#include "drseg/plot.hpp"

namespace drseg {

using nlohmann::json;

void RunConfig::validate(bool needs_dataset_root) const {
  if (needs_dataset_root && !std::filesystem::is_directory(dataset_root)) {
    throw ConfigError("dataset root does not exist: " + dataset_root.string());
  }
  if (output_dir.empty()) throw ConfigError("output directory is required");
  if (lesions.empty()) throw ConfigError("lesion selection must not be empty");
  if (preprocess.image_size != train.image_size || preprocess.image_size != model.input_side) {
    throw ConfigError("image_size must agree across preprocessing, training and model config");
  }
  train.validate();
  model.validate();
}

// ---------------------------------------------------------------------------
// Config file

namespace {

TileGrid parse_tiles(const std::string& value) {
  TileGrid g;
  char sep = 0;
  std::istringstream is(value);
  if (!(is >> g.rows >> sep >> g.cols) || sep != 'x') {
    throw ConfigError("expected tiles as <rows>x<cols>, got '" + value + "'");
  }
  return g;
}

std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "image_size") {
    const int side = std::stoi(value);
    cfg.preprocess.image_size = side;
    cfg.train.image_size = side;
    cfg.model.input_side = side;
  } else if (key == "batch_size") {
    cfg.train.batch_size = std::stoi(value);
  } else if (key == "epochs" || key == "epoch") {
    cfg.train.max_epochs = std::stoi(value);
  } else if (key == "number_of_classes") {
    cfg.model.num_output_channels = std::stoi(value);
  } else if (key == "loss_function") {
    cfg.train.loss_function = value;
  } else if (key == "activation_function") {
    if (value != "sigmoid") throw ConfigError("activation_function must be sigmoid");
  } else if (key == "optimizer") {
    cfg.train.optimizer = value;
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = std::stod(value);
  } else if (key == "early_stopping_monitor") {
    cfg.train.early_stop_monitor = value;
  } else if (key == "early_stopping_patience") {
    cfg.train.early_stop_patience = std::stoi(value);
  } else if (key == "seed") {
    cfg.seed = std::stoull(value);
  } else if (key == "loader_threads") {
    cfg.train.loader_threads = std::stoi(value);
  } else if (key == "crop_threshold") {
    cfg.preprocess.crop_threshold = std::stof(value);
  } else if (key == "crop_margin") {
    cfg.preprocess.crop_margin = std::stoi(value);
  } else if (key == "clahe_clip_limit") {
    cfg.preprocess.clahe_clip_limit = std::stod(value);
  } else if (key == "clahe_tiles") {
    const TileGrid g = parse_tiles(value);
    cfg.preprocess.clahe_tile_rows = g.rows;
    cfg.preprocess.clahe_tile_cols = g.cols;
  } else if (key == "backbone") {
    cfg.model.backbone = value;
  } else if (key == "output_stride") {
    cfg.model.output_stride = std::stoi(value);
  } else if (key == "aspp_rates") {
    cfg.model.aspp_rates = parse_int_list(value);
  } else if (key == "aspp_channels") {
    cfg.model.aspp_channels = std::stoi(value);
  } else if (key == "decoder_low_level_channels") {
    cfg.model.decoder_low_level_channels = std::stoi(value);
  } else if (key == "decoder_channels") {
    cfg.model.decoder_channels = std::stoi(value);
  } else if (key == "pretrained_backbone") {
    cfg.model.pretrained_backbone = value;
  } else if (key == "freeze_backbone") {
    cfg.model.freeze_backbone = value == "1" || value == "true";
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_entry(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

// ---------------------------------------------------------------------------
// Artifact layout

std::filesystem::path preprocessed_dir(const RunConfig& cfg, LesionClass lesion) {
  return cfg.output_dir / "preprocessed" / to_string(lesion);
}
std::filesystem::path split_manifest_path(const RunConfig& cfg, LesionClass lesion) {
  return cfg.output_dir / "splits" / (to_string(lesion) + ".tsv");
}
std::filesystem::path train_manifest_path(const RunConfig& cfg, LesionClass lesion) {
  return cfg.output_dir / "splits" / (to_string(lesion) + "_train.tsv");
}
std::filesystem::path model_dir(const RunConfig& cfg, LesionClass lesion) {
  return cfg.output_dir / "models" / to_string(lesion);
}
std::filesystem::path checkpoint_path(const RunConfig& cfg, LesionClass lesion) {
  return model_dir(cfg, lesion) / "checkpoint.drseg";
}
std::filesystem::path eval_dir(const RunConfig& cfg, LesionClass lesion) {
  return cfg.output_dir / "eval" / to_string(lesion);
}
std::filesystem::path infer_dir(const RunConfig& cfg, LesionClass lesion) {
  return cfg.output_dir / "infer" / to_string(lesion);
}
std::filesystem::path fused_dir(const RunConfig& cfg) { return cfg.output_dir / "fused"; }
std::filesystem::path report_path(const RunConfig& cfg) {
  return cfg.output_dir / "report" / "summary.txt";
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

json config_manifest(const RunConfig& cfg, const std::string& stage) {
  json j;
  j["stage"] = stage;
  j["seed"] = cfg.seed;
  j["dataset_root"] = cfg.dataset_root.string();
  j["preprocess"] = {{"crop_threshold", cfg.preprocess.crop_threshold},
                     {"crop_margin", cfg.preprocess.crop_margin},
                     {"clahe_clip_limit", cfg.preprocess.clahe_clip_limit},
                     {"clahe_tiles", std::to_string(cfg.preprocess.clahe_tile_rows) + "x" +
                                         std::to_string(cfg.preprocess.clahe_tile_cols)},
                     {"image_size", cfg.preprocess.image_size}};
  j["train"] = {{"image_size", cfg.train.image_size},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.max_epochs},
                {"loss_function", cfg.train.loss_function},
                {"optimizer", cfg.train.optimizer},
                {"learning_rate", cfg.train.learning_rate},
                {"early_stopping_monitor", cfg.train.early_stop_monitor},
                {"early_stopping_patience", cfg.train.early_stop_patience},
                {"loader_threads", cfg.train.loader_threads}};
  j["model"] = {{"input_side", cfg.model.input_side},
                {"backbone", cfg.model.backbone},
                {"output_stride", cfg.model.output_stride},
                {"aspp_rates", cfg.model.aspp_rates},
                {"aspp_channels", cfg.model.aspp_channels},
                {"decoder_low_level_channels", cfg.model.decoder_low_level_channels},
                {"decoder_channels", cfg.model.decoder_channels},
                {"num_output_channels", cfg.model.num_output_channels},
                {"freeze_backbone", cfg.model.freeze_backbone}};
  return j;
}

void write_stage_manifest(const RunConfig& cfg, const std::string& stage_id, const json& extra) {
  json j = config_manifest(cfg, stage_id);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = *it;
  const std::filesystem::path dir = cfg.output_dir / "manifests";
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (stage_id + ".json"));
  if (!out) throw IoError("cannot write stage manifest for " + stage_id);
  out << j.dump(2) << '\n';
}

/// True when the stage directory should be (re)built; false = skip.
bool prepare_dir(const std::filesystem::path& dir, bool overwrite) {
  namespace fs = std::filesystem;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) return false;
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return true;
}

bool prepare_file(const std::filesystem::path& file, bool overwrite) {
  namespace fs = std::filesystem;
  if (fs::exists(file)) {
    if (!overwrite) return false;
    fs::remove(file);
  }
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  return true;
}

RasterImage load_model_input(const std::filesystem::path& path, const PreprocessSettings& pp) {
  RasterImage img = read_image(path);
  if (img.color_space() == ColorSpace::kRgb) {
    img = enhance_contrast_lab(img, pp.clahe_clip_limit,
                               TileGrid{pp.clahe_tile_rows, pp.clahe_tile_cols});
  }
  return resize_bilinear(img, pp.image_size, pp.image_size);
}

}  // namespace

// ---------------------------------------------------------------------------
// preprocess

StageStatus run_preprocess(const RunConfig& cfg, LesionClass lesion) {
  cfg.validate(/*needs_dataset_root=*/true);
  const std::filesystem::path out_dir = preprocessed_dir(cfg, lesion);
  if (!prepare_dir(out_dir, cfg.overwrite)) {
    return {true, "preprocess/" + to_string(lesion) + ": outputs exist, skipping (use --overwrite)"};
  }

  const LoadResult loaded = load_manifest(cfg.dataset_root, lesion);
  std::ofstream crops(out_dir / "crops.tsv");
  crops << "# stem\ttop\tleft\theight\twidth\tforeground\n";
  int warnings = 0;
  for (const SampleRecord& rec : loaded.records) {
    const RasterImage img = read_image(rec.image_path);
    const BinaryMask mask = read_mask(rec.mask_path);
    if (mask.height != img.height() || mask.width != img.width()) {
      throw ContractError("image/mask size mismatch for " + rec.stem());
    }
    CropResult crop = crop_fundus(img, cfg.preprocess.crop_threshold, cfg.preprocess.crop_margin);
    if (!crop.found_foreground) ++warnings;
    RasterImage mask_raster = crop_to(raster_from_mask(mask), crop.rect);

    write_image(out_dir / "images" / (rec.stem() + ".png"), crop.image);
    write_mask(out_dir / "masks" / (rec.stem() + ".png"), mask_from_raster(mask_raster));
    crops << rec.stem() << '\t' << crop.rect.top << '\t' << crop.rect.left << '\t'
          << crop.rect.height << '\t' << crop.rect.width << '\t'
          << (crop.found_foreground ? 1 : 0) << '\n';
  }

  json extra;
  extra["lesion"] = to_string(lesion);
  extra["pairs"] = loaded.records.size();
  extra["skipped"] = json::array();
  for (const SkippedFile& s : loaded.skipped) {
    extra["skipped"].push_back({{"path", s.path.string()}, {"reason", s.reason}});
  }
  extra["no_foreground_warnings"] = warnings;
  write_stage_manifest(cfg, "preprocess_" + to_string(lesion), extra);

  StageStatus status;
  status.message = "preprocess/" + to_string(lesion) + ": " + std::to_string(loaded.records.size()) +
                   " pairs cropped, " + std::to_string(loaded.skipped.size()) + " skipped";
  return status;
}

// ---------------------------------------------------------------------------
// split

StageStatus run_split(const RunConfig& cfg, LesionClass lesion) {
  cfg.validate(false);
  const std::filesystem::path manifest_file = split_manifest_path(cfg, lesion);
  if (!prepare_file(manifest_file, cfg.overwrite)) {
    return {true, "split/" + to_string(lesion) + ": manifest exists, skipping (use --overwrite)"};
  }

  const std::filesystem::path source = preprocessed_dir(cfg, lesion);
  std::filesystem::path scan_root = source;
  if (!std::filesystem::is_directory(source / "images")) {
    // Allow splitting straight from the dataset root when the operator
    // skips cropping on purpose.
    cfg.validate(true);
    scan_root = cfg.dataset_root;
  }
  LoadResult loaded;
  if (scan_root == source) {
    // Preprocessed trees keep masks flat under masks/.
    namespace fs = std::filesystem;
    if (!fs::is_directory(source / "images") || !fs::is_directory(source / "masks")) {
      throw IoError("preprocessed outputs not found under " + source.string());
    }
    for (const auto& entry : fs::directory_iterator(source / "images")) {
      if (!entry.is_regular_file()) continue;
      SampleRecord rec;
      rec.image_path = entry.path();
      rec.mask_path = source / "masks" / (entry.path().stem().string() + ".png");
      if (!fs::exists(rec.mask_path)) {
        loaded.skipped.push_back({entry.path(), "no cropped mask"});
        continue;
      }
      rec.lesion = lesion;
      loaded.records.push_back(std::move(rec));
    }
    std::sort(loaded.records.begin(), loaded.records.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.stem() < b.stem(); });
  } else {
    loaded = load_manifest(scan_root, lesion);
  }

  SplitManifest manifest = split(loaded.records, lesion, derive_seed(cfg.seed, to_string(lesion)));
  validate_manifest(manifest);
  save_manifest(manifest, manifest_file);

  json extra;
  extra["lesion"] = to_string(lesion);
  extra["counts"] = {{"train", manifest.train.size()},
                     {"validation", manifest.validation.size()},
                     {"test", manifest.test.size()}};
  write_stage_manifest(cfg, "split_" + to_string(lesion), extra);

  StageStatus status;
  status.message = "split/" + to_string(lesion) + ": " + std::to_string(manifest.train.size()) +
                   "/" + std::to_string(manifest.validation.size()) + "/" +
                   std::to_string(manifest.test.size()) + " train/val/test";
  return status;
}

// ---------------------------------------------------------------------------
// augment

StageStatus run_augment(const RunConfig& cfg, LesionClass lesion) {
  cfg.validate(false);
  const std::filesystem::path out_manifest = train_manifest_path(cfg, lesion);
  const std::filesystem::path aug_dir = cfg.output_dir / "augmented" / to_string(lesion);
  if (!prepare_file(out_manifest, cfg.overwrite)) {
    return {true, "augment/" + to_string(lesion) + ": outputs exist, skipping (use --overwrite)"};
  }
  prepare_dir(aug_dir, /*overwrite=*/true);  // paired with the manifest above

  SplitManifest manifest = load_split_manifest(split_manifest_path(cfg, lesion));
  SplitManifest augmented = build_training_set(manifest, aug_dir, 9);
  validate_manifest(augmented);
  save_manifest(augmented, out_manifest);

  const std::size_t aug_count = augmented.train.size() - manifest.train.size();
  json extra;
  extra["lesion"] = to_string(lesion);
  extra["originals"] = manifest.train.size();
  extra["augmented"] = aug_count;
  write_stage_manifest(cfg, "augment_" + to_string(lesion), extra);

  StageStatus status;
  status.message = "augment/" + to_string(lesion) + ": " + std::to_string(manifest.train.size()) +
                   " originals -> " + std::to_string(aug_count) + " augmented";
  return status;
}

// ---------------------------------------------------------------------------
// train

StageStatus run_train(const RunConfig& cfg, LesionClass lesion) {
  cfg.validate(false);
  const std::filesystem::path dir = model_dir(cfg, lesion);
  if (!prepare_dir(dir, cfg.overwrite)) {
    return {true, "train/" + to_string(lesion) + ": model exists, skipping (use --overwrite)"};
  }

  const std::filesystem::path manifest_file = std::filesystem::exists(train_manifest_path(cfg, lesion))
                                                  ? train_manifest_path(cfg, lesion)
                                                  : split_manifest_path(cfg, lesion);
  SplitManifest manifest = load_split_manifest(manifest_file);

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train:" + to_string(lesion));
  ModelConfig mc = cfg.model;
  mc.init_seed = derive_seed(cfg.seed, "init:" + to_string(lesion));
  SegmentationModel model(mc);

  std::ofstream epoch_log(dir / "epochs.log");
  epoch_log << "# epoch\ttrain_loss\tval_loss\twall_time_sec\n";
  std::vector<double> train_curve, val_curve;

  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochLog& log) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d\t%.9f\t%.9f\t%.3f\n", log.epoch, log.train_loss,
                  log.val_loss, log.wall_time_sec);
    epoch_log << buf;
    epoch_log.flush();
    train_curve.push_back(log.train_loss);
    val_curve.push_back(log.val_loss);
  };
  callbacks.on_improvement = [&](SegmentationModel& improved, int, double) {
    save_checkpoint(improved, cfg.preprocess, checkpoint_path(cfg, lesion));
  };

  const TrainResult result = train(model, manifest, tc, make_disk_loader(cfg.preprocess), callbacks);

  // Persist the restored-best weights as the final checkpoint.
  save_checkpoint(model, cfg.preprocess, checkpoint_path(cfg, lesion));
  if (!train_curve.empty()) save_loss_plot(train_curve, val_curve, dir / "loss_curve.png");

  json extra;
  extra["lesion"] = to_string(lesion);
  extra["train_seed"] = tc.seed;
  extra["init_seed"] = mc.init_seed;
  extra["epochs_run"] = result.epochs.size();
  extra["best_epoch"] = result.best_epoch;
  extra["stopped_early"] = result.stopped_early;
  write_stage_manifest(cfg, "train_" + to_string(lesion), extra);

  StageStatus status;
  status.message = "train/" + to_string(lesion) + ": " + std::to_string(result.epochs.size()) +
                   " epochs, best epoch " + std::to_string(result.best_epoch) +
                   (result.stopped_early ? " (early stop)" : "");
  return status;
}

// ---------------------------------------------------------------------------
// evaluate

StageStatus run_evaluate(const RunConfig& cfg, LesionClass lesion, const EvaluateOptions& opts) {
  cfg.validate(false);
  const std::filesystem::path dir = eval_dir(cfg, lesion);
  if (!prepare_dir(dir, cfg.overwrite)) {
    return {true, "evaluate/" + to_string(lesion) + ": report exists, skipping (use --overwrite)"};
  }

  SplitManifest manifest = load_split_manifest(std::filesystem::exists(train_manifest_path(cfg, lesion))
                                                   ? train_manifest_path(cfg, lesion)
                                                   : split_manifest_path(cfg, lesion));
  if (manifest.test.empty()) throw ContractError("evaluate: empty test split");

  PreprocessSettings pp = cfg.preprocess;
  Checkpoint ckpt;
  if (!opts.oracle) {
    ckpt = load_checkpoint(checkpoint_path(cfg, lesion));
    if (!(ckpt.preprocess == cfg.preprocess)) {
      throw ConfigMismatchError(
          "checkpoint was trained with different preprocessing settings than requested");
    }
    pp = ckpt.preprocess;
  }

  EvalOptions eval_opts;
  eval_opts.threshold = 0.5;
  eval_opts.truth_loader = [&pp](const SampleRecord& rec) {
    BinaryMask mask = read_mask(rec.mask_path);
    RasterImage resized = resize_nearest(raster_from_mask(mask), pp.image_size, pp.image_size);
    return mask_from_raster(resized);
  };
  std::vector<double> roc_scores;
  std::vector<std::uint8_t> roc_labels;
  eval_opts.roc_scores = &roc_scores;
  eval_opts.roc_labels = &roc_labels;

  Predictor predictor;
  if (opts.oracle) {
    predictor = [](const SampleRecord&, const BinaryMask& truth) {
      Tensor probs({truth.height, truth.width});
      for (std::size_t i = 0; i < truth.values.size(); ++i) {
        probs[static_cast<std::int64_t>(i)] = truth.values[i];
      }
      return probs;
    };
  } else {
    predictor = [&](const SampleRecord& rec, const BinaryMask&) {
      const RasterImage input = load_model_input(rec.image_path, pp);
      const Tensor probs = ckpt.model->forward(image_to_tensor(input));
      return slice_map(probs, 0);
    };
  }

  const MetricReport report = evaluate_class(predictor, manifest.test, lesion, eval_opts);
  save_report(report, dir / "report.txt");

  bool has_pos = false, has_neg = false;
  for (std::uint8_t l : roc_labels) (l ? has_pos : has_neg) = true;
  if (has_pos && has_neg) save_roc_csv(roc_auc(roc_scores, roc_labels), dir / "roc.csv");

  json extra;
  extra["lesion"] = to_string(lesion);
  extra["oracle"] = opts.oracle;
  extra["test_images"] = manifest.test.size();
  write_stage_manifest(cfg, "evaluate_" + to_string(lesion), extra);

  char buf[128];
  std::snprintf(buf, sizeof(buf), "evaluate/%s: accuracy %.5f iou %.5f auc %.5f",
                to_string(lesion).c_str(), report.ratios.accuracy, report.ratios.iou, report.auc);
  return {false, buf};
}

// ---------------------------------------------------------------------------
// infer

StageStatus run_infer(const RunConfig& cfg, LesionClass lesion, const InferOptions& opts) {
  cfg.validate(false);
  const std::filesystem::path dir = infer_dir(cfg, lesion);
  if (!prepare_dir(dir, cfg.overwrite)) {
    return {true, "infer/" + to_string(lesion) + ": outputs exist, skipping (use --overwrite)"};
  }

  Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg, lesion));
  if (!(ckpt.preprocess == cfg.preprocess)) {
    throw ConfigMismatchError(
        "checkpoint was trained with different preprocessing settings than requested");
  }

  std::vector<std::filesystem::path> inputs = opts.inputs;
  if (inputs.empty()) {
    SplitManifest manifest = load_split_manifest(split_manifest_path(cfg, lesion));
    for (const SampleRecord& rec : manifest.test) inputs.push_back(rec.image_path);
  }
  if (inputs.size() == 1 && std::filesystem::is_directory(inputs.front())) {
    const std::filesystem::path root = inputs.front();
    inputs.clear();
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      if (entry.is_regular_file()) inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
  }
  if (inputs.empty()) throw ConfigError("infer: no input images");

  for (const std::filesystem::path& path : inputs) {
    const RasterImage input = load_model_input(path, ckpt.preprocess);
    const Tensor probs = ckpt.model->forward(image_to_tensor(input));
    const Tensor map = slice_map(probs, 0);

    RasterImage prob_img(map.dim(0), map.dim(1), 1, ColorSpace::kGray, PixelKind::kByte);
    for (std::int64_t i = 0; i < map.numel(); ++i) {
      prob_img.data()[static_cast<std::size_t>(i)] =
          static_cast<float>(std::lround(map[i] * 255.0));
    }
    const std::string stem = path.stem().string();
    write_image(dir / (stem + "_prob.png"), prob_img);
    write_mask(dir / (stem + "_mask.png"), binarize(map, 0.5));
  }

  json extra;
  extra["lesion"] = to_string(lesion);
  extra["inputs"] = inputs.size();
  write_stage_manifest(cfg, "infer_" + to_string(lesion), extra);
  return {false, "infer/" + to_string(lesion) + ": " + std::to_string(inputs.size()) + " images"};
}

// ---------------------------------------------------------------------------
// fuse

StageStatus run_fuse(const RunConfig& cfg) {
  cfg.validate(false);
  const std::filesystem::path dir = fused_dir(cfg);
  if (!prepare_dir(dir, cfg.overwrite)) {
    return {true, "fuse: outputs exist, skipping (use --overwrite)"};
  }

  // Collect predicted masks per image stem across the selected lesions.
  std::map<std::string, std::map<LesionClass, BinaryMask>> by_stem;
  const std::string suffix = "_mask.png";
  for (LesionClass lesion : cfg.lesions) {
    const std::filesystem::path src = infer_dir(cfg, lesion);
    if (!std::filesystem::is_directory(src)) continue;
    for (const auto& entry : std::filesystem::directory_iterator(src)) {
      const std::string name = entry.path().filename().string();
      if (name.size() <= suffix.size() || name.substr(name.size() - suffix.size()) != suffix) {
        continue;
      }
      const std::string stem = name.substr(0, name.size() - suffix.size());
      by_stem[stem][lesion] = read_mask(entry.path());
    }
  }
  if (by_stem.empty()) throw ConfigError("fuse: no inference masks found; run infer first");

  for (const auto& [stem, masks] : by_stem) {
    const CompositeMask comp = fuse(masks);
    write_composite(dir / (stem + "_composite.png"), comp);

    // Overlay on the inference input when it is still around.
    for (LesionClass lesion : cfg.lesions) {
      const std::filesystem::path prob = infer_dir(cfg, lesion) / (stem + "_prob.png");
      if (std::filesystem::exists(prob)) {
        RasterImage base = read_image(prob);
        RasterImage overlay = render_overlay(base, comp, ColorMap{}, 0.5);
        write_image(dir / (stem + "_overlay.png"), overlay);
        break;
      }
    }
  }

  json extra;
  extra["images"] = by_stem.size();
  write_stage_manifest(cfg, "fuse", extra);
  return {false, "fuse: " + std::to_string(by_stem.size()) + " composite images"};
}

// ---------------------------------------------------------------------------
// report

StageStatus run_report(const RunConfig& cfg) {
  cfg.validate(false);
  const std::filesystem::path path = report_path(cfg);
  if (!prepare_file(path, cfg.overwrite)) {
    return {true, "report: summary exists, skipping (use --overwrite)"};
  }

  std::vector<MetricReport> reports;
  for (LesionClass lesion : cfg.lesions) {
    const std::filesystem::path report_file = eval_dir(cfg, lesion) / "report.txt";
    if (!std::filesystem::exists(report_file)) {
      throw ConfigError("report: missing evaluation for " + to_string(lesion) + "; run evaluate");
    }
    reports.push_back(load_report(report_file));
  }

  std::ofstream out(path);
  out << format_summary_table(reports);
  if (!out) throw IoError("cannot write " + path.string());

  json extra;
  extra["lesions"] = json::array();
  for (const MetricReport& r : reports) extra["lesions"].push_back(to_string(r.lesion));
  write_stage_manifest(cfg, "report", extra);
  return {false, "report: " + std::to_string(reports.size()) + " classes summarized"};
}

}  // namespace drseg
