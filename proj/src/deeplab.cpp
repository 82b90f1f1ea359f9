#include "drseg/deeplab.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace drseg {

using nlohmann::json;

void ModelConfig::validate() const {
  if (input_side < 1) throw ConfigError("input_side must be positive");
  if (output_stride != 8 && output_stride != 16) throw ConfigError("output_stride must be 8 or 16");
  if (input_side % output_stride != 0) {
    throw ConfigError("input_side " + std::to_string(input_side) +
                      " is not divisible by output_stride " + std::to_string(output_stride));
  }
  if (!nn::EfficientNetBackbone::is_known_variant(backbone)) {
    throw ConfigError("unknown backbone '" + backbone + "'");
  }
  if (aspp_rates.empty()) throw ConfigError("aspp_rates must not be empty");
  int prev = 0;
  for (int r : aspp_rates) {
    if (r <= prev) throw ConfigError("aspp_rates must be strictly increasing positive integers");
    prev = r;
  }
  if (aspp_channels < 1 || decoder_low_level_channels < 1 || decoder_channels < 1) {
    throw ConfigError("channel counts must be positive");
  }
  if (num_output_channels != 1) {
    throw ConfigError("num_output_channels must be 1 (one binary model per lesion)");
  }
}

namespace nn {

// ---------------------------------------------------------------------------
// Aspp

Aspp::Aspp(int in_channels, const std::vector<int>& rates, int out_channels, Rng& rng)
    : out_channels_(out_channels) {
  auto b0 = std::make_unique<Sequential>();
  b0->emplace<Conv2d>("aspp.branch0.conv", in_channels, out_channels, 1, 1, 1, 1, false, rng);
  b0->emplace<BatchNorm2d>("aspp.branch0.bn", out_channels);
  b0->emplace<ReLU>();
  branches_.push_back(std::move(b0));
  branch_names_.push_back("conv1x1");

  int index = 1;
  for (int rate : rates) {
    auto b = std::make_unique<Sequential>();
    const std::string name = "aspp.branch" + std::to_string(index);
    b->emplace<Conv2d>(name + ".depthwise", in_channels, in_channels, 3, 1, rate, in_channels,
                       false, rng);
    b->emplace<Conv2d>(name + ".pointwise", in_channels, out_channels, 1, 1, 1, 1, false, rng);
    b->emplace<BatchNorm2d>(name + ".bn", out_channels);
    b->emplace<ReLU>();
    branches_.push_back(std::move(b));
    branch_names_.push_back("atrous_separable3x3_rate" + std::to_string(rate));
    ++index;
  }

  pool_conv_.emplace<Conv2d>("aspp.pool.conv", in_channels, out_channels, 1, 1, 1, 1, false, rng);
  pool_conv_.emplace<BatchNorm2d>("aspp.pool.bn", out_channels);
  pool_conv_.emplace<ReLU>();
  branch_names_.push_back("image_pool");

  const int concat = out_channels * static_cast<int>(branch_names_.size());
  project_.emplace<Conv2d>("aspp.project.conv", concat, out_channels, 1, 1, 1, 1, false, rng);
  project_.emplace<BatchNorm2d>("aspp.project.bn", out_channels);
  project_.emplace<ReLU>();
}

Tensor Aspp::forward(const Tensor& x) {
  cached_h_ = x.dim(2);
  cached_w_ = x.dim(3);
  std::vector<Tensor> outs;
  outs.reserve(branches_.size() + 1);
  for (auto& b : branches_) outs.push_back(b->forward(x));

  // Image-level branch: pooled statistics broadcast back over the grid.
  Tensor pooled = pool_conv_.forward(pool_.forward(x));
  Tensor spread({x.dim(0), out_channels_, x.dim(2), x.dim(3)});
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  for (int n = 0; n < x.dim(0); ++n) {
    for (int c = 0; c < out_channels_; ++c) {
      const double v = pooled.at(n, c, 0, 0);
      double* p = spread.data() + (static_cast<std::size_t>(n) * out_channels_ + c) * plane;
      std::fill(p, p + plane, v);
    }
  }
  outs.push_back(std::move(spread));

  std::vector<const Tensor*> parts;
  for (const Tensor& t : outs) parts.push_back(&t);
  return project_.forward(concat_channels(parts));
}

Tensor Aspp::backward(const Tensor& g) {
  Tensor dconcat = project_.backward(g);
  std::vector<int> counts(branches_.size() + 1, out_channels_);
  std::vector<Tensor> parts = split_channels(dconcat, counts);

  Tensor dx = branches_.front()->backward(parts.front());
  for (std::size_t i = 1; i < branches_.size(); ++i) {
    dx.add_(branches_[i]->backward(parts[i]));
  }

  // Broadcast backward: sum the spatial gradient into the pooled cell.
  const Tensor& dspread = parts.back();
  Tensor dpooled({dspread.dim(0), out_channels_, 1, 1});
  const std::size_t plane = static_cast<std::size_t>(dspread.dim(2)) * dspread.dim(3);
  for (int n = 0; n < dspread.dim(0); ++n) {
    for (int c = 0; c < out_channels_; ++c) {
      const double* p = dspread.data() + (static_cast<std::size_t>(n) * out_channels_ + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      dpooled.at(n, c, 0, 0) = acc;
    }
  }
  dx.add_(pool_.backward(pool_conv_.backward(dpooled)));
  return dx;
}

void Aspp::set_mode(Mode mode) {
  for (auto& b : branches_) b->set_mode(mode);
  pool_.set_mode(mode);
  pool_conv_.set_mode(mode);
  project_.set_mode(mode);
}

void Aspp::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& b : branches_) b->collect_parameters(out);
  pool_conv_.collect_parameters(out);
  project_.collect_parameters(out);
}

void Aspp::collect_buffers(std::vector<Parameter*>& out) {
  for (auto& b : branches_) b->collect_buffers(out);
  pool_conv_.collect_buffers(out);
  project_.collect_buffers(out);
}

// ---------------------------------------------------------------------------
// DeeplabDecoder

DeeplabDecoder::DeeplabDecoder(int aspp_channels, int low_level_in, int low_level_proj,
                               int refined_channels, int num_outputs, int output_stride, Rng& rng)
    : up_to_skip_(output_stride / 4),
      up_to_input_(4),
      aspp_channels_(aspp_channels),
      low_proj_channels_(low_level_proj) {
  low_project_.emplace<Conv2d>("decoder.low.conv", low_level_in, low_level_proj, 1, 1, 1, 1,
                               false, rng);
  low_project_.emplace<BatchNorm2d>("decoder.low.bn", low_level_proj);
  low_project_.emplace<ReLU>();

  const int cat = aspp_channels + low_level_proj;
  refine_.emplace<Conv2d>("decoder.refine0.depthwise", cat, cat, 3, 1, 1, cat, false, rng);
  refine_.emplace<Conv2d>("decoder.refine0.pointwise", cat, refined_channels, 1, 1, 1, 1, false, rng);
  refine_.emplace<BatchNorm2d>("decoder.refine0.bn", refined_channels);
  refine_.emplace<ReLU>();
  refine_.emplace<Conv2d>("decoder.refine1.depthwise", refined_channels, refined_channels, 3, 1, 1,
                          refined_channels, false, rng);
  refine_.emplace<Conv2d>("decoder.refine1.pointwise", refined_channels, refined_channels, 1, 1, 1,
                          1, false, rng);
  refine_.emplace<BatchNorm2d>("decoder.refine1.bn", refined_channels);
  refine_.emplace<ReLU>();

  head_.emplace<Conv2d>("decoder.head", refined_channels, num_outputs, 1, 1, 1, 1, true, rng);
}

Tensor DeeplabDecoder::forward(const Tensor& aspp_out, const Tensor& low_level) {
  Tensor low = low_project_.forward(low_level);
  Tensor up = up_to_skip_.forward(aspp_out);
  std::vector<const Tensor*> parts = {&up, &low};
  Tensor refined = refine_.forward(concat_channels(parts));
  return up_to_input_.forward(head_.forward(refined));
}

std::pair<Tensor, Tensor> DeeplabDecoder::backward(const Tensor& grad_logits) {
  Tensor g = head_.backward(up_to_input_.backward(grad_logits));
  Tensor dcat = refine_.backward(g);
  std::vector<Tensor> parts = split_channels(dcat, {aspp_channels_, low_proj_channels_});
  Tensor d_aspp = up_to_skip_.backward(parts[0]);
  Tensor d_low = low_project_.backward(parts[1]);
  return {std::move(d_aspp), std::move(d_low)};
}

void DeeplabDecoder::set_mode(Mode mode) {
  low_project_.set_mode(mode);
  up_to_skip_.set_mode(mode);
  refine_.set_mode(mode);
  head_.set_mode(mode);
  up_to_input_.set_mode(mode);
}

void DeeplabDecoder::collect_parameters(std::vector<Parameter*>& out) {
  low_project_.collect_parameters(out);
  refine_.collect_parameters(out);
  head_.collect_parameters(out);
}

void DeeplabDecoder::collect_buffers(std::vector<Parameter*>& out) {
  low_project_.collect_buffers(out);
  refine_.collect_buffers(out);
}

}  // namespace nn

// ---------------------------------------------------------------------------
// SegmentationModel

namespace {

// ImageNet statistics: inputs arrive in [0,1] and are standardized here so
// callers never deal with backbone-specific scaling.
const std::vector<double> kInputMean = {0.485, 0.456, 0.406};
const std::vector<double> kInputStd = {0.229, 0.224, 0.225};

ModelConfig validated(ModelConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

SegmentationModel::SegmentationModel(const ModelConfig& cfg)
    : cfg_(validated(cfg)),
      normalize_(kInputMean, kInputStd),
      backbone_([&] {
        Rng rng(derive_seed(cfg_.init_seed, "backbone"));
        return nn::EfficientNetBackbone(cfg_.backbone, cfg_.output_stride, rng);
      }()),
      aspp_([&] {
        Rng rng(derive_seed(cfg_.init_seed, "aspp"));
        return nn::Aspp(backbone_.high_level_channels(), cfg_.aspp_rates, cfg_.aspp_channels, rng);
      }()),
      decoder_([&] {
        Rng rng(derive_seed(cfg_.init_seed, "decoder"));
        return nn::DeeplabDecoder(cfg_.aspp_channels, backbone_.low_level_channels(),
                                  cfg_.decoder_low_level_channels, cfg_.decoder_channels,
                                  cfg_.num_output_channels, cfg_.output_stride, rng);
      }()) {
  if (!cfg_.pretrained_backbone.empty()) {
    if (!std::filesystem::exists(cfg_.pretrained_backbone)) {
      throw ConfigError("pretrained backbone weights not found: " + cfg_.pretrained_backbone);
    }
    Checkpoint donor = load_checkpoint(cfg_.pretrained_backbone);
    std::vector<nn::Parameter*> mine, theirs;
    backbone_.collect_parameters(mine);
    backbone_.collect_buffers(mine);
    donor.model->backbone_.collect_parameters(theirs);
    donor.model->backbone_.collect_buffers(theirs);
    if (mine.size() != theirs.size()) {
      throw ConfigMismatchError("backbone weight file does not match the configured variant");
    }
    for (std::size_t i = 0; i < mine.size(); ++i) {
      if (!mine[i]->value.same_shape(theirs[i]->value)) {
        throw ConfigMismatchError("backbone tensor " + mine[i]->name + " has mismatched shape");
      }
      mine[i]->value = theirs[i]->value;
    }
  }
  if (cfg_.freeze_backbone) {
    std::vector<nn::Parameter*> params;
    backbone_.collect_parameters(params);
    for (nn::Parameter* p : params) p->trainable = false;
  }
}

void SegmentationModel::check_input(const Tensor& batch) const {
  if (batch.ndim() != 4 || batch.dim(1) != 3) {
    throw ContractError("model input must be (N, 3, H, W), got " + batch.shape_string());
  }
  if (batch.dim(0) < 1) throw ContractError("empty batch");
  if (batch.dim(2) % cfg_.output_stride != 0 || batch.dim(3) % cfg_.output_stride != 0) {
    throw ContractError("input spatial dims must be divisible by output_stride " +
                        std::to_string(cfg_.output_stride));
  }
  for (std::int64_t i = 0; i < batch.numel(); ++i) {
    if (!(batch[i] >= 0.0 && batch[i] <= 1.0)) {
      throw ContractError("model inputs must be normalized to [0, 1]");
    }
  }
}

Tensor SegmentationModel::forward_logits(const Tensor& batch) {
  check_input(batch);
  Tensor x = normalize_.forward(batch);
  nn::EfficientNetBackbone::Features f = backbone_.forward(x);
  Tensor pyramid = aspp_.forward(f.high);
  return decoder_.forward(pyramid, f.low);
}

Tensor SegmentationModel::forward(const Tensor& batch) {
  const nn::Mode saved = mode_;
  set_mode(nn::Mode::kInference);
  Tensor probs = forward_logits(batch);
  for (std::int64_t i = 0; i < probs.numel(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-probs[i]));
    probs[i] = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  }
  set_mode(saved);
  return probs;
}

Tensor SegmentationModel::backward(const Tensor& grad_logits) {
  auto [d_aspp, d_low] = decoder_.backward(grad_logits);
  Tensor d_high = aspp_.backward(d_aspp);
  Tensor dx = backbone_.backward(d_high, d_low);
  return normalize_.backward(dx);
}

void SegmentationModel::set_mode(nn::Mode mode) {
  mode_ = mode;
  backbone_.set_mode(mode);
  aspp_.set_mode(mode);
  decoder_.set_mode(mode);
}

std::vector<nn::Parameter*> SegmentationModel::parameters() {
  std::vector<nn::Parameter*> out;
  backbone_.collect_parameters(out);
  aspp_.collect_parameters(out);
  decoder_.collect_parameters(out);
  return out;
}

std::vector<nn::Parameter*> SegmentationModel::trainable_parameters() {
  std::vector<nn::Parameter*> all = parameters();
  std::erase_if(all, [](nn::Parameter* p) { return !p->trainable; });
  return all;
}

std::vector<nn::Parameter*> SegmentationModel::buffers() {
  std::vector<nn::Parameter*> out;
  backbone_.collect_buffers(out);
  aspp_.collect_buffers(out);
  decoder_.collect_buffers(out);
  return out;
}

std::int64_t SegmentationModel::parameter_count() {
  std::int64_t total = 0;
  for (nn::Parameter* p : parameters()) total += p->value.numel();
  return total;
}

void SegmentationModel::zero_grad() {
  for (nn::Parameter* p : parameters()) p->grad.zero();
}

ModelIntrospection SegmentationModel::introspect() {
  ModelIntrospection info;
  info.backbone = backbone_.variant();
  info.backbone_blocks = backbone_.block_count();
  info.low_level_channels = backbone_.low_level_channels();
  info.high_level_channels = backbone_.high_level_channels();
  info.aspp_branches = aspp_.branch_names();
  info.decoder_uses_low_level_skip = decoder_.low_level_projected_channels() > 0;
  info.head_output_channels = cfg_.num_output_channels;
  info.sigmoid_output = true;
  info.parameter_count = parameter_count();
  return info;
}

std::vector<Tensor> SegmentationModel::state_snapshot() {
  std::vector<Tensor> state;
  for (nn::Parameter* p : parameters()) state.push_back(p->value);
  for (nn::Parameter* p : buffers()) state.push_back(p->value);
  return state;
}

void SegmentationModel::load_state(const std::vector<Tensor>& state) {
  std::vector<nn::Parameter*> slots = parameters();
  std::vector<nn::Parameter*> bufs = buffers();
  slots.insert(slots.end(), bufs.begin(), bufs.end());
  if (slots.size() != state.size()) throw ContractError("state snapshot size mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]->value.same_shape(state[i])) throw ContractError("state tensor shape mismatch");
    slots[i]->value = state[i];
  }
}

// ---------------------------------------------------------------------------
// binarize + checkpoint

BinaryMask binarize(const Tensor& probs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("binarize: threshold must lie in (0, 1)");
  }
  int h = 0, w = 0;
  if (probs.ndim() == 2) {
    h = probs.dim(0);
    w = probs.dim(1);
  } else if (probs.ndim() == 4 && probs.dim(0) == 1 && probs.dim(1) == 1) {
    h = probs.dim(2);
    w = probs.dim(3);
  } else {
    throw ContractError("binarize: expected (H,W) or (1,1,H,W), got " + probs.shape_string());
  }
  BinaryMask mask(h, w);
  for (std::int64_t i = 0; i < probs.numel(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ContractError("binarize: probability " + std::to_string(p) + " outside [0, 1]");
    }
    mask.values[static_cast<std::size_t>(i)] = p >= threshold ? 1 : 0;
  }
  return mask;
}

Tensor slice_map(const Tensor& batch, int n) {
  if (batch.ndim() != 4) throw ContractError("slice_map expects an NCHW tensor");
  if (n < 0 || n >= batch.dim(0)) throw ContractError("slice_map: sample index out of range");
  Tensor out({batch.dim(2), batch.dim(3)});
  const std::size_t plane = static_cast<std::size_t>(batch.dim(2)) * batch.dim(3);
  std::copy(batch.data() + static_cast<std::size_t>(n) * batch.dim(1) * plane,
            batch.data() + (static_cast<std::size_t>(n) * batch.dim(1) + 1) * plane, out.data());
  return out;
}

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'R', 'S', 'E', 'G', 'C', 'K', '1'};

json config_to_json(const ModelConfig& cfg) {
  return json{{"input_side", cfg.input_side},
              {"backbone", cfg.backbone},
              {"output_stride", cfg.output_stride},
              {"aspp_rates", cfg.aspp_rates},
              {"aspp_channels", cfg.aspp_channels},
              {"decoder_low_level_channels", cfg.decoder_low_level_channels},
              {"decoder_channels", cfg.decoder_channels},
              {"num_output_channels", cfg.num_output_channels},
              {"freeze_backbone", cfg.freeze_backbone},
              {"init_seed", cfg.init_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.input_side = j.at("input_side").get<int>();
  cfg.backbone = j.at("backbone").get<std::string>();
  cfg.output_stride = j.at("output_stride").get<int>();
  cfg.aspp_rates = j.at("aspp_rates").get<std::vector<int>>();
  cfg.aspp_channels = j.at("aspp_channels").get<int>();
  cfg.decoder_low_level_channels = j.at("decoder_low_level_channels").get<int>();
  cfg.decoder_channels = j.at("decoder_channels").get<int>();
  cfg.num_output_channels = j.at("num_output_channels").get<int>();
  cfg.freeze_backbone = j.at("freeze_backbone").get<bool>();
  cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  return cfg;
}

json preprocess_to_json(const PreprocessSettings& p) {
  return json{{"crop_threshold", p.crop_threshold},
              {"crop_margin", p.crop_margin},
              {"clahe_clip_limit", p.clahe_clip_limit},
              {"clahe_tile_rows", p.clahe_tile_rows},
              {"clahe_tile_cols", p.clahe_tile_cols},
              {"image_size", p.image_size}};
}

PreprocessSettings preprocess_from_json(const json& j) {
  PreprocessSettings p;
  p.crop_threshold = j.at("crop_threshold").get<float>();
  p.crop_margin = j.at("crop_margin").get<int>();
  p.clahe_clip_limit = j.at("clahe_clip_limit").get<double>();
  p.clahe_tile_rows = j.at("clahe_tile_rows").get<int>();
  p.clahe_tile_cols = j.at("clahe_tile_cols").get<int>();
  p.image_size = j.at("image_size").get<int>();
  return p;
}

}  // namespace

void save_checkpoint(SegmentationModel& model, const PreprocessSettings& preprocess,
                     const std::filesystem::path& path) {
  std::vector<nn::Parameter*> entries = model.parameters();
  {
    std::vector<nn::Parameter*> bufs = model.buffers();
    entries.insert(entries.end(), bufs.begin(), bufs.end());
  }

  json header;
  header["format"] = 1;
  header["model_config"] = config_to_json(model.config());
  header["preprocess"] = preprocess_to_json(preprocess);
  json tensors = json::array();
  for (nn::Parameter* p : entries) {
    tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}});
  }
  header["tensors"] = tensors;
  const std::string header_text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t header_size = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (nn::Parameter* p : entries) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
  }
  if (!out) throw IoError("write failure on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a drseg checkpoint: " + path.string());
  }
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof(header_size));
  std::string header_text(header_size, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw IoError("truncated checkpoint header: " + path.string());
  json header = json::parse(header_text);
  if (header.at("format").get<int>() != 1) {
    throw ConfigMismatchError("unsupported checkpoint format version");
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("model_config"));
  ckpt.preprocess = preprocess_from_json(header.at("preprocess"));
  ckpt.model = std::make_unique<SegmentationModel>(ckpt.config);

  std::vector<nn::Parameter*> entries = ckpt.model->parameters();
  {
    std::vector<nn::Parameter*> bufs = ckpt.model->buffers();
    entries.insert(entries.end(), bufs.begin(), bufs.end());
  }
  const json& tensors = header.at("tensors");
  if (tensors.size() != entries.size()) {
    throw ConfigMismatchError("checkpoint tensor count does not match the configured model");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& t = tensors[i];
    if (t.at("name").get<std::string>() != entries[i]->name ||
        t.at("shape").get<std::vector<int>>() != entries[i]->value.shape()) {
      throw ConfigMismatchError("checkpoint tensor mismatch at " + entries[i]->name);
    }
    in.read(reinterpret_cast<char*>(entries[i]->value.data()),
            static_cast<std::streamsize>(entries[i]->value.numel() * sizeof(double)));
  }
  if (!in) throw IoError("truncated checkpoint data: " + path.string());
  return ckpt;
}

}  // namespace drseg
