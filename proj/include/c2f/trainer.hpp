#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c2f/datagen.hpp"
#include "c2f/io/png.hpp"
#include "c2f/nn/network.hpp"
#include "c2f/nn/params.hpp"

namespace c2f::train {

struct TrainConfig {
  double base_lr = 1e-4;
  double lr_decay_factor = 10.0;
  std::size_t decay_epoch = 30;
  std::size_t epochs = 100;
  std::size_t batch_size = 4;
  std::size_t input_size = 64;
  std::array<double, 3> scales{0.75, 1.0, 1.25};
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;     // 0 disables clipping
  std::size_t max_steps = 0;   // 0 = run all epochs
  std::size_t keep_checkpoints = 3;  // newest epoch files kept; 0 keeps all
  std::filesystem::path checkpoint_dir;  // empty = <out>/checkpoints
  nn::NetConfig net;

  // Input 352, batch 30, 100 epochs.
  static TrainConfig full_scale();

  // `key = value` lines, `#` comments. Unknown keys, repeated keys and bad
  // values raise InvalidSpecError naming the line.
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
  // Round-trips through parse(); checkpoint_dir is not serialised.
  std::string to_text() const;

  void validate() const;
  std::size_t scaled_size(std::size_t scale_index) const;
};

// Nearest multiple of 32, halves rounded up.
std::size_t round32(double x);
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);
// Stateless: depends on (seed, step) only.
std::size_t draw_scale_index(std::uint64_t seed, std::uint64_t step);
// Epoch-seeded Fisher-Yates permutation of [0, count).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t count);

/// Adaptive-moment optimizer with bias correction.
///
/// An element whose gradient is exactly zero keeps its value; its moments
/// still decay. Non-finite gradients raise NonFiniteError naming the entry.
class Adam {
 public:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const nn::ParamSet& params, double lr);

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// Scales all trainable gradients so their joint L2 norm is at most max_norm.
// Returns the norm before scaling.
double clip_gradients(const nn::ParamSet& params, double max_norm);

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

/// "C2FK", u32 version, u32 entry count, entries (u32 name length, name,
/// u32 rank, u32 dims, f32 payload), then a trailer: u64 epoch, u64 step,
/// u64 optimizer steps, u64 seed, u32 config length, config text.
/// Little-endian throughout.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<CheckpointEntry> entries;
  std::uint64_t epoch = 0;  // epochs completed
  std::uint64_t step = 0;   // steps completed
  std::uint64_t optimizer_steps = 0;
  std::uint64_t seed = 0;
  std::string config;  // TrainConfig::to_text()

  const CheckpointEntry* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws CorruptCheckpointError with the offending byte offset.
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters (trainable and state) plus, if given, optimizer moments.
Checkpoint capture(const nn::ParamSet& params, const Adam* optimizer);
// Copies entries into params (and optimizer). Missing entries or shape
// mismatches raise DataError.
void restore(const Checkpoint& ckpt, nn::ParamSet& params, Adam* optimizer);
// Rounds every parameter and moment to single precision in place.
void snap_to_float(const nn::ParamSet& params, Adam* optimizer);

struct TraceRow {
  std::uint64_t step = 0;  // 1-based
  double scale = 1.0;
  double loss_total = 0.0;
  double loss_fd = 0.0;
  double loss_p = 0.0;
};

std::string format_trace(const std::vector<TraceRow>& rows);

// Decoded training pair; the mask is binarised at 128.
struct LoadedSample {
  std::string id;
  io::Image8 image;
  io::Image8 mask;
};

// Throws DataError naming the id on size or channel mismatch.
std::vector<LoadedSample> load_samples(const datagen::Manifest& manifest);

// Channel-wise (v / 255 - 0.5) / 0.25, bilinear resize to size x size.
Tensor image_tensor(const std::vector<const io::Image8*>& images, std::size_t size);
// {0, 1}, nearest resize.
Tensor mask_tensor(const std::vector<const io::Image8*>& masks, std::size_t size);

struct TrainResult {
  std::vector<TraceRow> trace;  // rows produced by this call
  std::filesystem::path final_checkpoint;
};

/// Writes <out>/trace.tsv, <checkpoint_dir>/epoch_NNNN.c2fk after each
/// epoch and <out>/final.c2fk. With `resume`, training continues after the
/// checkpointed epoch and the trace file is rewritten from the checkpoint
/// step onward (earlier rows are kept if present).
TrainResult train(const TrainConfig& cfg, const datagen::Manifest& manifest,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

struct Prediction {
  std::string id;
  io::Image8 map;  // gray, round(255 * sigmoid), original image size
};

// Eval-mode forward at cfg.input_size; the fine head is upsampled back.
std::vector<Prediction> predict(const Checkpoint& ckpt, const datagen::Manifest& manifest);
void write_predictions(const std::vector<Prediction>& predictions,
                       const std::filesystem::path& out_dir);

}  // namespace c2f::train
