#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "c2f/errors.hpp"
#include "c2f/loss.hpp"
#include "c2f/ops.hpp"
#include "c2f/trainer.hpp"

namespace c2f::train {
namespace {

std::string epoch_file(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu.c2fk", epoch);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// Rows of an existing trace up to and including `last_step`.
std::vector<TraceRow> read_trace_prefix(const std::filesystem::path& path,
                                        std::uint64_t last_step) {
  std::vector<TraceRow> rows;
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    TraceRow r;
    std::istringstream fields(line);
    if (!(fields >> r.step >> r.scale >> r.loss_total >> r.loss_fd >> r.loss_p)) break;
    if (r.step > last_step) break;
    rows.push_back(r);
  }
  return rows;
}

Tensor to_tensor(const io::Image8& img, bool normalise) {
  Tensor t(Shape{1, img.channels, img.height, img.width});
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const double v = img.at(y, x, c);
        t.at(0, c, y, x) = normalise ? (v / 255.0 - 0.5) / 0.25 : (v >= 128 ? 1.0 : 0.0);
      }
  return t;
}

// Gray images are replicated across three channels.
io::Image8 as_rgb(io::Image8 img) {
  if (img.channels != 1) return img;
  io::Image8 rgb(img.width, img.height, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) rgb.pixels[i * 3 + c] = img.pixels[i];
  return rgb;
}

Tensor stack(const std::vector<Tensor>& parts) {
  const Shape s = parts.front().shape();
  Tensor out(Shape{parts.size(), s.c, s.h, s.w});
  auto d = out.mutable_data();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto p = parts[i].data();
    std::copy(p.begin(), p.end(), d.begin() + static_cast<std::ptrdiff_t>(i * p.size()));
  }
  return out;
}

}  // namespace

void Adam::step(const nn::ParamSet& params, double lr) {
  for (const auto& p : params.entries()) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in parameter " + p.name);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& p : params.entries()) {
    if (!p.trainable) continue;
    auto& slot = moments_[p.name];
    const std::size_t n = p.tensor.numel();
    if (slot.m.size() != n) {
      slot.m.assign(n, 0.0);
      slot.v.assign(n, 0.0);
    }
    const bool has = p.tensor.has_grad();
    const auto grad = has ? p.tensor.grad() : std::span<const double>{};
    Tensor param = p.tensor;
    auto value = param.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = has ? grad[i] : 0.0;
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
      if (g == 0.0 || lr == 0.0) continue;
      value[i] -= lr * (slot.m[i] / bc1) / (std::sqrt(slot.v[i] / bc2) + eps_);
    }
  }
}

double clip_gradients(const nn::ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.entries()) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (const auto& p : params.entries()) {
      if (!p.trainable || !p.tensor.has_grad()) continue;
      for (double& g : p.tensor.grad_buffer()) g *= k;
    }
  }
  return norm;
}

std::string format_trace(const std::vector<TraceRow>& rows) {
  std::string out = "step\tscale\tloss_total\tloss_fd\tloss_p\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu\t%g\t%.17g\t%.17g\t%.17g\n",
                  static_cast<unsigned long long>(r.step), r.scale, r.loss_total, r.loss_fd,
                  r.loss_p);
    out += buf;
  }
  return out;
}

std::vector<LoadedSample> load_samples(const datagen::Manifest& manifest) {
  if (manifest.rows.empty()) throw DataError("manifest lists no samples");
  std::vector<LoadedSample> samples;
  for (const auto& row : manifest.rows) {
    LoadedSample s{row.id, io::read_png(manifest.image_path(row)),
                   io::read_png(manifest.mask_path(row))};
    const auto where = "sample " + row.id + ": ";
    if (s.image.width != s.mask.width || s.image.height != s.mask.height) {
      throw DataError(where + "image is " + std::to_string(s.image.width) + "x" +
                      std::to_string(s.image.height) + " but mask is " +
                      std::to_string(s.mask.width) + "x" + std::to_string(s.mask.height));
    }
    if (s.mask.channels != 1) throw DataError(where + "mask must be single-channel");
    s.image = as_rgb(std::move(s.image));
    samples.push_back(std::move(s));
  }
  return samples;
}

Tensor image_tensor(const std::vector<const io::Image8*>& images, std::size_t size) {
  std::vector<Tensor> parts;
  for (const auto* img : images) {
    parts.push_back(ops::upsample_bilinear(nullptr, to_tensor(*img, true), size, size));
  }
  return stack(parts);
}

Tensor mask_tensor(const std::vector<const io::Image8*>& masks, std::size_t size) {
  std::vector<Tensor> parts;
  for (const auto* m : masks) parts.push_back(ops::resize_nearest(to_tensor(*m, false), size, size));
  return stack(parts);
}

TrainResult train(const TrainConfig& cfg, const datagen::Manifest& manifest,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume) {
  cfg.validate();
  const auto samples = load_samples(manifest);
  const auto ckpt_dir = cfg.checkpoint_dir.empty() ? out_dir / "checkpoints" : cfg.checkpoint_dir;
  std::error_code ec;
  std::filesystem::create_directories(ckpt_dir, ec);
  if (ec) throw IoError("cannot create " + ckpt_dir.string() + ": " + ec.message());

  nn::C2FNet net(cfg.net);
  Adam adam(cfg.beta1, cfg.beta2, cfg.eps);
  std::uint64_t step = 0;
  std::vector<TraceRow> history;
  if (resume) {
    const Checkpoint ckpt = load_checkpoint(*resume);
    if (ckpt.seed != cfg.seed) throw DataError("checkpoint seed differs from config seed");
    restore(ckpt, net.params(), &adam);
    step = ckpt.step;
    history = read_trace_prefix(out_dir / "trace.tsv", step);
  }

  const std::size_t n = samples.size();
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps =
      cfg.max_steps ? std::min<std::uint64_t>(cfg.max_steps, cfg.epochs * per_epoch)
                    : cfg.epochs * per_epoch;

  TrainResult result;
  auto checkpoint_now = [&](std::uint64_t epochs_done) {
    snap_to_float(net.params(), &adam);
    Checkpoint ckpt = capture(net.params(), &adam);
    ckpt.epoch = epochs_done;
    ckpt.step = step;
    ckpt.seed = cfg.seed;
    ckpt.config = cfg.to_text();
    return ckpt;
  };
  auto flush_trace = [&] {
    std::vector<TraceRow> all = history;
    all.insert(all.end(), result.trace.begin(), result.trace.end());
    write_text(out_dir / "trace.tsv", format_trace(all));
  };

  while (step < total_steps) {
    const std::uint64_t epoch = step / per_epoch;
    const double lr = lr_schedule(epoch, cfg);
    const auto order = epoch_order(cfg.seed, epoch, n);
    const std::size_t first = (step % per_epoch) * cfg.batch_size;
    const std::size_t last = std::min(n, first + cfg.batch_size);

    std::vector<const io::Image8*> images, masks;
    for (std::size_t i = first; i < last; ++i) {
      images.push_back(&samples[order[i]].image);
      masks.push_back(&samples[order[i]].mask);
    }
    const std::size_t scale_index = draw_scale_index(cfg.seed, step);
    const std::size_t size = cfg.scaled_size(scale_index);
    const Tensor x = image_tensor(images, size);
    const Tensor m = mask_tensor(masks, size);

    Graph graph;
    const nn::ForwardContext ctx{&graph, true};
    const auto out = net.forward(ctx, x);
    const auto loss = loss::total_loss(&graph, out.coarse, out.fine, m);
    net.params().zero_grad();
    graph.backward(loss.total);
    clip_gradients(net.params(), cfg.clip_norm);
    adam.step(net.params(), lr);
    ++step;

    const TraceRow row{step, cfg.scales[scale_index], loss.total.item(), loss.coarse(),
                       loss.fine()};
    if (!std::isfinite(row.loss_total)) {
      throw NonFiniteError("non-finite loss at step " + std::to_string(step));
    }
    result.trace.push_back(row);

    if (step % per_epoch == 0) {
      const std::uint64_t done = step / per_epoch;
      save_checkpoint(ckpt_dir / epoch_file(done), checkpoint_now(done));
      if (cfg.keep_checkpoints && done > cfg.keep_checkpoints) {
        std::filesystem::remove(ckpt_dir / epoch_file(done - cfg.keep_checkpoints), ec);
      }
      flush_trace();
    }
  }

  result.final_checkpoint = out_dir / "final.c2fk";
  save_checkpoint(result.final_checkpoint, checkpoint_now(step / per_epoch));
  flush_trace();
  return result;
}

std::vector<Prediction> predict(const Checkpoint& ckpt, const datagen::Manifest& manifest) {
  const TrainConfig cfg = TrainConfig::parse(ckpt.config);
  nn::C2FNet net(cfg.net);
  restore(ckpt, net.params(), nullptr);
  std::vector<Prediction> predictions;
  for (const auto& row : manifest.rows) {
    const io::Image8 image = as_rgb(io::read_png(manifest.image_path(row)));
    const Tensor x = image_tensor({&image}, cfg.input_size);
    const auto out = net.forward(nn::ForwardContext{nullptr, false}, x);
    const Tensor logits = ops::upsample_bilinear(nullptr, out.fine, image.height, image.width);
    Prediction p{row.id, io::Image8(image.width, image.height, 1)};
    auto d = logits.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      p.map.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * ops::sigmoid_value(d[i])));
    }
    predictions.push_back(std::move(p));
  }
  return predictions;
}

void write_predictions(const std::vector<Prediction>& predictions,
                       const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (const auto& p : predictions) io::write_png(out_dir / (p.id + ".png"), p.map);
}

}  // namespace c2f::train
