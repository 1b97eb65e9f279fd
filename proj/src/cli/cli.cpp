#include "c2f/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "c2f/datagen.hpp"
#include "c2f/errors.hpp"
#include "c2f/io/png.hpp"
#include "c2f/metrics.hpp"
#include "c2f/suite.hpp"
#include "c2f/trainer.hpp"

namespace c2f::cli {
namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  datagen::SynthConfig cfg;
  fs::path out;
};

struct TrainArgs {
  fs::path data, config, out, resume;
};

struct PredictArgs {
  fs::path checkpoint, data, out;
};

struct ScoreArgs {
  fs::path pred, gt, out;
};

struct GradArgs {
  bool full = false;
  std::size_t seeds = 20;
};

int synth(const SynthArgs& a, std::ostream& out) {
  const auto manifest = datagen::write_dataset(a.cfg, a.out);
  out << "wrote " << a.cfg.count << " samples to " << manifest.string() << "\n";
  return kOk;
}

int train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = a.config.empty() ? train::TrainConfig{} : train::TrainConfig::load(a.config);
  const auto manifest = datagen::read_manifest(a.data);
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = a.resume;
  fs::create_directories(a.out);
  const auto result = train::train(cfg, manifest, a.out, resume);
  if (!result.trace.empty()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "steps %llu..%llu loss %.6f -> %.6f\n",
                  static_cast<unsigned long long>(result.trace.front().step),
                  static_cast<unsigned long long>(result.trace.back().step),
                  result.trace.front().loss_total, result.trace.back().loss_total);
    out << buf;
  }
  out << "final checkpoint " << result.final_checkpoint.string() << "\n";
  return kOk;
}

int predict(const PredictArgs& a, std::ostream& out) {
  const auto ckpt = train::load_checkpoint(a.checkpoint);
  const auto manifest = datagen::read_manifest(a.data);
  const auto predictions = train::predict(ckpt, manifest);
  train::write_predictions(predictions, a.out);
  out << "wrote " << predictions.size() << " maps to " << a.out.string() << "\n";
  return kOk;
}

std::map<std::string, fs::path> png_stems(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      stems.emplace(entry.path().stem().string(), entry.path());
    }
  }
  return stems;
}

io::Image8 gray(const fs::path& path) {
  io::Image8 img = io::read_png(path);
  if (img.channels != 1) throw DataError(path.string() + ": expected a single-channel map");
  return img;
}

int score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const auto pred = png_stems(a.pred);
  const auto gt = png_stems(a.gt);
  std::vector<std::string> unmatched;
  for (const auto& [stem, path] : pred)
    if (!gt.count(stem)) unmatched.push_back(stem + " (prediction only)");
  for (const auto& [stem, path] : gt)
    if (!pred.count(stem)) unmatched.push_back(stem + " (ground truth only)");
  if (!unmatched.empty()) {
    err << "error: " << unmatched.size() << " unmatched stem(s):\n";
    for (const auto& s : unmatched) err << "  " << s << "\n";
    return kFailure;
  }
  if (pred.empty()) throw DataError("no PNG files in " + a.pred.string());

  std::vector<std::string> names;
  std::vector<metrics::MaskPair> pairs;
  for (const auto& [stem, path] : pred) {
    const io::Image8 p = gray(path);
    const io::Image8 g = gray(gt.at(stem));
    if (p.width != g.width || p.height != g.height) {
      throw DataError(stem + ": prediction and ground truth sizes differ");
    }
    names.push_back(stem);
    pairs.push_back(metrics::MaskPair::from_u8(p.height, p.width, p.pixels, g.pixels));
  }
  const auto report = metrics::evaluate_dataset(names, pairs);
  const std::string tsv = report.to_tsv();
  std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + a.out.string());
  file << tsv;
  if (!file) throw IoError("write failed: " + a.out.string());
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu pairs  M %.4f  S %.4f  F %.4f  Fw %.4f  E %.4f\n",
                report.count(), report.mean.mae, report.mean.s, report.mean.f, report.mean.fw,
                report.mean.e);
  out << buf;
  return kOk;
}

int gradcheck(const GradArgs& a, std::ostream& out) {
  bool ok = true;
  auto line = [&](const SuiteResult& r, bool gated) {
    const bool pass = r.max_rel_error < 1e-4;
    if (gated) ok = ok && pass;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-4s %-28s seeds %-3zu probes %-5zu max_rel_err %.3e\n",
                  gated ? (pass ? "ok" : "FAIL") : "info", r.name.c_str(), r.seeds, r.probes,
                  r.max_rel_error);
    out << buf << std::flush;
  };
  for (const auto& c : operator_grad_cases()) line(run_grad_case(c, a.seeds), true);
  if (a.full) {
    for (const auto& c : block_grad_cases()) line(run_grad_case(c, a.seeds), true);
    line(run_grad_case(network_grad_case(NetworkTarget::image, 24), a.seeds), true);
    // Precision-limited for tiny gradients; reported, not gated.
    line(run_grad_case(network_grad_case(NetworkTarget::parameters, 24), 1), false);
  }
  out << (ok ? "all gated checks below 1e-4\n" : "gradient check failed\n");
  return ok ? kOk : kFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coarse-to-fine camouflaged object detection at desk scale", "c2f"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(34);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  SynthArgs sa;
  auto* s = app.add_subcommand("synth", "Generate a synthetic camouflage dataset");
  s->add_option("--out", sa.out, "Output directory")->required();
  s->add_option("--count", sa.cfg.count, "Number of samples")->capture_default_str();
  s->add_option("--size", sa.cfg.image_size, "Image side, multiple of 32")->capture_default_str();
  s->add_option("--seed", sa.cfg.seed, "Generator seed")->capture_default_str();
  s->add_option("--contrast", sa.cfg.contrast_delta, "Object/background shift in (0, 1]")
      ->capture_default_str();
  s->add_option("--texture-scale", sa.cfg.texture_scale, "Texture lattice cell in pixels")
      ->capture_default_str();
  s->add_option("--coverage-min", sa.cfg.coverage_min, "Minimum foreground fraction")
      ->capture_default_str();
  s->add_option("--coverage-max", sa.cfg.coverage_max, "Maximum foreground fraction")
      ->capture_default_str();

  TrainArgs ta;
  auto* t = app.add_subcommand("train", "Train on a manifest; writes trace.tsv and checkpoints");
  t->add_option("--data", ta.data, "manifest.tsv")->required();
  t->add_option("--config", ta.config, "key = value config file (defaults if omitted)");
  t->add_option("--out", ta.out, "Output directory")->required();
  t->add_option("--resume", ta.resume, "Checkpoint to continue from");

  PredictArgs pa;
  auto* p = app.add_subcommand("predict", "Write 8-bit probability maps as PNG");
  p->add_option("--checkpoint", pa.checkpoint, "Checkpoint file")->required();
  p->add_option("--data", pa.data, "manifest.tsv")->required();
  p->add_option("--out", pa.out, "Output directory")->required();

  ScoreArgs ca;
  auto* c = app.add_subcommand("score", "Score prediction PNGs against masks, paired by stem");
  c->add_option("--pred", ca.pred, "Directory of prediction PNGs")->required();
  c->add_option("--gt", ca.gt, "Directory of ground-truth PNGs")->required();
  c->add_option("--out", ca.out, "Report TSV path")->required();

  GradArgs ga;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  g->add_flag("--full", ga.full, "Add blocks and the end-to-end network");
  g->add_option("--seeds", ga.seeds, "Seeds per check")->capture_default_str()->check(
      CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) {
      sa.cfg.validate();
      return synth(sa, out);
    }
    if (t->parsed()) return train(ta, out);
    if (p->parsed()) return predict(pa, out);
    if (c->parsed()) return score(ca, out, err);
    if (g->parsed()) return gradcheck(ga, out);
  } catch (const InvalidSpecError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace c2f::cli
