// Acceptance harness: one PASS/FAIL line per criterion, details indented above it.
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "c2f/cli.hpp"
#include "c2f/io/png.hpp"
#include "c2f/datagen.hpp"
#include "c2f/loss.hpp"
#include "c2f/metrics.hpp"
#include "c2f/nn/blocks.hpp"
#include "c2f/nn/network.hpp"
#include "c2f/suite.hpp"
#include "c2f/trainer.hpp"
#include "oracles/blocks.hpp"
#include "oracles/loss.hpp"
#include "oracles/metrics.hpp"
#include "test_util.hpp"

using namespace c2f;
using namespace c2f::oracles;
using c2f::nn::ParamInit;
using c2f::testing::random_tensor;
using c2f::testing::read_bytes;
using c2f::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string summary;
};

void detail(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void detail(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  std::printf("      ");
  std::vprintf(fmt, args);
  std::printf("\n");
  std::fflush(stdout);
  va_end(args);
}

std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Verdict gradient_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  auto family = [&](const char* label, const std::vector<GradCase>& cases) {
    double worst = 0.0;
    std::string worst_name;
    std::size_t probes = 0, kinked = 0;
    for (const auto& c : cases) {
      const SuiteResult r = run_grad_case(c, 20);
      probes += r.probes;
      kinked += r.kinked;
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_name = r.name;
      }
      if (!(r.max_rel_error < 1e-4)) {
        v.pass = false;
        detail("%s %s: max rel err %.3e (seed %llu, %s)", label, r.name.c_str(), r.max_rel_error,
               static_cast<unsigned long long>(r.worst_seed), r.worst_input.c_str());
      }
    }
    detail("%-15s %2zu checks x 20 seeds, %6zu probes (%zu kink-replaced), worst %.3e (%s)",
           label, cases.size(), probes, kinked, worst, worst_name.c_str());
    return worst;
  };
  const double ops = family("operators", operator_grad_cases());
  const double blocks = family("blocks", block_grad_cases());
  const double net = family("network/image", {network_grad_case(NetworkTarget::image, 24)});
  const double gated_seconds = seconds_since(t0);

  // Not gated: central differences cannot resolve gradients below ~1e-7|loss|.
  const SuiteResult params = run_grad_case(network_grad_case(NetworkTarget::parameters, 24), 1);
  detail("info: network/params 1 seed, %zu probes, worst %.3e at %s (precision-limited)",
         params.probes, params.max_rel_error, params.worst_input.c_str());

  if (!(gated_seconds < 300.0)) v.pass = false;
  v.summary = format("gradient suite: ops %.1e, blocks %.1e, network %.1e (< 1e-4), %.0f s (< 300)",
                     ops, blocks, net, gated_seconds);
  return v;
}

Verdict acfm_semantics() {
  Verdict v;
  nn::ParamSet ps;
  ParamInit init(7);
  nn::Acfm acfm(ps, "acfm", 8, 4, init);
  std::mt19937_64 rng(13);
  std::size_t violations = 0;
  double worst_excess = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    if (trial % 50 == 0) randomize(ps, rng);
    const Tensor fa = random_tensor(Shape{1, 8, 4, 6}, rng, 2.0);
    const Tensor fb = random_tensor(Shape{1, 8, 2, 3}, rng, 2.0);
    const Tensor fab = acfm.fuse(nn::ForwardContext{nullptr, trial % 2 == 0}, fa, fb);
    const Tensor fbu = ops::upsample_bilinear(nullptr, fb, 4, 6);
    for (std::size_t i = 0; i < fab.numel(); ++i) {
      const double lo = std::min(fa.data()[i], fbu.data()[i]);
      const double hi = std::max(fa.data()[i], fbu.data()[i]);
      const double slack = 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi - lo);
      const double excess = std::max(lo - fab.data()[i], fab.data()[i] - hi);
      worst_excess = std::max(worst_excess, excess);
      if (excess > slack) ++violations;
    }
  }
  detail("1000 instances: %zu elements outside [min, max] of the aligned inputs; worst excess %.2e",
         violations, std::max(0.0, worst_excess));

  // Gate saturated to 1 through the last BN of both attention branches.
  std::mt19937_64 rng2(17);
  randomize(ps, rng2);
  fill(ps, "acfm.msca.bn2.gamma", 0.0);
  fill(ps, "acfm.msca.bn2.beta", 40.0);
  double sat = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor fa = random_tensor(Shape{2, 8, 6, 4}, rng2, 2.0);
    const Tensor fb = random_tensor(Shape{2, 8, 3, 2}, rng2, 2.0);
    sat = std::max(sat, max_abs_diff(acfm.fuse(kEval, fa, fb), fa));
    sat = std::max(sat, max_abs_diff(acfm.fuse(nn::ForwardContext{nullptr, true}, fa, fb), fa));
  }
  detail("gate saturated (M = sigmoid(80)): max |fuse - F_a| = %.2e", sat);
  v.pass = violations == 0 && sat <= 1e-12;
  v.summary = format("ACFM convex combination: %zu violations / 1000 instances, saturation %.1e (<= 1e-12)",
                     violations, sat);
  return v;
}

Verdict block_oracles() {
  Verdict v;
  double overall = 0.0;
  auto report = [&](const char* name, double worst) {
    detail("%-12s worst scaled |block - script| %.2e", name, worst);
    overall = std::max(overall, worst);
  };
  std::mt19937_64 rng(101);
  for (std::size_t branches : {5u, 4u}) {
    nn::ParamSet ps;
    ParamInit init(3);
    nn::Rfb rfb(ps, "rfb", 6, 8, branches, init);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      randomize(ps, rng);
      const Tensor x = random_tensor(Shape{2, 6, 9, 11}, rng);
      worst = std::max(worst, scaled_diff(rfb(kEval, x), Script{ps}.rfb("rfb", x, 6, 8, branches)));
    }
    report(branches == 5 ? "RFB" : "RFB (4-br)", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(5);
    nn::Msca msca(ps, "msca", 16, 4, init);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      randomize(ps, rng);
      const Tensor x = random_tensor(Shape{2, 16, 5, 7}, rng);
      worst = std::max(worst, scaled_diff(msca(kEval, x), Script{ps}.msca("msca", x, 16, 4)));
    }
    report("MSCA", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(9);
    nn::Acfm acfm(ps, "acfm", 16, 4, init);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      randomize(ps, rng);
      const Tensor fa = random_tensor(Shape{2, 16, 8, 6}, rng);
      const Tensor fb = random_tensor(Shape{2, 16, 4, 3}, rng);
      worst = std::max(worst, scaled_diff(acfm(kEval, fa, fb), Script{ps}.acfm("acfm", fa, fb, 16)));
    }
    report("ACFM", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(19);
    nn::Dgcm dgcm(ps, "dgcm", 16, 4, init);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      randomize(ps, rng);
      const Tensor f = random_tensor(Shape{2, 16, 6, 8}, rng);
      worst = std::max(worst, scaled_diff(dgcm(kEval, f), Script{ps}.dgcm("dgcm", f, 16)));
    }
    report("DGCM", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(29);
    nn::Mrb mrb(ps, "mrb", 8, init);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      randomize(ps, rng);
      const Tensor x = random_tensor(Shape{2, 8, 7, 9}, rng);
      worst = std::max(worst, scaled_diff(mrb(kEval, x), Script{ps}.mrb("mrb", x, 8)));
    }
    report("MRB", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(37);
    nn::Cim cim(ps, "cim", 8, init);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      randomize(ps, rng);
      const Tensor x = random_tensor(Shape{2, 8, 6, 5}, rng);
      worst = std::max(worst, scaled_diff(cim(kEval, x), Script{ps}.cim("cim", x, 8)));
    }
    report("CIM", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(43);
    const std::array<std::size_t, 3> in{4, 6, 8};
    nn::Refinement refine(ps, "refine", in, 8, 16, init);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      randomize(ps, rng);
      nn::FeaturePyramid p;
      p.levels[0] = random_tensor(Shape{1, 4, 32, 32}, rng);
      p.levels[1] = random_tensor(Shape{1, 6, 16, 16}, rng);
      p.levels[2] = random_tensor(Shape{1, 8, 8, 8}, rng);
      const Tensor coarse = random_tensor(Shape{1, 1, 8, 8}, rng, 3.0);
      worst = std::max(worst, scaled_diff(refine(kEval, p, coarse),
                                          Script{ps}.refine("refine", p, coarse, in, 8, 16)));
    }
    report("refinement", worst);
  }
  {
    nn::ParamSet ps;
    ParamInit init(53);
    const std::array<std::size_t, 5> widths{16, 24, 32, 48, 64};
    nn::Backbone backbone(ps, "backbone", widths, init);
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      randomize(ps, rng);
      const Tensor image = random_tensor(Shape{1, 3, 64, 64}, rng);
      const auto got = backbone(kEval, image);
      const auto ref = Script{ps}.backbone("backbone", image, widths);
      for (std::size_t i = 0; i < 5; ++i)
        worst = std::max(worst, scaled_diff(got.levels[i], ref.levels[i]));
    }
    report("backbone", worst);
  }
  {
    // Cascade wiring: RFBs -> ACFM/DGCM twice -> f_D -> refinement -> CIM.
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      nn::NetConfig cfg;
      cfg.seed = seed;
      nn::C2FNet net(cfg);
      randomize(net.params(), rng);
      const Tensor image = random_tensor(Shape{1, 3, 64, 64}, rng);
      Script s{net.params()};
      const auto p = s.backbone("backbone", image, cfg.widths);
      const Tensor r3 = s.rfb("rfb3", p.f(3), 32, 64, 5);
      const Tensor r4 = s.rfb("rfb4", p.f(4), 48, 64, 5);
      const Tensor r5 = s.rfb("rfb5", p.f(5), 64, 64, 5);
      const Tensor d1 = s.dgcm("dgcm1", s.acfm("acfm1", r4, r5, 64), 64);
      const Tensor d2 = s.dgcm("dgcm2", s.acfm("acfm2", r3, d1, 64), 64);
      const Tensor fd = s.conv("coarse_head", d2, ops::ConvSpec::square(64, 1, 1), true);
      const Tensor fine = s.cim("cim", s.refine("refine", p, fd, {16, 24, 32}, 32, 16), 16);
      const auto out = net.forward(kEval, image);
      worst = std::max(worst, scaled_diff(out.coarse, ops::upsample_bilinear(nullptr, fd, 64, 64)));
      worst = std::max(worst, scaled_diff(out.fine, ops::upsample_bilinear(nullptr, fine, 64, 64)));
    }
    report("network", worst);
  }
  v.pass = overall < kOracleTol;
  v.summary = format("compositional oracles: worst %.1e (< 1e-12) over every block, backbone and network",
                     overall);
  return v;
}

Verdict metric_oracles() {
  Verdict v;
  using namespace c2f::metrics;
  std::mt19937_64 rng(7);
  double ws = 0, wf = 0, wfw = 0, we = 0, wm = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto mp = random_pair(rng, 8, 8, trial % 4);
    const auto s = score("r", mp);
    double m = 0.0;
    for (std::size_t i = 0; i < mp.size(); ++i) m += std::abs(mp.prediction[i] - mp.truth[i]);
    m /= static_cast<double>(mp.size());
    ws = std::max(ws, std::abs(s.s - oracle_s(mp)));
    wf = std::max(wf, std::abs(s.f - oracle_f(mp)));
    wfw = std::max(wfw, std::abs(s.fw - oracle_fw(mp)));
    we = std::max(we, std::abs(s.e - oracle_e(mp)));
    wm = std::max(wm, std::abs(s.mae - m));
  }
  detail("200 random 8x8 pairs: |dS| %.1e  |dF| %.1e  |dFw| %.1e  |dE| %.1e  |dM| %.1e", ws, wf,
         wfw, we, wm);
  const bool oracles = std::max({ws, wf, wfw, we, wm}) < 1e-9;

  const double mae_hand = mae(MaskPair::make(2, 2, {1, 0, 0, 0}, {1, 1, 0, 0}));
  const double f_hand = f_measure_adaptive(MaskPair::make(2, 2, {0.8, 0.6, 0.1, 0.0}, {1, 1, 0, 0}));
  detail("hand cases: MAE %.17g (0.25), adaptive F %.17g (0.8125)", mae_hand, f_hand);
  const bool hand = mae_hand == 0.25 && std::abs(f_hand - 0.8125) <= 1e-15;

  bool identity = true;
  std::bernoulli_distribution coin(0.35);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 2 + trial % 9, w = 2 + (trial / 9) % 9;
    std::vector<double> g(h * w);
    for (double& x : g) x = coin(rng) ? 1.0 : 0.0;
    g[0] = 1.0;
    g[h * w - 1] = 0.0;
    const auto s = score("x", MaskPair::make(h, w, g, g));
    identity = identity && s.mae == 0.0 && s.s == 1.0 && s.f == 1.0 && s.fw == 1.0 && s.e == 1.0;
  }
  detail("P = G over 200 masks: every measure exactly 1, MAE exactly 0: %s", identity ? "yes" : "no");
  v.pass = oracles && hand && identity;
  v.summary = format("metric oracles: worst %.1e (< 1e-9); hand cases %s; P = G %s",
                     std::max({ws, wf, wfw, we, wm}), hand ? "exact" : "WRONG",
                     identity ? "exact" : "WRONG");
  return v;
}

Verdict loss_oracles() {
  Verdict v;
  std::mt19937_64 rng(7);
  double wb = 0.0, wi = 0.0, ww = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> side(1, 8);
    const Shape s{1 + static_cast<std::size_t>(trial % 3), 1, side(rng), side(rng)};
    const Tensor z = random_tensor(s, rng, 3.0);
    const Tensor g = random_mask(s, rng);
    const Tensor w = loss::pixel_weights(g, {3, 5.0});
    wb = std::max(wb, std::abs(bce(z, g, w) - naive_bce(z, g, w)));
    wi = std::max(wi, std::abs(iou(z, g, w) - naive_iou(z, g, w)));
    ww = std::max(ww, max_abs_diff(w, naive_weights(g, 3, 5.0)));
  }
  detail("200 instances: |dBCE| %.1e  |dIoU| %.1e  |dweights| %.1e", wb, wi, ww);

  const Shape s{2, 1, 5, 5};
  const double ln2 = std::abs(bce(Tensor(s, 0.0), random_mask(s, rng), Tensor(s, 1.0)) -
                              std::log(2.0));
  detail("z = 0: |BCE - ln 2| = %.1e", ln2);

  // 7x7 mask with one centre pixel, 3x3 window, lambda 5: the window average
  // at the centre is 1/9, so the lambda-term is 5 * 8/9 = 40/9 and the full
  // weight 1 + 40/9 = 49/9.
  Tensor g(Shape{1, 1, 7, 7}, 0.0);
  g.at(0, 0, 3, 3) = 1.0;
  const double w = loss::pixel_weights(g, {3, 5.0}).at(0, 0, 3, 3);
  const double term_err = std::abs((w - 1.0) - 40.0 / 9.0);
  const double full_err = std::abs(w - 49.0 / 9.0);
  detail("pixel-weight hand case: w = %.17g; |w - 1 - 40/9| = %.1e, |w - 49/9| = %.1e", w, term_err,
         full_err);
  v.pass = std::max({wb, wi, ww}) < 1e-12 && ln2 < 1e-12 && term_err < 1e-12 && full_err < 1e-12;
  v.summary = format("loss oracles: worst %.1e (< 1e-12); ln 2 %.1e; 40/9 term %.1e",
                     std::max({wb, wi, ww}), ln2, term_err);
  return v;
}

// ---------------------------------------------------------------------------

struct Harness {
  TempDir dir;
  datagen::Manifest manifest;
  train::TrainConfig cfg;
  train::TrainResult run_a;
  std::filesystem::path out_a;
};

train::TrainConfig overfit_config() {
  train::TrainConfig cfg;  // input 64, batch 4, widths 16-64, lr 1e-4 decayed at epoch 30
  cfg.seed = 3;
  cfg.epochs = 100;
  cfg.max_steps = 200;
  cfg.keep_checkpoints = 3;
  return cfg;
}

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "c2f");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, e);
  if (err) *err = e.str();
  return code;
}

Verdict overfit(Harness& h) {
  Verdict v;
  const auto t0 = Clock::now();
  datagen::SynthConfig sc;
  sc.count = 8;
  sc.image_size = 64;
  sc.seed = 2024;
  h.manifest = datagen::read_manifest(datagen::write_dataset(sc, h.dir / "data"));
  h.cfg = overfit_config();
  h.out_a = h.dir / "run_a";
  h.run_a = train::train(h.cfg, h.manifest, h.out_a);
  const double first = h.run_a.trace.front().loss_total;
  const double last = h.run_a.trace.back().loss_total;
  detail("run A: %zu steps in %.0f s, loss %.4f -> %.4f (ratio %.3f)", h.run_a.trace.size(),
         seconds_since(t0), first, last, last / first);

  const auto pred = (h.dir / "pred").string();
  const auto report = (h.dir / "report.tsv").string();
  std::string err;
  const int predicted = cli({"predict", "--checkpoint", h.run_a.final_checkpoint.string(), "--data",
                             (h.dir / "data" / "manifest.tsv").string(), "--out", pred}, &err);
  const int scored = cli({"score", "--pred", pred, "--gt", (h.dir / "data" / "masks").string(),
                          "--out", report}, &err);
  double mean_mae = 1.0;
  if (predicted == 0 && scored == 0) {
    std::istringstream in(read_bytes(report));
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("MEAN\t", 0) == 0) mean_mae = std::stod(line.substr(5));
    }
  } else {
    detail("pipeline failed: %s", err.c_str());
  }
  detail("predict -> score on the 8 training samples: mean MAE %.4f", mean_mae);

  const auto t1 = Clock::now();
  const auto run_b = train::train(h.cfg, h.manifest, h.dir / "run_b");
  bool same = run_b.trace.size() == h.run_a.trace.size();
  for (std::size_t i = 0; same && i < run_b.trace.size(); ++i) {
    same = run_b.trace[i].loss_total == h.run_a.trace[i].loss_total &&
           run_b.trace[i].scale == h.run_a.trace[i].scale;
  }
  same = same && read_bytes(run_b.final_checkpoint) == read_bytes(h.run_a.final_checkpoint);
  detail("run B: %.0f s; traces bit-identical and final checkpoints byte-identical: %s",
         seconds_since(t1), same ? "yes" : "no");

  const double elapsed = seconds_since(t0);
  v.pass = last < 0.5 * first && mean_mae < 0.1 && same && elapsed < 600.0;
  v.summary = format("overfit harness: loss x%.3f (< 0.5), MAE %.4f (< 0.1), deterministic %s, %.0f s (< 600)",
                     last / first, mean_mae, same ? "yes" : "no", elapsed);
  return v;
}

Verdict protocol() {
  Verdict v;
  const train::TrainConfig cfg;
  const double lr0 = train::lr_schedule(0, cfg), lr29 = train::lr_schedule(29, cfg);
  const double lr30 = train::lr_schedule(30, cfg), lr99 = train::lr_schedule(99, cfg);
  detail("lr: epoch 0 %.17g, 29 %.17g, 30 %.17g, 99 %.17g", lr0, lr29, lr30, lr99);
  const bool lr_ok = lr0 == 1e-4 && lr29 == 1e-4 && std::abs(lr30 - 1e-5) <= 1e-20 && lr99 == lr30;

  bool draws_ok = true;
  for (std::uint64_t seed : {1ull, 3ull, 12345ull}) {
    std::array<int, 3> counts{};
    for (std::uint64_t s = 0; s < 3000; ++s) ++counts[train::draw_scale_index(seed, s)];
    detail("seed %llu: 3000 draws -> 0.75: %d, 1: %d, 1.25: %d (allowed 950..1050)",
           static_cast<unsigned long long>(seed), counts[0], counts[1], counts[2]);
    for (int c : counts) draws_ok = draws_ok && c >= 950 && c <= 1050;
  }

  const auto full = train::TrainConfig::full_scale();
  full.validate();
  nn::C2FNet net(full.net);
  std::mt19937_64 rng(1);
  const Tensor image = random_tensor(Shape{1, 3, full.input_size, full.input_size}, rng);
  const auto pyramid = net.pyramid(kEval, image);
  const Tensor fd = net.cascade(kEval, pyramid);
  detail("full scale: input %zu, batch %zu, %zu epochs, scaled sizes %zu/%zu/%zu; f_D %s",
         full.input_size, full.batch_size, full.epochs, full.scaled_size(0),
         full.scaled_size(1), full.scaled_size(2), fd.shape().str().c_str());
  const bool full_ok = full.input_size == 352 && full.batch_size == 30 && full.epochs == 100 &&
                        fd.shape() == Shape{1, 1, 44, 44};
  v.pass = lr_ok && draws_ok && full_ok;
  v.summary = format("protocol: lr 1e-4 -> 1e-5 at epoch 30 %s; scale draws %s; full config f_D 44x44 %s",
                     lr_ok ? "ok" : "WRONG", draws_ok ? "ok" : "WRONG", full_ok ? "ok" : "WRONG");
  return v;
}

double max_rel_trace_diff(const std::vector<train::TraceRow>& full, std::uint64_t from_step,
                          const std::vector<train::TraceRow>& resumed, bool& aligned) {
  double worst = 0.0;
  aligned = !resumed.empty() && from_step + resumed.size() == full.size();
  for (std::size_t i = 0; aligned && i < resumed.size(); ++i) {
    const auto& a = full[from_step + i];
    const auto& b = resumed[i];
    aligned = a.step == b.step && a.scale == b.scale;
    worst = std::max(worst, std::abs(a.loss_total - b.loss_total) / std::abs(a.loss_total));
  }
  return worst;
}

Verdict persistence(Harness& h) {
  Verdict v;
  // Resume near the end of the overfit run (the newest kept epochs).
  const auto ckpt98 = h.out_a / "checkpoints" / "epoch_0098.c2fk";
  const auto tail = train::train(h.cfg, h.manifest, h.dir / "resume_a", ckpt98);
  bool aligned_a = false;
  const double diff_a = max_rel_trace_diff(h.run_a.trace, 196, tail.trace, aligned_a);
  const bool final_a = read_bytes(tail.final_checkpoint) == read_bytes(h.run_a.final_checkpoint);
  detail("resume from epoch 98 of 100: %zu steps, max rel trace diff %.1e, final checkpoint identical: %s",
         tail.trace.size(), diff_a, final_a ? "yes" : "no");

  // Mid-run resume on a short desk-scale run with every epoch kept.
  train::TrainConfig short_cfg = h.cfg;
  short_cfg.max_steps = 20;
  short_cfg.keep_checkpoints = 0;
  const auto full = train::train(short_cfg, h.manifest, h.dir / "short");
  const auto resumed = train::train(short_cfg, h.manifest, h.dir / "short_resumed",
                                    h.dir / "short" / "checkpoints" / "epoch_0005.c2fk");
  bool aligned_b = false;
  const double diff_b = max_rel_trace_diff(full.trace, 10, resumed.trace, aligned_b);
  detail("resume from epoch 5 of 10: %zu steps, max rel trace diff %.1e", resumed.trace.size(),
         diff_b);

  const auto ckpt = train::load_checkpoint(h.run_a.final_checkpoint);
  train::save_checkpoint(h.dir / "resaved.c2fk", ckpt);
  const bool ckpt_bytes = read_bytes(h.dir / "resaved.c2fk") == read_bytes(h.run_a.final_checkpoint);
  detail("checkpoint save -> load -> save byte-identical: %s", ckpt_bytes ? "yes" : "no");

  bool png_bytes = true;
  for (const auto& row : h.manifest.rows) {
    for (const auto& path : {h.manifest.image_path(row), h.manifest.mask_path(row)}) {
      const auto copy = h.dir / "copy.png";
      io::write_png(copy, io::read_png(path));
      png_bytes = png_bytes && read_bytes(copy) == read_bytes(path);
    }
  }
  const auto manifest_path = h.dir / "data" / "manifest.tsv";
  const bool manifest_bytes =
      datagen::format_manifest(datagen::read_manifest(manifest_path).rows) == read_bytes(manifest_path);
  detail("PNG read -> write byte-identical for %zu files: %s; manifest: %s",
         2 * h.manifest.rows.size(), png_bytes ? "yes" : "no", manifest_bytes ? "yes" : "no");

  const double worst = std::max(diff_a, diff_b);
  v.pass = aligned_a && aligned_b && worst <= 1e-6 && final_a && ckpt_bytes && png_bytes &&
           manifest_bytes;
  v.summary = format("persistence: resume trace diff %.1e (<= 1e-6); checkpoint, PNG, manifest round trips %s",
                     worst, ckpt_bytes && png_bytes && manifest_bytes ? "byte-exact" : "DIFFER");
  return v;
}

}  // namespace

int main() {
  Harness harness;
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, gradient_suite},
      {2, acfm_semantics},
      {3, block_oracles},
      {4, metric_oracles},
      {5, loss_oracles},
      {6, [&] { return overfit(harness); }},
      {7, protocol},
      {8, [&] { return persistence(harness); }},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = Verdict{false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s\n", v.pass ? "PASS" : "FAIL", id, v.summary.c_str());
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
