#include "c2f/suite.hpp"

#include <memory>
#include <random>

#include "c2f/loss.hpp"
#include "c2f/nn/blocks.hpp"
#include "c2f/nn/network.hpp"
#include "c2f/ops.hpp"

namespace c2f {
namespace {

using ops::ConvSpec;

Tensor normal(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor t(shape);
  for (double& v : t.mutable_data()) v = d(rng);
  return t;
}

Tensor binary_mask(Shape shape, std::mt19937_64& rng) {
  Tensor t(shape);
  for (double& v : t.mutable_data()) v = static_cast<double>(rng() & 1u);
  return t;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Moves batch-norm affine terms and running statistics away from their
// initial values so every entry is exercised; conv weights keep their
// initialisation.
void perturb_affine(const nn::ParamSet& params, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const auto& e : params.entries()) {
    Tensor t = e.tensor;
    if (ends_with(e.name, ".gamma")) {
      for (double& v : t.mutable_data()) v = 1.0 + u(rng);
    } else if (ends_with(e.name, ".beta") || ends_with(e.name, ".bias") ||
               ends_with(e.name, ".running_mean")) {
      for (double& v : t.mutable_data()) v = 0.5 * u(rng);
    } else if (ends_with(e.name, ".running_var")) {
      for (double& v : t.mutable_data()) v = 1.25 + 1.5 * u(rng);
    }
  }
}

std::vector<NamedInput> trainable(const nn::ParamSet& params) {
  std::vector<NamedInput> out;
  for (const auto& e : params.entries()) {
    if (e.trainable) out.push_back({e.name, e.tensor});
  }
  return out;
}

GradCheckOptions options(std::uint64_t seed, std::size_t probes) {
  GradCheckOptions o;
  o.seed = seed;
  o.max_probes = probes;
  return o;
}

// Builds a block with fresh parameters, then checks gradients w.r.t. the
// listed inputs and all trainable parameters. Batch norm runs on stored
// statistics: with batch statistics a shift ahead of a 1x1 conv + BN has an
// exactly zero gradient, which a relative-error test cannot separate from
// finite-difference noise.
template <typename Block, typename Make, typename Apply>
GradCheckReport check_block(std::uint64_t seed, std::size_t probes, Make make,
                            std::vector<NamedInput> inputs, Apply apply) {
  std::mt19937_64 rng(seed * 7919 + 17);
  auto params = std::make_shared<nn::ParamSet>();
  nn::ParamInit init(seed + 101);
  auto block = std::make_shared<Block>(make(*params, init));
  perturb_affine(*params, rng);
  for (auto& p : trainable(*params)) inputs.push_back(p);
  return grad_check(
      [params, block, apply](Graph* g) {
        return apply(*block, nn::ForwardContext{g, false});
      },
      std::move(inputs), options(seed, probes));
}

}  // namespace

std::vector<GradCase> operator_grad_cases() {
  std::vector<GradCase> cases;
  auto add = [&](std::string name, auto body) {
    cases.push_back({std::move(name), [body](std::uint64_t seed) {
                       std::mt19937_64 rng(seed * 104729 + 3);
                       return body(seed, rng);
                     }});
  };
  const Shape s{2, 3, 6, 5};

  add("conv2d", [s](std::uint64_t seed, std::mt19937_64& rng) {
    const ConvSpec spec = ConvSpec::square(3, 2, 3, 1 + seed % 2, seed % 3, 1 + seed % 2);
    Tensor x = normal(s, rng), w = normal(spec.weight_shape(), rng),
           b = normal(Shape{1, 2, 1, 1}, rng);
    return grad_check([=](Graph* g) { return ops::conv2d(g, x, w, b, spec); },
                      {{"x", x}, {"w", w}, {"b", b}}, options(seed, 0));
  });
  add("conv_transpose2d", [s](std::uint64_t seed, std::mt19937_64& rng) {
    ConvSpec spec = ConvSpec::square(3, 2, 3, 1 + seed % 2, seed % 2);
    spec.transposed = true;
    Tensor x = normal(s, rng), w = normal(spec.weight_shape(), rng),
           b = normal(Shape{1, 2, 1, 1}, rng);
    return grad_check([=](Graph* g) { return ops::conv_transpose2d(g, x, w, b, spec); },
                      {{"x", x}, {"w", w}, {"b", b}}, options(seed, 0));
  });
  for (bool training : {true, false}) {
    add(training ? "batch_norm/train" : "batch_norm/eval",
        [s, training](std::uint64_t seed, std::mt19937_64& rng) {
          Tensor x = normal(s, rng), gamma = normal(Shape{1, 3, 1, 1}, rng),
                 beta = normal(Shape{1, 3, 1, 1}, rng);
          return grad_check(
              [=](Graph* g) {
                auto st = ops::BatchNormState::fresh(3);
                st.running_mean.mutable_data()[1] = 0.3;
                st.running_var.mutable_data()[2] = 2.0;
                return ops::batch_norm(g, x, gamma, beta, st, training);
              },
              {{"x", x}, {"gamma", gamma}, {"beta", beta}}, options(seed, 0));
        });
  }
  auto unary = [&](std::string name, std::function<Tensor(Graph*, const Tensor&)> op) {
    add(std::move(name), [s, op](std::uint64_t seed, std::mt19937_64& rng) {
      Tensor x = normal(s, rng);
      return grad_check([=](Graph* g) { return op(g, x); }, {{"x", x}}, options(seed, 0));
    });
  };
  auto binary = [&](std::string name,
                    std::function<Tensor(Graph*, const Tensor&, const Tensor&)> op) {
    add(std::move(name), [s, op](std::uint64_t seed, std::mt19937_64& rng) {
      Tensor a = normal(s, rng), b = normal(s, rng);
      return grad_check([=](Graph* g) { return op(g, a, b); }, {{"a", a}, {"b", b}},
                        options(seed, 0));
    });
  };
  unary("avg_pool", [](Graph* g, const Tensor& x) { return ops::avg_pool2d(g, x, 3, 1, 1); });
  unary("max_pool", [](Graph* g, const Tensor& x) { return ops::max_pool2d(g, x, 2, 2); });
  unary("global_avg_pool", [](Graph* g, const Tensor& x) { return ops::global_avg_pool(g, x); });
  unary("upsample_bilinear",
        [](Graph* g, const Tensor& x) { return ops::upsample_bilinear(g, x, 11, 7); });
  unary("relu", [](Graph* g, const Tensor& x) { return ops::relu(g, x); });
  unary("sigmoid", [](Graph* g, const Tensor& x) { return ops::sigmoid(g, x); });
  unary("one_minus", [](Graph* g, const Tensor& x) { return ops::one_minus(g, x); });
  unary("scale", [](Graph* g, const Tensor& x) { return ops::scale(g, x, -1.7); });
  unary("sum", [](Graph* g, const Tensor& x) { return ops::sum(g, x); });
  unary("mean", [](Graph* g, const Tensor& x) { return ops::mean(g, x); });
  binary("add", [](Graph* g, const Tensor& a, const Tensor& b) { return ops::add(g, a, b); });
  binary("sub", [](Graph* g, const Tensor& a, const Tensor& b) { return ops::sub(g, a, b); });
  binary("mul", [](Graph* g, const Tensor& a, const Tensor& b) { return ops::mul(g, a, b); });
  binary("concat", [](Graph* g, const Tensor& a, const Tensor& b) {
    return ops::concat_channels(g, a, b);
  });
  add("expand", [s](std::uint64_t seed, std::mt19937_64& rng) {
    Tensor col = normal(Shape{2, 1, 6, 5}, rng);
    return grad_check([=](Graph* g) { return ops::expand(g, col, s); }, {{"x", col}},
                      options(seed, 0));
  });

  const Shape m{2, 1, 7, 6};
  add("weighted_bce", [m](std::uint64_t seed, std::mt19937_64& rng) {
    Tensor z = normal(m, rng, 2.0), gt = binary_mask(m, rng);
    Tensor w = loss::pixel_weights(gt, {3, 5.0});
    return grad_check([=](Graph* g) { return loss::weighted_bce(g, z, gt, w); }, {{"z", z}},
                      options(seed, 0));
  });
  add("weighted_iou", [m](std::uint64_t seed, std::mt19937_64& rng) {
    Tensor z = normal(m, rng, 2.0), gt = binary_mask(m, rng);
    Tensor w = loss::pixel_weights(gt, {3, 5.0});
    return grad_check([=](Graph* g) { return loss::weighted_iou(g, z, gt, w); }, {{"z", z}},
                      options(seed, 0));
  });
  add("total_loss", [m](std::uint64_t seed, std::mt19937_64& rng) {
    Tensor zc = normal(m, rng, 2.0), zf = normal(m, rng, 2.0), gt = binary_mask(m, rng);
    return grad_check([=](Graph* g) { return loss::total_loss(g, zc, zf, gt).total; },
                      {{"coarse", zc}, {"fine", zf}}, options(seed, 0));
  });
  return cases;
}

std::vector<GradCase> block_grad_cases(std::size_t probes) {
  std::vector<GradCase> cases;
  auto rng_for = [](std::uint64_t seed) { return std::mt19937_64(seed * 15485863 + 11); };

  for (std::size_t branches : {5u, 4u}) {
    cases.push_back({branches == 5 ? "rfb" : "rfb/modified", [=](std::uint64_t seed) {
                       auto rng = rng_for(seed);
                       Tensor x = normal(Shape{2, 6, 12, 12}, rng);
                       return check_block<nn::Rfb>(
                           seed, probes,
                           [=](nn::ParamSet& p, nn::ParamInit& i) {
                             return nn::Rfb(p, "rfb", 6, 8, branches, i);
                           },
                           {{"x", x}},
                           [x](const nn::Rfb& b, const nn::ForwardContext& c) { return b(c, x); });
                     }});
  }
  cases.push_back({"msca", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     Tensor x = normal(Shape{2, 8, 5, 5}, rng);
                     return check_block<nn::Msca>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) { return nn::Msca(p, "msca", 8, 4, i); },
                         {{"x", x}},
                         [x](const nn::Msca& b, const nn::ForwardContext& c) { return b(c, x); });
                   }});
  cases.push_back({"acfm", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     Tensor fa = normal(Shape{2, 8, 6, 6}, rng);
                     Tensor fb = normal(Shape{2, 8, 3, 3}, rng);
                     return check_block<nn::Acfm>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) { return nn::Acfm(p, "acfm", 8, 4, i); },
                         {{"fa", fa}, {"fb", fb}},
                         [fa, fb](const nn::Acfm& b, const nn::ForwardContext& c) {
                           return b(c, fa, fb);
                         });
                   }});
  cases.push_back({"dgcm", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     Tensor f = normal(Shape{2, 8, 6, 6}, rng);
                     return check_block<nn::Dgcm>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) { return nn::Dgcm(p, "dgcm", 8, 4, i); },
                         {{"f", f}},
                         [f](const nn::Dgcm& b, const nn::ForwardContext& c) { return b(c, f); });
                   }});
  cases.push_back({"mrb", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     Tensor x = normal(Shape{2, 4, 6, 7}, rng);
                     return check_block<nn::Mrb>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) { return nn::Mrb(p, "mrb", 4, i); },
                         {{"x", x}},
                         [x](const nn::Mrb& b, const nn::ForwardContext& c) { return b(c, x); });
                   }});
  cases.push_back({"cim", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     Tensor x = normal(Shape{2, 16, 5, 5}, rng);
                     return check_block<nn::Cim>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) { return nn::Cim(p, "cim", 16, i); },
                         {{"x", x}},
                         [x](const nn::Cim& b, const nn::ForwardContext& c) {
                           return ops::mean(c.graph, b(c, x));
                         });
                   }});
  cases.push_back({"backbone", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     Tensor x = normal(Shape{2, 3, 32, 32}, rng);
                     return check_block<nn::Backbone>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) {
                           return nn::Backbone(p, "backbone", {4, 4, 6, 6, 8}, i);
                         },
                         {{"image", x}},
                         [x](const nn::Backbone& b, const nn::ForwardContext& c) {
                           const auto pyr = b(c, x);
                           Tensor acc = ops::sum(c.graph, pyr.f(1));
                           for (std::size_t i = 2; i <= 5; ++i) {
                             acc = ops::add(c.graph, acc, ops::sum(c.graph, pyr.f(i)));
                           }
                           return acc;
                         });
                   }});
  cases.push_back({"refinement", [=](std::uint64_t seed) {
                     auto rng = rng_for(seed);
                     nn::FeaturePyramid pyr;
                     pyr.levels[0] = normal(Shape{2, 4, 8, 8}, rng);
                     pyr.levels[1] = normal(Shape{2, 6, 4, 4}, rng);
                     pyr.levels[2] = normal(Shape{2, 8, 2, 2}, rng);
                     pyr.levels[3] = Tensor(Shape{2, 1, 1, 1});
                     pyr.levels[4] = Tensor(Shape{2, 1, 1, 1});
                     Tensor coarse = normal(Shape{2, 1, 2, 2}, rng, 2.0);
                     return check_block<nn::Refinement>(
                         seed, probes,
                         [](nn::ParamSet& p, nn::ParamInit& i) {
                           return nn::Refinement(p, "refine", {4, 6, 8}, 4, 4, i);
                         },
                         {{"f1", pyr.levels[0]},
                          {"f2", pyr.levels[1]},
                          {"f3", pyr.levels[2]},
                          {"coarse", coarse}},
                         [pyr, coarse](const nn::Refinement& b, const nn::ForwardContext& c) {
                           return b(c, pyr, coarse);
                         });
                   }});
  return cases;
}

GradCase network_grad_case(NetworkTarget target, std::size_t probes) {
  const bool params = target == NetworkTarget::parameters;
  return {params ? "network+loss/params" : "network+loss/image",
          [params, probes](std::uint64_t seed) {
            std::mt19937_64 rng(seed * 2654435761u + 5);
            nn::NetConfig cfg;
            cfg.seed = seed + 1;
            auto net = std::make_shared<nn::C2FNet>(cfg);
            perturb_affine(net->params(), rng);
            Tensor image = normal(Shape{1, 3, 32, 32}, rng);
            Tensor mask = binary_mask(Shape{1, 1, 32, 32}, rng);
            std::vector<NamedInput> inputs;
            if (params) {
              inputs = trainable(net->params());
            } else {
              inputs.push_back({"image", image});
            }
            return grad_check(
                [net, image, mask](Graph* g) {
                  const auto out = net->forward(nn::ForwardContext{g, false}, image);
                  return loss::total_loss(g, out.coarse, out.fine, mask).total;
                },
                std::move(inputs), options(seed, probes));
          }};
}

SuiteResult run_grad_case(const GradCase& c, std::size_t seeds, std::uint64_t first_seed) {
  SuiteResult r;
  r.name = c.name;
  for (std::uint64_t s = first_seed; s < first_seed + seeds; ++s) {
    const GradCheckReport report = c.run(s);
    for (const auto& in : report.inputs) {
      r.probes += in.probes;
      r.kinked += in.kinked;
      if (r.worst_input.empty() || in.max_rel_error > r.max_rel_error) {
        r.max_rel_error = in.max_rel_error;
        r.worst_seed = s;
        r.worst_input = in.name;
      }
    }
    ++r.seeds;
  }
  return r;
}

}  // namespace c2f
