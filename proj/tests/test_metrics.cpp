#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/metrics.hpp"
#include "oracles/metrics.hpp"

using namespace c2f;
using namespace c2f::metrics;

using namespace c2f::oracles;

TEST_CASE("hand cases") {
  const auto mp = MaskPair::make(2, 2, {1, 0, 0, 0}, {1, 1, 0, 0});
  CHECK(mae(mp) == 0.25);

  const auto fp = MaskPair::make(2, 2, {0.8, 0.6, 0.1, 0.0}, {1, 1, 0, 0});
  const auto b = adaptive_binary(fp);
  CHECK(b == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(f_measure_adaptive(fp) == doctest::Approx(0.8125).epsilon(1e-15));
  CHECK(std::abs(f_measure_adaptive(fp) - 0.65 / 0.8) < 1e-15);

  // Checkerboard: B = 1 - G exactly.
  const auto checker = MaskPair::make(2, 2, {0, 1, 1, 0}, {1, 0, 0, 1});
  CHECK(e_measure_adaptive(checker) == 0.0);
  CHECK(mae(checker) == 1.0);

  const auto empty = MaskPair::make(2, 3, {0.1, 0.2, 0.3, 0.0, 0.0, 0.6}, {0, 0, 0, 0, 0, 0});
  CHECK(s_measure(empty) == doctest::Approx(1.0 - 1.2 / 6.0).epsilon(1e-15));
  CHECK(weighted_f_measure(empty).degenerate);
  CHECK(weighted_f_measure(empty).value == 0.0);
  // t = 0.4: only 0.6 survives.
  CHECK(e_measure_adaptive(empty) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));

  const auto full = MaskPair::make(1, 4, {0.5, 1.0, 0.25, 0.25}, {1, 1, 1, 1});
  CHECK(s_measure(full) == 0.5);
  CHECK(e_measure_adaptive(full) == 0.25);
}

TEST_CASE("P = G: every measure is 1 and MAE is 0") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.35);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 2 + trial % 9, w = 2 + (trial / 9) % 9;
    std::vector<double> g(h * w);
    for (double& v : g) v = coin(rng) ? 1.0 : 0.0;
    g[0] = 1.0;
    g[h * w - 1] = 0.0;
    const auto mp = MaskPair::make(h, w, g, g);
    const auto s = score("x", mp);
    CHECK(s.mae == 0.0);
    CHECK(s.s == 1.0);
    CHECK(s.f == 1.0);
    CHECK(s.fw == 1.0);
    CHECK(s.e == 1.0);
  }
}

TEST_CASE("degenerate predictions") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto mp = random_pair(rng, 8, 8, 0);
    mp.truth[5] = 1.0;
    std::fill(mp.prediction.begin(), mp.prediction.end(), 0.0);
    CHECK(f_measure_adaptive(mp) == 0.0);
    CHECK(weighted_f_measure(mp).value == 0.0);
    for (auto v : adaptive_binary(mp)) CHECK(v == 0);
  }
}

TEST_CASE("transcription oracles on 200 random 8x8 pairs") {
  std::mt19937_64 rng(7);
  double worst_s = 0.0, worst_f = 0.0, worst_fw = 0.0, worst_e = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto mp = random_pair(rng, 8, 8, trial % 4);
    const auto s = score("r", mp);
    worst_s = std::max(worst_s, std::abs(s.s - oracle_s(mp)));
    worst_f = std::max(worst_f, std::abs(s.f - oracle_f(mp)));
    worst_fw = std::max(worst_fw, std::abs(s.fw - oracle_fw(mp)));
    worst_e = std::max(worst_e, std::abs(s.e - oracle_e(mp)));
    for (double v : {s.mae, s.s, s.f, s.fw, s.e}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(worst_s < 1e-9);
  CHECK(worst_f < 1e-9);
  CHECK(worst_fw < 1e-9);
  CHECK(worst_e < 1e-9);

  // Odd sizes, thin structures, centroid on the last row/column.
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 1 + trial % 11, w = 1 + (trial * 7) % 13;
    const auto mp = random_pair(rng, h, w, trial % 4);
    CHECK(s_measure(mp) == doctest::Approx(oracle_s(mp)).epsilon(1e-9));
    CHECK(weighted_f_measure(mp).value == doctest::Approx(oracle_fw(mp)).epsilon(1e-9));
    CHECK(e_measure_adaptive(mp) == doctest::Approx(oracle_e(mp)).epsilon(1e-9));
  }
}

TEST_CASE("MAE: complement symmetry, permutation invariance, monotonicity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto mp = random_pair(rng, 6, 7, trial % 4);
    std::vector<double> pc, gc;
    for (double v : mp.prediction) pc.push_back(1.0 - v);
    for (double v : mp.truth) gc.push_back(1.0 - v);
    CHECK(mae(MaskPair::make(6, 7, pc, gc)) == doctest::Approx(mae(mp)).epsilon(1e-14));

    std::vector<std::size_t> perm(42);
    for (std::size_t i = 0; i < 42; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(42), gp(42);
    for (std::size_t i = 0; i < 42; ++i) {
      pp[i] = mp.prediction[perm[i]];
      gp[i] = mp.truth[perm[i]];
    }
    CHECK(mae(MaskPair::make(6, 7, pp, gp)) == doctest::Approx(mae(mp)).epsilon(1e-14));

    const std::size_t k = perm[0];
    const double before = mae(mp);
    mp.prediction[k] += 0.5 * (mp.truth[k] - mp.prediction[k]);
    CHECK(mae(mp) <= before);
  }
}

TEST_CASE("adaptive F is 1 exactly when binarisation reproduces G") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    auto mp = random_pair(rng, 5, 5, trial % 4);
    mp.truth[0] = 1.0;
    const auto b = adaptive_binary(mp);
    bool same = true;
    for (std::size_t i = 0; i < b.size(); ++i) same = same && (b[i] == mp.truth[i]);
    CHECK((f_measure_adaptive(mp) == 1.0) == same);
  }
}

TEST_CASE("ingestion and errors") {
  const std::vector<std::uint8_t> p{0, 255, 128, 51};
  const std::vector<std::uint8_t> g{0, 255, 128, 127};
  const auto mp = MaskPair::from_u8(2, 2, p, g);
  CHECK(mp.prediction == std::vector<double>{0.0, 1.0, 128.0 / 255.0, 0.2});
  CHECK(mp.truth == std::vector<double>{0, 1, 1, 0});

  const auto clamped = MaskPair::make(1, 2, {-0.5, 1.5}, {0, 1});
  CHECK(clamped.prediction == std::vector<double>{0.0, 1.0});

  CHECK_THROWS_AS(MaskPair::make(2, 2, {0, 0, 0}, {0, 0, 0, 0}), DimensionError);
  CHECK_THROWS_AS(MaskPair::make(1, 2, {0, 0}, {0, 0.5}), ContractError);
  CHECK_THROWS_AS(MaskPair::from_u8(2, 2, p, std::vector<std::uint8_t>{0}), DimensionError);
  CHECK_THROWS_AS(evaluate_dataset({}, {}), DataError);
}

TEST_CASE("dataset aggregation") {
  std::mt19937_64 rng(17);
  const auto one = random_pair(rng, 8, 8, 1);
  const auto single = evaluate_dataset({"a"}, {one});
  const auto triple = evaluate_dataset({"a", "b", "c"}, {one, one, one});
  CHECK(single.mean.mae == score("a", one).mae);
  CHECK(single.mean.s == score("a", one).s);
  CHECK(triple.mean.s == doctest::Approx(single.mean.s).epsilon(1e-15));
  CHECK(triple.mean.fw == doctest::Approx(single.mean.fw).epsilon(1e-15));
  CHECK(triple.count() == 3);

  std::vector<std::string> names;
  std::vector<MaskPair> pairs;
  for (int i = 0; i < 40; ++i) {
    names.push_back("s" + std::to_string(i));
    pairs.push_back(random_pair(rng, 8, 8, i % 4));
  }
  const auto a = evaluate_dataset(names, pairs);
  std::vector<std::size_t> order(40);
  for (std::size_t i = 0; i < 40; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::string> n2;
  std::vector<MaskPair> p2;
  for (auto i : order) {
    n2.push_back(names[i]);
    p2.push_back(pairs[i]);
  }
  const auto b = evaluate_dataset(n2, p2);
  CHECK(a.mean.mae == b.mean.mae);
  CHECK(a.mean.s == b.mean.s);
  CHECK(a.mean.f == b.mean.f);
  CHECK(a.mean.fw == b.mean.fw);
  CHECK(a.mean.e == b.mean.e);

  const std::string tsv = single.to_tsv();
  CHECK(tsv.rfind("name\tM\tS\tF\tFw\tE\n", 0) == 0);
  CHECK(tsv.find("\nMEAN\t") != std::string::npos);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
}
