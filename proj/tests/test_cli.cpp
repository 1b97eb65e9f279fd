#include <doctest.h>

#include <map>
#include <sstream>

#include "c2f/cli.hpp"
#include "test_util.hpp"

using namespace c2f;
using c2f::testing::read_bytes;
using c2f::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "c2f");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> tsv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream f(line);
    std::string field;
    while (std::getline(f, field, '\t')) fields.push_back(field);
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"synth", "--out", "x", "--bogus"}).code == cli::kUsage);
  CHECK(run({"score", "--pred", "a"}).code == cli::kUsage);
  CHECK(run({"synth", "--out", "x", "--count", "many"}).code == cli::kUsage);
  CHECK(run({"gradcheck", "--seeds", "0"}).code == cli::kUsage);

  const auto help = run({"--help"});
  CHECK(help.code == cli::kOk);
  for (const char* sub : {"synth", "train", "predict", "score", "gradcheck"}) {
    CHECK(help.out.find(sub) != std::string::npos);
  }
  const std::map<std::string, std::vector<std::string>> contract = {
      {"synth", {"--out", "--count", "--size", "--seed", "--contrast"}},
      {"train", {"--data", "--config", "--out"}},
      {"predict", {"--checkpoint", "--data", "--out"}},
      {"score", {"--pred", "--gt", "--out"}},
      {"gradcheck", {"--full"}},
  };
  for (const auto& [sub, flags] : contract) {
    const auto r = run({sub, "--help"});
    CHECK(r.code == cli::kOk);
    for (const auto& f : flags) {
      INFO(sub << " " << f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("synth then self-score") {
  TempDir dir;
  const auto data = (dir / "d").string();
  REQUIRE(run({"synth", "--out", data, "--count", "3", "--size", "32", "--seed", "4",
               "--contrast", "0.2"})
              .code == cli::kOk);
  const auto report = (dir / "r.tsv").string();
  const auto r = run({"score", "--pred", data + "/masks", "--gt", data + "/masks", "--out", report});
  CHECK(r.code == cli::kOk);
  const auto rows = tsv_rows(read_bytes(report));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"name", "M", "S", "F", "Fw", "E"});
  for (std::size_t i = 1; i < 5; ++i) {
    CHECK(rows[i][1] == "0.000000");
    CHECK(rows[i][2] == "1.000000");
    CHECK(rows[i][3] == "1.000000");
    CHECK(rows[i][5] == "1.000000");
  }
  CHECK(rows[4][0] == "MEAN");

  // Same flags, same bytes.
  const auto again = (dir / "d2").string();
  run({"synth", "--out", again, "--count", "3", "--size", "32", "--seed", "4", "--contrast", "0.2"});
  CHECK(read_bytes(dir / "d" / "images" / "0002.png") == read_bytes(dir / "d2" / "images" / "0002.png"));

  CHECK(run({"synth", "--out", data, "--size", "50"}).code == cli::kUsage);
}

TEST_CASE("score pairs by case-sensitive stem") {
  TempDir dir;
  const auto data = (dir / "d").string();
  run({"synth", "--out", data, "--count", "2", "--size", "32"});
  std::filesystem::create_directories(dir / "p");
  std::filesystem::copy(dir / "d" / "masks" / "0000.png", dir / "p" / "0000.png");
  std::filesystem::copy(dir / "d" / "masks" / "0001.png", dir / "p" / "0001.PNG");
  std::filesystem::copy(dir / "d" / "masks" / "0001.png", dir / "p" / "extra.png");
  const auto r = run({"score", "--pred", (dir / "p").string(), "--gt", data + "/masks", "--out",
                      (dir / "r.tsv").string()});
  CHECK(r.code == cli::kFailure);
  CHECK(r.err.find("extra") != std::string::npos);
  CHECK(r.err.find("0001") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "r.tsv"));

  CHECK(run({"score", "--pred", (dir / "nope").string(), "--gt", data + "/masks", "--out",
             (dir / "r.tsv").string()})
            .code == cli::kFailure);
}

TEST_CASE("train, predict and score") {
  TempDir dir;
  const auto data = (dir / "d").string();
  run({"synth", "--out", data, "--count", "2", "--size", "32"});
  testing::write_bytes(dir / "cfg.txt",
                       "# tiny\ninput_size = 32\nbatch_size = 2\nepochs = 2\n"
                       "widths = 4, 4, 8, 8, 8\nunified_width = 8\nrefine_width = 8\n"
                       "head_width = 4\nreduction = 2\n");
  const auto run_dir = (dir / "run").string();
  const auto t = run({"train", "--data", data + "/manifest.tsv", "--config",
                      (dir / "cfg.txt").string(), "--out", run_dir});
  REQUIRE(t.code == cli::kOk);
  CHECK(std::filesystem::exists(dir / "run" / "trace.tsv"));
  CHECK(std::filesystem::exists(dir / "run" / "final.c2fk"));

  const auto pred = (dir / "pred").string();
  REQUIRE(run({"predict", "--checkpoint", run_dir + "/final.c2fk", "--data",
               data + "/manifest.tsv", "--out", pred})
              .code == cli::kOk);
  const auto s = run({"score", "--pred", pred, "--gt", data + "/masks", "--out",
                      (dir / "r.tsv").string()});
  CHECK(s.code == cli::kOk);
  CHECK(tsv_rows(read_bytes(dir / "r.tsv")).size() == 4);

  testing::write_bytes(dir / "bad.txt", "learning_rate = 3\n");
  const auto bad = run({"train", "--data", data + "/manifest.tsv", "--config",
                        (dir / "bad.txt").string(), "--out", run_dir});
  CHECK(bad.code == cli::kUsage);
  CHECK(bad.err.find("learning_rate") != std::string::npos);
  CHECK(run({"train", "--data", (dir / "missing.tsv").string(), "--out", run_dir}).code ==
        cli::kFailure);
  testing::write_bytes(dir / "junk.c2fk", "C2FK");
  const auto corrupt = run({"predict", "--checkpoint", (dir / "junk.c2fk").string(), "--data",
                            data + "/manifest.tsv", "--out", pred});
  CHECK(corrupt.code == cli::kFailure);
  CHECK(corrupt.err.find("byte") != std::string::npos);
}

TEST_CASE("gradcheck prints one line per operator") {
  const auto r = run({"gradcheck", "--seeds", "2"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("conv2d") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("all gated checks below 1e-4") != std::string::npos);
}
