// SPDX-License-Identifier: Apache-2.0
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "vpiqa/backend.hpp"
#include "vpiqa/checkpoint.hpp"
#include "vpiqa/cli.hpp"
#include "vpiqa/io.hpp"
#include "vpiqa/train.hpp"

using namespace vpiqa;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// One dataset and one short training run shared by every case.
struct World {
  fs::path root;
  fs::path ini;
  fs::path run;
  World() {
    root = fs::temp_directory_path() / ("vpiqa_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    ::setenv("VPIQA_RUN_ROOT", root.c_str(), 1);
    REQUIRE(cli({"make-toy-dataset", (root / "ds").string(), "--count", "40"}).code == 0);
    ini = root / "ds" / "toy.ini";
    run = root / "runs" / "synthetic_blur";
    const auto r = cli({"train", ini.string(), "--train.epochs", "3"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    trained_output = r.out;
  }
  ~World() {
    ::unsetenv("VPIQA_RUN_ROOT");
    fs::remove_all(root);
  }
  std::string trained_output;
};

World& world() {
  static World w;
  return w;
}

}  // namespace

TEST_CASE("train writes the run directory and echoes its configuration") {
  auto& w = world();
  CHECK(w.trained_output.find("[train]") != std::string::npos);
  CHECK(w.trained_output.find("positive tokens: good=0 fine=1") != std::string::npos);
  CHECK(w.trained_output.find("negative tokens: poor=2 bad=3") != std::string::npos);
  CHECK(w.trained_output.find("epoch 3") != std::string::npos);
  CHECK(w.trained_output.find("# test split") != std::string::npos);
  for (const char* f : {"config.snapshot", "history.csv", "best.vpq", "last.vpq", "split_train.csv", "split_val.csv",
                        "split_test.csv", "test_report.csv", "test_report.json", "test_predictions.csv"})
    CHECK_MESSAGE(fs::exists(w.run / f), f);
  CHECK(parse_history_csv(read_file_text(w.run / "history.csv")).epochs.size() == 3);
}

TEST_CASE("the echoed snapshot reproduces the run") {
  auto& w = world();
  const auto r = cli({"train", (w.run / "config.snapshot").string(), "--output.dir", (w.root / "again").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_file_text(w.root / "again" / "history.csv") == read_file_text(w.run / "history.csv"));
  CHECK(read_file_bytes(w.root / "again" / "best.vpq") == read_file_bytes(w.run / "best.vpq"));
}

TEST_CASE("lr 0 gives a constant loss history") {
  auto& w = world();
  const auto r = cli({"train", w.ini.string(), "--train.lr", "0", "--train.epochs=3", "--output.dir", "lr0"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto h = parse_history_csv(read_file_text(w.root / "lr0" / "history.csv"));
  REQUIRE(h.epochs.size() == 3);
  for (const auto& e : h.epochs) {
    CHECK(e.train_mse == doctest::Approx(h.epochs[0].train_mse).epsilon(1e-15));
    CHECK(e.val_mse == h.epochs[0].val_mse);
  }
  const auto p = load_checkpoint(w.root / "lr0" / "last.vpq");
  for (double v : p.raw_params()) REQUIRE(v == 0.0);
}

TEST_CASE("configuration errors exit 2 and name their keys") {
  auto& w = world();
  auto r = cli({"train", w.ini.string(), "--data.manifest", "nowhere.csv"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("data.manifest") != std::string::npos);

  r = cli({"train", w.ini.string(), "--data.manifest", "nowhere.csv", "--train.batch_size", "0"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("2 problems") != std::string::npos);
  CHECK(r.err.find("train.batch_size") != std::string::npos);

  CHECK(cli({"train", (w.root / "missing.ini").string()}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"train", w.ini.string(), "--train.lr"}).code == kExitConfig);
}

TEST_CASE("evaluate") {
  auto& w = world();
  const auto ckpt = (w.run / "best.vpq").string();
  const auto a = cli({"evaluate", w.ini.string(), ckpt, "--out", (w.root / "e1").string()});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const auto b = cli({"evaluate", w.ini.string(), ckpt, "--out", (w.root / "e2").string()});
  CHECK(a.out == b.out);
  for (const char* f : {"eval_test_report.csv", "eval_test_report.json", "eval_test_predictions.csv"})
    CHECK(read_file_text(w.root / "e1" / f) == read_file_text(w.root / "e2" / f));
  // the test split report written by train scores the same checkpoint
  CHECK(read_file_text(w.root / "e1" / "eval_test_predictions.csv") ==
        read_file_text(w.run / "test_predictions.csv"));

  const auto j = cli({"evaluate", w.ini.string(), ckpt, "--json", "--eval.split", "val", "--out",
                      (w.root / "e3").string()});
  REQUIRE(j.code == 0);
  const auto parsed = nlohmann::json::parse(j.out);
  CHECK(parsed["n"] == 4);
  CHECK(parsed["backend"] == "toy");
  CHECK(fs::exists(w.root / "e3" / "eval_val_report.csv"));

  // zero prompt equals the bare scorer
  save_checkpoint(create_prompt(PromptShape::full_overlay(32, 32)), w.root / "zero.vpq");
  const auto z = cli({"evaluate", w.ini.string(), (w.root / "zero.vpq").string(), "--json", "--out",
                      (w.root / "ez").string()});
  REQUIRE(z.code == 0);
  CHECK(nlohmann::json::parse(z.out)["checkpoint"] == "zero.vpq");
}

TEST_CASE("evaluate rejects bad checkpoints") {
  auto& w = world();
  auto bytes = read_file_bytes(w.run / "best.vpq");
  bytes[1] = 'X';
  write_file_atomic(w.root / "corrupt.vpq", bytes);
  const auto r = cli({"evaluate", w.ini.string(), (w.root / "corrupt.vpq").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("bad checkpoint header") != std::string::npos);

  save_checkpoint(create_prompt(PromptShape::full_overlay(16, 16)), w.root / "small.vpq");
  const auto m = cli({"evaluate", w.ini.string(), (w.root / "small.vpq").string()});
  CHECK(m.code == kExitConfig);
  CHECK(m.err.find("16") != std::string::npos);
}

TEST_CASE("export-prompt") {
  auto& w = world();
  save_checkpoint(create_prompt(PromptShape::full_overlay(32, 32)), w.root / "zero.vpq");
  REQUIRE(cli({"export-prompt", (w.root / "zero.vpq").string(), (w.root / "zero.png").string()}).code == 0);
  const auto zero = decode_image_file(w.root / "zero.png");
  CHECK(zero.height == 32);
  for (auto v : zero.rgb) REQUIRE(v == 128);

  const auto shape = PromptShape::padding(3, 32, 32);
  save_checkpoint(VisualPrompt(shape, std::vector<double>(param_count(shape), 1.0)), w.root / "pad.vpq");
  REQUIRE(cli({"export-prompt", (w.root / "pad.vpq").string(), (w.root / "pad.png").string(), "--scale", "2"})
              .code == 0);
  const auto pad = decode_image_file(w.root / "pad.png");
  REQUIRE(pad.width == 64);
  // measure the ring width along the middle row
  const int mid = 32;
  int ring = 0;
  while (pad.rgb[(static_cast<std::size_t>(mid) * 64 + ring) * 3] != 128) ++ring;
  CHECK(ring == 6);
  for (int c = 6; c < 58; ++c) CHECK(pad.rgb[(static_cast<std::size_t>(mid) * 64 + c) * 3] == 128);
  CHECK(pad.rgb[0] > 200);

  CHECK(cli({"export-prompt", (w.root / "pad.vpq").string(), (w.root / "no" / "dir" / "x.png").string()}).code != 0);
}

TEST_CASE("inspect") {
  auto& w = world();
  const auto r = cli({"inspect", (w.run / "best.vpq").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("full_overlay") != std::string::npos);
  CHECK(r.out.find("3072") != std::string::npos);
  CHECK(r.out.find(load_checkpoint(w.run / "best.vpq").id()) != std::string::npos);
  CHECK(cli({"inspect", (w.root / "nothing.vpq").string()}).code != 0);
}
