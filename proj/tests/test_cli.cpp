// Copyright 2026 The Prosodia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "prosodia/baseline.hpp"
#include "prosodia/cli.hpp"
#include "prosodia/error.hpp"
#include "support.hpp"

using namespace prosodia;
using namespace prosodia::cli;
using nlohmann::json;
using prosodia::test::same_bytes;
using prosodia::test::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "prosodia");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec s = SynthSpec::defaults();
  s.n_train_each = 4;
  s.n_eval = 2;
  s.min_frames = 64;
  s.max_frames = 96;
  s.seed = seed;
  return s;
}

// Tiny but complete setup: synthetic corpus plus a config for it.
struct Workspace {
  TempDir dir;
  fs::path manifest;
  json config;

  explicit Workspace(std::uint64_t seed = 1) {
    manifest = cmd_synth_corpus(small_spec(seed), dir / "corpus");
    config = {{"corpus", manifest.string()},
              {"out_dir", (dir / "out").string()},
              {"pairs", json::array({{{"source", "neutral"}, {"target", "angry"}}})},
              {"split", {{"n_train_each", 4}, {"n_eval", 2}}},
              {"network", {{"base_channels", 4}, {"n_residual", 1}, {"disc_base_channels", 4}}},
              {"schedule", {{"total_iters", 20}, {"segment_frames", 32}}},
              {"seed", seed}};
  }
  RunConfig parsed() const { return parse_run_config(config, dir.path()); }
  fs::path write_config(const std::string& name = "run.json") const {
    std::ofstream(dir / name) << config.dump(2);
    return dir / name;
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth-corpus writes the requested files") {
    TempDir dir;
    const fs::path manifest = cmd_synth_corpus(small_spec(3), dir.path());
    CHECK(fs::exists(manifest));
    CHECK(fs::exists(dir / "synth_spec.json"));
    const Corpus c = load_corpus(manifest);
    for (const auto& [emotion, utts] : c) CHECK(utts.size() == 10);
    CHECK_FALSE(fs::exists(dir / ".in_progress"));
  }

  TEST_CASE("config defaults and overrides") {
    Workspace ws;
    const RunConfig c = ws.parsed();
    CHECK(c.n_train_each == 4);
    CHECK(c.base_channels == 4);
    CHECK(c.schedule.constant_lr_iters == 10);
    CHECK(c.schedule.decay_iters == 10);
    CHECK(c.mode == RunMode::kSeparate);
    CHECK(c.stats_policy == StatsPolicy::kTarget);
    CHECK(c.effective_split_seed() == 1);
    RunConfig p = c;
    apply_paper_scale(p);
    CHECK(p.schedule.total_iters == 400000);
    CHECK(p.weights.id_cutoff_iters == 10000);
    CHECK(p.weights.lambda_cyc == 10.0);
    const RunConfig again = parse_run_config(to_json(c), ws.dir.path());
    CHECK(to_json(again) == to_json(c));
  }

  TEST_CASE("config problems are listed together") {
    Workspace ws;
    ws.config["colour"] = "blue";
    ws.config["schedule"] = {{"total_iters", -3}};
    ws.config["mode"] = "fast";
    ws.config["pairs"] = json::array({{{"source", "angry"}, {"target", "angry"}}});
    try {
      ws.parsed();
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("4 problems") != std::string::npos);
      CHECK(msg.find("colour") != std::string::npos);
      CHECK(msg.find("total_iters") != std::string::npos);
      CHECK(msg.find("fast") != std::string::npos);
      CHECK(msg.find("both 'angry'") != std::string::npos);
    }
  }

  TEST_CASE("missing inputs fail validation") {
    Workspace ws;
    ws.config["corpus"] = (ws.dir / "nowhere.json").string();
    CHECK_THROWS_AS(validate_paths(ws.parsed(), true), ValidationError);
  }

  TEST_CASE("exit codes") {
    Workspace ws;
    CHECK(run_cli({"train", "--config", ws.write_config(), "--mode", "baseline"}) == 0);
    ws.config["bogus"] = 1;
    CHECK(run_cli({"train", "--config", ws.write_config("bad.json")}) == 1);
    CHECK(run_cli({"train", "--config", (ws.dir / "absent.json").string()}) == 1);
    CHECK(run_cli({"no-such-command"}) != 0);

    // Flat pitch has no spread, a numeric failure.
    Corpus flat = load_corpus(ws.manifest);
    CorpusManifest m;
    for (auto& [emotion, utts] : flat) {
      for (auto& u : utts) {
        for (auto& f : u.f0_hz) f = f > 0.0f ? 120.0f : 0.0f;
        const fs::path p = ws.dir / "flat" / emotion / (u.utterance_id + ".uff");
        fs::create_directories(p.parent_path());
        write_feature_file(u, p);
        m.entries.push_back({u.utterance_id, emotion, p});
      }
    }
    write_manifest(m, ws.dir / "flat" / "manifest.json");
    ws.config.erase("bogus");
    ws.config["corpus"] = (ws.dir / "flat" / "manifest.json").string();
    CHECK(run_cli({"train", "--config", ws.write_config("flat.json"), "--mode", "baseline"}) == 2);
  }

  TEST_CASE("preprocess, decompose and reconstruct") {
    Workspace ws;
    cmd_preprocess(ws.manifest, ws.dir / "pre");
    CHECK(fs::exists(ws.dir / "pre" / "summary.json"));

    const Corpus c = load_corpus(ws.manifest);
    const auto& u = c.at("neutral").front();
    const fs::path uff = ws.dir / "corpus" / "neutral" / (u.utterance_id + ".uff");
    cmd_decompose(uff, WaveletParams{}, ws.dir / "dec");
    const fs::path csv = ws.dir / "dec" / (u.utterance_id + ".scalogram.csv");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "frame,scale1,scale2,scale3,scale4,scale5,scale6,scale7,scale8,scale9,scale10");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      CHECK(std::count(line.begin(), line.end(), ',') == 10);
      ++rows;
    }
    CHECK(rows == u.frames());

    cmd_reconstruct(ws.dir / "dec" / (u.utterance_id + ".cwt"), ws.dir / "rec");
    CHECK(fs::exists(ws.dir / "rec" / (u.utterance_id + ".f0.csv")));
    CHECK(run_cli({"decompose", uff.string(), "--out", (ws.dir / "dec2").string()}) == 0);
  }

  TEST_CASE("decomposing an all-unvoiced utterance fails") {
    TempDir dir;
    auto u = test::random_utterance(50, 1);
    for (auto& f : u.f0_hz) f = 0.0f;
    write_feature_file(u, dir / "silent.uff");
    CHECK_THROWS_WITH_AS(cmd_decompose(dir / "silent.uff", WaveletParams{}, dir / "out"),
                         doctest::Contains("no voiced frames"), ValidationError);
    CHECK(run_cli({"decompose", (dir / "silent.uff").string(), "--out", (dir / "out2").string()}) != 0);
  }

  TEST_CASE("train writes the checkpoint contract and is reproducible") {
    Workspace ws;
    ws.config["schedule"]["total_iters"] = 200;
    ws.config["mode"] = "prosody";
    RunConfig c = ws.parsed();
    cmd_train(c);
    const fs::path ckpt = ws.dir / "out" / "neutral-to-angry" / "prosody";
    for (const char* f : {"g_xy.prm", "g_yx.prm", "d_x.prm", "d_y.prm", "model.json", "losslog.csv"}) {
      CHECK(fs::exists(ckpt / f));
    }
    CHECK(read_loss_log(ckpt / "losslog.csv").size() == 200);
    CHECK_FALSE(fs::exists(ws.dir / "out" / ".in_progress"));

    c.out_dir = ws.dir / "again";
    cmd_train(c);
    const fs::path other = ws.dir / "again" / "neutral-to-angry" / "prosody";
    for (const char* f : {"g_xy.prm", "g_yx.prm", "d_x.prm", "d_y.prm", "losslog.csv"}) {
      CHECK(same_bytes(ckpt / f, other / f));
    }
  }

  TEST_CASE("baseline training writes only the LG statistics") {
    Workspace ws;
    ws.config["mode"] = "baseline";
    cmd_train(ws.parsed());
    const fs::path dir = ws.dir / "out" / "neutral-to-angry" / "baseline";
    CHECK(fs::exists(dir / "lg_stats.json"));
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
    CHECK(n == 1);
  }

  TEST_CASE("convert in every mode") {
    Workspace ws;
    RunConfig c = ws.parsed();
    for (RunMode m : {RunMode::kSpectrum, RunMode::kProsody, RunMode::kJoint, RunMode::kBaseline}) {
      c.mode = m;
      cmd_train(c);
    }
    const fs::path root = ws.dir / "out" / "neutral-to-angry";
    c.checkpoints = {{"spectrum", root / "spectrum"}, {"prosody", root / "prosody"}, {"joint", root / "joint"},
                     {"baseline", root / "baseline"}};
    const Corpus corpus = load_corpus(ws.manifest);
    std::vector<fs::path> inputs;
    for (const auto& u : corpus.at("neutral")) inputs.push_back(ws.dir / "corpus" / "neutral" / (u.utterance_id + ".uff"));

    SUBCASE("separate keeps voicing") {
      cmd_convert(c, RunMode::kSeparate, inputs, ws.dir / "conv");
      for (const auto& u : corpus.at("neutral")) {
        const auto out = read_feature_file(ws.dir / "conv" / (u.utterance_id + ".uff"));
        CHECK(out.frames() == u.frames());
        CHECK(out.frame_period_ms == u.frame_period_ms);
        CHECK(out.emotion_label == "angry");
        for (std::size_t t = 0; t < u.frames(); ++t) CHECK((out.f0_hz[t] > 0.0f) == (u.f0_hz[t] > 0.0f));
      }
    }
    SUBCASE("joint and inverse") {
      cmd_convert(c, RunMode::kJoint, inputs, ws.dir / "conv");
      cmd_convert(c, RunMode::kJoint, inputs, ws.dir / "inv", true);
      CHECK(read_feature_file(ws.dir / "inv" / (corpus.at("neutral").front().utterance_id + ".uff")).emotion_label ==
            "neutral");
    }
    SUBCASE("baseline matches target log statistics") {
      // The utterances the source statistics were fitted on.
      const auto split = make_nonparallel_split(corpus, "neutral", "angry", 4, 2, c.effective_split_seed());
      std::vector<fs::path> train_inputs;
      for (const auto& u : split.source_set) train_inputs.push_back(ws.dir / "corpus" / "neutral" / (u.utterance_id + ".uff"));
      c.checkpoints.erase("spectrum");
      cmd_convert(c, RunMode::kBaseline, train_inputs, ws.dir / "conv");
      std::vector<UtteranceFeatures> outs;
      for (const auto& u : split.source_set) {
        const auto out = read_feature_file(ws.dir / "conv" / (u.utterance_id + ".uff"));
        CHECK(out.mceps == u.mceps);
        outs.push_back(out);
      }
      const json stats = json::parse(slurp(root / "baseline" / "lg_stats.json"));
      const LgStats target = stats.at("target").get<LgStats>();
      const LgStats got = lg_fit(outs);
      CHECK(std::abs(got.mean_log_f0 - target.mean_log_f0) <= 0.02 * std::abs(target.mean_log_f0));
      CHECK(std::abs(got.std_log_f0 - target.std_log_f0) <= 0.02 * target.std_log_f0);
    }
    SUBCASE("mode mismatch") {
      c.checkpoints["prosody"] = root / "joint";
      CHECK_THROWS_WITH_AS(cmd_convert(c, RunMode::kSeparate, inputs, ws.dir / "conv"),
                           doctest::Contains("mode mismatch"), ValidationError);
    }
    SUBCASE("missing checkpoint") {
      c.checkpoints.erase("prosody");
      CHECK_THROWS_AS(cmd_convert(c, RunMode::kSeparate, inputs, ws.dir / "conv"), ValidationError);
    }
  }

  TEST_CASE("evaluate") {
    Workspace ws;
    const fs::path ref = ws.dir / "corpus" / "angry";
    const EvalReport same = cmd_evaluate(ref, ref, Alignment::kNone, ws.dir / "self.csv");
    CHECK(same.mean_mcd == 0.0);
    CHECK(same.mean_rmse == 0.0);
    CHECK(same.mean_pcc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fs::exists(ws.dir / "self.csv"));

    fs::create_directories(ws.dir / "lonely");
    auto u = test::random_utterance(40, 1, "zzz");
    write_feature_file(u, ws.dir / "lonely" / "zzz.uff");
    CHECK_THROWS_AS(cmd_evaluate(ws.dir / "lonely", ref, Alignment::kNone, ws.dir / "x.csv"), ValidationError);
  }

  TEST_CASE("compare fills every cell and reruns identically") {
    Workspace ws;
    RunConfig c = ws.parsed();
    const auto cells = cmd_compare(c);
    CHECK(cells.size() == 3);
    for (const auto& cell : cells) {
      REQUIRE(cell.report.has_value());
      CHECK(std::isfinite(cell.report->mean_mcd));
      CHECK(std::isfinite(cell.report->mean_rmse));
      CHECK(std::isfinite(cell.report->mean_pcc));
    }
    const std::string first = slurp(ws.dir / "out" / "compare.csv");
    CHECK(first.rfind("pair,system,mcd_db,rmse_hz,pcc\n", 0) == 0);
    CHECK(first.find("FAILED") == std::string::npos);
    CHECK(fs::exists(ws.dir / "out" / "compare.txt"));
    c.out_dir = ws.dir / "out2";
    cmd_compare(c);
    CHECK(slurp(ws.dir / "out2" / "compare.csv") == first);
  }
}
