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

#include <fmt/format.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "prosodia/binary_io.hpp"
#include "prosodia/error.hpp"
#include "prosodia/feature_io.hpp"
#include "support.hpp"

using namespace prosodia;
using prosodia::test::random_utterance;
using prosodia::test::TempDir;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) { return binary::read_file(p); }

void write_corpus(const TempDir& dir, const std::vector<std::string>& emotions, std::size_t per_emotion) {
  CorpusManifest m;
  for (const auto& e : emotions) {
    for (std::size_t k = 0; k < per_emotion; ++k) {
      const std::string id = fmt::format("u{:03}", k + 1);
      const auto rel = std::filesystem::path(e) / (id + ".uff");
      std::filesystem::create_directories(dir.path() / e);
      write_feature_file(random_utterance(4, k * 7 + e.size(), id, e), dir.path() / rel);
      m.entries.push_back({id, e, rel});
    }
  }
  write_manifest(m, dir / "manifest.json");
}

}  // namespace

TEST_SUITE("feature-io") {
  TEST_CASE("one-frame utterance round-trips") {
    TempDir dir;
    UtteranceFeatures u;
    u.utterance_id = "one";
    u.emotion_label = "neutral";
    u.mceps.assign(kMcepDim, 0.0f);
    u.f0_hz = {100.0f};
    write_feature_file(u, dir / "a.uff");
    CHECK(read_feature_file(dir / "a.uff") == u);
  }

  TEST_CASE("90-frame utterance round-trips bitwise") {
    TempDir dir;
    const auto u = random_utterance(90, 42);
    write_feature_file(u, dir / "a.uff");
    const auto back = read_feature_file(dir / "a.uff");
    CHECK(back == u);
    write_feature_file(back, dir / "b.uff");
    CHECK(slurp(dir / "a.uff") == slurp(dir / "b.uff"));
  }

  TEST_CASE("file layout matches the documented header") {
    TempDir dir;
    const auto u = random_utterance(3, 1, "ab", "xyz");
    write_feature_file(u, dir / "a.uff");
    const auto bytes = slurp(dir / "a.uff");
    const std::size_t header = 4 + 4 + 4 + 4 + 8 + 2 + 3 + 2 + 2;
    REQUIRE(bytes.size() == header + (3 * kMcepDim + 3) * 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UFF1");
    binary::Reader r(bytes, "mem");
    r.get_bytes(4);
    CHECK(r.get<std::uint32_t>() == 1);
    CHECK(r.get<std::uint32_t>() == 3);
    CHECK(r.get<std::uint32_t>() == kMcepDim);
    CHECK(r.get<double>() == 5.0);
    CHECK(r.get_string16() == "xyz");
    CHECK(r.get_string16() == "ab");
    CHECK(r.get<float>() == u.mceps[0]);
  }

  TEST_CASE("frame count mismatch is rejected before writing") {
    TempDir dir;
    auto u = random_utterance(10, 3);
    u.f0_hz.pop_back();
    CHECK_THROWS_AS(write_feature_file(u, dir / "bad.uff"), ValidationError);
    CHECK_FALSE(std::filesystem::exists(dir / "bad.uff"));
  }

  TEST_CASE("invariant violations") {
    auto u = random_utterance(5, 3);
    SUBCASE("negative f0") { u.f0_hz[1] = -1.0f; }
    SUBCASE("non-finite mcep") { u.mceps[7] = std::numeric_limits<float>::quiet_NaN(); }
    SUBCASE("infinite f0") { u.f0_hz[0] = std::numeric_limits<float>::infinity(); }
    SUBCASE("zero frame period") { u.frame_period_ms = 0.0; }
    SUBCASE("no frames") {
      u.f0_hz.clear();
      u.mceps.clear();
    }
    CHECK_THROWS_AS(validate(u), ValidationError);
  }

  TEST_CASE("100-frame file reads back with N = 100") {
    TempDir dir;
    write_feature_file(random_utterance(100, 9), dir / "a.uff");
    CHECK(read_feature_file(dir / "a.uff").frames() == 100);
  }

  TEST_CASE("bad magic names the expected magic") {
    TempDir dir;
    write_feature_file(random_utterance(4, 1), dir / "a.uff");
    auto bytes = slurp(dir / "a.uff");
    std::copy_n("XXXX", 4, bytes.begin());
    binary::write_file(dir / "a.uff", bytes);
    try {
      read_feature_file(dir / "a.uff");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("expected magic \"UFF1\"") != std::string::npos);
    }
  }

  TEST_CASE("truncated payload reports expected and actual bytes") {
    TempDir dir;
    write_feature_file(random_utterance(4, 1), dir / "a.uff");
    auto bytes = slurp(dir / "a.uff");
    bytes.resize(bytes.size() - 10);
    binary::write_file(dir / "a.uff", bytes);
    try {
      read_feature_file(dir / "a.uff");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("expected 400 bytes") != std::string::npos);
      CHECK(msg.find("found 390") != std::string::npos);
    }
  }

  TEST_CASE("wrong version and dimension") {
    TempDir dir;
    write_feature_file(random_utterance(2, 1), dir / "a.uff");
    auto bytes = slurp(dir / "a.uff");
    SUBCASE("version") {
      bytes[4] = 2;
      binary::write_file(dir / "a.uff", bytes);
      CHECK_THROWS_AS(read_feature_file(dir / "a.uff"), FormatError);
    }
    SUBCASE("mcep dim") {
      bytes[12] = 25;
      binary::write_file(dir / "a.uff", bytes);
      CHECK_THROWS_AS(read_feature_file(dir / "a.uff"), ValidationError);
    }
  }

  TEST_CASE("non-finite payload is a validation error") {
    TempDir dir;
    write_feature_file(random_utterance(2, 1), dir / "a.uff");
    auto bytes = slurp(dir / "a.uff");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
    binary::write_file(dir / "a.uff", bytes);
    CHECK_THROWS_AS(read_feature_file(dir / "a.uff"), ValidationError);
  }

  TEST_CASE("missing file is an I/O error") {
    TempDir dir;
    CHECK_THROWS_AS(read_feature_file(dir / "nope.uff"), IoError);
  }

  TEST_CASE("corpus of 90 + 90 loads grouped and sorted") {
    TempDir dir;
    write_corpus(dir, {"neutral", "angry"}, 90);
    const Corpus c = load_corpus(dir / "manifest.json");
    REQUIRE(c.size() == 2);
    CHECK(c.at("neutral").size() == 90);
    CHECK(c.at("angry").size() == 90);
    CHECK(std::is_sorted(c.at("angry").begin(), c.at("angry").end(),
                         [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; }));
  }

  TEST_CASE("empty manifest gives an empty corpus") {
    TempDir dir;
    write_manifest({}, dir / "manifest.json");
    CHECK(load_corpus(dir / "manifest.json").empty());
  }

  TEST_CASE("duplicate utterance id is rejected") {
    TempDir dir;
    write_feature_file(random_utterance(2, 1, "u1"), dir / "a.uff");
    CorpusManifest m;
    m.entries = {{"u1", "neutral", "a.uff"}, {"u1", "neutral", "a.uff"}};
    write_manifest(m, dir / "manifest.json");
    CHECK_THROWS_AS(load_corpus(dir / "manifest.json"), ValidationError);
  }

  TEST_CASE("missing files are all listed") {
    TempDir dir;
    CorpusManifest m;
    m.entries = {{"u1", "neutral", "gone1.uff"}, {"u2", "neutral", "gone2.uff"}};
    write_manifest(m, dir / "manifest.json");
    try {
      load_corpus(dir / "manifest.json");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("gone1.uff") != std::string::npos);
      CHECK(msg.find("gone2.uff") != std::string::npos);
    }
  }

  TEST_CASE("malformed manifest") {
    TempDir dir;
    std::ofstream(dir / "manifest.json") << "{\"id\": 3}";
    CHECK_THROWS_AS(load_corpus(dir / "manifest.json"), FormatError);
  }

  TEST_CASE("full-size split needs 100 sentences") {
    TempDir dir;
    write_corpus(dir, {"neutral", "angry"}, 90);
    const Corpus small = load_corpus(dir / "manifest.json");
    try {
      make_nonparallel_split(small, "neutral", "angry", 45, 10, 0);
      FAIL("expected sizing error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("100") != std::string::npos);
      CHECK(msg.find("90") != std::string::npos);
    }

    TempDir big_dir;
    write_corpus(big_dir, {"neutral", "angry"}, 100);
    const auto split = make_nonparallel_split(load_corpus(big_dir / "manifest.json"), "neutral", "angry", 45, 10, 0);
    REQUIRE(split.source_set.size() == 45);
    REQUIRE(split.target_set.size() == 45);
    REQUIRE(split.eval_pairs.size() == 10);
    CHECK(split.source_set.front().utterance_id == "u001");
    CHECK(split.source_set.back().utterance_id == "u045");
    CHECK(split.target_set.front().utterance_id == "u046");
    CHECK(split.target_set.back().utterance_id == "u090");
    CHECK(split.eval_pairs.front().first.utterance_id == "u091");
    for (const auto& u : split.source_set) CHECK(u.emotion_label == "neutral");
    for (const auto& u : split.target_set) CHECK(u.emotion_label == "angry");
    for (const auto& [s, t] : split.eval_pairs) {
      CHECK(s.utterance_id == t.utterance_id);
      CHECK(s.emotion_label == "neutral");
      CHECK(t.emotion_label == "angry");
    }
  }

  TEST_CASE("minimal split and disjointness under shuffling") {
    TempDir dir;
    write_corpus(dir, {"a", "b"}, 2);
    const auto tiny = make_nonparallel_split(load_corpus(dir / "manifest.json"), "a", "b", 1, 0, 0);
    CHECK(tiny.source_set.size() == 1);
    CHECK(tiny.target_set.size() == 1);
    CHECK(tiny.source_set[0].utterance_id != tiny.target_set[0].utterance_id);

    TempDir big;
    write_corpus(big, {"a", "b"}, 30);
    const Corpus c = load_corpus(big / "manifest.json");
    for (std::uint64_t seed : {1u, 2u, 99u}) {
      const auto s = make_nonparallel_split(c, "a", "b", 10, 5, seed);
      std::set<std::string> ids;
      for (const auto& u : s.source_set) ids.insert(u.utterance_id);
      for (const auto& u : s.target_set) ids.insert(u.utterance_id);
      for (const auto& p : s.eval_pairs) ids.insert(p.first.utterance_id);
      CHECK(ids.size() == 25);
      const auto again = make_nonparallel_split(c, "a", "b", 10, 5, seed);
      CHECK(again.source_set == s.source_set);
      CHECK(again.target_set == s.target_set);
    }
    CHECK(make_nonparallel_split(c, "a", "b", 10, 5, 1).source_set !=
          make_nonparallel_split(c, "a", "b", 10, 5, 2).source_set);
  }

  TEST_CASE("degenerate split requests") {
    TempDir dir;
    write_corpus(dir, {"a", "b"}, 4);
    const Corpus c = load_corpus(dir / "manifest.json");
    CHECK_THROWS_AS(make_nonparallel_split(c, "a", "a", 1, 0, 0), ValidationError);
    CHECK_THROWS_AS(make_nonparallel_split(c, "a", "zzz", 1, 0, 0), ValidationError);
    CHECK_THROWS_AS(make_nonparallel_split(c, "a", "b", 0, 0, 0), ValidationError);
  }
}
