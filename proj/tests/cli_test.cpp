// Copyright 2026 The streamkv Authors.
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
//
// End-to-end tests of the command-line tool: file outputs and exit codes.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("streamkv_cli_" + std::string(::testing::UnitTest::GetInstance()
                                              ->current_test_info()
                                              ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd =
        std::string(STREAMKV_CLI) + " " + args + " >" + path("stdout") + " 2>" + path("stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void make_trace(const std::string& name, const std::string& extra = "") const {
    ASSERT_EQ(run("gen --kind roomrevisit --frames 450 --heads 2 --head-dim 16 --layers 3 "
                  "--payload-bytes 16 --seed 5 --out " + path(name) + " " + extra),
              0)
        << slurp(path("stderr"));
  }

  fs::path dir_;
};

TEST_F(Cli, GenIsDeterministic) {
  make_trace("a.jsonl");
  make_trace("b.jsonl");
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  ASSERT_EQ(run("stats --trace " + path("a.jsonl")), 0);
  EXPECT_NE(slurp(path("stdout")).find("roomrevisit,450,2,16"), std::string::npos);
}

TEST_F(Cli, ReplayWritesLogsAndCsvs) {
  make_trace("t.jsonl");
  ASSERT_EQ(run("replay --trace " + path("t.jsonl") + " --strategy segment --budget 32 " +
                "--compress-interval 100 --out " + path("run.jsonl") + " --metrics " +
                path("m.csv") + " --timeline " + path("tl.csv") + " --occupancy " +
                path("occ.csv")),
            0)
      << slurp(path("stderr"));
  const auto log = slurp(path("run.jsonl"));
  EXPECT_EQ(log.rfind("{\"type\":\"run\"", 0), 0u);
  EXPECT_NE(log.find("\"type\":\"compression\""), std::string::npos);
  EXPECT_NE(log.find("\"budget\":32"), std::string::npos);
  const auto metrics = slurp(path("m.csv"));
  EXPECT_EQ(metrics.rfind("policy,scoring,frames,", 0), 0u);
  EXPECT_NE(metrics.find("\nsegment,dot,450,"), std::string::npos);
  EXPECT_EQ(slurp(path("tl.csv")).rfind("frame_id,history_live,", 0), 0u);
  EXPECT_EQ(slurp(path("occ.csv")).rfind("ix,iy,iz,d_bin,count\n", 0), 0u);

  // stats recomputes the stored metrics exactly from the files alone
  ASSERT_EQ(run("stats --trace " + path("t.jsonl") + " --run " + path("run.jsonl") + " --out " +
                path("m2.csv")),
            0);
  EXPECT_EQ(slurp(path("m2.csv")), metrics);
}

TEST_F(Cli, ReplayIsByteIdentical) {
  make_trace("t.jsonl");
  for (const char* tag : {"1", "2"})
    ASSERT_EQ(run("replay --trace " + path("t.jsonl") + " --strategy prob --seed 3 --out " +
                  path(std::string("r") + tag) + " --metrics " + path(std::string("m") + tag)),
              0);
  EXPECT_EQ(slurp(path("r1")), slurp(path("r2")));
  EXPECT_EQ(slurp(path("m1")), slurp(path("m2")));
}

TEST_F(Cli, CompareSixPolicies) {
  make_trace("t.jsonl");
  std::string runs;
  for (const char* s : {"segment", "topk", "random", "uniform", "window", "prob"}) {
    ASSERT_EQ(run("replay --trace " + path("t.jsonl") + " --strategy " + s + " --scoring cosine" +
                  " --out " + path(std::string(s) + ".jsonl")),
              0);
    runs += " " + path(std::string(s) + ".jsonl");
  }
  ASSERT_EQ(run("compare --trace " + path("t.jsonl") + runs + " --out " + path("cmp.csv")), 0);
  std::istringstream in(slurp(path("cmp.csv")));
  int rows = 0;
  for (std::string l; std::getline(in, l);) ++rows;
  EXPECT_EQ(rows, 7);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("replay"), 1);  // --trace is required
  make_trace("t.jsonl");
  EXPECT_EQ(run("replay --trace " + path("t.jsonl") + " --strategy greedy"), 1);
  EXPECT_EQ(run("replay --trace " + path("t.jsonl") + " --scoring l1"), 1);
  EXPECT_EQ(run("replay --trace " + path("t.jsonl") + " --budget 0"), 1);
  EXPECT_EQ(run("replay --trace " + path("t.jsonl") + " --deletion-ratio 1.5"), 1);
  EXPECT_EQ(run("replay --trace " + path("t.jsonl") + " --budget abc"), 1);
  EXPECT_EQ(run("gen --kind spiral"), 1);
  EXPECT_EQ(run("gen --extent 1 0 1"), 1);
}

TEST_F(Cli, MalformedInputExitsTwo) {
  EXPECT_EQ(run("replay --trace " + path("missing.jsonl")), 2);
  make_trace("t.jsonl");
  auto text = slurp(path("t.jsonl"));
  text.insert(text.find('\n') + 1, "{broken\n");
  std::ofstream(path("bad.jsonl")) << text;
  EXPECT_EQ(run("replay --trace " + path("bad.jsonl")), 2);
  EXPECT_NE(slurp(path("stderr")).find("line 2"), std::string::npos);

  // run logs from a different trace are refused
  make_trace("other.jsonl", "--noise 0.02");
  ASSERT_EQ(run("replay --trace " + path("other.jsonl") + " --out " + path("o.jsonl")), 0);
  EXPECT_EQ(run("compare --trace " + path("t.jsonl") + " " + path("o.jsonl")), 2);
  EXPECT_EQ(run("stats --trace " + path("t.jsonl") + " --run " + path("o.jsonl")), 2);

  // an unwritable output path
  EXPECT_EQ(run("gen --frames 5 --out " + path("no/such/dir/t.jsonl")), 2);
}

}  // namespace
