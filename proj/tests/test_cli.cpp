// SPDX-License-Identifier: Apache-2.0
//
// evcsi: eigenvector CSI feedback with a Transformer autoencoder
// Copyright (C) 2026 The evcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "evcsi/channelgen.hpp"
#include "evcsi/cli.hpp"
#include "evcsi/config.hpp"
#include "support.hpp"

using namespace evcsi;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "evcsi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTinyRun =
    "seed = 3\nsplit_seed = 4\nepochs = 2\nbatch_size = 16\nwarmup_epochs = 1\n"
    "n_e = 8\nn_b = 1\nn_head = 2\nbits_total = 16\n";

}  // namespace

TEST_CASE("gen is reproducible and self-describing") {
  evcsi::testing::TempDir dir("cli_gen");
  const auto a = dir / "a.evcs", b = dir / "b.evcs", c = dir / "c.evcs";
  REQUIRE(run({"gen", "--out", a.string(), "--samples", "20", "--seed", "5"}).code == 0);
  REQUIRE(run({"gen", "--out", b.string(), "--samples", "20", "--seed", "5"}).code == 0);
  REQUIRE(run({"gen", "--out", c.string(), "--samples", "20", "--seed", "6"}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
  std::ifstream is(a, std::ios::binary);
  const DatasetHeader h = read_dataset_header(is);
  CHECK(h.n_samples == 20);
  CHECK(h.n_tx == 8);
  CHECK(h.n_subband == 12);
  CHECK(std::filesystem::exists(manifest_path(a)));
  const auto m = KeyValueConfig::load(manifest_path(a));
  CHECK(m.get("command") == "gen");

  const auto f = dir / "f.evcs";
  REQUIRE(run({"gen", "--out", f.string(), "--samples", "4", "--profile", "flat", "--n-tx", "4"}).code == 0);
  for (const auto& s : load_dataset(f)) {
    CHECK(s.n_tx() == 4);
    for (int k = 1; k < s.n_subband(); ++k) CHECK((s.w.col(k) - s.w.col(0)).norm() < 1e-6);
  }
  CHECK(run({"gen", "--out", (dir / "x.evcs").string(), "--profile", "rainy"}).code == kExitConfig);
}

TEST_CASE("exit codes") {
  evcsi::testing::TempDir dir("cli_codes");
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"--version"}).code == kExitOk);
  CHECK(run({"train"}).code == kExitConfig);
  CHECK(run({"frobnicate"}).code == kExitConfig);
  CHECK(run({"eval", "--data", (dir / "none.evcs").string(), "--weights", (dir / "none.evcw").string()}).code ==
        kExitIo);

  const auto data = dir / "d.evcs";
  REQUIRE(run({"gen", "--out", data.string(), "--samples", "8"}).code == 0);
  write_text(dir / "bad.cfg", std::string(kTinyRun) + "colour = red\n");
  const CliRun bad = run({"train", "--data", data.string(), "--config", (dir / "bad.cfg").string(), "--out",
                          (dir / "w.evcw").string()});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("colour") != std::string::npos);
  write_text(dir / "noseed.cfg", "epochs = 1\n");
  CHECK(run({"train", "--data", data.string(), "--config", (dir / "noseed.cfg").string(), "--out",
             (dir / "w.evcw").string()})
            .code == kExitConfig);
  write_text(dir / "wide.cfg", std::string(kTinyRun) + "n_tx = 4\n");
  CHECK(run({"train", "--data", data.string(), "--config", (dir / "wide.cfg").string(), "--out",
             (dir / "w.evcw").string()})
            .code == kExitDimension);
}

TEST_CASE("train then eval reproduces the logged validation score") {
  evcsi::testing::TempDir dir("cli_train");
  const auto data = dir / "d.evcs";
  REQUIRE(run({"gen", "--out", data.string(), "--samples", "40", "--seed", "2"}).code == 0);
  write_text(dir / "run.cfg", kTinyRun);
  const auto w = dir / "w.evcw";
  const CliRun t = run({"train", "--data", data.string(), "--config", (dir / "run.cfg").string(), "--out",
                        w.string(), "--quiet"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("final val_sgcs") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "w.evcw.log.csv"));
  CHECK(std::filesystem::exists(manifest_path(w)));
  CHECK(std::filesystem::exists(manifest_path(dir / "w.evcw.log.csv")));
  const auto manifest = KeyValueConfig::load(manifest_path(w));
  CHECK(manifest.get("seed.train") == "3");
  CHECK(manifest.get("config.n_e") == "8");

  const LoadedModel lm = load_model(w);
  const double logged = lm.sidecar.get_double("final_val_sgcs");
  const auto report = dir / "eval.csv";
  const CliRun e = run({"eval", "--data", data.string(), "--weights", w.string(), "--out", report.string()});
  REQUIRE(e.code == 0);
  std::istringstream lines(e.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "method,sgcs,mse,nmse_db,n_samples");
  CHECK(row.rfind("evcsinet-t(M=16),", 0) == 0);
  const double got = std::stod(row.substr(row.find(',') + 1));
  CHECK(std::abs(got - logged) < 1e-9);
  CHECK(slurp(report) == e.out);
  CHECK(run({"eval", "--data", data.string(), "--weights", w.string(), "--split", "sideways"}).code == kExitConfig);
}

TEST_CASE("baseline and ensemble reports") {
  evcsi::testing::TempDir dir("cli_base");
  const auto data = dir / "d.evcs";
  REQUIRE(run({"gen", "--out", data.string(), "--samples", "10"}).code == 0);
  const CliRun b = run({"baseline", "--data", data.string(), "--oversample", "1"});
  REQUIRE(b.code == 0);
  CHECK(b.out.find("dft-grid(O=1),36,") != std::string::npos);

  ModelConfig c;
  c.n_e = 8;
  c.n_b = 1;
  c.n_head = 2;
  c.bits_total = 16;
  save_model(dir / "m0.evcw", init_model(c, 1), c);
  save_model(dir / "m1.evcw", init_model(c, 2), c);
  write_text(dir / "ens.cfg", "bits_total = 17\nmember = m0.evcw\nmember = m1.evcw\n");
  const CliRun e = run({"ensemble", "--manifest", (dir / "ens.cfg").string(), "--data", data.string()});
  REQUIRE(e.code == 0);
  CHECK(e.out.find("ensemble(V=2),17,") != std::string::npos);
  CHECK(e.out.find("member1,16,") != std::string::npos);
}

TEST_CASE("count") {
  const CliRun d = run({"count"});
  REQUIRE(d.code == 0);
  CHECK(d.out.rfind("component,params,flops\n", 0) == 0);
  const CliRun p = run({"count", "--published"});
  REQUIRE(p.code == 0);
  CHECK(p.out.find("32,encoder,params,21165584,") != std::string::npos);
  CHECK(p.out.find("spread over M:") != std::string::npos);
}
