/*
 * Copyright 2026 The DFFRec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "dffrec/cli.hpp"
#include "dffrec/config.hpp"
#include "test_util.hpp"

namespace dffrec::testing {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dffrec");
  std::ostringstream out, err;
  CliRun run;
  run.code = RunCli(args, out, err);
  run.out = out.str();
  run.err = err.str();
  return run;
}

// A tiny synthetic dataset plus a run config that trains in well under a
// second.
struct SmallProject {
  TempDir dir;
  std::string spec = (dir / "spec.txt").string();
  std::string store = (dir / "items.dffs").string();
  std::string log = (dir / "log.tsv").string();
  std::string captions = (dir / "captions.dffs").string();
  std::string config = (dir / "run.cfg").string();
  CliRun synth;

  SmallProject() {
    WriteTextFile(spec,
                  "num_users = 40\nnum_items = 20\nnum_topics = 4\n"
                  "num_layers = 3\ndim = 4\nsignal_layers = 2\n"
                  "min_seq_len = 4\nmax_seq_len = 8\n");
    synth = Cli({"synth", "--spec", spec, "--seed", "3", "--out-store", store,
                 "--out-log", log, "--out-caption-store", captions});
    WriteConfig("");
  }

  void WriteConfig(const std::string& extra) {
    WriteTextFile(config, "paths.store = " + store + "\npaths.log = " + log +
                              "\npaths.caption_store = " + captions +
                              "\npaths.output_dir = " + (dir / "out").string() +
                              "\nseed = 5\nmodel.d = 8\nbackbone.num_blocks = 1\n"
                              "backbone.max_seq_len = 6\ntrain.max_epochs = 2\n"
                              "train.batch_size = 16\n" + extra);
  }

  std::filesystem::path out() const { return dir / "out"; }
};

}  // namespace dffrec::testing
