# Copyright 2026 The DFFRec Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import json
import math

import pytest

import dffrec

SMALL_SPEC = """\
num_users = 40
num_items = 20
num_topics = 4
num_layers = 3
dim = 4
signal_layers = 2
min_seq_len = 4
max_seq_len = 8
"""


@pytest.fixture()
def project(tmp_path):
    store, log, captions = tmp_path / "items.dffs", tmp_path / "log.tsv", tmp_path / "cap.dffs"
    dffrec.generate_synthetic(SMALL_SPEC, 3, store, log, captions)
    return tmp_path, store, log, captions


def test_store_round_trip(project, tmp_path):
    _, store_path, _, captions = project
    store = dffrec.FeatureStore.read(store_path)
    assert (store.num_items, store.num_layers, store.dim) == (20, 3, 4)
    item = store.item_ids[0]
    assert len(store.item(item)) == 12
    assert store.layer(item, 1) == store.item(item)[4:8]
    copy = tmp_path / "copy.dffs"
    store.write(copy)
    assert copy.read_bytes() == store_path.read_bytes()
    assert dffrec.FeatureStore.read(captions).provenance == "caption"


def test_bad_store_raises_data_error(tmp_path):
    bad = tmp_path / "bad.dffs"
    bad.write_bytes(b"nope")
    with pytest.raises(dffrec.DataError):
        dffrec.FeatureStore.read(bad)


def test_validate_reports_missing_items(project, tmp_path):
    _, store, log, _ = project
    assert dffrec.validate(store, log).clean
    extra = tmp_path / "extra.tsv"
    extra.write_text(log.read_text() + "999\t4242\t99999999\n")
    report = dffrec.validate(store, extra)
    assert not report.clean
    assert report.missing_items == {4242}


def test_metrics():
    assert dffrec.rank_target([0.1, 0.9, 0.5], 2) == 2
    assert dffrec.rank_target([0.1, 0.9, 0.5], 2, [False, True, False]) == 1
    hit, ndcg = dffrec.metrics_at(3, 10)
    assert hit == 1.0 and ndcg == pytest.approx(1.0 / math.log2(4.0))
    assert dffrec.metrics_at(11, 10) == (0.0, 0.0)


def test_config_parsing():
    defaults = dffrec.config_defaults()
    assert defaults["model.d"] == "32"
    parsed = dffrec.parse_config("model.d = 48\nseed = 9\n")
    assert parsed["model.d"] == "48" and parsed["seed"] == "9"
    with pytest.raises(dffrec.UsageError):
        dffrec.parse_config("bogus = 1\n")


def test_cli_train_and_eval(project):
    root, store, log, _ = project
    out = root / "out"
    config = root / "run.cfg"
    config.write_text(
        f"paths.store = {store}\npaths.log = {log}\npaths.output_dir = {out}\n"
        "seed = 5\nmodel.d = 8\nbackbone.num_blocks = 1\nbackbone.max_seq_len = 6\n"
        "train.max_epochs = 2\ntrain.batch_size = 16\n"
    )
    code, _, err = dffrec.run_cli(["train", "--config", str(config)])
    assert code == 0, err
    report = json.loads((out / "report_test.json").read_text())
    code, _, err = dffrec.run_cli(
        ["eval", "--checkpoint", str(out / "checkpoint.dffc"), "--config", str(config), "--phase", "test"]
    )
    assert code == 0, err
    assert json.loads((out / "eval_test.json").read_text()) == report


def test_cli_usage_error_exit_code():
    code, _, err = dffrec.run_cli(["train", "--no-such-flag"])
    assert code == 1
    assert err.strip()
