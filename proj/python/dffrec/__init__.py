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
"""Layer-fused visual item features for sequential recommendation."""

from ._core import (
    DataError,
    FeatureStore,
    InteractionLog,
    NumericalError,
    UsageError,
    ValidationReport,
    config_defaults,
    generate_synthetic,
    metrics_at,
    parse_config,
    rank_target,
    run_cli,
    synth_defaults,
    validate,
)

__all__ = [
    "DataError",
    "FeatureStore",
    "InteractionLog",
    "NumericalError",
    "UsageError",
    "ValidationReport",
    "config_defaults",
    "generate_synthetic",
    "metrics_at",
    "parse_config",
    "rank_target",
    "run_cli",
    "synth_defaults",
    "validate",
]
