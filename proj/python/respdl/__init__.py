# Copyright 2026 The respdl Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Respiratory sound classification with gammatone features, CNN-MoE and C-RNN."""

from ._respdl import (
    Error,
    center_frequencies,
    compute_metrics,
    config_keys,
    cross_validate,
    ensemble_fuse,
    frame_count,
    gammatone_spectrogram,
    load_wav,
    normalize_config,
    resample,
    write_synth_dataset,
)

__all__ = [
    "Error",
    "center_frequencies",
    "compute_metrics",
    "config_keys",
    "cross_validate",
    "ensemble_fuse",
    "frame_count",
    "gammatone_spectrogram",
    "load_wav",
    "normalize_config",
    "resample",
    "write_synth_dataset",
]
__version__ = "0.1.0"
