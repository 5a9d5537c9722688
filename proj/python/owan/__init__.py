# Copyright (c) 2026 The OWAN Lab Authors.
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Image restoration with an operation-wise attention network.

Images are float64 numpy arrays of shape (H, W, C) with samples in [0, 1].
"""

from ._owan import (
    CheckpointError,
    ImageIoError,
    Restorer,
    attention_stats,
    build_dataset,
    evaluate_pairs,
    gaussian_blur,
    gaussian_kernel,
    gaussian_noise,
    jpeg,
    jpeg_quant_tables,
    motion_blur,
    psnr,
    quantize_8bit,
    read_png,
    ssim,
    write_png,
)

__all__ = [
    "CheckpointError",
    "ImageIoError",
    "Restorer",
    "attention_stats",
    "build_dataset",
    "evaluate_pairs",
    "gaussian_blur",
    "gaussian_kernel",
    "gaussian_noise",
    "jpeg",
    "jpeg_quant_tables",
    "motion_blur",
    "psnr",
    "quantize_8bit",
    "read_png",
    "ssim",
    "write_png",
]
