"""
From raw dynamometer channels to a model window
===============================================

A single synthetic cut goes through segmentation, rotation into the feed
frame, low-pass filtering and window extraction. The numbers printed along
the way are the quantities worth checking on real data too.
"""

import numpy as np

from wearcast.signals import (
    SAMPLE_CHANNELS,
    ChannelId,
    PreprocessOptions,
    fit_normalizer,
    isolate_milling_segment,
    lowpass_taps,
    preprocess,
    rotate_to_feed_frame,
)
from wearcast.synth import SynthConfig, cut_label, generate_dataset

###############################################################################
# One tool at the middle feed, only its first two cuts.

cfg = SynthConfig(tools_per_fpt=(0, 0, 1, 0, 0), max_cuts_per_tool=2, seed=1)
(record, edges), _ = generate_dataset(cfg)
print(f"tool {record.tool_id}, cut {record.cut_index}: {len(record)} samples at "
      f"{1 / record.sampling_period:.0f} Hz, f_z = {record.conditions.f_z} mm")

###############################################################################
# Entry and exit phases are cut away with fixed time margins.

segment = isolate_milling_segment(record, entry_margin=0.5, exit_margin=0.5)
print(f"milling segment: {len(segment)} samples ({segment.duration:.3f} s)")

###############################################################################
# The stationary dynamometer measures in machine axes. Rotating by the drive
# position gives feed and normal components, and the magnitude is unchanged.

fx, fy = segment.channels[ChannelId.SD_X], segment.channels[ChannelId.SD_Y]
feed, normal = rotate_to_feed_frame(fx, fy, segment.drive_position)
print("max |F| change from rotation:", np.max(np.abs(np.hypot(feed, normal) - np.hypot(fx, fy))))

###############################################################################
# The FIR filter passes the tooth-passing content and removes everything near
# Nyquist. Its frequency response at a few points:

taps = lowpass_taps(record.sampling_period, 8000.0)
freqs = np.array([88.4, 4000.0, 8000.0, 9500.0])
response = np.abs(np.exp(-2j * np.pi * np.outer(freqs * record.sampling_period, np.arange(len(taps)))) @ taps)
for f, r in zip(freqs, response):
    print(f"  {f:7.1f} Hz: {20 * np.log10(r):7.1f} dB")

###############################################################################
# The whole chain in one call. The window is the last 2000 samples of the
# segment, 0.1 s at 20 kHz.

sample = preprocess(record, cut_label(edges), PreprocessOptions(window_length=2000))
print("sample shape:", sample.signals.shape)
for cid, row in zip(SAMPLE_CHANNELS, sample.signals):
    print(f"  {cid.value:16s} mean {row.mean():9.3f}  std {row.std():8.3f}")

###############################################################################
# Normalization statistics are fitted on training samples only and then
# frozen. Condition values are min-max scaled over the same samples.

norm = fit_normalizer([sample])
print("scaled f_z:", norm.apply(sample).scaled_conditions["f_z"])
