"""Provider counting: hands in, provider bands out.

A scripted episode moves from an empty table to a two-provider phase and
back; the smoothed hand count and the quantized provider timeline show
how the bands absorb frame-level noise.
"""

import numpy as np

from resustrack import (
    NoiseModel,
    PipelineConfig,
    Scenario,
    generate_episode,
    hcp_timeline,
)

scenario = Scenario(
    "demo_hcp", frames=600, width=1280, height=1024, seed=8,
    providers=((0, 100, 0), (100, 350, 2), (350, 600, 1)),
    noise=NoiseModel(dropout=0.15),
)
episode, annotation = generate_episode(scenario)

timeline = hcp_timeline(episode, PipelineConfig())

print("frame ranges and dominant provider estimate:")
for start, end in ((0, 100), (100, 350), (350, 600)):
    window = timeline.providers[start:end]
    values, counts = np.unique(window, return_counts=True)
    dominant = values[counts.argmax()]
    share = counts.max() / len(window)
    print(f"  frames {start:3d}-{end:3d}: mostly {dominant} "
          f"({share:.0%} of frames)")

reference = annotation.nhcp_timeline(scenario.frames)
agreement = 100.0 * np.mean(timeline.providers == reference)
print(f"\nagreement with the scripted provider count: {agreement:.1f}%")
print("(transitions blur across the smoothing window; the interior of "
      "each phase is exact)")

print("\nsmoothed hand count at a few frames:")
for i in (50, 200, 500):
    print(f"  frame {i}: nH={timeline.counts[i]} smoothed={timeline.smoothed[i]:.2f} "
          f"providers={timeline.providers[i]}")
