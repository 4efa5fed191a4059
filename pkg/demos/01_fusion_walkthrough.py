"""Majority-vote fusion on a tiny hand-made ensemble.

Walks through what the merge actually does: count votes per pixel and
class, claim pixels reaching the threshold, break overlaps by vote count
then by lowest class id.  Run with `python3 demos/01_fusion_walkthrough.py`.
"""

import numpy as np

from crowdseg.fusion import MergePolicy, build_frequency_map, merge_labels, threshold_plane
from crowdseg.mask_core import ClassPalette, LabelMap, PaletteEntry

palette = ClassPalette([PaletteEntry(1, "Liver"), PaletteEntry(2, "Aorta")])


def label(rows):
    rows = np.asarray(rows, dtype=np.uint8)
    return LabelMap(rows.shape[1], rows.shape[0], rows, palette)


# five annotators, 6x6, disagreeing about the right edge of the liver
annotators = []
for extra in (0, 0, 0, 1, 1):
    a = np.zeros((6, 6), dtype=np.uint8)
    a[1:5, 1 : 4 + extra] = 1
    a[2:4, 4:6] = 2
    annotators.append(label(a))

freq = build_frequency_map(annotators, class_id=1)
print("vote counts for Liver (class 1):")
print(freq.counts)

for tau in (1, 3, 5):
    plane = threshold_plane(freq, tau)
    print(f"tau={tau}: liver pixels = {plane.popcount()}")
print("tau=1 is the union of the ensemble, tau=5 the intersection.")

merged, _freqs = merge_labels(annotators, MergePolicy(threshold=3))
print("\nmerged label (threshold 3, overlap to the stronger vote):")
print(merged.data)
