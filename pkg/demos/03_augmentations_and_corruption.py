#!/usr/bin/env python3
"""The three random augmentations and the corruption/restoration round trip.

Run: python3 demos/03_augmentations_and_corruption.py
"""

from seqrec.augops import (
    OP_NAMES,
    AugConfig,
    CorruptionConfig,
    corrupt_sequence,
    crop_augment,
    mask_augment,
    random_augment,
    reorder_augment,
    restore_sequence,
)

MASK = 121
seq = list(range(1, 13))
print("raw sequence:  ", seq)

print("mask (gamma=.5):", mask_augment(seq, 0.5, seed=1, mask_id=MASK))
print("crop (eta=.6):  ", crop_augment(seq, 0.6, seed=1))
print("reorder (.5):   ", reorder_augment(seq, 0.5, seed=1))
print("random choice:  ", random_augment(seq, AugConfig(), seed=3, mask_id=MASK))

# --- corruption for self-supervised restoration ------------------------------

cfg = CorruptionConfig(p_keep=0.4, p_delete=0.5, p_insert=0.1, n_items=120)
record = corrupt_sequence(seq, cfg, seed=11)
print("\ndamaged:", record.s_mod)
print("labels: ", [OP_NAMES[o] for o in record.ops])
for pos, run in sorted(record.ins_targets.items()):
    print(f"  before position {pos} restore {run[::-1]} (stored reverse-first: {run})")
if record.tail_targets:
    print(f"  tail restore {record.tail_targets[::-1]}")

rebuilt = restore_sequence(record)
print("replayed:", rebuilt)
print("round trip exact:", rebuilt == seq)
