#!/usr/bin/env python3
"""From raw interaction log to train/valid/test splits and eval candidates.

Generates a synthetic log, then walks the ingestion pipeline step by step.
Run: python3 demos/02_data_pipeline.py
"""

from seqrec.data import (
    Vocabulary,
    build_sequences,
    dataset_stats,
    five_core_filter,
    leave_one_out_split,
    make_batches,
    sample_negatives,
)
from seqrec.synthgen import SynthSpec, generate

# a small ring-structured world: item k is always followed by item k+1
spec = SynthSpec(n_items=120, n_users=400, structure="ring",
                 min_len=6, max_len=14, noise_rate=0.05, seed=7)
interactions, noised_positions = generate(spec)
print(f"generated {len(interactions)} interactions "
      f"({len(noised_positions)} positions replaced by noise)")

filtered = five_core_filter(interactions)
print(f"5-core filtering kept {len(filtered)} interactions")

vocab = Vocabulary.from_interactions(filtered)
sequences = build_sequences(filtered, vocab)
stats = dataset_stats(sequences, vocab)
print("stats:", {k: round(v, 4) if isinstance(v, float) else v for k, v in stats.items()})

split = leave_one_out_split(sequences)
u = split.users[0]
print(f"\nuser {u.user_id}: train prefix {u.train}")
print(f"  validation target {u.valid_target}, test target {u.test_target}")

cands = sample_negatives(
    next(s for s in sequences if s.user_id == u.user_id), vocab, count=99, seed=1
)
overlap = set(cands.negatives) & set(u.full())
print(f"  99 negatives sampled, overlap with history: {len(overlap)} (must be 0)")

batch = next(make_batches(split, batch_size=4, seed=0))
print(f"\nfirst batch: ids matrix {batch.ids.shape}, left-padded rows:")
for row in batch.ids[:2]:
    print("  ", row)
