"""
Dropping new-class samples from a mini-batch
============================================

The filter removes new-class samples until the batch is closer to
balanced. Early epochs pick them at random; later epochs drop the
ones the model finds hardest.
"""

import numpy as np

from medic.sampling import AnnotatedBatch, dos_drop_count, dos_filter

# 3 old-class samples (labels 0, 1) and 7 new-class samples (labels 2, 3)
ids = np.arange(10)
labels = np.array([0, 1, 0, 2, 3, 2, 3, 2, 3, 2])
old = labels < 2
ce = np.array([0.1, 0.2, 0.3, 2.5, 0.4, 1.7, 0.2, 3.1, 0.9, 0.6])
batch = AnnotatedBatch(ids, labels, old, ce_values=ce)

print("drop count:", dos_drop_count(int(old.sum()), int((~old).sum())))

# random phase (epoch <= K): the seed decides
for seed in (0, 1):
    print("random phase, seed", seed, "keeps", dos_filter(batch, epoch=1, K=5, seed=seed).ids)

# curriculum phase: the three largest-CE new samples (ids 7, 3, 5) go
print("curriculum phase keeps", dos_filter(batch, epoch=6, K=5, seed=0).ids)
