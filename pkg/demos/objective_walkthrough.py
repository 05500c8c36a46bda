"""
The entropy-regularized distillation loss
=========================================

How the transfer term differs from plain distillation, and how the
whole objective trains a small classifier.
"""

import numpy as np

from medic import losses

rng = np.random.default_rng(0)

# a teacher distribution and a student distribution over four classes
p = rng.dirichlet(np.ones(4))
q = rng.dirichlet(np.ones(4))
print("teacher", p.round(3))
print("student", q.round(3))

# the regularized term equals cross-entropy minus the student's entropy
print("mer_distill         ", losses.mer_distill(p, q))
print("CE(p, q) - H(q)     ", losses.cross_entropy(p, q) - losses.entropy(q))

# a student that copies the teacher pays nothing
print("mer_distill(p, p)   ", losses.mer_distill(p, p))

# %%
# Full objective on logits: the student has two extra classes the
# teacher never saw, so transfer uses only the first group of columns.
student_logits = rng.normal(size=(5, 6))
teacher_logits = rng.normal(size=(5, 4))
labels = np.eye(6)[rng.integers(0, 6, size=5)]
for mer in (True, False):
    cfg = losses.ObjectiveConfig(alpha=1.0, mer_enabled=mer)
    out = losses.total_objective(labels, student_logits, teacher_logits, [[0, 1, 2, 3]], cfg)
    print(f"mer={mer!s:5}  total={out.total:.4f}  learn={out.learn_term:.4f}  transfer={out.transfer_terms}")
