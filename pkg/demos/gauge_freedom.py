"""Gauge freedom of the reduced description.

A similarity transform can turn a non-Lindblad generator into a Lindblad
one, and at second order a suitable gauge makes the assignment map CP.
"""
import numpy as np

from adelim.elimination import eliminate, random_composite_model, second_order_kraus_form
from adelim.cp_analysis import is_completely_positive
from adelim.jc import JCParams, second_order_assignment, toy_similarity_example

toy = toy_similarity_example(1.0, 0.25)
print(f"toy generator: Lindblad before {toy.lindblad_before}, after {toy.lindblad_after}, "
      f"omega0' = {toy.omega0_prime:.6f}")

a = second_order_assignment(JCParams(0.1, 1.0, 0.0, 0.5))
print(f"oscillator-qubit witness {a.witness:.4f}, min Choi eigenvalue without gauge {a.min_choi_G0:.4f}, "
      f"with gauge {a.min_choi_G:.1e}")

rng = np.random.default_rng(0)
m = random_composite_model(3, 2, rng)
eps = 0.05
print(f"random model, partial-trace gauge: min Choi {is_completely_positive(eliminate(m, 2).K_sum(eps)).min_choi_eig:.2e}")
for z in (1.0, 5.0, 20.0):
    v = is_completely_positive(second_order_kraus_form(m, eps, z)).min_choi_eig
    print(f"random model, Kraus-form gauge z = {z:4.1f}: min Choi {v:.2e}")
