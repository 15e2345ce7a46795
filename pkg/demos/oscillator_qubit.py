"""Qubit coupled to a damped thermal oscillator.

Compares the fourth-order closed forms with the generic elimination engine
and shows that a negative dephasing rate rules out any Kraus map with the
same spectrum, although the Bloch ball stays invariant.
"""
from adelim.jc import (
    JCParams,
    cp_impossibility,
    engine_coefficients,
    fourth_order_coeffs,
    gamma_phi_threshold,
)

p = JCParams(g=0.05, gamma=1.0, delta_a=0.0, n_th=1.0)
closed = fourth_order_coeffs(p)
engine = engine_coefficients(p).totals
for name in ("omega_B4", "gamma_minus4", "gamma_plus4", "gamma_phi4"):
    print(f"{name:13s} closed {getattr(closed, name): .6e}  engine {getattr(engine, name): .6e}")

print(f"gamma_phi changes sign at |Delta_A|/gamma = {gamma_phi_threshold():.4f}")

r = cp_impossibility(p)
s = r.bloch.summary
print(f"T1 = {s.T1:.2f}, T2 = {s.T2:.2f}, Rz = {s.Rz:.3f}")
print(f"Lindblad form: {r.lindblad}")
print(f"Bloch ball invariant: {r.bloch.contraction_ok}")
print(f"Kraus map with this spectrum at small t: {r.wpg_small_t.feasible}")
print(f"CP inequality first holds at t = {r.crossing_time:.3f}")
