"""Qutrit dispersively coupled to a driven, damped qubit.

Computes the exact slow eigenvalues, checks whether the reduced generator
has Lindblad form, and follows the exact time-local coefficients towards
their asymptotic values.
"""
import numpy as np

from adelim.dispersive import (
    DispersiveParams,
    d_scan,
    exact_invariance_residual,
    exact_master_equation,
    fourth_order_coefficients,
    lindblad_criterion,
    slow_spectrum,
)

p = DispersiveParams.ladder(3, chi=0.1, omega=0.5, delta=0.5)
s = slow_spectrum(p)
print("slow eigenvalues lambda_mn:")
print(np.array2string(s.lambdas, precision=6, suppress_small=True))
print(f"gap condition holds: {s.gap_ok}")
print(f"invariance residual of the exact maps: {exact_invariance_residual(p, s):.2e}")

crit = lindblad_criterion(s)
print(f"D = {crit.D:.4e}, Lindblad form: {crit.is_lindblad}")
print(f"small-coupling coefficient c_B = {fourth_order_coefficients(0.5, 0.5).c_B:.4f}")

omegas = np.linspace(0.05, 3.05, 61)
deltas = np.linspace(-3, 3, 61)
scan = d_scan(p.chis, omegas, deltas)
print(f"fraction of the (Omega, Delta) grid with D < 0: {(scan.D < 0).mean():.3f}")

r = exact_master_equation(p)
for t in (1.0, 5.0, 10.0, 15.0, 19.99):
    i = int(round(t / 1e-2))
    print(f"kappa t = {r.t[i]:5.2f}  eig(S^T lambda(t) S) = {r.StlS_eigs[i]}")
print(f"smallest eigenvalue of T_t over the run: {r.min_eig_T.min():.2e}")
