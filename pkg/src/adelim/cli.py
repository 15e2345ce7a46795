"""Command-line front end: figure data as CSV and the verification suite.

Every output starts with ``#`` metadata lines (command, full config, seed,
version) followed by a header row. Floats are written with 17 significant
digits and complex numbers as ``_re``/``_im`` column pairs, so reruns with the
same config are bit-identical.

Config files hold ``key = value`` lines; ``#`` starts a comment, lists are
comma separated and ``start:stop:num`` expands to a linearly spaced grid.
"""
from __future__ import annotations

import argparse
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cp_analysis import (
    NoUnitEigenvalue,
    NotConjugationClosed,
    cp_inequality_check,
    cp_inequality_crossing,
    is_lindbladian,
    wpg_sorted_feasible,
    wpg_spectrum_feasible,
)
from .dispersive import (
    CoefficientZeroCrossing,
    DispersiveParams,
    d_scan,
    diagonal_gauge_umax,
    exact_master_equation,
    slow_spectrum,
)
from .jc import (
    JCParams,
    UnstableReducedDynamics,
    bloch_analysis,
    engine_coefficients,
    fourth_order_coeffs,
    reduced_generator,
)


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "qudit-d-scan": {
        "chi": "0.1", "kappa": "1", "omega": "0.05:3.05:121", "delta": "-3:3:121",
    },
    "jc-report": {
        "g": "0.05", "gamma": "1", "delta_a": "0", "n_th": "1", "n_max": "40",
        "t": "0.01,0.1,1,10,100", "engine": "true",
    },
    "exact-master": {
        "chi": "0.1", "kappa": "1", "omega": "0.5", "delta": "0.5", "d": "3", "dt": "0.01", "t_max": "20",
    },
    "gauge-umax": {
        "chi": "0.25,0.5,1,2", "kappa": "1", "omega": "0.5", "delta": "-0.5", "d": "3", "n_samples": "2000",
    },
}


# -- config handling ----------------------------------------------------------

def read_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def parse_float(cfg: dict, key: str) -> float:
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {cfg[key]!r}") from None


def parse_bool(cfg: dict, key: str) -> bool:
    v = cfg[key].lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: not a boolean: {cfg[key]!r}")


def parse_grid(cfg: dict, key: str) -> np.ndarray:
    text = cfg[key]
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            if int(num) < 1:
                raise ValueError
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise ConfigError(f"{key}: invalid grid {text!r}") from None


def merged_config(command: str, path: str | None) -> dict[str, str]:
    cfg = dict(DEFAULTS.get(command, {}))
    user = read_config(path)
    unknown = set(user) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(sorted(unknown))}")
    cfg.update(user)
    return cfg


# -- output -------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    # adding 0.0 turns -0.0 into 0.0
    return format(float(x) + 0.0, ".17g")


def write_table(out, command: str, cfg: dict, args, header: list[str], rows) -> None:
    out.write(f"# command: {command}\n")
    for k in sorted(cfg):
        out.write(f"# config: {k} = {cfg[k]}\n")
    out.write(f"# seed: {args.seed}\n")
    out.write(f"# tol: {fmt(args.tol)}\n")
    out.write(f"# version: adelim {__version__}\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def svg_heatmap(path: str, xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> None:
    """Two-color sign map: blue where the value is negative, red elsewhere."""
    nx, ny = len(xs), len(ys)
    cell = 4
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * cell}" height="{ny * cell}">']
    for i in range(nx):
        for j in range(ny):
            color = "#3b6fb6" if values[i, j] < 0 else "#c8403a"
            # y axis points up
            parts.append(f'<rect x="{i * cell}" y="{(ny - 1 - j) * cell}" width="{cell}" height="{cell}" fill="{color}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# -- commands -----------------------------------------------------------------

def _scan_rows(chis, kappa, omegas, deltas):
    return d_scan(chis, omegas * kappa, deltas * kappa, kappa)


def cmd_qudit_d_scan(cfg: dict, args):
    kappa = parse_float(cfg, "kappa")
    chi = parse_float(cfg, "chi")
    omegas, deltas = parse_grid(cfg, "omega"), parse_grid(cfg, "delta")
    if kappa <= 0 or omegas.size == 0 or deltas.size == 0:
        raise ConfigError("need kappa > 0 and non-empty grids")
    chis = (0.0, chi * kappa, 2 * chi * kappa)
    chunks = [c for c in np.array_split(omegas, max(1, args.jobs)) if c.size]
    if args.jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_scan_rows, [chis] * len(chunks), [kappa] * len(chunks), chunks,
                                  [deltas] * len(chunks)))
    else:
        parts = [_scan_rows(chis, kappa, c, deltas) for c in chunks]
    D = np.concatenate([p.D for p in parts]) / kappa**2
    gap = np.concatenate([p.gap_ok for p in parts])
    rows = [(om, de, D[i, j], gap[i, j]) for i, om in enumerate(omegas) for j, de in enumerate(deltas)]
    if args.svg:
        svg_heatmap(args.svg, omegas, deltas, D)
    return ["omega_over_kappa", "delta_over_kappa", "D", "gap_ok"], rows


def cmd_jc_report(cfg: dict, args):
    p = JCParams(parse_float(cfg, "g"), parse_float(cfg, "gamma"), parse_float(cfg, "delta_a"),
                 parse_float(cfg, "n_th"), int(parse_float(cfg, "n_max")))
    c = fourth_order_coeffs(p)
    ba = bloch_analysis(c)
    s = ba.summary
    verdict = is_lindbladian(reduced_generator(c), args.tol)
    rows = [
        ("omega_B4", c.omega_B4), ("gamma_minus4", c.gamma_minus4), ("gamma_plus4", c.gamma_plus4),
        ("gamma_phi4", c.gamma_phi4),
        ("b_minus_re", c.b_minus.real), ("b_minus_im", c.b_minus.imag),
        ("b_plus_re", c.b_plus.real), ("b_plus_im", c.b_plus.imag),
        ("T1", s.T1), ("T2", s.T2), ("Rz", s.Rz), ("DeltaT", s.DeltaT),
        ("lindblad_verdict", verdict.is_lindbladian),
        ("bloch_contraction", ba.contraction_ok),
        ("cp_inequality_t_star", cp_inequality_crossing(s.T1, s.T2)),
    ]
    for t in parse_grid(cfg, "t"):
        w = ba.wpg(t, tol=args.tol)
        label = repr(float(t))
        rows.append((f"wpg_feasible_t={label}", w.feasible))
        rows.append((f"cp_inequality_t={label}", cp_inequality_check(s.T1, s.T2, t)))
    if parse_bool(cfg, "engine"):
        e = engine_coefficients(p).totals
        floor = p.g**4 / p.gamma**3
        for name in ("omega_B4", "gamma_minus4", "gamma_plus4", "gamma_phi4"):
            a, b = getattr(e, name), getattr(c, name)
            rows.append((f"residual_{name}", abs(a - b) / max(abs(b), floor)))
    return ["quantity", "value"], rows


def cmd_exact_master(cfg: dict, args):
    kappa = parse_float(cfg, "kappa")
    d = int(parse_float(cfg, "d"))
    p = DispersiveParams.ladder(d, parse_float(cfg, "chi") * kappa, parse_float(cfg, "omega") * kappa,
                                parse_float(cfg, "delta") * kappa, kappa)
    r = exact_master_equation(p, t_max=parse_float(cfg, "t_max"), dt=parse_float(cfg, "dt"))
    header = ["t_kappa"] + [f"eig{k + 1}_StlS" for k in range(d - 1)] + ["min_eig_T"]
    rows = [(r.t[i] * kappa, *(r.StlS_eigs[i] / kappa), r.min_eig_T[i]) for i in range(len(r.t) - 1)]
    return header, rows


def _umax(chi, kappa, omega, delta, d, n_samples, seed):
    s = slow_spectrum(DispersiveParams.ladder(d, chi * kappa, omega * kappa, delta * kappa, kappa))
    return diagonal_gauge_umax(s, n_samples=n_samples, seed=seed)


def cmd_gauge_umax(cfg: dict, args):
    chis = parse_grid(cfg, "chi")
    kappa = parse_float(cfg, "kappa")
    omega, delta = parse_float(cfg, "omega"), parse_float(cfg, "delta")
    d, n = int(parse_float(cfg, "d")), int(parse_float(cfg, "n_samples"))
    argv = [(float(c), kappa, omega, delta, d, n, args.seed) for c in chis]
    if args.jobs > 1 and len(argv) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            u = list(pool.map(_umax, *zip(*argv)))
    else:
        u = [_umax(*a) for a in argv]
    return ["chi_over_kappa", "u_max"], list(zip(chis, u))


TABLE_COMMANDS = {
    "qudit-d-scan": cmd_qudit_d_scan,
    "jc-report": cmd_jc_report,
    "exact-master": cmd_exact_master,
    "gauge-umax": cmd_gauge_umax,
}


def cmd_wpg(values: list[str], tol: float) -> tuple[bool, tuple]:
    """Three values are read as ``s``, four as the full spectrum of a qubit map."""
    try:
        nums = [complex(v.replace(" ", "")) for v in values]
    except ValueError:
        raise ConfigError("wpg expects real or complex numbers") from None
    if len(nums) == 3:
        if any(abs(z.imag) > 0 for z in nums):
            raise ConfigError("s values must be real")
        s = tuple(float(z.real) for z in nums)
        res = wpg_spectrum_feasible([1.0, *s], tol=tol)
        if all(x >= 0 for x in s):
            assert res.feasible == wpg_sorted_feasible(s, tol)
        return res.feasible, res.s
    if len(nums) == 4:
        res = wpg_spectrum_feasible(nums, tol=tol)
        return res.feasible, res.s
    raise ConfigError("wpg expects 3 s values or 4 eigenvalues")


def cmd_verify() -> int:
    from .acceptance import run_all

    results = run_all()
    for r in results:
        print(r.line())
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if n_pass == len(results) else 1


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for grid points")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled states")
    common.add_argument("--tol", type=float, default=1e-9, help="tolerance for verdicts")

    parser = argparse.ArgumentParser(prog="adelim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"adelim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    scan = sub.add_parser("qudit-d-scan", parents=[common], help="sign of D on an (Omega, Delta) grid")
    scan.add_argument("--svg", help="also write a two-color sign map")
    sub.add_parser("jc-report", parents=[common], help="oscillator-qubit coefficients and CP diagnostics")
    sub.add_parser("exact-master", parents=[common], help="exact time-local master equation coefficients")
    sub.add_parser("gauge-umax", parents=[common], help="diagonal-gauge positivity factor u_max")
    wpg = sub.add_parser("wpg", parents=[common], help="spectral Kraus-map feasibility of a qubit map")
    wpg.add_argument("values", nargs="+", help="3 s values or 4 eigenvalues (complex as 0.5+0.1j)")
    sub.add_parser("verify", parents=[common], help="run the reproduction checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        if args.command == "verify":
            return cmd_verify()
        if args.command == "wpg":
            feasible, s = cmd_wpg(args.values, args.tol)
            print(f"{'feasible' if feasible else 'infeasible'} s={','.join(fmt(x) for x in s)}")
            return 0
        cfg = merged_config(args.command, args.config)
        header, rows = TABLE_COMMANDS[args.command](cfg, args)
        buf = io.StringIO()
        write_table(buf, args.command, cfg, args, header, rows)
        if args.out:
            Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
        else:
            sys.stdout.write(buf.getvalue())
        return 0
    except (ConfigError, OSError, NoUnitEigenvalue, NotConjugationClosed) as exc:
        print(f"adelim: error: {exc}", file=sys.stderr)
        return 2
    except (CoefficientZeroCrossing, UnstableReducedDynamics, ValueError) as exc:
        print(f"adelim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
