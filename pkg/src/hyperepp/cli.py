"""Command-line entry point: ``hyperepp <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from . import rng as rngmod
from .gadgets import parity_qnd_pol, parity_qnd_spa, swap_pp, swap_ps, swap_ss
from .harness import FIG7A_CONVENTIONS, FIGURES, FORMATS, SweepConfig, reproduce_figure, run_sweep, verify_claims
from .optics import CONVENTIONS, ScatteringCoefficients, ScatteringParams, branch_amplitudes, qnd_efficiency, swap_efficiency
from .protocol import ENGINES, Arrangement, MixtureSpec, run_batch, yields
from .state import Bell, HyperBellLabel, basis_state, make_bell_pair, pol, reduced_density, spa, tensor

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


_BELL = {b.value: b for b in Bell}
_KETS = {"R": [1, 0], "L": [0, 1], "x1": [1, 0], "x2": [0, 1], "+": [1, 1], "-": [1, -1]}


def _hyper_label(text: str) -> HyperBellLabel:
    try:
        p, s = text.split(",")
        return HyperBellLabel(_BELL[p.strip()], _BELL[s.strip()])
    except (ValueError, KeyError):
        raise UsageError(f"expected 'pol,spa' Bell names from {sorted(_BELL)}, got {text!r}") from None


def _qubit(text: str) -> np.ndarray:
    """``R``, ``L``, ``x1``, ``x2``, ``+``, ``-`` or two comma-separated complex amplitudes."""
    if text in _KETS:
        v = np.array(_KETS[text], dtype=complex)
    else:
        try:
            v = np.array([complex(x.replace(" ", "")) for x in text.split(",")], dtype=complex)
        except ValueError:
            raise UsageError(f"cannot parse qubit state {text!r}") from None
        if v.shape != (2,):
            raise UsageError(f"a qubit state needs two amplitudes, got {text!r}")
    n = np.linalg.norm(v)
    if n == 0:
        raise UsageError("zero qubit state")
    return v / n


def _physics_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--g-ratio", type=float, default=2.0, help="g / (kappa + kappa_s)")
    p.add_argument("--kappa-s", type=float, default=0.2, help="side leakage in units of kappa")
    p.add_argument("--gamma", type=float, default=0.1, help="dipole decay in units of kappa")
    p.add_argument("--delta-c", type=float, default=0.0, help="omega - omega_c")
    p.add_argument("--delta-x", type=float, default=0.0, help="omega - omega_X")
    p.add_argument("--convention", choices=CONVENTIONS, default="printed")
    p.add_argument("--ideal", action="store_true", help="use T=1, D=0")


def _params(a) -> ScatteringParams:
    return ScatteringParams(
        omega=0.0, omega_c=-a.delta_c, omega_X=-a.delta_x, gamma=a.gamma, kappa=1.0,
        kappa_s=a.kappa_s, g=a.g_ratio * (1 + a.kappa_s),
    )


def _coeffs(a) -> ScatteringCoefficients:
    return ScatteringCoefficients.ideal() if a.ideal else branch_amplitudes(_params(a), a.convention)


def _c(z: complex) -> str:
    re, im = (0.0 if abs(x) < 1e-12 else x for x in (z.real, z.imag))  # hide rounding noise
    return f"{re:.9g}{im:+.9g}j"


def cmd_coeffs(a) -> int:
    p = _params(a)
    c = _coeffs(a)
    for name in ("r", "t", "r0", "t0", "D", "T"):
        print(f"{name:>8} = {_c(complex(getattr(c, name)))}")
    if a.ideal:
        print("  eta_PC = 1\neta_SWAP = 1")
    else:
        print(f"  eta_PC = {qnd_efficiency(p, a.convention):.9g}")
        print(f"eta_SWAP = {swap_efficiency(p, a.convention):.9g}")
    return EXIT_OK


def cmd_qnd(a) -> int:
    label = _hyper_label(a.state)
    s = make_bell_pair(label, ("A", "C"))
    qnd = parity_qnd_pol if a.dof == "pol" else parity_qnd_spa
    out, post = qnd("A", "C", s, _coeffs(a), rngmod.stream(a.seed))
    print(f"input     : A,C in {label.pol.value} (pol) x {label.spa.value} (spa)")
    if not out.success:
        print(f"outcome   : failure ({out.failed_branch.value})")
        return EXIT_OK
    print(f"outcome   : {out.parity.name.lower()} {a.dof} parity, amplitude factor {out.amplitude_factor:.9g}")
    print(f"fidelity of post-state to input: {abs(np.vdot(s.amplitudes, post.amplitudes)) ** 2:.12f}")
    return EXIT_OK


def _describe(rho: np.ndarray) -> str:
    w, v = np.linalg.eigh(rho)
    top = v[:, -1] * np.exp(-1j * np.angle(v[np.argmax(np.abs(v[:, -1])), -1]))
    return f"[{_c(top[0])}, {_c(top[1])}] purity {np.real(np.trace(rho @ rho)):.9g}"


def cmd_swap(a) -> int:
    parts = [
        basis_state(pol("A"), _qubit(a.a_pol)), basis_state(spa("A"), _qubit(a.a_spa)),
        basis_state(pol("A'"), _qubit(a.a2_pol)), basis_state(spa("A'"), _qubit(a.a2_spa)),
    ]
    s = parts[0]
    for q in parts[1:]:
        s = tensor(s, q)
    rng = rngmod.stream(a.seed)
    if a.kind == "ps":
        post = swap_ps("A", s)
        print("outcome   : deterministic, amplitude factor 1")
    else:
        out, post = (swap_pp if a.kind == "pp" else swap_ss)("A", "A'", s, _coeffs(a), rng)
        if not out.success:
            print(f"outcome   : failure ({out.failed_branch.value})")
            return EXIT_OK
        print(f"outcome   : spin {out.spin_result}, feedback {'applied' if out.feedback_applied else 'not needed'}, "
              f"amplitude factor {out.amplitude_factor:.9g}")
    for q in (pol("A"), spa("A"), pol("A'"), spa("A'")):
        print(f"{str(q):>10}: {_describe(reduced_density(post, [q]))}")
    return EXIT_OK


def cmd_purify(a) -> int:
    m = MixtureSpec(a.F1, a.F2 if a.F2 is not None else a.F1)
    rep = run_batch(m, _coeffs(a), a.trials, a.seed, Arrangement(a.arrangement), not a.no_step2, a.workers, a.engine)
    y1, y2 = yields(m.F1, m.F2)
    print(f"samples        : {rep.samples}")
    print(f"step-1 failures: {rep.step1_failures}")
    print("cases          : " + ", ".join(f"{c.value}:{n}" for c, n in rep.case_counts.items()))
    print(f"pumping        : {rep.pump_successes}/{rep.pump_attempts} succeeded")
    for name, est, ref in (("Y1", rep.Y1, y1), ("Y2", rep.Y2, y2)):
        print(f"{name:<15}: {est.value:.6f} +- {est.stderr:.6f}   (closed form {ref:.6f}, ideal gadgets)")
    for name in ("F1_case1", "F2_case1", "F1_out", "F2_out"):
        est = getattr(rep, name)
        print(f"{name:<15}: {est.value:.6f} +- {est.stderr:.6f}  (n={est.count})")
    return EXIT_OK


def _config(a) -> SweepConfig:
    base = SweepConfig.load(a.config) if a.config else SweepConfig()
    over = {k: getattr(a, k, None) for k in (
        "g_ratios", "kappa_s", "gamma", "convention", "F1", "F2", "rounds", "trials", "seed",
        "arrangement", "eta_d", "output", "format", "workers", "fig7a",
    )}
    if getattr(a, "ideal", False):
        over["ideal"] = True
    if getattr(a, "no_step2", False):
        over["step2"] = False
    return base.with_overrides(**over)


def cmd_sweep(a) -> int:
    run_sweep(_config(a))
    return EXIT_OK


def cmd_figure(a) -> int:
    text = reproduce_figure(a.id, _config(a)).to_csv()
    if a.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(a.output, "w", newline="") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_verify(a) -> int:
    c = _config(a)
    if a.trials is None:
        c = c.with_overrides(trials=100000)
    results = verify_claims(c)
    for r in results:
        print(r.line())
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {' '.join(failed)}" if failed else ""))
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hyperepp", description="Faithful hyperentanglement purification simulator")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("coeffs", help="scattering coefficients and gadget efficiencies")
    _physics_args(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("qnd", help="one parity-check QND on a hyper-Bell pair of photons A, C")
    _physics_args(p)
    p.add_argument("--dof", choices=("pol", "spa"), default="pol")
    p.add_argument("--state", default="phi+,phi+", help="pol,spa Bell names, e.g. psi+,phi+")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_qnd)

    p = sub.add_parser("swap", help="one SWAP gate on product inputs of photons A, A'")
    _physics_args(p)
    p.add_argument("--kind", choices=("pp", "ps", "ss"), default="pp")
    for name, default in (("a-pol", "R"), ("a-spa", "x1"), ("a2-pol", "L"), ("a2-spa", "x1")):
        p.add_argument(f"--{name}", default=default, help="R, L, x1, x2, +, - or 'a,b' amplitudes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_swap)

    p = sub.add_parser("purify", help="Monte-Carlo purification rounds and yield report")
    _physics_args(p)
    p.add_argument("--F1", type=float, default=0.8)
    p.add_argument("--F2", type=float, default=None, help="defaults to F1")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arrangement", choices=[x.value for x in Arrangement], default="ab")
    p.add_argument("--no-step2", action="store_true")
    p.add_argument("--engine", choices=ENGINES, default="vectorized")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_purify)

    def config_args(p, grids: bool) -> None:
        p.add_argument("--config", help="YAML file with physical/protocol/detector/output/figures sections")
        p.add_argument("--gamma", type=float)
        p.add_argument("--convention", choices=CONVENTIONS)
        p.add_argument("--output", "-o")
        if grids:
            p.add_argument("--g-ratios", type=float, nargs="+")
            p.add_argument("--kappa-s", type=float, nargs="+")
            p.add_argument("--F1", type=float, nargs="+")
            p.add_argument("--F2", type=float, nargs="+")
            p.add_argument("--rounds", type=int)
            p.add_argument("--trials", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--arrangement", choices=[x.value for x in Arrangement])
            p.add_argument("--no-step2", action="store_true")
            p.add_argument("--eta-d", type=float)
            p.add_argument("--format", choices=FORMATS)
            p.add_argument("--workers", type=int)
            p.add_argument("--ideal", action="store_true")

    p = sub.add_parser("sweep", help="grid Monte-Carlo to CSV")
    config_args(p, True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", help="figure data as CSV")
    p.add_argument("id", choices=FIGURES)
    config_args(p, False)
    p.add_argument("--fig7a", choices=FIG7A_CONVENTIONS)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("verify", help="acceptance checklist")
    config_args(p, True)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            raise UsageError("missing subcommand; see hyperepp --help")
        return a.func(a)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
