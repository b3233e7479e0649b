"""Command-line interface: gkdv-stab <command> [options].

Exit codes: 0 success, 1 verification failure or other error, 2 point not in
Omega (or empty sweep), 3 sign undecided under --strict.  Options may also be
read from a key=value file given by --config; command-line flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import GkdvError, NotInOmega, UncertainSign

EXIT_OK, EXIT_FAIL, EXIT_OMEGA, EXIT_UNCERTAIN = 0, 1, 2, 3


def _finite(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {s!r}")
    return v


def _positive(s: str) -> float:
    v = _finite(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
    return v


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
    return v


def _exponent(s: str) -> float:
    v = _finite(s)
    if v < 1:
        raise argparse.ArgumentTypeError("p must be >= 1")
    return v


def _grid(s: str) -> list[float]:
    """'lo:hi:n' (inclusive linspace), a comma list, or a single value."""
    try:
        if ":" in s:
            lo, hi, n = s.split(":")
            n = int(n)
            if n < 0:
                raise ValueError
            vals = np.linspace(float(lo), float(hi), n).tolist() if n else []
        else:
            vals = [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {s!r}; use lo:hi:n or v1,v2,...") from None
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"grid {s!r} has non-finite values")
    return vals


def _bool(s: str) -> bool:
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _dump_json(obj, path=None) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _open_out(path):
    if path is None or path == "-":
        return io.TextIOWrapper(sys.stdout.buffer, newline="", write_through=True), False
    return open(path, "w", newline=""), True


# ---------------------------------------------------------------------------
# parser


def _point_args(p, *, need_E=True):
    p.add_argument("--p", type=_exponent, default=1.0, help="power-law exponent, f(u) = u^(p+1)")
    p.add_argument("--a", type=_finite, default=0.0)
    p.add_argument("--c", type=_finite, default=1.0)
    g = p.add_mutually_exclusive_group(required=False)
    g.add_argument("--E", type=_finite, default=None, help="energy level")
    g.add_argument("--s", type=_finite, default=None,
                   help="energy as a fraction of the way from E* (0) to E_sep (1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gkdv-stab",
                                 description="Stability of periodic traveling waves of u_t = u_xxx + f(u)_x.")
    ap.add_argument("--config", default=None, help="key=value file with option defaults")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="stability indices and verdict at one point (JSON)")
    _point_args(p)
    p.add_argument("--tol", type=_positive, default=1e-6, help="tolerance of the action identities")
    p.add_argument("--band", type=_positive, default=None,
                   help="absolute tolerance band for the signs (default: 10x error estimate)")
    p.add_argument("--strict", type=_bool, nargs="?", const=True, default=False,
                   help="exit 3 instead of reporting Indeterminate when a sign is unresolved")
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="grid of points, one CSV row each")
    p.add_argument("--p", type=_exponent, default=1.0)
    p.add_argument("--c", type=_finite, default=1.0)
    p.add_argument("--a", type=_grid, default=[0.0], help="grid: lo:hi:n or v1,v2,...")
    g = p.add_mutually_exclusive_group(required=False)
    g.add_argument("--E", type=_grid, default=None)
    g.add_argument("--s", type=_grid, default=None, help="grid of fractions between E* and E_sep")
    p.add_argument("--band", type=_positive, default=None)
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: $GKDV_STAB_THREADS or 1)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("evans", help="D(mu, lambda) on a real mu grid (CSV) and a JSON summary")
    _point_args(p)
    p.add_argument("--mu-min", type=_finite, default=-1.0)
    p.add_argument("--mu-max", type=_finite, default=1.0)
    p.add_argument("--n", type=_positive_int, default=201)
    p.add_argument("--scaled", type=_bool, nargs="?", const=True, default=False,
                   help="mu grid in units of (2 pi / T)^3")
    p.add_argument("--lam-re", type=_finite, default=1.0)
    p.add_argument("--lam-im", type=_finite, default=0.0)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", default=None, help="JSON summary path (roots and index estimates)")

    p = sub.add_parser("profile", help="wave profile samples x, u, u_x (CSV)")
    _point_args(p)
    p.add_argument("--n", type=_positive_int, default=256)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", default=None, help="JSON with the conserved set")

    p = sub.add_parser("evolve", help="perturbed evolution and orbit distance series (CSV)")
    _point_args(p)
    p.add_argument("--eps", type=_finite, default=1e-3)
    p.add_argument("--perturbation", choices=["none", "cos", "noise", "phi0"], default="cos")
    p.add_argument("--mode", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--band-modes", type=_positive_int, default=8)
    p.add_argument("--project", type=_bool, nargs="?", const=True, default=False,
                   help="place the perturbation on Sigma_0 (fixed M and P), norm eps")
    p.add_argument("--periods", type=_positive, default=10.0)
    p.add_argument("--n-modes", type=_positive_int, default=128)
    p.add_argument("--dt", type=_positive, default=None)
    p.add_argument("--output-every", type=_positive, default=1.0, help="in periods")
    p.add_argument("--norm", choices=["L2", "H1"], default="L2")
    p.add_argument("--dealias", type=_bool, default=True)
    p.add_argument("--growth", type=_bool, nargs="?", const=True, default=False,
                   help="fit an exponential growth rate to rho(t)")
    p.add_argument("--out", default=None)
    p.add_argument("--summary", default=None)

    p = sub.add_parser("cnoidal", help="closed-form KdV wave against quadrature (JSON)")
    p.add_argument("--k", type=_finite, default=None, help="elliptic modulus in [0, 1)")
    p.add_argument("--a", type=_finite, default=0.0)
    p.add_argument("--c", type=_finite, default=1.0)
    p.add_argument("--E", type=_finite, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify", help="run the identity suites")
    p.add_argument("--level", choices=["fast", "full"], default="fast")
    p.add_argument("--out", default=None, help="JSON report path")
    p.add_argument("--tamper-action", type=_finite, default=None, help=argparse.SUPPRESS)
    return ap


def _subparser(ap, name):
    for act in ap._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[name]
    raise KeyError(name)


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _apply_config(ap, argv, args):
    sp = _subparser(ap, args.command)
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help",)}
    conf = read_config(args.config)
    defaults = {}
    for k, v in conf.items():
        act = actions.get(k)
        if act is None:
            ap.error(f"unknown key in {args.config}: {k!r}")
        conv = act.type or (lambda s: s)
        if act.choices is not None and v not in act.choices:
            ap.error(f"{args.config}: {k}={v!r} not in {sorted(act.choices)}")
        try:
            defaults[k] = conv(v)
        except (argparse.ArgumentTypeError, ValueError) as exc:
            ap.error(f"{args.config}: {k}: {exc}")
    sp.set_defaults(**defaults)
    return ap.parse_args(argv)


def _point(args):
    from .potential import Nonlinearity, ParamPoint, analyze_phase_plane, equilibrium, separatrix_energy

    nl = Nonlinearity.power_law(args.p)
    if args.E is None and args.s is None:
        raise NotInOmega("one of --E or --s is required")
    if args.E is not None:
        pt = ParamPoint(args.a, args.E, args.c, nl)
    else:
        _, E_star, _ = equilibrium(args.a, args.c, nl)
        E = E_star + args.s * (separatrix_energy(args.a, args.c, nl) - E_star)
        pt = ParamPoint(args.a, E, args.c, nl)
    pp = analyze_phase_plane(pt)
    if not pp.in_omega:
        raise NotInOmega(f"(a, E, c) = ({pt.a}, {pt.E}, {pt.c}) is not in Omega")
    return pt


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    from .calculus import gradients
    from .indices import classify

    pt = _point(args)
    table = gradients(pt, tol=args.tol)
    rep = classify(pt, args.band, strict=args.strict, table=table)
    _dump_json(rep.to_dict(), args.out)
    return EXIT_OK


SWEEP_COLUMNS = ["index", "a", "E", "c", "p", "status", "T", "M", "P", "H", "K", "T_E",
                 "bracket_TM_aE", "bracket_TMP_aEc", "verdict"]


def _sweep_row(i, p, a, c, e, use_s, band):
    from .calculus import gradients
    from .indices import classify

    ns = argparse.Namespace(p=p, a=a, c=c, E=None if use_s else e, s=e if use_s else None)
    row = {"index": i, "a": a, "E": e, "c": c, "p": p}
    try:
        pt = _point(ns)
        row["E"] = pt.E
        rep = classify(pt, band, table=gradients(pt, check=False))
        v = rep.table.values
        br = rep.brackets
        row.update(status="ok", T=v["T"], M=v["M"], P=v["P"], H=v["H"], K=v["K"], T_E=br.T_E,
                   bracket_TM_aE=br.bracket_TM_aE, bracket_TMP_aEc=br.bracket_TMP_aEc,
                   verdict=rep.verdict.value)
    except GkdvError as exc:
        row["status"] = type(exc).__name__
    return row


def worker_count(flag) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("GKDV_STAB_THREADS")
    if env:
        try:
            n = int(env)
            if n > 0:
                return n
        except ValueError:
            pass
        print(f"ignoring invalid GKDV_STAB_THREADS={env!r}", file=sys.stderr)
    return 1


def cmd_sweep(args) -> int:
    es = args.s if args.E is None else args.E
    if es is None:
        print("one of --E or --s is required", file=sys.stderr)
        return EXIT_OMEGA
    use_s = args.E is None
    jobs = [(a, e) for a in args.a for e in es]
    if not jobs:
        print("empty grid", file=sys.stderr)
        return EXIT_OMEGA
    with ThreadPoolExecutor(max_workers=worker_count(args.threads)) as ex:
        futs = [ex.submit(_sweep_row, i, args.p, a, args.c, e, use_s, args.band)
                for i, (a, e) in enumerate(jobs)]
        rows = [f.result() for f in futs]
    fh, close = _open_out(args.out)
    try:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, restval="", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if close:
            fh.close()
        else:
            fh.detach()
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_OMEGA


def cmd_evans(args) -> int:
    from .evans import (evans_cubic_fit, evans_scan, large_mu_sign, mu_scale, real_unstable_roots,
                        trace_identity_index, write_evans_csv)
    from .quadrature import reconstruct_profile

    pt = _point(args)
    prof = reconstruct_profile(pt, 256)
    unit = mu_scale(prof) if args.scaled else 1.0
    mus = np.linspace(args.mu_min, args.mu_max, args.n) * unit
    lam = complex(args.lam_re, args.lam_im)
    samples = evans_scan(prof, mus, lam)
    if args.out is None or args.out == "-":
        buf = io.StringIO()
        _write_evans(buf, samples)
        sys.stdout.write(buf.getvalue())
    else:
        write_evans_csv(args.out, samples)
    if args.summary is not None:
        fit = evans_cubic_fit(prof)
        mu_l, d_l = large_mu_sign(prof)
        _dump_json({"point": {"a": pt.a, "E": pt.E, "c": pt.c, "p": args.p}, "T": prof.T,
                    "mu_scale": mu_scale(prof), "real_roots": real_unstable_roots(prof),
                    "cubic_fit_index": fit.index, "cubic_fit_odd_residual": fit.odd_residual,
                    "trace_identity_index": trace_identity_index(prof),
                    "large_mu": {"mu": mu_l, "D": d_l}}, args.summary)
    return EXIT_OK


def _write_evans(fh, samples):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["mu", "D_real", "D_imag"])
    for s in samples:
        mu = repr(s.mu.real) if s.mu.imag == 0 else repr(s.mu)
        w.writerow([mu, repr(s.value.real), repr(s.value.imag)])


def cmd_profile(args) -> int:
    from .quadrature import conserved_set, uniform_samples

    pt = _point(args)
    cs = conserved_set(pt)
    x, u, ux = uniform_samples(pt, args.n, T=cs.T)
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u", "u_x"])
        for row in zip(x, u, ux):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if close:
            fh.close()
        else:
            fh.detach()
    if args.summary is not None:
        _dump_json({"point": {"a": pt.a, "E": pt.E, "c": pt.c, "p": args.p}, **cs.as_dict()},
                   args.summary)
    return EXIT_OK


def cmd_evolve(args) -> int:
    from . import evolution as ev
    from .quadrature import reconstruct_profile

    pt = _point(args)
    prof = reconstruct_profile(pt, 256)
    T, n = prof.T, args.n_modes
    u = prof.uniform(n)[1]
    if args.perturbation == "none":
        v = np.zeros(n)
    elif args.perturbation == "cos":
        v = ev.cosine_perturbation(n, args.eps, T, args.mode)
    elif args.perturbation == "noise":
        v = ev.noise_perturbation(n, args.eps, T, seed=args.seed, band=args.band_modes)
    else:
        v = ev.phi0_perturbation(pt, n, args.eps)
    if args.project and args.perturbation != "none":
        v = ev.sigma0_perturbation(v, u, abs(args.eps), T)
    cfg = ev.SimConfig(n_modes=n, dt=args.dt, t_end=args.periods * T, dealias=args.dealias,
                       output_every=args.output_every * T, norm=args.norm)
    ser = ev.run_orbit_experiment(pt, v, cfg, profile=prof)
    if args.out is None or args.out == "-":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "rho", "shift", "dM", "dP", "dE"])
        for row in zip(ser.times, ser.rho, ser.shift, ser.dM, ser.dP, ser.dE):
            w.writerow([repr(float(x)) for x in row])
        sys.stdout.write(buf.getvalue())
    else:
        ser.write_csv(args.out)
    if args.summary is not None:
        summ = {"point": {"a": pt.a, "E": pt.E, "c": pt.c, "p": args.p}, "T": T, "dt": ser.dt,
                "n_modes": n, "perturbation_norm": ser.perturbation_norm, "rho0": ser.rho[0],
                "rho_max": max(ser.rho), "amplification": ser.amplification(),
                "conserved_drift": list(ser.conserved_drift)}
        if args.growth:
            try:
                g = ev.fit_growth(ser)
                summ["growth"] = {"rate": g.rate, "t_window": list(g.t_window), "residual": g.residual}
            except ValueError as exc:
                summ["growth"] = {"error": str(exc)}
        _dump_json(summ, args.summary)
    return EXIT_OK


def cmd_cnoidal(args) -> int:
    from .kdv import cnoidal, cnoidal_from_modulus
    from .potential import Nonlinearity, ParamPoint, analyze_phase_plane
    from .quadrature import conserved_set

    if (args.k is None) == (args.E is None):
        print("give exactly one of --k and --E", file=sys.stderr)
        return EXIT_FAIL
    if args.k is not None:
        if not 0.0 <= args.k < 1.0:
            raise NotInOmega("modulus must lie in [0, 1)")
        pt = cnoidal_from_modulus(args.k, c=args.c, a=args.a)
    else:
        pt = ParamPoint(args.a, args.E, args.c, Nonlinearity.power_law(1))
    if not analyze_phase_plane(pt).in_omega:
        raise NotInOmega(f"(a, E, c) = ({pt.a}, {pt.E}, {pt.c}) is not in Omega")
    cp = cnoidal(pt)
    an = cp.conserved()
    cs = conserved_set(pt)
    _dump_json({
        "point": {"a": pt.a, "E": pt.E, "c": pt.c},
        "roots": list(cp.roots.roots), "k": cp.k, "kappa": cp.kappa, "u0": cp.u0, "x0": cp.x0,
        "amplitude": cp.amplitude, "wave_speed": cp.wave_speed, "doubled_form": cp.doubled_form(),
        "analytic": an, "quadrature": {q: getattr(cs, q) for q in "TMP"},
        "relative_difference": {q: abs(an[q] / getattr(cs, q) - 1.0) for q in "TMP"},
    }, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .quadrature import tampered_action
    from .verify import run_suites

    import contextlib

    ctx = tampered_action(args.tamper_action) if args.tamper_action else contextlib.nullcontext()
    with ctx:
        results = run_suites(args.level)
    for r in results:
        print(r.line(), flush=True)
    ok = all(r.passed for r in results)
    print(f"{'ALL PASS' if ok else 'FAILURES'}: {sum(r.passed for r in results)}/{len(results)} suites")
    if args.out is not None:
        _dump_json({"level": args.level, "passed": ok, "suites": [r.to_dict() for r in results]}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "evans": cmd_evans, "profile": cmd_profile,
            "evolve": cmd_evolve, "cnoidal": cmd_cnoidal, "verify": cmd_verify}


_NEGATIVE_VALUE = re.compile(r"^-(\d|\.\d)")


def _glue_negative_values(argv: list) -> list:
    """Join ``--opt -0.1,-0.05`` into ``--opt=-0.1,-0.05``.

    argparse only accepts a plain negative number as an option value; grid
    values such as ``-0.1:-0.01:5`` would otherwise be read as options.
    """
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        try:
            args = _apply_config(ap, argv, args)
        except OSError as exc:
            ap.error(f"cannot read config: {exc}")
    try:
        return COMMANDS[args.command](args)
    except NotInOmega as exc:
        print(f"not in Omega: {exc}", file=sys.stderr)
        return EXIT_OMEGA
    except UncertainSign as exc:
        print(f"uncertain sign: {exc}", file=sys.stderr)
        return EXIT_UNCERTAIN
    except GkdvError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
