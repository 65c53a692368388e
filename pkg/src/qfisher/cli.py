"""Command-line front end.

Every command prints one JSON report on standard output::

    {"command": ..., "argv": [...], "inputs": {...}, "results": {...},
     "warnings": [...], "version": ...}

Numbers carry 12 significant digits; complex matrices are nested
``[re, im]`` pairs. Warnings go to the report and to standard error, never
to standard output as free text. Exit status: 0 success, 2 bad input or
unreadable files, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import geometry, mc, measure, modelfile, multiparam, qfi
from .errors import ModelFileError, NumericalError, QFisherError, ValidationError
from ._version import __version__ as VERSION
from .sld import lyapunov_residual, sld_eigen, sld_unitary
from .statemodel import PurePathFamily, UnitaryFamily, as_point

DIGITS = 12

log = logging.getLogger("qfisher")


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return float(f"{x:.{DIGITS}g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if np.all(obj.imag == 0):
                return _jsonable(obj.real)
            return _jsonable(np.stack([obj.real, obj.imag], axis=-1).tolist())
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    return obj


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class Context:
    """Resolved inputs of one invocation and their digests."""

    def __init__(self, args):
        self.args = args
        self.files: dict[str, dict] = {}

    def _file(self, role: str, ref: str) -> Path:
        if ref.startswith("bundled:"):
            path = modelfile.bundled_path(ref.split(":", 1)[1])
        else:
            path = Path(ref)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise ModelFileError(f"{role} file not found: {ref}") from None
        except OSError as exc:
            raise ModelFileError(f"cannot read {role} file {ref}: {exc.strerror}") from None
        self.files[role] = {"path": ref, "sha256": hashlib.sha256(data).hexdigest()}
        return path

    def family(self):
        if not self.args.model:
            raise ValidationError("--model is required for this command")
        return modelfile.load_family(self._file("model", self.args.model))

    def povm(self, fam=None, required=True):
        ref = getattr(self.args, "povm", None)
        if ref is None:
            if required:
                raise ValidationError("--povm is required for this command")
            return None
        if ref == "computational":
            self.files["povm"] = {"path": ref, "sha256": None}
            return measure.POVM.computational(fam.dim)
        return modelfile.load_povm(self._file("povm", ref))

    def prior(self):
        if not self.args.prior:
            raise ValidationError("--prior is required for this command")
        return modelfile.load_prior(self._file("prior", self.args.prior))

    def point(self, fam):
        if self.args.lam is None:
            raise ValidationError("--lambda is required for this command")
        return as_point(self.args.lam, fam.nparams)

    def digest(self, command: str) -> dict:
        opts = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "command")}
        blob = json.dumps({"command": command, "options": opts, "files": self.files},
                          sort_keys=True, default=str)
        return {"files": self.files, "options": opts,
                "sha256": hashlib.sha256(blob.encode()).hexdigest()}


# commands -------------------------------------------------------------------

def cmd_qfi(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    rep = qfi.qfi_scalar(fam, lam)
    rho = fam.evaluate(lam)
    drho = fam.derivative(lam)
    tr_rho_l2, tr_drho_l = qfi.qfi_sld_forms(rho, drho)
    out = {"H": rep.H, "method": rep.method, "tr_rho_L2": tr_rho_l2, "tr_drho_L": tr_drho_l,
           "basis_free": qfi.qfi_basis_free(rho, drho)}
    if isinstance(fam, UnitaryFamily):
        out["H_unitary"] = qfi.qfi_unitary(fam).H
        out["generator_variance"] = qfi.generator_variance(fam)
    if isinstance(fam, PurePathFamily):
        out["H_pure"] = qfi.qfi_pure(fam, lam).H
    if ctx.args.decompose:
        dec = qfi.qfi_decomposed(fam, lam)
        out["classical_part"] = dec.classical_part
        out["quantum_part"] = dec.quantum_part
    return out


def cmd_sld(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    rho = fam.evaluate(lam)
    drho = fam.derivative(lam, ctx.args.param)
    op = sld_eigen(rho, drho)
    out = {"L": op.op, "support_rank": op.support_rank,
           "lyapunov_residual": lyapunov_residual(op, rho, drho),
           "eigenvalues": np.linalg.eigvalsh(op.op)}
    if isinstance(fam, UnitaryFamily):
        out["L_unitary"] = sld_unitary(fam, lam).op
    return out


def cmd_povm_fisher(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    povm = ctx.povm(fam)
    h = qfi.qfi_scalar(fam, lam).H
    f = measure.classical_fisher(fam, povm, lam)
    return {"F": f, "H": h, "F_over_H": f / h if h > 0 else None,
            "labels": list(povm.labels),
            "probabilities": measure.born_probs(fam.evaluate(lam), povm)}


def cmd_optimal_povm(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    povm = measure.optimal_povm(fam, lam)
    rho = fam.evaluate(lam)
    L = sld_eigen(rho, fam.derivative(lam)).op
    return {"labels": list(povm.labels), "elements": list(povm.elements),
            "F": measure.classical_fisher(fam, povm, lam), "H": qfi.qfi_scalar(fam, lam).H,
            "saturation_defect": measure.saturation_defect(rho, povm, L)}


def cmd_estimator(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    est = measure.optimal_estimator(fam, lam)
    mean, var = measure.estimator_moments(fam.evaluate(lam), est)
    return {"O": est.op, "at_lambda": est.at_lambda, "H": est.H, "mean": mean,
            "variance": var, "inverse_H": 1.0 / est.H}


def cmd_qfi_matrix(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    H = multiparam.qfi_matrix(fam, lam).H
    return {"H": H, "eigenvalues": np.linalg.eigvalsh(H)}


def cmd_crb(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    H = multiparam.qfi_matrix(fam, lam)
    res = multiparam.crb_bounds(H, ctx.args.measurements)
    return {"H": H.H, "measurements": res.measurements, "variance_bounds": res.variances,
            "covariance_bound": res.covariance, "note": res.note}


def cmd_reparam(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    args = ctx.args
    if (args.jacobian is None) == (args.new_coords is None):
        raise ValidationError("give exactly one of --jacobian or --new-coords")
    if args.jacobian is not None:
        try:
            B = multiparam.Reparam(json.loads(args.jacobian))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--jacobian is not valid JSON: {exc.msg}") from None
    else:
        exprs = [e.strip() for e in args.new_coords.split(";")]
        B = multiparam.Reparam.from_new_of_old(exprs, lam)
    H = multiparam.qfi_matrix(fam, lam)
    Ht = multiparam.reparametrize(H, B)
    return {"H": H.H, "B": B.B, "H_new": Ht.H, "measurements": args.measurements,
            "first_coordinate_bound": multiparam.first_coordinate_bound(Ht, args.measurements)}


def cmd_bures_check(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    rep = geometry.bures_metric_check(fam, lam, ctx.args.step, ctx.args.param)
    for note in rep.warnings:
        warnings.warn(note)
    return {"step": ctx.args.step, "param": ctx.args.param, "fidelity": rep.fidelity,
            "bures_sq": rep.bures_sq, "metric_fd": rep.metric_fd, "qfi_quarter": rep.qfi_quarter,
            "rel_err": rep.rel_err, "metric_step": rep.metric_step,
            "metric_half_step": rep.metric_half_step}


def cmd_estimability(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    if fam.nparams != 1:
        raise ValidationError("estimability needs a one-parameter family")
    h = qfi.qfi_scalar(fam, lam).H
    est = qfi.estimability(lam[0], h)
    m = est.measurements(ctx.args.delta)
    return {"H": h, "Q": est.Q, "delta": ctx.args.delta,
            "measurements": int(m) if math.isfinite(m) else m}


def cmd_van_trees(ctx: Context) -> dict:
    fam = ctx.family()
    prior = ctx.prior()
    povm = ctx.povm(fam, required=False)
    vt = qfi.van_trees(fam, prior, ctx.args.measurements, povm)
    return {"measurements": ctx.args.measurements, "Z_F": vt.Z_F, "Z_H": vt.Z_H,
            "bound": vt.bound, "prior_information": vt.prior_information,
            "interval": [prior.a, prior.b]}


def cmd_simulate(ctx: Context) -> dict:
    fam = ctx.family()
    lam = ctx.point(fam)
    povm = ctx.povm(fam, required=False)
    if povm is None:
        povm = measure.optimal_povm(fam, lam)
    args = ctx.args
    exp = mc.Experiment(fam, float(lam[0]), povm, args.shots, args.reps, args.seed,
                        tuple(args.interval) if args.interval else None)
    rep = mc.crb_experiment(exp)
    if rep.boundary_hits:
        warnings.warn(f"{rep.boundary_hits} of {args.reps} estimates hit the search interval boundary")
    out = {"true_lambda": exp.true_lambda, "shots": args.shots, "reps": args.reps,
           "seed": args.seed, "interval": list(exp.interval), "povm_labels": list(povm.labels),
           "mean": rep.mean, "bias": rep.bias, "empirical_var": rep.empirical_var, "mse": rep.mse,
           "fisher": rep.fisher, "qfi": rep.qfi, "crb_classical": rep.crb_classical,
           "crb_quantum": rep.crb_quantum, "ratio_to_crb": rep.ratio_to_crb,
           "ratio_to_classical_crb": rep.ratio_to_classical_crb,
           "boundary_hits": rep.boundary_hits, "rng": rep.rng}
    if args.estimates:
        out["estimates"] = rep.estimates
    return out


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfisher", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qfisher {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, func, help, lam=True):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--model", metavar="PATH",
                       help="model file, or bundled:NAME for a shipped example")
        if lam:
            p.add_argument("--lambda", dest="lam", type=_floats, metavar="V1[,V2,...]",
                           help="parameter point")
        p.set_defaults(func=func)
        return p

    p = command("qfi", cmd_qfi, "quantum Fisher information at a point")
    p.add_argument("--decompose", action="store_true",
                   help="also split H into eigenvalue (classical) and eigenvector (quantum) parts")

    p = command("sld", cmd_sld, "symmetric logarithmic derivative at a point")
    p.add_argument("--param", type=int, default=0, help="parameter index (default 0)")

    p = command("povm-fisher", cmd_povm_fisher, "classical Fisher information of a POVM")
    p.add_argument("--povm", metavar="PATH", help="POVM file, or 'computational'")

    command("optimal-povm", cmd_optimal_povm, "SLD eigenprojector measurement")
    command("estimator", cmd_estimator, "optimal locally unbiased estimator observable")
    command("qfi-matrix", cmd_qfi_matrix, "quantum Fisher information matrix")

    p = command("crb", cmd_crb, "per-parameter quantum Cramer-Rao bounds")
    p.add_argument("--measurements", type=int, default=1, help="number of measurements M")

    p = command("reparam", cmd_reparam, "Fisher matrix in new coordinates")
    p.add_argument("--jacobian", metavar="JSON",
                   help="B as a JSON matrix, B[m][n] = d(old n)/d(new m)")
    p.add_argument("--new-coords", metavar="EXPRS",
                   help="new coordinates as ';'-separated expressions in x1..xN (old coordinates)")
    p.add_argument("--measurements", type=int, default=1, help="number of measurements M")

    p = command("bures-check", cmd_bures_check, "compare the Bures metric with a quarter of the QFI")
    p.add_argument("--step", type=float, default=1e-3, help="finite-difference step (default 1e-3)")
    p.add_argument("--param", type=int, default=0, help="parameter index (default 0)")

    p = command("estimability", cmd_estimability, "signal-to-noise ratio and required sample size")
    p.add_argument("--delta", type=float, default=0.1, help="target relative error (default 0.1)")

    p = command("van-trees", cmd_van_trees, "Bayesian (Van Trees) variance bound", lam=False)
    p.add_argument("--prior", metavar="PATH", help="prior file")
    p.add_argument("--povm", metavar="PATH", help="POVM for Z_F (default: optimal, so Z_F = Z_H)")
    p.add_argument("--measurements", type=int, default=1, help="number of measurements M")

    p = command("simulate", cmd_simulate, "Monte-Carlo ML estimation against the Cramer-Rao bounds")
    p.add_argument("--povm", metavar="PATH", help="POVM file (default: optimal POVM at the true value)")
    p.add_argument("--shots", type=int, default=1000, help="measurements per repetition M")
    p.add_argument("--reps", type=int, default=500, help="repetitions R")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")
    p.add_argument("--interval", type=_floats, metavar="LO,HI",
                   help="ML search interval (default: the model's declared range)")
    p.add_argument("--estimates", action="store_true", help="include every estimate in the report")
    return parser


def run(argv: list[str] | None = None, stdout=None) -> int:
    """Run one command; the report goes to ``stdout``. Returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    ctx = Context(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            results = args.func(ctx)
        except ValidationError as exc:
            print(f"qfisher {args.command}: error: {exc}", file=sys.stderr)
            return 2
        except NumericalError as exc:
            print(f"qfisher {args.command}: numerical failure: {exc}", file=sys.stderr)
            return 3
        except QFisherError as exc:  # pragma: no cover - every error is one of the two above
            print(f"qfisher {args.command}: error: {exc}", file=sys.stderr)
            return 3
    notes = list(dict.fromkeys(str(w.message) for w in caught))
    for note in notes:
        log.warning(note)
    report = {
        "command": args.command,
        "argv": argv,
        "inputs": ctx.digest(args.command),
        "results": results,
        "warnings": notes,
        "version": VERSION,
    }
    json.dump(_jsonable(report), stdout, indent=2)
    stdout.write("\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="qfisher: warning: %(message)s", stream=sys.stderr)
    try:
        return run(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
