"""Command-line front end.

Exit status: 0 on success, 2 when an input fails validation, 3 when a
computation exceeds its budget (partial outputs of that run are removed).
Every command that writes files also writes ``manifest.json`` recording its
arguments, seed and the SHA-256 digests of inputs and outputs.
"""
from __future__ import annotations

import argparse
import contextlib
import io
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import substream
from .assignments import (
    ObservableAssignment,
    PvmAssignment,
    eval_csp_value,
    eval_labelcover_value,
    eval_lin_observable_value,
    labeling_to_assignment,
    planted_assignment,
    validate_assignment,
)
from .config import BUDGET, BudgetExceededError
from .instances import (
    LabelCoverInstance,
    LinInstance,
    brute_force_classical_value,
    generate_planted_ulc,
    generate_random_ulc,
    validate_instance,
)
from .operators import NonCommutingError
from .reductions import (
    fold_2lin,
    fold_assignment,
    lift_completeness_2lin,
    lift_completeness_maxcut,
    reduce_ulc_to_2lin,
    reduce_ulc_to_maxcut,
    unfold_assignment,
)
from .sdp import SdpNotConvergedError, gw_round, interval_csv, interval_report, relaxation_value, solve_maxcut_sdp, tsirelson_assignment
from .serialization import (
    assignment_from_dict,
    assignment_to_dict,
    certificate_to_dict,
    dumps,
    instance_from_dict,
    instance_to_dict,
    read_json,
    sha256_bytes,
)
from .soundness import MaxCutParams, TwoLinParams, run_soundness_pipeline


class ValidationFailure(Exception):
    """Input rejected; maps to exit status 2."""


class Run:
    """Output bookkeeping for one command invocation."""

    def __init__(self, command: str, args: argparse.Namespace, argv: list[str]):
        self.command = command
        self.out_dir = Path(args.out_dir)
        self.argv = argv
        self.seed = args.seed
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.created: list[Path] = []
        self.params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out_dir")}

    def read_input(self, path) -> dict:
        p = Path(path)
        try:
            data = p.read_bytes()
        except OSError as exc:
            raise ValidationFailure(f"cannot read {p}: {exc}") from exc
        self.inputs[str(path)] = sha256_bytes(data)
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"{p} is not valid JSON: {exc}") from exc

    def _write(self, name: str, data: bytes) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_bytes(data)
        self.created.append(path)
        self.outputs[name] = sha256_bytes(data)

    def write_json(self, name: str, obj) -> None:
        self._write(name, dumps(obj).encode())

    def write_text(self, name: str, text: str) -> None:
        self._write(name, text.encode())

    def finish(self) -> None:
        if not self.outputs:
            return
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "params": self.params,
            "version": __version__,
            "inputs": self.inputs,
            "outputs": dict(self.outputs),
        }
        self._write("manifest.json", dumps(manifest).encode())

    def discard(self) -> None:
        for path in self.created:
            path.unlink(missing_ok=True)


def _instance(run: Run, path):
    try:
        inst = instance_from_dict(run.read_input(path))
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc
    verdict = validate_instance(inst)
    if not verdict:
        raise ValidationFailure("invalid instance: " + "; ".join(verdict.violations))
    return inst


def _ulc(run: Run, path) -> LabelCoverInstance:
    inst = _instance(run, path)
    if not isinstance(inst, LabelCoverInstance) or not inst.unique:
        raise ValidationFailure("expected a unique Label-Cover instance")
    return inst


def _lin(run: Run, path) -> LinInstance:
    inst = _instance(run, path)
    if not isinstance(inst, LinInstance) or inst.arity != 2:
        raise ValidationFailure("expected a 2-Lin or MaxCut instance")
    return inst


def _assignment(run: Run, path):
    try:
        return assignment_from_dict(run.read_input(path))
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc


def _source_assignment(run: Run, args, phi: LabelCoverInstance) -> PvmAssignment:
    if args.assignment:
        return _assignment(run, args.assignment)
    _, labeling = brute_force_classical_value(phi, budget=args.budget)
    return labeling_to_assignment(labeling, phi.alphabet)


def _reduction(args, phi):
    if args.kind == "2lin":
        return reduce_ulc_to_2lin(phi, args.eps)
    return reduce_ulc_to_maxcut(phi, args.rho)


def _lift(args, red, pi):
    if args.kind == "2lin":
        return lift_completeness_2lin(red, pi)
    return lift_completeness_maxcut(red, pi)


def _soundness_params(args):
    if args.kind == "2lin":
        return TwoLinParams(args.eps, args.t, args.bt_const)
    return MaxCutParams(args.eps, args.rho, args.delta2, args.k_mis)


def cmd_gen_ulc(run: Run, args) -> None:
    rng = substream(args.seed, "generation")
    if args.planted:
        inst, sigma = generate_planted_ulc(args.left, args.right, args.m, args.density, rng)
        run.write_json("planted_assignment.json", assignment_to_dict(planted_assignment(sigma, args.dimension, rng)))
    else:
        inst = generate_random_ulc(args.left, args.right, args.m, args.density, rng)
    run.write_json("ulc.json", instance_to_dict(inst))


def cmd_reduce(run: Run, args) -> None:
    phi = _ulc(run, args.instance)
    red = _reduction(args, phi)
    run.write_json("psi.json", instance_to_dict(red.psi))
    run.write_json("certificate.json", certificate_to_dict(red))
    if args.kind == "2lin":
        folded = fold_2lin(red)
        run.write_json("psi_folded.json", instance_to_dict(folded.psi))
        run.write_json("certificate_folded.json", certificate_to_dict(folded))


def cmd_fold(run: Run, args) -> None:
    phi = _ulc(run, args.instance)
    folded = fold_2lin(reduce_ulc_to_2lin(phi, args.eps))
    run.write_json("psi_folded.json", instance_to_dict(folded.psi))
    run.write_json("certificate_folded.json", certificate_to_dict(folded))
    if args.assignment:
        asg = _assignment(run, args.assignment)
        if not isinstance(asg, ObservableAssignment):
            raise ValidationFailure("folding acts on observable assignments")
        if args.unfold:
            run.write_json("unfolded_assignment.json", assignment_to_dict(unfold_assignment(folded, asg)))
        else:
            run.write_json("folded_assignment.json", assignment_to_dict(fold_assignment(folded, asg)))


def cmd_lift(run: Run, args) -> None:
    phi = _ulc(run, args.instance)
    pi = _source_assignment(run, args, phi)
    red = _reduction(args, phi)
    alpha = _lift(args, red, pi)
    run.write_json("lift.json", assignment_to_dict(alpha))
    if args.kind == "2lin":
        run.write_json("lift_folded.json", assignment_to_dict(unfold_assignment(fold_2lin(red), alpha)))


def _evaluate(inst, asg) -> float:
    if isinstance(asg, ObservableAssignment):
        if not isinstance(inst, LinInstance):
            raise ValidationFailure("observable assignments need a k-Lin instance")
        return eval_lin_observable_value(inst, asg)
    if isinstance(inst, LabelCoverInstance):
        return eval_labelcover_value(inst, asg)
    return eval_csp_value(inst, asg)


def cmd_eval(run: Run, args) -> None:
    inst = _instance(run, args.instance)
    asg = _assignment(run, args.assignment)
    try:
        verdict = validate_assignment(inst, asg)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc
    if not verdict:
        raise ValidationFailure("assignment rejected: " + "; ".join(verdict.failures[:5]))
    value = _evaluate(inst, asg)
    print(f"{value:.12f}")
    print(f"worst commutation defect: {verdict.worst_commutation_defect:.3e} (class {asg.cls})")
    if args.report:
        run.write_json("eval.json", {"value": value, "class": asg.cls, "worst_commutation_defect": verdict.worst_commutation_defect})


def cmd_soundness(run: Run, args) -> None:
    phi = _ulc(run, args.instance)
    alpha = _assignment(run, args.assignment)
    if not isinstance(alpha, ObservableAssignment):
        raise ValidationFailure("soundness needs an observable assignment on the reduced instance")
    red = _reduction(args, phi)
    try:
        verdict = validate_assignment(red.psi, alpha)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc
    if not verdict:
        raise ValidationFailure("assignment rejected: " + "; ".join(verdict.failures[:5]))
    _write_soundness(run, red, alpha, _soundness_params(args))


def _write_soundness(run: Run, red, alpha, params):
    report = run_soundness_pipeline(red, alpha, params)
    run.write_json("soundness.json", report.to_dict())
    run.write_text("soundness_objects.csv", report.edge_csv())
    if report.extracted is not None:
        run.write_json("extracted.json", assignment_to_dict(report.extracted))
    if report.projectivized is not None:
        run.write_json("projectivized.json", assignment_to_dict(report.projectivized))
    return report


def cmd_sdp(run: Run, args) -> None:
    G = _lin(run, args.instance)
    res = solve_maxcut_sdp(G, seed=args.seed)
    print(f"{res.value:.12f}")
    run.write_json("sdp.json", {"value": res.value, "restart_values": res.restart_values, "vectors": res.factor.vectors.tolist()})


def cmd_gw(run: Run, args) -> None:
    G = _lin(run, args.instance)
    res = solve_maxcut_sdp(G, seed=args.seed)
    rounded = gw_round(G, res.factor, args.samples, substream(args.seed, "gw-sampling"))
    print(f"{rounded.mean_value:.12f}")
    run.write_json("gw.json", {
        "omega_sdp": res.value, "mean_cut": rounded.mean_value, "best_cut": rounded.best_value,
        "labeling": rounded.labeling.tolist(), "samples": args.samples,
    })


def cmd_tsirelson(run: Run, args) -> None:
    G = _lin(run, args.instance)
    res = solve_maxcut_sdp(G, seed=args.seed)
    X = tsirelson_assignment(res.factor)
    value = eval_lin_observable_value(G, X)
    print(f"{value:.12f}")
    run.write_json("tsirelson.json", assignment_to_dict(X))
    run.write_json("tsirelson_value.json", {"omega_nc": value, "omega_sdp": relaxation_value(G, res.factor), "dimension": X.dimension})


def cmd_interval(run: Run, args) -> None:
    rows = []
    asg = _assignment(run, args.assignment) if args.assignment else None
    for path in args.instances:
        G = _lin(run, path)
        rep = interval_report(G, asg, seed=args.seed, budget=args.budget)
        rows.append((Path(path).stem, rep))
    run.write_text("interval.csv", interval_csv(rows))
    run.write_json("interval.json", {ident: rep.to_dict() for ident, rep in rows})


def cmd_pipeline(run: Run, args) -> None:
    phi = _ulc(run, args.instance)
    pi = _source_assignment(run, args, phi)
    omega_phi = eval_labelcover_value(phi, pi)
    red = _reduction(args, phi)
    alpha = _lift(args, red, pi)
    run.write_json("psi.json", instance_to_dict(red.psi))
    run.write_json("certificate.json", certificate_to_dict(red))
    run.write_json("source_assignment.json", assignment_to_dict(pi))
    run.write_json("lift.json", assignment_to_dict(alpha))
    if args.kind == "2lin":
        folded = fold_2lin(red)
        alpha_rep = unfold_assignment(folded, alpha)
        run.write_json("psi_folded.json", instance_to_dict(folded.psi))
        run.write_json("lift_folded.json", assignment_to_dict(alpha_rep))
        target, witness = folded.psi, alpha_rep
    else:
        target, witness = red.psi, alpha
    report = _write_soundness(run, red, alpha, _soundness_params(args))
    rep = interval_report(target, witness, seed=args.seed, budget=args.budget)
    run.write_text("interval.csv", interval_csv([("psi", rep)]))
    gap = None if report.omega_projectivized is None else abs(report.omega_projectivized - omega_phi)
    run.write_json("summary.json", {
        "omega_phi": omega_phi,
        "omega_psi": report.omega_psi,
        "omega_extracted": report.omega_extracted,
        "omega_projectivized": report.omega_projectivized,
        "round_trip_gap": gap,
        "interval": rep.to_dict(),
    })
    print(f"omega(phi, Pi)          = {omega_phi:.12f}")
    print(f"omega(psi, lift)        = {report.omega_psi:.12f}")
    if report.omega_projectivized is not None:
        print(f"omega(phi, extracted)   = {report.omega_projectivized:.12f}")


def cmd_replay(run: Run, args) -> None:
    manifest = run.read_input(args.manifest)
    with tempfile.TemporaryDirectory() as tmp:
        code = main(list(manifest["argv"]) + ["--out-dir", tmp], quiet=True)
        if code != 0:
            raise ValidationFailure(f"replayed command exited with status {code}")
        fresh = json.loads((Path(tmp) / "manifest.json").read_text())["outputs"]
    diffs = sorted(k for k in set(fresh) | set(manifest["outputs"]) if fresh.get(k) != manifest["outputs"].get(k))
    if diffs:
        raise ValidationFailure("replay digests differ for: " + ", ".join(diffs))
    print("replay matches: " + ", ".join(sorted(fresh)))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".")
    common.add_argument("--budget", type=int, default=BUDGET.brute_force_labelings, help="brute-force labeling budget")

    red = argparse.ArgumentParser(add_help=False)
    red.add_argument("--kind", choices=("2lin", "maxcut"), default="2lin")
    red.add_argument("--eps", type=float, default=0.1)
    red.add_argument("--rho", type=float, default=-0.5)

    snd = argparse.ArgumentParser(add_help=False)
    snd.add_argument("--t", type=float, default=0.75)
    snd.add_argument("--bt-const", type=float, default=1.0)
    snd.add_argument("--delta2", type=float, default=0.01)
    snd.add_argument("--k-mis", type=int, default=10)

    parser = argparse.ArgumentParser(prog="qcsp", description="Quantum CSP reductions, evaluators and MaxCut intervals.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-ulc", parents=[common], help="generate a random ULC instance")
    p.add_argument("--left", type=int, default=2)
    p.add_argument("--right", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--planted", action="store_true", help="plant a perfect assignment and write it too")
    p.add_argument("--dimension", type=int, default=2)
    p.set_defaults(func=cmd_gen_ulc)

    p = sub.add_parser("reduce", parents=[common, red], help="reduce a ULC instance")
    p.add_argument("instance")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("fold", parents=[common], help="fold the 2-Lin reduction, optionally transporting an assignment")
    p.add_argument("instance")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--assignment")
    p.add_argument("--unfold", action="store_true")
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("lift", parents=[common, red], help="long-code lift of a ULC assignment")
    p.add_argument("instance")
    p.add_argument("--assignment", help="source PVM assignment (default: optimal classical labeling)")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("eval", parents=[common], help="evaluate an assignment")
    p.add_argument("instance")
    p.add_argument("assignment")
    p.add_argument("--report", action="store_true", help="also write eval.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("soundness", parents=[common, red, snd], help="run the soundness extraction")
    p.add_argument("instance")
    p.add_argument("assignment")
    p.set_defaults(func=cmd_soundness)

    for name, func, help_ in (("sdp", cmd_sdp, "vector relaxation value"), ("tsirelson", cmd_tsirelson, "operator witness of the relaxation")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("instance")
        p.set_defaults(func=func)

    p = sub.add_parser("gw", parents=[common], help="hyperplane rounding")
    p.add_argument("instance")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_gw)

    p = sub.add_parser("interval", parents=[common], help="MaxCut interval report for several instances")
    p.add_argument("instances", nargs="+")
    p.add_argument("--assignment")
    p.set_defaults(func=cmd_interval)

    p = sub.add_parser("pipeline", parents=[common, red, snd], help="reduce, lift, extract and report")
    p.add_argument("instance")
    p.add_argument("--assignment")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("replay", parents=[common], help="rerun a manifest and compare digests")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _strip_out_dir(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out-dir":
            skip = True
            continue
        if a.startswith("--out-dir="):
            continue
        out.append(a)
    return out


def main(argv: list[str] | None = None, quiet: bool = False) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    run = Run(args.command, args, _strip_out_dir(argv))
    sink = contextlib.redirect_stdout(io.StringIO()) if quiet else contextlib.nullcontext()
    try:
        with sink:
            args.func(run, args)
        if args.command != "replay":
            run.finish()
    except (BudgetExceededError, SdpNotConvergedError) as exc:
        run.discard()
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (ValidationFailure, ValueError, NonCommutingError) as exc:
        run.discard()
        print(f"validation failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
