"""Command-line front end.

Machine-readable results go to standard output as JSON; notes for humans go to
standard error.  Exit status is 2 for invalid input, 1 when a ``compare``
verdict fails and 0 otherwise.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import decision, lborder, moral_hazard, screening
from .errors import LBError, NoFeasibleMechanism, ZeroBaseDensity
from .experiment import (
    FiniteExperiment,
    GridExperiment,
    Prior,
    apply_garbling,
    dichotomy_reduce,
    discretize,
    mixture,
    product,
)
from .io import (
    experiment_to_dict,
    load_decision_problem,
    load_dichotomy,
    load_experiment,
    load_garbling,
    load_mh_env,
    load_screening_env,
    save_experiment,
)
from .numerics import TOL

ORDERS = ("lb", "lb-sampled", "mpe", "blackwell", "equiv")


class UsageError(Exception):
    """Invalid command-line values detected after parsing."""


def _finite(E) -> FiniteExperiment:
    return discretize(E) if isinstance(E, GridExperiment) else E


def _number(x):
    """JSON-safe float: infinities become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _vector_arg(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from exc


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _note(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_compare(args) -> int:
    F, G = load_experiment(args.first), load_experiment(args.second)
    if args.order == "lb-sampled":
        payload = lborder.lb_sampled(F, G, args.resolution, seed=args.seed).to_dict()
    elif args.order == "equiv":
        F, G = _finite(F), _finite(G)
        forward, backward = lborder.lb_exact(F, G), lborder.lb_exact(G, F)
        payload = (backward if forward.holds else forward).to_dict()
        payload["holds"] = forward.holds and backward.holds
        payload["forward"] = forward.to_dict()
        payload["backward"] = backward.to_dict()
    else:
        check = {
            "lb": lborder.lb_exact,
            "mpe": lborder.mpe_check,
            "blackwell": lborder.blackwell_check,
        }[args.order]
        payload = check(_finite(F), _finite(G)).to_dict()
    _emit(payload)
    _note(f"{args.order}: {'holds' if payload['holds'] else 'fails'} (margin {payload['margin']:.6g})")
    return 0 if payload["holds"] else 1


def cmd_zonoid(args) -> int:
    F = _finite(load_experiment(args.experiment))
    if args.directions < 1:
        raise UsageError("--directions must be positive")
    dirs = lborder.hemisphere_sample(F.n_states, args.directions, seed=args.seed)
    _emit({
        "states": list(F.states.labels),
        "directions": dirs.tolist(),
        "support": np.atleast_1d(lborder.zonoid_support(F, dirs)).tolist(),
    })
    return 0


def _prior(text: str, n_states: int) -> Prior:
    if text == "uniform":
        return Prior.uniform(n_states)
    q = _vector_arg(text, "prior")
    if q.size == n_states:
        q = q[1:]
    if q.size != n_states - 1:
        raise UsageError(f"--prior: expected {n_states - 1} or {n_states} numbers")
    return Prior(q)


def cmd_value(args) -> int:
    dp = load_decision_problem(args.problem)
    F = _finite(load_experiment(args.experiment))
    q = _prior(args.prior, F.n_states)
    v = decision.ex_ante_value(dp, F, q)
    prior_value, _ = decision.value(dp, q)
    _emit({"value": v, "prior_value": prior_value, "prior": q.full().tolist()})
    return 0


def cmd_qcc(args) -> int:
    dp = load_decision_problem(args.problem)
    cert = decision.is_qcc(dp)
    _emit({
        "qcc": cert.holds,
        "triple": None if cert.triple is None else list(cert.triple),
        "belief": None if cert.belief is None else cert.belief.tolist(),
        "margin": cert.margin,
        "lsc": decision.is_lsc(dp),
    })
    return 0


def cmd_mh(args) -> int:
    env = load_mh_env(args.environment)
    F = _finite(load_experiment(args.experiment))
    delta = _vector_arg(args.target, "target") if args.target else np.zeros(env.n)
    sol = moral_hazard.min_disutility(env, F, delta)
    out = {"implementable": not isinstance(sol, float)}
    if isinstance(sol, float):
        out.update(disutility=None, scheme=None, binding=[])
    else:
        out.update(disutility=sol.disutility, scheme=sol.w.tolist(), binding=sorted(sol.binding))
    try:
        dual = moral_hazard.dual_solve(env, F, delta)
        out["dual_bound"] = _number(dual.value)
    except ZeroBaseDensity as exc:
        out["dual_bound"] = None
        _note(f"dual bound unavailable: {exc}")
    _emit(out)
    return 0


def cmd_screen(args) -> int:
    env = load_screening_env(args.environment)
    F = _finite(load_experiment(args.experiment))
    try:
        mech = screening.optimal_mechanism(env, F, limit=args.limit)
    except NoFeasibleMechanism as exc:
        _note(str(exc))
        _emit({"value": None, "rule": None, "transfers": None})
        return 0
    _emit({
        "value": mech.value,
        "rule": list(mech.rule.choice),
        "transfers": mech.transfers.t.tolist(),
    })
    _note("value is the best deterministic mechanism (a lower bound on the supremum)")
    return 0


def cmd_transform(args) -> int:
    F = _finite(load_experiment(args.experiment))
    if args.product or args.mix is not None:
        if args.other is None:
            raise UsageError("a second experiment is required for --product and --mix")
        G = _finite(load_experiment(args.other))
        out = product(F, G) if args.product else mixture(F, G, args.mix)
    elif args.dichotomy:
        out = dichotomy_reduce(F, load_dichotomy(args.dichotomy, F))
    else:
        out = apply_garbling(F, load_garbling(args.garble))
    if args.output:
        save_experiment(out, args.output)
        _note(f"wrote {args.output}")
    else:
        _emit(experiment_to_dict(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbrank", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="seed of the hemisphere sampler")
    parser.add_argument("--tol", type=float, default=None, help="feasibility tolerance (default 1e-8)")
    # the global flags are also accepted after the verb
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=lambda **kw: argparse.ArgumentParser(parents=[common], **kw))

    p = sub.add_parser("compare", help="decide an order between two experiments")
    p.add_argument("--order", choices=ORDERS, default="lb")
    p.add_argument("--resolution", type=int, default=2000, help="sample size for lb-sampled")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("zonoid", help="support function samples on the hemisphere")
    p.add_argument("--directions", type=int, default=200)
    p.add_argument("experiment")
    p.set_defaults(func=cmd_zonoid)

    p = sub.add_parser("value", help="ex ante value of a decision problem")
    p.add_argument("problem")
    p.add_argument("experiment")
    p.add_argument("--prior", default="uniform", help="'uniform' or comma-separated probabilities")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("qcc", help="classify a decision problem")
    p.add_argument("problem")
    p.set_defaults(func=cmd_qcc)

    p = sub.add_parser("mh", help="moral-hazard implementation cost")
    p.add_argument("environment")
    p.add_argument("experiment")
    p.add_argument("--target", default=None, help="comma-separated delta_1..delta_n (default 0)")
    p.set_defaults(func=cmd_mh)

    p = sub.add_parser("screen", help="optimal deterministic screening mechanism")
    p.add_argument("environment")
    p.add_argument("experiment")
    p.add_argument("--limit", type=int, default=4096)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("transform", help="write a derived experiment")
    p.add_argument("experiment")
    p.add_argument("other", nargs="?")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--product", action="store_true")
    group.add_argument("--mix", type=float, metavar="T")
    group.add_argument("--dichotomy", metavar="D.json")
    group.add_argument("--garble", metavar="K.json")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_transform)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    saved = TOL.feasibility
    if args.tol is not None:
        if not args.tol > 0:
            _note("error: --tol must be positive")
            return 2
        TOL.feasibility = args.tol
    try:
        return args.func(args)
    except (LBError, UsageError) as exc:
        _note(f"error: {exc}")
        return 2
    finally:
        TOL.feasibility = saved


def main() -> None:
    sys.exit(run())
