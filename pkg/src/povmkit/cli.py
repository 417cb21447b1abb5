"""Command-line interface ``povmkit``.

Every command prints (or writes with ``--out``) one JSON document in the
shared schema of :mod:`povmkit.io`, extended with the command name, the
resolved tolerances and, unless ``--no-timestamp`` is given, a UTC timestamp.
Documents that describe an object (``generate``, ``refine``, ``smear``, ...)
can be fed straight back into other commands.

Exit codes: 0 success, 2 a mathematical invariant failed, 3 a file could not
be parsed, 4 the request is infeasible.
"""
from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from . import generate as gen
from . import io
from .certify import (
    DEFAULT_SEED,
    full_report,
    ic_pure_witness,
    zw_falsifier,
)
from .dilation import minimal_naimark, rank1_refinement, verify_dilation
from .errors import DomainError, InfeasibleRequest, ParseError
from .instrument import Instrument, luders_instrument, nuclear_instrument
from .numerics import DEFAULT_TOL, Tolerances
from .observable import DiscretePovm, State, validate
from .process import KrausChannel, MarkovMatrix, apply_channel, extract_kernel, pvm_preprocessing_channel, smear
from .simulate import simulate, simulate_sequential

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_DOMAIN, EXIT_PARSE, EXIT_INFEASIBLE = 0, 2, 3, 4

_TOL_FLAGS = ("herm_tol", "psd_tol", "id_tol", "rank_rel_tol", "eig_tol", "eigval1_tol")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pairs(text: str) -> list[tuple[int, int]]:
    # "1:1,1:2,2:1"
    out = []
    for item in text.split(","):
        try:
            a, b = item.split(":")
            out.append((int(a), int(b)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"pairs look like 1:2,2:1; got {item!r}") from None
    return out


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tolerances")
    for name in _TOL_FLAGS:
        g.add_argument(f"--tol-{name.removesuffix('_tol').replace('_', '-')}", dest=name, type=float, default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed of the PCG64 generator")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-identical output")
    p.add_argument("--out", "-o", default=None, help="write the document here instead of stdout")


class _Parser(argparse.ArgumentParser):
    # bad command lines are parse failures, not domain failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="povmkit", description="Certify, transform and simulate finite POVMs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check that a file holds a valid POVM")
    p.add_argument("povm")
    _common(p)

    p = sub.add_parser("certify", help="full certificate report of a POVM")
    p.add_argument("povm")
    p.add_argument("--budget", type=_positive_int, default=32_000, help="descent iterations for the witness search")
    p.add_argument("--parallel", action="store_true", help="run witness multistarts in threads")
    _common(p)

    p = sub.add_parser("dilate", help="minimal Naimark dilation")
    p.add_argument("povm")
    _common(p)

    p = sub.add_parser("refine", help="rank-1 refinement")
    p.add_argument("povm")
    _common(p)

    p = sub.add_parser("generate", help="write a POVM, joint observable, state or instrument")
    p.add_argument(
        "family",
        choices=[
            "trine",
            "basis",
            "example71",
            "c3_norm1",
            "c2_joint_blocks",
            "regular_not_norm1",
            "random",
            "random-pvm",
            "state",
            "luders",
            "nuclear",
        ],
    )
    p.add_argument("--d", type=_positive_int, default=2, help="Hilbert space dimension")
    p.add_argument("--n", type=_positive_int, default=None, help="number of outcomes (random)")
    p.add_argument("--ranks", type=_int_list, default=None, help="effect ranks (random), e.g. 1,2,1")
    p.add_argument("--multiplicities", type=_int_list, default=None, help="projection ranks (random-pvm)")
    p.add_argument("--full-grid", action="store_true", help="example71: all d^2 index pairs (default)")
    p.add_argument("--diagonal", action="store_true", help="example71: only the pairs (n, n)")
    p.add_argument("--pairs", type=_pairs, default=None, help="example71: explicit 1-based pairs 1:1,1:2,...")
    p.add_argument("--rank", type=_positive_int, default=None, help="state: rank of a random state")
    p.add_argument("--mixed", action="store_true", help="state: the maximally mixed state")
    p.add_argument("--basis-index", type=int, default=None, help="state: the basis vector |k> (0-based)")
    p.add_argument("--povm", default=None, help="luders/nuclear: POVM file to build the instrument from")
    _common(p)

    p = sub.add_parser("smear", help="post-process with a Markov kernel, or extract one")
    p.add_argument("povm")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--kernel", help="kernel file to apply")
    g.add_argument("--extract", metavar="SECOND", help="find the kernel mapping POVM to SECOND (POVM must be rank-1)")
    _common(p)

    p = sub.add_parser("preprocess", help="pre-process with a channel, or build the channel from a PVM")
    p.add_argument("povm")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--channel", help="Heisenberg channel file applied to the POVM")
    g.add_argument("--from-pvm", metavar="PVM", help="build the channel sending PVM effects to the POVM effects")
    _common(p)

    p = sub.add_parser("simulate", help="sample outcomes of a POVM in a state")
    p.add_argument("povm")
    p.add_argument("state")
    p.add_argument("-n", "--shots", type=_positive_int, default=10_000)
    _common(p)

    p = sub.add_parser("sequential", help="sample an instrument followed by a second POVM")
    p.add_argument("instrument")
    p.add_argument("second")
    p.add_argument("state")
    p.add_argument("-n", "--shots", type=_positive_int, default=10_000)
    _common(p)

    p = sub.add_parser("witness", help="search for a pure-state (or Z_w) witness")
    p.add_argument("povm")
    p.add_argument("--budget", type=_positive_int, default=32_000)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--zw", action="store_true", help="search for a Z_w falsifier instead (rank-1 POVMs only)")
    _common(p)
    return parser


def _tolerances(args) -> Tolerances:
    try:
        return DEFAULT_TOL.with_overrides(**{k: getattr(args, k) for k in _TOL_FLAGS})
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _read(path: str, expected: type, tol: Tolerances):
    obj = io.read(path, tol)
    if not isinstance(obj, expected):
        raise ParseError(f"{path}: expected a {expected.__name__} document, got {type(obj).__name__}")
    return obj


def _cmd_validate(args, tol):
    doc = io.load_document(args.povm)
    if not isinstance(doc, dict) or "effects" not in doc:
        raise ParseError(f"{args.povm}: no 'effects' field")
    mats = [io.decode_matrix(e) for e in doc["effects"]]
    if len({m.shape for m in mats}) != 1:
        raise ParseError(f"{args.povm}: effects have different shapes")
    report = validate(np.stack(mats), tol)
    out = {"valid": report.valid, "report": report.as_dict()}
    return out, (EXIT_OK if report.valid else EXIT_DOMAIN)


def _cmd_certify(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    report = full_report(povm, tol, budget=args.budget, seed=args.seed, parallel=args.parallel)
    return report.as_dict(), EXIT_OK


def _cmd_dilate(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    dil = minimal_naimark(povm, tol)
    return {**io.encode(dil), "residual": verify_dilation(dil, povm)}, EXIT_OK


def _cmd_refine(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    ref = rank1_refinement(povm, tol)
    return {**io.encode(ref.refined), "parent": dict(ref.parent_map)}, EXIT_OK


def _cmd_generate(args, tol):
    fam = args.family
    if fam == "trine":
        return io.encode(gen.gen_trine()), EXIT_OK
    if fam == "basis":
        return io.encode(gen.gen_basis_pvm(args.d)), EXIT_OK
    if fam == "example71":
        if args.pairs is not None:
            index_set = args.pairs
        elif args.diagonal:
            index_set = [(k, k) for k in range(1, args.d + 1)]
        else:
            index_set = None
        return io.encode(gen.gen_example71(gen.Example71Config(args.d, index_set), tol)), EXIT_OK
    if fam in ("c3_norm1", "c2_joint_blocks", "regular_not_norm1"):
        return io.encode(gen.gen_intro_examples()[fam]), EXIT_OK
    if fam == "random":
        n = args.n if args.n is not None else args.d**2
        ranks = args.ranks if args.ranks is not None else 1
        return io.encode(gen.gen_random_povm(args.d, n, ranks, args.seed, tol)), EXIT_OK
    if fam == "random-pvm":
        mult = args.multiplicities if args.multiplicities is not None else [1] * args.d
        return io.encode(gen.gen_random_pvm(sum(mult), mult, args.seed, tol)), EXIT_OK
    if fam == "state":
        if args.mixed:
            state = State.maximally_mixed(args.d)
        elif args.basis_index is not None:
            if not 0 <= args.basis_index < args.d:
                raise InfeasibleRequest(f"basis index {args.basis_index} outside 0..{args.d - 1}")
            state = State.pure(np.eye(args.d)[args.basis_index], tol)
        else:
            state = gen.random_state(args.d, args.rank, args.seed)
        return io.encode(state), EXIT_OK
    # instruments built from a POVM file
    if args.povm is None:
        raise ParseError(f"family {fam!r} needs --povm")
    povm = _read(args.povm, DiscretePovm, tol)
    if fam == "luders":
        return io.encode(luders_instrument(povm, tol)), EXIT_OK
    rng = np.random.default_rng(args.seed)
    states = [gen.random_state(povm.dim, None, rng) for _ in range(povm.n_outcomes)]
    return io.encode(nuclear_instrument(povm, states, tol)), EXIT_OK


def _cmd_smear(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    if args.kernel is not None:
        kernel = _read(args.kernel, MarkovMatrix, tol)
        return io.encode(smear(povm, kernel, tol)), EXIT_OK
    second = _read(args.extract, DiscretePovm, tol)
    fit = extract_kernel(povm, second, tol)
    doc = io.encode(fit.kernel)
    doc.update(residual=fit.residual, is_smearing=fit.is_smearing, iterations=fit.iterations)
    return doc, EXIT_OK


def _cmd_preprocess(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    if args.channel is not None:
        channel = _read(args.channel, KrausChannel, tol)
        return io.encode(apply_channel(channel, povm, tol)), EXIT_OK
    pvm = _read(args.from_pvm, DiscretePovm, tol)
    channel = pvm_preprocessing_channel(pvm, povm, tol)
    image = [channel.heisenberg(p) for p in pvm.effects]
    residual = max(float(np.linalg.norm(a - b, 2)) for a, b in zip(image, povm.effects))
    return {**io.encode(channel), "residual": residual}, EXIT_OK


def _cmd_simulate(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    state = _read(args.state, State, tol)
    return simulate(povm, state, args.shots, args.seed, tol).as_dict(), EXIT_OK


def _cmd_sequential(args, tol):
    inst = _read(args.instrument, Instrument, tol)
    second = _read(args.second, DiscretePovm, tol)
    state = _read(args.state, State, tol)
    return simulate_sequential(inst, second, state, args.shots, args.seed, tol).as_dict(), EXIT_OK


def _cmd_witness(args, tol):
    povm = _read(args.povm, DiscretePovm, tol)
    if args.zw:
        return zw_falsifier(povm, seed=args.seed, tol=tol).as_dict(), EXIT_OK
    if povm.dim < 2:
        raise DomainError("pure-state witnesses need dimension >= 2")
    return ic_pure_witness(povm, args.budget, seed=args.seed, parallel=args.parallel).as_dict(), EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "certify": _cmd_certify,
    "dilate": _cmd_dilate,
    "refine": _cmd_refine,
    "generate": _cmd_generate,
    "smear": _cmd_smear,
    "preprocess": _cmd_preprocess,
    "simulate": _cmd_simulate,
    "sequential": _cmd_sequential,
    "witness": _cmd_witness,
}


def _emit(doc: dict, args) -> None:
    text = io.dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv: Sequence[str] | None = None) -> tuple[int, dict]:
    """Parse ``argv``, run the command and return ``(exit_code, document)`` without printing."""
    return _run(build_parser().parse_args(argv))


def _run(args) -> tuple[int, dict]:
    try:
        tol = _tolerances(args)
        payload, code = _COMMANDS[args.command](args, tol)
    except ParseError as exc:
        return EXIT_PARSE, {"error": "parse", "message": str(exc), "command": args.command}
    except InfeasibleRequest as exc:
        return EXIT_INFEASIBLE, {"error": type(exc).__name__, "message": str(exc), "command": args.command}
    except DomainError as exc:
        return EXIT_DOMAIN, {"error": type(exc).__name__, "message": str(exc), "command": args.command}
    doc = {"schema_version": io.SCHEMA_VERSION, **payload, "command": args.command, "tolerances": tol.as_dict()}
    if not args.no_timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return code, doc


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    code, doc = _run(args)
    if "error" in doc:
        sys.stderr.write(f"povmkit {doc['command']}: {doc['error']}: {doc['message']}\n")
        return code
    _emit(doc, args)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
