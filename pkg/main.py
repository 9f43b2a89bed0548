"""Command-line front end.

    python main.py verify hopf_s3
    python main.py verify my_manifold.toml --json report.jsonl
    python main.py product "darboux(1)" "darboux(1)" --component neg
    python main.py period 6 4
    python main.py prequant darboux-data H="q"

Exit codes: 0 all checks pass, 1 a check failed, 2 input error.
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence, Tuple

from config import get_settings
from graph.nodes import INPUT_ERRORS, is_manifold_file
from graph.workflow import graph
from services.calculus_service import VectorFieldHandle
from services.catalog_service import ExampleDescriptor, catalog_service
from services.contact_service import CheckReport, ContactError, is_contact
from services.expression_service import parse
from services.prequant_service import (
    EquivariantFunction,
    PrequantError,
    calibrate_signs,
    curvature_residual,
    dirac_residual,
    prequantum_op,
)
from services.products_service import (
    PrincipalPeriodPair,
    ProductError,
    RankDeficiencyError,
    check_legendrian,
    contact_product,
    distribution_witness,
    graph_c,
    principal_product_period,
    reeb_translation,
    torus_first_return,
)
from services.manifold_file_service import manifold_file_service
from services.report_service import Report, digest_text, report_service, stopwatch

logger = logging.getLogger("contact")

EXIT_OK, EXIT_INPUT = 0, 2


class InputError(Exception):
    pass


def _grid(text: str) -> Tuple[int, int]:
    try:
        n1, n2 = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--grid takes n1,n2, got {text!r}") from None
    if min(n1, n2) < 8:
        raise argparse.ArgumentTypeError("--grid needs at least 8 nodes per axis")
    return n1, n2


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--samples", type=int, default=settings.samples, help="sample points per check")
    common.add_argument("--seed", type=int, default=settings.seed)
    common.add_argument("--tol", type=float, default=None, help="override every check's tolerance")
    common.add_argument("--step", type=float, default=settings.rk4_step, help="RK4 step h")
    common.add_argument("--horizon", type=float, default=settings.period_horizon, help="period search horizon")
    common.add_argument("--grid", type=_grid, default=None, help="quadrature grid n1,n2")
    common.add_argument("--json", metavar="PATH", default=None, help="write JSON lines to PATH ('-' for stdout)")
    common.add_argument("--timing", action="store_true", help="include timings in the JSON report")
    common.add_argument("--log-level", default=settings.log_level)

    parser = argparse.ArgumentParser(prog="contact", description="Verify contact geometry constructions on charts.")
    commands = parser.add_subparsers(dest="command", required=True)

    verify = commands.add_parser("verify", parents=[common], help="run the verification suite on one target")
    verify.add_argument("target", help="catalog id (hopf_s3, darboux(2), ...) or manifold file")

    product = commands.add_parser("product", parents=[common], help="contact product of two targets")
    product.add_argument("first")
    product.add_argument("second")
    product.add_argument("--component", choices=("pos", "neg"), default="pos", help="sign of the product t")

    period = commands.add_parser("period", parents=[common], help="period of a principal product")
    period.add_argument("rho1", help="exact rational period, or inf")
    period.add_argument("rho2")

    prequant = commands.add_parser("prequant", parents=[common], help="prequantum operator checks")
    prequant.add_argument("target")
    prequant.add_argument("assignment", nargs="?", default=None, help='H="expression" (same as --hamiltonian)')
    prequant.add_argument("--hamiltonian", default=None)
    prequant.add_argument("--partner", default=None, help="second function for the Dirac relation")
    return parser


def resolve(target: str) -> Tuple[ExampleDescriptor, str]:
    if is_manifold_file(target):
        return manifold_file_service.load(target)
    descriptor = catalog_service.load(target)
    return descriptor, digest_text(descriptor.id)


def _row(args, check: str, target: str, digest: str, report: CheckReport, elapsed: float, detail: str = "") -> Report:
    return report_service.from_check(report, target, digest, args.seed, args.tol, name=check, detail=detail, timing=elapsed)


def emit(args, reports: List[Report]) -> int:
    if args.json:
        report_service.write_jsonl(reports, args.json, args.timing)
    if args.json != "-":
        print(report_service.table(reports, args.timing))
    return report_service.exit_code(reports)


# Commands


def cmd_verify(args) -> int:
    state = graph.invoke(
        {
            "target": args.target,
            "samples": args.samples,
            "seed": args.seed,
            "tol": args.tol,
            "step": args.step,
            "horizon": args.horizon,
            "grid": args.grid,
            "reports": [],
        }
    )
    if state.get("error"):
        raise InputError(state["error"])
    return emit(args, state["reports"])


def cmd_product(args) -> int:
    first, digest1 = resolve(args.first)
    second, digest2 = resolve(args.second)
    if first.contact is None or second.contact is None:
        raise InputError("contact products need two contact targets")
    target = f"{first.id} x {second.id} ({args.component})"
    digest = digest_text(f"{digest1}:{digest2}:{args.component}")
    reports: List[Report] = []

    with stopwatch() as elapsed:
        product = contact_product(first.contact, second.contact, args.component)
        contact = is_contact(product.eta, args.samples, args.seed)
    reports.append(
        Report(
            check="product_contact",
            target=target,
            input_digest=digest,
            seed=args.seed,
            samples=contact.samples,
            max_residual=contact.min_volume,
            tolerance=contact.threshold,
            passed=contact.passed,
            detail="min |η∧(dη)ⁿ/n!|, must exceed the threshold",
            timing=elapsed[0],
        )
    )
    if not contact.passed:
        return emit(args, reports)

    with stopwatch() as elapsed:
        checks = product.reeb_checks(args.samples, args.seed)
    for name, check in checks.items():
        reports.append(_row(args, name, target, digest, check, elapsed[0] / len(checks)))
    with stopwatch() as elapsed:
        check = product.kernel_agreement(args.samples, args.seed)
    reports.append(_row(args, "kernel_agreement", target, digest, check, elapsed[0], "ker η = ker η′"))

    with stopwatch() as elapsed:
        misses = []
        for point in product.sample(min(args.samples, 20), args.seed):
            try:
                distribution_witness(product, point)
                misses.append(0.0)
            except RankDeficiencyError:
                misses.append(1.0)
        check = CheckReport(check="distribution", max_residual=max(misses), tolerance=0.5, samples=len(misses), passed=max(misses) < 0.5)
    reports.append(_row(args, "distribution", target, digest, check, elapsed[0], "rank of C₁ ⊕ C₂ ⊕ ⟨R₁ − tR₂, ∂t⟩"))

    if first.chart == second.chart:
        with stopwatch() as elapsed:
            graph_product = product if args.component == "neg" else contact_product(first.contact, second.contact, "neg")
            phi = reeb_translation(first.contact)
            check = check_legendrian(graph_product, graph_c(graph_product, phi, 1.0), min(args.samples, 100), args.seed)
        reports.append(_row(args, "legendrian", target, digest, check, elapsed[0], "graph of a Reeb translation"))
    else:
        logger.info("factors differ; no Legendrian graph fixture")
    return emit(args, reports)


def cmd_period(args) -> int:
    pair = PrincipalPeriodPair.of(args.rho1, args.rho2)
    rho = principal_product_period(args.rho1, args.rho2)
    if pair.k is None:
        line = f"ρ = {rho}"
    else:
        line = f"ρ = {rho}, k = {pair.k}, l = {pair.l}"
    if args.json != "-":
        print(line)
    if pair.k is None:
        return EXIT_OK

    with stopwatch() as elapsed:
        torus = torus_first_return(1 / pair.rho1, 1 / pair.rho2)
    miss = float(abs(torus - rho))
    report = Report(
        check="period_torus",
        target=f"{args.rho1} {args.rho2}",
        input_digest=digest_text(f"{pair.rho1}:{pair.rho2}"),
        seed=args.seed,
        samples=1,
        max_residual=miss,
        tolerance=0.0 if args.tol is None else args.tol,
        passed=torus == rho if args.tol is None else miss < args.tol,
        detail=f"torus first return {torus}",
        timing=elapsed[0],
    )
    return emit(args, [report])


def _hamiltonian(args) -> str:
    if args.hamiltonian is not None:
        return args.hamiltonian
    if args.assignment is not None:
        name, _, value = args.assignment.partition("=")
        if name.strip() != "H" or not value:
            raise InputError(f'expected H="expression", got {args.assignment!r}')
        return value.strip().strip("\"'")
    raise InputError("prequant needs a Hamiltonian: H=\"...\" or --hamiltonian")


def cmd_prequant(args) -> int:
    descriptor, digest = resolve(args.target)
    data = descriptor.principal
    if data is None:
        raise InputError(f"{descriptor.id} carries no principal contact data")
    base = data.base
    h = parse(_hamiltonian(args), base.coordinates)
    g = parse(args.partner, base.coordinates) if args.partner else parse(base.coordinates[1], base.coordinates)
    digest = digest_text(f"{digest}:{h}:{g}")
    profile = parse(" + ".join(f"{c}^2" for c in base.coordinates), base.coordinates)
    section = EquivariantFunction.from_base(data, parse(f"exp(-({profile})/4)", base.coordinates))
    points = data.sample(min(args.samples, 20), args.seed)
    reports: List[Report] = []

    signs = calibrate_signs(data, points[0])
    detail = f"curvature {signs['curvature']:+d}, dirac {signs['dirac']:+d}"

    with stopwatch() as elapsed:
        result = prequantum_op(h, section, data)
    reports.append(_row(args, "prequant_equivariance", descriptor.id, digest, result.equivariance, elapsed[0], "Ĥψ stays equivariant"))

    with stopwatch() as elapsed:
        miss = dirac_residual(h, g, section, data, points, signs["dirac"])
    check = CheckReport(check="dirac", max_residual=miss, tolerance=1e-3, samples=len(points), passed=miss < 1e-3)
    reports.append(_row(args, "dirac", descriptor.id, digest, check, elapsed[0], detail))

    x = VectorFieldHandle.coordinate(base, base.coordinates[0])
    y = VectorFieldHandle.coordinate(base, base.coordinates[1])
    with stopwatch() as elapsed:
        miss = curvature_residual(x, y, section, data, points, signs["curvature"])
    check = CheckReport(check="curvature", max_residual=miss, tolerance=1e-4, samples=len(points), passed=miss < 1e-4)
    reports.append(_row(args, "curvature", descriptor.id, digest, check, elapsed[0], detail))
    return emit(args, reports)


COMMANDS = {"verify": cmd_verify, "product": cmd_product, "period": cmd_period, "prequant": cmd_prequant}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (InputError, ContactError, ProductError, PrequantError, *INPUT_ERRORS) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
