"""
The `choquard` command line.

    choquard solve --alpha 1 --sigma 4 --mass 1 --out out/
    choquard moser-scan --moser-n 4 8 16 32
    choquard check-assumptions --sigma 2
    choquard convolve-test --alpha 0.5 --grid-n 256
    choquard verify --field out/field.csv

Values come from the defaults, then the --config file, then the flags. Every
JSON report embeds the effective configuration.
"""
# Standard libraries
import argparse
from dataclasses import asdict, dataclass
import logging
from pathlib import Path
import sys

# Django
from django.core.management.base import CommandError, CommandParser
from django.utils.translation import gettext as _

# Third party
import numpy as np

# choquard-normalized
from choquard_normalized import __version__, conf, io
from choquard_normalized.energy import (
    el_residual,
    evaluate_energy,
    tangential_gradient,
)
from choquard_normalized.exceptions import (
    ChoquardError,
    InvalidArgument,
    UsageError,
)
from choquard_normalized.grid import make_grid
from choquard_normalized.moser import moser_sweep
from choquard_normalized.nonlin import (
    EXP_CRITICAL,
    HYBRID,
    NonlinearityModel,
    check_assumptions,
)
from choquard_normalized.riesz import assemble_kernel, brute_force_oracle, convolve
from choquard_normalized.serializers import (
    COMMANDS,
    AssumptionReportSerializer,
    EnergyBreakdownSerializer,
    GridSerializer,
    MoserScanResultSerializer,
    NonlinearityModelSerializer,
    RunConfigSerializer,
    SolverConfigSerializer,
    SolveResultSerializer,
    VerificationReportSerializer,
)
from choquard_normalized.solver import (
    SolveResult,
    SolverConfig,
    minimize_reduced,
    verify_solution,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 3

NAMESPACES = ("model", "grid", "solver", "output")

CONVOLVE_TOL = 1e-3
CONVOLVE_RADII = 8

COMMAND_DEFAULTS = {
    "solve": {"grid_scheme": "graded", "grid_r": 6.0},
    "verify": {"grid_scheme": "graded", "grid_r": 6.0},
    "moser-scan": {"grid_scheme": "graded", "grid_r": 1.0, "grid_n": 1024},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    variant: str
    alpha: float
    gamma0: float
    beta0: float
    sigma: float
    p: float
    q: float
    s0: float
    mass: float
    grid_n: int
    grid_r: float
    grid_scheme: str
    tol_grad: float
    tol_pohozaev: float
    max_iter: int
    step: float
    profile: str
    metric: str
    moser_n: tuple
    field: str
    out: str
    verbose: bool
    config: str


def build_parser():
    defaults = RunConfigSerializer().fields
    parser = CommandParser(
        prog="choquard",
        description=_("Normalized ground states of planar Choquard equations."),
        called_from_command_line=False,
        argument_default=argparse.SUPPRESS,
    )

    def option(flag, text, **kwargs):
        dest = flag.lstrip("-").replace("-", "_")
        default = defaults[dest].default
        parser.add_argument(
            flag, dest=dest, help="{} (default: {})".format(text, default), **kwargs
        )

    parser.add_argument("command", choices=COMMANDS)
    option("--config", _("JSON configuration file"))
    option("--variant", _("nonlinearity family"))
    option("--alpha", _("Riesz order in (0,2)"), type=float)
    option("--gamma0", _("critical exponent gamma0"), type=float)
    option("--beta0", _("asymptote constant beta0"), type=float)
    option("--sigma", _("exponent sigma in (2+alpha, 6)"), type=float)
    option("--p", _("power p of the power and hybrid models"), type=float)
    option("--q", _("exponent q <= 2 of the hybrid model"), type=float)
    option("--s0", _("matching point of the hybrid model"), type=float)
    option("--mass", _("prescribed L2 norm a"), type=float)
    option("--grid-n", _("number of radial nodes"), type=int)
    option("--grid-r", _("truncation radius R"), type=float)
    option("--grid-scheme", _("uniform-midpoint or graded"))
    option("--tol-grad", _("relative gradient tolerance"), type=float)
    option("--tol-pohozaev", _("relative Pohozaev tolerance"), type=float)
    option("--max-iter", _("iteration cap"), type=int)
    option("--step", _("initial descent step"), type=float)
    option("--profile", _("initial guess, gaussian or tent"))
    option("--metric", _("descent metric, h1 or l2"))
    option("--moser-n", _("Moser indices to scan"), type=int, nargs="+")
    option("--field", _("field CSV checked by verify"))
    option("--out", _("output directory"))
    parser.add_argument("--verbose", action="store_true", help=_("log at DEBUG level"))
    return parser


def _flatten(data):
    """Lift one level of module namespaces (model, grid, ...) into flat keys."""
    flat = {}
    for key, value in data.items():
        if key in NAMESPACES and isinstance(value, dict):
            for inner, inner_value in value.items():
                if key == "grid" and not inner.startswith("grid_"):
                    inner = "grid_" + inner
                flat[inner] = inner_value
        else:
            flat[key] = value
    return flat


def parse_config(args, file=None):
    try:
        flags = vars(build_parser().parse_args(list(args)))
    except CommandError as exc:
        raise UsageError(str(exc))

    path = file or flags.get("config")
    file_values = _flatten(io.read_json(path)) if path else {}
    if path:
        flags["config"] = str(path)

    command = flags["command"]
    data = {**COMMAND_DEFAULTS.get(command, {}), **file_values, **flags}
    serializer = RunConfigSerializer(data=data)
    if not serializer.is_valid():
        key, messages = next(iter(serializer.errors.items()))
        message = messages[0] if isinstance(messages, list) else messages
        raise UsageError("{}: {}".format(key, message), key=key)

    values = dict(serializer.validated_data)
    values["moser_n"] = tuple(values["moser_n"])
    return RunConfig(**values)


def build_model(config, strict=True):
    if config.variant == EXP_CRITICAL:
        return NonlinearityModel.exp_critical(
            alpha=config.alpha,
            sigma=config.sigma,
            gamma0=config.gamma0,
            beta0=config.beta0,
            strict=strict,
        )
    if config.variant == HYBRID:
        return NonlinearityModel.hybrid(
            alpha=config.alpha,
            p=config.p,
            q=config.q,
            gamma0=config.gamma0,
            s0=config.s0,
            strict=strict,
        )
    return NonlinearityModel.power(alpha=config.alpha, p=config.p, strict=strict)


def build_grid(config):
    return make_grid(config.grid_n, config.grid_r, config.grid_scheme)


def solver_config(config):
    return SolverConfig(
        a=config.mass,
        step=config.step,
        tol_grad=config.tol_grad,
        tol_pohozaev=config.tol_pohozaev,
        max_iter=config.max_iter,
        profile=config.profile,
        metric=config.metric,
    )


def manifest(config, grid=None, model=None):
    data = {
        "version": __version__,
        "command": config.command,
        "config": {**asdict(config), "moser_n": list(config.moser_n)},
    }
    if grid is not None:
        data["grid"] = GridSerializer(grid).data
    if model is not None:
        data["model"] = NonlinearityModelSerializer(model).data
    return data


def _echo(line):
    sys.stdout.write(line + "\n")


class Pipeline:
    def __init__(self, config):
        self.config = config
        self.out = Path(config.out)

    def write_json(self, name, data):
        return io.write_json(self.out / name, data)

    def solve(self):
        config = self.config
        grid, model = build_grid(config), build_model(config)
        kernel = assemble_kernel(grid, model.alpha)
        settings = solver_config(config)

        result = minimize_reduced(settings, grid, kernel, model)
        io.write_field_csv(self.out / "field.csv", result.field)
        io.write_history_csv(self.out / "history.csv", result.history)

        report = None
        if result.converged:
            report = verify_solution(result, grid, kernel, model, settings)

        self.write_json(
            "result.json",
            {
                **manifest(config, grid, model),
                "solver": SolverConfigSerializer(settings).data,
                "result": SolveResultSerializer(result).data,
                "verification": (
                    VerificationReportSerializer(report).data if report else None
                ),
            },
        )
        _echo(
            "solve: {} after {} iterations, J={:.10g}, lambda={:.10g}{}".format(
                result.diagnostic,
                result.iterations,
                result.energy.J,
                result.lambda_,
                ", verification {}".format("passed" if report.passed else "failed")
                if report
                else "",
            )
        )

        if not result.converged:
            return EXIT_NUMERICAL
        return EXIT_OK if report.passed else EXIT_VERIFICATION

    def moser_scan(self):
        config = self.config
        grid, model = build_grid(config), build_model(config)
        kernel = assemble_kernel(grid, model.alpha)

        sweep = moser_sweep(grid, kernel, model, ns=config.moser_n, a=config.mass)
        for scan in sweep.scans:
            io.write_rows_csv(
                self.out / "moser-n{}.csv".format(scan.n), io.MOSER_HEADER, scan.rows()
            )

        self.write_json(
            "moser.json",
            {
                **manifest(config, grid, model),
                "witness": sweep.witness,
                "scans": MoserScanResultSerializer(sweep.scans, many=True).data,
            },
        )
        best = sweep.best
        _echo(
            "moser-scan: best n={} with max g={:.8g} against bound {:.8g}, "
            "margin {:.3g}; witness {}".format(
                best.n, best.g_refined, best.bound, best.margin, sweep.witness
            )
        )
        return EXIT_OK if sweep.witness is not None else EXIT_VERIFICATION

    def check_assumptions(self):
        config = self.config
        model = build_model(config, strict=False)
        report = check_assumptions(model)

        self.write_json(
            "assumptions.json",
            {
                **manifest(config, model=model),
                "report": AssumptionReportSerializer(report).data,
            },
        )
        _echo(
            "check-assumptions: {}".format(
                "all passed"
                if report.passed
                else "failed {}".format(", ".join(report.failed))
            )
        )
        return EXIT_OK if report.passed else EXIT_VERIFICATION

    def convolve_test(self):
        config = self.config
        grid = build_grid(config)
        kernel = assemble_kernel(grid, config.alpha)

        last = np.searchsorted(grid.nodes, 3.0) - 1
        index = np.unique(np.linspace(0, last, CONVOLVE_RADII).astype(int))
        radii = grid.nodes[index]

        cases = []
        for name, field in oracle_fields(grid).items():
            computed = convolve(kernel, field).values[index]
            expected = np.array(brute_force_oracle(field, config.alpha, radii))
            error = float(
                np.max(np.abs(computed - expected)) / np.max(np.abs(expected))
            )
            cases.append(
                {"field": name, "relative_error": error, "passed": error < CONVOLVE_TOL}
            )

        passed = all(case["passed"] for case in cases)
        self.write_json(
            "convolve.json",
            {
                **manifest(config, grid),
                "radii": radii.tolist(),
                "tolerance": CONVOLVE_TOL,
                "cases": cases,
                "passed": passed,
            },
        )
        _echo(
            "convolve-test: max relative error {:.3e} at alpha={}".format(
                max(case["relative_error"] for case in cases), config.alpha
            )
        )
        return EXIT_OK if passed else EXIT_VERIFICATION

    def verify(self):
        config = self.config
        grid, model = build_grid(config), build_model(config)
        kernel = assemble_kernel(grid, model.alpha)
        settings = solver_config(config)

        path = config.field or self.out / "field.csv"
        field = io.read_field_csv(path, grid)
        energy = evaluate_energy(grid, kernel, model, field, settings.a)
        _gradient, multiplier = tangential_gradient(
            grid, kernel, model, field, settings.a
        )
        _field, residual = el_residual(grid, kernel, model, field, multiplier)

        result = SolveResult(
            field=field,
            lambda_=energy.lambda_est,
            lambda_multiplier=multiplier,
            energy=energy,
            iterations=0,
            converged=True,
            history=(),
            residual=residual,
        )
        report = verify_solution(result, grid, kernel, model, settings)
        self.write_json(
            "verification.json",
            {
                **manifest(config, grid, model),
                "field": str(path),
                "energy": EnergyBreakdownSerializer(energy).data,
                "verification": VerificationReportSerializer(report).data,
            },
        )
        _echo(
            "verify: {}".format(
                "passed"
                if report.passed
                else "failed {}".format(", ".join(report.failed))
            )
        )
        return EXIT_OK if report.passed else EXIT_VERIFICATION


def oracle_fields(grid):
    """Smooth radial fields used by convolve-test."""
    r = grid.nodes
    bump = np.zeros_like(r)
    inside = r < 1
    bump[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return {
        "gaussian": grid.field(np.exp(-r * r)),
        "bump": grid.field(bump),
        "polynomial": grid.field(np.maximum(1.0 - r * r, 0.0) ** 2),
    }


def run(config):
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("Cannot create the output directory %s: %s", out, exc)
        return EXIT_USAGE

    pipeline = Pipeline(config)
    handler = getattr(pipeline, config.command.replace("-", "_"))
    try:
        return handler()
    except InvalidArgument as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except ChoquardError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    conf.configure(verbose="--verbose" in argv)

    try:
        config = parse_config(argv)
    except UsageError as exc:
        sys.stderr.write("choquard: {}\n".format(exc))
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
