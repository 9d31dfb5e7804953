import argparse
import os
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def setup_paths():
    app_path = os.path.dirname(os.path.abspath(__file__))
    cwd = os.getcwd()

    for path in [cwd, app_path]:
        if path not in sys.path:
            sys.path.insert(0, path)

    return app_path, cwd


def build_parser():
    from cli.identity_manager import SUITES

    parser = argparse.ArgumentParser(
        prog="abpauli",
        description="Green functions, Birman-Schwinger bound states and weak-coupling asymptotics "
                    "for the Aharonov-Bohm Pauli operator.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key = value configuration file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="reserved")
    common.add_argument("--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    checks = sub.add_parser("check-identities", parents=[common], help="residue, continuity and Bessel identity suites")
    checks.add_argument("--suite", action="append", choices=SUITES, help="run only the named suite (repeatable)")

    green = sub.add_parser("green-eval", parents=[common], help="evaluate Green functions at one pair of points")
    green.add_argument("--alpha", type=float)
    green.add_argument("--z", type=complex, required=True)
    green.add_argument("--r", type=float, required=True)
    green.add_argument("--theta", type=float, default=0.0)
    green.add_argument("--r0", type=float, required=True)
    green.add_argument("--theta0", type=float, default=0.0)
    green.add_argument("--m-max", type=int, default=80)

    sub.add_parser("sweep", parents=[common], help="eps sweep with asymptotic, implicit and BS eigenvalues")

    bs = sub.add_parser("bs-solve", parents=[common], help="bound states for a single eps")
    bs.add_argument("--eps", type=float, required=True)
    bs.add_argument("--path", choices=("channels", "2d"), default=None)
    bs.add_argument("--bracket", type=float, nargs=2, default=(-10.0, -1e-12), metavar=("Z_LO", "Z_HI"))

    radial = sub.add_parser("oracle-radial", parents=[common], help="finite-volume radial ground state")
    radial.add_argument("--eps", type=float, required=True)
    radial.add_argument("--spin", choices=("plus", "minus"), default="minus")
    radial.add_argument("--bc", choices=("maximal", "friedrichs"), default="maximal")

    coupling = sub.add_parser("coupling", parents=[common], help="U and W(eps) report")
    coupling.add_argument("--eps", type=float, default=0.0)
    coupling.add_argument("--z", type=complex, default=None)
    return parser


def _require_config(args):
    from cli.config_manager import load_config
    from utils.errors import ConfigError

    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    return load_config(args.config)


def cmd_check_identities(args):
    from cli.identity_manager import ALPHAS, IdentityManager

    alphas = (_require_config(args).alpha,) if args.config else ALPHAS
    manager = IdentityManager(alphas=alphas, verbose=args.verbose)
    results = manager.run(args.suite)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_green_eval(args):
    from services.green_service import GreenService
    from utils.common import format_complex
    from utils.domain import PolarPoint

    alpha = args.alpha if args.alpha is not None else _require_config(args).alpha
    green = GreenService(alpha, verbose=args.verbose)
    x, x0 = PolarPoint(args.r, args.theta), PolarPoint(args.r0, args.theta0)
    value, tail = green.partial_wave_green(args.z, x, x0, args.m_max)
    print(f"friedrichs      {format_complex(green.green_friedrichs(args.z, x, x0), 14)}")
    print(f"partial-wave    {format_complex(value, 14)}  (tail <= {tail:.2e})")
    for spin in ("plus", "minus"):
        print(f"pauli {spin:<6}    {format_complex(green.green_pauli(args.z, x, x0, spin), 14)}")
        print(f"regular {spin:<6}  {format_complex(green.green_regular(args.z, x, x0, spin), 14)}")
        print(f"leading {spin:<6}  {format_complex(green.leading_singularity(args.z, x, x0, spin), 14)}")
    return EXIT_OK


def cmd_sweep(args):
    from cli.report_manager import run_sweep

    result = run_sweep(_require_config(args), args.out, threads=args.threads, verbose=args.verbose)
    if result.all_failed:
        print("✗ every sweep row failed")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_bs_solve(args):
    from services.bs_service import BirmanSchwingerService, build_grid
    from utils.domain import NoEigenvalue

    config = _require_config(args)
    n = config.numerics
    bs = BirmanSchwingerService(config.alpha, quad_tol=n.quad_tol, phi_eps=n.phi_eps, m_max=n.m_max,
                                threads=args.threads, verbose=args.verbose)
    grid = build_grid(config.potential, r_max=n.r_max, n_r=n.n_r, n_theta=n.n_theta)
    path = args.path or (config.sweep.bs_path if config.sweep.bs_path != "off" else "channels")
    found = bs.find_bound_states(args.eps, config.potential, tuple(args.bracket), path, grid)
    for spin, z in found.items():
        if isinstance(z, NoEigenvalue):
            print(f"  {spin:<6} no eigenvalue: {z.reason}")
        else:
            print(f"  {spin:<6} z = {z:.15g}")
    return EXIT_OK


def cmd_oracle_radial(args):
    from services.oracle_service import RadialGrid1D, radial_fd_ground_state
    from utils.domain import NoEigenvalue

    config = _require_config(args)
    z = radial_fd_ground_state(config.alpha, args.eps, config.potential, args.spin, RadialGrid1D(bc=args.bc))
    if isinstance(z, NoEigenvalue):
        print(f"  {args.spin} ({args.bc}): no eigenvalue: {z.reason}")
    else:
        print(f"  {args.spin} ({args.bc}): z = {z:.15g}")
    return EXIT_OK


def cmd_coupling(args):
    from services.bs_service import build_grid
    from services.coupling_service import CouplingService
    from utils.common import format_complex

    config = _require_config(args)
    n = config.numerics
    service = CouplingService(config.alpha, verbose=args.verbose, quad_tol=n.quad_tol, phi_eps=n.phi_eps,
                              m_max=n.m_max)
    u = service.compute_U(config.potential)
    print(f"  U11 = {format_complex(u.a0, 12)}")
    print(f"  U22 = {format_complex(u.b0, 12)}")
    if args.eps > 0.0:
        z = args.z
        if z is None:
            asym = service.asymptotic_eigenvalues(args.eps, u)
            z = asym.z_minus if asym.z_minus is not None else asym.z_plus
        if z is None:
            print("⚠ no admissible z to evaluate W(eps); pass --z")
            return EXIT_OK
        grid = build_grid(config.potential, r_max=n.r_max, n_r=n.n_r, n_theta=n.n_theta)
        w = service.compute_W(args.eps, z, config.potential, grid, u=u)
        print(f"  W11 = {format_complex(w.a, 12)}")
        print(f"  W22 = {format_complex(w.b, 12)}")
        print(f"  ||W - U|| = {w.correction_norm:.6e}")
    return EXIT_OK


COMMANDS = {
    "check-identities": cmd_check_identities,
    "green-eval": cmd_green_eval,
    "sweep": cmd_sweep,
    "bs-solve": cmd_bs_solve,
    "oracle-radial": cmd_oracle_radial,
    "coupling": cmd_coupling,
}


def run(argv=None):
    setup_paths()
    from utils.errors import ConfigError, SpectralError

    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"✗ Config error: {e}")
        return EXIT_CONFIG
    except SpectralError as e:
        print(f"✗ {args.command} failed: {e}")
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
