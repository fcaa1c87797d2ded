"""Command-line entry point: ``diraclimit <subcommand> ...`` (or ``python -m diraclimit``)."""
import argparse
import logging
import sys

from . import harness
from .errors import ConfigurationError, MissingInputError

log = logging.getLogger("diraclimit")


def _load(args):
    cfg = harness.parse_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["run.seed"] = args.seed
    if args.workers is not None:
        changes["run.workers"] = args.workers
    if args.output_dir is not None:
        changes["run.output_dir"] = args.output_dir
    return cfg.replace(**changes) if changes else cfg


def cmd_identities(args):
    results = harness.run_identity_suite(seed=args.seed or 0)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  max_error={r.max_error:.3e}  tol={r.tolerance:.1e}  "
              f"samples={r.samples}  {r.seconds:.3f}s")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} identities passed")
    return 1 if failed else 0


def cmd_dirac(args):
    for p in harness.run_single(_load(args), "dirac"):
        print(p)
    return 0


def cmd_vlasov(args):
    for p in harness.run_single(_load(args), "vlasov"):
        print(p)
    return 0


def cmd_wigner(args):
    for p in harness.run_single(_load(args), "wigner-snapshot", dspn_path=args.dspn):
        print(p)
    return 0


def cmd_limit(args):
    cfg = _load(args)
    res = harness.run_limit_study(cfg)
    names = [tf.name for tf in cfg.test_functions]
    print("epsilon  constraint  remainder  Ydiag/Y   mass_defect  " + "  ".join(f"{n:>9}" for n in names))
    for r in res.rows:
        print(f"{r.epsilon:<7g}  {r.constraint_norm:.3e}   {r.remainder_norm:.3e}  {r.Y_diag_ratio:.2e}  "
              f"{r.mass_defect:.2e}     " + "  ".join(f"{r.errors[n]:.3e}" for n in names))
    for row in res.residual:
        print(f"residual level {row['level']}: n={row['n']} dt={row['dt']:g} residual={row['residual']:.4e}")
    for p in res.paths.values():
        print(p)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", help="directory for output files (overrides run.output_dir)")
    common.add_argument("--workers", type=int, help="parallel epsilon runs (overrides run.workers)")
    common.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    p = argparse.ArgumentParser(prog="diraclimit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("identities", parents=[common], help="run the algebra and symbol identity suite")
    s.set_defaults(func=cmd_identities)
    for name, func, helptext in [("dirac-run", cmd_dirac, "evolve a Dirac state, write DSPN + diagnostics"),
                                 ("vlasov-run", cmd_vlasov, "push a particle ensemble, write CSVs"),
                                 ("limit-study", cmd_limit, "run the semiclassical convergence study")]:
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("config")
        s.set_defaults(func=func)
    s = sub.add_parser("wigner-snapshot", parents=[common], help="Wigner transform of a DSPN snapshot")
    s.add_argument("config")
    s.add_argument("dspn")
    s.set_defaults(func=cmd_wigner)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigurationError, MissingInputError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
