import argparse

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from hamiltonian_learning.bw_reconstruction import WeightConvention
from hamiltonian_learning.exceptions import ConvergenceError, DomainError, NumericalError
from hamiltonian_learning.experiments import RunConfig, run
from hamiltonian_learning.xvbs_mps import EntropyFormula

CONFIG_ERROR = 2
NUMERICAL_FAILURE = 3


def boolean(value):
    lowered = str(value).lower()
    if lowered in ['true', '1', 'yes']:
        return True
    if lowered in ['false', '0', 'no']:
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


class Command(BaseCommand):
    help = 'Reconstructs SU(4) chain couplings from ground states and writes plot-ready CSV/JSON'

    requires_system_checks = []

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='command', required=True, help='Experiment to run')

        ground = subparsers.add_parser('ground', help='Lanczos ground state of H(theta0), saved for reuse')
        self.add_chain_arguments(ground)

        profile = subparsers.add_parser('entropy-profile', help='Entanglement entropy at every cut of an ED ground state')
        self.add_chain_arguments(profile, state=True)
        profile.add_argument('--cut', type=int, help='Report a single cut instead of all of them')

        xvbs = subparsers.add_parser('xvbs-entropy', help='Closed-form vs transfer-matrix XVBS entropy profile')
        self.add_common_arguments(xvbs)
        xvbs.add_argument('--cut', type=int, help='Report a single cut instead of all of them')
        xvbs.add_argument(
            '--formula',
            choices=[f.value for f in EntropyFormula],
            help='Closed form to compare (default: exact)'
        )

        fluct = subparsers.add_parser('fluct-scan', help='Var[H(theta)] over a theta grid')
        self.add_chain_arguments(fluct, state=True, grid=True)

        qcm = subparsers.add_parser('qcm', help='theta from the correlation-matrix null vector')
        self.add_chain_arguments(qcm, state=True, grid=True)
        qcm.add_argument(
            '--sweep',
            action='store_true',
            default=None,
            help='Also recover theta for every ground state on the theta grid'
        )

        bw = subparsers.add_parser('bw-fit', help='Bisognano-Wichmann fit of a block reduced density matrix')
        self.add_chain_arguments(bw, state=True, grid=True)
        bw.add_argument('--subsystem', type=int, help='Sites in the leading block A (default: 3)')
        bw.add_argument('--beta-min', type=float, help='Lower end of the beta grid (default: 0.1)')
        bw.add_argument('--beta-max', type=float, help='Upper end of the beta grid (default: 10)')
        bw.add_argument('--beta-points', type=int, help='Log-spaced beta grid points (default: 25)')
        bw.add_argument(
            '--weight-convention',
            choices=[c.value for c in WeightConvention],
            help='Bond weights by distance from the cut (default: integer)'
        )
        bw.add_argument('--joint-beta', type=boolean, help='Refine theta and beta together (default: true)')

    def add_common_arguments(self, parser):
        parser.add_argument('--length', type=int, help='Number of sites L')
        parser.add_argument('--out', type=str, help='Output directory (default: CHAINLAB_OUTPUT_DIR)')
        parser.add_argument('--tol', type=float, help='Lanczos residual tolerance')
        parser.add_argument('--seed', type=int, help='Seed of the Lanczos start vector')
        parser.add_argument('--ritz', type=int, help='Number of Ritz values to report (k >= 2)')

    def add_chain_arguments(self, parser, state=False, grid=False):
        self.add_common_arguments(parser)
        parser.add_argument('--theta0', type=float, help='Coupling angle of the generating Hamiltonian')
        if state:
            parser.add_argument('--state', type=str, help='Reuse a ground state written by the ground command')
        if grid:
            parser.add_argument('--theta-min', type=float, help='First theta of the scan (default: 0.05)')
            parser.add_argument('--theta-max', type=float, help='Last theta of the scan (default: 0.85)')
            parser.add_argument('--theta-step', type=float, help='Scan step (default: 0.02)')

    def handle(self, *args, **options):
        try:
            config = RunConfig.from_options(options, defaults=settings.CHAINLAB)
            outcome = run(config)
        except ConvergenceError as e:
            self.stderr.write(self.style.ERROR(f'Eigensolver failed: {str(e)}'))
            self.stderr.write(self.style.NOTICE(f'Diagnostics: {e.diagnostics()}'))
            raise CommandError(str(e), returncode=NUMERICAL_FAILURE)
        except NumericalError as e:
            raise CommandError(f'Numerical failure: {str(e)}', returncode=NUMERICAL_FAILURE)
        except DomainError as e:
            raise CommandError(f'Invalid configuration: {str(e)}', returncode=CONFIG_ERROR)

        for path in outcome.outputs:
            self.stdout.write(f'  {path}')
        self.stdout.write(
            self.style.SUCCESS(f'{config.command}: {outcome.summary}; manifest at {outcome.manifest}')
        )
