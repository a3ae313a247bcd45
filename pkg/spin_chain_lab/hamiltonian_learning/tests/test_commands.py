import json
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings


def chainlab(*args):
    stdout = StringIO()
    call_command('chainlab', *[str(a) for a in args], stdout=stdout, stderr=StringIO())
    return stdout.getvalue()


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()


class XvbsEntropyCommandTests(CommandTestCase):
    def test_writes_table_summary_and_manifest(self):
        output = chainlab('xvbs-entropy', '--length', 7, '--out', self.out)
        self.assertIn('xvbs-entropy', output)
        frame = pd.read_csv(self.out / 'xvbs_entropy_L7.csv')
        self.assertEqual(list(frame['cut_site']), list(range(1, 7)))
        self.assertLessEqual(frame['abs_difference'].max(), 1e-10)
        summary = json.loads((self.out / 'xvbs_entropy_L7.json').read_text())
        self.assertEqual(summary['status'], 'agrees')
        manifest = json.loads((self.out / 'xvbs-entropy.manifest.json').read_text())
        self.assertEqual(set(manifest['outputs']), {'xvbs_entropy_L7.csv', 'xvbs_entropy_L7.json'})
        self.assertEqual(manifest['config']['length'], 7)

    def test_single_cut(self):
        chainlab('xvbs-entropy', '--length', 7, '--cut', 3, '--out', self.out)
        self.assertEqual(list(pd.read_csv(self.out / 'xvbs_entropy_L7.csv')['cut_site']), [3])

    def test_printed_formula_reports_undefined_cuts(self):
        chainlab('xvbs-entropy', '--length', 5, '--formula', 'printed', '--out', self.out)
        summary = json.loads((self.out / 'xvbs_entropy_L5.json').read_text())
        self.assertEqual(summary['undefined_cuts'], 4)
        self.assertEqual(summary['status'], 'undefined')
        self.assertIsNone(summary['max_abs_difference'])

    def test_symmetrized_formula_reports_discrepancy(self):
        chainlab('xvbs-entropy', '--length', 5, '--formula', 'symmetrized', '--out', self.out)
        summary = json.loads((self.out / 'xvbs_entropy_L5.json').read_text())
        self.assertEqual(summary['status'], 'discrepant')

    def test_even_length_is_a_configuration_error(self):
        with self.assertRaises(CommandError) as ctx:
            chainlab('xvbs-entropy', '--length', 8, '--out', self.out)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse((self.out / 'xvbs-entropy.manifest.json').exists())


class ExactDiagonalizationCommandTests(CommandTestCase):
    def test_fluctuation_minimum_at_theta0(self):
        chainlab('fluct-scan', '--length', 4, '--theta0', 0.45, '--out', self.out)
        frame = pd.read_csv(self.out / 'fluctuation_L4.csv')
        self.assertEqual(len(frame), 41)
        best = frame.loc[frame['variance'].idxmin()]
        self.assertAlmostEqual(best['theta'], 0.45, delta=1e-12)
        self.assertLessEqual(best['variance'], 1e-9)

    def test_single_bond_variance_vanishes_everywhere(self):
        chainlab('fluct-scan', '--length', 2, '--theta0', 0.45, '--out', self.out)
        frame = pd.read_csv(self.out / 'fluctuation_L2.csv')
        self.assertTrue((frame['variance'].abs() <= 1e-9).all())
        self.assertIn(0.45, frame['theta'].round(12).tolist())

    def test_qcm_recovers_theta0(self):
        chainlab('qcm', '--length', 6, '--theta0', 0.588, '--out', self.out)
        summary = json.loads((self.out / 'qcm_L6.json').read_text())
        self.assertLessEqual(abs(summary['theta_hat'] - 0.588), 1e-6)
        self.assertEqual(len(summary['correlation_matrix']), 2)
        self.assertFalse(summary['ambiguous'])

    def test_qcm_sweep(self):
        chainlab('qcm', '--length', 3, '--sweep', '--theta-min', 0.2, '--theta-max', 0.6, '--theta-step', 0.2,
                 '--out', self.out)
        table = pd.read_csv(self.out / 'qcm_recovery_L3.csv')
        self.assertEqual(len(table), 3)
        self.assertEqual(list(table.columns), ['theta0', 'theta_hat', 'residual', 'gap', 'ambiguous'])

    def test_saved_state_is_reused(self):
        chainlab('ground', '--length', 4, '--theta0', 0.3, '--out', self.out)
        state = self.out / 'ground_state_L4.bin'
        self.assertEqual(state.stat().st_size, 16 + 8 * 6 ** 4)
        chainlab('entropy-profile', '--length', 4, '--state', state, '--out', self.out)
        frame = pd.read_csv(self.out / 'entropy_profile_L4.csv')
        self.assertEqual(list(frame.columns), ['cut_site', 'theta', 'entropy'])
        self.assertTrue((frame['theta'] == 0.3).all())

    def test_state_length_mismatch(self):
        chainlab('ground', '--length', 3, '--out', self.out)
        with self.assertRaises(CommandError) as ctx:
            chainlab('entropy-profile', '--length', 4, '--state', self.out / 'ground_state_L3.bin', '--out', self.out)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_oversized_chain_is_rejected(self):
        with self.assertRaises(CommandError) as ctx:
            chainlab('ground', '--length', 9, '--out', self.out)
        self.assertEqual(ctx.exception.returncode, 2)

    @override_settings(CHAINLAB={'KRYLOV_DIM': 2, 'MAX_RESTARTS': 0})
    def test_unconverged_solver_exits_with_numerical_failure(self):
        with self.assertRaises(CommandError) as ctx:
            chainlab('ground', '--length', 4, '--tol', 1e-14, '--out', self.out)
        self.assertEqual(ctx.exception.returncode, 3)

    def test_bw_fit_small_block(self):
        chainlab('bw-fit', '--length', 4, '--subsystem', 2, '--theta-step', 0.1, '--beta-points', 5,
                 '--out', self.out)
        surface = pd.read_csv(self.out / 'bw_surface_L4_l2.csv')
        self.assertEqual(list(surface.columns), ['theta', 'beta', 'relative_entropy'])
        self.assertEqual(len(surface), 9 * 5)
        summary = json.loads((self.out / 'bw_fit_L4_l2.json').read_text())
        self.assertLessEqual(summary['min_value'], summary['coarse_min'])
        self.assertIn(summary['weight_convention'], ('integer', 'half-integer'))

    def test_unwritable_output_is_a_configuration_error(self):
        (self.out / 'fluctuation_L2.csv').mkdir()
        with self.assertRaises(CommandError) as ctx:
            chainlab('fluct-scan', '--length', 2, '--out', self.out)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_bw_subsystem_must_leave_a_complement(self):
        with self.assertRaises(CommandError) as ctx:
            chainlab('bw-fit', '--length', 4, '--subsystem', 4, '--out', self.out)
        self.assertEqual(ctx.exception.returncode, 2)


class DeterminismTests(SimpleTestCase):
    def test_repeated_runs_are_byte_identical(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            for out in (first, second):
                chainlab('qcm', '--length', 4, '--theta0', 0.3, '--out', out)
                chainlab('fluct-scan', '--length', 4, '--theta0', 0.3, '--out', out)
            for name in ('qcm_L4.json', 'fluctuation_L4.csv'):
                self.assertEqual((Path(first) / name).read_bytes(), (Path(second) / name).read_bytes())


class MergeProfilesCommandTests(CommandTestCase):
    def write_profile(self, name, theta, cuts):
        path = self.out / name
        pd.DataFrame({'cut_site': cuts, 'theta': [theta] * len(cuts), 'entropy': [0.1 * c for c in cuts]}).to_csv(
            path, index=False)
        return path

    def test_inner_and_outer_join(self):
        first = self.write_profile('a.csv', 0.3, [1, 2, 3])
        second = self.write_profile('b.csv', 0.45, [2, 3, 4])
        output = self.out / 'merged.csv'
        call_command('merge_profiles', str(first), str(second), '--output', str(output), stdout=StringIO())
        merged = pd.read_csv(output)
        self.assertEqual(list(merged.columns), ['cut_site', 'entropy_theta_0.3', 'entropy_theta_0.45'])
        self.assertEqual(list(merged['cut_site']), [2, 3])
        call_command('merge_profiles', str(first), str(second), '--output', str(output), '--fill-missing',
                     stdout=StringIO())
        self.assertEqual(list(pd.read_csv(output)['cut_site']), [1, 2, 3, 4])

    def test_xvbs_overlay(self):
        profile = self.write_profile('a.csv', 0.588, [1, 2, 3, 4])
        chainlab('xvbs-entropy', '--length', 5, '--out', self.out)
        output = self.out / 'overlay.csv'
        call_command('merge_profiles', str(profile), '--xvbs', str(self.out / 'xvbs_entropy_L5.csv'),
                     '--output', str(output), stdout=StringIO())
        merged = pd.read_csv(output)
        self.assertIn('xvbs_transfer_matrix', merged.columns)
        self.assertEqual(len(merged), 4)

    def test_missing_columns(self):
        path = self.out / 'bad.csv'
        pd.DataFrame({'cut_site': [1]}).to_csv(path, index=False)
        with self.assertRaises(CommandError) as ctx:
            call_command('merge_profiles', str(path), '--output', str(self.out / 'x.csv'),
                         stdout=StringIO(), stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
