import os

import pandas as pd
from django.core.management.base import BaseCommand, CommandError

from hamiltonian_learning.artifacts import write_csv


class Command(BaseCommand):
    help = 'Merges entropy-profile CSVs (one per theta) and an optional XVBS profile into one table keyed by cut_site'

    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            'profiles',
            nargs='+',
            help='entropy-profile CSVs (required columns: cut_site, theta, entropy)'
        )
        parser.add_argument(
            '--xvbs',
            type=str,
            help='xvbs-entropy CSV (required columns: cut_site, closed_form_value, transfer_matrix_value)'
        )
        parser.add_argument(
            '--output',
            type=str,
            default='entropy_overlay.csv',
            help='Output file path (default: entropy_overlay.csv)'
        )
        parser.add_argument(
            '--fill-missing',
            action='store_true',
            help='Keep cuts missing from some inputs (outer join) instead of dropping them'
        )

    def handle(self, *args, **options):
        try:
            frames = []
            for path in options['profiles']:
                profile = self.read_csv_safe(path, 'entropy-profile')
                self.validate_columns(profile, path, ['cut_site', 'theta', 'entropy'])
                frames.append(self.profile_column(profile, path))

            if options['xvbs']:
                xvbs = self.read_csv_safe(options['xvbs'], 'xvbs-entropy')
                self.validate_columns(xvbs, options['xvbs'], ['cut_site', 'closed_form_value', 'transfer_matrix_value'])
                frames.append(xvbs[['cut_site', 'closed_form_value', 'transfer_matrix_value']].rename(columns={
                    'closed_form_value': 'xvbs_closed_form',
                    'transfer_matrix_value': 'xvbs_transfer_matrix',
                }))

            merged = self.merge_dataframes(frames, fill_missing=options['fill_missing'])
            self.save_output(merged, options['output'])
        except (FileNotFoundError, ValueError) as e:
            self.stderr.write(self.style.ERROR(f'Merge failed: {str(e)}'))
            raise CommandError(str(e), returncode=2)

        self.stdout.write(
            self.style.SUCCESS(f'Merged {len(frames)} profiles over {len(merged)} cuts to {options["output"]}')
        )

    def read_csv_safe(self, path, name):
        """Read CSV with error handling"""
        if not os.path.exists(path):
            raise FileNotFoundError(f"{name} CSV not found at {path}")
        try:
            return pd.read_csv(path)
        except Exception as e:
            raise ValueError(f"Invalid {name} CSV format: {str(e)}")

    def validate_columns(self, df, name, required_columns):
        missing = [col for col in required_columns if col not in df.columns]
        if missing:
            raise ValueError(
                f"{name} missing required columns: {', '.join(missing)}"
            )

    def profile_column(self, df, name):
        """One entropy column per file, named after its theta"""
        thetas = df['theta'].unique()
        if len(thetas) != 1:
            raise ValueError(f"{name} mixes {len(thetas)} theta values; expected one")
        return df[['cut_site', 'entropy']].rename(columns={'entropy': f'entropy_theta_{thetas[0]:.6g}'})

    def merge_dataframes(self, frames, fill_missing=False):
        merged = frames[0]
        for frame in frames[1:]:
            duplicated = [col for col in frame.columns if col != 'cut_site' and col in merged.columns]
            if duplicated:
                raise ValueError(f"Column {duplicated[0]} appears in more than one input")
            merged = pd.merge(
                merged,
                frame,
                on='cut_site',
                how='outer' if fill_missing else 'inner'
            )
        return merged.sort_values('cut_site').reset_index(drop=True)

    def save_output(self, df, output_path):
        write_csv(df, output_path)
