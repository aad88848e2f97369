from contextlib import redirect_stderr
from firstpassage import (
    BROWNIAN_CONFIG,
    CRAMER_LUNDBERG_CONFIG,
    JUMP_DIFFUSION_CONFIG,
)
from firstpassage.asymptotics import PassageAsymptotics
from firstpassage.cli import (
    CLT_COLUMNS,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    RUN_TABLE_COLUMNS,
    ParseError,
    load_config,
    parse_config,
    run,
)
from firstpassage.levy_models import ModelKind, ValidationError
from pathlib import Path
import io
import json
import math
import numpy as np
import pandas as pd
import shutil
import tempfile
import unittest

BM_CONFIG = """\
# drifting Brownian motion
model.type=brownian
model.drift=-1
model.sigma=1
"""


class TestParseConfig(unittest.TestCase):

    def test_brownian(self):
        model, defaults = parse_config(BM_CONFIG, model_id='bm')
        self.assertEqual(model.kind, ModelKind.BROWNIAN)
        self.assertEqual(model.drift, -1.0)
        self.assertEqual(model.sigma, 1.0)
        self.assertEqual(defaults.model_id, 'bm')
        self.assertEqual(defaults.tilt, 'auto')
        self.assertTrue(defaults.bridge)

    def test_run_defaults(self):
        text = BM_CONFIG + "model.id=custom\nrun.x=2\nrun.paths=500\n"
        text += "run.bridge=false\nrun.tilt=3  # inline comment\n"
        _, defaults = parse_config(text)
        self.assertEqual(defaults.model_id, 'custom')
        self.assertEqual(defaults.x, 2.0)
        self.assertEqual(defaults.paths, 500)
        self.assertFalse(defaults.bridge)
        self.assertEqual(defaults.tilt, 3.0)

    def test_jump_diffusion(self):
        model, _ = parse_config(JUMP_DIFFUSION_CONFIG.read_text())
        self.assertEqual(model.kind, ModelKind.JUMP_DIFFUSION)
        self.assertEqual(model.jumps.intensity, 2.0)
        signs = [comp.sign for comp in model.jumps.components]
        self.assertEqual(signs, [1, -1])

    def test_errors_carry_line_numbers(self):
        with self.assertRaisesRegex(ParseError, r"^line 5: duplicate key"):
            parse_config(BM_CONFIG + "model.drift=-2\n")
        with self.assertRaisesRegex(ParseError, r"^line 5: unknown key"):
            parse_config(BM_CONFIG + "model.lambda=1\n")
        with self.assertRaisesRegex(ParseError, r"^line 5: expected key"):
            parse_config(BM_CONFIG + "drift -1\n")
        with self.assertRaisesRegex(ParseError, r"^line 3: model.drift"):
            parse_config(BM_CONFIG.replace("=-1", "=down"))

    def test_missing_keys(self):
        with self.assertRaisesRegex(ParseError, "model.type"):
            parse_config("model.drift=-1\n")
        with self.assertRaisesRegex(ParseError, "model.claim_rate"):
            parse_config("model.type=cramer_lundberg\nmodel.lambda=1\n")

    def test_bad_jumps(self):
        text = (
            "model.type=jump_diffusion\nmodel.drift=-1\nmodel.sigma=1\n"
            "model.intensity=1\nmodel.jumps=1:2:0\n"
        )
        with self.assertRaisesRegex(ParseError, "line 5: model.jumps sign"):
            parse_config(text)

    def test_inadmissible_model(self):
        with self.assertRaises(ValidationError):
            parse_config("model.type=brownian\nmodel.drift=-1\n")

    def test_load_config_uses_file_stem(self):
        directory = tempfile.mkdtemp()
        try:
            path = Path(directory) / 'surplus.cfg'
            path.write_text(
                CRAMER_LUNDBERG_CONFIG.read_text().replace('model.id=cl', '')
            )
            _, defaults = load_config(path)
            self.assertEqual(defaults.model_id, 'surplus')
        finally:
            shutil.rmtree(directory)
        with self.assertRaises(ParseError):
            load_config(Path(directory) / 'missing.cfg')

    def test_bundled_configs(self):
        for path, model_id in (
            (BROWNIAN_CONFIG, 'bm'),
            (CRAMER_LUNDBERG_CONFIG, 'cl'),
            (JUMP_DIFFUSION_CONFIG, 'jd'),
        ):
            _, defaults = load_config(path)
            self.assertEqual(defaults.model_id, model_id)


class TestRun(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.out = str(Path(self.directory) / 'table.csv')

    def tearDown(self):
        shutil.rmtree(self.directory)

    def run_quietly(self, argv):
        stderr = io.StringIO()
        with redirect_stderr(stderr):
            status = run(argv)
        return status, stderr.getvalue()

    def read_csv(self):
        return pd.read_csv(self.out, float_precision='round_trip')

    def test_analyze(self):
        status, _ = self.run_quietly(
            ['analyze', '--config', str(BROWNIAN_CONFIG), '--x', '4',
             '--t', '2', '--out', self.out]
        )
        self.assertEqual(status, EXIT_OK)
        table = self.read_csv()
        self.assertEqual(list(table.columns), RUN_TABLE_COLUMNS)
        row = table.iloc[0]
        self.assertEqual(row['model_id'], 'bm')
        self.assertEqual(row['regime'], 'large_deviation')
        self.assertEqual(row['v'], 2.0)
        asymptotics = PassageAsymptotics(load_config(BROWNIAN_CONFIG)[0])
        expected = asymptotics.approx_passage_prob(4.0, 2.0).log_prob
        self.assertEqual(row['log_asymptotic'], expected)
        self.assertTrue(math.isnan(row['log_mc']))
        self.assertTrue(math.isnan(row['log_oracle']))

    def test_analyze_from_slope(self):
        status, _ = self.run_quietly(
            ['analyze', '--config', str(BROWNIAN_CONFIG), '--v', '0.5',
             '--t', '20', '--out', self.out]
        )
        self.assertEqual(status, EXIT_OK)
        row = self.read_csv().iloc[0]
        self.assertEqual(row['x'], 10.0)
        self.assertEqual(row['regime'], 'cramer')
        self.assertAlmostEqual(row['log_asymptotic'], -20.0, places=10)

    def test_boundary(self):
        status, _ = self.run_quietly(
            ['analyze', '--config', str(BROWNIAN_CONFIG), '--x', '10',
             '--t', '10', '--out', self.out]
        )
        self.assertEqual(status, EXIT_OK)
        row = self.read_csv().iloc[0]
        self.assertEqual(row['regime'], 'boundary')
        self.assertTrue(math.isnan(row['log_asymptotic']))

    def test_compare(self):
        status, _ = self.run_quietly(
            ['compare', '--config', str(BROWNIAN_CONFIG), '--x', '2',
             '--t', '1', '--paths', '20000', '--seed', '3', '--step',
             '0.002', '--out', self.out]
        )
        self.assertEqual(status, EXIT_OK)
        row = self.read_csv().iloc[0]
        self.assertAlmostEqual(
            math.exp(row['log_oracle']), 0.0042558, places=6
        )
        self.assertEqual(row['n_paths'], 20000)
        self.assertEqual(row['seed'], 3)
        spread = abs(math.exp(row['log_mc'] - row['log_oracle']) - 1)
        self.assertLess(spread, 4 * row['mc_se_rel'] + 0.01)

    def test_simulate_is_reproducible(self):
        argv = ['simulate', '--config', str(JUMP_DIFFUSION_CONFIG), '--x',
                '1', '--t', '2', '--paths', '5000', '--seed', '21',
                '--out', self.out]
        self.assertEqual(self.run_quietly(argv)[0], EXIT_OK)
        first = Path(self.out).read_text()
        self.assertEqual(self.run_quietly(argv + ['--workers', '3'])[0], 0)
        self.assertEqual(Path(self.out).read_text(), first)
        row = self.read_csv().iloc[0]
        self.assertTrue(math.isnan(row['log_asymptotic']))
        self.assertTrue(math.isfinite(row['log_mc']))

    def test_sweep(self):
        status, _ = self.run_quietly(
            ['sweep', '--config', str(BROWNIAN_CONFIG), '--v', '2',
             '--t', '10:80:4', '--out', self.out]
        )
        self.assertEqual(status, EXIT_OK)
        table = self.read_csv()
        self.assertEqual(len(table), 4)
        np.testing.assert_allclose(table['t'], [10, 20, 40, 80])
        np.testing.assert_allclose(table['x'], 2 * table['t'])
        self.assertTrue(table['log_mc'].isna().all())
        errors = (table['log_oracle'] - table['log_asymptotic']).abs()
        self.assertTrue(errors.is_monotonic_decreasing)
        self.assertLess(errors.iloc[-1], 0.01)

    def test_json_lines(self):
        out = str(Path(self.directory) / 'table.jsonl')
        status, _ = self.run_quietly(
            ['analyze', '--config', str(CRAMER_LUNDBERG_CONFIG), '--x', '3',
             '--t', '1', '--format', 'json-lines', '--out', out]
        )
        self.assertEqual(status, EXIT_OK)
        lines = Path(out).read_text().splitlines()
        self.assertEqual(len(lines), 1)
        record = json.loads(lines[0])
        self.assertEqual(list(record), RUN_TABLE_COLUMNS)
        self.assertEqual(record['regime'], 'large_deviation')
        self.assertIsNone(record['log_mc'])
        model, _ = load_config(CRAMER_LUNDBERG_CONFIG)
        asymptotics = PassageAsymptotics(model)
        expected = asymptotics.approx_passage_prob(3.0, 1.0).log_prob
        self.assertEqual(record['log_asymptotic'], expected)

    def test_clt(self):
        status, _ = self.run_quietly(
            ['clt', '--config', str(BROWNIAN_CONFIG), '--x', '20', '--v',
             '2', '--paths', '500', '--step', '0.02', '--out', self.out]
        )
        self.assertEqual(status, EXIT_OK)
        table = self.read_csv()
        self.assertEqual(list(table.columns), CLT_COLUMNS)
        self.assertAlmostEqual(table.iloc[0]['omega2'], 0.125, places=10)
        self.assertGreater(table.iloc[0]['n'], 450)

    def test_clt_with_one_path_is_numerical_error(self):
        status, stderr = self.run_quietly(
            ['clt', '--config', str(BROWNIAN_CONFIG), '--x', '10', '--v',
             '2', '--paths', '1', '--out', self.out]
        )
        self.assertEqual(status, EXIT_NUMERICAL)
        self.assertTrue(stderr.startswith("firstpassage: clt_diagnostic: "))
        self.assertFalse(Path(self.out).exists())

    def test_inadmissible_config_is_usage_error(self):
        path = Path(self.directory) / 'flat.cfg'
        path.write_text("model.type=brownian\nmodel.drift=-1\nmodel.sigma=0\n")
        status, stderr = self.run_quietly(
            ['analyze', '--config', str(path), '--x', '1', '--t', '1']
        )
        self.assertEqual(status, EXIT_USAGE)
        self.assertTrue(stderr.startswith("firstpassage: parse_config: "))

    def test_missing_horizon_is_usage_error(self):
        status, stderr = self.run_quietly(
            ['analyze', '--config', str(BROWNIAN_CONFIG), '--x', '1']
        )
        self.assertEqual(status, EXIT_USAGE)
        self.assertIn("two of --x, --t, --v", stderr)

    def test_tilt_outside_domain_is_numerical_error(self):
        status, stderr = self.run_quietly(
            ['simulate', '--config', str(CRAMER_LUNDBERG_CONFIG), '--x',
             '3', '--t', '1', '--paths', '100', '--tilt', '1.5',
             '--out', self.out]
        )
        self.assertEqual(status, EXIT_NUMERICAL)
        self.assertTrue(stderr.startswith("firstpassage: mc_tilted: "))

    def test_unknown_subcommand(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as caught:
                run(['integrate', '--config', str(BROWNIAN_CONFIG)])
        self.assertEqual(caught.exception.code, 2)


if __name__ == "__main__":
    unittest.main()
