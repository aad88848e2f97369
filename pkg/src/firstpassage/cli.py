"""
Command line front end.

    firstpassage {analyze,simulate,compare,clt,sweep} --config PATH [flags]

The configuration file holds flat key=value lines ('#' starts a comment):

    model.id=bm                 # optional, defaults to the file stem
    model.type=brownian         # brownian | cramer_lundberg | jump_diffusion
    model.drift=-1
    model.sigma=1
    model.lambda=1              # cramer_lundberg: claim intensity
    model.claim_rate=1          # cramer_lundberg: exponential claim rate
    model.premium=2             # cramer_lundberg: premium rate
    model.intensity=2           # jump_diffusion: jump intensity
    model.jumps=0.5:2:+1,0.5:3:-1   # jump_diffusion: weight:rate:sign list
    run.x / run.t / run.v / run.paths / run.seed / run.tilt / run.step /
    run.workers / run.bridge    # optional defaults for the flags
"""
import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from firstpassage.asymptotics import (
    PassageAsymptotics,
    Regime,
    UnsupportedModelError,
)
from firstpassage.exponent_calculus import NoRootError, RangeError
from firstpassage.levy_models import (
    DomainError,
    LevyModel,
    ValidationError,
    brownian,
    cramer_lundberg,
    jump_diffusion,
)
from firstpassage.oracles import bm_exact_passage
from firstpassage.simulation import (
    InsufficientCrossingsError,
    PassageSimulator,
    SimConfig,
    SimulationError,
)

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('analyze', 'simulate', 'compare', 'clt', 'sweep')
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

RUN_TABLE_COLUMNS: List[str] = [
    'model_id',
    'x',
    't',
    'v',
    'regime',
    'gamma',
    'Gamma_v',
    'psi_star',
    'log_asymptotic',
    'log_mc',
    'mc_se_rel',
    'log_oracle',
    'n_paths',
    'seed',
]
CLT_COLUMNS: List[str] = [
    'model_id',
    'x',
    'v',
    'omega2',
    'mean_z',
    'var_z',
    'n',
    'seed',
]
INTEGER_COLUMNS = ('n_paths', 'seed', 'n')

MODEL_KEYS: Dict[str, Tuple[str, ...]] = {
    'brownian': ('model.drift', 'model.sigma'),
    'cramer_lundberg': ('model.lambda', 'model.claim_rate', 'model.premium'),
    'jump_diffusion': (
        'model.drift',
        'model.sigma',
        'model.intensity',
        'model.jumps',
    ),
}
OPTIONAL_MODEL_KEYS = {'model.sigma': 0.0}
RUN_KEYS = (
    'run.x',
    'run.t',
    'run.v',
    'run.paths',
    'run.seed',
    'run.tilt',
    'run.step',
    'run.workers',
    'run.bridge',
)


class ParseError(Exception):
    """Custom exception for malformed configuration files and flags. Found in firstpassage/cli.py"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RunDefaults:
    """Values for flags that were not given on the command line."""

    model_id: str = 'model'
    x: Optional[float] = None
    t: Optional[float] = None
    v: Optional[float] = None
    paths: int = 100_000
    seed: int = 0
    tilt: Union[str, float] = 'auto'
    step: float = 0.01
    workers: int = 1
    bridge: bool = True


def _to_float(value: str, key: str, line: int) -> float:
    try:
        return float(value)
    except ValueError as e:
        raise ParseError(f"{key} expects a number, got {value!r}", line) from e


def _to_int(value: str, key: str, line: int) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise ParseError(
            f"{key} expects an integer, got {value!r}", line
        ) from e


def _to_bool(value: str, key: str, line: int) -> bool:
    lowered = value.lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ParseError(f"{key} expects true or false, got {value!r}", line)


def _parse_jumps(value: str, line: int) -> List[Tuple[float, float, int]]:
    components = []
    for item in value.split(','):
        parts = [part.strip() for part in item.split(':')]
        if len(parts) != 3:
            raise ParseError(
                f"model.jumps entries are weight:rate:sign, got {item!r}", line
            )
        weight = _to_float(parts[0], 'model.jumps weight', line)
        rate = _to_float(parts[1], 'model.jumps rate', line)
        sign = {'+1': 1, '1': 1, '+': 1, '-1': -1, '-': -1}.get(parts[2])
        if sign is None:
            raise ParseError(
                f"model.jumps sign must be +1 or -1, got {parts[2]!r}", line
            )
        components.append((weight, rate, sign))
    return components


def parse_config(
    text: str, model_id: str = 'model'
) -> Tuple[LevyModel, RunDefaults]:
    """
    Parse the key=value configuration format.

    Raises:
        ParseError: malformed line, unknown or duplicate key, bad value.
        ValidationError: the model breaks an admissibility invariant.
    """
    entries: Dict[str, Tuple[str, int]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ParseError(f"expected key=value, got {content!r}", number)
        key, value = (part.strip() for part in content.split('=', 1))
        if key in entries:
            raise ParseError(f"duplicate key {key!r}", number)
        entries[key] = (value, number)

    if 'model.type' not in entries:
        raise ParseError("missing required key 'model.type'")
    kind, kind_line = entries['model.type']
    if kind not in MODEL_KEYS:
        raise ParseError(
            f"model.type must be one of {sorted(MODEL_KEYS)}, got {kind!r}",
            kind_line,
        )
    allowed = {'model.type', 'model.id', *MODEL_KEYS[kind], *RUN_KEYS}
    for key, (_, number) in entries.items():
        if key not in allowed:
            raise ParseError(f"unknown key {key!r} for {kind} models", number)

    params: Dict[str, object] = {}
    for key in MODEL_KEYS[kind]:
        if key not in entries:
            if key in OPTIONAL_MODEL_KEYS:
                params[key] = OPTIONAL_MODEL_KEYS[key]
                continue
            raise ParseError(f"missing required key {key!r} for {kind}")
        value, number = entries[key]
        if key == 'model.jumps':
            params[key] = _parse_jumps(value, number)
        else:
            params[key] = _to_float(value, key, number)

    if kind == 'brownian':
        model = brownian(params['model.drift'], params['model.sigma'])
    elif kind == 'cramer_lundberg':
        model = cramer_lundberg(
            params['model.lambda'],
            params['model.claim_rate'],
            params['model.premium'],
        )
    else:
        model = jump_diffusion(
            params['model.drift'],
            params['model.sigma'],
            params['model.intensity'],
            params['model.jumps'],
        )

    defaults = RunDefaults(
        model_id=entries.get('model.id', (model_id, 0))[0]
    )
    overrides: Dict[str, object] = {}
    for key in RUN_KEYS:
        if key not in entries:
            continue
        value, number = entries[key]
        name = key.split('.', 1)[1]
        if name in ('paths', 'seed', 'workers'):
            overrides[name] = _to_int(value, key, number)
        elif name == 'bridge':
            overrides[name] = _to_bool(value, key, number)
        elif name == 'tilt' and value.lower() == 'auto':
            overrides[name] = 'auto'
        else:
            overrides[name] = _to_float(value, key, number)
    return model, replace(defaults, **overrides)


def load_config(path: Union[str, Path]) -> Tuple[LevyModel, RunDefaults]:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except (FileNotFoundError, UnicodeDecodeError) as e:
        raise ParseError(f"Could not read config file {path}: {e}") from e
    return parse_config(text, model_id=path.stem)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='firstpassage',
        description=(
            "Exact asymptotics and Monte Carlo estimates of finite-time "
            "first passage probabilities of Levy processes."
        ),
    )
    parser.add_argument('subcommand', choices=SUBCOMMANDS)
    parser.add_argument('--config', required=True, help="model config file")
    parser.add_argument('--x', type=float, help="barrier level")
    parser.add_argument(
        '--t', help="horizon; for sweep a geometric grid T1:T2:N"
    )
    parser.add_argument('--v', type=float, help="slope x/t")
    parser.add_argument('--paths', type=int, help="Monte Carlo paths")
    parser.add_argument('--seed', type=int, help="master seed")
    parser.add_argument('--tilt', help="tilt parameter or 'auto'")
    parser.add_argument('--step', type=float, help="Gaussian sub-step")
    parser.add_argument('--workers', type=int, help="simulation threads")
    parser.add_argument(
        '--no-bridge',
        action='store_true',
        help="disable the Brownian bridge crossing correction",
    )
    parser.add_argument(
        '--mc', action='store_true', help="sweep: add Monte Carlo columns"
    )
    parser.add_argument(
        '--format', choices=('csv', 'json-lines'), default='csv'
    )
    parser.add_argument('--out', help="output path (default stdout)")
    parser.add_argument('--verbose', action='store_true')
    return parser


@dataclass(frozen=True)
class _Settings:
    model_id: str
    x: Optional[float]
    t: Optional[float]
    v: Optional[float]
    paths: int
    seed: int
    tilt: Union[str, float]
    step: float
    workers: int
    bridge: bool
    t_grid: Optional[np.ndarray] = None


def _settings(args: argparse.Namespace, defaults: RunDefaults) -> _Settings:
    def pick(name: str):
        value = getattr(args, name)
        return getattr(defaults, name) if value is None else value

    tilt = pick('tilt')
    if isinstance(tilt, str) and tilt.lower() != 'auto':
        try:
            tilt = float(tilt)
        except ValueError as e:
            raise ParseError("--tilt expects a number or 'auto'") from e

    t_grid = None
    t = defaults.t
    if args.t is not None:
        if args.subcommand == 'sweep':
            parts = args.t.split(':')
            if len(parts) != 3:
                raise ParseError(f"--t for sweep is T1:T2:N, got {args.t!r}")
            try:
                low, high = float(parts[0]), float(parts[1])
                count = int(parts[2])
            except ValueError as e:
                raise ParseError(
                    f"--t for sweep is T1:T2:N, got {args.t!r}"
                ) from e
            if not (0 < low <= high and count >= 1):
                raise ParseError("--t needs 0 < T1 <= T2 and N >= 1")
            t_grid = np.geomspace(low, high, count)
        else:
            try:
                t = float(args.t)
            except ValueError as e:
                raise ParseError(
                    f"--t expects a number, got {args.t!r}"
                ) from e

    return _Settings(
        model_id=defaults.model_id,
        x=pick('x'),
        t=t,
        v=pick('v'),
        paths=pick('paths'),
        seed=pick('seed'),
        tilt=tilt,
        step=pick('step'),
        workers=pick('workers'),
        bridge=defaults.bridge and not args.no_bridge,
        t_grid=t_grid,
    )


def _resolve_x_t(settings: _Settings) -> Tuple[float, float]:
    x, t, v = settings.x, settings.t, settings.v
    if x is None and t is not None and v is not None:
        x = v * t
    if t is None and x is not None and v is not None:
        t = x / v
    if x is None or t is None:
        raise ParseError("two of --x, --t, --v are required")
    if not (x > 0 and t > 0):
        raise ParseError(f"--x and --t must be positive, got x={x}, t={t}")
    return x, t


def _sim_config(settings: _Settings, tilt: Optional[float]) -> SimConfig:
    return SimConfig(
        n_paths=settings.paths,
        master_seed=settings.seed,
        time_step=settings.step,
        tilt=tilt,
        barrier_correction=settings.bridge,
        n_workers=settings.workers,
    )


class Runner:
    """RunTable rows for one model. `operation` names the step in progress."""

    def __init__(self, model: LevyModel, settings: _Settings):
        self.model = model
        self.settings = settings
        self.asymptotics = PassageAsymptotics(model)
        self.operation = 'classify_regime'

    def _base_row(self, x: float, t: float) -> Dict[str, object]:
        row: Dict[str, object] = dict.fromkeys(RUN_TABLE_COLUMNS, math.nan)
        row.update(model_id=self.settings.model_id, x=x, t=t, v=x / t)
        return row

    def _fill_asymptotic(
        self, row: Dict[str, object], x: float, t: float, keep_log: bool
    ) -> Regime:
        self.operation = 'approx_passage_prob'
        estimate = self.asymptotics.approx_passage_prob(x, t)
        regime = estimate.regime
        if regime is Regime.INDETERMINATE:
            regime = Regime.BOUNDARY
        row['regime'] = regime.value
        row['gamma'] = self.asymptotics.calculator.lundberg_gamma()
        if estimate.report is not None:
            row['Gamma_v'] = estimate.report.Gamma_v
            row['psi_star'] = estimate.report.psi_star_v
        if keep_log:
            row['log_asymptotic'] = estimate.log_prob
        return regime

    def _resolve_tilt(self, regime: Regime, x: float, t: float) -> float:
        tilt = self.settings.tilt
        if tilt != 'auto':
            return float(tilt)
        if regime is Regime.CRAMER:
            return 0.0
        self.operation = 'inverse_psi_prime'
        return self.asymptotics.calculator.inverse_psi_prime(x / t)

    def _fill_mc(
        self, row: Dict[str, object], regime: Regime, x: float, t: float
    ) -> None:
        tilt = self._resolve_tilt(regime, x, t)
        config = _sim_config(self.settings, tilt)
        simulator = PassageSimulator(self.model, config)
        if tilt == 0:
            self.operation = 'mc_plain'
            result = simulator.mc_plain(x, t)
        else:
            self.operation = 'mc_tilted'
            result = simulator.mc_tilted(x, t)
        row['log_mc'] = result.log_estimate
        row['mc_se_rel'] = result.std_err_rel
        row['n_paths'] = result.n_paths
        row['seed'] = result.master_seed

    def _fill_oracle(self, row: Dict[str, object], x: float, t: float) -> None:
        if self.model.has_jumps or self.model.sigma == 0:
            return
        self.operation = 'bm_exact_passage'
        row['log_oracle'] = bm_exact_passage(
            self.model.drift, self.model.sigma, x, t
        )

    def analyze(self, x: float, t: float) -> List[Dict[str, object]]:
        row = self._base_row(x, t)
        self._fill_asymptotic(row, x, t, keep_log=True)
        return [row]

    def simulate(self, x: float, t: float) -> List[Dict[str, object]]:
        row = self._base_row(x, t)
        regime = self._fill_asymptotic(row, x, t, keep_log=False)
        self._fill_mc(row, regime, x, t)
        return [row]

    def compare(self, x: float, t: float) -> List[Dict[str, object]]:
        row = self._base_row(x, t)
        regime = self._fill_asymptotic(row, x, t, keep_log=True)
        self._fill_mc(row, regime, x, t)
        self._fill_oracle(row, x, t)
        return [row]

    def sweep(self, v: float, t_grid: np.ndarray, with_mc: bool):
        rows = []
        for t in t_grid:
            t = float(t)
            x = v * t
            row = self._base_row(x, t)
            regime = self._fill_asymptotic(row, x, t, keep_log=True)
            if with_mc:
                self._fill_mc(row, regime, x, t)
            self._fill_oracle(row, x, t)
            rows.append(row)
        return rows

    def clt(self, x: float, v: float) -> List[Dict[str, object]]:
        self.operation = 'clt_diagnostic'
        config = _sim_config(self.settings, None)
        simulator = PassageSimulator(self.model, config)
        report = simulator.clt_diagnostic(x, v)
        return [
            {
                'model_id': self.settings.model_id,
                'x': x,
                'v': v,
                'omega2': report.omega_squared,
                'mean_z': report.mean_z,
                'var_z': report.var_z,
                'n': report.n,
                'seed': self.settings.seed,
            }
        ]


def run_table(
    rows: List[Dict[str, object]], columns: List[str] = RUN_TABLE_COLUMNS
) -> pd.DataFrame:
    """Rows as a DataFrame with the fixed column order."""
    table = pd.DataFrame(rows, columns=columns)
    for column in INTEGER_COLUMNS:
        if column in table.columns:
            table[column] = table[column].astype('Int64')
    return table


def _json_value(value: object) -> object:
    """Plain Python value for json; missing and non-finite numbers become null."""
    if isinstance(value, np.generic):
        value = value.item()
    if value is None or value is pd.NA:
        return None
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_table(table: pd.DataFrame, fmt: str, out: Optional[str]) -> None:
    target = out if out is not None else sys.stdout
    if fmt == 'csv':
        table.to_csv(
            target,
            index=False,
            float_format='%.17g',
            na_rep='',
            lineterminator='\n',
        )
    else:
        # repr-exact floats: every value reads back bit for bit.
        text = ''.join(
            json.dumps({key: _json_value(value) for key, value in row.items()})
            + '\n'
            for row in table.to_dict(orient='records')
        )
        if out is None:
            sys.stdout.write(text)
        else:
            Path(out).write_text(text, encoding='utf-8')


def run(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and emit its table; returns the exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )

    operation = 'parse_config'
    runner: Optional[Runner] = None
    try:
        model, defaults = load_config(args.config)
        settings = _settings(args, defaults)
        runner = Runner(model, settings)
        if args.subcommand == 'sweep':
            if settings.v is None or settings.t_grid is None:
                raise ParseError("sweep needs --v and --t T1:T2:N")
            rows = runner.sweep(settings.v, settings.t_grid, args.mc)
            columns = RUN_TABLE_COLUMNS
        elif args.subcommand == 'clt':
            x = settings.x
            v = settings.v
            if v is None and x is not None and settings.t is not None:
                v = x / settings.t
            if x is None or v is None:
                raise ParseError("clt needs --x and --v")
            rows = runner.clt(x, v)
            columns = CLT_COLUMNS
        else:
            x, t = _resolve_x_t(settings)
            rows = getattr(runner, args.subcommand)(x, t)
            columns = RUN_TABLE_COLUMNS
        if runner is not None:
            runner.operation = 'write_table'
        write_table(run_table(rows, columns), args.format, args.out)
    except (ParseError, ValidationError, SimulationError, ValueError) as e:
        operation = runner.operation if runner is not None else operation
        print(f"firstpassage: {operation}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (
        DomainError,
        NoRootError,
        RangeError,
        UnsupportedModelError,
        InsufficientCrossingsError,
        ZeroDivisionError,
        OverflowError,
    ) as e:
        operation = runner.operation if runner is not None else operation
        print(f"firstpassage: {operation}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
