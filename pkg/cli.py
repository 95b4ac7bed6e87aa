import logging
import os
from pathlib import Path

import click
import pandas as pd
from dotenv import load_dotenv

from engine import AXES, ACCESS_MODES, SweepSpec, monte_carlo_paired
from errors import SimulationError
from figures import FIGURES, figure_command, replay, sweep_command
from models import SystemConfig, __version__, parse_config
from schemes import SCHEMES
from validation import report, run_checks

load_dotenv()


class Config:
    LOG_LEVEL = os.getenv('HAPS_SIM_LOG_LEVEL', 'INFO')
    THREADS = int(os.getenv('HAPS_SIM_THREADS', '1'))
    OUT_DIR = os.getenv('HAPS_SIM_OUT_DIR', 'out')
    TRIALS = int(os.getenv('HAPS_SIM_TRIALS', '10000'))
    QUICK_TRIALS = int(os.getenv('HAPS_SIM_QUICK_TRIALS', '1000'))


logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO)
)

logger = logging.getLogger(__name__)


def _split(ctx, param, value):
    """Comma-separated option -> tuple"""
    if value is None:
        return ()
    return tuple(v.strip() for v in value.split(',') if v.strip())


def _floats(ctx, param, value):
    try:
        return tuple(float(v) for v in _split(ctx, param, value))
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers ({e})")


def _check_choices(items, allowed, what):
    unknown = [i for i in items if i not in allowed]
    if unknown:
        raise click.BadParameter(f"unknown {what}: {', '.join(unknown)} (expected {', '.join(allowed)})")
    return items


def _load(config_path) -> SystemConfig:
    return parse_config(config_path) if config_path else SystemConfig()


def _trials(ctx, trials) -> int:
    if trials is not None:
        return trials
    return Config.QUICK_TRIALS if ctx.obj['quick'] else Config.TRIALS


def _run(action):
    """Run a command body; simulation errors end the process with status 1"""
    try:
        return action()
    except SimulationError as e:
        logger.error(f"❌ {e}")
        raise SystemExit(1)


@click.group()
@click.version_option(__version__)
@click.option('--threads', type=click.IntRange(min=1), default=Config.THREADS, show_default=True,
              help='Worker threads for Monte-Carlo trials')
@click.option('--quick', is_flag=True, help='Use the quick trial count unless --trials is given')
@click.pass_context
def cli(ctx, threads, quick):
    """HAPS / UAV relay link-level simulator"""
    ctx.ensure_object(dict)
    ctx.obj.update(threads=threads, quick=quick)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='YAML scenario file')
@click.option('--scheme', 'schemes', default='active_tris', callback=_split, show_default=True,
              help=f"Comma-separated schemes: {', '.join(SCHEMES)}")
@click.option('--access', 'accesses', default=None, callback=_split,
              help='Comma-separated access modes (default: the config value)')
@click.option('--trials', type=click.IntRange(min=1), default=None)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
@click.pass_context
def simulate(ctx, config_path, schemes, accesses, trials, seed):
    """Monte-Carlo sum rate and energy efficiency at one operating point"""
    def action():
        _check_choices(schemes, SCHEMES, 'scheme')
        _check_choices(accesses, ACCESS_MODES, 'access mode')
        cfg = _load(config_path)
        n_trials = _trials(ctx, trials)
        variants = [(s, a) for s in schemes for a in (accesses or (cfg.access,))]
        results = monte_carlo_paired(cfg, variants, n_trials, seed, ctx.obj['threads'])
        table = pd.DataFrame.from_records([
            {'scheme': m.scheme, 'access': m.access, 'trials': m.n_trials,
             'sum_rate_mean': m.sum_rate_mean, 'sum_rate_ci': m.sum_rate_ci,
             'ee_mean': m.ee_mean, 'ee_ci': m.ee_ci}
            for m in results.values()
        ])
        click.echo(table.to_string(index=False, float_format=lambda x: f"{x:.6g}"))
        logger.info(f"✅ Simulated {len(variants)} variant(s) over {n_trials} trials (seed={seed})")
    _run(action)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='YAML scenario file')
@click.option('--axis', type=click.Choice(list(AXES)), required=True)
@click.option('--values', callback=_floats, required=True, help='Comma-separated axis values, e.g. 0,10,20')
@click.option('--schemes', default='active_tris', callback=_split, show_default=True)
@click.option('--access', 'accesses', default=None, callback=_split)
@click.option('--trials', type=click.IntRange(min=1), default=None)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@click.option('--name', default=None, help='Output file stem (default sweep_<axis>)')
@click.pass_context
def sweep(ctx, config_path, axis, values, schemes, accesses, trials, seed, out_dir, name):
    """Sweep one configuration axis and write CSV, manifest and plot script"""
    def action():
        _check_choices(schemes, SCHEMES, 'scheme')
        _check_choices(accesses, ACCESS_MODES, 'access mode')
        spec = SweepSpec(axis=axis, values=values, base=_load(config_path), schemes=schemes,
                         trials=_trials(ctx, trials), seed=seed, access=accesses)
        path = sweep_command(spec, out_dir or Config.OUT_DIR, name=name, threads=ctx.obj['threads'])
        logger.info(f"✅ Sweep written to {path}")
    _run(action)


@cli.command()
@click.argument('fig_id', type=click.Choice(list(FIGURES)))
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='YAML scenario file')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@click.option('--trials', type=click.IntRange(min=1), default=None)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
@click.pass_context
def figure(ctx, fig_id, config_path, out_dir, trials, seed):
    """Reproduce one figure's curves"""
    def action():
        path = figure_command(fig_id, _load(config_path), out_dir or Config.OUT_DIR,
                              _trials(ctx, trials), seed, ctx.obj['threads'])
        logger.info(f"✅ {fig_id} written to {path}")
    _run(action)


@cli.command()
def validate():
    """Run the analytic spot checks and property checks"""
    def action():
        checks = run_checks()
        click.echo(report(checks).to_string(index=False))
        failed = [c for c in checks if not c.passed]
        if failed:
            logger.error(f"❌ {len(failed)} check(s) failed: {', '.join(c.name for c in failed)}")
            raise SystemExit(1)
        logger.info(f"✅ All {len(checks)} checks passed")
    _run(action)


@cli.command(name='replay')
@click.option('--manifest', 'manifest_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
              help='Output directory (default: next to the manifest)')
@click.pass_context
def replay_cmd(ctx, manifest_path, out_dir):
    """Re-run a recorded figure or sweep and rewrite its CSV"""
    def action():
        path = replay(Path(manifest_path), out_dir, ctx.obj['threads'])
        logger.info(f"✅ Replayed {manifest_path} into {path}")
    _run(action)


if __name__ == '__main__':
    cli()
