# -*- coding: utf-8 -*-
"""
Run commands for cmpslab
run <config.json> and resume <dir>
"""

import logging

import click

from core import runner
from core.exceptions import CmpsError, ConfigError
from core.run_config import load_run_config

logger = logging.getLogger(__name__)


def finish(record, run_dir=None):
    """Exit status from a RunRecord: 0 complete, 1 failed points"""
    if record.failed:
        for key, reason in record.failed.items():
            click.echo(f"failed: {key}: {reason}", err=True)
    if record.status != 'complete':
        raise click.exceptions.Exit(1)
    if run_dir:
        click.echo(run_dir)


def fail(error):
    """Map library errors to exit statuses: 2 for configuration errors, 1 otherwise"""
    click.echo(f"error: {error}", err=True)
    raise click.exceptions.Exit(2 if isinstance(error, ConfigError) else 1)


@click.command('run')
@click.argument('config_path', type=click.Path(dir_okay=False))
@click.option('--jobs', '-j', type=click.IntRange(min=1), default=None, help='Worker threads for independent points')
@click.option('--seed', type=click.IntRange(min=0), default=None, help='Override the config seed')
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None, help='Run directory')
def run_cmd(config_path, jobs, seed, out):
    """Run the experiment described by CONFIG_PATH"""
    try:
        cfg = load_run_config(config_path).with_overrides(seed=seed)
        run_dir = runner.run_directory(cfg, out, config_path)
        record = runner.run(config_path, jobs=jobs, seed=seed, out=run_dir)
    except CmpsError as e:
        fail(e)
    finish(record, run_dir)


@click.command('resume')
@click.argument('run_dir', type=click.Path(file_okay=False))
@click.option('--jobs', '-j', type=click.IntRange(min=1), default=None, help='Worker threads for independent points')
def resume_cmd(run_dir, jobs):
    """Complete the missing points of RUN_DIR"""
    try:
        record = runner.resume(run_dir, jobs=jobs)
    except CmpsError as e:
        fail(e)
    finish(record, run_dir)
