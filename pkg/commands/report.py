# -*- coding: utf-8 -*-
"""
Report command for cmpslab
"""

import click

from commands.run import fail
from core.exceptions import CmpsError
from core.reporting import report


@click.command('report')
@click.argument('run_dir', type=click.Path(file_okay=False))
def report_cmd(run_dir):
    """Write plot-ready series of a completed run"""
    try:
        paths = report(run_dir)
    except CmpsError as e:
        fail(e)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")
