# -*- coding: utf-8 -*-
"""
Bethe command for cmpslab
Exact Lieb-Liniger energies e(gamma) as CSV on stdout or in a file.
"""

import io

import click
import pandas as pd

from commands.run import fail
from config import Config
from core.bethe import solve_bethe
from core.exceptions import CmpsError
from core.storage import FLOAT_FORMAT, write_table

COLUMNS = ['gamma', 'e', 'lam', 'residual', 'nodes']


def parse_gammas(ctx, param, value):
    try:
        gammas = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of numbers, got {value!r}")
    if not gammas or any(g <= 0 for g in gammas):
        raise click.BadParameter("gamma values must be > 0")
    return gammas


@click.command('bethe')
@click.option('--gamma', 'gammas', required=True, callback=parse_gammas, help='Comma-separated gamma values')
@click.option('--nodes', type=click.IntRange(min=64), default=None, help='Gauss-Legendre nodes')
@click.option('--out', 'out', type=click.Path(dir_okay=False), default=None, help='CSV file (default stdout)')
def bethe_cmd(gammas, nodes, out):
    """Exact ground-state energies from the Bethe integral equation"""
    nodes = nodes or Config.BETHE_NODES
    try:
        rows = []
        for g in gammas:
            sol = solve_bethe(g, nodes)
            rows.append([sol.gamma, sol.e_dimensionless, sol.lam, sol.residual, sol.quad_nodes])
    except CmpsError as e:
        fail(e)
    if out:
        write_table(out, rows, COLUMNS)
        click.echo(out)
        return
    buf = io.StringIO()
    pd.DataFrame(rows, columns=COLUMNS).to_csv(buf, index=False, float_format=FLOAT_FORMAT, lineterminator='\r\n')
    click.echo(buf.getvalue(), nl=False)
