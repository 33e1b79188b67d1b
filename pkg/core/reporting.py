# -*- coding: utf-8 -*-
"""
Reporting
Tidy (x, y, series) CSV series behind each plot plus a
report.xlsx workbook with one sheet per series.
"""

import logging
import os

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Font
from openpyxl.utils import get_column_letter

from core.bethe import solve_bethe
from core.exceptions import MissingInputs, SeriesFormatError
from core.runner import CONFIG_FILE, RECORD_FILE
from core.storage import read_json, read_table, write_table

logger = logging.getLogger(__name__)

REPORT_DIR = 'report'
SERIES_COLUMNS = ['x', 'y', 'series']

# Tables each mode must have produced
MODE_TABLES = {
    'bethe': ['bethe.csv'],
    'single': ['single.csv'],
    'coupled': ['coupled.csv'],
    'sweep-density': ['sweep.csv'],
    'luttinger': ['sweep.csv', 'luttinger.csv'],
}


def _rows(df, x, y, label):
    return [[float(a), float(b), label] for a, b in zip(df[x], df[y]) if pd.notna(b)]


def _dimensionless(df):
    """e0 * 2M / rho0^3, the quantity compared with e(gamma)"""
    return df['energy'] * 2.0 * df['M'] / df['rho0'] ** 3


# ==================== Series ====================
def energy_vs_gamma(single=None, bethe=None, bethe_nodes=None):
    rows = []
    gammas = set()
    if single is not None:
        single = single.assign(e=_dimensionless(single))
        for D, group in single.groupby('D', sort=True):
            group = group.sort_values('gamma')
            rows += _rows(group, 'gamma', 'e', f"cMPS D={D}")
            gammas.update(group['gamma'])
    if bethe is not None:
        rows += _rows(bethe.sort_values('gamma'), 'gamma', 'e', "Bethe")
    elif gammas:
        rows += [[g, solve_bethe(g, bethe_nodes).e_dimensionless, "Bethe"] for g in sorted(gammas) if g > 0]
    return rows


def luttinger_vs_gamma(lutt):
    rows = []
    for D, group in lutt.groupby('D', sort=True):
        group = group.sort_values('gamma')
        rows += _rows(group, 'gamma', 'v', f"v D={D}")
        rows += _rows(group, 'gamma', 'K', f"K D={D}")
    first = lutt[lutt['D'] == lutt['D'].min()].sort_values('gamma')
    rows += _rows(first, 'gamma', 'bethe_v', "v Bethe")
    rows += _rows(first, 'gamma', 'bethe_K', "K Bethe")
    return rows


def coupled_vs_g(coupled, column):
    rows = []
    for (D, P), group in coupled.groupby(['D', 'P'], sort=True):
        rows += _rows(group.sort_values('g'), 'g', column, f"D={D} P={P}")
    return rows


def luttinger_coupled_vs_g(lutt):
    rows = []
    for (D, P, channel), group in lutt.groupby(['D', 'P', 'channel'], sort=True):
        sign = '+' if channel == 'plus' else '-'
        group = group.sort_values('g')
        rows += _rows(group, 'g', 'v', f"v{sign} D={D} P={P}")
        rows += _rows(group, 'g', 'K', f"K{sign} D={D} P={P}")
    return rows


# ==================== Workbook ====================
def write_workbook(path, series):
    """One sheet per series table with a bold header row and sized columns"""
    wb = Workbook()
    wb.remove(wb.active)
    for name, rows in series.items():
        ws = wb.create_sheet(title=name[:31])
        for col, header in enumerate(SERIES_COLUMNS, 1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.font = Font(bold=True)
            cell.alignment = Alignment(horizontal='center')
        for r, row in enumerate(rows, 2):
            for col, value in enumerate(row, 1):
                ws.cell(row=r, column=col, value=value)
        for col in range(1, len(SERIES_COLUMNS) + 1):
            width = max((len(str(c.value)) for c in ws[get_column_letter(col)] if c.value is not None), default=8)
            ws.column_dimensions[get_column_letter(col)].width = min(width + 2, 40)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    wb.save(path)
    wb.close()


def check_series(path) -> pd.DataFrame:
    """Read a series CSV back and check header, numeric finite x and y, and non-empty labels"""
    df = read_table(path)
    if list(df.columns) != SERIES_COLUMNS:
        raise SeriesFormatError(f"{path}: header {list(df.columns)}, expected {SERIES_COLUMNS}")
    if df.empty:
        return df
    for col in ('x', 'y'):
        if not pd.api.types.is_numeric_dtype(df[col]) or not np.isfinite(df[col].to_numpy(dtype=float)).all():
            raise SeriesFormatError(f"{path}: column {col} must hold finite numbers")
    labels = df['series']
    if labels.isna().any() or not all(isinstance(s, str) and s for s in labels):
        raise SeriesFormatError(f"{path}: every row needs a series label")
    return df


def report(run_dir):
    """Write report/<series>.csv and report/report.xlsx; returns {series: path}"""
    missing = [f for f in (RECORD_FILE, CONFIG_FILE) if not os.path.isfile(os.path.join(run_dir, f))]
    if missing:
        raise MissingInputs(missing)
    cfg = read_json(os.path.join(run_dir, CONFIG_FILE))
    record = read_json(os.path.join(run_dir, RECORD_FILE))
    mode = cfg['mode']
    needed = MODE_TABLES[mode]
    missing = [f for f in needed if not os.path.isfile(os.path.join(run_dir, f))]
    if record.get('status') != 'complete':
        missing.append(f"{RECORD_FILE} (status {record.get('status')!r}, expected 'complete')")
    if missing:
        raise MissingInputs(missing)

    def table(name):
        return read_table(os.path.join(run_dir, name))

    coupled = mode == 'coupled' or (mode in ('sweep-density', 'luttinger') and cfg.get('system') == 'coupled')
    bethe_nodes = cfg['grids']['bethe_nodes']
    series = {}
    if mode == 'bethe':
        series['energy_vs_gamma'] = energy_vs_gamma(bethe=table('bethe.csv'))
    elif mode == 'single':
        series['energy_vs_gamma'] = energy_vs_gamma(single=table('single.csv'), bethe_nodes=bethe_nodes)
    elif mode == 'coupled':
        df = table('coupled.csv')
        series['correlation_vs_g'] = coupled_vs_g(df, 'correlation')
        series['energy_vs_g'] = coupled_vs_g(df, 'energy')
    elif mode == 'luttinger':
        lutt = table('luttinger.csv')
        if coupled:
            series['luttinger_coupled_vs_g'] = luttinger_coupled_vs_g(lutt)
        else:
            series['luttinger_vs_gamma'] = luttinger_vs_gamma(lutt)

    if not series:
        logger.info(f"{mode} runs have no report series; tables are in {run_dir}")
        return {}

    out_dir = os.path.join(run_dir, REPORT_DIR)
    paths = {}
    for name, rows in series.items():
        path = os.path.join(out_dir, f"{name}.csv")
        write_table(path, rows, SERIES_COLUMNS)
        check_series(path)
        paths[name] = path
    write_workbook(os.path.join(out_dir, 'report.xlsx'), series)
    logger.info(f"report: {len(series)} series written to {out_dir}")
    return paths
