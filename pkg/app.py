# -*- coding: utf-8 -*-
"""
cmpslab
Command-line application for variational cMPS studies of Lieb-Liniger gases
"""

import logging

import click

from config import Config, active_config
from core import __version__


def configure_logging(level=None):
    level = (level or active_config().LOG_LEVEL or Config.LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def create_app():
    @click.group(name='cmpslab')
    @click.version_option(version=__version__, prog_name='cmpslab')
    @click.option('--log-level', envvar='CMPSLAB_LOG', default=None, help='Logging level (env CMPSLAB_LOG)')
    def cli(log_level):
        """Variational cMPS solver for single and coupled Lieb-Liniger gases"""
        configure_logging(log_level)

    # Register commands
    from commands.run import run_cmd, resume_cmd
    from commands.report import report_cmd
    from commands.bethe import bethe_cmd

    cli.add_command(run_cmd)
    cli.add_command(resume_cmd)
    cli.add_command(report_cmd)
    cli.add_command(bethe_cmd)

    return cli


cli = create_app()

if __name__ == '__main__':
    cli()
