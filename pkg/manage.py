"""Command-line entry point for filtering experiments."""

import logging.config
import sys


def main():
    """Configure logging and dispatch to the experiment commands."""
    from ensemble_service import settings
    from experiments.commands import cli

    logging.config.dictConfig(settings.LOGGING)
    cli(args=sys.argv[1:], prog_name="manage.py")


if __name__ == "__main__":
    main()
