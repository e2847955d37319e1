"""Application entry point. It is responsible for setting up the environment and running the requested analysis."""

import logging
import sys

# Read configuration, ignore unused import
# noinspection PyUnresolvedReferences
import config
# NOTE: before this line only standard library modules can be imported


from cli.main import build_parser, main as cli_main

LOGGER = logging.getLogger()


def excepthook(exc_type, value, traceback):
    LOGGER.critical("Uncaught exception", exc_info=(exc_type, value, traceback))


if __name__ == '__main__':
    try:
        sys.excepthook = excepthook

        args = build_parser().parse_args()
        sys.exit(cli_main(args))
    except KeyboardInterrupt:
        LOGGER.warning('Process interrupted')
