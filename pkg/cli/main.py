import argparse
import logging
import sys
from typing import List, Optional

import files
from chain.algebra import InconsistentMarginalsError
from chain.checks import ChainValidationError, ExitCode
from chain.core import ChainError, DimensionError
from chain.tail import InvalidEventError
from cli.commands import cmd_countable, cmd_entrance, cmd_validate, cmd_zeroone
from report_writer import ReportWriter, error_summary
from settings import program_version, simulation_settings

LOGGER = logging.getLogger('cli')

COMMANDS = {
    'validate': cmd_validate,
    'entrance': cmd_entrance,
    'zeroone': cmd_zeroone,
    'countable': cmd_countable,
}

VALIDATION_ERRORS = (ChainValidationError, InvalidEventError, InconsistentMarginalsError, DimensionError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Zero-one laws and entrance laws of nonhomogeneous Markov chains.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {program_version}')
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name: str, help_text: str, out_required: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--spec', metavar='FILE', required=True, help='Path to a JSON chain specification')
        p.add_argument('--out', metavar='DIR', required=out_required, help='Directory for CSV tables and summary.json')
        return p

    command('validate', 'Check the chain for stochasticity and dimension chaining', out_required=False)

    entrance = command('entrance', 'Existence and uniqueness of the entrance law at a time t')
    entrance.add_argument('--depth', metavar='D', type=int, default=50, help='Number of steps into the past')
    entrance.add_argument('--tol', metavar='T', type=float, help='Diameter under which the law is unique')
    entrance.add_argument('--time', metavar='T', type=int, help='Report time, the window end by default')

    zeroone = command('zeroone', 'Band probabilities of a tail event')
    zeroone.add_argument('--simulate', metavar='N', type=int, help='Number of simulated trajectories')
    zeroone.add_argument('--seed', metavar='S', type=int, default=0, help='Root seed of the simulation')
    zeroone.add_argument('--workers', metavar='W', type=int, default=simulation_settings.workers,
                         help='Number of simulation threads, does not change the results')

    countable = command('countable', 'Tightness and truncation reports of a countable family')
    countable.add_argument('--rw-max', metavar='N', type=int, default=1000,
                           help='Largest n of the random walk bound sweep')
    return parser


def _fail(code: ExitCode, message: str) -> int:
    LOGGER.error(message)
    print(error_summary(int(code), message))
    return int(code)


def main(args) -> int:
    try:
        spec = files.read_chain_spec(args.spec)
    except FileNotFoundError:
        return _fail(ExitCode.PARSE, f'No such file: {args.spec}')
    except files.FormatError as e:
        return _fail(ExitCode.PARSE, f'Failed to parse {args.spec}: {e.message}')
    except VALIDATION_ERRORS as e:
        return _fail(ExitCode.VALIDATION, e.message)

    with ReportWriter(args.out) as writer:
        try:
            summary, code = COMMANDS[args.command](args, spec, writer)
        except files.FormatError as e:
            return _fail(ExitCode.PARSE, e.message)
        except VALIDATION_ERRORS as e:
            return _fail(ExitCode.VALIDATION, e.message)
        except ChainError as e:
            return _fail(ExitCode.INFEASIBLE, e.message)
        except ValueError as e:
            return _fail(ExitCode.INFEASIBLE, str(e))
        summary['exit_code'] = int(code)
        print(writer.summary(summary))
    return int(code)


def run(argv: Optional[List[str]] = None) -> int:
    return main(build_parser().parse_args(argv))


if __name__ == '__main__':
    sys.exit(run())
