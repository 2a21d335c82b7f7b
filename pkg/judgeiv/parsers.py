# Copyright (C) 2024 The judgeiv authors
#
# You can copy, redistribute or modify this Program under the terms of
# the GNU General Public License version 2 as published by the Free
# Software Foundation.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# version 2 along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA
# 02110-1301, USA.

# This module contains functions for command line parsers for
# judgeiv

import argparse
import sys

from judgeiv import commands, config
from judgeiv.version import version

# Global arguments - command line options for every judgeiv command
global_arg = [
    (("-v", "--verbose"),
     {'action': 'store_true', 'default': None,
      'help': "Be more verbose"}),
    (("-q", "--quiet"),
     {'action': 'store_true', 'default': None,
      'help': "Be quiet, warning and error messages only"}),
    (("-c", "--config"),
     {'metavar': '<filename>',
      'help': "configuration file (default: %s if present)" % (
          config.DEFAULT_CONFIG_PATH)}),
    (("--seed",),
     {'metavar': '<int>', 'type': int,
      'help': "Seed of the random streams (default: 1)"}),
    (("--workers",),
     {'metavar': '<int>', 'type': int,
      'help': "Number of worker processes (default: 1)"}),
    (("--dump-sample-configs",),
     {'action': 'store_true', 'default': False,
      'help': "Dump sample config and schema files to current directory"}),
    (("-V", "--version"),
     {'action': 'store_true', 'default': False,
      'help': "Display version"})
]


def parse_global():
    global_parser = argparse.ArgumentParser(add_help=False)

    for arg, opts in global_arg:
        global_parser.add_argument(*arg, **opts)

    return global_parser


def parse_commands(subparsers, global_parser):
    commands.dgp.register(subparsers.add_parser(
        "dgp", parents=[global_parser],
        help="Generate a synthetic dataset"))
    commands.simulate.register(subparsers.add_parser(
        "simulate", parents=[global_parser],
        help="Run a Monte-Carlo study"))
    commands.estimate.register(subparsers.add_parser(
        "estimate", parents=[global_parser],
        help="Estimate from a CSV dataset"))
    commands.check.register(subparsers.add_parser(
        "check", parents=[global_parser],
        help="Run the self-check suite"))


def build_parser(global_parser=None):
    if global_parser is None:
        global_parser = parse_global()
    parser = argparse.ArgumentParser(
        prog="judgeiv", parents=[global_parser],
        formatter_class=argparse.RawDescriptionHelpFormatter)
    subparsers = parser.add_subparsers(dest="subcommand", metavar="<command>")
    parse_commands(subparsers, global_parser)
    return parser


def parse_arg(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    global_parser = parse_global()
    global_args, rem = global_parser.parse_known_args(argv)

    if global_args.version:
        print("judgeiv version {}".format(version))
        sys.exit(0)

    parser = build_parser(global_parser)
    args = parser.parse_args(rem)

    # Merge global args into args.
    for arg in vars(global_args):
        if not hasattr(args, arg):
            setattr(args, arg, getattr(global_args, arg))
        elif hasattr(args, arg) and getattr(args, arg) is None:
            setattr(args, arg, getattr(global_args, arg))

    return args
