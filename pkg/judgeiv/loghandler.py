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

import sys
import os
import logging
import time

from judgeiv import util


def _isatty(stream):
    try:
        return os.isatty(stream.fileno())
    except (AttributeError, ValueError, OSError):
        return False


class ColourLogHandler(logging.StreamHandler):
    """A stream log handler that colours the level and message when
    writing to a terminal and falls back to plain lines otherwise."""

    def formatTime(self, record):
        lt = time.localtime(record.created)
        return "%d/%d/%d -- %02d:%02d:%02d" % (
            lt.tm_mday, lt.tm_mon, lt.tm_year,
            lt.tm_hour, lt.tm_min, lt.tm_sec)

    def emit(self, record):
        try:
            message = record.getMessage()
        except Exception:
            self.handleError(record)
            return

        if record.levelno >= logging.ERROR:
            level_prefix = util.REDB
            message_prefix = util.REDB
        elif record.levelno >= logging.WARNING:
            level_prefix = util.ORANGE
            message_prefix = util.ORANGE
        else:
            level_prefix = util.YELLOW
            message_prefix = ""

        if _isatty(self.stream):
            self.stream.write("%s%s%s - <%s%s%s> -- %s%s%s\n" % (
                util.GREEN,
                self.formatTime(record),
                util.RESET,
                level_prefix,
                record.levelname.title(),
                util.RESET,
                message_prefix,
                message,
                util.RESET))
        else:
            self.stream.write("%s - <%s> -- %s\n" % (
                self.formatTime(record),
                record.levelname.title(),
                message))
        self.flush()


class LessThanFilter(logging.Filter):
    def __init__(self, exclusive_maximum, name=""):
        super(LessThanFilter, self).__init__(name)
        self.max_level = exclusive_maximum

    def filter(self, record):
        return 1 if record.levelno < self.max_level else 0


def _same_stream(a, b):
    try:
        return os.fstat(a.fileno()) == os.fstat(b.fileno())
    except (AttributeError, ValueError, OSError):
        return False


def configure_logging(stdout=None, stderr=None):
    """Send information to stdout and warnings and errors to stderr.

    When both streams end up in the same place the stdout handler is
    filtered so nothing is written twice.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    logger = logging.getLogger()
    logger.setLevel(logging.NOTSET)
    logging_handler_out = ColourLogHandler(stdout)
    logging_handler_out.setLevel(logging.DEBUG)
    if _same_stream(stdout, stderr):
        logging_handler_out.addFilter(LessThanFilter(logging.WARNING))
    logger.addHandler(logging_handler_out)
    logging_handler_err = ColourLogHandler(stderr)
    logging_handler_err.setLevel(logging.WARNING)
    logger.addHandler(logging_handler_err)
