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

""" Module for utility functions that don't really fit anywhere else. """

import json
import math

import numpy as np

GREEN = "\x1b[32m"
REDB = "\x1b[1;31m"
YELLOW = "\x1b[33m"
RED = "\x1b[31m"
ORANGE = "\x1b[38;5;208m"
BRIGHT_CYAN = "\x1b[1;36m"
RESET = "\x1b[0m"

def green(msg):
    return "%s%s%s" % (GREEN, msg, RESET)

def red(msg):
    return "%s%s%s" % (REDB, msg, RESET)

def bright_cyan(msg):
    return "%s%s%s" % (BRIGHT_CYAN, msg, RESET)

def format_sig(value, digits=6):
    """ Format a number with a fixed number of significant digits.

    None and non-finite values become an empty string so a report never
    shows a bare NaN.
    """
    if value is None:
        return ""
    value = float(value)
    if not math.isfinite(value):
        return ""
    return "%.*g" % (digits, value)

def to_jsonable(obj):
    """ Convert numpy containers and scalars for json.dump, keeping full
    precision. Non-finite floats are mapped to None. """
    if isinstance(obj, dict):
        return {str(key): to_jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj

def dump_json(obj, fileobj):
    json.dump(to_jsonable(obj), fileobj, indent=2, sort_keys=True)
    fileobj.write("\n")
