"""
 layoutforge: shared helpers (logging, json, file io)

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import sys
import io
import tempfile
import logging
import logging.handlers
from json import dumps as json_dumps
import colorlog
import numpy as np
from PIL import Image

log = logging.getLogger(__name__)


def setup_log(argv):
    """setup logging"""
    log_format_colored = (
        "%(green)s[%(asctime)s]%(reset)s%(blue)s %(log_color)s%(levelname)7s%(reset)s "
        "- %(funcName)s"
        ":%(log_color)s %(message)s"
    )
    log_format = "[%(asctime)-15s] %(levelname)7s - %(funcName)s  %(message)s"
    if getattr(argv, "debug", False):
        loglevel = logging.DEBUG
    else:
        loglevel = logging.INFO
    stdout = logging.StreamHandler(stream=sys.stderr)
    handler = []
    formatter = colorlog.ColoredFormatter(
        log_format_colored,
        log_colors={
            "WARNING": "yellow",
            "ERROR": "red",
            "DEBUG": "cyan",
            "CRITICAL": "red",
        },
    )
    stdout.setFormatter(formatter)
    handler.append(stdout)
    if getattr(argv, "syslog", False) is True:
        handler.append(logging.handlers.SysLogHandler(address="/dev/log"))
    logfile = getattr(argv, "logfile", "") or ""
    if logfile != "":
        logpath = os.path.dirname(logfile)
        if logpath != "":
            os.makedirs(logpath, exist_ok=True)
        handler.append(logging.FileHandler(logfile, mode="a"))
    logging.basicConfig(format=log_format, level=loglevel, handlers=handler, force=True)
    return logging.getLogger(__name__)


def json_pp(json):
    """human readable json output"""
    return json_dumps(json, indent=4, sort_keys=True, ensure_ascii=False, default=str)


def json_compact(obj):
    """Canonical compact json: insertion key order, utf-8, no spaces"""
    return json_dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_file(target, data):
    """Write bytes or text atomically: write to a private temporary file in
    the same directory and rename it over the target"""
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    encoding = None if mode == "wb" else "utf-8"
    tmpfile = None
    try:
        targetdir = os.path.dirname(target)
        if targetdir != "":
            os.makedirs(targetdir, exist_ok=True)
        handle, tmpfile = tempfile.mkstemp(
            dir=targetdir or ".", prefix=f".{os.path.basename(target)}.", suffix=".partial"
        )
        with os.fdopen(handle, mode, encoding=encoding) as out_file:
            out_file.write(data)
        os.chmod(tmpfile, 0o644)
        os.replace(tmpfile, target)
    except OSError as errmsg:
        if tmpfile is not None and os.path.exists(tmpfile):
            os.remove(tmpfile)
        raise RuntimeError(f"Unable to write file [{target}]: [{errmsg}]") from errmsg


def gray_from_pil(image):
    """Convert a PIL image into a 2D uint8 luminance array. RGB input is
    converted with L = 0.299R + 0.587G + 0.114B"""
    if image.mode in ("RGBA", "LA", "P", "CMYK", "I;16", "I", "F", "1"):
        image = image.convert("RGB")
    if image.mode != "L":
        image = image.convert("L")
    return np.asarray(image, dtype=np.uint8).copy()


def png_bytes(array):
    """Encode a 2D uint8 array (or RGB HxWx3) as PNG bytes"""
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array)).save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def read_png(data):
    """Decode PNG bytes or a path into a 2D uint8 luminance array"""
    if isinstance(data, (bytes, bytearray)):
        data = io.BytesIO(data)
    with Image.open(data) as image:
        image.load()
        return gray_from_pil(image)
