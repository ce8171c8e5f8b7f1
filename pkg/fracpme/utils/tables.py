# Import libraries
import json
import logging
import os
import tempfile

import pandas as pd

from fracpme import __version__
from fracpme.exceptions import ConfigError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")


# ====================
# === TABLE OUTPUT ===
# ====================
def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".fracpme-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def render_csv(df, command, created_at, metadata=None):
    """
    CSV text with a commented header.
    :param df: pandas.DataFrame
        Table to emit, written without index.
    :param command: str
        Name of the producing command.
    :param created_at: str
        ISO-8601 stamp written in the first header line.
    :param metadata: dict, default=None
        Extra ``# key=value`` header lines, in insertion order.
    :return: str
    """
    lines = [f"# fracpme v{__version__} {command} {created_at}"]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    body = df.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    return "\n".join(lines) + "\n" + body


def render_json(df, command, created_at, metadata=None):
    """
    JSON text holding the same header and the columns of ``df``.
    Missing values are written as null.
    """
    clean = df.astype(object).where(pd.notna(df), None)
    payload = {
        "fracpme": __version__,
        "command": command,
        "created_at": created_at,
        "metadata": metadata or {},
        "columns": list(df.columns),
        "data": clean.to_dict(orient="list"),
    }
    return json.dumps(payload, indent=2, default=str) + "\n"


def write_table(df, path, command, created_at, metadata=None, fmt="csv"):
    """
    Write ``df`` to ``path`` atomically (temporary file, then rename).
    :param fmt: str, default="csv"
        Either "csv" or "json".
    :return: str
        The path written.
    """
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {fmt!r}")
    render = render_csv if fmt == "csv" else render_json
    _atomic_write(path, render(df, command, created_at, metadata))
    logger.info("wrote %d rows to %s", len(df), path)
    return path


def read_table(path):
    """
    Read back a CSV written by :func:`write_table`, skipping the header.
    :return: pandas.DataFrame
    """
    return pd.read_csv(path, comment="#")
