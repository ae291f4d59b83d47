import os
import tempfile
from contextlib import contextmanager
from typing import Union

PathLike = Union[os.PathLike, str]


@contextmanager
def atomic_path(path: PathLike):
    """Yield a temporary sibling of ``path`` and move it into place once the block succeeds.

    Readers never observe a partially written file: on error the temporary file
    is removed and ``path`` is left untouched.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", suffix=os.path.basename(path), dir=directory)
    os.close(fd)
    try:
        yield tmp_path
        os.replace(tmp_path, path)
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)


def atomic_write_text(path: PathLike, text: str):
    with atomic_path(path) as tmp_path:
        with open(tmp_path, "w") as out_IO:
            out_IO.write(text)
    return path
