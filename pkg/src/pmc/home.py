#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import inspect
import os
import sys

import pmc


def home(dataDir=None):
    """Return the pathname of the pmc root directory (or a data subdirectory).
    Parameters
    ----------
    dataDir : str
        If not None, return the path to a packaged data directory such as ``template``
    Returns
    -------
    dir : str
        The directory
    Example
    -------
    .. ipython:: python

        from pmc.home import home
        import os
        print(home())
        os.path.join(home(dataDir="template"), "blobs_mm2.yaml")
    """

    homeDir = os.path.dirname(inspect.getfile(pmc))
    try:
        if sys._MEIPASS:
            homeDir = sys._MEIPASS
    except Exception:
        pass

    if dataDir:
        path = os.path.join(homeDir, dataDir)
        if not os.path.isdir(path):
            raise FileNotFoundError(f"Could not find data directory '{dataDir}' under {homeDir}")
        return path
    return homeDir


if __name__ == "__main__":
    print(home())
