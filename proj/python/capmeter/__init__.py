"""Charge-sharing capacitor measurement simulator."""

try:
    from ._capmeter import *  # noqa: F401,F403
    from ._capmeter import __doc__ as _doc
except ImportError:  # built in-tree: module sits next to the package
    from _capmeter import *  # noqa: F401,F403
    from _capmeter import __doc__ as _doc

__doc__ = _doc
__version__ = "0.1.0"
