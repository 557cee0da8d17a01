"""
Argument checks shared by every module

Each check gets the value, the name shown in the error message and the exception
class the calling module raises, so a bad beta surfaces as a SimException and a
bad window size as an NNException.
"""
import numbers

import numpy as np

class CheckException(Exception):
    pass

int_types = (int, np.integer)


def _caller_args(vname, vexc):
    """
    Makes sure the name is printable and the exception class can be raised

    Args:
        vname (str): variable name
        vexc (type): exception class
    """
    if not isinstance(vname, (str, bytes)):
        raise CheckException("vname must be a string, got {0!r}".format(vname))
    if not isinstance(vexc, type) or not issubclass(vexc, Exception):
        raise CheckException("vexc must be an Exception subclass, got {0!r}".format(vexc))


def _real_number(var, vname, vexc):
    # bools are numbers.Number but never a valid rate or count
    _caller_args(vname, vexc)
    if isinstance(var, bool) or not isinstance(var, numbers.Number):
        raise vexc("{0} must be a real number, got {1!r}".format(vname, var))
    if not np.isrealobj(var):
        raise vexc("{0} must be real".format(vname))
    if not np.isfinite(var):
        raise vexc("{0} must be finite".format(vname))


def _integer(var, vname, vexc):
    _caller_args(vname, vexc)
    if isinstance(var, bool) or not isinstance(var, int_types):
        raise vexc("{0} must be an integer, got {1!r}".format(vname, var))


def real_positive_scalar(var, vname, vexc):
    """
    Real, finite and > 0

    Args:
        var: value to check
        vname (str): name used in the error message
        vexc (type): exception raised on failure

    Returns:
        var
    """
    _real_number(var, vname, vexc)
    if var <= 0:
        raise vexc("{0} must be positive".format(vname))
    return var


def real_nonnegative_scalar(var, vname, vexc):
    """
    Real, finite and >= 0
    """
    _real_number(var, vname, vexc)
    if var < 0:
        raise vexc("{0} must be nonnegative".format(vname))
    return var


def probability(var, vname, vexc, allow_zero=True):
    """
    A per-step probability such as beta or mu: real and in [0, 1], or in (0, 1]
    when allow_zero is False

    Args:
        var: value to check
        vname (str): name used in the error message
        vexc (type): exception raised on failure
        allow_zero (bool): whether 0 is admissible

    Returns:
        var
    """
    _real_number(var, vname, vexc)
    if var > 1:
        raise vexc("{0} must be at most 1".format(vname))
    if var < 0 or (var == 0 and not allow_zero):
        raise vexc("{0} must be in {1}0, 1]".format(vname, "[" if allow_zero else "("))
    return var


def positive_scalar_integer(var, vname, vexc):
    """
    Integer (Python or numpy, not bool) and > 0

    Returns:
        var
    """
    _integer(var, vname, vexc)
    if var <= 0:
        raise vexc("{0} must be positive".format(vname))
    return var


def nonnegative_scalar_integer(var, vname, vexc):
    """
    Integer (Python or numpy, not bool) and >= 0

    Returns:
        var
    """
    _integer(var, vname, vexc)
    if var < 0:
        raise vexc("{0} must be nonnegative".format(vname))
    return var


def oneD_array(var, vname, vexc):
    """
    Casts to a numpy array and checks it is a non-empty real 1D vector

    Args:
        var: value to check
        vname (str): name used in the error message
        vexc (type): exception raised on failure

    Returns:
        np.array: var as an array
    """
    _caller_args(vname, vexc)
    var = np.asarray(var)
    if var.ndim != 1:
        raise vexc("{0} must be 1D, got shape {1}".format(vname, var.shape))
    if var.size == 0:
        raise vexc("{0} must not be empty".format(vname))
    if var.dtype.kind not in "biuf":
        raise vexc("{0} must be a real numeric array".format(vname))
    return var
