"""Exception taxonomy shared across the package.

Three failure classes, mapped to CLI exit codes in cli.py:

* ``InputError``  -- malformed user-supplied data (bad file, non-finite
  floats, unparseable flags).  Exit code 1.
* ``UsageError``  -- an API precondition was violated (mismatched specs,
  empty buffer where one is required).  Also exit code 1.
* ``ConfigError`` -- a config file or dataclass carries values outside
  its documented domain.  Exit code 2.
* ``TrainingError`` -- a training run went wrong at runtime (data/shape
  mismatch, divergence to non-finite loss).  Exit code 1.
"""


class ApproxError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ApproxError):
    """Malformed input data: bad magic bytes, truncation, NaN/Inf floats."""


class UsageError(ApproxError):
    """A function precondition was violated by the caller."""


class ConfigError(ApproxError):
    """A configuration value is outside its documented domain."""


class TrainingError(ApproxError):
    """Training could not proceed: shape mismatch or non-finite loss."""
