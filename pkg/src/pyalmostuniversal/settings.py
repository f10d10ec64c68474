"""This module holds the configurable caps and constants used by the computations.

Usage example:

  settings = Settings.get_instance()
  settings.truant_cap = 2000

Every function which accepts a cap or constant as an optional argument falls back to
the corresponding settings value if the argument is None.
"""

from collections.abc import Mapping
from typing import Any

__all__ = ["Settings"]

DEFAULT_TRUANT_CAP = 10000
DEFAULT_MAX_LATTICE_POINTS = 200_000_000
DEFAULT_COUNT_MOD_CAP = 2**24
DEFAULT_ATTEMPTS = 5
DEFAULT_PRISM_SCALE = 0.6
DEFAULT_MAX_COVER_NORM = 64
DEFAULT_MAX_ELIGIBLE_NUMBERS = 100_000_000
DEFAULT_VERIFICATION_BOUND = 100_000
DEFAULT_MAX_DIM = 6
DEFAULT_THREADS = 1

MAX_SUPPORTED_DIM = 6


class Settings:
    """The settings shared by all computations.

    You get the settings by calling the `get_instance` method, which always returns the
    same object. Changing a property affects all later computations.

    All setters validate their value and raise a ValueError if it is invalid.
    """

    _truant_cap: int
    _max_lattice_points: int
    _count_mod_cap: int
    _attempts: int
    _prism_scale: float
    _max_cover_norm: int
    _max_eligible_numbers: int
    _verification_bound: int
    _max_dim: int
    _threads: int
    _settings: "Settings" = None  # type: ignore

    @classmethod
    def get_instance(cls) -> "Settings":
        """Return the settings."""
        if not cls._settings:
            cls._settings = cls()
            cls._settings._truant_cap = DEFAULT_TRUANT_CAP
            cls._settings._max_lattice_points = DEFAULT_MAX_LATTICE_POINTS
            cls._settings._count_mod_cap = DEFAULT_COUNT_MOD_CAP
            cls._settings._attempts = DEFAULT_ATTEMPTS
            cls._settings._prism_scale = DEFAULT_PRISM_SCALE
            cls._settings._max_cover_norm = DEFAULT_MAX_COVER_NORM
            cls._settings._max_eligible_numbers = DEFAULT_MAX_ELIGIBLE_NUMBERS
            cls._settings._verification_bound = DEFAULT_VERIFICATION_BOUND
            cls._settings._max_dim = DEFAULT_MAX_DIM
            cls._settings._threads = DEFAULT_THREADS
        return cls._settings

    @property
    def truant_cap(self) -> int:
        """The largest number checked when searching for a truant."""
        return self._truant_cap

    @truant_cap.setter
    def truant_cap(self, value: int) -> None:
        self._truant_cap = _positive("truant cap", value)

    @property
    def max_lattice_points(self) -> int:
        """The largest (estimated) number of lattice points enumerated in one go."""
        return self._max_lattice_points

    @max_lattice_points.setter
    def max_lattice_points(self, value: int) -> None:
        self._max_lattice_points = _positive("maximum number of lattice points", value)

    @property
    def count_mod_cap(self) -> int:
        """The largest number of residue vectors counted by brute force."""
        return self._count_mod_cap

    @count_mod_cap.setter
    def count_mod_cap(self, value: int) -> None:
        self._count_mod_cap = _positive("residue counting cap", value)

    @property
    def attempts(self) -> int:
        """The number of values x tried per number when checking representability."""
        return self._attempts

    @attempts.setter
    def attempts(self, value: int) -> None:
        self._attempts = _positive("number of attempts", value)

    @property
    def prism_scale(self) -> float:
        """The relative size of the prism used by approximate boolean theta functions.

        The value must be greater than 0 and at most 1.
        """
        return self._prism_scale

    @prism_scale.setter
    def prism_scale(self, value: float) -> None:
        if not 0 < value <= 1:
            raise ValueError("The prism scale must be greater than 0 and at most 1.")
        self._prism_scale = float(value)

    @property
    def max_cover_norm(self) -> int:
        """The largest norm d tried when searching for a split local cover."""
        return self._max_cover_norm

    @max_cover_norm.setter
    def max_cover_norm(self, value: int) -> None:
        self._max_cover_norm = _positive("maximum cover norm", value)

    @property
    def max_eligible_numbers(self) -> int:
        """The largest number of squarefree eligible numbers which may be generated."""
        return self._max_eligible_numbers

    @max_eligible_numbers.setter
    def max_eligible_numbers(self, value: int) -> None:
        self._max_eligible_numbers = _positive(
            "maximum number of eligible numbers", value
        )

    @property
    def verification_bound(self) -> int:
        """The bound up to which witness forms of excepted pairs are verified."""
        return self._verification_bound

    @verification_bound.setter
    def verification_bound(self, value: int) -> None:
        self._verification_bound = _positive("verification bound", value)

    @property
    def max_dim(self) -> int:
        """The largest dimension reached by escalation."""
        return self._max_dim

    @max_dim.setter
    def max_dim(self, value: int) -> None:
        if not 1 <= value <= MAX_SUPPORTED_DIM:
            raise ValueError(
                f"The maximum dimension must be between 1 and {MAX_SUPPORTED_DIM}."
            )
        self._max_dim = value

    @property
    def threads(self) -> int:
        """The number of worker threads used for enumerating lattice points."""
        return self._threads

    @threads.setter
    def threads(self, value: int) -> None:
        self._threads = _positive("number of threads", value)

    def update(self, **values: Any) -> None:
        """Update several settings at once.

        Values which are None are ignored.

        Args:
            **values: Settings values, keyed by property name.

        Raises:
            ValueError: A property does not exist or a value is invalid.
        """
        for name, value in values.items():
            if value is None:
                continue
            if not isinstance(getattr(type(self), name, None), property):
                raise ValueError(f"There is no setting called {name}.")
            setattr(self, name, value)

    def from_mapping(self, mapping: Mapping[str, Any]) -> None:
        """Update the settings from a mapping, such as a parsed JSON object.

        Args:
            mapping: Settings values, keyed by property name.

        Raises:
            ValueError: A property does not exist or a value is invalid.
        """
        self.update(**dict(mapping))


def _positive(name: str, value: int) -> int:
    # Booleans are integers, but never meaningful here.
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"The {name} must be a positive integer.")
    return value
