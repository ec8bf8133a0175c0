import json
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from Objects.distributions import (
    DiscreteDistribution,
    Instance,
    make_distribution,
)
from Objects.errors import (
    DistributionError,
    InstanceParseError,
    ReferenceNotOnGrid,
    ToleranceNotReached,
)

logger = logging.getLogger(__name__)


class CandidateFile(BaseModel):
    """One candidate as written in an instance file."""

    support: List[Tuple[float, float]] = Field(
        title="Support",
        description="List of [value, probability] pairs.",
        min_length=1,
    )


class InstanceFile(BaseModel):
    """Schema of an instance file."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    lam: float = Field(
        default=0.0,
        alias="lambda",
        title="Loss Aversion",
        description="Multiplier on the shortfall below the reference value.",
    )
    initial_reference: float = Field(
        default=0.0,
        title="Initial Reference",
        description="Reference value before the first candidate arrives.",
        ge=0.0,
    )
    candidates: List[CandidateFile] = Field(
        title="Candidates",
        description="Candidate distributions in arrival order.",
        min_length=1,
    )


class Utilities:
    @staticmethod
    def grid_index(grid: np.ndarray, value: float) -> int:
        """Return the position of ``value`` in a sorted grid.

        Args:
            grid (np.ndarray): Ascending reference grid.
            value (float): The value to locate; must match a grid point exactly.

        Returns:
            int: Index of the grid point.

        Raises:
            ReferenceNotOnGrid: If the value is not a grid point.
        """
        position = int(np.searchsorted(grid, value))
        if position >= len(grid) or grid[position] != value:
            raise ReferenceNotOnGrid(f"Value {value!r} is not on the reference grid.")
        return position

    @staticmethod
    def bisect(
        func: Callable[[float], float],
        lower: float,
        upper: float,
        tol: float,
        max_iter: int = 400,
    ) -> Tuple[float, int]:
        """Find a root of a monotone function on a bracketing interval.

        Stops when the residual is within ``tol`` or when the interval can no longer
        be halved in double precision.

        Args:
            func: Function whose sign changes between ``lower`` and ``upper``.
            lower: Left end of the bracket.
            upper: Right end of the bracket.
            tol: Accepted absolute residual.
            max_iter: Iteration cap.

        Returns:
            Tuple[float, int]: The root and the number of iterations used.

        Raises:
            ToleranceNotReached: If the bracket has no sign change or the cap is hit.
        """
        f_lower = func(lower)
        if abs(f_lower) <= tol:
            return lower, 0
        f_upper = func(upper)
        if abs(f_upper) <= tol:
            return upper, 0
        if np.sign(f_lower) == np.sign(f_upper):
            raise ToleranceNotReached(
                f"No sign change on [{lower!r}, {upper!r}]: "
                f"f={f_lower!r} and f={f_upper!r}."
            )

        for iteration in range(1, max_iter + 1):
            middle = 0.5 * (lower + upper)
            f_middle = func(middle)
            if abs(f_middle) <= tol or middle in (lower, upper):
                logger.debug(
                    "bisection converged after %d iterations, residual %.3e",
                    iteration,
                    f_middle,
                )
                return middle, iteration
            if np.sign(f_middle) == np.sign(f_lower):
                lower, f_lower = middle, f_middle
            else:
                upper = middle

        raise ToleranceNotReached(
            f"Bisection did not reach tolerance {tol} in {max_iter} iterations."
        )

    @staticmethod
    def parse_instance(
        payload: dict, source: str = "<instance>", lam: Optional[float] = None
    ) -> Instance:
        """Build an instance from its JSON object.

        Args:
            payload: The decoded JSON object.
            source: Name used in error messages.
            lam: Loss aversion overriding the one in the payload.

        Raises:
            InstanceParseError: If the payload violates the schema.
            DistributionError: If a candidate is not a valid distribution; the message
                names the offending candidate.
        """
        try:
            schema = InstanceFile.model_validate(payload)
        except ValidationError as error:
            first = error.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise InstanceParseError(
                f"{source}: {location}: {first['msg']}"
            ) from error

        candidates: List[DiscreteDistribution] = []
        for index, candidate in enumerate(schema.candidates):
            try:
                candidates.append(make_distribution(candidate.support))
            except DistributionError as error:
                raise type(error)(f"{source}: candidates[{index}]: {error}") from error

        return Instance(
            candidates=tuple(candidates),
            lam=schema.lam if lam is None else lam,
            initial_reference=schema.initial_reference,
        )

    @staticmethod
    def load_instance(path: Union[str, Path], lam: Optional[float] = None) -> Instance:
        """Read an instance file.

        Args:
            path: Location of the JSON file.
            lam: Loss aversion overriding the value stored in the file.

        Returns:
            Instance: The parsed instance.

        Raises:
            InstanceParseError: If the file is unreadable, not JSON, or off-schema.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as error:
            raise InstanceParseError(f"{path}: cannot read file: {error}") from error

        try:
            payload = json.loads(text)
        except json.JSONDecodeError as error:
            raise InstanceParseError(
                f"{path}:{error.lineno}:{error.colno}: {error.msg}"
            ) from error

        logger.debug("loaded instance file %s", path)
        return Utilities.parse_instance(payload, source=str(path), lam=lam)

    @staticmethod
    def sorted_pairs(
        masses: dict, keys: Optional[Sequence[float]] = None
    ) -> List[Tuple[float, float]]:
        """Positive masses as (key, mass) pairs in ascending key order."""
        keys = sorted(masses) if keys is None else keys
        return [(k, float(masses[k])) for k in keys if masses.get(k, 0.0) > 0.0]
