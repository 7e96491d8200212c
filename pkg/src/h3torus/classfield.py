"""H^3(G, K^*) from local degrees.

For a global extension with group G of order n, H^3(G, K^*) is the cokernel
of the sum of local invariant maps

    sum_p (1/n_p) Z/Z  -->  (1/n) Z/Z,

n_p the order of the decomposition group at p.  The image of the p-summand is
exactly (1/n_p) Z/Z, so only the orders matter.  For local fields H^3 vanishes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import lcm
from typing import Any

import numpy as np

from . import zlinalg as zl
from .zlinalg import FgAbGroup


@dataclass(frozen=True)
class LocalData:
    n: int
    places: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        for label, d in self.places:
            if int(d) < 1 or self.n % int(d):
                raise ValueError(f"local degree {d} at {label!r} does not divide n={self.n}")

    @property
    def local_degrees(self) -> list[int]:
        return [int(d) for _, d in self.places]

    @classmethod
    def from_degrees(cls, n: int, degrees) -> "LocalData":
        return cls(int(n), tuple((f"v{i}", int(d)) for i, d in enumerate(degrees)))

    @classmethod
    def from_json(cls, obj: str | dict[str, Any]) -> "LocalData":
        """Accepts {"n": 9, "local_degrees": [3, 3, 1]} or
        {"n": 9, "places": [{"label": "7", "degree": 9}, ...]}."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "n" not in obj:
            raise ValueError("local data needs an object with key 'n'")
        n = obj["n"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise ValueError("'n' must be an integer")
        places = []
        for i, d in enumerate(obj.get("local_degrees", [])):
            if not isinstance(d, int) or isinstance(d, bool):
                raise ValueError("local degrees must be integers")
            places.append((f"v{i}", d))
        for p in obj.get("places", []):
            places.append((str(p.get("label", f"v{len(places)}")), int(p["degree"])))
        return cls(n, tuple(places))

    def to_json(self) -> dict:
        return {"n": self.n, "places": [{"label": l, "degree": d} for l, d in self.places]}


def h3_units_global(data: LocalData) -> FgAbGroup:
    """coker( sum_p (1/n_p)Z/Z -> (1/n)Z/Z ), as a subquotient of Z = (1/n)Z."""
    n = data.n
    # (1/n)Z/Z is Z/nZ on the generator 1/n; 1/n_p is (n/n_p) times it
    rels = [[n]] + [[n // d] for d in data.local_degrees]
    return zl.subquotient(np.array([[1]], dtype=np.int64), np.array(rels, dtype=np.int64))


def h3_units_global_lcm(data: LocalData) -> FgAbGroup:
    """Closed form Z/(n / lcm of local degrees), used as a test oracle."""
    l = lcm(1, *data.local_degrees)
    return FgAbGroup.from_cyclics([data.n // l])


def h3_units_local() -> FgAbGroup:
    """H^3(G, K^*) for an extension of local fields: always 0."""
    return FgAbGroup()
