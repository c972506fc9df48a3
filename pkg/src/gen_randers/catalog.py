"""Shipped instances: a base metric, a 1-form and the hypotheses they satisfy."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .geometry import MetricField
from .randers import OneFormField, RandersBundle

TAGS = ("zero_b", "flat", "parallel_b", "closed", "berwald_base", "landsberg_base",
        "general_landsberg_base", "riemannian_base")


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    description: str
    n: int
    base: str
    form: tuple[str, ...]
    tags: frozenset[str] = field(default_factory=frozenset)
    x_box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        unknown = set(self.tags) - set(TAGS)
        if unknown:
            raise ValueError(f"unknown tags {sorted(unknown)}")

    @cached_property
    def bundle(self) -> RandersBundle:
        return RandersBundle(MetricField.from_expression(self.base, self.n, name=self.id),
                             OneFormField(list(self.form), self.n))

    def box(self) -> tuple[tuple[float, float], ...]:
        return self.x_box or ((-1.0, 1.0),) * self.n

    def to_dict(self) -> dict:
        return {"id": self.id, "description": self.description, "n": self.n,
                "base": self.base, "form": list(self.form), "tags": sorted(self.tags)}


_EUCLID = "sqrt(y1^2+y2^2)"
_RIEMANN_TAGS = {"berwald_base", "landsberg_base", "general_landsberg_base", "riemannian_base"}

CATALOG: dict[str, CatalogEntry] = {e.id: e for e in [
    CatalogEntry("euclid_flat", "Euclidean plane, b = 0", 2, _EUCLID, ("0", "0"),
                 frozenset({"zero_b", "flat", "parallel_b", "closed"} | _RIEMANN_TAGS)),
    CatalogEntry("euclid_const_b", "Euclidean plane, constant b = (0.1, 0)", 2, _EUCLID,
                 ("0.1", "0"),
                 frozenset({"flat", "parallel_b", "closed"} | _RIEMANN_TAGS)),
    CatalogEntry("euclid_closed_b", "Euclidean plane, exact b = 0.5 cos(x1) dx1", 2, _EUCLID,
                 ("0.5*cos(x1)", "0"),
                 frozenset({"flat", "closed"} | _RIEMANN_TAGS)),
    CatalogEntry("euclid_curl_b", "Euclidean plane, b = 0.1(-x2, x1) with constant curl", 2,
                 _EUCLID, ("-0.1*x2", "0.1*x1"),
                 frozenset({"flat"} | _RIEMANN_TAGS)),
    CatalogEntry("conformal_const_b", "conformal base exp(x1)|y|, constant b = (0.1, 0)", 2,
                 "exp(x1)*sqrt(y1^2+y2^2)", ("0.1", "0"),
                 frozenset({"flat", "closed"} | _RIEMANN_TAGS)),
    # beyond the minimum set: a non-Riemannian base and a 3-dimensional case
    CatalogEntry("finsler_mixed_b", "Randers-type Finsler base, non-closed b", 2,
                 "sqrt((1+x2^2)*y1^2+y2^2)+0.2*sin(x1)*y2", ("0.1*x2", "0.15*x1^2"),
                 frozenset()),
    CatalogEntry("conformal3_curl_b", "conformal base in 3 dimensions, non-closed b", 3,
                 "exp(0.5*x1)*sqrt(y1^2+y2^2+y3^2)", ("0.1*x2", "-0.1*x1+0.05", "0.1*x3"),
                 frozenset(_RIEMANN_TAGS)),
]}

REQUIRED_IDS = ("euclid_flat", "euclid_const_b", "euclid_closed_b", "euclid_curl_b",
                "conformal_const_b")


def get_entry(instance_id: str) -> CatalogEntry:
    try:
        return CATALOG[instance_id]
    except KeyError:
        raise KeyError(f"unknown catalog instance {instance_id!r}") from None
