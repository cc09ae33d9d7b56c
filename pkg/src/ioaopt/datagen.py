"""Seeded synthesis of facility-location benchmark instances.

Four families of draws, named after the classic capacitated-location
test sets they imitate:

- ``1a``: 10x50 default, coords U(10,200)^2, d ~ U(10,50), F ~ U(300,700),
  K ~ U(100,500), transport 4x Euclidean distance.
- ``1b``: as ``1a`` but 20 facilities and d ~ U(30,80).
- ``2``: 30x150 default, coords U(10,300)^2, K ~ U(200,600), transport
  4*(depot-to-facility + distance + depot-to-customer) + 2*a_j with the
  depot at the origin and a per-facility surcharge a_j ~ U(0,50).
- ``3-analog``: clustered-coordinate analog (seeded Gaussian clusters
  mixed with uniform points), F ~ U(300,600), K ~ U(100,500); the
  transport form follows family 1 or family 2, chosen by the seed in
  the 9:6 proportion the originals use.

Draw order per instance is fixed so identical specs are bit-identical:
transport-style coin (family 3 only), customer coordinates, demands,
fixed costs, capacities (redrawn until total capacity covers total
demand, at most 100 attempts), then the family-2 surcharge.  Facility
sites are picked from the customer coordinates by a greedy-plus-swap
p-median pass, transport is divided by each customer's demand for the
multi-sourcing convention, and every deflection point sits at
``beta * K_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ioaopt.flp import Facility, FlpInstance, production_curve

SET_DEFAULTS = {
    "1a": (10, 50),
    "1b": (20, 50),
    "2": (30, 150),
    "3-analog": (10, 70),
}
MAX_CAPACITY_REDRAWS = 100


@dataclass(frozen=True)
class GenSpec:
    set_id: str
    seed: int
    ftype: int = 1
    structure: int = 1
    n: int | None = None
    m: int | None = None
    beta: float = 0.5

    def resolved(self) -> tuple[int, int]:
        if self.set_id not in SET_DEFAULTS:
            raise ValueError(f"unknown set id {self.set_id!r}")
        dn, dm = SET_DEFAULTS[self.set_id]
        n = dn if self.n is None else self.n
        m = dm if self.m is None else self.m
        if n <= 0 or m <= 0:
            raise ValueError("n and m must be positive")
        if n > m:
            raise ValueError("site selection needs at least as many customers as facilities")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        return n, m


def _pmedian_sites(coords: np.ndarray, n: int) -> np.ndarray:
    """Greedy p-median with a swap-improvement pass; returns indices."""
    m = len(coords)
    dist = np.hypot(coords[:, None, 0] - coords[None, :, 0],
                    coords[:, None, 1] - coords[None, :, 1])
    chosen: list[int] = []
    best = np.full(m, np.inf)
    for _ in range(n):
        # adding candidate c drops each row's cost to min(best, dist[:, c])
        totals = np.minimum(best[:, None], dist).sum(axis=0)
        totals[chosen] = np.inf
        c = int(np.argmin(totals))
        chosen.append(c)
        best = np.minimum(best, dist[:, c])

    def cost(sel: list[int]) -> float:
        return float(dist[:, sel].min(axis=1).sum())

    current = cost(chosen)
    for _ in range(50):
        improved = False
        for si, s in enumerate(chosen):
            for c in range(m):
                if c in chosen:
                    continue
                trial = chosen.copy()
                trial[si] = c
                t = cost(trial)
                if t < current - 1e-12:
                    chosen, current = trial, t
                    improved = True
                    break
            if improved:
                break
        if not improved:
            break
    return np.array(sorted(chosen))


def generate(spec: GenSpec) -> FlpInstance:
    n, m = spec.resolved()
    rng = np.random.default_rng(spec.seed)

    style = spec.set_id
    if spec.set_id == "3-analog":
        style = "1a" if rng.random() < 9.0 / 15.0 else "2"
        ncl = int(rng.integers(3, 7))
        centers = rng.uniform(10.0, 200.0, size=(ncl, 2))
        member = rng.integers(0, ncl, size=m)
        scatter = rng.normal(0.0, 15.0, size=(m, 2))
        uniform_pick = rng.random(m) < 0.5
        uniform_pts = rng.uniform(10.0, 200.0, size=(m, 2))
        coords = np.where(uniform_pick[:, None], uniform_pts,
                          centers[member] + scatter)
        demands = rng.uniform(10.0, 50.0, size=m)
        fixed = rng.uniform(300.0, 600.0, size=n)
        k_lo, k_hi = 100.0, 500.0
    else:
        hi = 300.0 if spec.set_id == "2" else 200.0
        coords = rng.uniform(10.0, hi, size=(m, 2))
        d_lo, d_hi = (30.0, 80.0) if spec.set_id == "1b" else (10.0, 50.0)
        demands = rng.uniform(d_lo, d_hi, size=m)
        fixed = rng.uniform(300.0, 700.0, size=n)
        k_lo, k_hi = (200.0, 600.0) if spec.set_id == "2" else (100.0, 500.0)

    total_d = float(demands.sum())
    for attempt in range(MAX_CAPACITY_REDRAWS):
        caps = rng.uniform(k_lo, k_hi, size=n)
        if caps.sum() >= total_d:
            break
    else:
        raise ValueError(
            f"could not cover total demand {total_d:g} in "
            f"{MAX_CAPACITY_REDRAWS} capacity draws")

    sites = _pmedian_sites(coords, n)
    fac_xy = coords[sites]
    e = np.hypot(coords[:, None, 0] - fac_xy[None, :, 0],
                 coords[:, None, 1] - fac_xy[None, :, 1])
    if style == "2":
        a_j = rng.uniform(0.0, 50.0, size=n)
        dw_fac = np.hypot(fac_xy[:, 0], fac_xy[:, 1])
        dw_cust = np.hypot(coords[:, 0], coords[:, 1])
        transport = 4.0 * (dw_fac[None, :] + e + dw_cust[:, None]) + 2.0 * a_j[None, :]
    else:
        transport = 4.0 * e
    transport = transport / demands[:, None]

    facilities = [Facility(fixed_cost=float(fixed[j]), capacity=float(caps[j]),
                           deflection=spec.beta * float(caps[j]),
                           curve=production_curve(1, 1, float(caps[j]),
                                                  spec.beta * float(caps[j])))
                  for j in range(n)]
    name = f"{spec.set_id}_t{spec.ftype}c{spec.structure}_n{n}m{m}_seed{spec.seed}"
    base = FlpInstance(name=name, facilities=facilities, demands=demands,
                       transport=transport, ftype=1, structure=1,
                       beta=spec.beta, set_id=spec.set_id, seed=spec.seed)
    return attach_cost_config(base, spec.ftype, spec.structure)


def attach_cost_config(instance: FlpInstance, ftype: int,
                       structure: int) -> FlpInstance:
    """Apply one of the twelve type x structure cost settings.

    Structure 2 scales fixed costs tenfold and 4 scales transport; any
    multiplier already on the instance is unwound first, so reattaching
    never compounds.
    """
    if ftype not in (1, 2, 3):
        raise ValueError(f"unknown function type {ftype}")
    if structure not in (1, 2, 3, 4):
        raise ValueError(f"unknown cost structure {structure}")
    fixed_scale = (0.1 if instance.structure == 2 else 1.0) * (
        10.0 if structure == 2 else 1.0)
    trans_scale = (0.1 if instance.structure == 4 else 1.0) * (
        10.0 if structure == 4 else 1.0)
    facilities = [
        Facility(fixed_cost=f.fixed_cost * fixed_scale, capacity=f.capacity,
                 deflection=f.deflection,
                 curve=production_curve(ftype, structure, f.capacity, f.deflection))
        for f in instance.facilities
    ]
    name = instance.name
    if instance.ftype is not None:
        name = name.replace(f"_t{instance.ftype}c{instance.structure}_",
                            f"_t{ftype}c{structure}_", 1)
    out = FlpInstance(name=name, facilities=facilities,
                      demands=np.array(instance.demands, dtype=float),
                      transport=np.array(instance.transport, dtype=float) * trans_scale,
                      ftype=ftype, structure=structure, beta=instance.beta,
                      set_id=instance.set_id, seed=instance.seed)
    out.validate()
    return out
