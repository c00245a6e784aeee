"""Range-parameter assistance from two user-selected smooth regions.

Picking the range Gaussian width by hand is unintuitive. Given two smooth
regions on opposite sides of a feature to keep, the width should be small
enough that the regions' mean normals do not influence each other, yet
large enough that normals within each region do. These two requirements
bound the width from above and below; the suggestion is their midpoint.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["RegionStats", "NuSelection", "region_stats", "nu_range"]

DEFAULT_GUIDANCE_RATIO = 5.0  # mu = ratio * nu; useful range is [1, 10]


@dataclass(frozen=True)
class RegionStats:
    """Area-weighted mean normal (unit) and normal variance of a region."""

    mean_normal: np.ndarray
    variance: float


@dataclass(frozen=True)
class NuSelection:
    """Bounds and suggestion for the range Gaussian width.

    ``rejected`` is set when the upper bound falls below the lower bound,
    in which case the user should select another pair of regions and
    ``nu``/``mu`` are None.
    """

    nu_min: float
    nu_max: float
    rejected: bool
    nu: float | None = None
    mu: float | None = None


def region_stats(geom, normals, region):
    """Area-weighted mean and variance of the normals in a face set.

    Raises
    ------
    ValueError
        For an empty region, or when the weighted normals cancel to zero
        (the region wraps around) and a different selection is needed.
    """
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise ValueError("region is empty")
    normals = np.asarray(normals, dtype=np.float64)
    areas = geom.areas[region]
    weighted = (areas[:, None] * normals[region]).sum(axis=0)
    norm = np.linalg.norm(weighted)
    if norm <= 0 or areas.sum() <= 0:
        raise ValueError(
            "region normals cancel out; select a smoother region"
        )
    mean = weighted / norm
    var = float(
        (areas * ((normals[region] - mean) ** 2).sum(axis=1)).sum() / areas.sum()
    )
    return RegionStats(mean, var)


def nu_range(stats1, stats2, guidance_ratio=DEFAULT_GUIDANCE_RATIO):
    """Bound the range width from two region statistics.

    The lower bound is half the larger region standard deviation; the
    upper bound is a third of the distance between the mean normals. When
    the bounds are compatible the suggestion is their midpoint, with the
    guidance width set to ``guidance_ratio`` times the suggestion.
    """
    sigma1 = np.sqrt(stats1.variance)
    sigma2 = np.sqrt(stats2.variance)
    nu_min = 0.5 * max(sigma1, sigma2)
    nu_max = float(np.linalg.norm(stats1.mean_normal - stats2.mean_normal)) / 3.0
    if nu_max < nu_min:
        return NuSelection(nu_min, nu_max, rejected=True)
    nu = (nu_min + nu_max) / 2.0
    return NuSelection(nu_min, nu_max, False, nu=nu, mu=guidance_ratio * nu)
