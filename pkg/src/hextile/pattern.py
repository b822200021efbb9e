"""Sub-array excitations, array factor, mask cost and pattern metrics.

All lengths are in wavelengths, so the wavenumber is ``2 * pi``.  Patterns
live on a uniform midpoint grid over ``[-1, 1]^2`` in direction cosines
``(u, v)``; only cells whose centre lies in the visible disk count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .lattice import HexAperture, element_positions
from .tiling import Tiling

log = logging.getLogger(__name__)

K0 = 2.0 * math.pi
_JACOBIAN_CUTOFF = 1.0 - 1e-9


@dataclass(frozen=True, eq=False)
class ExcitationSet:
    """Per-element amplitude (linear) and phase.

    Phases are stored in degrees, which is also the file unit, so a
    write/read round trip is exact.
    """

    amplitude: np.ndarray
    phase_deg: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=float)
        ph = np.array(self.phase_deg, dtype=float)
        if amp.ndim != 1 or amp.shape != ph.shape:
            raise ValueError("amplitude and phase must be 1-D arrays of equal length")
        if not np.all(np.isfinite(amp)) or np.any(amp < 0):
            raise ValueError("amplitudes must be finite and non-negative")
        if not np.all(np.isfinite(ph)):
            raise ValueError("phases must be finite")
        amp.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "phase_deg", ph)

    @classmethod
    def from_radians(cls, amplitude, phase_rad) -> "ExcitationSet":
        return cls(amplitude, np.degrees(phase_rad))

    @property
    def phase(self) -> np.ndarray:
        return np.radians(self.phase_deg)

    @property
    def weights(self) -> np.ndarray:
        return self.amplitude * np.exp(1j * self.phase)

    def __len__(self) -> int:
        return len(self.amplitude)

    def __eq__(self, other):
        if not isinstance(other, ExcitationSet):
            return NotImplemented
        return np.array_equal(self.amplitude, other.amplitude) and np.array_equal(
            self.phase_deg, other.phase_deg
        )


@dataclass(frozen=True)
class SubarrayCoefficients:
    amplitude: np.ndarray  # (Q,)
    phase: np.ndarray  # (Q,) radians


def build_reference(
    aperture: HexAperture,
    kind: str = "uniform",
    exponent: float = 1.0,
    radius: float | None = None,
    path=None,
) -> ExcitationSet:
    """Reference excitation of the fully populated array.

    ``cosine-taper`` uses ``cos(pi * r / (2 * R)) ** exponent`` with ``R``
    defaulting to the circumradius of the hexagon.
    """
    N = aperture.n_triangles
    if kind == "uniform":
        return ExcitationSet(np.ones(N), np.zeros(N))
    if kind == "cosine-taper":
        if radius is None:
            radius = aperture.rings * aperture.cell_side
        if radius <= 0:
            raise ValueError("taper radius must be positive")
        r = np.hypot(*element_positions(aperture).T)
        amp = np.cos(np.clip(np.pi * r / (2.0 * radius), 0.0, np.pi / 2)) ** exponent
        return ExcitationSet(amp, np.zeros(N))
    if kind == "file":
        from .formats import read_excitation

        if path is None:
            raise ValueError("reference kind 'file' needs a path")
        return read_excitation(path, N)
    raise ValueError(f"unknown reference kind {kind!r}")


def steering_phases(aperture: HexAperture, theta0: float, phi0: float) -> np.ndarray:
    """Linear phase that points the beam at ``(theta0, phi0)`` (degrees)."""
    th, ph = math.radians(theta0), math.radians(phi0)
    u0, v0 = math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph)
    xy = element_positions(aperture)
    return -K0 * (xy[:, 0] * u0 + xy[:, 1] * v0)


def tile_pairs(tiling: Tiling) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([t.triangle_a for t in tiling.tiles], dtype=int)
    b = np.array([t.triangle_b for t in tiling.tiles], dtype=int)
    return a, b


def _pair_average(amp: np.ndarray, phase: np.ndarray, a: np.ndarray, b: np.ndarray):
    # unwrap the second member to within pi of the first before averaging
    d = np.angle(np.exp(1j * (phase[b] - phase[a])))
    return 0.5 * (amp[a] + amp[b]), phase[a] + 0.5 * d


def subarray_coefficients(tiling: Tiling, reference: ExcitationSet) -> SubarrayCoefficients:
    if len(reference) != len(tiling.assignment):
        raise ValueError(
            f"reference has {len(reference)} elements, tiling covers {len(tiling.assignment)}"
        )
    a, b = tile_pairs(tiling)
    amp, phase = _pair_average(reference.amplitude, reference.phase, a, b)
    return SubarrayCoefficients(amp, phase)


def tiled_excitation(tiling: Tiling, coefficients: SubarrayCoefficients) -> ExcitationSet:
    """Spread the per-tile coefficients back onto both member elements."""
    amp = coefficients.amplitude[tiling.assignment]
    ph = coefficients.phase[tiling.assignment]
    return ExcitationSet.from_radians(amp, ph)


def tiled_weights_batch(
    pairs_a: np.ndarray, pairs_b: np.ndarray, reference: ExcitationSet
) -> np.ndarray:
    """Complex element weights for a batch of tilings given as ``(B, Q)`` pairs."""
    amp, phase = _pair_average(reference.amplitude, reference.phase, pairs_a, pairs_b)
    coef = amp * np.exp(1j * phase)
    B, N = pairs_a.shape[0], len(reference)
    w = np.zeros((B, N), dtype=complex)
    rows = np.arange(B)[:, None]
    w[rows, pairs_a] = coef
    w[rows, pairs_b] = coef
    return w


# --------------------------------------------------------------------------
# Grid, mask and pattern


@dataclass(frozen=True, eq=False)
class UVGrid:
    resolution: int = 201

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 2:
            raise ValueError("grid resolution must be an integer >= 2")

    @property
    def axis(self) -> np.ndarray:
        R = self.resolution
        return -1.0 + (np.arange(R) + 0.5) * (2.0 / R)

    @property
    def step(self) -> float:
        return 2.0 / self.resolution

    @property
    def cell_area(self) -> float:
        return self.step**2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        # rows index v, columns index u
        uu, vv = np.meshgrid(self.axis, self.axis)
        return uu, vv

    def visible(self) -> np.ndarray:
        uu, vv = self.mesh()
        return uu**2 + vv**2 <= 1.0


def isotropic(u, v):
    return np.ones_like(np.asarray(u, dtype=float))


def cosine_element(q: float) -> Callable:
    """Element field ``cos(theta) ** q`` on the visible disk."""

    def pattern(u, v):
        c2 = np.clip(1.0 - np.asarray(u) ** 2 - np.asarray(v) ** 2, 0.0, None)
        return c2 ** (0.5 * q)

    return pattern


@dataclass(frozen=True)
class PowerMask:
    """Upper bound on normalised power: 1 in the mainlobe region, a floor elsewhere."""

    center: tuple[float, float] = (0.0, 0.0)
    extent: tuple[float, float] = (0.9, 0.9)  # full widths along u and v
    floor_db: float = -20.0
    shape: str = "rectangle"

    def __post_init__(self):
        if self.shape not in ("rectangle", "ellipse"):
            raise ValueError(f"unknown mainlobe shape {self.shape!r}")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("mainlobe extents must be positive")

    def in_mainlobe(self, u, v) -> np.ndarray:
        du = (np.asarray(u) - self.center[0]) / (0.5 * self.extent[0])
        dv = (np.asarray(v) - self.center[1]) / (0.5 * self.extent[1])
        if self.shape == "rectangle":
            return (np.abs(du) <= 1.0) & (np.abs(dv) <= 1.0)
        return du**2 + dv**2 <= 1.0

    @property
    def floor(self) -> float:
        return 10.0 ** (self.floor_db / 10.0)

    def values(self, u, v) -> np.ndarray:
        return np.where(self.in_mainlobe(u, v), 1.0, self.floor)

    def mainlobe_fraction(self, grid: "UVGrid", subsamples: int = 32) -> np.ndarray:
        """Area fraction of every grid cell lying inside the mainlobe region.

        Exact for rectangles; ellipses are supersampled near their rim.
        """
        edges = np.linspace(-1.0, 1.0, grid.resolution + 1)
        if self.shape == "rectangle":
            def overlap(c, w):
                lo, hi = c - 0.5 * w, c + 0.5 * w
                frac = (np.clip(edges[1:], lo, hi) - np.clip(edges[:-1], lo, hi)) / grid.step
                # snap rounding noise so fully covered cells count exactly once
                frac[frac > 1.0 - 1e-9] = 1.0
                frac[frac < 1e-9] = 0.0
                return frac

            return np.outer(overlap(self.center[1], self.extent[1]), overlap(self.center[0], self.extent[0]))
        uu, vv = grid.mesh()
        frac = self.in_mainlobe(uu, vv).astype(float)
        a, b = 0.5 * self.extent[0], 0.5 * self.extent[1]
        d = np.hypot((uu - self.center[0]) / a, (vv - self.center[1]) / b)
        band = np.abs(d - 1.0) <= grid.step * math.sqrt(2.0) / min(a, b)
        offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
        su, sv = np.meshgrid(offs * grid.step, offs * grid.step)
        for iv, iu in zip(*np.nonzero(band)):
            frac[iv, iu] = self.in_mainlobe(uu[iv, iu] + su, vv[iv, iu] + sv).mean()
        return frac

    def excess(self, power: np.ndarray, fraction: np.ndarray) -> np.ndarray:
        """Cell-wise violation, splitting partially covered cells by area."""
        out = (1.0 - fraction) * np.maximum(power - self.floor, 0.0)
        return out + fraction * np.maximum(power - 1.0, 0.0)


@dataclass(frozen=True, eq=False)
class ArraySource:
    """Enough to re-evaluate a pattern anywhere (used for exact cuts)."""

    positions: np.ndarray  # (N, 2)
    weights: np.ndarray  # (N,) complex
    element: Callable = isotropic

    def field(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ph = K0 * (np.multiply.outer(u, self.positions[:, 0]) + np.multiply.outer(v, self.positions[:, 1]))
        return (np.exp(1j * ph) @ self.weights) * self.element(u, v)


@dataclass(frozen=True, eq=False)
class PatternGrid:
    grid: UVGrid
    power: np.ndarray  # (R, R) normalised linear power, zero outside the disk
    visible: np.ndarray  # (R, R) bool
    scale: float  # |E|^2 at the grid maximum, before normalisation
    source: ArraySource | None = field(default=None, repr=False)

    @property
    def u(self) -> np.ndarray:
        return self.grid.axis

    @property
    def v(self) -> np.ndarray:
        return self.grid.axis

    def power_at(self, u, v) -> np.ndarray:
        if self.source is None:
            raise ValueError("pattern has no source model for off-grid evaluation")
        return np.abs(self.source.field(u, v)) ** 2 / self.scale

    def peak_index(self, near: tuple[float, float] = (0.0, 0.0)) -> tuple[int, int]:
        """(row, column) of the maximum; ties go to the sample closest to ``near``."""
        p = np.where(self.visible, self.power, -1.0)
        uu, vv = self.grid.mesh()
        top = p >= p.max() * (1.0 - 1e-12)
        dist = np.where(top, (uu - near[0]) ** 2 + (vv - near[1]) ** 2, np.inf)
        return divmod(int(np.argmin(dist)), self.grid.resolution)


class ArrayModel:
    """Steering matrices of one aperture on one grid, for repeated evaluation."""

    def __init__(self, positions: np.ndarray, grid: UVGrid, element: Callable = isotropic):
        self.positions = np.asarray(positions, dtype=float)
        self.grid = grid
        self.element = element
        uu, vv = grid.mesh()
        self.visible = grid.visible()
        self.u = uu[self.visible]
        self.v = vv[self.visible]
        ph = K0 * (np.outer(self.positions[:, 0], self.u) + np.outer(self.positions[:, 1], self.v))
        ep = element(self.u, self.v)
        self.cos = np.cos(ph) * ep
        self.sin = np.sin(ph) * ep

    @classmethod
    def for_aperture(cls, aperture: HexAperture, grid: UVGrid, element: Callable = isotropic) -> "ArrayModel":
        return cls(element_positions(aperture), grid, element)

    def raw_power(self, weights: np.ndarray) -> np.ndarray:
        """|E|^2 on visible cells; ``weights`` is ``(N,)`` or ``(B, N)``."""
        w = np.asarray(weights)
        wr = np.ascontiguousarray(w.real)
        re = wr @ self.cos
        im = wr @ self.sin
        if np.iscomplexobj(w) and np.any(w.imag):
            wi = np.ascontiguousarray(w.imag)
            re -= wi @ self.sin
            im += wi @ self.cos
        return re * re + im * im

    def normalized_power(self, weights: np.ndarray) -> np.ndarray:
        p = self.raw_power(weights)
        peak = p.max(axis=-1, keepdims=True)
        if np.any(peak <= 0):
            raise ValueError("all-zero excitation has no defined normalisation")
        return p / peak

    def pattern(self, weights: np.ndarray) -> PatternGrid:
        w = np.asarray(weights, dtype=complex)
        if not np.any(w):
            raise ValueError("all-zero excitation has no defined normalisation")
        p = self.raw_power(w)
        scale = float(p.max())
        if scale <= 0:
            raise ValueError("all-zero excitation has no defined normalisation")
        full = np.zeros(self.visible.shape)
        full[self.visible] = p / scale
        return PatternGrid(self.grid, full, self.visible, scale, ArraySource(self.positions, w, self.element))


def array_factor(
    aperture: HexAperture,
    excitation: ExcitationSet | np.ndarray,
    grid: UVGrid | int = 201,
    element: Callable = isotropic,
    positions: np.ndarray | None = None,
) -> PatternGrid:
    """Normalised power pattern of per-element weights on a ``(u, v)`` grid."""
    if not isinstance(grid, UVGrid):
        grid = UVGrid(int(grid))
    w = excitation.weights if isinstance(excitation, ExcitationSet) else np.asarray(excitation, dtype=complex)
    pos = element_positions(aperture) if positions is None else positions
    if len(w) != len(pos):
        raise ValueError(f"{len(w)} weights for {len(pos)} elements")
    return ArrayModel(pos, grid, element).pattern(w)


def cost(pattern: PatternGrid, mask: PowerMask) -> float:
    """Mask violation: sum of ``max(P - U, 0)`` times cell area over visible cells.

    Power is sampled at cell centres.  A cell straddling the mainlobe rim is
    split by area between the two mask levels; without that the cost jumps
    by several percent between grid sizes.
    """
    vis = pattern.visible
    fraction = mask.mainlobe_fraction(pattern.grid)[vis]
    return float(np.sum(mask.excess(pattern.power[vis], fraction)) * pattern.grid.cell_area)


class CostEvaluator:
    """Fast mask cost for many excitations on a fixed aperture, grid and mask."""

    def __init__(self, model: ArrayModel, mask: PowerMask):
        self.model = model
        self.mask = mask
        self.fraction = mask.mainlobe_fraction(model.grid)[model.visible]
        self.cell_area = model.grid.cell_area

    def __call__(self, weights: np.ndarray) -> np.ndarray | float:
        p = self.model.normalized_power(weights)
        chi = self.mask.excess(p, self.fraction).sum(axis=-1) * self.cell_area
        return float(chi) if np.ndim(chi) == 0 else chi


# --------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class PatternMetrics:
    sll_db: float
    d_dbi: float
    hpbw_az_deg: float
    hpbw_el_deg: float
    peak_in_mainlobe: bool = True

    def as_dict(self, chi: float | None = None) -> dict:
        out = {
            "sll_db": self.sll_db,
            "d_dbi": self.d_dbi,
            "hpbw_az_deg": self.hpbw_az_deg,
            "hpbw_el_deg": self.hpbw_el_deg,
        }
        if chi is not None:
            out["chi"] = chi
        return out


def _db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def directivity(pattern: PatternGrid, peak: float = 1.0) -> float:
    """Peak over hemisphere-average intensity, in dBi (no back radiation)."""
    uu, vv = pattern.grid.mesh()
    r2 = uu**2 + vv**2
    use = pattern.visible & (r2 < _JACOBIAN_CUTOFF)
    total = np.sum(pattern.power[use] / np.sqrt(1.0 - r2[use])) * pattern.grid.cell_area
    return _db(4.0 * math.pi * peak / total)


def _half_power_crossing(f: Callable[[float], float], x0: float, direction: int, step: float) -> float:
    """Walk from the peak at ``x0`` until ``f`` drops below 1/2, then refine."""
    x_prev = x0
    while True:
        x = x_prev + direction * step
        if abs(x) > 1.0:
            x = math.copysign(1.0, x)
        fx = f(x)
        if fx < 0.5:
            return brentq(lambda t: f(t) - 0.5, min(x_prev, x), max(x_prev, x), xtol=1e-12)
        if abs(x) >= 1.0:
            return math.nan
        x_prev = x


def _grid_crossing(axis: np.ndarray, values: np.ndarray, i0: int, direction: int) -> float:
    i = i0
    while 0 <= i + direction < len(axis):
        j = i + direction
        if values[j] < 0.5:
            # linear interpolation between samples i and j
            t = (values[i] - 0.5) / (values[i] - values[j])
            return float(axis[i] + t * (axis[j] - axis[i]))
        i = j
    return math.nan


def _beamwidth_deg(left: float, right: float, offset: float) -> float:
    # angle measured in the cut plane: sin(theta) along the cut, with the
    # orthogonal direction cosine fixed at ``offset``
    if math.isnan(left) or math.isnan(right):
        return math.nan
    scale = math.sqrt(max(1.0 - offset**2, 1e-300))
    a = math.asin(max(-1.0, min(1.0, left / scale)))
    b = math.asin(max(-1.0, min(1.0, right / scale)))
    return math.degrees(b - a)


def half_power_beamwidths(pattern: PatternGrid, near: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    """HPBW along u (phi = 0 cut) and along v (phi = 90 cut) through the peak.

    With a source model the -3 dB crossings are root-solved on the exact
    cut; otherwise they are linearly interpolated between grid samples.
    """
    iv, iu = pattern.peak_index(near)
    axis = pattern.grid.axis
    u_p, v_p = float(axis[iu]), float(axis[iv])
    if pattern.source is not None:
        # refine the peak on the exact pattern
        p0 = float(pattern.power_at(u_p, v_p))

        def along_u(t):
            return float(pattern.power_at(t, v_p)) / p0

        def along_v(t):
            return float(pattern.power_at(u_p, t)) / p0

        step = pattern.grid.step / 4
        lu = _half_power_crossing(along_u, u_p, -1, step)
        ru = _half_power_crossing(along_u, u_p, +1, step)
        lv = _half_power_crossing(along_v, v_p, -1, step)
        rv = _half_power_crossing(along_v, v_p, +1, step)
    else:
        row = pattern.power[iv, :] / pattern.power[iv, iu]
        col = pattern.power[:, iu] / pattern.power[iv, iu]
        lu, ru = _grid_crossing(axis, row, iu, -1), _grid_crossing(axis, row, iu, +1)
        lv, rv = _grid_crossing(axis, col, iv, -1), _grid_crossing(axis, col, iv, +1)
    return _beamwidth_deg(lu, ru, v_p), _beamwidth_deg(lv, rv, u_p)


def sidelobe_level(pattern: PatternGrid, mask: PowerMask) -> float:
    uu, vv = pattern.grid.mesh()
    outside = pattern.visible & ~mask.in_mainlobe(uu, vv)
    if not np.any(outside):
        return -math.inf
    return _db(float(pattern.power[outside].max()))


def metrics(pattern: PatternGrid, mask: PowerMask) -> PatternMetrics:
    """SLL outside the mask's mainlobe region, directivity and beamwidths."""
    iv, iu = pattern.peak_index(mask.center)
    axis = pattern.grid.axis
    inside = bool(mask.in_mainlobe(axis[iu], axis[iv]))
    if not inside:
        log.warning("pattern peak at (%.3f, %.3f) lies outside the mainlobe region", axis[iu], axis[iv])
    hp_az, hp_el = half_power_beamwidths(pattern, mask.center)
    return PatternMetrics(
        sll_db=sidelobe_level(pattern, mask),
        d_dbi=directivity(pattern),
        hpbw_az_deg=hp_az,
        hpbw_el_deg=hp_el,
        peak_in_mainlobe=inside,
    )


# --------------------------------------------------------------------------
# Scanning


@dataclass(frozen=True)
class ScanCone:
    theta0: float = 30.0
    phi0: float = 0.0
    theta_gamma: tuple[float, float, float] = (-30.0, 30.0, 5.0)  # start, stop (excl), step
    phi_gamma: tuple[float, float, float] = (0.0, 360.0, 15.0)

    @staticmethod
    def _samples(spec: Sequence[float]) -> np.ndarray:
        start, stop, step = spec
        if step <= 0:
            raise ValueError("scan step must be positive")
        n = int(math.ceil((stop - start) / step - 1e-9))
        return start + step * np.arange(max(n, 1))

    @property
    def thetas(self) -> np.ndarray:
        return self._samples(self.theta_gamma)

    @property
    def phis(self) -> np.ndarray:
        return self._samples(self.phi_gamma)


@dataclass(frozen=True)
class ScanMap:
    theta_gamma: np.ndarray
    phi_gamma: np.ndarray
    sll_db: np.ndarray  # (n_theta, n_phi)
    d_dbi: np.ndarray

    def rows(self):
        for i, th in enumerate(self.theta_gamma):
            for j, ph in enumerate(self.phi_gamma):
                yield float(th), float(ph), float(self.sll_db[i, j]), float(self.d_dbi[i, j])


def steered_mask(mask: PowerMask, theta: float, phi: float) -> PowerMask:
    th, ph = math.radians(theta), math.radians(phi)
    center = (math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph))
    return PowerMask(center, mask.extent, mask.floor_db, mask.shape)


def scan_map(
    aperture: HexAperture,
    tiling: Tiling | None,
    amplitudes: np.ndarray,
    cone: ScanCone,
    mask: PowerMask,
    grid: UVGrid | int = 201,
    element: Callable = isotropic,
) -> ScanMap:
    """SLL and directivity while re-pointing the beam over a cone.

    Each scan point gets fresh linear reference phases which are then
    averaged per tile.  ``tiling=None`` evaluates the fully populated array.
    """
    if not isinstance(grid, UVGrid):
        grid = UVGrid(int(grid))
    model = ArrayModel.for_aperture(aperture, grid, element)
    thetas, phis = cone.thetas, cone.phis
    sll = np.zeros((len(thetas), len(phis)))
    dd = np.zeros_like(sll)
    for i, tg in enumerate(thetas):
        for j, pg in enumerate(phis):
            th, ph = cone.theta0 + tg, cone.phi0 + pg
            ref = ExcitationSet.from_radians(amplitudes, steering_phases(aperture, th, ph))
            if tiling is not None:
                ref = tiled_excitation(tiling, subarray_coefficients(tiling, ref))
            pat = model.pattern(ref.weights)
            m = steered_mask(mask, th, ph)
            sll[i, j] = sidelobe_level(pat, m)
            dd[i, j] = directivity(pat)
    return ScanMap(thetas, phis, sll, dd)
