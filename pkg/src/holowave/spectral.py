"""Periodic pseudospectral toolkit for holomorphic (negative-frequency) fields.

Conventions
-----------
A field on ``[0, L)`` is stored by its normalised Fourier coefficients
``c_k = fft(f) / n`` so that ``f(x) = sum_k c_k exp(i xi_k x)`` with
``xi_k = 2 pi k / L``, ``k = -n/2, ..., n/2 - 1`` (numpy fft ordering).
A field is *holomorphic* when its spectrum sits at ``xi < 0``.

The projection ``P = (I - iH)/2`` keeps negative modes, drops positive ones
and halves the zero mode.  Dynamic state is kept zero-mean separately.
"""

from __future__ import annotations

import csv
import functools
import io
import os
import struct
import tempfile
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "Field",
    "NormReport",
    "SurfaceDegeneracyError",
    "hilbert",
    "proj_neg",
    "proj_pos",
    "fractional_multiplier",
    "derivative",
    "product",
    "reciprocal",
    "norms",
    "h_space_norm",
    "hk_norm",
    "dyadic_linf_proxy",
    "random_band_limited",
    "resample",
    "sum_fields",
    "Snapshot",
    "atomic_write",
    "write_snapshot",
    "read_snapshot",
    "write_csv",
]


class SurfaceDegeneracyError(ValueError):
    """Raised when a denominator such as ``1 + W_alpha`` comes too close to zero."""

    def __init__(self, message: str, min_abs: float):
        super().__init__(f"{message} (min |f| = {min_abs:.3e})")
        self.min_abs = min_abs


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid standing in for the real line."""

    n_points: int
    length: float
    oversample_factor: int = 2
    filter_order: int = 36
    filter_cutoff: float = 0.85

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {n}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.oversample_factor < 2:
            raise ValueError("oversample_factor must be >= 2")
        if self.filter_order % 2:
            raise ValueError("filter_order must be even")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in fft order."""
        return _wavenumbers(self.n_points, self.length)

    @property
    def k_nyquist(self) -> float:
        return np.pi * self.n_points / self.length

    @property
    def n_fine(self) -> int:
        return self.oversample_factor * self.n_points

    @property
    def spectral_filter(self) -> np.ndarray:
        return _filter(self.n_points, self.filter_order, self.filter_cutoff)

    def index_of(self, xi: float) -> int:
        """fft-order index of the angular wavenumber ``xi`` (must lie on the lattice)."""
        m = xi * self.length / (2 * np.pi)
        mi = int(round(m))
        if abs(m - mi) > 1e-9 * max(1.0, abs(m)):
            raise ValueError(f"wavenumber {xi} is not on the grid lattice")
        return mi % self.n_points


@functools.lru_cache(maxsize=64)
def _wavenumbers(n: int, length: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    k.setflags(write=False)
    return k


@functools.lru_cache(maxsize=64)
def _filter(n: int, order: int, cutoff: float) -> np.ndarray:
    # unity below cutoff*Nyquist, exp(-36 s^order) ramp on the remaining band
    m = np.abs(np.fft.fftfreq(n) * n) / (n / 2)
    s = np.clip((m - cutoff) / (1.0 - cutoff), 0.0, None)
    sig = np.exp(-36.0 * s**order)
    sig.setflags(write=False)
    return sig


# ---------------------------------------------------------------------------
# coefficient-array kernels (used directly by the solvers for speed)


def to_fine(grid: GridSpec, c: np.ndarray) -> np.ndarray:
    """Physical samples of the trig polynomial ``c`` on the oversampled grid."""
    n, m = grid.n_points, grid.n_fine
    padded = np.zeros(m, dtype=complex)
    h = n // 2
    padded[:h] = c[:h]
    padded[-h:] = c[h:]
    return np.fft.ifft(padded) * m


def from_fine(grid: GridSpec, v: np.ndarray, filtered: bool = True) -> np.ndarray:
    """Coefficients of oversampled samples ``v`` truncated back to the grid band."""
    n, m = grid.n_points, grid.n_fine
    big = np.fft.fft(v) / m
    h = n // 2
    c = np.empty(n, dtype=complex)
    c[:h] = big[:h]
    c[h:] = big[-h:]
    if filtered:
        c *= grid.spectral_filter
    return c


def to_phys(c: np.ndarray) -> np.ndarray:
    return np.fft.ifft(c) * c.size


def to_spec(v: np.ndarray) -> np.ndarray:
    return np.fft.fft(v) / v.size


def conj_c(c: np.ndarray) -> np.ndarray:
    """Coefficients of the complex conjugate field."""
    out = np.conj(c[(-np.arange(c.size)) % c.size])
    return out


def proj_neg_c(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    out = np.where(k < 0, c, 0.0)
    out[0] = 0.5 * c[0]
    return out


def proj_pos_c(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    out = np.where(k > 0, c, 0.0)
    out[0] = 0.5 * c[0]
    return out


def zero_mean_c(c: np.ndarray) -> np.ndarray:
    out = c.copy()
    out[0] = 0.0
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Field:
    """Complex function sampled on a :class:`GridSpec`.

    Immutable; ``spectral`` holds the normalised coefficients and ``physical``
    the samples, derived lazily from each other.
    """

    grid: GridSpec
    spectral: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.spectral, dtype=complex)
        if c.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} coefficients, got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "spectral", c)

    @classmethod
    def from_physical(cls, grid: GridSpec, values) -> Field:
        v = np.asarray(values, dtype=complex)
        if v.shape != (grid.n_points,):
            raise ValueError(f"expected {grid.n_points} samples, got {v.shape}")
        return cls(grid, to_spec(v))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> Field:
        return cls.from_physical(grid, fn(grid.x))

    @classmethod
    def zeros(cls, grid: GridSpec) -> Field:
        return cls(grid, np.zeros(grid.n_points, dtype=complex))

    @functools.cached_property
    def physical(self) -> np.ndarray:
        v = to_phys(self.spectral)
        v.setflags(write=False)
        return v

    @property
    def zero_mean(self) -> bool:
        return abs(self.spectral[0]) <= 1e-12 * max(self.l2(), np.finfo(float).tiny)

    def l2(self) -> float:
        return float(np.sqrt(self.grid.length * np.sum(np.abs(self.spectral) ** 2)))

    def with_zero_mean(self) -> Field:
        return Field(self.grid, zero_mean_c(self.spectral))

    def conj(self) -> Field:
        return Field(self.grid, conj_c(self.spectral))

    def real(self) -> Field:
        return Field(self.grid, 0.5 * (self.spectral + conj_c(self.spectral)))

    def positive_mass_fraction(self) -> float:
        """Fraction of L2 mass at xi > 0."""
        p = np.abs(self.spectral) ** 2
        tot = p.sum()
        return float(p[self.grid.k > 0].sum() / tot) if tot > 0 else 0.0

    def _check(self, other: Field):
        if other.grid != self.grid:
            raise ValueError("grid mismatch")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.spectral + other.spectral)
        c = self.spectral.copy()
        c[0] += other
        return Field(self.grid, c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.spectral - other.spectral)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Field(self.grid, -self.spectral)

    def __mul__(self, other):
        if isinstance(other, Field):
            return product(self, other)
        return Field(self.grid, self.spectral * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Field(self.grid, self.spectral / scalar)


@dataclass(frozen=True)
class NormReport:
    l2: float
    homog_half: float
    h_space: float
    hk: tuple
    linf: float
    bmo_proxy: float
    besov_proxy: float


# ---------------------------------------------------------------------------
# linear operators


def hilbert(f: Field) -> Field:
    k = f.grid.k
    return Field(f.grid, -1j * np.sign(k) * f.spectral)


def proj_neg(f: Field) -> Field:
    """P = (I - iH)/2."""
    return Field(f.grid, proj_neg_c(f.spectral, f.grid.k))


def proj_pos(f: Field) -> Field:
    return Field(f.grid, proj_pos_c(f.spectral, f.grid.k))


def derivative(f: Field, order: int = 1) -> Field:
    return Field(f.grid, (1j * f.grid.k) ** order * f.spectral)


def fractional_multiplier(f: Field, s: float) -> Field:
    """Apply ``|D|^s``; the zero mode maps to zero."""
    if s < 0 and not f.zero_mean:
        raise ValueError("nonintegrable zero mode")
    return Field(f.grid, _abs_pow(f.grid, s) * f.spectral)


def _abs_pow(grid: GridSpec, s: float) -> np.ndarray:
    ak = np.abs(grid.k)
    out = np.zeros_like(ak)
    nz = ak > 0
    out[nz] = ak[nz] ** s
    return out


# ---------------------------------------------------------------------------
# nonlinear operators


def product(f: Field, g: Field) -> Field:
    """Dealiased pointwise product (oversampled grid plus spectral filter)."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    grid = f.grid
    v = to_fine(grid, f.spectral) * to_fine(grid, g.spectral)
    return Field(grid, from_fine(grid, v))


def reciprocal(f: Field, min_abs: float = 0.5) -> Field:
    grid = f.grid
    v = to_fine(grid, f.spectral)
    m = float(np.min(np.abs(v)))
    if m < min_abs:
        raise SurfaceDegeneracyError("surface degeneracy", m)
    return Field(grid, from_fine(grid, 1.0 / v))


# ---------------------------------------------------------------------------
# norms


def _sq_l2(grid: GridSpec, c: np.ndarray) -> float:
    return float(grid.length * np.sum(np.abs(c) ** 2))


def _sq_half(grid: GridSpec, c: np.ndarray) -> float:
    return float(grid.length * np.sum(np.abs(grid.k) * np.abs(c) ** 2))


def h_space_norm(w: Field, q: Field) -> float:
    """Norm in L2 x H^{1/2} (homogeneous)."""
    return float(np.sqrt(_sq_l2(w.grid, w.spectral) + _sq_half(q.grid, q.spectral)))


def hk_norm(w: Field, q: Field, k: int) -> float:
    """``(sum_{j<=k} ||d^j (w, q)||_H^2)^{1/2}``."""
    grid = w.grid
    ik = 1j * grid.k
    tot = 0.0
    for j in range(k + 1):
        tot += _sq_l2(grid, ik**j * w.spectral) + _sq_half(grid, ik**j * q.spectral)
    return float(np.sqrt(tot))


def dyadic_linf_proxy(f: Field) -> float:
    """``(sum_j ||P_j f||_inf^2)^{1/2}`` over dyadic blocks of |xi| in units of 2pi/L."""
    grid = f.grid
    m = np.abs(np.round(grid.k * grid.length / (2 * np.pi))).astype(int)
    tot = abs(f.spectral[0]) ** 2
    lo = 1
    while lo <= grid.n_points // 2:
        sel = (m >= lo) & (m < 2 * lo)
        if np.any(sel):
            block = np.where(sel, f.spectral, 0.0)
            if np.any(block):
                tot += np.max(np.abs(to_fine(grid, block))) ** 2
        lo *= 2
    return float(np.sqrt(tot))


def norms(w: Field, q: Field, K: int = 2) -> NormReport:
    """Norm bundle for the pair ``(w, q)``.

    Pointwise norms (``linf``, ``bmo_proxy``, ``besov_proxy``) refer to ``w``;
    ``bmo_proxy`` is the L-infinity upper bound and ``besov_proxy`` the
    dyadic L-infinity square sum.
    """
    grid = w.grid
    l2 = np.sqrt(_sq_l2(grid, w.spectral))
    half = np.sqrt(_sq_half(grid, q.spectral))
    hk = tuple(hk_norm(w, q, j) for j in range(K + 1))
    linf = float(np.max(np.abs(to_fine(grid, w.spectral))))
    return NormReport(
        l2=float(l2),
        homog_half=float(half),
        h_space=h_space_norm(w, q),
        hk=hk,
        linf=linf,
        bmo_proxy=linf,
        besov_proxy=dyadic_linf_proxy(w),
    )


def random_band_limited(
    grid: GridSpec,
    band: tuple[float, float],
    rng: np.random.Generator,
    amplitude: float = 1.0,
) -> Field:
    """Random field with spectrum in ``band = (xi_lo, xi_hi)`` scaled to max modulus ``amplitude``."""
    k = grid.k
    sel = (k >= band[0]) & (k <= band[1])
    c = np.zeros(grid.n_points, dtype=complex)
    c[sel] = rng.standard_normal(sel.sum()) + 1j * rng.standard_normal(sel.sum())
    v = to_phys(c)
    peak = np.max(np.abs(v))
    return Field(grid, c * (amplitude / peak)) if peak > 0 else Field(grid, c)


def resample(f: Field, grid: GridSpec) -> Field:
    """Exact transfer between grids of equal length (zero padding / truncation)."""
    if abs(grid.length - f.grid.length) > 1e-12 * grid.length:
        raise ValueError("resample requires equal domain lengths")
    n_src, n_dst = f.grid.n_points, grid.n_points
    c = np.zeros(n_dst, dtype=complex)
    h = min(n_src, n_dst) // 2
    c[:h] = f.spectral[:h]
    c[-h:] = f.spectral[-h:]
    return Field(grid, c)


def sum_fields(fields: Sequence[Field]) -> Field:
    out = fields[0]
    for f in fields[1:]:
        out = out + f
    return out


# ---------------------------------------------------------------------------
# snapshots and CSV export

SNAPSHOT_MAGIC = b"HLWV"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIQdd")


@dataclass(frozen=True)
class Snapshot:
    grid: GridSpec
    fields: tuple
    t: float


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_snapshot(fields: Sequence[Field], t: float = 0.0) -> bytes:
    if not fields:
        raise ValueError("snapshot needs at least one field")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("grid mismatch")
    head = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.n_points, grid.length, t)
    body = b"".join(np.ascontiguousarray(f.physical, dtype="<c16").tobytes() for f in fields)
    return head + body


def decode_snapshot(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, version, n, length, t = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not an HLWV snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    body = len(data) - _HEADER.size
    per = 16 * n
    if n == 0 or body % per or body == 0:
        raise ValueError("snapshot size inconsistent with n_points")
    grid = GridSpec(int(n), float(length))
    raw = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    fields = tuple(Field.from_physical(grid, raw[i * n : (i + 1) * n]) for i in range(body // per))
    return Snapshot(grid, fields, float(t))


def write_snapshot(path, fields: Sequence[Field], t: float = 0.0) -> None:
    """Binary snapshot: header then the physical samples of each field (complex f64, little endian)."""
    atomic_write(path, encode_snapshot(fields, t))


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read())


def field_csv(f: Field) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "re", "im"])
    for x, v in zip(f.grid.x, f.physical):
        w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def write_csv(path, f: Field) -> None:
    atomic_write(path, field_csv(f).encode())
