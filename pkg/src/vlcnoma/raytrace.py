"""Deterministic optical channel tracing for one transmitter and one detector.

Paths are line of sight plus one or two diffuse bounces off Lambertian
surface elements. Each path contributes a (gain, delay) pair; the pairs are
binned into an :class:`ImpulseResponse` from which the DC gain and 3-dB
bandwidth are read.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, UndefinedBandwidthError
from .scene import AccessPoint, ElementArray, Scene, as_vec3, unit

C_LIGHT = 2.9979e8  # m/s

DEFAULT_BIN_WIDTH = 1e-10
DEFAULT_SCAN_LIMIT = 5e9
DEFAULT_PAD_FACTOR = 16


@dataclass(frozen=True)
class DetectorBranch:
    position: np.ndarray
    normal: np.ndarray
    fov_half_angle: float = 25.0
    area: float = 2e-5
    responsivity: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        object.__setattr__(self, "normal", unit(self.normal))
        if not self.area > 0:
            raise DomainError(f"detector area must be positive, got {self.area}")
        if not 0.0 < self.fov_half_angle <= 90.0:
            raise DomainError(f"FOV half-angle must be within (0, 90], got {self.fov_half_angle}")
        if not self.responsivity > 0:
            raise DomainError(f"responsivity must be positive, got {self.responsivity}")


@dataclass(frozen=True)
class ImpulseResponse:
    bin_width: float
    t0: float
    bins: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.bin_width > 0:
            raise DomainError(f"bin width must be positive, got {self.bin_width}")
        b = np.asarray(self.bins, dtype=float)
        if np.any(b < 0):
            raise DomainError("impulse response bins must be non-negative")
        object.__setattr__(self, "bins", b)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(len(self.bins))

    def scaled(self, k: float) -> "ImpulseResponse":
        return ImpulseResponse(self.bin_width, self.t0, self.bins * k)


@dataclass(frozen=True)
class ChannelSummary:
    dc_gain: float
    bandwidth_3db: float
    rms_delay_spread: float
    bandwidth_limited: bool = False  # True when no 3-dB crossing below the scan limit


def _incidence_gate(cos_theta, fov_deg):
    theta = np.arccos(np.clip(cos_theta, -1.0, 1.0))
    return (cos_theta > 0) & (theta <= math.radians(fov_deg))


def _source_hop(position, orientation, order, centers, normals):
    """Distance and per-unit-area irradiance factor from a Lambertian source to elements."""
    v = centers - position
    d = np.sqrt(np.einsum("ij,ij->i", v, v))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = v / d[:, None]
        cos_emit = u @ orientation
        cos_inc = -np.einsum("ij,ij->i", u, normals)
        ok = (d > 0) & (cos_emit > 0) & (cos_inc > 0)
        f = np.where(ok, (order + 1.0) / (2.0 * np.pi * d * d) * np.power(np.clip(cos_emit, 0, None), order) * cos_inc, 0.0)
    return d, f


def _detector_hop(centers, normals, orders, branch: DetectorBranch):
    """Distance and collected-power factor from reradiating elements to a detector (area and FOV gate included)."""
    v = branch.position - centers
    d = np.sqrt(np.einsum("ij,ij->i", v, v))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = v / d[:, None]
        cos_emit = np.einsum("ij,ij->i", u, normals)
        cos_inc = -(u @ branch.normal)
        ok = (d > 0) & (cos_emit > 0) & _incidence_gate(cos_inc, branch.fov_half_angle)
        f = np.where(ok, (orders + 1.0) / (2.0 * np.pi * d * d) * np.power(np.clip(cos_emit, 0, None), orders)
                     * cos_inc * branch.area, 0.0)
    return d, f


def los_contribution(ap: AccessPoint, branch: DetectorBranch) -> tuple[float, float]:
    """Line-of-sight optical gain and delay between an access point and a detector branch."""
    v = branch.position - ap.position
    d = float(np.linalg.norm(v))
    if d == 0.0:
        raise DomainError("access point and detector are coincident")
    u = v / d
    cos_phi = float(u @ ap.orientation)
    cos_theta = float(-(u @ branch.normal))
    delay = d / C_LIGHT
    if cos_phi <= 0 or not _incidence_gate(cos_theta, branch.fov_half_angle):
        return 0.0, delay
    m = ap.lambertian_order
    gain = branch.area * (m + 1.0) / (2.0 * math.pi * d * d) * cos_phi ** m * cos_theta
    return gain, delay


def first_order_contributions(ap: AccessPoint, branch: DetectorBranch, elements) -> tuple[np.ndarray, np.ndarray]:
    """Per-element one-bounce (gain, delay) arrays, one entry per element."""
    el = elements if isinstance(elements, ElementArray) else ElementArray.from_elements(elements)
    if len(el) == 0:
        return np.zeros(0), np.zeros(0)
    d1, f1 = _source_hop(ap.position, ap.orientation, ap.lambertian_order, el.centers, el.normals)
    d2, f2 = _detector_hop(el.centers, el.normals, el.lambertian_order, branch)
    gains = f1 * el.areas * el.reflectivity * f2
    delays = (d1 + d2) / C_LIGHT
    return gains, delays


class PairKernel:
    """Element-to-element transfer factors for mutually visible element pairs.

    Pairs are stored grouped by receiving element (CSR layout): pairs
    ``offsets[j]:offsets[j+1]`` all end on element ``j``. ``transfer`` holds
    ``rho_i * (m_i+1)/(2 pi d^2) cos^m_i(out) cos(in) dA_j`` for the pair
    i -> j. Visibility is the two-sided front-hemisphere test; the room is
    empty so nothing else can occlude.
    """

    def __init__(self, elements, block: int = 128):
        el = elements if isinstance(elements, ElementArray) else ElementArray.from_elements(elements)
        self.elements = el
        n = len(el)
        src, tr, dist = [], [], []
        counts = np.zeros(n, dtype=np.int64)
        c, nr = el.centers, el.normals
        for start in range(0, n, block):
            stop = min(start + block, n)
            v = c[start:stop, None, :] - c[None, :, :]  # (targets, sources, 3): source -> target
            d = np.sqrt(np.einsum("tsk,tsk->ts", v, v))
            with np.errstate(divide="ignore", invalid="ignore"):
                cos_out = np.einsum("tsk,sk->ts", v, nr) / d
                cos_in = -np.einsum("tsk,tk->ts", v, nr[start:stop]) / d
            ok = (d > 0) & (cos_out > 0) & (cos_in > 0)
            t_idx, s_idx = np.nonzero(ok)
            dd = d[t_idx, s_idx]
            m = el.lambertian_order[s_idx]
            val = (el.reflectivity[s_idx] * (m + 1.0) / (2.0 * np.pi * dd * dd)
                   * np.power(cos_out[t_idx, s_idx], m) * cos_in[t_idx, s_idx] * el.areas[start + t_idx])
            src.append(s_idx.astype(np.int32))
            tr.append(val)
            dist.append(dd)
            counts[start:stop] = np.bincount(t_idx, minlength=stop - start)
        self.source = np.concatenate(src) if src else np.zeros(0, dtype=np.int32)
        self.transfer = np.concatenate(tr) if tr else np.zeros(0)
        self.distance = np.concatenate(dist) if dist else np.zeros(0)
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        self.target = np.repeat(np.arange(n, dtype=np.int32), counts)

    def __len__(self) -> int:
        return len(self.source)


def second_order_contributions(ap: AccessPoint, branch: DetectorBranch, elements, kernel: PairKernel | None = None,
                               nonzero_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Two-bounce (gain, delay) arrays over ordered, mutually visible element pairs.

    With ``nonzero_only`` pairs whose last hop is outside the detector's
    field of view (or behind it) are skipped, which is much cheaper for
    narrow-FOV branches.
    """
    if kernel is None:
        kernel = PairKernel(elements)
    el = kernel.elements
    if len(kernel) == 0:
        return np.zeros(0), np.zeros(0)
    d1, f1 = _source_hop(ap.position, ap.orientation, ap.lambertian_order, el.centers, el.normals)
    p1 = f1 * el.areas
    d3, f3 = _detector_hop(el.centers, el.normals, el.lambertian_order, branch)
    r3 = f3 * el.reflectivity
    if nonzero_only:
        live = np.flatnonzero(r3 > 0)
        if live.size == 0:
            return np.zeros(0), np.zeros(0)
        lo, hi = kernel.offsets[live], kernel.offsets[live + 1]
        lengths = hi - lo
        # gather the pair index ranges of all live target elements
        sel = np.repeat(lo - np.concatenate([[0], np.cumsum(lengths)[:-1]]), lengths) + np.arange(lengths.sum())
        src = kernel.source[sel]
        tgt = kernel.target[sel]
        transfer = kernel.transfer[sel]
        dist = kernel.distance[sel]
    else:
        src, tgt, transfer, dist = kernel.source, kernel.target, kernel.transfer, kernel.distance
    gains = p1[src] * transfer * r3[tgt]
    delays = (d1[src] + dist + d3[tgt]) / C_LIGHT
    return gains, delays


def collect_paths(ap: AccessPoint, branch: DetectorBranch, scene: Scene, max_order: int = 2):
    """Concatenated (gain, delay) arrays of all contributing paths up to ``max_order``."""
    if max_order not in (0, 1, 2):
        raise DomainError(f"max_order must be 0, 1 or 2, got {max_order}")
    g0, t0 = los_contribution(ap, branch)
    gains = [np.array([g0])]
    delays = [np.array([t0])]
    if max_order >= 1:
        g, t = first_order_contributions(ap, branch, scene.first_order_elements)
        gains.append(g)
        delays.append(t)
    if max_order >= 2:
        g, t = second_order_contributions(ap, branch, scene.second_order_elements, scene.pair_kernel, nonzero_only=True)
        gains.append(g)
        delays.append(t)
    g = np.concatenate(gains)
    t = np.concatenate(delays)
    keep = g > 0
    return g[keep], t[keep]


def bin_paths(gains, delays, bin_width: float = DEFAULT_BIN_WIDTH) -> ImpulseResponse:
    """Accumulate path gains into delay bins starting at the earliest path."""
    if not bin_width > 0:
        raise DomainError(f"bin width must be positive, got {bin_width}")
    gains = np.asarray(gains, dtype=float)
    delays = np.asarray(delays, dtype=float)
    keep = gains > 0
    gains, delays = gains[keep], delays[keep]
    if gains.size == 0:
        return ImpulseResponse(bin_width, 0.0, np.zeros(1))
    t0 = float(delays.min())
    idx = np.floor((delays - t0) / bin_width).astype(np.int64)
    return ImpulseResponse(bin_width, t0, np.bincount(idx, weights=gains))


def impulse_response(ap: AccessPoint, branch: DetectorBranch, scene: Scene, max_order: int = 2,
                     bin_width: float = DEFAULT_BIN_WIDTH) -> ImpulseResponse:
    """Binned impulse response of all paths of order <= ``max_order``.

    The first bin starts at the earliest contributing path, which is the
    line-of-sight delay whenever the direct path is admitted.
    """
    if not bin_width > 0:
        raise DomainError(f"bin width must be positive, got {bin_width}")
    gains, delays = collect_paths(ap, branch, scene, max_order)
    return bin_paths(gains, delays, bin_width)


def dc_gain(ir: ImpulseResponse) -> float:
    return math.fsum(ir.bins)


def _dtft_magnitude(nz_idx, nz_val, bin_width, f):
    phase = -2j * np.pi * f * bin_width * nz_idx
    return abs(np.sum(nz_val * np.exp(phase)))


def _bandwidth(ir: ImpulseResponse, scan_limit: float, pad_factor: int) -> tuple[float, bool]:
    h = ir.bins
    total = float(np.sum(h))
    if not total > 0:
        raise UndefinedBandwidthError("3-dB bandwidth is undefined for an all-zero response")
    nyquist = 0.5 / ir.bin_width
    limit = min(scan_limit, nyquist)
    n = len(h)
    nfft = 1 << int(math.ceil(math.log2(max(pad_factor * n, 2 * pad_factor))))
    spectrum = np.abs(np.fft.rfft(h, nfft)) / total
    freqs = np.fft.rfftfreq(nfft, ir.bin_width)
    threshold = 1.0 / math.sqrt(2.0)
    below = np.flatnonzero((spectrum <= threshold) & (freqs <= limit))
    if below.size == 0:
        return limit, True
    k = int(below[0])
    nz = np.flatnonzero(h)
    vals = h[nz] / total
    lo, hi = float(freqs[k - 1]), float(freqs[k])
    if _dtft_magnitude(nz, vals, ir.bin_width, hi) > threshold:
        return hi, False
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _dtft_magnitude(nz, vals, ir.bin_width, mid) > threshold:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi), False


def bandwidth_3db(ir: ImpulseResponse, scan_limit: float = DEFAULT_SCAN_LIMIT,
                  pad_factor: int = DEFAULT_PAD_FACTOR) -> float:
    """Lowest frequency where the normalised magnitude response falls to 1/sqrt(2).

    The zero-padded DFT locates the first crossing; bisection on the exact
    discrete-time Fourier transform refines it. A response that never drops
    3 dB below the scan limit (e.g. a single impulse) reports the scan limit.
    """
    return _bandwidth(ir, scan_limit, pad_factor)[0]


def rms_delay_spread(ir: ImpulseResponse) -> float:
    h = ir.bins
    total = float(np.sum(h))
    if not total > 0:
        return 0.0
    t = ir.bin_width * np.arange(len(h))
    mean = float(np.sum(t * h)) / total
    return math.sqrt(max(float(np.sum((t - mean) ** 2 * h)) / total, 0.0))


def summarize(ir: ImpulseResponse, scan_limit: float = DEFAULT_SCAN_LIMIT,
              pad_factor: int = DEFAULT_PAD_FACTOR) -> ChannelSummary:
    g = dc_gain(ir)
    if g > 0:
        bw, limited = _bandwidth(ir, scan_limit, pad_factor)
    else:
        bw, limited = 0.0, False
    return ChannelSummary(g, bw, rms_delay_spread(ir), limited)


def write_ir_csv(ir: ImpulseResponse, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "gain"])
        for t, g in zip(ir.times, ir.bins):
            w.writerow([repr(float(t)), repr(float(g))])
