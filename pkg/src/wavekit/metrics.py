"""Capacity metrics: the fully-digital ceiling, single-beam baseline, and
harmonic-domain multiplexing reports, plus the equal-norm hybrid stages that
realize the selected codewords in hardware."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocation import (
    DcOptions,
    IwfOptions,
    PsoOptions,
    allocate_dc,
    allocate_iwf,
    allocate_pso,
    coupling_from_assignment,
    waterfill,
)
from .channel import ChannelMatrix
from .errors import IndexOutOfRangeError, RfChainLimitError
from .geometry import SystemParams
from .selection import StreamAssignment, gain_matrix, select_hungarian
from .wavenumber import (
    Dictionary,
    WavenumberChannel,
    build_dictionary,
    enumerate_support,
    to_wavenumber,
)

SCHEME_WD_DC = "WD_DC"
SCHEME_WD_WF = "WD_WF"
SCHEME_WD_IWF = "WD_IWF"
SCHEME_WD_PSO = "WD_PSO"
SCHEME_SVD_BOUND = "SVD_BOUND"
SCHEME_SPATIAL_DIVISION = "SPATIAL_DIVISION"

ALL_SCHEMES = (
    SCHEME_WD_DC,
    SCHEME_WD_WF,
    SCHEME_WD_IWF,
    SCHEME_WD_PSO,
    SCHEME_SVD_BOUND,
    SCHEME_SPATIAL_DIVISION,
)

_WD_SCHEMES = (SCHEME_WD_DC, SCHEME_WD_WF, SCHEME_WD_IWF, SCHEME_WD_PSO)

_RANK_TOL = 1e-6
_KEYSTONE_TOL = 1e-10


@dataclass(frozen=True)
class SvdDecomposition:
    """Singular triplets of a channel with its numerically effective rank."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    rank_effective: int


@dataclass(frozen=True)
class HybridPrecoder:
    """Analog codeword stages and the diagonal digital power stage."""

    analog_tx: np.ndarray
    digital_tx: np.ndarray
    analog_rx: np.ndarray


@dataclass(frozen=True)
class CapacityReport:
    """One scheme's capacity on one channel."""

    scheme: str
    per_stream_sinr: np.ndarray
    capacity_bits: float
    num_streams: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sinr = np.asarray(self.per_stream_sinr, dtype=np.float64).copy()
        sinr.flags.writeable = False
        object.__setattr__(self, "per_stream_sinr", sinr)
        object.__setattr__(self, "capacity_bits", float(self.capacity_bits))
        object.__setattr__(self, "num_streams", int(self.num_streams))


@dataclass(frozen=True)
class WdPipeline:
    """The distance-independent front end shared by every harmonic scheme."""

    rx_dict: Dictionary
    tx_dict: Dictionary
    h_a: WavenumberChannel
    gains: np.ndarray
    assignment: StreamAssignment


def _entries_of(channel) -> np.ndarray:
    if isinstance(channel, ChannelMatrix):
        return channel.entries
    if isinstance(channel, WavenumberChannel):
        return channel.entries
    return np.asarray(channel, dtype=np.complex128)


def _metadata(h) -> dict:
    if not isinstance(h, ChannelMatrix):
        return {}
    distance = float(np.linalg.norm(
        h.rx_geom.center_position_m - h.tx_geom.center_position_m))
    return {
        "distance_m": distance,
        "tx_n_x": h.tx_geom.n_x, "tx_n_y": h.tx_geom.n_y,
        "rx_n_x": h.rx_geom.n_x, "rx_n_y": h.rx_geom.n_y,
    }


def svd_decompose(h, rank_tol: float = _RANK_TOL) -> SvdDecomposition:
    """Full SVD with effective rank counted above ``rank_tol`` of the top mode."""
    entries = _entries_of(h)
    u, s, vh = np.linalg.svd(entries, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > rank_tol * s[0]))
    return SvdDecomposition(left_vectors=u, singular_values=s,
                            right_vectors=vh.conj().T, rank_effective=rank)


def svd_capacity(h, params: SystemParams, max_streams: int | None = None) -> CapacityReport:
    """Fully-digital multiplexing ceiling: water-filled parallel modes.

    Water-fills the budget over the squared singular values of the top
    ``min(rank_effective, max_streams)`` modes.  No hardware constraint is
    applied; this is the bound every realizable scheme sits under.
    """
    dec = svd_decompose(h)
    modes = dec.rank_effective
    if max_streams is not None:
        modes = min(modes, max_streams)
    meta = _metadata(h)
    if modes == 0:
        return CapacityReport(scheme=SCHEME_SVD_BOUND, per_stream_sinr=np.zeros(0),
                              capacity_bits=0.0, num_streams=0, metadata=meta)
    lam = dec.singular_values[:modes] ** 2
    p = waterfill(lam, params.total_tx_power_w, params.noise_power_w)
    sinr = p * lam / params.noise_power_w
    capacity = float(np.sum(np.log2(1.0 + sinr)))
    return CapacityReport(scheme=SCHEME_SVD_BOUND, per_stream_sinr=sinr,
                          capacity_bits=capacity, num_streams=int(np.sum(p > 0)),
                          metadata=meta)


def spatial_division_capacity(h, params: SystemParams) -> CapacityReport:
    """Single effective direction: the whole budget rides the top mode."""
    s = np.linalg.svd(_entries_of(h), compute_uv=False)
    lam_max = float(s[0] ** 2) if s.size else 0.0
    sinr = params.total_tx_power_w * lam_max / params.noise_power_w
    return CapacityReport(scheme=SCHEME_SPATIAL_DIVISION,
                          per_stream_sinr=np.array([sinr]),
                          capacity_bits=float(np.log2(1.0 + sinr)),
                          num_streams=1, metadata=_metadata(h))


def _selected_block(h_a, assignment: StreamAssignment) -> np.ndarray:
    entries = _entries_of(h_a)
    rows = [r for r, _ in assignment.pairs]
    cols = [c for _, c in assignment.pairs]
    n_r, n_t = entries.shape
    if any(not (0 <= r < n_r) for r in rows) or any(not (0 <= c < n_t) for c in cols):
        raise IndexOutOfRangeError(f"assignment pairs exceed channel shape {entries.shape}")
    return entries[np.ix_(rows, cols)]


def wd_sinr(h_a, assignment: StreamAssignment, p, noise: float) -> np.ndarray:
    """Per-stream SINR with off-assignment harmonic leakage as interference."""
    sub = _selected_block(h_a, assignment)
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (assignment.num_streams,):
        raise ValueError(f"power vector shape {p.shape} does not match "
                         f"{assignment.num_streams} streams")
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    if noise <= 0:
        raise ValueError("noise must be positive")
    g = sub.real ** 2 + sub.imag ** 2
    a = np.diagonal(g).copy()
    b = g.copy()
    np.fill_diagonal(b, 0.0)
    return a * p / (b @ p + noise)


def assemble_hybrid(tx_dict: Dictionary, rx_dict: Dictionary,
                    assignment: StreamAssignment, p,
                    params: SystemParams | None = None) -> HybridPrecoder:
    """Realize the selected harmonics as analog stages plus digital powers.

    Transmit analog columns and receive analog rows are dictionary codewords,
    so every entry magnitude is 1/sqrt(N) by construction.  The digital stage
    is diag(sqrt(p)).  RF-chain and power-budget limits are enforced when
    ``params`` carries them.
    """
    k = assignment.num_streams
    if params is not None:
        for limit in (params.num_rf_chains_tx, params.num_rf_chains_rx):
            if limit is not None and k > limit:
                raise RfChainLimitError(f"{k} streams exceed {limit} RF chains")
    rows = [r for r, _ in assignment.pairs]
    cols = [c for _, c in assignment.pairs]
    if any(not (0 <= c < tx_dict.matrix.shape[1]) for c in cols) or any(
            not (0 <= r < rx_dict.matrix.shape[1]) for r in rows):
        raise IndexOutOfRangeError("assignment pairs exceed dictionary supports")
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (k,):
        raise ValueError(f"power vector shape {p.shape} does not match {k} streams")
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    if params is not None and p.sum() > params.total_tx_power_w * (1 + 1e-9):
        raise ValueError("powers exceed the transmit budget")
    analog_tx = tx_dict.matrix[:, cols].copy()
    analog_rx = rx_dict.matrix[:, rows].conj().T.copy()
    digital_tx = np.diag(np.sqrt(p)).astype(np.complex128)
    return HybridPrecoder(analog_tx=analog_tx, digital_tx=digital_tx,
                          analog_rx=analog_rx)


def wd_pipeline(h: ChannelMatrix, params: SystemParams, beta: float = 1.0,
                max_streams: int | None = None) -> WdPipeline:
    """Support enumeration, dictionaries, harmonic transform, and selection.

    Everything here depends only on geometry and carrier, not on the power
    budget, so one pipeline serves all allocation schemes for a channel.
    """
    rx_dict = build_dictionary(enumerate_support(h.rx_geom, params, beta=beta))
    tx_dict = build_dictionary(enumerate_support(h.tx_geom, params, beta=beta))
    h_a = to_wavenumber(h, rx_dict, tx_dict)
    gains = gain_matrix(h_a)
    assignment = select_hungarian(gains, max_streams=max_streams)
    return WdPipeline(rx_dict=rx_dict, tx_dict=tx_dict, h_a=h_a, gains=gains,
                      assignment=assignment)


def _verify_hybrid(h, pipe: WdPipeline, p, params: SystemParams) -> None:
    hp = assemble_hybrid(pipe.tx_dict, pipe.rx_dict, pipe.assignment, p, params=params)
    effective = hp.analog_rx @ _entries_of(h) @ hp.analog_tx
    expected = _selected_block(pipe.h_a, pipe.assignment)
    worst = float(np.max(np.abs(effective - expected)))
    if worst > _KEYSTONE_TOL:
        raise RuntimeError(f"hybrid stages disagree with harmonic entries by {worst:.3e}")


def wd_capacity_report(h: ChannelMatrix, params: SystemParams, beta: float = 1.0,
                       solver_choice: str = SCHEME_WD_DC, *,
                       pipeline: WdPipeline | None = None,
                       dc_options: DcOptions | None = None,
                       iwf_options: IwfOptions | None = None,
                       pso_options: PsoOptions | None = None,
                       max_streams: int | None = None,
                       verify_hybrid: bool = False) -> CapacityReport:
    """End-to-end harmonic multiplexing capacity for one allocation scheme."""
    if solver_choice not in _WD_SCHEMES:
        raise ValueError(f"unknown harmonic scheme: {solver_choice!r}")
    pipe = pipeline if pipeline is not None else wd_pipeline(
        h, params, beta=beta, max_streams=max_streams)
    coupling = coupling_from_assignment(
        pipe.h_a, pipe.assignment, noise_power_w=params.noise_power_w,
        budget_w=params.total_tx_power_w)
    if solver_choice == SCHEME_WD_DC:
        p = allocate_dc(coupling, dc_options or DcOptions()).powers_w
    elif solver_choice == SCHEME_WD_WF:
        p = waterfill(coupling.direct_gains, coupling.budget_w, coupling.noise_power_w)
    elif solver_choice == SCHEME_WD_IWF:
        p = allocate_iwf(coupling, iwf_options or IwfOptions()).powers_w
    else:
        p = allocate_pso(coupling, pso_options or PsoOptions()).powers_w
    sinr = wd_sinr(pipe.h_a, pipe.assignment, p, params.noise_power_w)
    if verify_hybrid:
        _verify_hybrid(h, pipe, p, params)
    return CapacityReport(scheme=solver_choice, per_stream_sinr=sinr,
                          capacity_bits=float(np.sum(np.log2(1.0 + sinr))),
                          num_streams=pipe.assignment.num_streams,
                          metadata=_metadata(h))
