"""Synthetic single-carrier dataset generation.

Each record is produced by one deterministic chain: random data is
modulated, upsampled to ``N_UP`` samples per symbol (linear types are
root-raised-cosine shaped, continuous-phase types are synthesized at
``N_UP`` directly), a timing offset is realized by dropping leading
samples, the stream is integer-decimated to its final rate, faded by a
3-tap channel, rotated by carrier frequency/phase offsets, and buried in
white Gaussian noise.

Labels store *realized* quantities: ``tau`` is the rational samples/symbol
value ``N_UP / D`` actually produced by the decimator, and ``t0`` is the
fraction of a symbol period at which the first symbol peak occurs inside
the received window. With that convention a receiver that skips
``round(t0 * P)`` samples of the P-per-symbol resampled stream lands
exactly on symbol peaks, and the timing grid has exactly ``N_UP`` distinct
values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal

from .dsp import frequency_shift, mean_power
from .errors import (
    FormatVersionMismatchError,
    SignalTooShortError,
    TruncatedFileError,
    ZeroPowerSignalError,
)
from .modulation import (
    ModulationType,
    SymbolSequence,
    constellation,
    modulate_cpfsk,
    modulate_gmsk,
    rrc_taps,
)

N_UP = 64
RRC_SPAN_SYMBOLS = 12
F0_RANGE = (-0.01, 0.01)
SNR_RANGE_DB = (0.0, 20.0)
TAU_RANGE = (4.0, 16.0)
BETA_CHOICES = (0.15, 0.25, 0.35)
DISCRETE_SNRS_DB = (0.0, 5.0, 10.0, 15.0, 20.0)
DATASET_FORMAT_VERSION = 1
_CPM_WARMUP_SYMBOLS = 8

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; (seed, stream) fully determines the draws."""
    key = ((int(seed) & _MASK64) << 64) | (int(stream) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(int(rng))


@dataclass
class TxParams:
    """Generator-side impairment parameters for one signal."""

    f0: float
    phi0: float
    t0: float
    tau: float
    beta: float
    snr_db: float
    sigma: float
    channel: np.ndarray

    def __post_init__(self) -> None:
        self.channel = np.asarray(self.channel, dtype=np.complex128)


@dataclass
class DatasetSpec:
    """Shape of a generated dataset."""

    count: int
    seed: int = 0
    n_r: int = 1024
    snr_levels_db: tuple[float, ...] | None = None
    modulations: tuple[ModulationType, ...] = tuple(ModulationType)

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.n_r < 128:
            raise ValueError("n_r must be >= 128")
        if not self.modulations:
            raise ValueError("modulation subset must be non-empty")
        self.modulations = tuple(self.modulations)
        if self.snr_levels_db is not None:
            self.snr_levels_db = tuple(float(s) for s in self.snr_levels_db)


@dataclass
class TxGroundTruth:
    """One received signal plus every label the generator knows."""

    params: TxParams
    modulation: ModulationType
    y: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    symbols: SymbolSequence
    n0: float
    data_indices: np.ndarray = field(default=None, repr=False)


def sample_params(rng, spec: DatasetSpec) -> tuple[TxParams, ModulationType]:
    """Draw one parameter set uniformly over the dataset ranges.

    The draw order is part of the determinism contract; do not reorder.
    """
    rng = _as_rng(rng)
    modulation = spec.modulations[int(rng.integers(len(spec.modulations)))]
    f0 = float(rng.uniform(*F0_RANGE))
    phi0 = float(rng.uniform(0.0, 2.0 * np.pi))
    t0_draw = float(rng.uniform(0.0, 1.0))
    tau_nominal = float(rng.uniform(*TAU_RANGE))
    beta = BETA_CHOICES[int(rng.integers(len(BETA_CHOICES)))]
    if spec.snr_levels_db is None:
        snr_db = float(rng.uniform(*SNR_RANGE_DB))
    else:
        snr_db = spec.snr_levels_db[int(rng.integers(len(spec.snr_levels_db)))]

    decimation = int(N_UP // tau_nominal)
    tau_real = N_UP / decimation
    removed = int(round(t0_draw * N_UP))
    t0_real = ((N_UP - removed) % N_UP) / N_UP

    sigma = float(rng.uniform(0.0, tau_real))
    channel = build_fading(sigma, rng)
    params = TxParams(
        f0=f0,
        phi0=phi0,
        t0=t0_real,
        tau=tau_real,
        beta=beta,
        snr_db=snr_db,
        sigma=sigma,
        channel=channel,
    )
    return params, modulation


def apply_timing_and_rate(
    shaped: np.ndarray, t0: float, tau_nominal: float
) -> tuple[np.ndarray, float, float]:
    """Drop ``round(t0 * N_UP)`` leading samples, then decimate.

    Returns the decimated signal, the realized samples-per-symbol
    ``N_UP / floor(N_UP / tau_nominal)``, and the realized timing label
    (symbol-peak phase of the surviving stream).
    """
    removed = int(round(t0 * N_UP))
    decimation = int(N_UP // tau_nominal)
    out = np.asarray(shaped)[removed::decimation]
    if out.size == 0:
        raise SignalTooShortError("no samples remain after timing removal")
    tau_real = N_UP / decimation
    t0_real = ((N_UP - removed) % N_UP) / N_UP
    return out, tau_real, t0_real


def build_fading(sigma: float, rng) -> np.ndarray:
    """Unit-energy impulse response with taps at {0, round(s/2), round(s)}.

    Tap values are i.i.d. circular complex Gaussians (Rayleigh magnitude,
    uniform phase); coincident delays add before normalization.
    """
    rng = _as_rng(rng)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    delays = [0, int(round(sigma / 2.0)), int(round(sigma))]
    gains = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2.0)
    taps = np.zeros(max(delays) + 1, dtype=np.complex128)
    for delay, gain in zip(delays, gains):
        taps[delay] += gain
    return taps / np.sqrt(np.sum(np.abs(taps) ** 2))


def apply_cfo_phase(x: np.ndarray, f0: float, phi0: float) -> np.ndarray:
    """Rotate by the carrier offset: out[k] = x[k] * exp(j*(2*pi*f0*k + phi0))."""
    return frequency_shift(x, f0, phi0)


def add_awgn(x: np.ndarray, snr_db: float | None, rng) -> tuple[np.ndarray, float]:
    """Add circular white Gaussian noise at the requested SNR.

    ``snr_db=None`` (or +inf) is the noise-free flag: the input is returned
    untouched with N0 = 0. Otherwise the per-sample noise variance is
    N0 = mean_power(x) / 10**(snr_db / 10).
    """
    x = np.asarray(x)
    if snr_db is None or math.isinf(snr_db):
        return x.copy(), 0.0
    power = mean_power(x)
    if power <= 0.0:
        raise ZeroPowerSignalError("cannot set an SNR for a zero-power signal")
    n0 = power / (10.0 ** (snr_db / 10.0))
    rng = _as_rng(rng)
    noise = np.sqrt(n0 / 2.0) * (
        rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    )
    return x + noise, float(n0)


def _shaped_upsampled(
    modulation: ModulationType, rng: np.random.Generator, n_symbols: int, beta: float
) -> tuple[np.ndarray, int, np.ndarray, np.ndarray]:
    """Modulate ``n_symbols`` at N_UP samples/symbol.

    Returns (waveform, origin, indices, values) where ``origin`` is the
    upsampled index of symbol 0's nominal sampling instant.
    """
    if modulation.is_linear:
        points = constellation(modulation)
        indices = rng.integers(points.size, size=n_symbols)
        values = points[indices]
        upsampled = np.zeros(n_symbols * N_UP, dtype=np.complex128)
        upsampled[::N_UP] = values
        taps = rrc_taps(beta, RRC_SPAN_SYMBOLS, N_UP)
        # Unit peak-sample gain so symbol-instant samples sit on the
        # constellation (up to the pulse's own symbol-spaced tails).
        taps = taps / taps.max()
        shaped = sp_signal.fftconvolve(upsampled, taps, mode="full")
        origin = RRC_SPAN_SYMBOLS * N_UP // 2
        return shaped, origin, indices, values

    bits = rng.integers(2, size=n_symbols + _CPM_WARMUP_SYMBOLS)
    if modulation is ModulationType.GMSK:
        shaped = modulate_gmsk(bits, N_UP)
    else:
        shaped = modulate_cpfsk(bits, N_UP)
    origin = _CPM_WARMUP_SYMBOLS * N_UP
    indices = bits[_CPM_WARMUP_SYMBOLS:]
    values = (2.0 * indices - 1.0).astype(np.complex128)
    return shaped, origin, indices, values


def generate_one(
    spec: DatasetSpec,
    index: int,
    params: TxParams | None = None,
    modulation: ModulationType | None = None,
) -> TxGroundTruth:
    """Run the full generation chain for record ``index``.

    Passing ``params``/``modulation`` bypasses sampling and drives the
    chain with explicit values (the noise and data draws still come from
    the record's own stream), which is how controlled test signals are
    built.
    """
    rng = make_rng(spec.seed, index)
    if params is None:
        params, sampled_mod = sample_params(rng, spec)
        if modulation is None:
            modulation = sampled_mod
    elif modulation is None:
        raise ValueError("explicit params require an explicit modulation")

    removed = (N_UP - int(round(params.t0 * N_UP))) % N_UP
    decimation = int(round(N_UP / params.tau))
    n_symbols_label = spec.n_r // math.ceil(params.tau)
    n_symbols_gen = math.ceil(spec.n_r * decimation / N_UP) + 6

    shaped, origin, indices, values = _shaped_upsampled(
        modulation, rng, n_symbols_gen, params.beta
    )

    history = params.channel.size - 1
    first = origin + removed - history * decimation
    last = origin + removed + (spec.n_r - 1) * decimation
    if first < 0 or last >= shaped.size:
        raise SignalTooShortError("generated waveform does not cover the record")
    stream = shaped[first : last + 1 : decimation]

    z2 = stream[history:].copy()
    z1 = np.convolve(stream, params.channel, mode="full")[
        history : history + spec.n_r
    ]
    y_clean = apply_cfo_phase(z1, params.f0, params.phi0)
    y, n0 = add_awgn(y_clean, params.snr_db, rng)

    first_symbol = math.ceil(removed / N_UP)
    label_slice = slice(first_symbol, first_symbol + n_symbols_label)
    symbols = SymbolSequence(indices=indices[label_slice], values=values[label_slice])

    return TxGroundTruth(
        params=params,
        modulation=modulation,
        y=y,
        z1=z1,
        z2=z2,
        symbols=symbols,
        n0=n0,
        data_indices=indices,
    )


def _record_meta(record: TxGroundTruth) -> dict:
    p = record.params
    return {
        "modulation": record.modulation.value,
        "f0": p.f0,
        "phi0": p.phi0,
        "t0": p.t0,
        "tau": p.tau,
        "beta": p.beta,
        "sigma": p.sigma,
        "snr_db": p.snr_db,
        "n0": record.n0,
        "channel": [[float(c.real), float(c.imag)] for c in p.channel],
        "symbol_indices": [int(i) for i in record.symbols.indices],
    }


def record_from_meta(meta: dict, y, z1=None, z2=None) -> TxGroundTruth:
    modulation = ModulationType.from_name(meta["modulation"])
    channel = np.array([complex(re, im) for re, im in meta["channel"]])
    params = TxParams(
        f0=meta["f0"],
        phi0=meta["phi0"],
        t0=meta["t0"],
        tau=meta["tau"],
        beta=meta["beta"],
        snr_db=meta["snr_db"],
        sigma=meta["sigma"],
        channel=channel,
    )
    indices = np.asarray(meta["symbol_indices"], dtype=np.int64)
    if modulation.is_linear:
        values = constellation(modulation)[indices]
    else:
        values = (2.0 * indices - 1.0).astype(np.complex128)
    return TxGroundTruth(
        params=params,
        modulation=modulation,
        y=y,
        z1=z1,
        z2=z2,
        symbols=SymbolSequence(indices=indices, values=values),
        n0=meta["n0"],
    )


_IQ_FILES = ("y.iq", "z1.iq", "z2.iq")


class DatasetWriter:
    """Incremental dataset writer; records stream straight to disk."""

    def __init__(self, path, spec: DatasetSpec | None = None):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.spec = spec
        self._metas: list[dict] = []
        self._n_r: int | None = spec.n_r if spec else None
        self._handles = [open(self.path / name, "wb") for name in _IQ_FILES]

    def append(self, record: TxGroundTruth) -> None:
        if self._n_r is None:
            self._n_r = record.y.size
        for fh, attr in zip(self._handles, ("y", "z1", "z2")):
            samples = np.ascontiguousarray(getattr(record, attr), dtype="<c8")
            fh.write(samples.tobytes())
        self._metas.append(_record_meta(record))

    def close(self) -> None:
        for fh in self._handles:
            fh.close()
        meta = {
            "format_version": DATASET_FORMAT_VERSION,
            "n_r": int(self._n_r or 0),
            "count": len(self._metas),
            "spec": None
            if self.spec is None
            else {
                "count": self.spec.count,
                "seed": self.spec.seed,
                "n_r": self.spec.n_r,
                "snr_levels_db": list(self.spec.snr_levels_db)
                if self.spec.snr_levels_db is not None
                else None,
                "modulations": [m.value for m in self.spec.modulations],
            },
            "records": self._metas,
        }
        with open(self.path / "meta.json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, separators=(",", ":"))

    def __enter__(self) -> "DatasetWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_dataset(path, records, spec: DatasetSpec | None = None) -> None:
    """Write records to a dataset directory (meta.json + raw IQ streams).

    IQ payloads are interleaved little-endian float32 I/Q pairs, one
    fixed-length record after another, in label-table order.
    """
    with DatasetWriter(path, spec) as writer:
        for record in records:
            writer.append(record)


def read_dataset(path) -> list[TxGroundTruth]:
    """Read back a dataset directory written by :func:`write_dataset`."""
    path = Path(path)
    with open(path / "meta.json") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != DATASET_FORMAT_VERSION:
        raise FormatVersionMismatchError(
            f"dataset format {meta.get('format_version')!r}, "
            f"expected {DATASET_FORMAT_VERSION}"
        )
    count = meta["count"]
    n_r = meta["n_r"]
    streams = {}
    for name in _IQ_FILES:
        raw = (path / name).read_bytes()
        expected = count * n_r * 8
        if len(raw) < expected:
            raise TruncatedFileError(
                f"{name}: {len(raw)} bytes, expected {expected}"
            )
        streams[name] = np.frombuffer(raw[:expected], dtype="<c8")
    records = []
    for i, rec_meta in enumerate(meta["records"]):
        sl = slice(i * n_r, (i + 1) * n_r)
        records.append(
            record_from_meta(
                rec_meta,
                streams["y.iq"][sl].astype(np.complex128),
                streams["z1.iq"][sl].astype(np.complex128),
                streams["z2.iq"][sl].astype(np.complex128),
            )
        )
    return records


def read_meta(path) -> dict:
    """Load only the label table of a dataset directory."""
    with open(Path(path) / "meta.json") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != DATASET_FORMAT_VERSION:
        raise FormatVersionMismatchError(
            f"dataset format {meta.get('format_version')!r}, "
            f"expected {DATASET_FORMAT_VERSION}"
        )
    return meta


def iter_record_signals(path, names=("y",)):
    """Yield per-record IQ arrays without loading whole streams.

    ``names`` selects among ("y", "z1", "z2"); each yielded item is a tuple
    of complex128 arrays in that order.
    """
    path = Path(path)
    meta = read_meta(path)
    count, n_r = meta["count"], meta["n_r"]
    handles = [open(path / f"{n}.iq", "rb") for n in names]
    try:
        for _ in range(count):
            arrays = []
            for fh in handles:
                raw = fh.read(n_r * 8)
                if len(raw) < n_r * 8:
                    raise TruncatedFileError("IQ stream ended early")
                arrays.append(np.frombuffer(raw, dtype="<c8").astype(np.complex128))
            yield tuple(arrays)
    finally:
        for fh in handles:
            fh.close()
