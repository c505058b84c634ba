"""Evaluation metrics and report aggregation.

Per-signal records carry absolute estimation errors, a phase-invariant
reconstruction loss, and a symbol error rate; aggregation groups them by
method, SNR bucket, and modulation into MAE tables, SER CDFs, and packet
error rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blind import EstimateSet
from .errors import EmptyOverlapError, EmptySetError, LengthMismatchError
from .generator import TxParams

# Scores assigned to records whose blind chain failed outright: the worst
# error each estimate can take on (range width for f0 and tau, half a
# symbol for the circular timing offset).
FAILED_F0_ERROR = 0.02
FAILED_TAU_ERROR = 12.0
FAILED_T0_ERROR = 0.5


@dataclass
class EvalRecord:
    """Scores for one (signal, method) pair."""

    signal_id: int
    modulation: str
    snr_db: float
    method: str
    abs_f0_err: float
    abs_tau_err: float
    circ_t0_err: float
    recon_loss: float | None = None
    ser: float | None = None
    status: str = "ok"


@dataclass
class AggregateRow:
    method: str
    snr_db: float
    modulation: str
    count: int
    mae_f0: float | None
    mae_tau: float | None
    mae_t0: float | None
    mean_recon_loss: float | None
    per: float | None
    ser_cdf: list[tuple[float, float]] = field(default_factory=list)


def phase_invariant_loss(z_hat: np.ndarray, z: np.ndarray) -> float:
    """Reconstruction loss blind to a global phase rotation.

    (1/N) * (||z_hat||^2 + ||z||^2 - 2 * |<z_hat, z>|); zero exactly when
    z_hat = z * exp(j*phi) for some phi, and equal to the minimum over phi
    of the plain mean squared error.
    """
    z_hat = np.asarray(z_hat)
    z = np.asarray(z)
    if z_hat.size != z.size:
        raise LengthMismatchError(f"{z_hat.size} vs {z.size} samples")
    energy = np.sum(np.abs(z_hat) ** 2) + np.sum(np.abs(z) ** 2)
    cross = np.abs(np.vdot(z_hat, z))
    return float((energy - 2.0 * cross) / z.size)


def circular_t0_error(t0_a: float, t0_b: float) -> float:
    d = abs(t0_a - t0_b) % 1.0
    return min(d, 1.0 - d)


def estimation_errors(
    est: EstimateSet, truth: TxParams
) -> tuple[float, float, float]:
    """Absolute f0 and tau errors plus the circular t0 error."""
    return (
        abs(est.f0_hat - truth.f0),
        abs(est.tau_hat - truth.tau),
        circular_t0_error(est.t0_hat, truth.t0),
    )


def ser_cdf(sers) -> list[tuple[float, float]]:
    """Empirical CDF sampled at each distinct SER value."""
    values = np.asarray(list(sers), dtype=np.float64)
    if values.size == 0:
        raise EmptySetError("no SER values to aggregate")
    distinct = np.unique(values)
    return [
        (float(v), float(np.count_nonzero(values <= v) / values.size))
        for v in distinct
    ]


def per(records) -> float:
    """Packet error rate: fraction of records with any symbol error.

    Records without an SER (failed recovery) count as packet errors.
    """
    records = list(records)
    if not records:
        raise EmptySetError("no records")
    bad = sum(1 for r in records if r.ser is None or r.ser > 0.0)
    return bad / len(records)


def _bucket(snr_db: float, buckets: tuple[float, ...]) -> float:
    return min(buckets, key=lambda b: abs(b - snr_db))


def _sort_key(r: EvalRecord):
    # canonical member order makes the float reductions exactly
    # permutation-invariant
    return (
        r.signal_id,
        r.abs_f0_err,
        r.abs_tau_err,
        r.circ_t0_err,
        -1.0 if r.ser is None else r.ser,
        -1.0 if r.recon_loss is None else r.recon_loss,
        r.status,
    )


def aggregate(records, snr_buckets) -> list[AggregateRow]:
    """Group records by (method, SNR bucket, modulation) and reduce.

    Every method/bucket combination additionally gets an all-modulations
    row with modulation set to ``"*"``. Output order is deterministic.
    """
    records = list(records)
    buckets = tuple(sorted(float(b) for b in snr_buckets))
    if not buckets:
        raise ValueError("need at least one SNR bucket")
    groups: dict[tuple[str, float, str], list[EvalRecord]] = {}
    for r in records:
        b = _bucket(r.snr_db, buckets)
        groups.setdefault((r.method, b, r.modulation), []).append(r)
        groups.setdefault((r.method, b, "*"), []).append(r)

    methods = sorted({r.method for r in records})
    modulations = sorted({r.modulation for r in records} | {"*"})
    rows = []
    for method in methods:
        for bucket in buckets:
            for modulation in modulations:
                members = sorted(
                    groups.get((method, bucket, modulation), []), key=_sort_key
                )
                if not members:
                    rows.append(
                        AggregateRow(
                            method=method,
                            snr_db=bucket,
                            modulation=modulation,
                            count=0,
                            mae_f0=None,
                            mae_tau=None,
                            mae_t0=None,
                            mean_recon_loss=None,
                            per=None,
                        )
                    )
                    continue
                losses = [
                    r.recon_loss for r in members if r.recon_loss is not None
                ]
                sers = [r.ser for r in members if r.ser is not None]
                rows.append(
                    AggregateRow(
                        method=method,
                        snr_db=bucket,
                        modulation=modulation,
                        count=len(members),
                        mae_f0=float(np.mean([r.abs_f0_err for r in members])),
                        mae_tau=float(np.mean([r.abs_tau_err for r in members])),
                        mae_t0=float(np.mean([r.circ_t0_err for r in members])),
                        mean_recon_loss=float(np.mean(losses)) if losses else None,
                        per=per(members),
                        ser_cdf=ser_cdf(sers) if sers else [],
                    )
                )
    return rows
