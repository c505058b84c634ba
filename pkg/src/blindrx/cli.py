"""Batch command-line front end.

Subcommands form a pipeline over a dataset directory::

    blindrx generate --out data/ --count 1000 --seed 7 --snr 0,5,10,15,20
    blindrx estimate --dataset data/ --out est.jsonl --method both
    blindrx decode   --dataset data/ --estimates est.jsonl --out eval.jsonl
    blindrx report   --records eval.jsonl --out report/

Every stage is deterministic for a fixed configuration; per-record
failures are recorded and never abort a batch. Exit codes: 0 success,
1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import blind, metrics, recovery
from .errors import BlindRxError
from .generator import (
    DISCRETE_SNRS_DB,
    DatasetSpec,
    DatasetWriter,
    ModulationType,
    generate_one,
    iter_record_signals,
    read_meta,
    record_from_meta,
)

WORKERS_ENV_VAR = "BLINDRX_WORKERS"
DEFAULT_DECODE_MODS = (ModulationType.BPSK, ModulationType.QPSK)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _default_workers() -> int:
    value = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _parse_mods(text: str | None, default) -> tuple[ModulationType, ...]:
    if text is None:
        return tuple(default)
    try:
        return tuple(ModulationType.from_name(t) for t in text.split(","))
    except ValueError as exc:
        raise SystemExit(f"unknown modulation: {exc}") from None


def _parse_snr(text: str | None):
    if text is None or text == "continuous":
        return None
    return tuple(float(t) for t in text.split(","))


def _status_name(exc: BlindRxError) -> str:
    return type(exc).__name__.removesuffix("Error")


def _json_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# ----------------------------------------------------------------- generate


def _generate_worker(args):
    spec, index = args
    return generate_one(spec, index)


def cmd_generate(args) -> int:
    spec = DatasetSpec(
        count=args.count,
        seed=args.seed,
        n_r=args.nr,
        snr_levels_db=_parse_snr(args.snr),
        modulations=_parse_mods(args.mods, tuple(ModulationType)),
    )
    workers = args.workers
    with DatasetWriter(args.out, spec) as writer:
        if workers <= 1:
            for i in range(spec.count):
                writer.append(generate_one(spec, i))
        else:
            payload = ((spec, i) for i in range(spec.count))
            with multiprocessing.Pool(workers) as pool:
                for record in pool.imap(_generate_worker, payload, chunksize=16):
                    writer.append(record)
    print(f"wrote {spec.count} records to {args.out}")
    return 0


# ----------------------------------------------------------------- estimate


def _band_payload(band: blind.BandEstimate | None):
    if band is None:
        return None
    return {
        "b1": band.b1,
        "b2": band.b2,
        "center": band.center,
        "halfwidth": band.halfwidth,
    }


def _taps_payload(taps: np.ndarray | None):
    if taps is None:
        return None
    return [[float(t.real), float(t.imag)] for t in taps]


def _estimate_worker(args) -> list[dict]:
    index, rec_meta, y, methods, n0_policy = args
    y = np.asarray(y)
    lines = []
    for method in methods:
        line = {"signal_id": index, "method": method}
        try:
            if method == "genie":
                record = record_from_meta(rec_meta, y)
                estimates, _ = recovery.genie_chain(record)
            else:
                n0 = rec_meta["n0"] if n0_policy == "known" else None
                estimates, _ = blind.blind_chain(y, n0=n0)
            line.update(
                status="ok",
                f0_hat=estimates.f0_hat,
                tau_hat=estimates.tau_hat,
                t0_hat=estimates.t0_hat,
                band=_band_payload(estimates.band),
                eq_taps=_taps_payload(estimates.eq_taps),
                diagnostics=estimates.diagnostics,
            )
        except BlindRxError as exc:
            line.update(status=_status_name(exc), detail=str(exc))
        lines.append(line)
    return lines


def _method_list(method: str) -> list[str]:
    return ["blind", "genie"] if method == "both" else [method]


def cmd_estimate(args) -> int:
    meta = read_meta(args.dataset)
    methods = _method_list(args.method)
    payload = (
        (i, rec_meta, y, methods, args.n0)
        for (i, rec_meta), (y,) in zip(
            enumerate(meta["records"]), iter_record_signals(args.dataset, ("y",))
        )
    )
    with open(args.out, "w") as out:
        if args.workers <= 1:
            for item in payload:
                for line in _estimate_worker(item):
                    out.write(_json_line(line) + "\n")
        else:
            with multiprocessing.Pool(args.workers) as pool:
                for lines in pool.imap(_estimate_worker, payload, chunksize=8):
                    for line in lines:
                        out.write(_json_line(line) + "\n")
    print(f"wrote estimates for {meta['count']} records to {args.out}")
    return 0


# ------------------------------------------------------------------- decode


def _failed_eval(index, rec_meta, method, status) -> metrics.EvalRecord:
    return metrics.EvalRecord(
        signal_id=index,
        modulation=rec_meta["modulation"],
        snr_db=rec_meta["snr_db"],
        method=method,
        abs_f0_err=metrics.FAILED_F0_ERROR,
        abs_tau_err=metrics.FAILED_TAU_ERROR,
        circ_t0_err=metrics.FAILED_T0_ERROR,
        status=status,
    )


def _decode_worker(args) -> list[dict]:
    index, rec_meta, y, z2, statuses, methods, n0_policy, decode_mods = args
    y = np.asarray(y)
    z2 = np.asarray(z2)
    record = record_from_meta(rec_meta, y, z2=z2)
    results = []
    for method in methods:
        prior_status = statuses.get(method, "ok")
        if prior_status != "ok":
            results.append(asdict(_failed_eval(index, rec_meta, method, prior_status)))
            continue
        try:
            if method == "genie":
                estimates, recovered = recovery.genie_chain(record)
            else:
                n0 = rec_meta["n0"] if n0_policy == "known" else None
                estimates, recovered = blind.blind_chain(y, n0=n0)
        except BlindRxError as exc:
            results.append(
                asdict(_failed_eval(index, rec_meta, method, _status_name(exc)))
            )
            continue
        f0_err, tau_err, t0_err = metrics.estimation_errors(estimates, record.params)
        eval_record = metrics.EvalRecord(
            signal_id=index,
            modulation=rec_meta["modulation"],
            snr_db=rec_meta["snr_db"],
            method=method,
            abs_f0_err=f0_err,
            abs_tau_err=tau_err,
            circ_t0_err=t0_err,
            recon_loss=metrics.phase_invariant_loss(recovered, z2),
        )
        if record.modulation in decode_mods and record.modulation.is_linear:
            try:
                tau_for_resample = float(
                    np.clip(estimates.tau_hat, *blind.GARDNER_TAU_LIMITS)
                )
                soft = recovery.symbol_resample(
                    recovered, tau_for_resample, estimates.t0_hat
                )
                decoded = recovery.decode_symbols(
                    soft, record.modulation, record.symbols.values[0]
                )
                eval_record.ser = recovery.ser(decoded, record.symbols)
            except BlindRxError as exc:
                eval_record.ser = None
                eval_record.status = _status_name(exc)
        else:
            eval_record.status = "not_decoded"
        results.append(asdict(eval_record))
    return results


def cmd_decode(args) -> int:
    meta = read_meta(args.dataset)
    decode_mods = _parse_mods(args.mods, DEFAULT_DECODE_MODS)
    methods = _method_list(args.method)
    statuses: dict[int, dict[str, str]] = {}
    with open(args.estimates) as fh:
        for raw in fh:
            line = json.loads(raw)
            statuses.setdefault(line["signal_id"], {})[line["method"]] = line[
                "status"
            ]
    payload = (
        (i, rec_meta, y, z2, statuses.get(i, {}), methods, args.n0, decode_mods)
        for (i, rec_meta), (y, z2) in zip(
            enumerate(meta["records"]),
            iter_record_signals(args.dataset, ("y", "z2")),
        )
    )
    with open(args.out, "w") as out:
        if args.workers <= 1:
            for item in payload:
                for line in _decode_worker(item):
                    out.write(_json_line(line) + "\n")
        else:
            with multiprocessing.Pool(args.workers) as pool:
                for lines in pool.imap(_decode_worker, payload, chunksize=8):
                    for line in lines:
                        out.write(_json_line(line) + "\n")
    print(f"wrote evaluation records to {args.out}")
    return 0


# ------------------------------------------------------------------- report


def _load_eval_records(path) -> list[metrics.EvalRecord]:
    records = []
    with open(path) as fh:
        for raw in fh:
            payload = json.loads(raw)
            records.append(metrics.EvalRecord(**payload))
    return records


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def cmd_report(args) -> int:
    records = _load_eval_records(args.records)
    buckets = _parse_snr(args.snr) or DISCRETE_SNRS_DB
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not records:
        print("warning: no evaluation records; emitting empty tables", file=sys.stderr)
    rows = metrics.aggregate(records, buckets) if records else []

    with open(out / "mae_vs_snr.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "snr_db", "count", "mae_f0", "mae_tau", "mae_t0", "mean_recon_loss"]
        )
        for row in rows:
            if row.modulation != "*":
                continue
            writer.writerow(
                [row.method, _fmt(row.snr_db), row.count, _fmt(row.mae_f0),
                 _fmt(row.mae_tau), _fmt(row.mae_t0), _fmt(row.mean_recon_loss)]
            )

    decodable = [r for r in records if r.status != "not_decoded"]
    per_rows = metrics.aggregate(decodable, buckets) if decodable else []
    with open(out / "per_vs_snr.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "modulation", "snr_db", "count", "per"])
        for row in per_rows:
            if row.modulation == "*":
                continue
            writer.writerow(
                [row.method, row.modulation, _fmt(row.snr_db), row.count, _fmt(row.per)]
            )

    with open(out / "ser_cdf.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "modulation", "snr_db", "ser", "cumulative_fraction"])
        for row in per_rows:
            for value, fraction in row.ser_cdf:
                writer.writerow(
                    [row.method, row.modulation, _fmt(row.snr_db), _fmt(value), _fmt(fraction)]
                )

    bundle = {
        "snr_buckets_db": list(buckets),
        "mae": [asdict(r) for r in rows],
        "per": [asdict(r) for r in per_rows],
    }
    with open(out / "report.json", "w") as fh:
        json.dump(bundle, fh, sort_keys=True, separators=(",", ":"))
    print(f"wrote report tables to {out}")
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blindrx", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize a labeled dataset")
    gen.add_argument("--out", required=True, help="dataset directory")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--nr", type=int, default=1024, help="samples per record")
    gen.add_argument(
        "--snr",
        default=None,
        help="comma-separated SNR levels in dB, or 'continuous' (default)",
    )
    gen.add_argument("--mods", default=None, help="comma-separated modulation subset")
    gen.add_argument("--workers", type=int, default=_default_workers())

    est = sub.add_parser("estimate", help="run estimator chains over a dataset")
    est.add_argument("--dataset", required=True)
    est.add_argument("--out", required=True, help="estimates JSONL path")
    est.add_argument("--method", choices=("blind", "genie", "both"), default="blind")
    est.add_argument("--n0", choices=("known", "estimated"), default="known")
    est.add_argument("--workers", type=int, default=_default_workers())

    dec = sub.add_parser("decode", help="recover symbols and score each record")
    dec.add_argument("--dataset", required=True)
    dec.add_argument("--estimates", required=True, help="estimates JSONL path")
    dec.add_argument("--out", required=True, help="evaluation JSONL path")
    dec.add_argument("--method", choices=("blind", "genie", "both"), default="blind")
    dec.add_argument("--n0", choices=("known", "estimated"), default="known")
    dec.add_argument(
        "--mods", default=None, help="modulations to decode (default bpsk,qpsk)"
    )
    dec.add_argument("--workers", type=int, default=_default_workers())

    rep = sub.add_parser("report", help="aggregate evaluation records into tables")
    rep.add_argument("--records", required=True, help="evaluation JSONL path")
    rep.add_argument("--out", required=True, help="report output directory")
    rep.add_argument("--snr", default=None, help="SNR bucket centers (default 0,5,10,15,20)")
    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "decode": cmd_decode,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, SystemExit) as exc:
        if isinstance(exc, SystemExit):
            raise
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (OSError, BlindRxError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
