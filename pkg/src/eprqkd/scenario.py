"""Scenario files: parsing, execution, transcripts and verification reports.

A scenario file is line-oriented ``key = value`` text; ``#`` starts a
comment. Unknown keys are rejected. Example::

    mode = two_party
    channel = intercept_resend
    fake_c = 1.0 0.0      # real and imaginary part
    fake_d = 0.0 0.0
    seed = 42
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import __version__
from .adversary import Channel, eve_key_guess_accuracy, guess_hits, make_channel
from .adversary import exact_round_prediction as channel_prediction
from .network import (
    Honest,
    MislabelResult,
    Mispair,
    MitmRelay,
    NetworkReport,
    center_guess_hits,
    center_information,
    exact_round_prediction as network_prediction,
    run_network_session,
)
from .protocol import Direction, OpSetVariant, SessionConfig, SessionReport, run_session
from .quantum import BellKind
from .stats import FrequencyCheck, RoundPrediction, check_count, compare_to_oracle

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

MODES = ("two_party", "network")
CHANNELS = ("identity", "intercept_resend", "cnot_ancilla")
CENTERS = ("honest", "mislabel", "mispair", "mitm")
FAKE_NORM_TOL = 1e-9

_KIND_NAMES = {
    "psi-": BellKind.PSI_MINUS, "psi_minus": BellKind.PSI_MINUS,
    "psi+": BellKind.PSI_PLUS, "psi_plus": BellKind.PSI_PLUS,
    "phi-": BellKind.PHI_MINUS, "phi_minus": BellKind.PHI_MINUS,
    "phi+": BellKind.PHI_PLUS, "phi_plus": BellKind.PHI_PLUS,
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str = "two_party"
    rounds: int = 10000
    batch_size: int = 100
    seed: int = 0
    shared_kind: BellKind = BellKind.PSI_MINUS
    channel: str = "identity"
    fake_c: complex = 1 + 0j
    fake_d: complex = 0j
    center: str = "honest"
    lie_map: tuple[tuple[BellKind, BellKind], ...] = ()
    substitute: str = "charley"
    variant: OpSetVariant = OpSetVariant.TABLE_I
    abort_threshold: int = 0
    output_path: str = "eprqkd_run"

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            rounds=self.rounds,
            batch_size=self.batch_size,
            shared_kind=self.shared_kind,
            abort_threshold=self.abort_threshold,
            seed=self.seed,
        )

    def make_channel(self) -> Channel:
        norm = math.sqrt(abs(self.fake_c) ** 2 + abs(self.fake_d) ** 2)
        return make_channel(self.channel, self.fake_c / norm, self.fake_d / norm)

    def strategy(self):
        if self.center == "honest":
            return Honest()
        if self.center == "mislabel":
            return MislabelResult(dict(self.lie_map))
        if self.center == "mispair":
            return Mispair(self.substitute)
        return MitmRelay(self.substitute)

    def to_text(self) -> str:
        """Canonical ``key = value`` form; ``parse_config`` reads it back unchanged."""
        return "".join(f"{f.name} = {_format_value(getattr(self, f.name))}\n" for f in fields(self))


def _format_value(value) -> str:
    if isinstance(value, complex):
        return f"{value.real!r} {value.imag!r}"
    if isinstance(value, (BellKind, OpSetVariant)):
        return str(value)
    if isinstance(value, tuple):
        return ", ".join(f"{a}:{b}" for a, b in value)
    return str(value)


def _parse_int(raw: str, low: int = 0, high: Optional[int] = None) -> int:
    try:
        value = int(raw, 0)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None
    if value < low or (high is not None and value >= high):
        bound = f"in [{low}, {high})" if high is not None else f">= {low}"
        raise ValueError(f"value {value} must be {bound}")
    return value


def _parse_choice(raw: str, choices) -> str:
    if raw not in choices:
        raise ValueError(f"expected one of {', '.join(choices)}, got {raw!r}")
    return raw


def _parse_kind(raw: str) -> BellKind:
    try:
        return _KIND_NAMES[raw.lower()]
    except KeyError:
        raise ValueError(f"unknown Bell state {raw!r}") from None


def _parse_complex(raw: str) -> complex:
    parts = raw.split()
    if len(parts) != 2:
        raise ValueError(f"expected two reals 're im', got {raw!r}")
    try:
        re, im = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"expected two reals 're im', got {raw!r}") from None
    return complex(re, im)


def _parse_lie_map(raw: str) -> tuple[tuple[BellKind, BellKind], ...]:
    out = {}
    for item in filter(None, (x.strip() for x in raw.split(","))):
        actual, sep, told = item.partition(":")
        if not sep:
            raise ValueError(f"lie_map entries look like 'psi+:phi+', got {item!r}")
        out[_parse_kind(actual.strip())] = _parse_kind(told.strip())
    return tuple(out.items())


def _parse_variant(raw: str) -> OpSetVariant:
    try:
        return OpSetVariant(raw)
    except ValueError:
        raise ValueError(f"expected paper_table_1 or sigma_x_only, got {raw!r}") from None


_PARSERS = {
    "mode": lambda v: _parse_choice(v, MODES),
    "rounds": lambda v: _parse_int(v, 1),
    "batch_size": lambda v: _parse_int(v, 1),
    "seed": lambda v: _parse_int(v, 0, 2**64),
    "shared_kind": _parse_kind,
    "channel": lambda v: _parse_choice(v, CHANNELS),
    "fake_c": _parse_complex,
    "fake_d": _parse_complex,
    "center": lambda v: _parse_choice(v, CENTERS),
    "lie_map": _parse_lie_map,
    "substitute": str,
    "variant": _parse_variant,
    "abort_threshold": lambda v: _parse_int(v, 0),
    "output_path": str,
}


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    where = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {where[key]})", lineno)
        try:
            values[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        where[key] = lineno

    config = ScenarioConfig(**values)

    def last(*keys: str) -> Optional[int]:
        return max((where[k] for k in keys if k in where), default=None)

    norm_sq = abs(config.fake_c) ** 2 + abs(config.fake_d) ** 2
    if abs(norm_sq - 1) > FAKE_NORM_TOL:
        raise ConfigError(f"fake state is not normalized (|c|^2+|d|^2 = {norm_sq:.12g})", last("fake_c", "fake_d"))
    if config.mode == "two_party":
        if config.center != "honest" or config.lie_map:
            raise ConfigError("center strategies apply only to mode = network", last("center", "lie_map"))
    else:
        if config.channel != "identity":
            raise ConfigError("channel attacks apply only to mode = two_party", last("channel"))
        if config.center == "mislabel" and not config.lie_map:
            raise ConfigError("center = mislabel needs a lie_map", last("center"))
        if config.lie_map and config.center != "mislabel":
            raise ConfigError("lie_map is only used with center = mislabel", last("lie_map"))
        if config.substitute in ("alice", "bob"):
            raise ConfigError("substitute must be a third user", last("substitute"))
    return config


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    report: SessionReport
    prediction: RoundPrediction
    checks: list[FrequencyCheck] = field(default_factory=list)
    unexpected_abort: bool = False
    eve_log: list = field(default_factory=list)
    eve_accuracy: Optional[float] = None
    center_accuracy: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and not self.unexpected_abort

    @property
    def exit_status(self) -> int:
        return EXIT_OK if self.passed else EXIT_CHECK_FAILED

    def transcript(self) -> str:
        return render_transcript(self)

    def report_text(self) -> str:
        return render_report(self)


def _direction_mix(report: SessionReport, predict) -> RoundPrediction:
    counts = Counter(r.direction for r in report.records)
    total = sum(counts.values())
    return RoundPrediction.mix([(counts[d] / total, predict(d)) for d in Direction if counts[d]])


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run the scenario and check every observed rate against its exact prediction."""
    session = config.session_config()
    channel = None
    if config.mode == "two_party":
        channel = config.make_channel()
        report = run_session(session, channel)
        prediction = _direction_mix(report, lambda d: channel_prediction(channel, config.shared_kind, d))
    else:
        strategy = config.strategy()
        report = run_network_session(session, strategy, config.variant)
        prediction = _direction_mix(report, lambda d: network_prediction(strategy, config.variant, d))

    result = ScenarioResult(config, report, prediction)
    n = report.rounds_completed
    result.checks.extend(compare_to_oracle(report.outcome_histogram, prediction.outcomes, n, prefix="outcome "))
    result.checks.append(_snapped_check("forbidden rate", prediction.forbidden, report.detection_count, n))
    if report.key_sender:
        agree = sum(a == b for a, b in zip(report.key_sender, report.key_receiver))
        result.checks.append(_snapped_check("key agreement", prediction.agreement, agree, len(report.key_sender)))

    if channel is not None and prediction.eve_accuracy is not None:
        result.eve_log = channel.eve_log
        hits, trials = guess_hits(report, channel.eve_log)
        result.eve_accuracy = eve_key_guess_accuracy(report, channel)
        result.checks.append(_snapped_check("eve guess accuracy", prediction.eve_accuracy, hits, trials))
    if isinstance(report, NetworkReport):
        result.eve_log = report.relay_log
        result.center_accuracy = center_information(report)
        hits, trials = center_guess_hits(report)
        expected = 1.0 if isinstance(report.strategy, MitmRelay) else 0.5
        result.checks.append(_snapped_check("center guess accuracy", expected, hits, trials))

    result.unexpected_abort = report.aborted and prediction.forbidden < 1e-12
    return result


def _snapped_check(label: str, expected: float, hits: int, trials: int) -> FrequencyCheck:
    if abs(expected) < 1e-12:
        expected = 0.0
    elif abs(expected - 1) < 1e-12:
        expected = 1.0
    return check_count(label, expected, hits, trials)


TRANSCRIPT_COLUMNS = ("round", "direction", "sender_bit", "op", "outcome", "decoded", "forbidden")


def render_transcript(result: ScenarioResult) -> str:
    cfg = result.config
    report = result.report
    network = isinstance(report, NetworkReport)
    eve_log = result.eve_log
    columns = list(TRANSCRIPT_COLUMNS)
    if eve_log:
        columns.append("eve")
    if network:
        columns += ["announced", "actual_analysis_only"]

    lines = [
        "# eprqkd transcript",
        f"# version: {__version__}",
        f"# seed: {cfg.seed}",
    ]
    lines += [f"# config: {line}" for line in cfg.to_text().splitlines()]
    lines.append("# " + "\t".join(columns))
    eve_by_round = {e.round_index: e for e in eve_log}
    for rec in report.records:
        row = [
            str(rec.round_index),
            str(rec.direction),
            str(rec.sender_bit),
            str(rec.sender_op),
            str(rec.outcome),
            "-" if rec.decoded_bit is None else str(rec.decoded_bit),
            "1" if rec.forbidden else "0",
        ]
        if eve_log:
            e = eve_by_round.get(rec.round_index)
            row.append("-" if e is None else f"{e.intercepted_measurement}:{'-' if e.guessed_bit is None else e.guessed_bit}")
        if network:
            ann = report.announcements[rec.round_index - 1]
            row += [str(ann.announced), str(ann.actual)]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def render_report(result: ScenarioResult) -> str:
    cfg = result.config
    report = result.report
    if cfg.mode == "two_party":
        setup = f"two-party, shared {cfg.shared_kind}, channel {cfg.channel}"
    else:
        setup = f"network, center {cfg.center}, variant {cfg.variant}"
    mismatched = sum(a != b for a, b in zip(report.key_sender, report.key_receiver))
    lines = [
        "eprqkd verification report",
        f"scenario: {setup}, seed {cfg.seed}",
        f"rounds completed: {report.rounds_completed} of {cfg.rounds}"
        + (" (aborted)" if report.aborted else ""),
        f"detections: {report.detection_count} (forbidden rate {report.forbidden_rate:.4f}, "
        f"predicted {result.prediction.forbidden:.4f})",
        f"key: {len(report.key_sender)} bits, {mismatched} mismatched, agreement {report.agreement:.4f}",
    ]
    if result.eve_accuracy is not None:
        lines.append(f"eve guess accuracy: {result.eve_accuracy:.4f}")
    if result.center_accuracy is not None:
        lines.append(f"center guess accuracy: {result.center_accuracy:.4f}")
    if isinstance(report, NetworkReport):
        done = report.announcements[: report.rounds_completed]
        announced = Counter(a.announced for a in done)
        lines.append("announced kinds: " + ", ".join(f"{k} {announced[k]}" for k in BellKind))
        falsified = [r for r in report.records if r.round_index in set(report.falsified_rounds)]
        if falsified:
            caught = sum(r.forbidden for r in falsified)
            lines.append(
                f"falsified announcements (analysis only): {len(falsified)}, "
                f"{caught} detected, {len(falsified) - caught} undetected"
            )
    if result.unexpected_abort:
        lines.append("UNEXPECTED ABORT: detection in a scenario predicted to be detection-free")
    lines.append("checks:")
    lines += [f"  {c}" for c in result.checks]
    lines.append("verdict: " + ("predictions confirmed" if result.passed else "prediction mismatch"))
    return "\n".join(lines) + "\n"


def write_artifacts(result: ScenarioResult, output_path: Optional[str] = None) -> tuple[Path, Path]:
    base = Path(output_path or result.config.output_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    transcript = base.with_name(base.name + ".tsv")
    report = base.with_name(base.name + ".report.txt")
    transcript.write_text(result.transcript(), encoding="utf-8")
    report.write_text(result.report_text(), encoding="utf-8")
    return transcript, report
