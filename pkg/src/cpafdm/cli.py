"""Experiment runner: config files in, deterministic CSV/JSON artifacts out.

Configs are plain-text ``key = value`` files with one section per concern
(experiment, channel, waveforms, free-form options); an equivalent JSON form
exists for machine use.  Every run is reproducible from (config, seed): a
rerun with the same inputs produces byte-identical outputs regardless of the
thread count, and each output directory carries a manifest recording the
config hash, the seed, and the library version.

Column schemas are frozen:

* ``ber_<label>.csv``       -- snr_db, trials, bit_errors, ber, ci95
* ``papr_ccdf_<label>.csv`` -- gamma_db, p_empirical, p_analytic
* ``papr_hist_<label>.csv`` -- bin_low, bin_high, count
* ``af_zero_delay_<label>.csv`` / ``af_zero_doppler_<label>.csv``
                            -- axis_value, amplitude_db
* ``effchan_<label>.csv``   -- row, col, re, im
* ``cpim.csv``              -- snr_db, index_error_rate, symbol_ber, total_ber
* ``physec.csv``            -- snr_db, matched_ber, mismatched_ber, mismatched_evm
* ``physec_scatter.csv``    -- re, im
* ``keyspace.csv``          -- n, keyspace_size, factorial_bits, note
"""

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import pathlib
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import (
    ChannelFamily,
    ChannelSpec,
    PathSpec,
    effective_channel,
    optimal_c1,
)
from .cpim import build_codebook, max_index_bits, run_cpim
from .detection import run_ber_multi
from .metrics import ambiguity, papr_ccdf, papr_samples
from .physec import (
    PermKey,
    draw_wrong_keys,
    eavesdrop_experiment,
    keygen,
    keyspace_report,
    mismatched_scatter,
)
from .rngs import spawn_rng
from .transforms import default_c2, permutation_from_rank, random_permutation
from .waveform import Frame, WaveformId, modulate, qam_constellation

EXPERIMENTS = ("ber", "papr", "af", "effchan", "cpim", "physec", "keyspace")
FORMATS = ("csv", "json")
WAVEFORM_KINDS = ("ofdm", "afdm", "one-sided", "two-sided")

# environment variable consulted when --threads is not given
THREADS_ENV = "CPAFDM_THREADS"

_LABEL_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")

# amplitudes below this floor render as -300 dB in ambiguity-cut dumps
_AMP_FLOOR = 1e-15


class ConfigError(ValueError):
    """A config file failed structural validation; message names the field."""


@dataclass(frozen=True)
class WaveformSpec:
    """Serializable description of one waveform under test.

    ``n``, ``c1`` and ``c2`` may be omitted when a channel section supplies
    the block size (c1 then defaults to the orthogonality-optimal value and
    c2 to the library default).  Permuted kinds take their outer permutation
    from ``perm_rank`` (exact) or ``perm_seed`` (drawn); two-sided waveforms
    take the inner one from ``perm1_rank``/``perm1_seed``.
    """

    label: str
    kind: str
    n: int | None = None
    c1: float | None = None
    c2: float | None = None
    perm_rank: int | None = None
    perm_seed: int | None = None
    perm1_rank: int | None = None
    perm1_seed: int | None = None

    def __post_init__(self):
        if not _LABEL_RE.match(self.label):
            raise ConfigError(f"waveform label {self.label!r} is not filename-safe")
        if self.kind not in WAVEFORM_KINDS:
            raise ConfigError(
                f"waveform {self.label}: unknown kind {self.kind!r} "
                f"(expected one of {', '.join(WAVEFORM_KINDS)})"
            )

    def resolve(self, channel: "ChannelParams | None") -> WaveformId:
        """Turn the descriptor into a concrete WaveformId."""
        n = self.n if self.n is not None else (channel.n if channel else None)
        if n is None:
            raise ConfigError(f"waveform {self.label}: no block size (set n or a channel)")
        if self.kind == "ofdm":
            return WaveformId.ofdm(n)
        if self.c1 is not None:
            c1 = self.c1
        elif channel is not None:
            c1 = optimal_c1(channel.fmax, channel.guard, n)
        else:
            raise ConfigError(f"waveform {self.label}: c1 required without a channel")
        c2 = self.c2 if self.c2 is not None else default_c2(n)
        if self.kind == "afdm":
            return WaveformId.afdm(n, c1, c2)
        perm2 = self._perm(n, self.perm_rank, self.perm_seed, "perm")
        if self.kind == "one-sided":
            return WaveformId.one_sided(n, c1, perm2, c2)
        perm1 = self._perm(n, self.perm1_rank, self.perm1_seed, "perm1")
        return WaveformId.two_sided(n, c1, perm1, perm2, c2)

    def _perm(self, n: int, rank: int | None, seed: int | None, which: str):
        if rank is not None:
            if not 0 <= rank < math.factorial(n):
                raise ConfigError(f"waveform {self.label}: {which}_rank out of range")
            return permutation_from_rank(n, rank)
        if seed is not None:
            return random_permutation(n, np.random.default_rng(seed))
        raise ConfigError(
            f"waveform {self.label}: kind {self.kind!r} needs {which}_rank or {which}_seed"
        )


@dataclass(frozen=True)
class ChannelParams:
    """Channel section: either a random family (``paths`` count) or an
    explicit path list of (delay, doppler, gain) triples."""

    n: int
    lmax: int
    fmax: int
    guard: int = 0
    fractional: bool = False
    paths: int | None = None
    explicit: tuple[tuple[int, float, complex], ...] = ()

    def __post_init__(self):
        if self.paths is None and not self.explicit:
            raise ConfigError("channel: set paths = <count> or explicit path<k> entries")

    def family(self) -> ChannelFamily:
        if self.paths is None:
            raise ConfigError("channel: this experiment draws random channels; set paths")
        return ChannelFamily(
            n=self.n,
            p=self.paths,
            lmax=self.lmax,
            fmax=self.fmax,
            guard=self.guard,
            fractional=self.fractional,
        )

    def spec(self) -> ChannelSpec:
        if not self.explicit:
            raise ConfigError("channel: no explicit path<k> entries to build a fixed channel")
        paths = tuple(
            PathSpec(gain=g, delay=d, doppler=f) for d, f, g in self.explicit
        )
        return ChannelSpec(
            n=self.n, paths=paths, lmax=self.lmax, fmax=self.fmax, guard=self.guard
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run."""

    experiment: str
    seed: int = 0
    trials: int = 0
    snr_grid: tuple[float, ...] = ()
    format: str = "csv"
    out: str = "."
    channel: ChannelParams | None = None
    waveforms: tuple[WaveformSpec, ...] = ()
    options: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r} "
                f"(expected one of {', '.join(EXPERIMENTS)})"
            )
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r} (expected csv or json)")
        labels = [w.label for w in self.waveforms]
        if len(set(labels)) != len(labels):
            raise ConfigError("waveform labels must be unique")

    def option(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.options:
            if k == key:
                return v
        return default

    def option_int(self, key: str, default: int | None = None) -> int | None:
        raw = self.option(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"options.{key}: expected an integer, got {raw!r}") from exc

    def option_float(self, key: str, default: float | None = None) -> float | None:
        raw = self.option(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"options.{key}: expected a number, got {raw!r}") from exc


# --------------------------------------------------------------------- parse


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from exc


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from exc


def _parse_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _parse_grid(section: str, key: str, raw: str) -> tuple[float, ...]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    return tuple(_parse_float(section, key, p) for p in parts)


def _parse_channel_section(items: dict[str, str]) -> ChannelParams:
    known = {"n", "lmax", "fmax", "guard", "fractional", "paths"}
    fields: dict = {}
    for key in ("n", "lmax", "fmax"):
        if key not in items:
            raise ConfigError(f"[channel] missing required key {key}")
        fields[key] = _parse_int("channel", key, items[key])
    if "guard" in items:
        fields["guard"] = _parse_int("channel", "guard", items["guard"])
    if "fractional" in items:
        fields["fractional"] = _parse_bool("channel", "fractional", items["fractional"])
    if "paths" in items:
        fields["paths"] = _parse_int("channel", "paths", items["paths"])
    explicit = []
    for key, raw in items.items():
        if key in known:
            continue
        m = re.fullmatch(r"path(\d+)", key)
        if not m:
            raise ConfigError(f"[channel] unknown key {key}")
        parts = raw.split()
        if len(parts) != 4:
            raise ConfigError(
                f"[channel] {key}: expected 'delay doppler re im', got {raw!r}"
            )
        delay = _parse_int("channel", key, parts[0])
        dopp = _parse_float("channel", key, parts[1])
        gain = complex(
            _parse_float("channel", key, parts[2]), _parse_float("channel", key, parts[3])
        )
        explicit.append((int(m.group(1)), (delay, dopp, gain)))
    explicit.sort(key=lambda kv: kv[0])
    fields["explicit"] = tuple(entry for _, entry in explicit)
    return ChannelParams(**fields)


def _parse_waveform_section(label: str, items: dict[str, str]) -> WaveformSpec:
    section = f"waveform:{label}"
    if "kind" not in items:
        raise ConfigError(f"[{section}] missing required key kind")
    fields: dict = {"label": label, "kind": items["kind"].strip()}
    int_keys = ("n", "perm_rank", "perm_seed", "perm1_rank", "perm1_seed")
    float_keys = ("c1", "c2")
    for key, raw in items.items():
        if key == "kind":
            continue
        if key in int_keys:
            fields[key] = _parse_int(section, key, raw)
        elif key in float_keys:
            fields[key] = _parse_float(section, key, raw)
        else:
            raise ConfigError(f"[{section}] unknown key {key}")
    return WaveformSpec(**fields)


def _parse_ini(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    exp = dict(parser.items("experiment"))
    if "kind" not in exp:
        raise ConfigError("[experiment] missing required key kind")
    fields: dict = {"experiment": exp.pop("kind").strip()}
    if "seed" in exp:
        fields["seed"] = _parse_int("experiment", "seed", exp.pop("seed"))
    if "trials" in exp:
        fields["trials"] = _parse_int("experiment", "trials", exp.pop("trials"))
    if "snr_grid" in exp:
        fields["snr_grid"] = _parse_grid("experiment", "snr_grid", exp.pop("snr_grid"))
    if "format" in exp:
        fields["format"] = exp.pop("format").strip()
    if "out" in exp:
        fields["out"] = exp.pop("out").strip()
    if exp:
        raise ConfigError(f"[experiment] unknown key {next(iter(exp))}")

    waveforms = []
    for name in parser.sections():
        if name == "experiment":
            continue
        items = dict(parser.items(name))
        if name == "channel":
            fields["channel"] = _parse_channel_section(items)
        elif name.startswith("waveform:"):
            waveforms.append(_parse_waveform_section(name.split(":", 1)[1], items))
        elif name == "options":
            fields["options"] = tuple(sorted(items.items()))
        else:
            raise ConfigError(f"unknown section [{name}]")
    fields["waveforms"] = tuple(waveforms)
    return ExperimentConfig(**fields)


def _parse_json(text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("JSON config must be an object")
    doc = dict(doc)
    if "experiment" not in doc:
        raise ConfigError("JSON config missing 'experiment'")
    fields: dict = {"experiment": str(doc.pop("experiment"))}
    for key, conv in (("seed", int), ("trials", int)):
        if key in doc:
            fields[key] = conv(doc.pop(key))
    if "snr_grid" in doc:
        fields["snr_grid"] = tuple(float(v) for v in doc.pop("snr_grid"))
    for key in ("format", "out"):
        if key in doc:
            fields[key] = str(doc.pop(key))
    if "channel" in doc:
        ch = dict(doc.pop("channel"))
        explicit = tuple(
            (int(d), float(f), complex(float(re_), float(im)))
            for d, f, re_, im in ch.pop("explicit", ())
        )
        try:
            fields["channel"] = ChannelParams(explicit=explicit, **ch)
        except TypeError as exc:
            raise ConfigError(f"channel: {exc}") from exc
    if "waveforms" in doc:
        specs = []
        for entry in doc.pop("waveforms"):
            try:
                specs.append(WaveformSpec(**entry))
            except TypeError as exc:
                raise ConfigError(f"waveforms: {exc}") from exc
        fields["waveforms"] = tuple(specs)
    if "options" in doc:
        opts = doc.pop("options")
        fields["options"] = tuple(sorted((str(k), str(v)) for k, v in opts.items()))
    if doc:
        raise ConfigError(f"unknown config key {next(iter(doc))!r}")
    return ExperimentConfig(**fields)


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text, sniffing JSON (leading '{') vs key = value form."""
    if text.lstrip().startswith("{"):
        return _parse_json(text)
    return _parse_ini(text)


def load_config(path) -> ExperimentConfig:
    return parse_config(pathlib.Path(path).read_text())


# ----------------------------------------------------------------- serialize


def serialize_config(config: ExperimentConfig, form: str = "ini") -> str:
    """Canonical text for a config; parse(serialize(c)) == c in either form."""
    if form == "json":
        return json.dumps(_config_doc(config), indent=2, sort_keys=True) + "\n"
    if form != "ini":
        raise ValueError(f"unknown serialization form {form!r}")
    out = io.StringIO()
    out.write("[experiment]\n")
    out.write(f"kind = {config.experiment}\n")
    out.write(f"seed = {config.seed}\n")
    if config.trials:
        out.write(f"trials = {config.trials}\n")
    if config.snr_grid:
        out.write(f"snr_grid = {', '.join(repr(v) for v in config.snr_grid)}\n")
    out.write(f"format = {config.format}\n")
    out.write(f"out = {config.out}\n")
    if config.channel is not None:
        ch = config.channel
        out.write("\n[channel]\n")
        out.write(f"n = {ch.n}\nlmax = {ch.lmax}\nfmax = {ch.fmax}\nguard = {ch.guard}\n")
        out.write(f"fractional = {'true' if ch.fractional else 'false'}\n")
        if ch.paths is not None:
            out.write(f"paths = {ch.paths}\n")
        for i, (d, f, g) in enumerate(ch.explicit, start=1):
            out.write(f"path{i} = {d} {f!r} {g.real!r} {g.imag!r}\n")
    for w in config.waveforms:
        out.write(f"\n[waveform:{w.label}]\n")
        out.write(f"kind = {w.kind}\n")
        for key in ("n", "perm_rank", "perm_seed", "perm1_rank", "perm1_seed"):
            value = getattr(w, key)
            if value is not None:
                out.write(f"{key} = {value}\n")
        for key in ("c1", "c2"):
            value = getattr(w, key)
            if value is not None:
                out.write(f"{key} = {value!r}\n")
    if config.options:
        out.write("\n[options]\n")
        for key, value in config.options:
            out.write(f"{key} = {value}\n")
    return out.getvalue()


def _config_doc(config: ExperimentConfig) -> dict:
    doc: dict = {
        "experiment": config.experiment,
        "seed": config.seed,
        "format": config.format,
        "out": config.out,
    }
    if config.trials:
        doc["trials"] = config.trials
    if config.snr_grid:
        doc["snr_grid"] = list(config.snr_grid)
    if config.channel is not None:
        ch = dataclasses.asdict(config.channel)
        if ch["paths"] is None:
            del ch["paths"]
        if ch["explicit"]:
            ch["explicit"] = [[d, f, g.real, g.imag] for d, f, g in ch["explicit"]]
        else:
            del ch["explicit"]
        doc["channel"] = ch
    if config.waveforms:
        doc["waveforms"] = [
            {k: v for k, v in dataclasses.asdict(w).items() if v is not None}
            for w in config.waveforms
        ]
    if config.options:
        doc["options"] = dict(config.options)
    return doc


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialization; stable across formatting."""
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


# ------------------------------------------------------------------ validate


def validate(config: ExperimentConfig) -> list[str]:
    """Physics diagnostics (non-fatal): orthogonality, c1 choice, capacity."""
    notes = []
    ch = config.channel
    if ch is not None:
        lhs = 2 * (ch.fmax + ch.guard) * (ch.lmax + 1) + ch.lmax
        if lhs > ch.n:
            notes.append(
                f"orthogonality violated: 2*{ch.fmax + ch.guard}*{ch.lmax + 1}"
                f"+{ch.lmax} = {lhs} > {ch.n}; paths will overlap in the "
                "demodulated domain"
            )
        opt = optimal_c1(ch.fmax, ch.guard, ch.n)
        for w in config.waveforms:
            if w.kind != "ofdm" and w.c1 is not None and not math.isclose(w.c1, opt):
                notes.append(
                    f"waveform {w.label}: c1 = {w.c1!r} deviates from the "
                    f"orthogonality-optimal {opt!r}"
                )
    if config.experiment == "cpim":
        k_bits = config.option_int("k_bits")
        n = ch.n if ch is not None else config.option_int("n")
        if k_bits is not None and n is not None and k_bits > max_index_bits(n):
            notes.append(
                f"codebook capacity exceeded: k_bits = {k_bits} > "
                f"floor(log2({n}!)) = {max_index_bits(n)}"
            )
    return notes


# -------------------------------------------------------------- run: helpers


def _write_csv(path: pathlib.Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: pathlib.Path, doc) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_channel(config: ExperimentConfig) -> ChannelParams:
    if config.channel is None:
        raise ConfigError(f"{config.experiment}: a [channel] section is required")
    return config.channel


def _require_waveforms(config: ExperimentConfig) -> list[WaveformId]:
    if not config.waveforms:
        raise ConfigError(f"{config.experiment}: at least one [waveform:*] section required")
    return [w.resolve(config.channel) for w in config.waveforms]


def _require_grid_trials(config: ExperimentConfig) -> None:
    if not config.snr_grid:
        raise ConfigError(f"{config.experiment}: snr_grid must be non-empty")
    if config.trials < 1:
        raise ConfigError(f"{config.experiment}: trials must be positive")


def _constellation(config: ExperimentConfig):
    return qam_constellation(config.option_int("constellation", 4))


def _amplitude_db(amplitudes: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(amplitudes), _AMP_FLOOR))


# ---------------------------------------------------------- run: experiments


def _run_ber(config, out_dir, threads):
    _require_grid_trials(config)
    family = _require_channel(config).family()
    waveforms = _require_waveforms(config)
    records = run_ber_multi(
        waveforms,
        family,
        config.snr_grid,
        config.trials,
        config.seed,
        _constellation(config),
        threads,
    )
    labels = [w.label for w in config.waveforms]
    if config.format == "json":
        doc = {
            label: [dataclasses.asdict(r) for r in recs]
            for label, recs in zip(labels, records)
        }
        _write_json(out_dir / "ber.json", doc)
        return ["ber.json"]
    names = []
    for label, recs in zip(labels, records):
        name = f"ber_{label}.csv"
        _write_csv(
            out_dir / name,
            ("snr_db", "trials", "bit_errors", "ber", "ci95"),
            [(r.snr_db, r.trials, r.bit_errors, r.ber, r.ci95) for r in recs],
        )
        names.append(name)
    return names


def _run_papr(config, out_dir, threads):
    waveforms = _require_waveforms(config)
    frames = config.option_int("frames", 10000)
    bins = config.option_int("hist_bins", 50)
    constellation = _constellation(config)
    doc = {}
    names = []
    for spec, w in zip(config.waveforms, waveforms):
        samples = papr_samples(
            w, constellation, frames, spawn_rng(config.seed, "papr", spec.label)
        )
        curve = papr_ccdf(samples, w.n)
        counts, edges = np.histogram(samples, bins=bins)
        if config.format == "json":
            doc[spec.label] = {
                "ccdf": {
                    "gamma_db": [float(v) for v in curve.gammas_db],
                    "p_empirical": [float(v) for v in curve.empirical],
                    "p_analytic": [float(v) for v in curve.analytic],
                },
                "histogram": {
                    "bin_low": [float(v) for v in edges[:-1]],
                    "bin_high": [float(v) for v in edges[1:]],
                    "count": [int(v) for v in counts],
                },
            }
            continue
        ccdf_name = f"papr_ccdf_{spec.label}.csv"
        hist_name = f"papr_hist_{spec.label}.csv"
        _write_csv(
            out_dir / ccdf_name,
            ("gamma_db", "p_empirical", "p_analytic"),
            [
                (float(g), float(e), float(a))
                for g, e, a in zip(curve.gammas_db, curve.empirical, curve.analytic)
            ],
        )
        _write_csv(
            out_dir / hist_name,
            ("bin_low", "bin_high", "count"),
            [
                (float(lo), float(hi), int(c))
                for lo, hi, c in zip(edges[:-1], edges[1:], counts)
            ],
        )
        names += [ccdf_name, hist_name]
    if config.format == "json":
        _write_json(out_dir / "papr.json", doc)
        return ["papr.json"]
    return names


def _run_af(config, out_dir, threads):
    waveforms = _require_waveforms(config)
    q = config.option_int("oversample", 8)
    doc = {}
    names = []
    for spec, w in zip(config.waveforms, waveforms):
        symbols = Frame(np.ones(w.n, dtype=np.complex128), "symbol")
        grid = ambiguity(modulate(w, symbols).data, q=q)
        cuts = {
            "zero_delay": grid.zero_delay_cut(),
            "zero_doppler": grid.zero_doppler_cut(),
        }
        if config.format == "json":
            doc[spec.label] = {
                kind: {
                    "axis_value": [float(v) for v in axis],
                    "amplitude_db": [float(v) for v in _amplitude_db(amp)],
                }
                for kind, (axis, amp) in cuts.items()
            }
            continue
        for kind, (axis, amp) in cuts.items():
            name = f"af_{kind}_{spec.label}.csv"
            _write_csv(
                out_dir / name,
                ("axis_value", "amplitude_db"),
                list(zip(map(float, axis), map(float, _amplitude_db(amp)))),
            )
            names.append(name)
    if config.format == "json":
        _write_json(out_dir / "af.json", doc)
        return ["af.json"]
    return names


def _run_effchan(config, out_dir, threads):
    params = _require_channel(config)
    waveforms = _require_waveforms(config)
    if params.explicit:
        spec = params.spec()
    else:
        spec = params.family().draw(spawn_rng(config.seed, "effchan"))
    doc = {}
    names = []
    for wspec, w in zip(config.waveforms, waveforms):
        g = effective_channel(spec, w.cfg).matrix
        if config.format == "json":
            doc[wspec.label] = {
                "n": g.shape[0],
                "entries": [
                    [r, c, g[r, c].real, g[r, c].imag]
                    for r in range(g.shape[0])
                    for c in range(g.shape[1])
                ],
            }
            continue
        name = f"effchan_{wspec.label}.csv"
        _write_csv(
            out_dir / name,
            ("row", "col", "re", "im"),
            [
                (r, c, g[r, c].real, g[r, c].imag)
                for r in range(g.shape[0])
                for c in range(g.shape[1])
            ],
        )
        names.append(name)
    if config.format == "json":
        _write_json(out_dir / "effchan.json", doc)
        return ["effchan.json"]
    return names


def _run_cpim(config, out_dir, threads):
    _require_grid_trials(config)
    family = _require_channel(config).family()
    k_bits = config.option_int("k_bits")
    if k_bits is None:
        raise ConfigError("cpim: options.k_bits is required")
    codebook = build_codebook(
        family.n, k_bits, config.option_int("codebook_seed", config.seed)
    )
    records = run_cpim(
        codebook,
        family,
        config.snr_grid,
        config.trials,
        config.seed,
        _constellation(config),
        config.option_float("c1"),
        config.option_float("c2"),
        threads,
    )
    if config.format == "json":
        _write_json(out_dir / "cpim.json", [dataclasses.asdict(r) for r in records])
        return ["cpim.json"]
    _write_csv(
        out_dir / "cpim.csv",
        ("snr_db", "index_error_rate", "symbol_ber", "total_ber"),
        [(r.snr_db, r.index_error_rate, r.symbol_ber, r.total_ber) for r in records],
    )
    return ["cpim.csv"]


def _run_physec(config, out_dir, threads):
    _require_grid_trials(config)
    params = _require_channel(config)
    family = params.family()
    key_rank = config.option_int("key_rank")
    if key_rank is not None:
        key = PermKey.from_rank(family.n, key_rank)
    else:
        key = keygen(family.n, config.option_int("key_seed", config.seed))
    report = eavesdrop_experiment(
        key,
        config.option_int("wrong_keys", 4),
        family,
        config.snr_grid,
        config.trials,
        config.seed,
        _constellation(config),
        config.option_float("c1"),
        config.option_float("c2"),
        threads,
    )
    scatter_frames = config.option_int("scatter_frames", 0)
    scatter = None
    if scatter_frames > 0:
        wrong = draw_wrong_keys(key, 1, config.seed)[0]
        scatter = mismatched_scatter(
            key,
            wrong,
            family,
            config.option_float("scatter_snr", max(config.snr_grid)),
            scatter_frames,
            config.seed,
            _constellation(config),
            config.option_float("c1"),
            config.option_float("c2"),
        )
    if config.format == "json":
        doc = {
            "snr_db": list(report.snr_db),
            "matched_ber": list(report.matched_ber),
            "mismatched_ber": list(report.mismatched_ber),
            "mismatched_evm": list(report.mismatched_evm),
            "bits_per_point": report.bits_per_point,
        }
        if scatter is not None:
            doc["scatter"] = [[z.real, z.imag] for z in scatter]
        _write_json(out_dir / "physec.json", doc)
        return ["physec.json"]
    names = ["physec.csv"]
    _write_csv(
        out_dir / "physec.csv",
        ("snr_db", "matched_ber", "mismatched_ber", "mismatched_evm"),
        list(
            zip(
                report.snr_db,
                report.matched_ber,
                report.mismatched_ber,
                report.mismatched_evm,
            )
        ),
    )
    if scatter is not None:
        _write_csv(
            out_dir / "physec_scatter.csv",
            ("re", "im"),
            [(z.real, z.imag) for z in scatter],
        )
        names.append("physec_scatter.csv")
    return names


def _run_keyspace(config, out_dir, threads):
    n = config.option_int("n", config.channel.n if config.channel else None)
    if n is None:
        raise ConfigError("keyspace: set options.n or a [channel] section")
    report = keyspace_report(n)
    if config.format == "json":
        _write_json(out_dir / "keyspace.json", dataclasses.asdict(report))
        return ["keyspace.json"]
    _write_csv(
        out_dir / "keyspace.csv",
        ("n", "keyspace_size", "factorial_bits", "note"),
        [(report.n, report.keyspace_size, report.factorial_bits, report.brute_force_note)],
    )
    return ["keyspace.csv"]


_DISPATCH = {
    "ber": _run_ber,
    "papr": _run_papr,
    "af": _run_af,
    "effchan": _run_effchan,
    "cpim": _run_cpim,
    "physec": _run_physec,
    "keyspace": _run_keyspace,
}


def run(config: ExperimentConfig, out_dir=None, threads: int = 1) -> list[pathlib.Path]:
    """Execute one experiment; returns the written files (manifest first).

    Validation diagnostics are printed to stderr as warnings but do not stop
    the run.  All trial-level parallelism aggregates order-independently, so
    the outputs are byte-identical for any thread count.
    """
    out = pathlib.Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)
    for note in validate(config):
        print(f"cpafdm: warning: {note}", file=sys.stderr)
    names = _DISPATCH[config.experiment](config, out, threads)
    manifest = {
        "config_sha256": config_hash(config),
        "experiment": config.experiment,
        "format": config.format,
        "outputs": sorted(names),
        "seed": config.seed,
        "version": __version__,
    }
    _write_json(out / "manifest.json", manifest)
    return [out / "manifest.json"] + [out / name for name in names]


# ---------------------------------------------------------------- entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cpafdm",
        description="Run chirp-permuted AFDM experiments from a config file.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="path to an INI or JSON config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory (default: config out)")
    parser.add_argument("--format", choices=FORMATS, help="override the output format")
    parser.add_argument(
        "--threads",
        type=int,
        help=f"worker threads (default: ${THREADS_ENV} or 1)",
    )
    args = parser.parse_args(argv)

    if args.threads is not None:
        threads = args.threads
    else:
        try:
            threads = int(os.environ.get(THREADS_ENV, "1"))
        except ValueError:
            print(f"cpafdm: invalid {THREADS_ENV} value", file=sys.stderr)
            return 2
    if threads < 1:
        print("cpafdm: thread count must be positive", file=sys.stderr)
        return 2

    try:
        config = load_config(args.config)
        if config.experiment != args.experiment:
            raise ConfigError(
                f"config declares experiment {config.experiment!r}, "
                f"but {args.experiment!r} was requested"
            )
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.format is not None:
            overrides["format"] = args.format
        if overrides:
            config = dataclasses.replace(config, **overrides)
        outputs = run(config, out_dir=args.out, threads=threads)
    except ConfigError as exc:
        print(f"cpafdm: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cpafdm: {exc}", file=sys.stderr)
        return 1
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
