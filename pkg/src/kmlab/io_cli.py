"""Scenario configuration parsing, CSV and snapshot persistence.

Config files are sectioned key-value text (`[section]`, `key = value`, `#`
comments).  Unknown sections or keys are rejected, and every diagnostic
carries the line number it came from.  Moment tables round-trip losslessly
through CSV (17 significant digits); ensembles round-trip bit-exactly
through a little-endian binary snapshot that also carries the generator
state, so a resumed run continues exactly like an unbroken one.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsmc import (
    GaussianMixture,
    ParticleEnsemble,
    PointMasses,
    ScenarioConfig,
    UniformBall,
)
from .errors import ConfigError
from .kernels import AngularKernel
from .moments import MomentTable
from .special_fn import MLSpec

SNAPSHOT_MAGIC = b"KMEN"
SNAPSHOT_VERSION = 1

_KNOWN_KEYS = {
    "run": {"model", "dimension", "n", "dt", "t_end", "seed", "max_collision_prob"},
    "kernel": {"family", "dimension", "profile", "nu", "level", "theta_min"},
    "initial": {"kind", "mean", "sigma", "weights", "means", "sigmas", "radius",
                "velocities"},
    "diagnostics": {"orders", "ml", "output_every", "max_order"},
    "recipe": {"s", "alpha0", "q0_max", "m0_bound"},
}
_REQUIRED = {("run", "model"), ("run", "t_end")}


@dataclass
class ParsedConfig:
    """Scenario plus parse-time metadata (hash, warnings, recipe section)."""

    scenario: ScenarioConfig
    config_hash: str
    warnings: list[str] = field(default_factory=list)
    recipe: dict = field(default_factory=dict)


class _Entries:
    """(section, key) -> (value, line) store with precise error reporting."""

    def __init__(self, text: str):
        self.data: dict[tuple[str, str], tuple[str, int]] = {}
        self.section_lines: dict[str, int] = {}
        section = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                if section not in _KNOWN_KEYS:
                    raise ConfigError(f"line {lineno}: unknown section [{section}]")
                self.section_lines.setdefault(section, lineno)
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            if section is None:
                raise ConfigError(f"line {lineno}: key outside of any [section]")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lower()
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
            if (section, key) in self.data:
                raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{section}]")
            self.data[(section, key)] = (value, lineno)

    def get(self, section: str, key: str, default=None):
        return self.data.get((section, key), (default, None))[0]

    def line(self, section: str, key: str) -> int | None:
        entry = self.data.get((section, key))
        return entry[1] if entry else None

    def require(self, section: str, key: str) -> str:
        entry = self.data.get((section, key))
        if entry is None:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        return entry[0]


def _parse_float(entries: _Entries, section: str, key: str, default=None,
                 minimum=None, maximum=None):
    raw = entries.get(section, key)
    if raw is None:
        return default
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(
            f"line {entries.line(section, key)}: {key} must be a number, got {raw!r}"
        ) from None
    if minimum is not None and val < minimum or maximum is not None and val > maximum:
        raise ConfigError(
            f"line {entries.line(section, key)}: {key}={val} outside "
            f"[{minimum}, {maximum}]"
        )
    return val


def _parse_int(entries: _Entries, section: str, key: str, default=None, minimum=None):
    raw = entries.get(section, key)
    if raw is None:
        return default
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(
            f"line {entries.line(section, key)}: {key} must be an integer, got {raw!r}"
        ) from None
    if minimum is not None and val < minimum:
        raise ConfigError(f"line {entries.line(section, key)}: {key}={val} below {minimum}")
    return val


def _vectors(raw: str) -> tuple[tuple[float, ...], ...]:
    out = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if chunk:
            out.append(tuple(float(x) for x in chunk.split()))
    return tuple(out)


def _parse_initial(entries: _Entries, d: int):
    kind = (entries.get("initial", "kind") or "gaussian").lower()
    if kind == "gaussian":
        mean_raw = entries.get("initial", "mean", "0")
        sigma_raw = entries.get("initial", "sigma", "1")
        mean = tuple(float(x) for x in mean_raw.split())
        sigma = tuple(float(x) for x in sigma_raw.split())
        if len(mean) == 1:
            mean = mean * d
        if len(sigma) == 1:
            sigma = sigma * d
        if len(mean) != d or len(sigma) != d:
            raise ConfigError(
                f"line {entries.line('initial', 'mean') or entries.line('initial', 'sigma')}: "
                f"gaussian mean/sigma must have 1 or {d} components"
            )
        return GaussianMixture(weights=(1.0,), means=(mean,), sigmas=(sigma,))
    if kind == "gaussian_mixture":
        weights = tuple(float(x) for x in entries.require("initial", "weights").split())
        means = _vectors(entries.require("initial", "means"))
        sigmas = _vectors(entries.require("initial", "sigmas"))
        sigmas = tuple(s * d if len(s) == 1 else s for s in sigmas)
        means = tuple(m * d if len(m) == 1 else m for m in means)
        return GaussianMixture(weights=weights, means=means, sigmas=sigmas)
    if kind == "uniform_ball":
        radius = _parse_float(entries, "initial", "radius")
        if radius is None:
            raise ConfigError("uniform_ball initial law requires a radius")
        return UniformBall(radius=radius)
    if kind == "point_masses":
        vel = _vectors(entries.require("initial", "velocities"))
        vel = tuple(v * d if len(v) == 1 else v for v in vel)
        weights_raw = entries.get("initial", "weights")
        weights = (
            tuple(float(x) for x in weights_raw.split()) if weights_raw else None
        )
        return PointMasses(velocities=vel, weights=weights)
    raise ConfigError(
        f"line {entries.line('initial', 'kind')}: unknown initial kind {kind!r}"
    )


def _parse_ml_specs(entries: _Entries) -> tuple[MLSpec, ...]:
    raw = entries.get("diagnostics", "ml")
    if not raw:
        return ()
    specs = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            alpha_s = chunk.split(":")
            alpha, s = float(alpha_s[0]), float(alpha_s[1])
        except (ValueError, IndexError):
            raise ConfigError(
                f"line {entries.line('diagnostics', 'ml')}: ml entries are "
                f"'alpha:s' pairs, got {chunk!r}"
            ) from None
        specs.append(MLSpec.from_alpha(alpha, s))
    return tuple(specs)


def canonical_text(text: str) -> str:
    """Whitespace- and order-independent canonical form of a config text."""
    entries = _Entries(text)
    lines = [
        f"{section}.{key}=" + " ".join(value.split())
        for (section, key), (value, _) in sorted(entries.data.items())
    ]
    return "\n".join(lines)


def config_hash(text: str) -> str:
    """Stable digest of the canonicalized config text."""
    return hashlib.sha256(canonical_text(text).encode()).hexdigest()


def parse_config(text: str) -> ParsedConfig:
    """Parse and validate a scenario config; raises ConfigError with line info."""
    entries = _Entries(text)
    for section, key in _REQUIRED:
        entries.require(section, key)
    model = entries.require("run", "model").lower()
    if model not in (kernels.KAC, kernels.BOLTZMANN):
        raise ConfigError(
            f"line {entries.line('run', 'model')}: model must be kac or boltzmann"
        )
    default_d = 1 if model == kernels.KAC else 3
    d = _parse_int(entries, "run", "dimension", default=default_d)
    if model == kernels.KAC and d != 1:
        raise ConfigError(
            f"line {entries.line('run', 'dimension')}: the kac model is one-dimensional"
        )
    if model == kernels.BOLTZMANN and d not in (2, 3):
        raise ConfigError(
            f"line {entries.line('run', 'dimension')}: supported dimensions are 2 and 3"
        )

    family = (entries.get("kernel", "family") or model).lower()
    if family != model:
        raise ConfigError(
            f"line {entries.line('kernel', 'family')}: kernel family {family!r} "
            f"does not match model {model!r}"
        )
    kd = _parse_int(entries, "kernel", "dimension", default=d)
    if kd != d:
        raise ConfigError(
            f"line {entries.line('kernel', 'dimension')}: kernel dimension {kd} "
            f"does not match run dimension {d}"
        )
    profile = (entries.get("kernel", "profile") or "constant").lower()
    if profile not in (kernels.CONSTANT, kernels.POWER):
        raise ConfigError(
            f"line {entries.line('kernel', 'profile')}: profile must be constant or power"
        )
    nu = _parse_float(entries, "kernel", "nu", default=0.0)
    level = _parse_float(entries, "kernel", "level", default=1.0, minimum=0.0)
    theta_min = _parse_float(entries, "kernel", "theta_min", default=0.0)
    if profile == kernels.POWER and not theta_min > 0.0:
        raise ConfigError(
            f"line {entries.line('kernel', 'theta_min') or entries.line('kernel', 'profile')}: "
            "untruncated singular kernel: a power profile requires theta_min > 0"
        )
    try:
        kernel = AngularKernel(
            family=family, d=d, profile=profile, level=level, nu=nu, theta_min=theta_min
        )
    except ConfigError as exc:
        raise ConfigError(f"[kernel] section: {exc}") from None

    initial = _parse_initial(entries, d)
    max_order = _parse_int(entries, "diagnostics", "max_order", default=16, minimum=2)
    orders_raw = entries.get("diagnostics", "orders", "0 2 4")
    try:
        orders = tuple(int(x) for x in orders_raw.split())
    except ValueError:
        raise ConfigError(
            f"line {entries.line('diagnostics', 'orders')}: orders must be integers"
        ) from None
    ml_specs = _parse_ml_specs(entries)

    scenario = ScenarioConfig(
        model=model,
        d=d,
        kernel=kernel,
        t_end=_parse_float(entries, "run", "t_end", minimum=0.0),
        n_particles=_parse_int(entries, "run", "n", default=10_000, minimum=2),
        dt=_parse_float(entries, "run", "dt"),
        initial=initial,
        seed=_parse_int(entries, "run", "seed", default=1),
        orders=orders,
        ml_specs=ml_specs,
        output_every=_parse_int(entries, "diagnostics", "output_every", default=1, minimum=1),
        max_collision_prob=_parse_float(
            entries, "run", "max_collision_prob", default=0.5, minimum=1e-6, maximum=1.0
        ),
        max_order=max_order,
    )

    warnings = []
    xi = kernels.classify_singularity(kernel)
    s_cap = 4.0 / (2.0 + xi)
    s_values = [spec.s for spec in ml_specs]
    recipe = {}
    if entries.get("recipe", "s") is not None:
        recipe["s"] = _parse_float(entries, "recipe", "s", minimum=1e-9, maximum=2.0)
        recipe["alpha0"] = _parse_float(entries, "recipe", "alpha0", default=0.5, minimum=0.0)
        recipe["q0_max"] = _parse_int(entries, "recipe", "q0_max", default=200_000, minimum=3)
        m0_bound = _parse_float(entries, "recipe", "m0_bound")
        if m0_bound is not None:
            recipe["m0_bound"] = m0_bound
        s_values.append(recipe["s"])
    for s in s_values:
        if s > s_cap + 1e-12:
            warnings.append(
                f"order s = {s:.6g} exceeds the propagation cap 4/(2+xi) = {s_cap:.6g} "
                f"for singularity index {xi:.3g}; the run is exploratory"
            )

    return ParsedConfig(
        scenario=scenario,
        config_hash=config_hash(text),
        warnings=warnings,
        recipe=recipe,
    )


# ---------------------------------------------------------------------------
# Moment table CSV

_CSV_HEADER = "t,diagnostic,value,std_err,flags"


def write_moment_csv(table: MomentTable, path) -> None:
    """Long-format CSV: one row per (time, diagnostic), 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# kmlab moment table v1\n")
        fh.write("# diagnostic: m<2q> | exp:la=<log alpha>:s=<s> | ml:la=<log alpha>:s=<s>\n")
        fh.write("# flags: ok | log (value/std_err are natural logs) | degraded\n")
        fh.write(_CSV_HEADER + "\n")
        for i, t in enumerate(table.times):
            for j, col in enumerate(table.columns):
                fh.write(
                    f"{t:.17g},{col},{table.values[i][j]:.17g},"
                    f"{table.std_errs[i][j]:.17g},{table.flags[i][j]}\n"
                )


def read_moment_csv(path) -> MomentTable:
    """Inverse of write_moment_csv; raises ConfigError with the bad row index."""
    table = MomentTable()
    rows: dict[float, dict[str, tuple[float, float, str]]] = {}
    order: list[float] = []
    columns: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for idx, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line == _CSV_HEADER:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ConfigError(f"{path}: row {idx}: expected 5 fields, got {len(parts)}")
            try:
                t = float(parts[0])
                value = float(parts[2])
                std_err = float(parts[3])
            except ValueError:
                raise ConfigError(f"{path}: row {idx}: malformed number") from None
            col = parts[1]
            flag = parts[4]
            if col not in columns:
                columns.append(col)
            if t not in rows:
                rows[t] = {}
                order.append(t)
            rows[t][col] = (value, std_err, flag)
    table.columns = columns
    for t in order:
        row = rows[t]
        if set(row) != set(columns):
            raise ConfigError(f"{path}: time {t} is missing some diagnostics")
        table.times.append(t)
        table.values.append([row[c][0] for c in columns])
        table.std_errs.append([row[c][1] for c in columns])
        table.flags.append([row[c][2] for c in columns])
    return table


# ---------------------------------------------------------------------------
# Ensemble snapshots

def write_snapshot(ensemble: ParticleEnsemble, path) -> None:
    """Binary snapshot: magic, version, d, N, time, generator state, velocities.

    All integers and floats little-endian; velocities row-major f64.
    """
    state_bytes = json.dumps(ensemble.rng.bit_generator.state).encode()
    v = np.ascontiguousarray(ensemble.velocities, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<HHQd", SNAPSHOT_VERSION, ensemble.d, ensemble.n, ensemble.time))
        fh.write(struct.pack("<I", len(state_bytes)))
        fh.write(state_bytes)
        fh.write(v.tobytes())


def read_snapshot(path) -> ParticleEnsemble:
    """Restore a snapshot bit-exactly (velocities, time, generator state)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path}: not a kmlab snapshot (bad magic)")
    try:
        version, d, n, t = struct.unpack_from("<HHQd", blob, 4)
        if version != SNAPSHOT_VERSION:
            raise ConfigError(f"{path}: unsupported snapshot version {version}")
        off = 4 + struct.calcsize("<HHQd")
        (state_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        state = json.loads(blob[off : off + state_len].decode())
        off += state_len
        expected = n * d * 8
        payload = blob[off : off + expected]
        if len(payload) != expected:
            raise ConfigError(f"{path}: truncated snapshot (velocity payload)")
        velocities = np.frombuffer(payload, dtype="<f8").reshape(n, d).copy()
    except struct.error:
        raise ConfigError(f"{path}: truncated snapshot (header)") from None
    bit_gen_name = state.get("bit_generator", "PCG64")
    bit_gen = getattr(np.random, bit_gen_name)()
    bit_gen.state = state
    rng = np.random.Generator(bit_gen)
    return ParticleEnsemble(velocities=velocities, time=t, rng=rng)


# ---------------------------------------------------------------------------
# Run manifest

@dataclass
class RunManifest:
    """Reproducibility record written next to simulation outputs."""

    config_hash: str
    seed: int
    version: str
    started: float
    finished: float
    outputs: list[str]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def new_manifest(config_digest: str, seed: int, started: float,
                 outputs: list[str]) -> RunManifest:
    from . import __version__

    return RunManifest(
        config_hash=config_digest,
        seed=seed,
        version=__version__,
        started=started,
        finished=time.time(),
        outputs=outputs,
    )
