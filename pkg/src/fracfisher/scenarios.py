"""Experiment definitions: initial-condition generators, the run
configuration schema, and its flat key = value text format.

The configuration document is INI-style with sections [mesh], [time],
[physics], [ic], [output]; keys are named exactly like the corresponding
config fields, '#' starts a comment, and the file is UTF-8.  Unset keys
fall back to the reference tumor-growth setup: domain (-1,1)^2, D = 1e-3,
r = 5, grading 2, final time 5, interface width 10 cells.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np

from .femspace import TriMesh, build_mesh
from .models import ModelParams

__all__ = [
    "ConfigError",
    "MeshSpec",
    "TimeSpec",
    "IcSpec",
    "OutputSpec",
    "RunConfig",
    "load_config",
    "dumps_config",
    "default_config",
    "build_run_mesh",
    "ic_smoothed",
    "levelset_circle",
    "levelset_four_circles",
    "levelset_blob",
    "initial_field",
]

# level-set value assigned outside the blob restriction window; large enough
# that the tanh profile saturates to exactly zero there
_BLOB_CLAMP = 1.0e3

_DEFAULT_FOUR_CENTERS = ((-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5))


class ConfigError(ValueError):
    """Invalid configuration document; message carries the [section] key."""


@dataclass(frozen=True)
class MeshSpec:
    nx: int = 64
    ny: int = 64
    bounds: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)


@dataclass(frozen=True)
class TimeSpec:
    N: int = 64
    gamma: float = 2.0
    T: float = 5.0


@dataclass(frozen=True)
class IcSpec:
    type: str = "circle"                      # circle | four_circles | blob | from_file
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.2
    centers: tuple = _DEFAULT_FOUR_CENTERS    # four_circles only
    path: str | None = None                   # from_file only


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    snapshot_times: tuple | None = None       # None -> {0, T/4, T/2, T}
    formats: tuple = ("vtk",)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSpec = field(default_factory=MeshSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    physics: ModelParams = field(default_factory=ModelParams)
    ic: IcSpec = field(default_factory=IcSpec)
    epsilon_factor: float = 10.0              # interface width as multiple of h
    output: OutputSpec = field(default_factory=OutputSpec)

    def epsilon(self) -> float:
        h = (self.mesh.bounds[1] - self.mesh.bounds[0]) / self.mesh.nx
        return self.epsilon_factor * h

    def snapshot_times(self) -> tuple:
        if self.output.snapshot_times is not None:
            return self.output.snapshot_times
        T = self.time.T
        return (0.0, T / 4.0, T / 2.0, T)


def default_config() -> RunConfig:
    return RunConfig()


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def levelset_circle(center=(0.0, 0.0), radius: float = 0.2):
    """Signed distance to a circle: negative inside, zero on the boundary."""
    if radius <= 0.0:
        raise ValueError(f"radius must be > 0, got {radius}")
    cx, cy = center

    def s(x, y):
        return np.hypot(np.asarray(x) - cx, np.asarray(y) - cy) - radius

    return s


def levelset_four_circles(centers=_DEFAULT_FOUR_CENTERS, radius: float = 0.15):
    """Pointwise minimum of four circle level sets (union of the disks)."""
    if radius <= 0.0:
        raise ValueError(f"radius must be > 0, got {radius}")
    parts = [levelset_circle(c, radius) for c in centers]

    def s(x, y):
        return np.minimum.reduce([p(x, y) for p in parts])

    return s


def levelset_blob():
    """Irregular tumor-like region from a smooth trigonometric level set.

    The formula is applied verbatim in domain coordinates and is only
    meaningful inside the window 0.05 < x < 0.9, 0.1 < y < 0.85; outside
    the window the level set is clamped to a large positive value so the
    smoothed indicator is exactly zero there.
    """

    def s(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx, dy = x - 0.6, y - 0.5
        val = ((np.sin(6.0 * dx + 2.0 * dy) + 1.0) * (7.0 * dx - 0.2) ** 2
               + (np.sin(-8.0 * dx + 10.0 * dy) + 1.1) * (9.0 * dy + 0.1) ** 2
               - 1.0)
        inside = (x > 0.05) & (x < 0.9) & (y > 0.1) & (y < 0.85)
        return np.where(inside, val, _BLOB_CLAMP)

    return s


def ic_smoothed(mesh: TriMesh, levelset, epsilon: float) -> np.ndarray:
    """Smoothed indicator of {s < 0}: nodal values of (1 - tanh(s/eps)) / 2."""
    if epsilon <= 0.0:
        raise ValueError(f"interface width must be > 0, got {epsilon}")
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    s = np.asarray(levelset(x, y), dtype=float)
    return 0.5 * (1.0 - np.tanh(s / epsilon))


def _require_circle_inside(center, radius, bounds, where: str) -> None:
    cx, cy = center
    x0, x1, y0, y1 = bounds
    if not (x0 <= cx - radius and cx + radius <= x1
            and y0 <= cy - radius and cy + radius <= y1):
        raise ConfigError(f"{where}: circle center={center} radius={radius} "
                          f"does not fit inside the domain {bounds}")


def initial_field(config: RunConfig, mesh: TriMesh) -> np.ndarray:
    """Nodal interpolant of the configured initial condition."""
    ic = config.ic
    if ic.type == "circle":
        _require_circle_inside(ic.center, ic.radius, mesh.bounds, "[ic]")
        s = levelset_circle(ic.center, ic.radius)
    elif ic.type == "four_circles":
        for c in ic.centers:
            _require_circle_inside(c, ic.radius, mesh.bounds, "[ic]")
        s = levelset_four_circles(ic.centers, ic.radius)
    elif ic.type == "blob":
        s = levelset_blob()
    elif ic.type == "from_file":
        if not ic.path:
            raise ConfigError("[ic] path: required for type = from_file")
        values = np.loadtxt(ic.path)
        if values.shape != (mesh.n_vertices,):
            raise ConfigError(f"[ic] path: field in {ic.path!r} has shape "
                              f"{values.shape}, mesh needs ({mesh.n_vertices},)")
        return values
    else:
        raise ConfigError(f"[ic] type: unknown initial condition {ic.type!r}")
    return ic_smoothed(mesh, s, config.epsilon())


def build_run_mesh(config: RunConfig) -> TriMesh:
    return build_mesh(config.mesh.nx, config.mesh.ny, config.mesh.bounds)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "mesh": {"nx", "ny", "bounds"},
    "time": {"N", "gamma", "T"},
    "physics": {"D", "r", "alpha", "model", "bc", "bc_value", "reaction_mode"},
    "ic": {"type", "center", "radius", "centers", "path", "epsilon_factor"},
    "output": {"directory", "snapshot_times", "formats"},
}


def _parse_scalar(section, key, raw, conv, check=None, describe=""):
    try:
        value = conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw}: {exc}") from None
    if check is not None and not check(value):
        raise ConfigError(f"[{section}] {key} = {raw}: {describe}")
    return value


def _parse_floats(section, key, raw, count=None):
    parts = raw.replace(",", " ").split()
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw}: expected numbers") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"[{section}] {key} = {raw}: expected {count} numbers")
    return values


def load_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration document.

    Unknown sections or keys, malformed values, and out-of-range parameters
    are each rejected with a diagnostic naming the offending [section] key.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str   # keys are case-sensitive (N vs n)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"[{section}]: unknown section")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    cfg = default_config()

    # [mesh]
    mesh = cfg.mesh
    if parser.has_section("mesh"):
        nx = _parse_scalar("mesh", "nx", get("mesh", "nx", str(mesh.nx)), int,
                           lambda v: v >= 1, "cell count must be >= 1")
        ny = _parse_scalar("mesh", "ny", get("mesh", "ny", str(mesh.ny)), int,
                           lambda v: v >= 1, "cell count must be >= 1")
        bounds = mesh.bounds
        if parser.has_option("mesh", "bounds"):
            bounds = _parse_floats("mesh", "bounds", get("mesh", "bounds"), 4)
            if not (bounds[1] > bounds[0] and bounds[3] > bounds[2]):
                raise ConfigError(f"[mesh] bounds = {bounds}: degenerate rectangle")
        mesh = MeshSpec(nx=nx, ny=ny, bounds=bounds)

    # [time]
    time = cfg.time
    if parser.has_section("time"):
        N = _parse_scalar("time", "N", get("time", "N", str(time.N)), int,
                          lambda v: v >= 1, "step count must be >= 1")
        gamma = _parse_scalar("time", "gamma", get("time", "gamma", str(time.gamma)),
                              float, lambda v: v >= 1.0, "grading must be >= 1")
        T = _parse_scalar("time", "T", get("time", "T", str(time.T)), float,
                          lambda v: v > 0.0, "final time must be > 0")
        time = TimeSpec(N=N, gamma=gamma, T=T)

    # [physics]
    phys = cfg.physics
    if parser.has_section("physics"):
        D = _parse_scalar("physics", "D", get("physics", "D", str(phys.D)), float,
                          lambda v: v >= 0.0, "diffusion coefficient must be >= 0")
        r = _parse_scalar("physics", "r", get("physics", "r", str(phys.r)), float,
                          lambda v: v >= 0.0, "growth rate must be >= 0")
        alpha = _parse_scalar("physics", "alpha", get("physics", "alpha", str(phys.alpha)),
                              float, lambda v: 0.0 < v <= 1.0,
                              "fractional order must be in (0, 1]")
        model = get("physics", "model", phys.model).strip().lower()
        bc = get("physics", "bc", phys.bc).strip().lower()
        bc_value = _parse_scalar("physics", "bc_value",
                                 get("physics", "bc_value", str(phys.bc_value)), float)
        mode = get("physics", "reaction_mode", phys.reaction_mode).strip().lower()
        try:
            phys = ModelParams(D=D, r=r, alpha=alpha, model=model, bc=bc,
                               bc_value=bc_value, reaction_mode=mode)
        except ValueError as exc:
            raise ConfigError(f"[physics]: {exc}") from None

    # [ic]
    ic = cfg.ic
    epsilon_factor = cfg.epsilon_factor
    if parser.has_section("ic"):
        ic_type = get("ic", "type", ic.type).strip().lower()
        center = ic.center
        if parser.has_option("ic", "center"):
            center = _parse_floats("ic", "center", get("ic", "center"), 2)
        radius = _parse_scalar("ic", "radius", get("ic", "radius", str(ic.radius)),
                               float, lambda v: v > 0.0, "radius must be > 0")
        centers = ic.centers
        if parser.has_option("ic", "centers"):
            flat = _parse_floats("ic", "centers", get("ic", "centers"))
            if len(flat) % 2 != 0 or not flat:
                raise ConfigError("[ic] centers: expected pairs of coordinates")
            centers = tuple((flat[i], flat[i + 1]) for i in range(0, len(flat), 2))
        path = get("ic", "path", ic.path)
        if parser.has_option("ic", "epsilon_factor"):
            epsilon_factor = _parse_scalar(
                "ic", "epsilon_factor", get("ic", "epsilon_factor"), float,
                lambda v: v > 0.0, "interface width factor must be > 0")
        ic = IcSpec(type=ic_type, center=center, radius=radius,
                    centers=centers, path=path)
        if ic.type not in ("circle", "four_circles", "blob", "from_file"):
            raise ConfigError(f"[ic] type: unknown initial condition {ic.type!r}")

    # [output]
    output = cfg.output
    if parser.has_section("output"):
        directory = get("output", "directory", output.directory)
        snapshot_times = output.snapshot_times
        if parser.has_option("output", "snapshot_times"):
            snapshot_times = _parse_floats("output", "snapshot_times",
                                           get("output", "snapshot_times"))
        formats = output.formats
        if parser.has_option("output", "formats"):
            formats = tuple(f.strip().lower() for f in
                            get("output", "formats").replace(",", " ").split())
            for f in formats:
                if f not in ("vtk", "csv_grid"):
                    raise ConfigError(f"[output] formats: unknown format {f!r}")
        output = OutputSpec(directory=directory, snapshot_times=snapshot_times,
                            formats=formats)

    config = RunConfig(mesh=mesh, time=time, physics=phys, ic=ic,
                       epsilon_factor=epsilon_factor, output=output)

    for t in config.snapshot_times():
        if not 0.0 <= t <= config.time.T:
            raise ConfigError(f"[output] snapshot_times: {t} outside [0, {config.time.T}]")
    return config


def load_config_file(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def dumps_config(config: RunConfig) -> str:
    """Serialize a config so that load_config round-trips it exactly."""
    ic_lines = [f"type = {config.ic.type}",
                f"center = {_fmt(config.ic.center)}",
                f"radius = {_fmt(config.ic.radius)}",
                f"centers = {_fmt(tuple(c for pair in config.ic.centers for c in pair))}"]
    if config.ic.path:
        ic_lines.append(f"path = {config.ic.path}")
    ic_lines.append(f"epsilon_factor = {_fmt(config.epsilon_factor)}")

    out_lines = [f"directory = {config.output.directory}"]
    if config.output.snapshot_times is not None:
        out_lines.append(f"snapshot_times = {_fmt(config.output.snapshot_times)}")
    out_lines.append(f"formats = {_fmt(config.output.formats)}")

    p = config.physics
    blocks = [
        ("mesh", [f"nx = {config.mesh.nx}", f"ny = {config.mesh.ny}",
                  f"bounds = {_fmt(config.mesh.bounds)}"]),
        ("time", [f"N = {config.time.N}", f"gamma = {_fmt(config.time.gamma)}",
                  f"T = {_fmt(config.time.T)}"]),
        ("physics", [f"D = {_fmt(p.D)}", f"r = {_fmt(p.r)}", f"alpha = {_fmt(p.alpha)}",
                     f"model = {p.model}", f"bc = {p.bc}",
                     f"bc_value = {_fmt(p.bc_value)}",
                     f"reaction_mode = {p.reaction_mode}"]),
        ("ic", ic_lines),
        ("output", out_lines),
    ]
    buf = io.StringIO()
    for name, lines in blocks:
        buf.write(f"[{name}]\n")
        for line in lines:
            buf.write(line + "\n")
        buf.write("\n")
    return buf.getvalue()
