"""Run configuration: flat dotted-key text files, presets, CLI overrides.

The file format is one ``key=value`` pair per line with ``#`` comments.
Values from a named preset are applied first, then the file's own pairs,
then command-line overrides, so later layers win.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .full import FixpointConfig
from .grid import Grid
from .linalg import SolverConfig
from .materials import FApprox, ModelParams, Potential
from .state import SIMPLIFIED_KINDS, SchemeKind

PRESET_RANDOM = "random_uniform"
PRESET_SINE = "smooth_sine"
PRESET_EXP1 = "experiment1"
PRESET_EXP2 = "experiment2"
PRESET_NAMES = (PRESET_RANDOM, PRESET_SINE, PRESET_EXP1, PRESET_EXP2)

SIGMA_INIT_NAMES = ("zero", "b2_sqrt2_identity")


@dataclass
class RunConfig:
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    dt: float = 1e-4
    n_steps: int = 100
    scheme: SchemeKind = SchemeKind.SPLITTING_CHORIN
    model: ModelParams = field(default_factory=ModelParams)
    preset: str = PRESET_RANDOM
    phi0_mean: float = 0.4
    perturb_amplitude: float = 0.05
    seed: int = 0
    sigma_init: str = "b2_sqrt2_identity"
    energy_every: int = 1
    snapshot_every: int = 0
    out_dir: str = "out"
    solver: SolverConfig = field(default_factory=SolverConfig)
    fixpoint: FixpointConfig = field(default_factory=FixpointConfig)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.perturb_amplitude < 0.0:
            raise ValueError("perturb_amplitude must be nonnegative")
        if self.energy_every < 1:
            raise ValueError("energy_every must be at least 1")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be nonnegative")
        if self.preset not in PRESET_NAMES:
            raise ValueError(f"unknown init preset: {self.preset!r}")
        if self.sigma_init not in SIGMA_INIT_NAMES:
            raise ValueError(f"unknown sigma_init: {self.sigma_init!r}")

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.lx, self.ly)

    @property
    def is_simplified(self) -> bool:
        return self.scheme in SIMPLIFIED_KINDS


@dataclass
class EocConfig:
    """Time-refinement study configuration: decreasing ladder of dt values
    plus a finer reference dt, all commensurate with t_final."""
    base: RunConfig
    dt_ladder: tuple[float, ...]
    dt_ref: float
    t_final: float

    def __post_init__(self):
        if len(self.dt_ladder) < 2:
            raise ValueError("dt ladder needs at least two entries")
        if any(b >= a for a, b in zip(self.dt_ladder, self.dt_ladder[1:])):
            raise ValueError("dt ladder must be strictly decreasing")
        if not self.dt_ref < min(self.dt_ladder):
            raise ValueError("reference dt must be below every ladder entry")
        if self.base.preset != PRESET_SINE:
            raise ValueError("time-refinement runs use the smooth_sine preset")
        for dt in (*self.dt_ladder, self.dt_ref):
            steps = self.t_final / dt
            if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
                raise ValueError(
                    f"t_final={self.t_final} is not an integer multiple of dt={dt}")

    def steps_for(self, dt: float) -> int:
        return int(round(self.t_final / dt))


# ---------------------------------------------------------------------------
# key table
# ---------------------------------------------------------------------------

def _to_int(text: str) -> int:
    return int(text, 10)


def _to_float(text: str) -> float:
    return float(text)


def _to_str(text: str) -> str:
    return text


def _to_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _to_scheme(text: str) -> SchemeKind:
    try:
        return SchemeKind(text)
    except ValueError:
        names = ", ".join(k.value for k in SchemeKind)
        raise ValueError(f"unknown scheme {text!r}; choose one of: {names}") from None


_POTENTIAL_ALIASES = {
    "ginzburg_landau": Potential.GINZBURG_LANDAU,
    "ginzburg_landau_modified": Potential.GINZBURG_LANDAU_MODIFIED,
    "flory_huggins": Potential.FLORY_HUGGINS,
}

_FAPPROX_ALIASES = {
    "f1": FApprox.STABILIZED,
    "stabilized": FApprox.STABILIZED,
    "f2": FApprox.CONVEX_SPLIT,
    "convex_split": FApprox.CONVEX_SPLIT,
    "f3": FApprox.OD2,
    "od2": FApprox.OD2,
}


def _to_potential(text: str) -> Potential:
    try:
        return _POTENTIAL_ALIASES[text.lower()]
    except KeyError:
        raise ValueError(f"unknown potential {text!r}") from None


def _to_fapprox(text: str) -> FApprox:
    try:
        return _FAPPROX_ALIASES[text.lower()]
    except KeyError:
        raise ValueError(f"unknown potential linearization {text!r}") from None


def _to_float_list(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


# key -> (bucket, field name, converter)
_KEY_TABLE = {
    "grid.nx": ("run", "nx", _to_int),
    "grid.ny": ("run", "ny", _to_int),
    "grid.lx": ("run", "lx", _to_float),
    "grid.ly": ("run", "ly", _to_float),
    "dt": ("run", "dt", _to_float),
    "n_steps": ("run", "n_steps", _to_int),
    "scheme": ("run", "scheme", _to_scheme),
    "init.preset": ("run", "preset", _to_str),
    "init.phi0_mean": ("run", "phi0_mean", _to_float),
    "init.perturb_amplitude": ("run", "perturb_amplitude", _to_float),
    "init.seed": ("run", "seed", _to_int),
    "sigma_init": ("run", "sigma_init", _to_str),
    "output.energy_every": ("run", "energy_every", _to_int),
    "output.snapshot_every": ("run", "snapshot_every", _to_int),
    "output.out_dir": ("run", "out_dir", _to_str),
    "model.c0": ("model", "c0", _to_float),
    "model.mobility": ("model", "mobility", _to_float),
    "model.mobility_exponent": ("model", "mobility_exponent", _to_int),
    "model.tau_b0": ("model", "tau_b0", _to_float),
    "model.tau_s0": ("model", "tau_s0", _to_float),
    "model.ms0": ("model", "ms0", _to_float),
    "model.mb0": ("model", "mb0", _to_float),
    "model.mb1": ("model", "mb1", _to_float),
    "model.phi_star": ("model", "phi_star", _to_float),
    "model.eps_a1": ("model", "eps_a1", _to_float),
    "model.potential": ("model", "potential", _to_potential),
    "model.fapprox": ("model", "fapprox", _to_fapprox),
    "model.np_chain": ("model", "np_chain", _to_float),
    "model.ns_chain": ("model", "ns_chain", _to_float),
    "model.chi": ("model", "chi", _to_float),
    "model.phi_clamp_eps": ("model", "phi_clamp_eps", _to_float),
    "model.eta_floor": ("model", "eta_floor", _to_float),
    "solver.rtol": ("solver", "rtol", _to_float),
    "solver.atol": ("solver", "atol", _to_float),
    "solver.maxiter": ("solver", "maxiter", _to_int),
    "solver.restart": ("solver", "restart", _to_int),
    "solver.use_jacobi": ("solver", "use_jacobi", _to_bool),
    "fixpoint.delta": ("fixpoint", "delta", _to_float),
    "fixpoint.max_l": ("fixpoint", "max_l", _to_int),
    "eoc.dt_ladder": ("eoc", "dt_ladder", _to_float_list),
    "eoc.dt_ref": ("eoc", "dt_ref", _to_float),
    "eoc.t_final": ("eoc", "t_final", _to_float),
}


# preset layers, expressed in the same flat key space
_PRESETS: dict[str, dict[str, str]] = {
    PRESET_RANDOM: {},
    PRESET_SINE: {
        "init.perturb_amplitude": "0",
    },
    PRESET_EXP1: {
        "grid.nx": "128", "grid.ny": "128", "grid.lx": "1", "grid.ly": "1",
        "dt": "1e-4",
        "scheme": "splitting_chorin",
        "init.phi0_mean": "0.4", "init.perturb_amplitude": "0.05",
        "sigma_init": "b2_sqrt2_identity",
        "model.c0": "0.0016666666666666668",  # 1/600
        "model.chi": "3", "model.np_chain": "1", "model.ns_chain": "1",
        "model.potential": "flory_huggins", "model.fapprox": "od2",
        "model.mobility": "10", "model.tau_b0": "10", "model.tau_s0": "5",
        "model.ms0": "0.2", "model.mb0": "0.5", "model.mb1": "1",
        "model.phi_star": "0.4", "model.eps_a1": "0.01",
    },
    PRESET_EXP2: {
        "grid.nx": "128", "grid.ny": "128", "grid.lx": "128", "grid.ly": "128",
        "dt": "0.025",
        "scheme": "splitting_chorin",
        "init.phi0_mean": "0.4", "init.perturb_amplitude": "0.001",
        "sigma_init": "zero",
        "model.c0": "1",
        "model.chi": "2.545454545454545454545454",  # 28/11
        "model.np_chain": "1", "model.ns_chain": "1",
        "model.potential": "flory_huggins", "model.fapprox": "od2",
        "model.mobility": "10", "model.tau_b0": "10", "model.tau_s0": "5",
        "model.ms0": "0.2", "model.mb0": "0.5", "model.mb1": "1",
        "model.phi_star": "0.4", "model.eps_a1": "0.01",
    },
}


# ---------------------------------------------------------------------------
# parsing and building
# ---------------------------------------------------------------------------

def parse_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines; '#' starts a comment, blank lines are
    skipped. Unknown keys and malformed lines raise with line context."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEY_TABLE:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        pairs[key] = value
    return pairs


def load_pairs(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pairs(fh.read(), source=path)


def _convert_all(pairs: dict[str, str]) -> dict[str, dict]:
    buckets: dict[str, dict] = {"run": {}, "model": {}, "solver": {},
                                "fixpoint": {}, "eoc": {}}
    for key, value in pairs.items():
        bucket, name, conv = _KEY_TABLE[key]
        try:
            buckets[bucket][name] = conv(value)
        except ValueError as exc:
            raise ValueError(f"bad value for {key}: {exc}") from None
    return buckets


def build_run_config(pairs: dict[str, str],
                     overrides: dict[str, str] | None = None) -> RunConfig:
    """Merge preset < file pairs < overrides and build a validated config."""
    merged: dict[str, str] = {}
    preset = (overrides or {}).get("init.preset", pairs.get("init.preset",
                                                            PRESET_RANDOM))
    if preset not in _PRESETS:
        raise ValueError(f"unknown init preset: {preset!r}")
    merged.update(_PRESETS[preset])
    merged.update(pairs)
    if overrides:
        merged.update(overrides)
    merged["init.preset"] = preset

    buckets = _convert_all(merged)
    buckets["eoc"].clear()  # eoc keys are legal in shared files; ignored here
    model = ModelParams(**buckets["model"])
    solver = SolverConfig(**buckets["solver"])
    fixpoint = FixpointConfig(**buckets["fixpoint"])
    return RunConfig(model=model, solver=solver, fixpoint=fixpoint,
                     **buckets["run"])


def build_eoc_config(pairs: dict[str, str],
                     overrides: dict[str, str] | None = None) -> EocConfig:
    merged = dict(pairs)
    merged.setdefault("init.preset", PRESET_SINE)
    if overrides:
        merged.update(overrides)
    eoc_pairs = _convert_all(merged)["eoc"]
    missing = {"dt_ladder", "dt_ref", "t_final"} - set(eoc_pairs)
    if missing:
        raise ValueError(f"missing eoc keys: {', '.join(sorted(missing))}")
    run_pairs = {k: v for k, v in merged.items() if not k.startswith("eoc.")}
    base = build_run_config(run_pairs)
    return EocConfig(base=base, dt_ladder=tuple(eoc_pairs["dt_ladder"]),
                     dt_ref=eoc_pairs["dt_ref"], t_final=eoc_pairs["t_final"])
