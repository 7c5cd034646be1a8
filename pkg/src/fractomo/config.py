"""Experiment configuration: a flat INI file with sections.

Grammar (all keys optional unless marked; values shown with defaults):

.. code-block:: ini

    [problem]
    n = 1                      ; dimension, 1 or 2
    s = 0.25                   ; fractional order, 0 < s < min(1, n/2)
    c_ns =                     ; kernel constant override (default: standard)

    [mesh]
    h = 0.03125                ; required: grid spacing
    margin =                   ; box margin beyond the hull of all regions
                               ; (default: 2 x diameter of Omega)
    box =                      ; explicit box "lo, hi" (1D) or
                               ; "lo1, lo2, hi1, hi2" (2D); overrides margin

    [regions]                  ; name = lo, hi  (1D)  /  lo1, lo2, hi1, hi2 (2D)
    Omega = -1.0, 1.0          ; required for solves
    W1 = 1.2, 1.8
    W2 = 1.2, 1.8

    [coefficients]
    gamma = constant:1         ; preset, see fractomo.profiles.evaluate_preset
    q = constant:0
    gamma_exterior = 1.0       ; diffusion value on the box complement

    [solver]
    tolerance = 1e-10
    method = auto              ; auto | direct | cg

    [quadrature]
    order_singular = 6
    order_regular = 4
    check = false              ; run the panel self check

    [data]
    f = bump:0,1,1.5,0.25      ; exterior datum preset (zeroed on interior)
    g =                        ; second datum (defaults to f)
    far_field = 0.0            ; constant value on the box complement
    source = constant:0        ; interior source density

    [reconstruct]
    W = W1                     ; measurement region label
    x0 = 1.5                   ; concentration point (required by `reconstruct`)
    scales =                   ; comma list of N values (default: geometric)
    p = inf                    ; integrability exponent of the absorption
    gamma_true =               ; known value at x0, for the error column

    [counterexample]
    Omega_prime = -0.5, 0.5    ; interval of the inner construction set
    omega = 2.1, 2.4           ; interval of the cutoff seed set
    W = W1                     ; measurement region label
    eps = 0.05
    scale = 1.0                ; extra deviation scale in (0, 1]

    [oracle]
    s_list = 0.1, 0.25, 0.4    ; orders for `oracle-compare`
    u = gaussian:0,1,0,1       ; test function preset
    pad_factor = 16

    [convergence]
    levels = 3                 ; refinement levels h, h/2, ...

    [output]
    directory = out            ; overridable by --out or FRACTOMO_OUT
    seed = 0
    threads = 1

Only the output directory may come from the environment
(``FRACTOMO_OUT``); everything else lives in the file.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import Coefficients, KernelParams
from .errors import ConfigError, FractomoError
from .mesh import Box, Mesh, Region, build_mesh
from .profiles import evaluate_preset


def _floats(text: str, where: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{where}: expected comma-separated numbers, got {text!r}")


@dataclass
class ExperimentConfig:
    """Validated experiment configuration (see module docstring)."""

    n: int = 1
    s: float = 0.25
    c_ns: float = None
    h: float = None
    margin: float = None
    box: tuple = None
    regions: dict = field(default_factory=dict)
    gamma_spec: str = "constant:1"
    q_spec: str = "constant:0"
    gamma_exterior: float = 1.0
    solver_tolerance: float = 1e-10
    solver_method: str = "auto"
    order_singular: int = 6
    order_regular: int = 4
    quadrature_check: bool = False
    f_spec: str = None
    g_spec: str = None
    far_field: float = 0.0
    source_spec: str = "constant:0"
    reconstruct_W: str = "W1"
    x0: float = None
    scales: list = None
    p_exponent: float = math.inf
    gamma_true: float = None
    ce_omega_prime: tuple = None
    ce_omega: tuple = None
    ce_W: str = "W1"
    ce_eps: float = 0.05
    ce_scale: float = 1.0
    oracle_s_list: list = field(default_factory=lambda: [0.1, 0.25, 0.4])
    oracle_u_spec: str = "gaussian:0,1,0,1"
    pad_factor: int = 16
    levels: int = 3
    outdir: str = "out"
    seed: int = 0
    threads: int = 1

    # ------------------------------------------------------------------
    def params(self) -> KernelParams:
        try:
            return KernelParams(self.n, self.s, self.c_ns)
        except ValueError as exc:
            raise ConfigError(f"[problem]: {exc}") from None

    def region_objects(self) -> list:
        out = []
        for name, (lo, hi) in self.regions.items():
            try:
                out.append(Region(name, lo, hi))
            except ValueError as exc:
                raise ConfigError(f"[regions] {name}: {exc}") from None
        return out

    def resolved_box(self) -> Box:
        if self.box is not None:
            lo, hi = self.box
            return Box(lo, hi)
        if not self.regions:
            raise ConfigError("[mesh]: need an explicit box or regions to hull")
        lows = np.min([r[0] for r in self.regions.values()], axis=0)
        highs = np.max([r[1] for r in self.regions.values()], axis=0)
        margin = self.margin
        if margin is None:
            if "Omega" not in self.regions:
                raise ConfigError(
                    "[mesh]: default margin needs a region named Omega"
                )
            olo, ohi = self.regions["Omega"]
            margin = 2.0 * float(np.max(np.asarray(ohi) - np.asarray(olo)))
        lo = np.asarray(lows) - margin
        # snap the upper bound outward so h divides the box exactly
        cells = np.ceil((np.asarray(highs) + margin - lo) / self.h - 1e-12)
        hi = lo + cells * self.h
        return Box(tuple(lo), tuple(hi))

    def build_mesh(self) -> Mesh:
        if self.h is None:
            raise ConfigError("[mesh]: key 'h' is required")
        return build_mesh(self.resolved_box(), self.h, self.region_objects())

    def coefficients(self, mesh: Mesh) -> Coefficients:
        if mesh.n == 1:
            x = mesh.coords
            gamma = evaluate_preset(self.gamma_spec, x)
            q = evaluate_preset(self.q_spec, x)
        else:
            # only spatially constant presets make sense on 2D meshes
            for spec, key in ((self.gamma_spec, "gamma"), (self.q_spec, "q")):
                if not spec.strip().lower().startswith("constant"):
                    raise ConfigError(
                        f"[coefficients] {key}: only constant presets are "
                        "supported on 2D meshes"
                    )
            gamma = evaluate_preset(self.gamma_spec, mesh.nodes[:, 0] * 0.0)
            q = evaluate_preset(self.q_spec, mesh.nodes[:, 0] * 0.0)
        if gamma.min() <= 0:
            raise ConfigError(
                f"[coefficients] gamma: preset dips to {gamma.min()} <= 0"
            )
        return Coefficients.from_arrays(
            gamma, q, gamma_exterior=self.gamma_exterior
        )

    def nodal(self, mesh: Mesh, spec: str, where: str) -> np.ndarray:
        if spec is None:
            raise ConfigError(f"{where}: preset is required")
        return evaluate_preset(spec, mesh.coords)


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a configuration file.

    Raises
    ------
    ConfigError
        With the section/key that failed.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    cfg = ExperimentConfig()

    def get(section, key, cast, default, where=None):
        where = where or f"[{section}] {key}"
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key).strip()
        if raw == "":
            return default
        try:
            return cast(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{where}: {exc}") from None

    cfg.n = get("problem", "n", int, cfg.n)
    if cfg.n not in (1, 2):
        raise ConfigError("[problem] n: must be 1 or 2")
    cfg.s = get("problem", "s", float, cfg.s)
    cfg.c_ns = get("problem", "c_ns", float, None)
    cfg.h = get("mesh", "h", float, None)
    cfg.margin = get("mesh", "margin", float, None)
    box_vals = get("mesh", "box", lambda t: _floats(t, "[mesh] box"), None)
    if box_vals is not None:
        if len(box_vals) != 2 * cfg.n:
            raise ConfigError(f"[mesh] box: expected {2*cfg.n} numbers")
        cfg.box = (tuple(box_vals[: cfg.n]), tuple(box_vals[cfg.n:]))
    if parser.has_section("regions"):
        for name, raw in parser.items("regions"):
            vals = _floats(raw, f"[regions] {name}")
            if len(vals) != 2 * cfg.n:
                raise ConfigError(
                    f"[regions] {name}: expected {2*cfg.n} numbers, got {len(vals)}"
                )
            lo, hi = tuple(vals[: cfg.n]), tuple(vals[cfg.n:])
            if not all(a < b for a, b in zip(lo, hi)):
                raise ConfigError(f"[regions] {name}: lower bound must be below upper")
            # configparser lowercases keys; restore conventional names
            canonical = {"omega": "Omega", "w1": "W1", "w2": "W2",
                         "omega_prime": "Omega_prime"}.get(name, name)
            cfg.regions[canonical] = (lo, hi)
    cfg.gamma_spec = get("coefficients", "gamma", str, cfg.gamma_spec)
    cfg.q_spec = get("coefficients", "q", str, cfg.q_spec)
    cfg.gamma_exterior = get("coefficients", "gamma_exterior", float,
                             cfg.gamma_exterior)
    cfg.solver_tolerance = get("solver", "tolerance", float, cfg.solver_tolerance)
    cfg.solver_method = get("solver", "method", str, cfg.solver_method)
    if cfg.solver_method not in ("auto", "direct", "cg"):
        raise ConfigError("[solver] method: must be auto, direct or cg")
    cfg.order_singular = get("quadrature", "order_singular", int, cfg.order_singular)
    cfg.order_regular = get("quadrature", "order_regular", int, cfg.order_regular)
    cfg.quadrature_check = get("quadrature", "check",
                               lambda t: t.lower() in ("1", "true", "yes"),
                               cfg.quadrature_check)
    cfg.f_spec = get("data", "f", str, None)
    cfg.g_spec = get("data", "g", str, None)
    cfg.far_field = get("data", "far_field", float, cfg.far_field)
    cfg.source_spec = get("data", "source", str, cfg.source_spec)
    cfg.reconstruct_W = get("reconstruct", "w", str, cfg.reconstruct_W)
    cfg.x0 = get("reconstruct", "x0", float, None)
    cfg.scales = get("reconstruct", "scales",
                     lambda t: [int(float(v)) for v in t.split(",")], None)
    cfg.p_exponent = get("reconstruct", "p",
                         lambda t: math.inf if t.lower() in ("inf", "infinity")
                         else float(t), cfg.p_exponent)
    cfg.gamma_true = get("reconstruct", "gamma_true", float, None)
    op = get("counterexample", "omega_prime",
             lambda t: _floats(t, "[counterexample] omega_prime"), None)
    if op is not None:
        cfg.ce_omega_prime = (tuple(op[: cfg.n]), tuple(op[cfg.n:]))
    om = get("counterexample", "omega",
             lambda t: _floats(t, "[counterexample] omega"), None)
    if om is not None:
        cfg.ce_omega = (tuple(om[: cfg.n]), tuple(om[cfg.n:]))
    cfg.ce_W = get("counterexample", "w", str, cfg.ce_W)
    cfg.ce_eps = get("counterexample", "eps", float, cfg.ce_eps)
    cfg.ce_scale = get("counterexample", "scale", float, cfg.ce_scale)
    cfg.oracle_s_list = get("oracle", "s_list",
                            lambda t: _floats(t, "[oracle] s_list"),
                            cfg.oracle_s_list)
    cfg.oracle_u_spec = get("oracle", "u", str, cfg.oracle_u_spec)
    cfg.pad_factor = get("oracle", "pad_factor", int, cfg.pad_factor)
    cfg.levels = get("convergence", "levels", int, cfg.levels)
    cfg.outdir = get("output", "directory", str, cfg.outdir)
    cfg.seed = get("output", "seed", int, cfg.seed)
    cfg.threads = get("output", "threads", int, cfg.threads)

    # cheap global validations before any solve starts
    cfg.params()
    if cfg.h is not None and cfg.h <= 0:
        raise ConfigError("[mesh] h: must be positive")
    try:
        if cfg.h is not None and (cfg.regions or cfg.box):
            cfg.build_mesh()
    except FractomoError as exc:
        raise ConfigError(f"mesh validation failed: {exc}") from None
    return cfg
