"""Tunable constants shared by the increment engine, the transference pipeline and the CLI.

The underlying arguments leave their implied constants unnamed; every one the
code needs lives here with a documented default.  ``load_constants`` reads the
same fields from a TOML file whose tables mirror the dataclass names.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

try:  # Python >= 3.11
    import tomllib
except ImportError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import ValidationError


@dataclass(frozen=True)
class IncrementConstants:
    # chain nesting ratio rho = c_rho * eta**rho_exponent / d, halved until the main term certifies
    c_rho: float = 0.1
    rho_exponent: float = 0.0
    rho_min: float = 1e-4
    chain_budget: int = 20_000_000
    # Case 1 when T_B(1_A, ...) >= case1_fraction * alpha^t
    case1_fraction: float = 0.25
    # main term T_B(alpha 1_B, ...) must reach main_fraction * alpha^t
    main_fraction: float = 0.5
    # large twisted norm: value >= large_norm_fraction * eta^4
    large_norm_fraction: float = 0.5
    # untwisting: value >= kappa * eta^4
    kappa: float = 0.5
    # local inverse: E_{u + m B3} f >= c_inverse * eta^12
    c_inverse: float = 1.0
    # per-step growth alpha' >= (1 + c_increment alpha^(12t-1)) alpha
    c_increment: float = 1.0
    # radius loss delta' >= (alpha/d)^K_radius delta
    K_radius: float = 16.0
    # step cap K_steps * alpha_0^(-12t+1), and a hard cap on top
    K_steps: float = 1.0
    max_steps: int = 64
    # local inverse search
    top_frequencies: int = 8
    radius_factors: tuple[float, ...] = (1.0, 0.5, 0.25)
    translate_candidates: int = 64
    # Case 1 shape bound (alpha delta / d)^(case1_exponent * d) N^(t-r)
    case1_exponent: float = 4.0
    # exact oracle count only when the lattice walk fits this budget
    oracle_budget: int = 50_000_000


@dataclass(frozen=True)
class ExtensionConstants:
    # bad-box fraction <= bad_box_K * M^(-1/2)
    bad_box_K: float = 16.0
    # |linear-forms average - 1| budget reported for sieve weights
    linear_forms_budget: float = 0.25
    # systems with d, t, ||theta|| <= D are admissible in the pseudorandomness report
    D: int = 8


@dataclass(frozen=True)
class RegularityConstants:
    # regularity calculus residuals <= K * rho * d
    calculus_K: float = 512.0
    # grid used by find_regular_dilate before breakpoint midpoints
    dilate_grid: int = 64


@dataclass(frozen=True)
class SieveConstants:
    eta: float = 0.05
    L: int = 8
    dx: float = 2.0 / 4096
    xi_step: float = 0.1
    xi_max: float = 500.0
    samples: int = 200_000


@dataclass(frozen=True)
class Constants:
    increment: IncrementConstants = field(default_factory=IncrementConstants)
    extension: ExtensionConstants = field(default_factory=ExtensionConstants)
    regularity: RegularityConstants = field(default_factory=RegularityConstants)
    sieve: SieveConstants = field(default_factory=SieveConstants)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, table: dict[str, Any], where: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, val in table.items():
        if key not in names:
            raise ValidationError(f"unknown constant {where}.{key}")
        default = getattr(cls(), key)
        if isinstance(default, tuple):
            val = tuple(float(v) for v in val)
        elif isinstance(default, bool):
            val = bool(val)
        elif isinstance(default, int):
            if isinstance(val, float) and not val.is_integer():
                raise ValidationError(f"{where}.{key} must be an integer")
            val = int(val)
        elif isinstance(default, float):
            val = float(val)
        kw[key] = val
    return cls(**kw)


def constants_from_dict(data: dict[str, Any]) -> Constants:
    sections = {f.name: f.type for f in dataclasses.fields(Constants)}
    kw = {}
    for name, table in data.items():
        if name not in sections:
            raise ValidationError(f"unknown constants table [{name}]")
        if not isinstance(table, dict):
            raise ValidationError(f"[{name}] must be a table")
        cls = type(getattr(Constants(), name))
        kw[name] = _build(cls, table, name)
    return Constants(**kw)


def load_constants(path: Optional[Union[str, Path]] = None) -> Constants:
    """Defaults, overridden by the tables of a TOML file when one is given."""
    if path is None:
        return Constants()
    p = Path(path)
    try:
        with p.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read constants file {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"malformed constants file {p}: {exc}") from exc
    return constants_from_dict(data)
