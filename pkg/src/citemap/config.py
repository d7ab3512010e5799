"""Run configuration: one declarative JSON file, flag overrides on top.

Defaults: resolution 1e-4, cumulative-share cutoff 0.7, top-10 source
groups, pruning minimum 2.
Secrets (API tokens) come only from environment variables named here.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .ingest import MEMBERSHIP_SCHEMES

DEFAULT_GAMMA = 1e-4
DEFAULT_TARGET_SHARE = 0.7
DEFAULT_TOP_K = 10
DEFAULT_PRUNE_MIN = 2


def _default_gamma_grid() -> list[float]:
    # Half-decade steps over five decades around the default resolution.
    return [10 ** (e / 2.0) for e in range(-12, -1)]


@dataclass
class ServiceSettings:
    """Settings for one upstream service (see enrich.ServiceConfig)."""

    base_url: str
    token_env: str | None = None
    batch_size: int = 50
    max_in_flight: int = 1
    rate_limit: int | None = None
    rate_window: float = 1.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_jitter: float = 0.1
    timeout: float = 10.0


@dataclass
class RunConfig:
    # Input paths
    citations: str | None = None
    memberships: dict[str, str] = field(default_factory=dict)  # scheme -> path
    works: str | None = None
    universe_pages: str | None = None
    universe_works: str | None = None
    # Output / cache
    output_dir: str = "out"
    cache_dir: str = "cache"
    # Parameters
    gamma: float = DEFAULT_GAMMA
    gamma_grid: list[float] = field(default_factory=_default_gamma_grid)
    objective: str = "cpm"
    unweighted: bool = False  # ablation: ignore edge weights when clustering
    seed: int = 0
    max_iterations: int = 100
    target_share: float = DEFAULT_TARGET_SHARE
    prune_min_citations: int = DEFAULT_PRUNE_MIN
    prune_min_outcitations: int = DEFAULT_PRUNE_MIN
    prune_count: str = "distinct"  # or "raw": sensitivity mode for sources
    top_k: int = DEFAULT_TOP_K
    year_from: int = 2000
    year_to: int = 2020
    share_below_ks: list[int] = field(default_factory=lambda: [10, 100, 1000])
    warn_degree: int = 10_000
    max_degree: int | None = None
    threads: int = 1
    resume: bool = False
    # Upstream services (optional; enrich is skipped without them)
    topics_service: ServiceSettings | None = None
    works_service: ServiceSettings | None = None

    def validate(self) -> None:
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if not 0.0 < self.target_share <= 1.0:
            raise ConfigError(f"target_share must be in (0, 1], got {self.target_share}")
        if self.objective not in ("cpm", "rb_modularity"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.prune_count not in ("distinct", "raw"):
            raise ConfigError(f"prune_count must be distinct or raw")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for scheme in self.memberships:
            if scheme not in MEMBERSHIP_SCHEMES:
                raise ConfigError(
                    f"unknown membership scheme {scheme!r}; expected {MEMBERSHIP_SCHEMES}"
                )

    def as_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | None) -> RunConfig:
    """Load the JSON config file; missing fields keep their defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    for service_key in ("topics_service", "works_service"):
        if raw.get(service_key) is not None:
            try:
                raw[service_key] = ServiceSettings(**raw[service_key])
            except TypeError as exc:
                raise ConfigError(f"bad {service_key}: {exc}")
    config = RunConfig(**raw)
    config.validate()
    return config
