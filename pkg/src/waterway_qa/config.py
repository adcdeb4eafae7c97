"""System configuration: TOML file, environment overrides, backend wiring.

One TOML file declares the six (plus optional judge) backend profiles and the
pipeline knobs. ``WATERWAY_QA_<ROLE>_ENDPOINT`` environment variables override
endpoints at load time (credentials travel separately, see the HTTP backend).
``load_config(render_config(c))`` reproduces ``c`` exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import toml

from .backends import (
    AgentBackends,
    Backend,
    BackendProfile,
    HttpBackend,
    MockBackend,
    MockScript,
    Role,
)
from .errors import ConfigError
from .frames import DEFAULT_TARGET_K
from .knowledge import DEFAULT_DELTA_K, DEFAULT_TOP_K
from .routing import RoutePath

_ROLE_KEYS = [role.value for role in Role]
JUDGE_KEY = "judge"


@dataclass(frozen=True)
class BackendSettings:
    endpoint: str = "http://127.0.0.1:8000/v1"
    model_id: str = "default"
    timeout_s: float = 30.0
    max_retries: int = 2
    max_parallel: int = 4

    def profile(self, role: Role) -> BackendProfile:
        return BackendProfile(
            role=role,
            endpoint=self.endpoint,
            model_id=self.model_id,
            timeout_s=self.timeout_s,
            max_retries=self.max_retries,
            max_parallel=self.max_parallel,
        )

    def to_dict(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model_id": self.model_id,
            "timeout_s": self.timeout_s,
            "max_retries": self.max_retries,
            "max_parallel": self.max_parallel,
        }


@dataclass(frozen=True)
class SystemConfig:
    backends: dict = field(default_factory=dict)  # role key -> BackendSettings
    ats_target_k: int = DEFAULT_TARGET_K
    rag_top_k: int = DEFAULT_TOP_K
    rag_delta_k: int = DEFAULT_DELTA_K
    verification_threshold: float = 0.7
    verification_max_retries: int = 2
    verification_enabled_paths: tuple[str, ...] = (RoutePath.COMPLEX_REASONING.value,)
    kb_path: str | None = None
    corpus_dir: str | None = None
    dataset_path: str | None = None
    service_host: str = "127.0.0.1"
    service_port: int = 8808
    trace_path: str = "traces/sessions.jsonl"
    trace_full: bool = False

    def __post_init__(self):
        if not 0.0 < self.verification_threshold <= 1.0:
            raise ConfigError("verification.threshold must be in (0, 1]")
        known = {p.value for p in RoutePath}
        for path in self.verification_enabled_paths:
            if path not in known:
                raise ConfigError(
                    f"verification.enabled_paths: unknown path {path!r}; allowed: {sorted(known)}"
                )
        for key in self.backends:
            if key not in _ROLE_KEYS + [JUDGE_KEY]:
                raise ConfigError(f"[backends.{key}]: unknown role")
        object.__setattr__(self, "verification_enabled_paths",
                           tuple(self.verification_enabled_paths))

    def backend_settings(self, key: str) -> BackendSettings:
        return self.backends.get(key, BackendSettings())

    @property
    def verified_paths(self) -> frozenset[RoutePath]:
        return frozenset(RoutePath(p) for p in self.verification_enabled_paths)

    def to_dict(self) -> dict:
        out: dict = {
            "ats": {"target_k": self.ats_target_k},
            "rag": {"top_k": self.rag_top_k, "delta_k": self.rag_delta_k},
            "verification": {
                "threshold": self.verification_threshold,
                "max_retries": self.verification_max_retries,
                "enabled_paths": list(self.verification_enabled_paths),
            },
            "service": {"host": self.service_host, "port": self.service_port},
            "trace": {"path": self.trace_path, "full": self.trace_full},
        }
        kb: dict = {}
        if self.kb_path is not None:
            kb["path"] = self.kb_path
        if self.corpus_dir is not None:
            kb["corpus_dir"] = self.corpus_dir
        if kb:
            out["kb"] = kb
        if self.dataset_path is not None:
            out["dataset"] = {"path": self.dataset_path}
        if self.backends:
            out["backends"] = {key: s.to_dict() for key, s in sorted(self.backends.items())}
        return out


def _settings_from(raw: dict, where: str) -> BackendSettings:
    allowed = {"endpoint", "model_id", "timeout_s", "max_retries", "max_parallel"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    return BackendSettings(**raw)


def config_from_dict(raw: dict) -> SystemConfig:
    backends = {
        key: _settings_from(settings, f"[backends.{key}]")
        for key, settings in raw.get("backends", {}).items()
    }
    verification = raw.get("verification", {})
    kb = raw.get("kb", {})
    return SystemConfig(
        backends=backends,
        ats_target_k=raw.get("ats", {}).get("target_k", DEFAULT_TARGET_K),
        rag_top_k=raw.get("rag", {}).get("top_k", DEFAULT_TOP_K),
        rag_delta_k=raw.get("rag", {}).get("delta_k", DEFAULT_DELTA_K),
        verification_threshold=verification.get("threshold", 0.7),
        verification_max_retries=verification.get("max_retries", 2),
        verification_enabled_paths=tuple(
            verification.get("enabled_paths", [RoutePath.COMPLEX_REASONING.value])
        ),
        kb_path=kb.get("path"),
        corpus_dir=kb.get("corpus_dir"),
        dataset_path=raw.get("dataset", {}).get("path"),
        service_host=raw.get("service", {}).get("host", "127.0.0.1"),
        service_port=raw.get("service", {}).get("port", 8808),
        trace_path=raw.get("trace", {}).get("path", "traces/sessions.jsonl"),
        trace_full=raw.get("trace", {}).get("full", False),
    )


def _apply_env_overrides(config: SystemConfig) -> SystemConfig:
    backends = dict(config.backends)
    changed = False
    for key in _ROLE_KEYS + [JUDGE_KEY]:
        endpoint = os.environ.get(f"WATERWAY_QA_{key.upper()}_ENDPOINT")
        if endpoint:
            backends[key] = replace(config.backend_settings(key), endpoint=endpoint)
            changed = True
    return replace(config, backends=backends) if changed else config


def _resolve_paths(config: SystemConfig, base: Path) -> SystemConfig:
    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        path = Path(p)
        return str(path if path.is_absolute() else base / path)

    return replace(
        config,
        kb_path=resolve(config.kb_path),
        corpus_dir=resolve(config.corpus_dir),
        dataset_path=resolve(config.dataset_path),
        trace_path=resolve(config.trace_path),
    )


def load_config(path: str | Path, apply_env: bool = True) -> SystemConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = toml.load(p)
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"config {p} is not valid TOML: {exc}") from exc
    try:
        config = config_from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"config {p}: {exc}") from exc
    config = _resolve_paths(config, p.parent.resolve())
    if apply_env:
        config = _apply_env_overrides(config)
    return config


def render_config(config: SystemConfig) -> str:
    return toml.dumps(config.to_dict())


def build_backends(config: SystemConfig, mock_script: MockScript | None = None) -> AgentBackends:
    """Wire one backend per role; a mock script forces every role onto
    deterministic scripted mocks (zero network use)."""

    def build(key: str, role: Role) -> Backend:
        profile = config.backend_settings(key).profile(role)
        if mock_script is not None:
            return MockBackend(profile, mock_script, script_role=key)
        return HttpBackend(profile)

    judge = None
    if JUDGE_KEY in config.backends:
        judge = build(JUDGE_KEY, Role.GRADER)
    return AgentBackends(
        router=build("router", Role.ROUTER),
        captioner=build("captioner", Role.CAPTIONER),
        reasoner=build("reasoner", Role.REASONER),
        grader=build("grader", Role.GRADER),
        summarizer=build("summarizer", Role.SUMMARIZER),
        embedder=build("embedder", Role.EMBEDDER),
        judge=judge,
    )
