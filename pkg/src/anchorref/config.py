"""Run configuration: one flat key/value document, `section.key = value`.

Lines starting with `#` are comments. CLI `--set key=value` overrides win
over the file, which wins over the built-in defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .association import AssociationConfig
from .core import ConfigError
from .gate import GateParams


@dataclass(frozen=True)
class RunConfig:
    # anchor bank / alignment
    anchor_k: int = 64
    anchor_t0: int = 60
    anchor_static_threshold: float = 1e-3
    anchor_min_region_px: int = 16
    anchor_tau: float = 10.0
    # alignment heads
    heads_seed: int = 0
    heads_dim: int = 0  # 0 = automatic
    heads_path: str = ""
    # association
    assoc_eta: float = 0.05
    assoc_lambda: float = 0.6
    assoc_theta: float = 0.4
    assoc_clamp_cosine: bool = True
    assoc_refiner: str = "cosine"
    assoc_refiner_top_n: int = 5
    assoc_refiner_floor: float = 0.0
    # re-entry prior
    prior_beta: float = 0.8
    prior_sigma: float = 4.0
    prior_rho: float = 0.7
    # identity gate
    gate_alpha1: float = 2.0
    gate_alpha2: float = 1.0
    gate_alpha3: float = 1.0
    gate_bias: float = -2.0
    gate_gamma: float = 0.5
    gate_mu: float = 0.9
    gate_q_max: int = 8
    gate_novelty_floor: float = 0.5
    # pipeline toggles (ablation axes)
    use_anchor_map: bool = True
    use_reid_gate: bool = True
    use_reentry_prior: bool = True
    # metrics
    metrics_tau: float = 0.5

    def validate(self) -> None:
        checks = [
            (self.anchor_k >= 1, "anchor.k must be >= 1"),
            (self.anchor_t0 >= 2, "anchor.t0 must be >= 2"),
            (self.anchor_tau > 0, "anchor.tau must be > 0"),
            (0.0 <= self.assoc_eta <= 1.0, "assoc.eta must be in [0,1]"),
            (0.0 <= self.assoc_lambda <= 1.0, "assoc.lambda must be in [0,1]"),
            (0.0 <= self.assoc_theta <= 1.0, "assoc.theta must be in [0,1]"),
            (0.0 <= self.prior_beta <= 1.0, "prior.beta must be in [0,1]"),
            (self.prior_sigma >= 0.0, "prior.sigma must be >= 0"),
            (0.0 <= self.prior_rho <= 1.0, "prior.rho must be in [0,1]"),
            (0.0 <= self.gate_gamma <= 1.0, "gate.gamma must be in [0,1]"),
            (0.0 <= self.gate_mu <= 1.0, "gate.mu must be in [0,1]"),
            (self.gate_q_max >= 1, "gate.q_max must be >= 1"),
            (min(self.gate_alpha1, self.gate_alpha2, self.gate_alpha3) >= 0, "gate.alpha* must be >= 0"),
            (self.assoc_refiner in ("cosine", "trace"), "assoc.refiner must be cosine|trace"),
            (0.0 <= self.metrics_tau <= 1.0, "metrics.tau must be in [0,1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def association(self) -> AssociationConfig:
        return AssociationConfig(
            eta=self.assoc_eta,
            lam=self.assoc_lambda,
            theta=self.assoc_theta,
            refiner=self.assoc_refiner,
            refiner_top_n=self.assoc_refiner_top_n,
            refiner_floor=self.assoc_refiner_floor,
            clamp_cosine=self.assoc_clamp_cosine,
        )

    def gate_params(self) -> GateParams:
        return GateParams(
            alpha1=self.gate_alpha1,
            alpha2=self.gate_alpha2,
            alpha3=self.gate_alpha3,
            bias=self.gate_bias,
            gamma=self.gate_gamma,
        )


# flat config keys <-> dataclass fields
_KEYMAP = {
    "anchor.k": "anchor_k",
    "anchor.t0": "anchor_t0",
    "anchor.static_threshold": "anchor_static_threshold",
    "anchor.min_region_px": "anchor_min_region_px",
    "anchor.tau": "anchor_tau",
    "heads.seed": "heads_seed",
    "heads.dim": "heads_dim",
    "heads.path": "heads_path",
    "assoc.eta": "assoc_eta",
    "assoc.lambda": "assoc_lambda",
    "assoc.theta": "assoc_theta",
    "assoc.clamp_cosine": "assoc_clamp_cosine",
    "assoc.refiner": "assoc_refiner",
    "assoc.refiner_top_n": "assoc_refiner_top_n",
    "assoc.refiner_floor": "assoc_refiner_floor",
    "prior.beta": "prior_beta",
    "prior.sigma": "prior_sigma",
    "prior.rho": "prior_rho",
    "gate.alpha1": "gate_alpha1",
    "gate.alpha2": "gate_alpha2",
    "gate.alpha3": "gate_alpha3",
    "gate.bias": "gate_bias",
    "gate.gamma": "gate_gamma",
    "gate.mu": "gate_mu",
    "gate.q_max": "gate_q_max",
    "gate.novelty_floor": "gate_novelty_floor",
    "pipeline.use_anchor_map": "use_anchor_map",
    "pipeline.use_reid_gate": "use_reid_gate",
    "pipeline.use_reentry_prior": "use_reentry_prior",
    "metrics.tau": "metrics_tau",
}

_COMMENTS = {
    "anchor.k": "max anchors kept from the static-region ranking",
    "anchor.t0": "warmup frames used to distill the bank",
    "anchor.static_threshold": "per-pixel temporal feature variance below which a pixel is static",
    "anchor.tau": "softmax temperature for query-to-anchor weights",
    "assoc.eta": "min mean map response over a proposal box to keep it",
    "assoc.lambda": "fusion mix: text-visual cosine vs anchor evidence",
    "assoc.theta": "min fusion score to leave search mode",
    "assoc.clamp_cosine": "treat negative text-visual similarity as zero evidence",
    "prior.beta": "temporal smoothing of the re-entry prior",
    "prior.sigma": "gaussian radius (px) for prior diffusion and redirection",
    "prior.rho": "mass fraction moved onto the confirmed anchor on redirect",
    "gate.gamma": "accept threshold on the logistic gate score",
    "gate.mu": "momentum for identity queue updates",
    "gate.q_max": "identity queue capacity",
    "gate.novelty_floor": "below this similarity a new queue entry is appended",
}

def _parse_value(key: str, raw: str):
    attr = _KEYMAP[key]
    default = getattr(RunConfig(), attr)
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError as e:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from e
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError as e:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from e
    return raw


def apply_overrides(cfg: RunConfig, pairs: dict[str, str]) -> RunConfig:
    updates = {}
    for key, raw in pairs.items():
        if key not in _KEYMAP:
            raise ConfigError(f"unknown config key: {key}")
        updates[_KEYMAP[key]] = _parse_value(key, raw)
    out = replace(cfg, **updates)
    out.validate()
    return out


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        file_pairs = {}
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            file_pairs[key.strip()] = raw.strip()
        cfg = apply_overrides(cfg, file_pairs)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def default_config_text() -> str:
    """Default config document with every key present."""
    lines = ["# anchorref run configuration", ""]
    cfg = RunConfig()
    for key, attr in _KEYMAP.items():
        value = getattr(cfg, attr)
        if isinstance(value, bool):
            value = "true" if value else "false"
        comment = _COMMENTS.get(key)
        if comment:
            lines.append(f"# {comment}")
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
