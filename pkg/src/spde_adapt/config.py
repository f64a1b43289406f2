"""Flat key=value configuration files for the benchmark CLI.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Numeric values accept ``2^-12`` power notation alongside plain floats.
"""

from __future__ import annotations

from .harness import ExperimentConfig


def _parse_number(text: str) -> float:
    text = text.strip()
    if "^" in text:
        base, _, exponent = text.partition("^")
        return float(base) ** float(exponent)
    return float(text)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_list(text: str) -> list[str]:
    return [tok for tok in text.replace(",", " ").split() if tok]


_PARSERS = {
    "model": ("model", str.strip),
    "nx": ("nx", lambda s: int(s)),
    "j": ("j", lambda s: int(s)),
    "a": ("domain_length", _parse_number),
    "t_final": ("t_final", _parse_number),
    "dt_ref": ("dt_ref", _parse_number),
    "dt_max_list": ("dt_max_list", lambda s: tuple(_parse_number(t) for t in _parse_list(s))),
    "rho": ("rho", _parse_number),
    "delta": ("delta", _parse_number),
    "rule": ("rule", lambda s: tuple(_parse_list(s))),
    "theta": ("theta", _parse_number),
    "nsee_theta": ("nsee_theta", _parse_number),
    "r": ("r", _parse_number),
    "eps_q": ("eps_q", _parse_number),
    "sigma": ("sigma", _parse_number),
    "eta": ("eta", _parse_number),
    "c": ("c", _parse_number),
    "trials": ("trials", lambda s: int(s)),
    "seed": ("seed", lambda s: int(s)),
    "schemes": ("schemes", lambda s: tuple(_parse_list(s))),
    "outdir": ("outdir", str.strip),
    "x0_amplitude": ("x0_amplitude", _parse_number),
    "block_size": ("block_size", lambda s: int(s)),
    "dealias": ("dealias", _parse_bool),
}


def parse_config_text(text: str) -> ExperimentConfig:
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        field, parser = _PARSERS[key]
        try:
            overrides[field] = parser(value.strip())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return ExperimentConfig(**overrides)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())
