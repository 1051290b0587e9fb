"""Flat ``key = value`` configuration files and the built-in experiment presets."""

from __future__ import annotations

from pathlib import Path

from .runner import ExperimentSpec

RECIPE_KEYS = ("d", "n", "a", "b", "r", "sigma_max", "sigma_min", "count", "decay", "N", "clip")


def parse_kv(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split(sep, 1))
        out[key.replace("-", "_")] = value
    return out


def load_kv(path) -> dict:
    path = Path(path)
    try:
        return parse_kv(path.read_text(), str(path))
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc


def parse_seed(text) -> int:
    """Decimal or ``0x`` hexadecimal unsigned 64-bit seed."""
    s = str(text).strip().lower()
    value = int(s, 16) if s.startswith("0x") else int(s, 10)
    if not 0 <= value < 2**64:
        raise ValueError(f"seed {text!r} is not an unsigned 64-bit integer")
    return value


def parse_rank(text):
    """``"3"`` gives ``3``; ``"3,4,3"`` gives a tuple."""
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise ValueError("empty rank")
    values = tuple(int(p) for p in parts)
    return values[0] if len(values) == 1 else values


def parse_rank_grid(text) -> tuple:
    """Grid entries separated by ``;`` or whitespace; ``a..b`` expands to a range."""
    grid = []
    for item in str(text).replace(";", " ").split():
        if ".." in item:
            lo, hi = item.split("..")
            grid.extend(range(int(lo), int(hi) + 1))
        else:
            grid.append(parse_rank(item))
    return tuple(grid)


def _list(text):
    return tuple(p.strip() for p in str(text).replace(";", ",").split(",") if p.strip())


def spec_from_kv(kv: dict) -> ExperimentSpec:
    kv = dict(kv)
    params = {k: kv[k] for k in RECIPE_KEYS if k in kv}
    return ExperimentSpec(
        name=kv.get("name", kv.get("recipe", "experiment")),
        recipe=kv["recipe"],
        methods=_list(kv.get("methods", "stta")),
        rank_grid=parse_rank_grid(kv["ranks"]),
        recipe_params=params,
        oversampling=tuple(p.strip() for p in kv.get("oversampling", "2r").split(";") if p.strip()),
        oversample_side=kv.get("oversample_side", "left"),
        drm_kinds=_list(kv.get("drm_kinds", "gaussian")),
        trials=int(kv.get("trials", 30)),
        seed=parse_seed(kv.get("seed", 0)),
    )


_SQRT30 = 30**0.5

PRESETS = {
    "hilbert": dict(recipe="hilbert", d="7", n="5", methods="tt-svd,stta,tt-hmt", drm_kinds="gaussian,tt",
                    ranks="2..6"),
    "sqrt-sum": dict(recipe="sqrt-sum", d="5", n="10", a="0.2", b="2", methods="tt-svd,stta,tt-hmt",
                     drm_kinds="gaussian,tt", ranks="2..8"),
    "tt-plus-sparse": dict(recipe="tt-plus-sparse", methods="tt-svd,stta,tt-hmt", drm_kinds="gaussian,tt",
                           ranks="1..10"),
    "sum-of-tt": dict(recipe="sum-of-tt", methods="tt-svd,stta,tt-hmt,otts", drm_kinds="gaussian,tt",
                      ranks="1..10"),
    "random-cp": dict(recipe="random-cp", methods="tt-svd,stta,tt-hmt", drm_kinds="gaussian,tt", ranks="1..10"),
    "oversampling": dict(recipe="sum-of-tt", methods="stta", drm_kinds="gaussian", ranks="10",
                         oversampling=";".join(f"r+{ell}" for ell in range(2, 21, 2)), oversample_side="right"),
    "timing": dict(recipe="decaying-tt", d="5", n="50", r="40", sigma_max="1", sigma_min="1e-10",
                   methods="stta,tt-hmt", drm_kinds="tt", ranks="5;10;20;30;40", oversampling="r+3;2r", trials="20"),
}


def preset_specs(name: str, full_size: bool = False, **overrides) -> list:
    """Specs for a named preset. ``order-scaling`` expands into one spec per order d = 3..10."""
    if name == "order-scaling":
        out = []
        for d in range(3, 11):
            kv = dict(recipe="decaying-tt", name=f"order-scaling-d{d}", d=str(d), n="10", r="30", clip="true",
                      sigma_max=str(_SQRT30), sigma_min=str(_SQRT30 * 1e-20), methods="tt-svd,stta,tt-hmt",
                      drm_kinds="tt", ranks="10")
            kv.update(overrides)
            out.append(spec_from_kv(kv))
        return out
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS) + ['order-scaling'])}")
    kv = dict(PRESETS[name], name=name)
    if name == "timing" and full_size:
        kv.update(n="150", r="150", ranks="10;25;50;75;100;150")
    kv.update(overrides)
    return [spec_from_kv(kv)]


PRESET_NAMES = tuple(sorted(PRESETS)) + ("order-scaling",)
