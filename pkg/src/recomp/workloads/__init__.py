"""Shipped microbenchmark programs (``.tp`` text)."""

from __future__ import annotations

from importlib import resources


def names() -> list[str]:
    return sorted(p.name[:-3] for p in resources.files(__name__).iterdir() if p.name.endswith(".tp"))


def text(name: str) -> str:
    p = resources.files(__name__) / f"{name}.tp"
    if not p.is_file():
        raise KeyError(f"no shipped workload named {name!r}")
    return p.read_text()


def load(name: str):
    from ..program import parse_program

    return parse_program(text(name))
