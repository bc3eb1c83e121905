"""Read-only figure rendering for the experiment CSV outputs.

Four figure kinds, one per CSV contract:

- ``profile``: density profile overlay (``x`` plus any ``rho_*`` columns,
  e.g. profile.csv or godunov.csv); several inputs overlay on one axis.
- ``marginal``: empirical occupancy histogram against the equilibrium pmf
  (``n,empirical,theta``).
- ``currents``: per-replica current rates grouped by check
  (``check,replica,rate``).
- ``slow-site``: mean slow-site occupancy against time (``time,occ_mean``).

No statistics are recomputed here; columns are plotted as emitted.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

__version__ = "0.1.0"


class PlotsError(ValueError):
    pass


def load_csv(path: str, required: tuple[str, ...]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except (FileNotFoundError, pd.errors.EmptyDataError) as e:
        raise PlotsError(f"{path}: {e}") from e
    if df.empty:
        raise PlotsError(f"{path}: no data rows")
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise PlotsError(f"{path}: missing columns {missing}, found {list(df.columns)}")
    return df


def _new_axes(title: str | None):
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    if title:
        ax.set_title(title)
    return fig, ax


def _save(fig, out_path: str) -> None:
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)


def render_profile(in_paths: list[str], out_path: str, title: str | None = None) -> None:
    fig, ax = _new_axes(title)
    for path in in_paths:
        df = load_csv(path, ("x",))
        value_cols = [c for c in df.columns if c != "x"]
        if not value_cols:
            raise PlotsError(f"{path}: no profile columns besides 'x'")
        for col in value_cols:
            style = "--" if "exact" in col else "-"
            ax.plot(df["x"], df[col], style, label=col)
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend()
    _save(fig, out_path)


def render_marginal(in_paths: list[str], out_path: str, title: str | None = None) -> None:
    (path,) = _single(in_paths)
    df = load_csv(path, ("n", "empirical", "theta"))
    fig, ax = _new_axes(title)
    ax.bar(df["n"], df["empirical"], width=0.8, alpha=0.6, label="empirical")
    ax.plot(df["n"], df["theta"], "o-", color="C3", label="theta")
    ax.set_xlabel("occupancy n")
    ax.set_ylabel("probability")
    ax.legend()
    _save(fig, out_path)


def render_currents(in_paths: list[str], out_path: str, title: str | None = None) -> None:
    (path,) = _single(in_paths)
    df = load_csv(path, ("check", "replica", "rate"))
    fig, ax = _new_axes(title)
    for name, grp in df.groupby("check", sort=True):
        ax.plot(grp["replica"], grp["rate"], "o-", ms=3, label=str(name))
    ax.set_xlabel("replica")
    ax.set_ylabel("current rate")
    ax.legend()
    _save(fig, out_path)


def render_slow_site(in_paths: list[str], out_path: str, title: str | None = None) -> None:
    (path,) = _single(in_paths)
    df = load_csv(path, ("time", "occ_mean"))
    fig, ax = _new_axes(title)
    ax.plot(df["time"], df["occ_mean"], "o-")
    ax.set_xlabel("time")
    ax.set_ylabel("mean slow-site occupancy")
    _save(fig, out_path)


def _single(in_paths: list[str]) -> list[str]:
    if len(in_paths) != 1:
        raise PlotsError(f"this figure kind takes exactly one input, got {len(in_paths)}")
    return in_paths


RENDERERS = {
    "profile": render_profile,
    "marginal": render_marginal,
    "currents": render_currents,
    "slow-site": render_slow_site,
}
