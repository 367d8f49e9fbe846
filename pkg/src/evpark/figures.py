"""Figure rendering for sweep output: one PNG per chart next to the CSV."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _series(rows, key):
    return [row.get(key) if row.get(key) is not None else float("nan") for row in rows]


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


_MANDATE_CHARTS = [
    ("avg_price_ev", "average EV price"),
    ("avg_price_ice", "average regular price"),
    ("profit_total", "total firm profit"),
    ("total_welfare", "total welfare"),
    ("total_congestion", "total congestion"),
    ("hhi_ice", "regular-market concentration (HHI)"),
]


def render_mandate_figures(rows, csv_path) -> list[Path]:
    """Line charts over the mandate share, one series per pricing regime."""
    csv_path = Path(csv_path)
    regimes = sorted({row["regime"] for row in rows})
    written = []
    for key, label in _MANDATE_CHARTS:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for regime in regimes:
            sub = [row for row in rows if row["regime"] == regime]
            ax.plot(_series(sub, "r"), _series(sub, key), label=regime)
        ax.set_xlabel("mandate share r")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
        written.append(_save(fig, csv_path.with_name(f"{csv_path.stem}_{key}.png")))
    return written


def render_delta_figures(rows, csv_path) -> list[Path]:
    """Welfare components against the endowment share, one PNG per policy cell."""
    csv_path = Path(csv_path)
    written = []
    for cell in sorted({row["policy"] for row in rows}):
        sub = [row for row in rows if row["policy"] == cell]
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        deltas = _series(sub, "delta")
        for key, label in (
            ("cs_ev", "EV surplus"),
            ("cs_ice", "regular surplus"),
            ("profit_total", "firm profit"),
            ("govt_cost", "government cost"),
            ("total_welfare", "total welfare"),
        ):
            ax.plot(deltas, _series(sub, key), label=label)
        ax.set_xlabel("endowment share delta")
        ax.set_ylabel("welfare components")
        ax.set_title(cell)
        ax.legend(fontsize=8)
        written.append(_save(fig, csv_path.with_name(f"{csv_path.stem}_{cell}.png")))
    return written


def render_monopolist_figures(rows, csv_path) -> list[Path]:
    """Expected profit against capacity, with the solved optimum marked."""
    csv_path = Path(csv_path)
    profile = [row for row in rows if row["row_type"] == "profile"]
    solution = next((row for row in rows if row["row_type"] == "solution"), None)
    if not profile:
        return []
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(_series(profile, "N_e"), _series(profile, "expected_profit"),
            label="best pricing pattern")
    if solution is not None:
        ax.axvline(solution["N_e"], color="tab:red", linestyle="--",
                   label=f"optimum ({solution['case']})")
    ax.set_xlabel("charger capacity share N_e")
    ax.set_ylabel("expected profit")
    ax.legend(fontsize=8)
    return [_save(fig, csv_path.with_name(f"{csv_path.stem}_profile.png"))]
