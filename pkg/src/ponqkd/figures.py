"""Optional figure rendering for the command-line reports.

Each function takes the same data that goes into a subcommand's CSV and
renders one PNG next to it.  The Agg backend is forced so rendering works in
headless environments; nothing here is needed for the numerical results.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_simulate",
    "plot_distance_sweep",
    "plot_clock_sweep",
    "plot_pdl_sweep",
    "plot_compensation",
    "plot_shared_bits",
    "plot_max_distance",
]

_DPI = 150


def _save(fig, png_path: str):
    fig.tight_layout()
    fig.savefig(png_path, dpi=_DPI)
    plt.close(fig)


def plot_simulate(result, png_path: str):
    """QBER component bars plus a rate annotation for a single link run."""
    stats = result.stats
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    labels = ["total", "leak", "dark", "jitter"]
    values = [stats.qber, stats.qber_leak, stats.qber_dark, stats.qber_jitter]
    values = [0.0 if v != v else 100.0 * v for v in values]  # NaN-safe
    ax.bar(labels, values, color=["#444444", "#1f77b4", "#d62728", "#2ca02c"])
    ax.set_ylabel("QBER (%)")
    ax.set_title(f"receiver {result.receiver}: sifted "
                 f"{stats.sifted_rate_bps:.3g} bit/s, net "
                 f"{result.rates.net_rate_bps:.3g} bit/s")
    _save(fig, png_path)


def plot_distance_sweep(points, png_path: str):
    """Key rates (log scale) and QBER against fiber length."""
    d = [p[0] for p in points]
    sifted = [p[1].stats.sifted_rate_bps for p in points]
    net = [p[1].rates.net_rate_bps for p in points]
    qber = [100.0 * p[1].stats.qber for p in points]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ax1.semilogy(d, sifted, "o-", label="sifted")
    ax1.semilogy(d, [max(n, 1e-12) for n in net], "s--", label="net")
    ax1.set_xlabel("distance (km)")
    ax1.set_ylabel("rate (bit/s)")
    ax1.legend()
    ax2.plot(d, qber, "o-", color="#d62728")
    ax2.set_xlabel("distance (km)")
    ax2.set_ylabel("QBER (%)")
    _save(fig, png_path)


def plot_clock_sweep(points, png_path: str):
    """QBER components against pulse rate; jitter errors grow with the clock."""
    c = [p[0] / 1e9 for p in points]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    for key, label, style in (("qber", "total", "ko-"),
                              ("qber_jitter", "jitter", "g^-"),
                              ("qber_dark", "dark", "rs-"),
                              ("qber_leak", "leak", "bv-")):
        vals = [100.0 * getattr(p[1].stats, key) for p in points]
        ax1.plot(c, [0.0 if v != v else v for v in vals], style, label=label)
    ax1.set_xlabel("clock (GHz)")
    ax1.set_ylabel("QBER (%)")
    ax1.legend()
    ax2.plot(c, [p[1].stats.sifted_rate_bps for p in points], "o-")
    ax2.set_xlabel("clock (GHz)")
    ax2.set_ylabel("sifted rate (bit/s)")
    _save(fig, png_path)


def plot_pdl_sweep(result, png_path: str):
    """Relative net rate against element orientation."""
    a = [p.a_deg for p in result.points]
    rel = [100.0 * p.net_rate_relative for p in result.points]
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(a, rel, "-", lw=1.0)
    ax.axhline(100.0 - result.average_decrease_pct, color="#d62728", ls="--",
               label=f"average (-{result.average_decrease_pct:.2f}%)")
    ax.set_xlabel("state-1 orientation (deg)")
    ax.set_ylabel("net rate vs no PDL (%)")
    ax.legend()
    _save(fig, png_path)


def plot_compensation(rows, png_path: str):
    """Compensated vs uncompensated rate penalty over operating QBER.

    ``rows`` holds ``(qber, uncompensated_pct, compensated_pct)`` triples.
    """
    q = [100.0 * r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(q, [r[1] for r in rows], "o-", label="uncompensated average")
    ax.plot(q, [r[2] for r in rows], "s-", label="compensated (best orientation)")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("QBER (%)")
    ax.set_ylabel("net-rate decrease (%)")
    ax.legend()
    _save(fig, png_path)


def plot_shared_bits(rows, png_path: str):
    """Monte Carlo shared-bit fraction against the closed form.

    ``rows`` holds ``(mu, mc_percent, mc_se_percent, analytic_percent)``.
    """
    mu = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.errorbar(mu, [r[1] for r in rows], yerr=[3.0 * r[2] for r in rows],
                fmt="o", capsize=3, label="Monte Carlo (3 s.e.)")
    ax.plot(mu, [r[3] for r in rows], "--", label="closed form")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("pairwise shared bits (%)")
    ax.legend()
    _save(fig, png_path)


def plot_max_distance(curve, max_km: float, limit: float, png_path: str):
    """Extrapolated QBER over distance with the zero-rate limit marked.

    ``curve`` holds ``(distance_km, qber)`` pairs.
    """
    d = np.array([c[0] for c in curve])
    q = 100.0 * np.array([c[1] for c in curve])
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(d, q, "-")
    ax.axhline(100.0 * limit, color="#d62728", ls="--", label="zero-rate QBER")
    ax.axvline(max_km, color="#2ca02c", ls=":", label=f"max {max_km:.2f} km")
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("extrapolated QBER (%)")
    ax.legend()
    _save(fig, png_path)
