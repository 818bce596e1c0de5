"""Command-line driver: ``talbotlau <command> --config scenario.toml``.

Every command writes plain CSV plus a ``manifest_<command>.json`` that echoes
the fully resolved scenario and the physical constants. Output is written
only after all rows are computed, and reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import beam, config, moire, oracle, talbot
from .constants import TABLE
from .errors import ConfigError, DomainError, StatisticsError, TalbotLauError
from .geometry import (
    ASYMMETRIC,
    SetupGeometry,
    classicality_margin,
    de_broglie,
    equal_length_pair,
    fringe_displacement,
    integer_order,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_STATISTICS = 4
EXIT_OTHER = 1

COMMANDS = ("design", "pattern", "carpet", "visibility", "fit", "moire", "sensitivity", "verify")


def _fmt(x) -> str:
    """Shortest round-trip repr, so output is stable and lossless."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


class Output:
    """Collects files in memory; ``flush`` writes them all at the end."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self.files[name] = buf.getvalue()

    def json(self, name: str, payload) -> None:
        self.files[name] = json.dumps(payload, indent=2, sort_keys=True, default=_fmt) + "\n"

    def flush(self) -> list[Path]:
        self.directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in sorted(self.files):
            p = self.directory / name
            p.write_text(self.files[name])
            paths.append(p)
        return paths


class Run:
    def __init__(self, sc: config.Scenario, threads: int, out: Output, echo: Callable[[str], None]):
        self.sc = sc
        self.threads = threads
        self.out = out
        self.echo = echo

    def geometry(self, s: config.SetupSection) -> SetupGeometry:
        return config.build_setup(s, self.sc.wavelength)

    def context(self, s: config.SetupSection) -> talbot.TalbotContext:
        n = self.sc.numerics
        return talbot.TalbotContext.build(
            self.geometry(s), s.open_fraction, self.sc.beam.mass,
            wavelength=self.sc.wavelength, l_max=n.l_max, n_max=n.n_max,
        )

    def grid(self, geom: SetupGeometry):
        n = self.sc.numerics
        return talbot.period_grid(geom.d3, n.periods, n.samples_per_period)


def cmd_design(run: Run) -> None:
    sc = run.sc
    lam = sc.wavelength
    rows = []
    for s in sc.setups:
        g = run.geometry(s)
        margin = classicality_margin(g, lam)
        ratios = ("", "")
        if s.family == ASYMMETRIC and s.eta >= 1:
            d2_sym = g.d2 * (g.eta + 1.0) / np.sqrt(2.0 * g.eta)
            pair = equal_length_pair(d2_sym, g.eta, lam)
            ratios = (pair.period_ratio, pair.displacement_ratio)
        rows.append((s.id, g.d1, g.d2, g.L, g.total_length, g.d3, integer_order(g),
                     g.talbot_ratio(lam), margin, *ratios))
        run.echo(
            f"{s.id}: q={integer_order(g)} d1={g.d1 * 1e6:.4g} um d2={g.d2 * 1e6:.4g} um "
            f"L={g.L:.4g} m L_total={g.total_length:.4g} m d3={g.d3 * 1e6:.4g} um "
            f"L/L_T={g.talbot_ratio(lam):.4g} classicality={margin:.3g}"
            + (f" period_ratio={ratios[0]:.6g} displacement_ratio={ratios[1]:.6g}" if ratios[0] != "" else "")
        )
    run.out.csv(
        "design.csv",
        ("config_id", "d1_m", "d2_m", "L_m", "L_total_m", "d3_m", "q", "L_over_LT",
         "classicality_margin", "equal_length_period_ratio", "equal_length_displacement_ratio"),
        rows,
    )


def cmd_pattern(run: Run) -> None:
    sc = run.sc
    for s in sc.setups:
        ctx = run.context(s)
        xs = run.grid(ctx.setup)
        dist = config.distribution(sc, ctx.setup, sc.beam.pattern_sigma_rel)
        p = beam.polychromatic_pattern(ctx, dist, s.acceleration, xs, nodes=sc.numerics.nodes)
        run.out.csv(f"pattern_{s.id}.csv", ("x_m", "intensity"), zip(xs, p.intensities))
        run.echo(f"{s.id}: visibility={talbot.visibility(p):.6g}")


def cmd_carpet(run: Run) -> None:
    sc, c = run.sc, run.sc.carpet
    n = int(round((c.ratio_max - c.ratio_min) / c.ratio_step))
    ratios = c.ratio_min + c.ratio_step * np.arange(n + 1)
    for s in sc.setups:
        ctx = run.context(s)
        xs = talbot.period_grid(ctx.period, sc.numerics.periods, c.samples_per_period)
        cp = talbot.carpet(ctx, ratios, xs, a=s.acceleration, threads=run.threads)
        rows = ((r, x, i) for r, row in zip(ratios, cp.intensities) for x, i in zip(xs, row))
        run.out.csv(f"carpet_{s.id}.csv", ("L_over_LT", "x_m", "intensity"), rows)
        run.echo(
            f"{s.id}: visibility peak at L/L_T={cp.peak_ratio():.4g} "
            f"(d1/d2={ctx.setup.d1 / ctx.setup.d2:.4g}), dominant period={cp.dominant_period():.6g} m"
        )


def _curve(run: Run, s: config.SetupSection):
    sc = run.sc
    ctx = run.context(s)
    template = config.distribution(sc, ctx.setup, 0.0)
    rows = beam.visibility_curve(
        ctx, template, list(sc.beam.sigma_rel), s.acceleration, xs=run.grid(ctx.setup),
        nodes=sc.numerics.nodes, threads=run.threads,
    )
    return ctx, rows


def cmd_visibility(run: Run) -> None:
    for s in run.sc.setups:
        _, rows = _curve(run, s)
        run.out.csv(
            f"visibility_{s.id}.csv",
            ("sigma_rel", "contrast", "dx_eff_m", "dx_rel"),
            ((r.sigma_rel, r.contrast, r.dx_eff, r.dx_rel) for r in rows),
        )
        run.echo(f"{s.id}: " + ", ".join(f"{r.sigma_rel:g}->{r.contrast:.4f}" for r in rows))


def cmd_fit(run: Run) -> None:
    sc = run.sc
    for s in sc.setups:
        ctx = run.context(s)
        xs = run.grid(ctx.setup)
        closed = fringe_displacement(s.acceleration, ctx.setup.t1(sc.beam.mean_speed), ctx.setup.eta)
        rows = []
        for sig in sc.beam.sigma_rel:
            dist = config.distribution(sc, ctx.setup, sig)
            dx = beam.effective_displacement_fit(ctx, dist, s.acceleration, xs, nodes=sc.numerics.nodes)
            rows.append((sig, dx, closed, dx / ctx.period))
        run.out.csv(f"fit_{s.id}.csv", ("sigma_rel", "dx_eff_m", "dx_mean_speed_m", "dx_rel"), rows)
        run.echo(f"{s.id}: " + ", ".join(f"{r[0]:g}->{r[1] * 1e6:.4f} um" for r in rows))


def _moire_config(run: Run, s: config.SetupSection, sigma_rel: float) -> moire.MCConfig:
    sc, m = run.sc, run.sc.moire
    g = run.geometry(s)
    if m.d1 is not None:
        # enlarge periods at fixed lengths, keeping the resonance order
        scale = m.d1 / g.d1
        g = SetupGeometry(g.d1 * scale, g.d2 * scale, g.L, g.eta, g.a)
    return moire.MCConfig(
        setup=g,
        dist=config.distribution(sc, g, sigma_rel),
        a=s.acceleration,
        open_fraction=s.open_fraction,
        n_particles=sc.numerics.n_particles,
        bins=sc.numerics.bins,
        seed=sc.numerics.seed,
        source_width=m.source_width,
        transverse_speed_halfwidth=m.transverse_speed_halfwidth,
        source_distance=m.source_distance,
        mass=sc.beam.mass,
    )


def cmd_moire(run: Run) -> None:
    summary = []
    for s in run.sc.setups:
        for sig in run.sc.beam.sigma_rel:
            cfg = _moire_config(run, s, sig)
            h = moire.simulate(cfg, run.threads)
            dx = ""
            if cfg.a != 0:
                dx = moire.mc_displacement(cfg, cfg.with_acceleration(0.0), run.threads)
            tag = s.id if len(run.sc.beam.sigma_rel) == 1 else f"{s.id}_s{sig:g}"
            run.out.csv(f"moire_{tag}.csv", ("bin_center_m", "count"), zip(h.bin_centers, h.counts))
            summary.append((s.id, sig, h.total_accepted, h.contrast_estimate, h.minmax_contrast, dx,
                            moire.expected_displacement(cfg) if cfg.a != 0 else ""))
            run.echo(f"{tag}: accepted={h.total_accepted} contrast={h.contrast_estimate:.4f}"
                     + (f" displacement={dx * 1e6:.4f} um" if dx != "" else ""))
    run.out.csv(
        "moire_summary.csv",
        ("config_id", "sigma_rel", "total_accepted", "contrast", "minmax_contrast",
         "displacement_m", "closed_form_displacement_m"),
        summary,
    )


def cmd_sensitivity(run: Run) -> None:
    sc = run.sc
    n0 = sc.sensitivity.n0
    table = []
    for s in sc.setups:
        ctx, rows = _curve(run, s)
        for r in rows:
            rep = beam.sensitivity(r.contrast, r.dx_eff, ctx.period, s.open_fraction**2 * n0)
            table.append((r.sigma_rel, s.id, r.contrast, r.dx_rel, beam.rescaled_sensitivity(rep, s.open_fraction, n0)))
    table.sort(key=lambda r: (r[0], [x.id for x in sc.setups].index(r[1])))
    run.out.csv("sensitivity.csv", ("sigma_rel", "config_id", "contrast", "dx_rel", "sigma_a_over_a_rescaled"), table)
    for sig in sc.beam.sigma_rel:
        best = min((r for r in table if r[0] == sig), key=lambda r: r[4])
        run.echo(f"sigma_rel={sig:g}: best={best[1]} ({best[4]:.4g})")


def cmd_verify(run: Run) -> None:
    sc, o = run.sc, run.sc.oracle
    rows = []
    for s in sc.setups:
        ctx = run.context(s)
        if s.acceleration != 0:
            run.echo(f"{s.id}: oracle runs at a = 0; acceleration ignored for verification")
        g = replace(ctx.setup, a=0.0)
        ctx = ctx.replace(setup=g)
        xs = talbot.period_grid(g.d3, o.periods, o.samples_per_period)
        ocfg = oracle.OracleConfig.build(
            g, s.open_fraction, sc.wavelength, n_periods=o.n_periods, n_sources=o.n_sources,
            integration_samples=o.integration_samples, method=o.method,
        )
        op = oracle.incoherent_pattern(ocfg, xs, threads=run.threads)
        sp = talbot.monochromatic_pattern(ctx, 0.0, sc.beam.mean_speed, xs)
        dev = oracle.compare(op, sp)
        rows.append((s.id, o.n_periods, dev, talbot.visibility(op), talbot.visibility(sp)))
        run.echo(f"{s.id}: normalized RMS deviation={dev:.4g}")
    run.out.csv("verify.csv", ("config_id", "n_periods", "deviation", "oracle_visibility", "series_visibility"), rows)


HANDLERS = {
    "design": cmd_design,
    "pattern": cmd_pattern,
    "carpet": cmd_carpet,
    "visibility": cmd_visibility,
    "fit": cmd_fit,
    "moire": cmd_moire,
    "sensitivity": cmd_sensitivity,
    "verify": cmd_verify,
}


def manifest(command: str, sc: config.Scenario, threads: int) -> dict:
    return {
        "command": command,
        "config_file": sc.source,
        "scenario": config.resolve(sc),
        "constants": TABLE,
        "threads": threads,
        "mean_wavelength_m": de_broglie(sc.beam.mass, sc.beam.mean_speed),
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="talbotlau", description="Talbot-Lau interferometer toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", required=True, type=Path, help="scenario TOML file")
        c.add_argument("--out", type=Path, default=None, help="output directory (overrides [output])")
        c.add_argument("--seed", type=int, default=None, help="RNG seed (overrides [numerics])")
        c.add_argument("--threads", type=int, default=1)
    return p


def main(argv: Optional[list] = None, echo: Callable[[str], None] = print) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        sc = config.load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            sc = replace(sc, numerics=replace(sc.numerics, seed=args.seed))
        directory = args.out if args.out is not None else Path(sc.output.directory)
        out = Output(directory)
        run = Run(sc, args.threads, out, echo)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            HANDLERS[args.command](run)
        out.json(f"manifest_{args.command}.json", manifest(args.command, sc, args.threads))
        out.flush()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StatisticsError as exc:
        print(f"statistics error: {exc}", file=sys.stderr)
        return EXIT_STATISTICS
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except TalbotLauError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
