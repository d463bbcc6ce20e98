"""Command-line front end.

Subcommands: ``synth`` (write a synthetic instance), ``analyze``
(correlation summary and profiles), ``generate`` (scenario CSVs),
``solve`` (one routing query), ``stability`` (the sweep protocol).
Exit codes: 0 ok, 2 input problem, 3 infeasible query, 4 violated
internal invariant.  Identical flags produce byte-identical output
files; the CORRPATH_SEED environment variable supplies the default
seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import (
    CorrpathError,
    InfeasibleError,
    InputError,
    InternalInvariantError,
    DegenerateObjective,
)
from .network import load_network, save_network
from .objectives import MeetParams, ObjectiveSpec
from .scenarios import (
    CopulaScenarioGenerator,
    RandomSampler,
    full_set,
    load_scenarios,
    save_scenarios,
)
from .solver import hall_solve
from .speeds import VarKey, correlation_summary, load_speeds, profile, save_speeds
from .stability import (
    RsAggregate,
    derive_seed,
    ord_pct,
    rd,
    rs_repeated,
    run_stability,
    var,
)
from .synth import SynthSpec, generate_panel, random_network

ENV_SEED = "CORRPATH_SEED"


def parse_clock(text: str) -> float:
    """Seconds from midnight out of decimal hours ('8.88') or 'H:MM[:SS]'."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (2, 3):
                raise ValueError(f"expected H:MM or H:MM:SS, got {text!r}")
            h, m = int(parts[0]), int(parts[1])
            s = float(parts[2]) if len(parts) == 3 else 0.0
            if not (0 <= m < 60 and 0 <= s < 60):
                raise ValueError(f"minutes and seconds must be in [0, 60): {text!r}")
            return h * 3600.0 + m * 60.0 + s
        return float(text) * 3600.0
    except ValueError as exc:
        raise InputError(f"bad clock time {text!r}: {exc}") from None


def parse_od(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError:
        raise InputError(f"bad --od {text!r}, expected 'origin,destination'") from None


def parse_sizes(text: str) -> tuple[int, ...]:
    """Set sizes: 'start:stop:step' (stop inclusive), or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (int(p) for p in text.split(":"))
            if step < 1 or stop < start:
                raise ValueError("need start <= stop and step >= 1")
            return tuple(range(start, stop + 1, step))
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise InputError(f"bad --sizes {text!r}: {exc}") from None


def _effective_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    raw = os.environ.get(ENV_SEED, "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{ENV_SEED} must be an integer, got {raw!r}") from None


def _fmt(x) -> str:
    """Stable cell formatting: floats through repr, None as empty."""
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _objective_spec(args) -> ObjectiveSpec:
    meet = MeetParams()
    if args.meet_params is not None:
        try:
            vals = tuple(float(p) for p in args.meet_params.split(","))
        except ValueError:
            raise InputError(f"bad --meet-params {args.meet_params!r}") from None
        if len(vals) != 7:
            raise InputError("--meet-params needs 7 comma-separated numbers")
        meet = MeetParams(*vals)
    return ObjectiveSpec(
        kind=args.objective,
        depart_s=parse_clock(args.depart),
        std_weight=args.theta,
        due_s=parse_clock(args.due) if args.due is not None else None,
        earliest_s=parse_clock(args.earliest) if args.earliest is not None else None,
        reliability=args.alpha,
        meet=meet,
    )


def _add_objective_flags(sub) -> None:
    sub.add_argument("--objective", required=True, choices=["f1", "f2", "f3", "f4", "f5", "f6"])
    sub.add_argument("--depart", default="0.0", help="departure clock time (decimal hours or H:MM:SS)")
    sub.add_argument("--theta", type=float, default=1.27, help="f1 std weight")
    sub.add_argument("--due", default=None, help="f4/f5 due clock time")
    sub.add_argument("--earliest", default=None, help="f5 window start clock time")
    sub.add_argument("--alpha", type=float, default=0.9, help="f6 probability level")
    sub.add_argument("--meet-params", default=None,
                     help="7 comma-separated emission coefficients (f3)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrpath")
    ap.add_argument("--version", action="version", version=f"corrpath {__version__}")
    subs = ap.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("synth", help="write a synthetic links/speeds instance")
    sp.add_argument("--nodes", type=int, default=20)
    sp.add_argument("--links", type=int, default=40)
    sp.add_argument("--periods", type=int, default=24)
    sp.add_argument("--days", type=int, default=102)
    sp.add_argument("--spatial-rho", type=float, default=0.3)
    sp.add_argument("--temporal-rho", type=float, default=0.5)
    sp.add_argument("--base-speed", type=float, default=60.0)
    sp.add_argument("--sigma", type=float, default=0.15)
    sp.add_argument("--floor", type=float, default=1.0)
    sp.add_argument("--first-period", type=int, default=0)
    sp.add_argument("--period-minutes", type=float, default=5.0)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out-links", required=True)
    sp.add_argument("--out-speeds", required=True)

    ap_an = subs.add_parser("analyze", help="pairwise correlation summary")
    ap_an.add_argument("--links", required=True)
    ap_an.add_argument("--speeds", required=True)
    ap_an.add_argument("--level", type=float, default=0.05)
    ap_an.add_argument("--pair-budget", type=int, default=100_000_000)
    ap_an.add_argument("--sample-size", type=int, default=1_000_000)
    ap_an.add_argument("--exact", action="store_true",
                       help="fail instead of sampling when over the pair budget")
    ap_an.add_argument("--seed", type=int, default=None)
    ap_an.add_argument("--out", default=None, help="summary CSV (default stdout)")
    ap_an.add_argument("--profile", choices=["spatial", "temporal"], default=None)
    ap_an.add_argument("--link", type=int, default=None, help="profile anchor link id")
    ap_an.add_argument("--period", type=int, default=None, help="profile anchor period label")
    ap_an.add_argument("--profile-out", default=None, help="profile CSV (default stdout)")

    gp = subs.add_parser("generate", help="write a scenario CSV plus sidecar")
    gp.add_argument("--links", required=True)
    gp.add_argument("--speeds", required=True)
    gp.add_argument("--method", required=True, choices=["sg", "rs"])
    gp.add_argument("--count", type=int, required=True)
    gp.add_argument("--seed", type=int, default=None)
    gp.add_argument("--out", required=True)

    sv = subs.add_parser("solve", help="one routing query on a scenario file")
    sv.add_argument("--links", required=True)
    sv.add_argument("--scenarios", required=True)
    sv.add_argument("--od", required=True)
    _add_objective_flags(sv)
    sv.add_argument("--k-max", type=int, default=10_000)
    sv.add_argument("--out", default=None, help="result JSON (default stdout)")

    st = subs.add_parser("stability", help="stability sweep over set sizes")
    st.add_argument("--links", required=True)
    st.add_argument("--speeds", required=True)
    st.add_argument("--methods", default="sg,rs")
    st.add_argument("--sizes", default=None, help="'start:stop:step' or comma list "
                                                  "(default 10 upward in steps of 5)")
    st.add_argument("--m", type=int, default=4, help="half width of the size window")
    st.add_argument("--runs", type=int, default=10, help="rs repetitions per size")
    st.add_argument("--od", required=True)
    _add_objective_flags(st)
    st.add_argument("--goal-rd", default=None, help="comma list of rd goals (percent)")
    st.add_argument("--no-ord", action="store_true", help="skip the full-panel gap column")
    st.add_argument("--seed", type=int, default=None)
    st.add_argument("--k-max", type=int, default=10_000)
    st.add_argument("--jobs", type=int, default=1)
    st.add_argument("--out", required=True, help="report CSV")

    return ap


def _cmd_synth(args) -> int:
    seed = _effective_seed(args.seed)
    spec = SynthSpec(
        n_nodes=args.nodes,
        n_links=args.links,
        n_periods=args.periods,
        n_days=args.days,
        spatial_rho=args.spatial_rho,
        temporal_rho=args.temporal_rho,
        base_speed_kmh=args.base_speed,
        sigma_log=args.sigma,
        speed_floor_kmh=args.floor,
        period_minutes=args.period_minutes,
        first_period=args.first_period,
        seed=seed,
    )
    net = random_network(spec.n_nodes, spec.n_links, derive_seed(seed, 10))
    panel = generate_panel(net, spec)
    save_network(net, args.out_links)
    save_speeds(panel, args.out_speeds)
    return 0


def _write_summary(summary, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["bin_low", "bin_high", "count"])
    for lo, hi, count in zip(summary.bin_edges, summary.bin_edges[1:], summary.counts):
        writer.writerow([_fmt(lo), _fmt(hi), count])
    for key in (
        "n_variables", "n_zero_variance", "n_pairs_total", "n_pairs_counted",
        "level", "t_critical", "threshold", "insignificant_frac",
        "significant_frac", "frac_abs_above", "abs_cutoff", "sampled",
    ):
        val = getattr(summary, key)
        if isinstance(val, bool):
            val = "true" if val else "false"
        fh.write(f"# {key}={_fmt(val)}\n")


def _cmd_analyze(args) -> int:
    net = load_network(args.links)
    panel = load_speeds(args.speeds, net)
    summary = correlation_summary(
        panel,
        level=args.level,
        pair_budget=args.pair_budget,
        sample_size=args.sample_size,
        seed=_effective_seed(args.seed),
        allow_sampling=not args.exact,
    )
    if args.out is None:
        _write_summary(summary, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            _write_summary(summary, fh)
    if args.profile is not None:
        if args.link is None or args.period is None:
            raise InputError("--profile needs --link and --period")
        if args.link not in net.row_by_link_id:
            raise InputError(f"link id {args.link} not in the network")
        period_index = args.period - panel.period_offset
        if not 0 <= period_index < panel.n_periods:
            raise InputError(f"period {args.period} outside the panel window")
        anchor = VarKey(net.row_by_link_id[args.link], period_index)
        entries = profile(panel, anchor, args.profile, level=args.level)
        def write_profile(fh):
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["link_id", "period", "r", "significant", "zero_variance"])
            for e in entries:
                writer.writerow([
                    net.links[e.key.link].link_id,
                    panel.period_offset + e.key.period,
                    _fmt(e.r),
                    "true" if e.significant else "false",
                    "true" if e.zero_variance else "false",
                ])
        if args.profile_out is None:
            write_profile(sys.stdout)
        else:
            with open(args.profile_out, "w", newline="") as fh:
                write_profile(fh)
    return 0


def _cmd_generate(args) -> int:
    net = load_network(args.links)
    panel = load_speeds(args.speeds, net)
    seed = _effective_seed(args.seed)
    if args.method == "sg":
        sset = CopulaScenarioGenerator().fit(panel).sample(args.count, seed)
    else:
        sset = RandomSampler().fit(panel).sample(args.count, seed)
    save_scenarios(sset, args.out)
    return 0


def _cmd_solve(args) -> int:
    net = load_network(args.links)
    sset = load_scenarios(args.scenarios, net)
    spec = _objective_spec(args)
    origin, destination = parse_od(args.od)
    result = hall_solve(net, sset, spec, origin, destination, k_max=args.k_max)
    units = "kg" if spec.kind == "f3" else "seconds"
    payload = {
        "objective": spec.kind,
        "origin": origin,
        "destination": destination,
        "depart_s": spec.depart_s,
        "nodes": list(result.path.nodes),
        "link_ids": [net.links[r].link_id for r in result.path.links],
        "value": result.value,
        "units": units,
        "k_explored": result.k_explored,
        "optimal": result.optimal,
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


STABILITY_COLUMNS = (
    "method", "objective", "od", "S", "m", "rd_pct", "var", "ord_pct",
    "rs_min_rd", "rs_mean_rd", "rs_max_rd",
    "rs_min_var", "rs_mean_var", "rs_max_var",
    "goal_rd_pct", "s_required",
)


def _stability_cell(payload):
    """One (method, size) sweep cell; top level so worker processes can run it."""
    (net, panel, method, size, spec, origin, destination, m, runs, seed,
     k_max, want_ord, generator, full_sset, full_result) = payload
    row = {"method": method, "S": size, "m": m}
    if method == "sg":
        run = run_stability(
            net, panel, "sg", size, spec, origin, destination,
            half_width=m, seed=derive_seed(seed, 3, size), generator=generator, k_max=k_max,
        )
        try:
            row["rd_pct"] = rd(run)
        except DegenerateObjective:
            row["rd_pct"] = None
        row["var"] = var(run)
        if want_ord:
            row["ord_pct"] = ord_pct(run, net, panel, full_sset, full_result)
    else:
        agg = rs_repeated(
            net, panel, size, spec, origin, destination,
            half_width=m, runs=runs, seed=derive_seed(seed, 3, size), k_max=k_max,
        )
        row["rd_pct"] = agg.rd_mean
        row["var"] = agg.var_mean
        row["rs_min_rd"] = agg.rd_min
        row["rs_mean_rd"] = agg.rd_mean
        row["rs_max_rd"] = agg.rd_max
        row["rs_min_var"] = agg.var_min
        row["rs_mean_var"] = agg.var_mean
        row["rs_max_var"] = agg.var_max
        if want_ord:
            gaps = [ord_pct(r, net, panel, full_sset, full_result) for r in agg.runs]
            row["ord_pct"] = float(np.mean(gaps))
    return row


def _cmd_stability(args) -> int:
    net = load_network(args.links)
    panel = load_speeds(args.speeds, net)
    spec = _objective_spec(args)
    origin, destination = parse_od(args.od)
    seed = _effective_seed(args.seed)
    methods = tuple(m.strip().lower() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in ("sg", "rs"):
            raise InputError(f"unknown method {m!r} in --methods")
    if args.m < 0:
        raise InputError("--m must be >= 0")
    if args.sizes is not None:
        sizes = parse_sizes(args.sizes)
    else:
        sizes = tuple(range(10, panel.n_days - args.m + 1, 5))
    if not sizes:
        raise InputError("the size grid is empty")
    goals = ()
    if args.goal_rd is not None:
        try:
            goals = tuple(float(g) for g in args.goal_rd.split(","))
        except ValueError:
            raise InputError(f"bad --goal-rd {args.goal_rd!r}") from None

    want_ord = not args.no_ord
    full_sset = full_set(panel) if want_ord else None
    full_result = (
        hall_solve(net, full_sset, spec, origin, destination, k_max=args.k_max)
        if want_ord else None
    )
    generator = CopulaScenarioGenerator().fit(panel) if "sg" in methods else None

    cells = []
    for method in methods:
        for size in sizes:
            if size - args.m < 1:
                continue
            if method == "rs" and size + args.m > panel.n_days:
                continue
            cells.append((
                net, panel, method, size, spec, origin, destination,
                args.m, args.runs, seed, args.k_max, want_ord,
                generator if method == "sg" else None, full_sset, full_result,
            ))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_stability_cell, cells))
    else:
        rows = [_stability_cell(c) for c in cells]

    od_text = f"{origin}-{destination}"
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STABILITY_COLUMNS)
        for row in rows:
            writer.writerow([
                row.get("method"), spec.kind, od_text,
                row.get("S"), row.get("m"),
                _fmt(row.get("rd_pct")), _fmt(row.get("var")), _fmt(row.get("ord_pct")),
                _fmt(row.get("rs_min_rd")), _fmt(row.get("rs_mean_rd")), _fmt(row.get("rs_max_rd")),
                _fmt(row.get("rs_min_var")), _fmt(row.get("rs_mean_var")), _fmt(row.get("rs_max_var")),
                "", "",
            ])
        for method in methods:
            swept = [(r["S"], r["rd_pct"]) for r in rows
                     if r["method"] == method and r.get("rd_pct") is not None]
            for goal in goals:
                hit = next((s for s, value in swept if value <= goal), None)
                writer.writerow([
                    method, spec.kind, od_text, "", args.m,
                    "", "", "", "", "", "", "", "", "",
                    _fmt(goal), _fmt(hit),
                ])
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "stability": _cmd_stability,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except InternalInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CorrpathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
