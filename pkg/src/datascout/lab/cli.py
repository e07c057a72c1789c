"""Lab command line: fixture generation and the three experiments.

Every command writes its outputs (JSON, CSV, SVG where applicable) plus a
configs.json describing exactly what ran into the chosen results directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..experts import TrainConfig
from ..gating import GatingConfig
from .confusion import ConfusionReport, build_index_local, correlation_experiment
from .downstream import (
    downstream_compare,
    incremental_build_check,
    mean_accuracy,
    results_to_csv,
    results_to_json,
)
from .fixtures import read_fixture, small_source, standard_fixture, write_fixture


def scatter_svg(report: ConfusionReport, width: int = 480, height: int = 360) -> str:
    """Scatter of (proxy accuracy, domain distance) per subset, as plain SVG."""
    pad = 50
    xs = [s.proxy_accuracy for s in report.subsets]
    ys = [s.distance for s in report.subsets]
    x_lo, x_hi = 0.0, 1.0
    y_lo, y_hi = -2.0, 2.0

    def px(x):
        return pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">proxy accuracy</text>',
        f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" text-anchor="middle">domain distance</text>',
    ]
    for x, y, s in zip(xs, ys, report.subsets):
        parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="5" fill="#1f77b4"/>')
        parts.append(
            f'<text x="{px(x) + 8:.1f}" y="{py(y) - 6:.1f}" font-size="10">S{s.subset_index}</text>'
        )
    corr = "undefined" if report.correlation_undefined else f"{report.rank_correlation:.3f}"
    parts.append(f'<text x="{pad}" y="{pad - 14}" font-size="12">rank correlation: {corr}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def _write_configs(out: Path, command: str, **cfg) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "configs.json").write_text(json.dumps({"command": command, **cfg}, sort_keys=True, indent=2))


def cmd_fixture_generate(args) -> int:
    fixture = standard_fixture(seed=args.seed)
    write_fixture(fixture, args.out)
    _write_configs(Path(args.out), "fixture-generate", seed=args.seed)
    print(f"fixture written to {args.out} (matching blob {fixture.matching_blob})")
    return 0


def cmd_correlate(args) -> int:
    fixture = read_fixture(args.fixture)
    out = Path(args.out)
    gating_cfg = GatingConfig(K=args.k, scheme="unsupervised", seed=args.seed)
    train_cfg = TrainConfig(seed=args.seed)
    partition, experts = build_index_local(fixture.source, gating_cfg, train_cfg)
    report = correlation_experiment(fixture.source, partition, experts, fixture.target, args.seed)
    _write_configs(out, "correlate", K=args.k, seed=args.seed, fixture=str(args.fixture))
    (out / "confusion_report.json").write_text(report.to_json() + "\n")
    rows = ["subset_index,epsilon,distance,proxy_accuracy"]
    rows += [
        f"{s.subset_index},{s.epsilon:.6f},{s.distance:.6f},{s.proxy_accuracy:.6f}"
        for s in report.subsets
    ]
    (out / "confusion_report.csv").write_text("\n".join(rows) + "\n")
    (out / "confusion_scatter.svg").write_text(scatter_svg(report) + "\n")
    corr = "undefined" if report.correlation_undefined else f"{report.rank_correlation:.4f}"
    print(f"rank correlation (accuracy vs distance): {corr}")
    print(f"best proxy subset: {report.best_proxy_subset}, nearest subset: {report.nearest_subset}")
    return 0


def cmd_compare(args) -> int:
    fixture = read_fixture(args.fixture)
    out = Path(args.out)
    budgets = [float(v) for v in args.budgets.split(",")]
    seeds = list(range(args.seeds))
    gating_cfg = GatingConfig(K=args.k, scheme="unsupervised", seed=0)
    partition, experts = build_index_local(fixture.source, gating_cfg, TrainConfig())
    results = downstream_compare(
        fixture.source, partition, experts, fixture.target, fixture.target_val, budgets, seeds
    )
    _write_configs(out, "compare", K=args.k, budgets=budgets, seeds=seeds, fixture=str(args.fixture))
    (out / "downstream_results.json").write_text(results_to_json(results) + "\n")
    (out / "downstream_results.csv").write_text(results_to_csv(results))
    n = len(fixture.source.items)
    print(f"{'budget':>8} {'weighted':>8} {'uniform':>8} {'full':>8} {'none':>8}")
    for frac in budgets:
        b = max(1, round(frac * n))
        row = [mean_accuracy(results, m, b) for m in ("weighted", "uniform", "full", "none")]
        print(f"{b:>8} " + " ".join(f"{v:>8.4f}" for v in row))
    return 0


def cmd_incremental(args) -> int:
    out = Path(args.out)
    a = small_source("inc-a", args.base_items, seed=1)
    a_scaled = small_source("inc-a", args.base_items * 10, seed=1)
    b = small_source("inc-b", args.base_items, seed=2)
    report = incremental_build_check(a, a_scaled, b, out / "stores")
    _write_configs(out, "incremental", base_items=args.base_items)
    (out / "incremental_report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="datascout-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="fixture management")
    fsub = p.add_subparsers(dest="fixture_command", required=True)
    g = fsub.add_parser("generate", help="write the standard fixture")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_fixture_generate)

    p = sub.add_parser("correlate", help="proxy accuracy vs domain distance per subset")
    p.add_argument("--fixture", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("compare", help="downstream accuracy by selection method")
    p.add_argument("--fixture", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budgets", default="0.2,0.4")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("incremental", help="dataset growth isolation and timing")
    p.add_argument("--out", required=True)
    p.add_argument("--base-items", type=int, default=300)
    p.set_defaults(func=cmd_incremental)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # lab is a reporting tool: fail loudly but cleanly
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
